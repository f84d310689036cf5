#!/usr/bin/env python3
"""Export torchvision VGG-19 conv weights to the inpaint-forge tensor archive.

    python3 tools/export_vgg19_weights.py --out weights/vgg19.ifa
    python3 tools/export_vgg19_weights.py --out weights/vgg19.ifa --random-init

Without --random-init the ImageNet weights are fetched through torchvision
(network access or a warm torch hub cache required).
"""

import argparse
import json
import struct
import sys

import torch
import torchvision

MAGIC = b"IFARCH01"
FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3


def fnv1a64(data: bytes, state: int = FNV_OFFSET) -> int:
    mask = 0xFFFFFFFFFFFFFFFF
    for b in data:
        state = ((state ^ b) * FNV_PRIME) & mask
    return state


def write_archive(path, meta, tensors):
    payload = bytearray()
    index = []
    for name, t in tensors:
        t = t.detach().to("cpu", torch.float32).contiguous()
        raw = t.numpy().tobytes()
        index.append({"name": name, "dtype": "float32", "shape": list(t.shape),
                      "offset": len(payload), "nbytes": len(raw)})
        payload += raw
    header = json.dumps({"meta": meta, "tensors": index}, separators=(",", ":")).encode()
    checksum = fnv1a64(bytes(payload), fnv1a64(header))
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<Q", len(header)))
        f.write(header)
        f.write(payload)
        f.write(struct.pack("<Q", checksum))


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--out", required=True)
    ap.add_argument("--random-init", action="store_true",
                    help="seeded torchvision init instead of ImageNet weights (offline)")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    if args.random_init:
        torch.manual_seed(args.seed)
        model = torchvision.models.vgg19(weights=None)
    else:
        try:
            model = torchvision.models.vgg19(weights=torchvision.models.VGG19_Weights.IMAGENET1K_V1)
        except Exception as e:  # noqa: BLE001
            print(f"could not fetch ImageNet weights ({e}); rerun with --random-init", file=sys.stderr)
            return 1

    tensors = []
    for i, layer in enumerate(model.features):
        if isinstance(layer, torch.nn.Conv2d):
            tensors.append((f"features.{i}.weight", layer.weight))
            tensors.append((f"features.{i}.bias", layer.bias))
    meta = {"format": "inpaint-forge-vgg19", "pretrained": not args.random_init, "seed": args.seed}
    write_archive(args.out, meta, tensors)
    print(f"wrote {len(tensors) // 2} conv layers to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
