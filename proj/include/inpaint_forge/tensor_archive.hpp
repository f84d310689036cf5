#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace inpaint_forge {

// Single-file container for named tensors plus a JSON header.
//
//   bytes 0..7   magic "IFARCH01"
//   u64 LE       header length L
//   L bytes      UTF-8 JSON: {"meta": {...}, "tensors": [{name, dtype, shape, offset, nbytes}]}
//   payload      raw little-endian tensor data, offsets relative to payload start
//   u64 LE       FNV-1a 64 over header bytes followed by payload
//
// dtype is one of "float32", "float64", "int64". Data round-trips bit-exactly.

inline constexpr std::string_view kArchiveMagic = "IFARCH01";

struct NamedTensor {
  std::string name;
  torch::Tensor tensor;
};

class TensorArchive {
 public:
  nlohmann::json meta;

  /// Throws CorruptFileError when `name` is absent.
  const torch::Tensor& at(const std::string& name) const;
  bool contains(const std::string& name) const { return tensors_.count(name) != 0; }
  const std::map<std::string, torch::Tensor>& tensors() const { return tensors_; }
  void insert(std::string name, torch::Tensor tensor);

 private:
  std::map<std::string, torch::Tensor> tensors_;
};

/// Writes atomically (temporary file, then rename).
void write_tensor_archive(const std::filesystem::path& path, const nlohmann::json& meta,
                          const std::vector<NamedTensor>& tensors);

/// Throws FileNotFoundError, or CorruptFileError on any structural or checksum failure.
TensorArchive read_tensor_archive(const std::filesystem::path& path);

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t state = 0xCBF29CE484222325ULL);

}  // namespace inpaint_forge
