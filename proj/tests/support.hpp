#pragma once

// Shared helpers for the test binaries: brute-force metric oracles, a central
// difference gradient checker and small fixtures.

#include <torch/torch.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <random>
#include <unistd.h>
#include <string>
#include <vector>

#include "inpaint_forge/config.hpp"
#include "inpaint_forge/dataset.hpp"
#include "inpaint_forge/image.hpp"
#include "inpaint_forge/imaging.hpp"
#include "inpaint_forge/png_io.hpp"
#include "inpaint_forge/rng.hpp"

namespace inpaint_forge::testing {

// --- brute-force window metrics -------------------------------------------------
//
// Straight per-window loops with two-pass moments: the mean first, then
// centred sums. Nothing is shared with the library implementation.

inline double to_peak_scale(const Image& img, int r, int c) {
  const double v = img(r, c);
  return img.range() == Range::Storage ? v * 255.0 : (v + 1.0) * 0.5 * 255.0;
}

struct BruteWindow {
  double mean_a = 0, mean_b = 0, var_a = 0, var_b = 0, cov = 0;
  bool equal = true;
};

inline BruteWindow brute_window(const Image& a, const Image& b, int top, int left, int window) {
  BruteWindow m;
  const double n = static_cast<double>(window) * window;
  for (int r = top; r < top + window; ++r) {
    for (int c = left; c < left + window; ++c) {
      m.mean_a += to_peak_scale(a, r, c);
      m.mean_b += to_peak_scale(b, r, c);
      if (to_peak_scale(a, r, c) != to_peak_scale(b, r, c)) m.equal = false;
    }
  }
  m.mean_a /= n;
  m.mean_b /= n;
  for (int r = top; r < top + window; ++r) {
    for (int c = left; c < left + window; ++c) {
      const double da = to_peak_scale(a, r, c) - m.mean_a;
      const double db = to_peak_scale(b, r, c) - m.mean_b;
      m.var_a += da * da;
      m.var_b += db * db;
      m.cov += da * db;
    }
  }
  m.var_a /= n - 1.0;
  m.var_b /= n - 1.0;
  m.cov /= n - 1.0;
  return m;
}

inline double brute_ssim(const Image& a, const Image& b, int window) {
  const double c1 = (0.01 * 255.0) * (0.01 * 255.0);
  const double c2 = (0.03 * 255.0) * (0.03 * 255.0);
  double total = 0;
  int count = 0;
  for (int top = 0; top + window <= a.height(); ++top) {
    for (int left = 0; left + window <= a.width(); ++left) {
      const auto m = brute_window(a, b, top, left, window);
      total += ((2 * m.mean_a * m.mean_b + c1) * (2 * m.cov + c2)) /
               ((m.mean_a * m.mean_a + m.mean_b * m.mean_b + c1) * (m.var_a + m.var_b + c2));
      ++count;
    }
  }
  return total / count;
}

inline double brute_uqi(const Image& a, const Image& b, int window) {
  double total = 0;
  int count = 0;
  for (int top = 0; top + window <= a.height(); ++top) {
    for (int left = 0; left + window <= a.width(); ++left) {
      const auto m = brute_window(a, b, top, left, window);
      const double den = (m.var_a + m.var_b) * (m.mean_a * m.mean_a + m.mean_b * m.mean_b);
      if (std::abs(den) < 1e-12) {
        total += m.equal ? 1.0 : 0.0;
      } else {
        total += 4 * m.cov * m.mean_a * m.mean_b / den;
      }
      ++count;
    }
  }
  return total / count;
}

// --- images ------------------------------------------------------------------------

inline Image random_image(std::uint64_t seed, int h, int w, Range range = Range::Storage) {
  Rng rng(seed, 0x7465737473ULL);
  std::vector<float> px(static_cast<std::size_t>(h) * w);
  for (auto& v : px) v = static_cast<float>(rng.uniform(range_min(range), range_max(range)));
  return Image(h, w, range, std::move(px));
}

// Adds clamped uniform noise of the given amplitude.
inline Image perturb(const Image& img, std::uint64_t seed, double amplitude) {
  Rng rng(seed, 0x6E6F697365ULL);
  std::vector<float> px(img.pixels().begin(), img.pixels().end());
  for (auto& v : px) {
    const double u = v + rng.uniform(-amplitude, amplitude);
    v = static_cast<float>(std::clamp(u, static_cast<double>(range_min(img.range())), static_cast<double>(range_max(img.range()))));
  }
  return Image(img.height(), img.width(), img.range(), std::move(px));
}

// --- gradients -----------------------------------------------------------------------

// Largest relative error between autograd and central differences of a scalar
// function of `x` (double precision). Relative to max(|analytic|, |numeric|, floor).
inline double gradient_check(const std::function<torch::Tensor(const torch::Tensor&)>& f, torch::Tensor x,
                             double step = 1e-3, double floor = 1e-6) {
  x = x.detach().to(torch::kFloat64).clone().set_requires_grad(true);
  auto y = f(x);
  y.backward();
  const auto analytic = x.grad().detach().clone().contiguous();
  auto flat = x.detach().clone().contiguous();
  double worst = 0.0;
  for (std::int64_t i = 0; i < flat.numel(); ++i) {
    auto plus = flat.clone();
    auto minus = flat.clone();
    plus.view(-1)[i] += step;
    minus.view(-1)[i] -= step;
    const double numeric = (f(plus).item<double>() - f(minus).item<double>()) / (2 * step);
    const double a = analytic.view(-1)[i].item<double>();
    const double scale = std::max({std::abs(a), std::abs(numeric), floor});
    worst = std::max(worst, std::abs(a - numeric) / scale);
  }
  return worst;
}

// --- temp dirs -------------------------------------------------------------------------

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("inpaint_forge_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

// --- tiny runs ----------------------------------------------------------------------

// Phantom PNGs plus a manifest in `dir`.
inline DatasetManifest write_phantoms(const std::filesystem::path& dir, int count, int size,
                                      std::uint64_t seed = 0, double val_fraction = 0.25) {
  std::filesystem::create_directories(dir);
  for (int i = 0; i < count; ++i) {
    save_image(make_phantom(seed * 1000 + i, size), dir / ("p" + std::to_string(100 + i) + ".png"), 16);
  }
  auto manifest = build_manifest(dir, val_fraction, seed);
  write_manifest(manifest, dir / kManifestFileName);
  return manifest;
}

// 32 px images, one shallow U-net, adversarial and perceptual terms only.
inline RunConfig tiny_config(const std::filesystem::path& run_dir, const std::filesystem::path& manifest) {
  RunConfig c;
  c.name = "tiny";
  c.run_dir = run_dir;
  c.manifest = manifest;
  c.image_size = 32;
  c.region_size = 16;
  c.generator.num_unets = 1;
  c.generator.base_channels = 4;
  c.generator.depth = 3;
  c.generator.max_channels = 16;
  c.loss.style = 0.0;
  c.train.epochs = 2;
  c.train.batch_size = 2;
  c.train.seed = 11;
  return c;
}

}  // namespace inpaint_forge::testing
