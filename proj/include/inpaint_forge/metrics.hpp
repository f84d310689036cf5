#pragma once

#include <cstddef>
#include <span>
#include <string_view>

#include "inpaint_forge/image.hpp"
#include "inpaint_forge/imaging.hpp"

namespace inpaint_forge {

// All metrics work on the 0-255 scale: storage-range pixels are multiplied by
// 255, model-range pixels are first mapped to storage range. Images of either
// range may be mixed.

inline constexpr double kPeak = 255.0;
inline constexpr int kDefaultWindow = 8;

double mse(const Image& a, const Image& b);

/// 10 log10(255^2 / mse); +infinity when the images are identical.
double psnr(const Image& a, const Image& b);
double psnr_from_mse(double mse_value);

/// Mean local SSIM over every window x window square (stride 1), uniform
/// weights, sample (N-1) variances, C1 = (0.01*255)^2, C2 = (0.03*255)^2.
/// Throws ShapeError when either side is smaller than the window.
double ssim(const Image& a, const Image& b, int window = kDefaultWindow);

/// SSIM without stabilising constants. A window whose denominator magnitude is
/// below 1e-12 scores 1 when both windows are elementwise equal, else 0.
double uqi(const Image& a, const Image& b, int window = kDefaultWindow);

struct QualityScores {
  double ssim = 0.0;
  double psnr_db = 0.0;
  double mse = 0.0;
  double uqi = 0.0;
};

QualityScores quality_scores(const Image& a, const Image& b, int window = kDefaultWindow);

enum class Scope { FullImage, RegionOnly };
std::string_view to_string(Scope s);

/// Full-image and region-only scores of one completed sample.
struct RegionMetrics {
  QualityScores full;
  QualityScores region;
};

RegionMetrics region_metrics(const InpaintingSample& sample, const Image& completed,
                             int window = kDefaultWindow);

struct MetricSummary {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation; 0 for a single sample
};

struct MetricReport {
  Scope scope = Scope::FullImage;
  MetricSummary ssim;
  MetricSummary psnr_db;
  MetricSummary mse;
  MetricSummary uqi;
  std::size_t sample_count = 0;
};

/// Throws std::invalid_argument on an empty span.
MetricReport aggregate(std::span<const QualityScores> rows, Scope scope);

}  // namespace inpaint_forge
