#include "inpaint_forge/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "inpaint_forge/errors.hpp"

namespace inpaint_forge {
namespace {

std::vector<double> to_255(const Image& img) {
  std::vector<double> out(img.size());
  const auto px = img.pixels();
  if (img.range() == Range::Storage) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<double>(px[i]) * kPeak;
  } else {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = (static_cast<double>(px[i]) + 1.0) * 0.5 * kPeak;
  }
  return out;
}

void require_same_shape(const Image& a, const Image& b, const char* fn) {
  if (!a.same_shape(b)) {
    std::ostringstream msg;
    msg << fn << ": shape mismatch " << a.height() << "x" << a.width() << " vs " << b.height()
        << "x" << b.width();
    throw ShapeError(msg.str());
  }
}

// Sums of `values` over every window x window square, computed separably: each
// output is the sum of `window` column sums, each of which sums `window`
// pixels, so no running subtraction accumulates error.
std::vector<double> window_sums(const std::vector<double>& values, int h, int w, int window) {
  const int oh = h - window + 1;
  const int ow = w - window + 1;
  std::vector<double> columns(static_cast<std::size_t>(oh) * w, 0.0);
  for (int r = 0; r < oh; ++r) {
    for (int c = 0; c < w; ++c) {
      double s = 0.0;
      for (int k = 0; k < window; ++k) s += values[static_cast<std::size_t>(r + k) * w + c];
      columns[static_cast<std::size_t>(r) * w + c] = s;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(oh) * ow, 0.0);
  for (int r = 0; r < oh; ++r) {
    for (int c = 0; c < ow; ++c) {
      double s = 0.0;
      for (int k = 0; k < window; ++k) s += columns[static_cast<std::size_t>(r) * w + c + k];
      out[static_cast<std::size_t>(r) * ow + c] = s;
    }
  }
  return out;
}

// True where every pixel of the window equals every other (max == min).
std::vector<char> constant_windows(const std::vector<double>& values, int h, int w, int window) {
  const int oh = h - window + 1;
  const int ow = w - window + 1;
  std::vector<double> col_min(static_cast<std::size_t>(oh) * w);
  std::vector<double> col_max(col_min.size());
  for (int r = 0; r < oh; ++r) {
    for (int c = 0; c < w; ++c) {
      double lo = values[static_cast<std::size_t>(r) * w + c];
      double hi = lo;
      for (int k = 1; k < window; ++k) {
        const double v = values[static_cast<std::size_t>(r + k) * w + c];
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      col_min[static_cast<std::size_t>(r) * w + c] = lo;
      col_max[static_cast<std::size_t>(r) * w + c] = hi;
    }
  }
  std::vector<char> out(static_cast<std::size_t>(oh) * ow);
  for (int r = 0; r < oh; ++r) {
    for (int c = 0; c < ow; ++c) {
      double lo = col_min[static_cast<std::size_t>(r) * w + c];
      double hi = col_max[static_cast<std::size_t>(r) * w + c];
      for (int k = 1; k < window; ++k) {
        lo = std::min(lo, col_min[static_cast<std::size_t>(r) * w + c + k]);
        hi = std::max(hi, col_max[static_cast<std::size_t>(r) * w + c + k]);
      }
      out[static_cast<std::size_t>(r) * ow + c] = lo == hi;
    }
  }
  return out;
}

struct WindowMoments {
  double mean_a, mean_b, var_a, var_b, cov;
};

template <typename Score>
double mean_window_score(const Image& a, const Image& b, int window, const char* fn, Score score) {
  require_same_shape(a, b, fn);
  if (window < 2) throw ShapeError(std::string(fn) + ": window must be at least 2");
  const int h = a.height();
  const int w = a.width();
  if (std::min(h, w) < window) {
    std::ostringstream msg;
    msg << fn << ": " << h << "x" << w << " image is smaller than the " << window << "x" << window
        << " window";
    throw ShapeError(msg.str());
  }
  const auto va = to_255(a);
  const auto vb = to_255(b);
  std::vector<double> aa(va.size()), bb(va.size()), ab(va.size());
  for (std::size_t i = 0; i < va.size(); ++i) {
    aa[i] = va[i] * va[i];
    bb[i] = vb[i] * vb[i];
    ab[i] = va[i] * vb[i];
  }
  const auto sa = window_sums(va, h, w, window);
  const auto sb = window_sums(vb, h, w, window);
  const auto saa = window_sums(aa, h, w, window);
  const auto sbb = window_sums(bb, h, w, window);
  const auto sab = window_sums(ab, h, w, window);
  const auto flat_a = constant_windows(va, h, w, window);
  const auto flat_b = constant_windows(vb, h, w, window);

  const double n = static_cast<double>(window) * window;
  const int ow = w - window + 1;
  double total = 0.0;
  for (std::size_t i = 0; i < sa.size(); ++i) {
    WindowMoments m{};
    m.mean_a = sa[i] / n;
    m.mean_b = sb[i] / n;
    m.var_a = flat_a[i] ? 0.0 : std::max(0.0, (saa[i] - sa[i] * sa[i] / n) / (n - 1.0));
    m.var_b = flat_b[i] ? 0.0 : std::max(0.0, (sbb[i] - sb[i] * sb[i] / n) / (n - 1.0));
    m.cov = flat_a[i] || flat_b[i] ? 0.0 : (sab[i] - sa[i] * sb[i] / n) / (n - 1.0);
    const int top = static_cast<int>(i / ow);
    const int left = static_cast<int>(i % ow);
    auto windows_equal = [&] {
      for (int r = top; r < top + window; ++r) {
        for (int c = left; c < left + window; ++c) {
          const auto k = static_cast<std::size_t>(r) * w + c;
          if (va[k] != vb[k]) return false;
        }
      }
      return true;
    };
    total += score(m, windows_equal);
  }
  return total / static_cast<double>(sa.size());
}

}  // namespace

double mse(const Image& a, const Image& b) {
  require_same_shape(a, b, "mse");
  const auto va = to_255(a);
  const auto vb = to_255(b);
  double sum = 0.0;
  for (std::size_t i = 0; i < va.size(); ++i) {
    const double d = va[i] - vb[i];
    sum += d * d;
  }
  return sum / static_cast<double>(va.size());
}

double psnr_from_mse(double mse_value) {
  if (mse_value == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(kPeak * kPeak / mse_value);
}

double psnr(const Image& a, const Image& b) { return psnr_from_mse(mse(a, b)); }

double ssim(const Image& a, const Image& b, int window) {
  constexpr double c1 = (0.01 * kPeak) * (0.01 * kPeak);
  constexpr double c2 = (0.03 * kPeak) * (0.03 * kPeak);
  return mean_window_score(a, b, window, "ssim", [](const WindowMoments& m, auto&&) {
    return ((2.0 * m.mean_a * m.mean_b + c1) * (2.0 * m.cov + c2)) /
           ((m.mean_a * m.mean_a + m.mean_b * m.mean_b + c1) * (m.var_a + m.var_b + c2));
  });
}

double uqi(const Image& a, const Image& b, int window) {
  return mean_window_score(a, b, window, "uqi", [](const WindowMoments& m, auto&& windows_equal) {
    const double den =
        (m.var_a + m.var_b) * (m.mean_a * m.mean_a + m.mean_b * m.mean_b);
    if (std::abs(den) < 1e-12) return windows_equal() ? 1.0 : 0.0;
    return 4.0 * m.cov * m.mean_a * m.mean_b / den;
  });
}

QualityScores quality_scores(const Image& a, const Image& b, int window) {
  QualityScores s;
  s.mse = mse(a, b);
  s.psnr_db = psnr_from_mse(s.mse);
  s.ssim = ssim(a, b, window);
  s.uqi = uqi(a, b, window);
  return s;
}

std::string_view to_string(Scope s) { return s == Scope::FullImage ? "full" : "region"; }

RegionMetrics region_metrics(const InpaintingSample& sample, const Image& completed, int window) {
  RegionMetrics out;
  out.full = quality_scores(sample.target, completed, window);
  out.region = quality_scores(extract_region(sample.target, sample.region),
                              extract_region(completed, sample.region), window);
  return out;
}

MetricReport aggregate(std::span<const QualityScores> rows, Scope scope) {
  if (rows.empty()) throw std::invalid_argument("aggregate: no samples");
  auto summarize = [&](double QualityScores::*field) {
    MetricSummary s;
    double sum = 0.0;
    for (const auto& r : rows) sum += r.*field;
    s.mean = sum / static_cast<double>(rows.size());
    if (rows.size() > 1 && std::isfinite(s.mean)) {
      double sq = 0.0;
      for (const auto& r : rows) sq += (r.*field - s.mean) * (r.*field - s.mean);
      s.stddev = std::sqrt(sq / static_cast<double>(rows.size() - 1));
    } else if (!std::isfinite(s.mean)) {
      s.stddev = std::numeric_limits<double>::quiet_NaN();
    }
    return s;
  };
  MetricReport report;
  report.scope = scope;
  report.ssim = summarize(&QualityScores::ssim);
  report.psnr_db = summarize(&QualityScores::psnr_db);
  report.mse = summarize(&QualityScores::mse);
  report.uqi = summarize(&QualityScores::uqi);
  report.sample_count = rows.size();
  return report;
}

}  // namespace inpaint_forge
