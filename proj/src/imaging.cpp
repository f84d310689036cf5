#include "inpaint_forge/imaging.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <sstream>
#include <vector>

#include "inpaint_forge/errors.hpp"

namespace inpaint_forge {

void validate_region(const RegionSpec& r, int height, int width) {
  if (r.size < 1 || r.top < 0 || r.left < 0 || r.top > height - r.size ||
      r.left > width - r.size) {
    std::ostringstream msg;
    msg << "region (top=" << r.top << ", left=" << r.left << ", size=" << r.size
        << ") does not fit a " << height << "x" << width << " image";
    if (r.size >= 1 && r.size <= std::min(height, width)) {
      msg << " (top <= " << height - r.size << ", left <= " << width - r.size << ")";
    }
    throw RegionError(msg.str());
  }
}

double masked_fraction(const RegionSpec& r, int height, int width) {
  validate_region(r, height, width);
  return static_cast<double>(r.size) * r.size / (static_cast<double>(height) * width);
}

Image to_model_range(const Image& img) {
  if (img.range() != Range::Storage) throw RangeError("to_model_range expects a storage-range image");
  std::vector<float> out(img.pixels().begin(), img.pixels().end());
  for (float& v : out) v = 2.0f * v - 1.0f;
  return Image(img.height(), img.width(), Range::Model, std::move(out));
}

Image from_model_range(const Image& img) {
  if (img.range() != Range::Model) throw RangeError("from_model_range expects a model-range image");
  std::vector<float> out(img.pixels().begin(), img.pixels().end());
  for (float& v : out) v = 0.5f * (v + 1.0f);
  return Image(img.height(), img.width(), Range::Storage, std::move(out));
}

RegionSpec sample_region(Rng& rng, int image_height, int image_width, int size) {
  if (size < 1 || size > std::min(image_height, image_width)) {
    std::ostringstream msg;
    msg << "region size " << size << " does not fit a " << image_height << "x" << image_width
        << " image";
    throw RegionError(msg.str());
  }
  RegionSpec r;
  r.size = size;
  r.top = static_cast<int>(rng.uniform_int(0, image_height - size));
  r.left = static_cast<int>(rng.uniform_int(0, image_width - size));
  return r;
}

Image mask_image(const Image& target, const RegionSpec& region, float fill) {
  if (target.range() != Range::Model) throw RangeError("mask_image expects a model-range target");
  validate_region(region, target.height(), target.width());
  std::vector<float> out(target.pixels().begin(), target.pixels().end());
  for (int r = region.top; r < region.top + region.size; ++r) {
    auto row = out.begin() + static_cast<std::ptrdiff_t>(r) * target.width();
    std::fill(row + region.left, row + region.left + region.size, fill);
  }
  return Image(target.height(), target.width(), Range::Model, std::move(out));
}

InpaintingSample make_sample(const Image& target, const RegionSpec& region, float fill) {
  return InpaintingSample{target, mask_image(target, region, fill), region};
}

Image extract_region(const Image& img, const RegionSpec& region) {
  validate_region(region, img.height(), img.width());
  std::vector<float> out;
  out.reserve(static_cast<std::size_t>(region.size) * region.size);
  for (int r = 0; r < region.size; ++r) {
    for (int c = 0; c < region.size; ++c) out.push_back(img(region.top + r, region.left + c));
  }
  return Image(region.size, region.size, img.range(), std::move(out));
}

Image compose(const Image& context, const Image& generated, const RegionSpec& region) {
  if (!context.same_shape(generated)) {
    throw ShapeError("compose: context and generated images differ in shape");
  }
  if (context.range() != generated.range()) {
    throw RangeError("compose: context and generated images differ in range");
  }
  validate_region(region, context.height(), context.width());
  std::vector<float> out(context.pixels().begin(), context.pixels().end());
  for (int r = region.top; r < region.top + region.size; ++r) {
    for (int c = region.left; c < region.left + region.size; ++c) {
      out[static_cast<std::size_t>(r) * context.width() + c] = generated(r, c);
    }
  }
  return Image(context.height(), context.width(), context.range(), std::move(out));
}

Image fit_to_size(const Image& img, int size) {
  if (size < 1) throw ShapeError("fit_to_size: size must be positive");
  if (img.height() == size && img.width() == size) return img;
  std::vector<float> out(static_cast<std::size_t>(size) * size, range_min(img.range()));
  // Offsets are positive when cropping, negative when padding.
  const int off_r = (img.height() - size) / 2;
  const int off_c = (img.width() - size) / 2;
  for (int r = 0; r < size; ++r) {
    const int sr = r + off_r;
    if (sr < 0 || sr >= img.height()) continue;
    for (int c = 0; c < size; ++c) {
      const int sc = c + off_c;
      if (sc < 0 || sc >= img.width()) continue;
      out[static_cast<std::size_t>(r) * size + c] = img(sr, sc);
    }
  }
  return Image(size, size, img.range(), std::move(out));
}

namespace {

struct Ellipse {
  double cx, cy, a, b, angle;
  float intensity;

  bool contains(double u, double v) const {
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    const double x = (u - cx) * c + (v - cy) * s;
    const double y = -(u - cx) * s + (v - cy) * c;
    return (x / a) * (x / a) + (y / b) * (y / b) <= 1.0;
  }
};

struct Wave {
  double fu, fv, phase;
};

constexpr float kBackground = 0.02f;
constexpr double kTextureAmplitude = 0.04;

}  // namespace

Image make_phantom(std::uint64_t seed, int size) {
  if (size < kMinPhantomSize) {
    std::ostringstream msg;
    msg << "phantom size must be at least " << kMinPhantomSize << ", got " << size;
    throw ShapeError(msg.str());
  }
  Rng rng(seed, 0x70'68'61'6E'74'6F'6DULL);
  const int count = static_cast<int>(rng.uniform_int(3, 8));

  std::vector<Ellipse> ellipses;
  const double cx = rng.uniform(-0.05, 0.05);
  const double cy = rng.uniform(-0.05, 0.05);
  const double head_a = rng.uniform(0.70, 0.88);
  const double head_b = rng.uniform(0.78, 0.92);
  const double head_angle = rng.uniform(-0.2, 0.2);
  ellipses.push_back({cx, cy, head_a, head_b, head_angle,
                      static_cast<float>(rng.uniform(0.85, 0.95))});
  const double shrink = rng.uniform(0.88, 0.93);
  const double brain_a = head_a * shrink;
  const double brain_b = head_b * shrink;
  ellipses.push_back({cx, cy, brain_a, brain_b, head_angle,
                      static_cast<float>(rng.uniform(0.35, 0.50))});

  auto distinct = [&](float v) {
    return std::all_of(ellipses.begin(), ellipses.end(),
                       [v](const Ellipse& e) { return std::abs(e.intensity - v) >= 0.05f; });
  };
  for (int i = 2; i < count; ++i) {
    const double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double radius = rng.uniform(0.0, 0.5);
    Ellipse e;
    e.cx = cx + radius * brain_a * std::cos(theta);
    e.cy = cy + radius * brain_b * std::sin(theta);
    e.a = rng.uniform(0.08, 0.30);
    e.b = rng.uniform(0.08, 0.30);
    e.angle = rng.uniform(0.0, std::numbers::pi);
    float v = static_cast<float>(rng.uniform(0.10, 0.75));
    while (!distinct(v)) v = static_cast<float>(rng.uniform(0.10, 0.75));
    e.intensity = v;
    ellipses.push_back(e);
  }

  std::array<Wave, 3> waves{};
  for (Wave& w : waves) {
    w.fu = rng.uniform(2.0, 6.0) * std::numbers::pi * (rng.uniform_int(0, 1) ? 1.0 : -1.0);
    w.fv = rng.uniform(2.0, 6.0) * std::numbers::pi;
    w.phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  }

  std::vector<float> pixels(static_cast<std::size_t>(size) * size, kBackground);
  for (int r = 0; r < size; ++r) {
    const double v = (r + 0.5) / size * 2.0 - 1.0;
    for (int c = 0; c < size; ++c) {
      const double u = (c + 0.5) / size * 2.0 - 1.0;
      if (!ellipses.front().contains(u, v)) continue;
      float value = kBackground;
      for (const Ellipse& e : ellipses) {
        if (e.contains(u, v)) value = e.intensity;
      }
      double texture = 0.0;
      for (const Wave& w : waves) texture += std::sin(w.fu * u + w.fv * v + w.phase);
      value += static_cast<float>(kTextureAmplitude * texture / waves.size());
      pixels[static_cast<std::size_t>(r) * size + c] = std::clamp(value, 0.0f, 1.0f);
    }
  }
  return Image(size, size, Range::Storage, std::move(pixels));
}

}  // namespace inpaint_forge
