#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace inpaint_forge {

// Declared value interval of an Image. Storage is what files decode to,
// Model is what the networks consume and produce.
enum class Range { Storage, Model };

constexpr float range_min(Range r) { return r == Range::Storage ? 0.0f : -1.0f; }
constexpr float range_max(Range) { return 1.0f; }
std::string_view to_string(Range r);

/// Row-major single-channel raster with an explicit value range.
///
/// Every pixel is finite and lies inside the declared range; the constructors
/// reject anything else with RangeError. Images are immutable once built, so
/// the invariant cannot be broken after construction.
class Image {
 public:
  Image(int height, int width, Range range, float fill);
  Image(int height, int width, Range range, std::vector<float> pixels);

  int height() const { return height_; }
  int width() const { return width_; }
  Range range() const { return range_; }
  std::size_t size() const { return pixels_.size(); }

  float operator()(int row, int col) const {
    return pixels_[static_cast<std::size_t>(row) * width_ + col];
  }
  std::span<const float> pixels() const { return pixels_; }

  bool same_shape(const Image& other) const {
    return height_ == other.height_ && width_ == other.width_;
  }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  int height_;
  int width_;
  Range range_;
  std::vector<float> pixels_;
};

}  // namespace inpaint_forge
