#include "inpaint_forge/image.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "inpaint_forge/errors.hpp"

namespace inpaint_forge {

std::string_view to_string(Range r) { return r == Range::Storage ? "storage" : "model"; }

Image::Image(int height, int width, Range range, float fill)
    : Image(height, width, range,
            std::vector<float>(static_cast<std::size_t>(std::max(height, 0)) *
                                   static_cast<std::size_t>(std::max(width, 0)),
                               fill)) {}

Image::Image(int height, int width, Range range, std::vector<float> pixels)
    : height_(height), width_(width), range_(range), pixels_(std::move(pixels)) {
  if (height <= 0 || width <= 0) {
    std::ostringstream msg;
    msg << "image dimensions must be positive, got " << height << "x" << width;
    throw ShapeError(msg.str());
  }
  if (pixels_.size() != static_cast<std::size_t>(height) * static_cast<std::size_t>(width)) {
    throw ShapeError("pixel buffer size does not match image dimensions");
  }
  const float lo = range_min(range);
  const float hi = range_max(range);
  for (std::size_t i = 0; i < pixels_.size(); ++i) {
    const float v = pixels_[i];
    if (!std::isfinite(v) || v < lo || v > hi) {
      std::ostringstream msg;
      msg << "pixel " << i << " = " << v << " outside " << to_string(range) << " range [" << lo
          << ", " << hi << "]";
      throw RangeError(msg.str());
    }
  }
}

}  // namespace inpaint_forge
