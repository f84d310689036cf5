#pragma once

#include <cstdint>

#include "inpaint_forge/image.hpp"
#include "inpaint_forge/rng.hpp"

namespace inpaint_forge {

/// Square missing region: rows [top, top+size), columns [left, left+size).
struct RegionSpec {
  int top = 0;
  int left = 0;
  int size = 0;

  friend bool operator==(const RegionSpec&, const RegionSpec&) = default;
};

// Throws RegionError unless size >= 1 and the square fits inside height x width.
void validate_region(const RegionSpec& region, int height, int width);

double masked_fraction(const RegionSpec& region, int height, int width);

/// Target x, context y and the region that separates them. Built only through
/// make_sample(), which guarantees y == x outside the region and y == fill
/// inside it.
struct InpaintingSample {
  Image target;
  Image context;
  RegionSpec region;
};

// Default fill for the masked region: mid-gray in model range.
inline constexpr float kDefaultFill = 0.0f;

Image to_model_range(const Image& img);
Image from_model_range(const Image& img);

// Top and left uniform over every legal placement.
RegionSpec sample_region(Rng& rng, int image_height, int image_width, int size);

Image mask_image(const Image& target, const RegionSpec& region, float fill = kDefaultFill);

InpaintingSample make_sample(const Image& target, const RegionSpec& region,
                             float fill = kDefaultFill);

Image extract_region(const Image& img, const RegionSpec& region);

/// Context outside the region, generated inside it. Pixels of `generated`
/// outside the region are never read.
Image compose(const Image& context, const Image& generated, const RegionSpec& region);

/// Center crop or pad (with the range minimum) to size x size.
Image fit_to_size(const Image& img, int size);

/// Deterministic synthetic head-slice phantom in storage range.
///
/// A bright skull ellipse encloses a mid-gray brain ellipse, which holds one to
/// six smaller interior ellipses with distinct intensities (3-8 ellipses in
/// total). A low-amplitude sum of sinusoids adds texture inside the head; the
/// background is a flat dark level. Identical (seed, size) gives bitwise
/// identical output.
Image make_phantom(std::uint64_t seed, int size);

inline constexpr int kMinPhantomSize = 32;

}  // namespace inpaint_forge
