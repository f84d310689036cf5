#pragma once

#include <filesystem>

#include "inpaint_forge/image.hpp"

namespace inpaint_forge {

/// Reads a single-channel PNG (8- or 16-bit; 1/2/4-bit gray is widened) into
/// storage range, dividing by the bit-depth maximum.
///
/// Throws FileNotFoundError, NotAnImageError (bad signature or decode failure)
/// or MultiChannelError (RGB, gray+alpha, palette).
Image load_image(const std::filesystem::path& path);

/// Writes a grayscale PNG. Model-range images are mapped to storage range
/// first. bit_depth is 8 or 16; values are rounded to the nearest code.
/// Output bytes are a pure function of the pixels.
void save_image(const Image& img, const std::filesystem::path& path, int bit_depth = 8);

}  // namespace inpaint_forge
