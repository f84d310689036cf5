#include "inpaint_forge/png_io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <memory>
#include <vector>

#include "inpaint_forge/errors.hpp"
#include "inpaint_forge/imaging.hpp"

namespace inpaint_forge {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] void on_png_error(png_structp png, png_const_charp message) {
  auto* buffer = static_cast<std::string*>(png_get_error_ptr(png));
  if (buffer) *buffer = message;
  png_longjmp(png, 1);
}

void on_png_warning(png_structp, png_const_charp) {}

struct PngHeader {
  bool ok = false;
  int height = 0;
  int width = 0;
  int bit_depth = 0;
  std::size_t row_bytes = 0;
  bool multi_channel = false;
};

// Holds only trivially destructible locals, so a longjmp out of libpng is safe.
PngHeader read_header(png_structp png, png_infop info, FILE* file, std::size_t sig_bytes) {
  PngHeader h;
  if (setjmp(png_jmpbuf(png))) return PngHeader{};
  png_init_io(png, file);
  png_set_sig_bytes(png, static_cast<int>(sig_bytes));
  png_read_info(png, info);
  h.width = static_cast<int>(png_get_image_width(png, info));
  h.height = static_cast<int>(png_get_image_height(png, info));
  h.bit_depth = png_get_bit_depth(png, info);
  if (png_get_color_type(png, info) != PNG_COLOR_TYPE_GRAY) {
    h.multi_channel = true;
  } else {
    if (h.bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (h.bit_depth == 16) png_set_swap(png);  // little-endian host order
    png_read_update_info(png, info);
    h.row_bytes = png_get_rowbytes(png, info);
  }
  h.ok = true;
  return h;
}

}  // namespace

Image load_image(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) {
    throw FileNotFoundError("image file not found: " + path.string());
  }
  FilePtr file(std::fopen(path.c_str(), "rb"));
  if (!file) throw IoError("cannot open image file: " + path.string());

  png_byte signature[8] = {};
  if (std::fread(signature, 1, sizeof(signature), file.get()) != sizeof(signature) ||
      png_sig_cmp(signature, 0, sizeof(signature)) != 0) {
    throw NotAnImageError("not a PNG image: " + path.string());
  }

  std::string error_message;
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, &error_message, on_png_error, on_png_warning);
  if (!png) throw IoError("libpng initialisation failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError("libpng initialisation failed");
  }

  // Objects with destructors are created outside the setjmp windows.
  const PngHeader header = read_header(png, info, file.get(), sizeof(signature));
  if (!header.ok) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw NotAnImageError("corrupt PNG " + path.string() + ": " + error_message);
  }
  const int height = header.height;
  const int width = header.width;
  const int bit_depth = header.bit_depth;
  const std::size_t row_bytes = header.row_bytes;
  const bool multi_channel = header.multi_channel;
  std::vector<png_byte> raw;
  std::vector<png_bytep> rows;

  if (!multi_channel) {
    raw.resize(row_bytes * static_cast<std::size_t>(height));
    rows.resize(static_cast<std::size_t>(height));
    for (int r = 0; r < height; ++r) rows[r] = raw.data() + row_bytes * r;
    if (setjmp(png_jmpbuf(png))) {
      png_destroy_read_struct(&png, &info, nullptr);
      throw NotAnImageError("corrupt PNG " + path.string() + ": " + error_message);
    }
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
  }
  png_destroy_read_struct(&png, &info, nullptr);

  if (multi_channel) {
    throw MultiChannelError("expected a single-channel grayscale PNG: " + path.string());
  }

  std::vector<float> pixels(static_cast<std::size_t>(height) * width);
  if (bit_depth == 16) {
    for (int r = 0; r < height; ++r) {
      const auto* row = reinterpret_cast<const std::uint16_t*>(raw.data() + row_bytes * r);
      for (int c = 0; c < width; ++c) {
        pixels[static_cast<std::size_t>(r) * width + c] =
            static_cast<float>(static_cast<double>(row[c]) / 65535.0);
      }
    }
  } else {
    // Sub-byte depths were widened to 8 bits, which also rescales to 0..255.
    for (int r = 0; r < height; ++r) {
      const png_byte* row = raw.data() + row_bytes * r;
      for (int c = 0; c < width; ++c) {
        pixels[static_cast<std::size_t>(r) * width + c] =
            static_cast<float>(static_cast<double>(row[c]) / 255.0);
      }
    }
  }
  return Image(height, width, Range::Storage, std::move(pixels));
}

void save_image(const Image& img, const std::filesystem::path& path, int bit_depth) {
  if (bit_depth != 8 && bit_depth != 16) throw IoError("PNG bit depth must be 8 or 16");
  const Image storage = img.range() == Range::Model ? from_model_range(img) : img;
  const int height = storage.height();
  const int width = storage.width();
  const double max_code = bit_depth == 16 ? 65535.0 : 255.0;
  const std::size_t bytes_per_pixel = bit_depth == 16 ? 2 : 1;
  const std::size_t row_bytes = bytes_per_pixel * width;

  // Rows are packed big-endian here so libpng needs no transform.
  std::vector<png_byte> raw(row_bytes * height);
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      const auto code = static_cast<unsigned>(std::lround(storage(r, c) * max_code));
      png_byte* dst = raw.data() + row_bytes * r + bytes_per_pixel * c;
      if (bit_depth == 16) {
        dst[0] = static_cast<png_byte>(code >> 8);
        dst[1] = static_cast<png_byte>(code & 0xFF);
      } else {
        dst[0] = static_cast<png_byte>(code);
      }
    }
  }

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  FilePtr file(std::fopen(path.c_str(), "wb"));
  if (!file) throw IoError("cannot write image file: " + path.string());

  std::string error_message;
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, &error_message, on_png_error, on_png_warning);
  if (!png) throw IoError("libpng initialisation failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("libpng initialisation failed");
  }
  std::vector<png_bytep> rows(static_cast<std::size_t>(height));
  for (int r = 0; r < height; ++r) rows[r] = raw.data() + row_bytes * r;

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("failed writing PNG " + path.string() + ": " + error_message);
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height),
               bit_depth, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  if (std::fflush(file.get()) != 0) throw IoError("failed flushing " + path.string());
}

}  // namespace inpaint_forge
