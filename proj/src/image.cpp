#include "sgfloc/image.hpp"

#include <png.h>

#include <algorithm>
#include <cstdio>
#include <memory>

#include "sgfloc/errors.hpp"

namespace sgfloc {

bool BinaryImage::empty() const {
  return std::none_of(data.begin(), data.end(), [](std::uint8_t p) { return p != 0; });
}

size_t BinaryImage::count() const {
  return static_cast<size_t>(std::count_if(data.begin(), data.end(), [](std::uint8_t p) { return p != 0; }));
}

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) {
    throw IoError("cannot open " + path.string());
  }
  return f;
}

[[noreturn]] void png_error_fn(png_structp, png_const_charp msg) { throw IoError(std::string("png: ") + msg); }
void png_warning_fn(png_structp, png_const_charp) {}

}  // namespace

void write_png(const std::filesystem::path& path, const BinaryImage& img) {
  FilePtr f = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_fn, png_warning_fn);
  if (!png) {
    throw IoError("png_create_write_struct failed");
  }
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* p;
    png_infop* i;
    ~Guard() { png_destroy_write_struct(p, i); }
  } guard{&png, &info};

  png_init_io(png, f.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height), 1,
               PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);

  std::vector<png_byte> row(static_cast<size_t>((img.width + 7) / 8));
  for (int v = 0; v < img.height; ++v) {
    std::fill(row.begin(), row.end(), 0);
    for (int u = 0; u < img.width; ++u) {
      if (img.at(u, v)) {
        row[static_cast<size_t>(u / 8)] |= static_cast<png_byte>(0x80u >> (u % 8));
      }
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
}

BinaryImage read_png(const std::filesystem::path& path) {
  FilePtr f = open_file(path, "rb");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_fn, png_warning_fn);
  if (!png) {
    throw IoError("png_create_read_struct failed");
  }
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* p;
    png_infop* i;
    ~Guard() { png_destroy_read_struct(p, i, nullptr); }
  } guard{&png, &info};

  png_init_io(png, f.get());
  png_read_info(png, info);
  const int width = static_cast<int>(png_get_image_width(png, info));
  const int height = static_cast<int>(png_get_image_height(png, info));
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);

  // Normalize everything to 8-bit gray.
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (depth == 16) png_set_strip_16(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (color == PNG_COLOR_TYPE_RGB || color == PNG_COLOR_TYPE_RGB_ALPHA || color == PNG_COLOR_TYPE_PALETTE) {
    png_set_rgb_to_gray_fixed(png, 1, -1, -1);
  }
  png_read_update_info(png, info);

  BinaryImage img(width, height);
  std::vector<png_byte> row(png_get_rowbytes(png, info));
  for (int v = 0; v < height; ++v) {
    png_read_row(png, row.data(), nullptr);
    for (int u = 0; u < width; ++u) {
      img.at(u, v) = row[static_cast<size_t>(u)] != 0 ? 1 : 0;
    }
  }
  png_read_end(png, nullptr);
  return img;
}

}  // namespace sgfloc
