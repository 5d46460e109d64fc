#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace sgfloc {

/// Row-major single-channel binary image, one byte per pixel (0 or 1).
struct BinaryImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;

  BinaryImage() = default;
  BinaryImage(int w, int h) : width(w), height(h), data(static_cast<size_t>(w) * h, 0) {}

  bool in_bounds(int u, int v) const { return u >= 0 && v >= 0 && u < width && v < height; }
  std::uint8_t at(int u, int v) const { return data[static_cast<size_t>(v) * width + u]; }
  std::uint8_t& at(int u, int v) { return data[static_cast<size_t>(v) * width + u]; }
  bool empty() const;
  size_t count() const;

  friend bool operator==(const BinaryImage&, const BinaryImage&) = default;
};

/// 1-bit grayscale PNG. Any nonzero input pixel is read as set.
void write_png(const std::filesystem::path& path, const BinaryImage& img);
BinaryImage read_png(const std::filesystem::path& path);

}  // namespace sgfloc
