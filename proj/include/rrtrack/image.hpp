#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace rrtrack {

/// 8-bit interleaved RGB image, row-major.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;

  Image() = default;
  Image(int w, int h, std::uint8_t fill = 0);

  bool empty() const { return width <= 0 || height <= 0; }
  std::uint8_t at(int x, int y, int c) const { return rgb[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  std::uint8_t& at(int x, int y, int c) { return rgb[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }

  Image flipped_horizontally() const;

  friend bool operator==(const Image&, const Image&) = default;
};

/// Binary PPM (P6, maxval 255).
void write_ppm(const std::filesystem::path& path, const Image& image);
Image read_ppm(const std::filesystem::path& path);

}  // namespace rrtrack
