#pragma once

// RGBA8 image buffer and PNG codec.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace topomap::render {

struct Rgba {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;
  std::uint8_t a = 0;

  friend bool operator==(const Rgba&, const Rgba&) = default;
};

class Image {
 public:
  Image() = default;
  Image(std::uint32_t width, std::uint32_t height, Rgba fill = {});

  std::uint32_t width() const { return width_; }
  std::uint32_t height() const { return height_; }
  const std::vector<std::uint8_t>& bytes() const { return rgba_; }

  Rgba at(std::uint32_t x, std::uint32_t y) const;
  void set(std::uint32_t x, std::uint32_t y, Rgba c);
  // Source-over compositing of `c` scaled by `coverage` in [0, 1].
  void blend(std::uint32_t x, std::uint32_t y, Rgba c, double coverage = 1.0);
  // Composites `top` (same size) over this image.
  void composite(const Image& top);
  // Copies `src` into this image at (x, y), clipping at the edges.
  void paste(const Image& src, std::uint32_t x, std::uint32_t y);
  Image crop(std::uint32_t x, std::uint32_t y, std::uint32_t w, std::uint32_t h) const;

  friend bool operator==(const Image&, const Image&) = default;

 private:
  std::uint32_t width_ = 0;
  std::uint32_t height_ = 0;
  std::vector<std::uint8_t> rgba_;
};

// 8-bit RGBA PNG. Output is byte-stable for a given image and libpng/zlib build.
std::string encode_png(const Image& image);
// Throws std::runtime_error on malformed input.
Image decode_png(std::string_view bytes);

}  // namespace topomap::render
