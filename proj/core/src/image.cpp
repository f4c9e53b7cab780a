#include "topomap/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

namespace topomap::render {

Image::Image(std::uint32_t width, std::uint32_t height, Rgba fill)
    : width_(width), height_(height), rgba_(std::size_t{width} * height * 4) {
  for (std::size_t i = 0; i < rgba_.size(); i += 4) {
    rgba_[i] = fill.r;
    rgba_[i + 1] = fill.g;
    rgba_[i + 2] = fill.b;
    rgba_[i + 3] = fill.a;
  }
}

Rgba Image::at(std::uint32_t x, std::uint32_t y) const {
  const std::size_t i = (std::size_t{y} * width_ + x) * 4;
  return {rgba_[i], rgba_[i + 1], rgba_[i + 2], rgba_[i + 3]};
}

void Image::set(std::uint32_t x, std::uint32_t y, Rgba c) {
  const std::size_t i = (std::size_t{y} * width_ + x) * 4;
  rgba_[i] = c.r;
  rgba_[i + 1] = c.g;
  rgba_[i + 2] = c.b;
  rgba_[i + 3] = c.a;
}

void Image::blend(std::uint32_t x, std::uint32_t y, Rgba c, double coverage) {
  const double sa = c.a / 255.0 * std::clamp(coverage, 0.0, 1.0);
  if (sa <= 0.0) return;
  const Rgba d = at(x, y);
  const double da = d.a / 255.0;
  const double oa = sa + da * (1.0 - sa);
  auto channel = [&](std::uint8_t s, std::uint8_t dst) {
    const double v = (s * sa + dst * da * (1.0 - sa)) / oa;
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
  };
  set(x, y, {channel(c.r, d.r), channel(c.g, d.g), channel(c.b, d.b),
             static_cast<std::uint8_t>(std::lround(oa * 255.0))});
}

void Image::composite(const Image& top) {
  if (top.width_ != width_ || top.height_ != height_) throw std::invalid_argument("image size mismatch");
  for (std::uint32_t y = 0; y < height_; ++y) {
    for (std::uint32_t x = 0; x < width_; ++x) blend(x, y, top.at(x, y));
  }
}

void Image::paste(const Image& src, std::uint32_t x0, std::uint32_t y0) {
  for (std::uint32_t y = 0; y < src.height_ && y0 + y < height_; ++y) {
    const std::size_t n = std::min<std::size_t>(src.width_, x0 < width_ ? width_ - x0 : 0) * 4;
    std::memcpy(&rgba_[(std::size_t{y0 + y} * width_ + x0) * 4], &src.rgba_[std::size_t{y} * src.width_ * 4], n);
  }
}

Image Image::crop(std::uint32_t x0, std::uint32_t y0, std::uint32_t w, std::uint32_t h) const {
  if (x0 + w > width_ || y0 + h > height_) throw std::out_of_range("crop outside image");
  Image out(w, h);
  for (std::uint32_t y = 0; y < h; ++y) {
    std::memcpy(&out.rgba_[std::size_t{y} * w * 4], &rgba_[(std::size_t{y0 + y} * width_ + x0) * 4],
                std::size_t{w} * 4);
  }
  return out;
}

namespace {

void on_png_error(png_structp png, png_const_charp message) {
  auto* error = static_cast<std::string*>(png_get_error_ptr(png));
  *error = message;
  png_longjmp(png, 1);
}

void on_png_warning(png_structp, png_const_charp) {}

struct ReadCursor {
  std::string_view data;
  std::size_t pos = 0;
};

}  // namespace

std::string encode_png(const Image& image) {
  std::string out;
  std::string error;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &error, on_png_error, on_png_warning);
  if (!png) throw std::runtime_error("png: cannot allocate writer");
  png_infop info = png_create_info_struct(png);
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("png encode failed: " + error);
  }
  png_set_write_fn(
      png, &out,
      [](png_structp p, png_bytep data, png_size_t len) {
        static_cast<std::string*>(png_get_io_ptr(p))->append(reinterpret_cast<const char*>(data), len);
      },
      nullptr);
  png_set_IHDR(png, info, image.width(), image.height(), 8, PNG_COLOR_TYPE_RGBA, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_set_compression_level(png, 6);
  png_write_info(png, info);
  const auto& bytes = image.bytes();
  for (std::uint32_t y = 0; y < image.height(); ++y) {
    png_write_row(png, const_cast<png_bytep>(&bytes[std::size_t{y} * image.width() * 4]));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

Image decode_png(std::string_view bytes) {
  if (bytes.size() < 8 || png_sig_cmp(reinterpret_cast<png_const_bytep>(bytes.data()), 0, 8) != 0) {
    throw std::runtime_error("not a PNG stream");
  }
  std::string error;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &error, on_png_error, on_png_warning);
  if (!png) throw std::runtime_error("png: cannot allocate reader");
  png_infop info = png_create_info_struct(png);
  ReadCursor cursor{bytes, 0};
  Image image;
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("png decode failed: " + error);
  }
  png_set_read_fn(png, &cursor, [](png_structp p, png_bytep data, png_size_t len) {
    auto* c = static_cast<ReadCursor*>(png_get_io_ptr(p));
    if (c->pos + len > c->data.size()) png_error(p, "truncated PNG");
    std::memcpy(data, c->data.data() + c->pos, len);
    c->pos += len;
  });
  png_read_info(png, info);
  png_set_expand(png);
  png_set_strip_16(png);
  png_set_gray_to_rgb(png);
  png_set_add_alpha(png, 0xFF, PNG_FILLER_AFTER);
  png_read_update_info(png, info);
  const std::uint32_t w = png_get_image_width(png, info);
  const std::uint32_t h = png_get_image_height(png, info);
  std::vector<std::uint8_t> rows(std::size_t{w} * h * 4);
  std::vector<png_bytep> ptrs(h);
  for (std::uint32_t y = 0; y < h; ++y) ptrs[y] = &rows[std::size_t{y} * w * 4];
  png_read_image(png, ptrs.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  image = Image(w, h);
  for (std::uint32_t y = 0; y < h; ++y) {
    for (std::uint32_t x = 0; x < w; ++x) {
      const std::size_t i = (std::size_t{y} * w + x) * 4;
      image.set(x, y, {rows[i], rows[i + 1], rows[i + 2], rows[i + 3]});
    }
  }
  return image;
}

}  // namespace topomap::render
