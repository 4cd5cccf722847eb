#include "colorguide/types.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace colorguide {

std::string_view to_string(Encoding e) {
  switch (e) {
    case Encoding::Srgb:
      return "sRGB";
    case Encoding::LinearRgb:
      return "linear RGB";
    case Encoding::Lab:
      return "Lab";
  }
  return "?";
}

void require_encoding(const ColorTriple& color, Encoding expected, std::string_view what) {
  if (color.encoding != expected) {
    throw std::invalid_argument(std::string(what) + ": expected " + std::string(to_string(expected)) +
                                " color, got " + std::string(to_string(color.encoding)));
  }
}

void require_encoding(const PixelImage& image, Encoding expected, std::string_view what) {
  if (image.encoding() != expected) {
    throw std::invalid_argument(std::string(what) + ": expected " + std::string(to_string(expected)) +
                                " image, got " + std::string(to_string(image.encoding())));
  }
}

Tensor3::Tensor3(int height, int width, int channels, double fill)
    : height_(height), width_(width), channels_(channels) {
  if (height <= 0 || width <= 0 || channels <= 0) {
    throw std::invalid_argument("Tensor3: dimensions must be positive");
  }
  data_.assign(static_cast<std::size_t>(height) * width * channels, fill);
}

bool Tensor3::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

PixelImage::PixelImage(int height, int width, Encoding encoding, double fill)
    : data_(height, width, 3, fill), encoding_(encoding) {}

PixelImage::PixelImage(Tensor3 data, Encoding encoding) : data_(std::move(data)), encoding_(encoding) {
  if (data_.channels() != 3) {
    throw std::invalid_argument("PixelImage: expected 3 channels");
  }
}

PixelImage PixelImage::filled(int height, int width, const ColorTriple& color) {
  PixelImage img(height, width, color.encoding);
  for (std::size_t p = 0; p < img.pixels(); ++p) {
    img.set_color(p, color);
  }
  return img;
}

ColorTriple PixelImage::color_at(std::size_t p) const {
  auto px = pixel(p);
  return {{px[0], px[1], px[2]}, encoding_};
}

void PixelImage::set_color(std::size_t p, const ColorTriple& color) {
  require_encoding(color, encoding_, "PixelImage::set_color");
  auto px = pixel(p);
  px[0] = color.c[0];
  px[1] = color.c[1];
  px[2] = color.c[2];
}

RoiMask::RoiMask(int height, int width, bool fill) : height_(height), width_(width) {
  if (height <= 0 || width <= 0) {
    throw std::invalid_argument("RoiMask: dimensions must be positive");
  }
  bits_.assign(static_cast<std::size_t>(height) * width, fill ? 1 : 0);
}

RoiMask RoiMask::from_rect(int height, int width, const Rect& roi) {
  if (roi.w <= 0 || roi.h <= 0) {
    throw std::invalid_argument("roi: zero-area rectangle");
  }
  if (roi.x < 0 || roi.y < 0 || roi.x + roi.w > width || roi.y + roi.h > height) {
    throw std::invalid_argument("roi: rectangle exceeds the canvas");
  }
  RoiMask mask(height, width);
  for (int y = roi.y; y < roi.y + roi.h; ++y) {
    for (int x = roi.x; x < roi.x + roi.w; ++x) {
      mask.set(y, x, true);
    }
  }
  return mask;
}

std::size_t RoiMask::count() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

RoiMask RoiMask::inverted() const {
  RoiMask out = *this;
  for (auto& b : out.bits_) {
    b = b ? 0 : 1;
  }
  return out;
}

}  // namespace colorguide
