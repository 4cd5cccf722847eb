#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace colorguide {

enum class Encoding { Srgb, LinearRgb, Lab };

std::string_view to_string(Encoding e);

/// A single color together with the encoding its numbers are expressed in.
struct ColorTriple {
  std::array<double, 3> c{};
  Encoding encoding = Encoding::Srgb;

  static ColorTriple srgb(double r, double g, double b) { return {{r, g, b}, Encoding::Srgb}; }
  static ColorTriple linear(double r, double g, double b) { return {{r, g, b}, Encoding::LinearRgb}; }
  static ColorTriple lab(double l, double a, double b) { return {{l, a, b}, Encoding::Lab}; }

  double operator[](std::size_t i) const { return c[i]; }
  double& operator[](std::size_t i) { return c[i]; }

  bool operator==(const ColorTriple&) const = default;
};

// Throws std::invalid_argument naming `what` when the encoding differs.
void require_encoding(const ColorTriple& color, Encoding expected, std::string_view what);

/// Dense height x width x channels tensor, row-major with interleaved channels.
class Tensor3 {
 public:
  Tensor3() = default;
  Tensor3(int height, int width, int channels, double fill = 0.0);

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return channels_; }
  std::size_t pixels() const { return static_cast<std::size_t>(height_) * width_; }
  std::size_t size() const { return data_.size(); }

  double& at(int y, int x, int c) { return data_[index(y, x, c)]; }
  double at(int y, int x, int c) const { return data_[index(y, x, c)]; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  std::span<double> pixel(std::size_t p) { return {data_.data() + p * channels_, static_cast<std::size_t>(channels_)}; }
  std::span<const double> pixel(std::size_t p) const {
    return {data_.data() + p * channels_, static_cast<std::size_t>(channels_)};
  }

  bool same_shape(const Tensor3& other) const {
    return height_ == other.height_ && width_ == other.width_ && channels_ == other.channels_;
  }
  bool all_finite() const;

  bool operator==(const Tensor3&) const = default;

 private:
  std::size_t index(int y, int x, int c) const {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }

  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<double> data_;
};

/// Three-channel image tagged with its color encoding.
class PixelImage {
 public:
  PixelImage() = default;
  PixelImage(int height, int width, Encoding encoding, double fill = 0.0);
  PixelImage(Tensor3 data, Encoding encoding);

  static PixelImage filled(int height, int width, const ColorTriple& color);

  int height() const { return data_.height(); }
  int width() const { return data_.width(); }
  std::size_t pixels() const { return data_.pixels(); }
  Encoding encoding() const { return encoding_; }

  std::span<double> pixel(std::size_t p) { return data_.pixel(p); }
  std::span<const double> pixel(std::size_t p) const { return data_.pixel(p); }
  double& at(int y, int x, int c) { return data_.at(y, x, c); }
  double at(int y, int x, int c) const { return data_.at(y, x, c); }

  ColorTriple color_at(std::size_t p) const;
  void set_color(std::size_t p, const ColorTriple& color);

  const Tensor3& tensor() const { return data_; }
  Tensor3& tensor() { return data_; }

  bool operator==(const PixelImage&) const = default;

 private:
  Tensor3 data_;
  Encoding encoding_ = Encoding::Srgb;
};

// Throws std::invalid_argument naming `what` when the encoding differs.
void require_encoding(const PixelImage& image, Encoding expected, std::string_view what);

struct Rect {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;

  bool operator==(const Rect&) const = default;
};

/// Binary region-of-interest mask.
class RoiMask {
 public:
  RoiMask() = default;
  RoiMask(int height, int width, bool fill = false);

  static RoiMask from_rect(int height, int width, const Rect& roi);

  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t pixels() const { return bits_.size(); }

  bool operator()(int y, int x) const { return bits_[static_cast<std::size_t>(y) * width_ + x] != 0; }
  bool operator[](std::size_t p) const { return bits_[p] != 0; }
  void set(int y, int x, bool on) { bits_[static_cast<std::size_t>(y) * width_ + x] = on ? 1 : 0; }
  void set(std::size_t p, bool on) { bits_[p] = on ? 1 : 0; }

  std::size_t count() const;
  bool empty() const { return count() == 0; }
  RoiMask inverted() const;

  template <class T>
  bool matches(const T& other) const {
    return height_ == other.height() && width_ == other.width();
  }

  bool operator==(const RoiMask&) const = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<std::uint8_t> bits_;
};

}  // namespace colorguide
