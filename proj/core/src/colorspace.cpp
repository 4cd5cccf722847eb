#include "colorguide/colorspace.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace colorguide::colorspace {
namespace {

void require_finite(const PixelImage& img, const char* what) {
  const auto v = img.tensor().values();
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) {
      const std::size_t p = i / 3;
      throw std::invalid_argument(std::string(what) + ": non-finite value at pixel (" +
                                  std::to_string(p / img.width()) + ", " + std::to_string(p % img.width()) +
                                  ") channel " + std::to_string(i % 3));
    }
  }
}

Vec3 xyz_ratios(const Vec3& lin, const WhitePoint& white) {
  const Vec3 xyz = mul(kLinearToXyz, lin);
  return {xyz[0] / white.x, xyz[1] / white.y, xyz[2] / white.z};
}

Vec3 lab_from_linear(const Vec3& lin, const WhitePoint& white) {
  const Vec3 r = xyz_ratios(lin, white);
  const double fx = lab_f(r[0]);
  const double fy = lab_f(r[1]);
  const double fz = lab_f(r[2]);
  return {116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

bool near(double v, double point, double margin) { return std::abs(v - point) < margin; }

}  // namespace

double srgb_to_linear(double c) {
  if (c <= kSrgbBreakpoint) {
    return c / 12.92;
  }
  return std::pow((c + 0.055) / 1.055, 2.4);
}

double linear_to_srgb(double c) {
  if (c <= 0.0031308) {
    return c * 12.92;
  }
  return 1.055 * std::pow(c, 1.0 / 2.4) - 0.055;
}

double srgb_to_linear_derivative(double c) {
  if (c <= kSrgbBreakpoint) {
    return 1.0 / 12.92;
  }
  return 2.4 / 1.055 * std::pow((c + 0.055) / 1.055, 1.4);
}

double lab_f(double t) {
  if (t > kLabBreakpoint) {
    return std::cbrt(t);
  }
  return t / (3.0 * kLabDelta * kLabDelta) + 4.0 / 29.0;
}

double lab_f_derivative(double t) {
  if (t > kLabBreakpoint) {
    const double c = std::cbrt(t);
    return 1.0 / (3.0 * c * c);
  }
  return 1.0 / (3.0 * kLabDelta * kLabDelta);
}

PixelImage srgb_to_linear(const PixelImage& img) {
  require_encoding(img, Encoding::Srgb, "srgb_to_linear");
  require_finite(img, "srgb_to_linear");
  PixelImage out(img.tensor(), Encoding::LinearRgb);
  for (double& v : out.tensor().values()) {
    v = srgb_to_linear(v);
  }
  return out;
}

PixelImage linear_to_srgb(const PixelImage& img) {
  require_encoding(img, Encoding::LinearRgb, "linear_to_srgb");
  require_finite(img, "linear_to_srgb");
  PixelImage out(img.tensor(), Encoding::Srgb);
  for (double& v : out.tensor().values()) {
    v = linear_to_srgb(v);
  }
  return out;
}

PixelImage linear_to_lab(const PixelImage& img, const WhitePoint& white) {
  require_encoding(img, Encoding::LinearRgb, "linear_to_lab");
  require_finite(img, "linear_to_lab");
  PixelImage out(img.height(), img.width(), Encoding::Lab);
  for (std::size_t p = 0; p < img.pixels(); ++p) {
    const auto in = img.pixel(p);
    const Vec3 lab = lab_from_linear({in[0], in[1], in[2]}, white);
    auto o = out.pixel(p);
    o[0] = lab[0];
    o[1] = lab[1];
    o[2] = lab[2];
  }
  return out;
}

PixelImage srgb_to_lab(const PixelImage& img, const WhitePoint& white) {
  return linear_to_lab(srgb_to_linear(img), white);
}

PixelImage clamp_unit(const PixelImage& img) {
  PixelImage out = img;
  for (double& v : out.tensor().values()) {
    v = std::clamp(v, 0.0, 1.0);
  }
  return out;
}

Tensor3 clamp_unit_gradient_gate(const PixelImage& pre_clamp) {
  Tensor3 gate(pre_clamp.height(), pre_clamp.width(), 3);
  const auto in = pre_clamp.tensor().values();
  for (std::size_t i = 0; i < in.size(); ++i) {
    gate[i] = (in[i] >= 0.0 && in[i] <= 1.0) ? 1.0 : 0.0;
  }
  return gate;
}

ColorTriple to_linear(const ColorTriple& srgb) {
  require_encoding(srgb, Encoding::Srgb, "to_linear");
  return srgb_to_linear(PixelImage::filled(1, 1, srgb)).color_at(0);
}

ColorTriple to_srgb(const ColorTriple& linear) {
  require_encoding(linear, Encoding::LinearRgb, "to_srgb");
  return linear_to_srgb(PixelImage::filled(1, 1, linear)).color_at(0);
}

ColorTriple to_lab(const ColorTriple& srgb, const WhitePoint& white) {
  require_encoding(srgb, Encoding::Srgb, "to_lab");
  return srgb_to_lab(PixelImage::filled(1, 1, srgb), white).color_at(0);
}

std::size_t ConversionJacobian::flagged() const {
  return static_cast<std::size_t>(std::count(near_kink.begin(), near_kink.end(), std::uint8_t{1}));
}

ConversionJacobian srgb_to_linear_jacobian(const PixelImage& srgb, double margin) {
  require_encoding(srgb, Encoding::Srgb, "srgb_to_linear_jacobian");
  require_finite(srgb, "srgb_to_linear_jacobian");
  ConversionJacobian jac{srgb.height(), srgb.width(), std::vector<Mat3>(srgb.pixels()),
                         std::vector<std::uint8_t>(srgb.pixels(), 0)};
  for (std::size_t p = 0; p < srgb.pixels(); ++p) {
    const auto in = srgb.pixel(p);
    Mat3 j{};
    bool kink = false;
    for (int c = 0; c < 3; ++c) {
      j[c][c] = srgb_to_linear_derivative(in[c]);
      kink = kink || near(in[c], kSrgbBreakpoint, margin) || near(in[c], 0.0, margin) || near(in[c], 1.0, margin);
    }
    jac.per_pixel[p] = j;
    jac.near_kink[p] = kink ? 1 : 0;
  }
  return jac;
}

ConversionJacobian linear_to_lab_jacobian(const PixelImage& linear, double margin, const WhitePoint& white) {
  require_encoding(linear, Encoding::LinearRgb, "linear_to_lab_jacobian");
  require_finite(linear, "linear_to_lab_jacobian");
  ConversionJacobian jac{linear.height(), linear.width(), std::vector<Mat3>(linear.pixels()),
                         std::vector<std::uint8_t>(linear.pixels(), 0)};
  const Vec3 inv_white{1.0 / white.x, 1.0 / white.y, 1.0 / white.z};
  for (std::size_t p = 0; p < linear.pixels(); ++p) {
    const auto in = linear.pixel(p);
    const Vec3 r = xyz_ratios({in[0], in[1], in[2]}, white);
    const double dfx = lab_f_derivative(r[0]);
    const double dfy = lab_f_derivative(r[1]);
    const double dfz = lab_f_derivative(r[2]);
    Mat3 j{};
    for (int c = 0; c < 3; ++c) {
      const double gx = dfx * kLinearToXyz[0][c] * inv_white[0];
      const double gy = dfy * kLinearToXyz[1][c] * inv_white[1];
      const double gz = dfz * kLinearToXyz[2][c] * inv_white[2];
      j[0][c] = 116.0 * gy;
      j[1][c] = 500.0 * (gx - gy);
      j[2][c] = 200.0 * (gy - gz);
    }
    jac.per_pixel[p] = j;
    const bool kink = near(r[0], kLabBreakpoint, margin) || near(r[1], kLabBreakpoint, margin) ||
                      near(r[2], kLabBreakpoint, margin);
    jac.near_kink[p] = kink ? 1 : 0;
  }
  return jac;
}

ConversionJacobian srgb_to_lab_jacobian(const PixelImage& srgb, double margin, const WhitePoint& white) {
  ConversionJacobian first = srgb_to_linear_jacobian(srgb, margin);
  const ConversionJacobian second = linear_to_lab_jacobian(srgb_to_linear(srgb), margin, white);
  for (std::size_t p = 0; p < first.per_pixel.size(); ++p) {
    first.per_pixel[p] = mul(second.per_pixel[p], first.per_pixel[p]);
    first.near_kink[p] = (first.near_kink[p] || second.near_kink[p]) ? 1 : 0;
  }
  return first;
}

Tensor3 pull_back(const ConversionJacobian& jac, const Tensor3& upstream) {
  if (upstream.height() != jac.height || upstream.width() != jac.width || upstream.channels() != 3) {
    throw std::invalid_argument("pull_back: gradient shape does not match the Jacobian");
  }
  Tensor3 out(jac.height, jac.width, 3);
  for (std::size_t p = 0; p < jac.per_pixel.size(); ++p) {
    const auto g = upstream.pixel(p);
    const Mat3& j = jac.per_pixel[p];
    auto o = out.pixel(p);
    for (int c = 0; c < 3; ++c) {
      o[c] = j[0][c] * g[0] + j[1][c] * g[1] + j[2][c] * g[2];
    }
  }
  return out;
}

}  // namespace colorguide::colorspace
