#pragma once

// Conversions among sRGB, linear-light RGB and CIE 1976 Lab, with the
// per-pixel Jacobians needed to push loss gradients back to the latent.
//
// Reference white is D65 with the 2-degree observer. All arithmetic is double
// precision regardless of the latent precision.

#include <cstdint>
#include <vector>

#include "colorguide/mat3.hpp"
#include "colorguide/types.hpp"

namespace colorguide::colorspace {

struct WhitePoint {
  double x = 0.95047;
  double y = 1.00000;
  double z = 1.08883;
};

inline constexpr WhitePoint kD65{};

// Linear sRGB primaries to CIE XYZ (D65).
inline constexpr Mat3 kLinearToXyz{{{0.4124564, 0.3575761, 0.1804375},
                                    {0.2126729, 0.7151522, 0.0721750},
                                    {0.0193339, 0.1191920, 0.9503041}}};

inline constexpr double kSrgbBreakpoint = 0.04045;
inline constexpr double kLabDelta = 6.0 / 29.0;
inline constexpr double kLabBreakpoint = kLabDelta * kLabDelta * kLabDelta;

// Scalar transfer functions.
double srgb_to_linear(double c);
double linear_to_srgb(double c);
double srgb_to_linear_derivative(double c);
double lab_f(double t);
double lab_f_derivative(double t);

PixelImage srgb_to_linear(const PixelImage& img);
PixelImage linear_to_srgb(const PixelImage& img);
PixelImage srgb_to_lab(const PixelImage& img, const WhitePoint& white = kD65);
PixelImage linear_to_lab(const PixelImage& img, const WhitePoint& white = kD65);

/// Elementwise clamp to [0,1]; the encoding tag is preserved.
///
/// Gradient contract: d(clamp)/dx is 1 on the closed interval [0,1] and 0
/// outside it, see clamp_unit_gradient_gate.
PixelImage clamp_unit(const PixelImage& img);

/// Per-entry 0/1 gate implementing the clamp subgradient for a pre-clamp image.
Tensor3 clamp_unit_gradient_gate(const PixelImage& pre_clamp);

// Single colors go through the 1x1 image path.
ColorTriple to_linear(const ColorTriple& srgb);
ColorTriple to_srgb(const ColorTriple& linear);
ColorTriple to_lab(const ColorTriple& srgb, const WhitePoint& white = kD65);

/// Per-pixel 3x3 Jacobian, entry [i][j] = d out_i / d in_j.
struct ConversionJacobian {
  int height = 0;
  int width = 0;
  std::vector<Mat3> per_pixel;
  // 1 where an input channel sits within the margin of a non-smooth point;
  // the Jacobian there is the one-sided derivative of the active branch.
  std::vector<std::uint8_t> near_kink;

  std::size_t flagged() const;
};

ConversionJacobian srgb_to_linear_jacobian(const PixelImage& srgb, double margin = 1e-4);
ConversionJacobian linear_to_lab_jacobian(const PixelImage& linear, double margin = 1e-4,
                                          const WhitePoint& white = kD65);

/// Jacobian of srgb_to_lab with respect to its sRGB input, by the chain rule
/// through the linearisation and the XYZ/Lab stage.
ConversionJacobian srgb_to_lab_jacobian(const PixelImage& srgb, double margin = 1e-4,
                                        const WhitePoint& white = kD65);

/// out[p] = J[p]^T * upstream[p]: pulls a gradient w.r.t. the conversion's
/// output back to its input.
Tensor3 pull_back(const ConversionJacobian& jac, const Tensor3& upstream);

}  // namespace colorguide::colorspace
