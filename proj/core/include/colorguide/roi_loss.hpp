#pragma once

// ROI color losses and their analytic gradients.
//
// Every reduction runs in row-major pixel order so results are reproducible
// bit for bit. Gradients are returned as H x W x 3 tensors with respect to the
// image argument of the matching loss; ROI-restricted terms have exact zeros
// outside the mask.

#include <cstddef>
#include <vector>

#include "colorguide/schedule.hpp"
#include "colorguide/types.hpp"

namespace colorguide::loss {

struct LossHyperparams {
  double w_L = 0.5;
  double w_ab = 1.0;
  double tau_mean = 1.0;
  double tau_pix = 2.0;
  double tau_tail = 5.0;
  double tau_max = 10.0;
  double tau_var = 4.0;
  double alpha = 0.9;
  double beta = 0.5;
  double p = 2.0;
  double eps = 1e-6;
  double delta = 1e-8;  // stabiliser of the Lab euclidean loss
  double lambda_mean = 1.0;
  double lambda_pix = 1.0;
  double lambda_tail = 2.0;
  double lambda_max = 0.5;
  double lambda_var = 0.5;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;

  bool operator==(const LossHyperparams&) const = default;
};

struct LossTerms {
  double l_mean = 0.0;
  double l_pix = 0.0;
  double l_tail = 0.0;
  double l_max = 0.0;
  double l_var = 0.0;

  double weighted(const LossHyperparams& hp) const;
};

struct DistanceField {
  int height = 0;
  int width = 0;
  std::vector<double> u;
  double gate_used = 0.0;

  double operator[](std::size_t p) const { return u[p]; }
};

// Algorithm 1: squared distance between the masked mean of finite linear
// pixels and the target. Non-finite pixels are dropped from the ROI.
double linear_rgb_enforcer_loss(const PixelImage& linear, const RoiMask& mask, const ColorTriple& target_linear);
Tensor3 linear_rgb_enforcer_gradient(const PixelImage& linear, const RoiMask& mask,
                                     const ColorTriple& target_linear);

// Algorithm 2: sqrt(|mean - target|^2 + delta) with mean = sum / (n + mean_eps).
double lab_euclidean_loss(const PixelImage& lab, const RoiMask& mask, const ColorTriple& target_lab,
                          double delta = 1e-8, double mean_eps = 1e-8);
Tensor3 lab_euclidean_gradient(const PixelImage& lab, const RoiMask& mask, const ColorTriple& target_lab,
                               double delta = 1e-8, double mean_eps = 1e-8);

/// Algorithm 3, evaluated on every pixel of the image.
DistanceField distance_field(const PixelImage& lab, const ColorTriple& target_lab, double gate,
                             const LossHyperparams& hp);

double hinge(double r, double p);
/// p * max(0, r)^(p-1); the subgradient at r <= 0 is 0.
double hinge_derivative(double r, double p);

struct CvarResult {
  double value = 0.0;
  std::size_t k = 0;
  std::vector<std::size_t> selected;  // pixel indices, largest value first
};

/// Mean of the k = max(1, ceil((1-alpha)|ROI|)) largest ROI values. Ties go
/// to the lower pixel index. Throws on an empty mask.
CvarResult cvar_select(const DistanceField& u, const RoiMask& mask, double alpha);
double cvar(const DistanceField& u, const RoiMask& mask, double alpha);

/// (1/beta) log(mean exp(beta u)) over the ROI, max-shifted. Throws on an
/// empty mask.
double soft_max_lse(const DistanceField& u, const RoiMask& mask, double beta);

/// Algorithm 4. An empty mask yields all-zero terms and a warning on stderr.
LossTerms roi_loss_terms(const DistanceField& u, const PixelImage& lab, const ColorTriple& target_lab,
                         const RoiMask& mask, const LossHyperparams& hp);

/// Gradient of the weighted term sum (lambda-weighted) w.r.t. the Lab image.
Tensor3 roi_loss_terms_gradient(const PixelImage& lab, const ColorTriple& target_lab, const RoiMask& mask,
                                double gate, const LossHyperparams& hp);

struct TotalLoss {
  double value = 0.0;
  LossTerms terms;
  double gate = 0.0;
};

/// Algorithm 5 on an sRGB image. The gate only enters the distance field.
TotalLoss total_loss(const PixelImage& srgb, double t, const schedule::ScheduleContext& ctx,
                     const ColorTriple& target_lab, const RoiMask& mask, const LossHyperparams& hp);

/// Gradient of total_loss(...).value w.r.t. the sRGB image.
Tensor3 total_loss_gradient(const PixelImage& srgb, double t, const schedule::ScheduleContext& ctx,
                            const ColorTriple& target_lab, const RoiMask& mask, const LossHyperparams& hp);

/// Euclidean Lab distance (second-order Taylor form of CIEDE2000).
double delta_e00_taylor(const ColorTriple& a, const ColorTriple& b);
/// Unrooted squared Lab distance.
double safe_quadratic_form(const ColorTriple& a, const ColorTriple& b);

}  // namespace colorguide::loss
