#include "colorguide/roi_loss.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>
#include <stdexcept>
#include <string>

#include "colorguide/colorspace.hpp"

namespace colorguide::loss {
namespace {

void require_shape(const PixelImage& img, const RoiMask& mask, const char* what) {
  if (!mask.matches(img)) {
    throw std::invalid_argument(std::string(what) + ": mask is " + std::to_string(mask.height()) + "x" +
                                std::to_string(mask.width()) + ", image is " + std::to_string(img.height()) + "x" +
                                std::to_string(img.width()));
  }
}

void require_finite(const PixelImage& img, const char* what) {
  if (!img.tensor().all_finite()) {
    throw std::invalid_argument(std::string(what) + ": image contains non-finite values");
  }
}

void require_field(const DistanceField& u, const RoiMask& mask, const char* what) {
  if (u.height != mask.height() || u.width != mask.width()) {
    throw std::invalid_argument(std::string(what) + ": mask and distance field shapes differ");
  }
}

bool pixel_finite(std::span<const double> px) {
  return std::isfinite(px[0]) && std::isfinite(px[1]) && std::isfinite(px[2]);
}

// Masked mean with divisor |Omega|, in row-major order.
Vec3 masked_mean(const PixelImage& img, const RoiMask& mask, std::size_t n) {
  Vec3 sum{0.0, 0.0, 0.0};
  for (std::size_t p = 0; p < img.pixels(); ++p) {
    if (mask[p]) {
      const auto px = img.pixel(p);
      sum[0] += px[0];
      sum[1] += px[1];
      sum[2] += px[2];
    }
  }
  const double dn = static_cast<double>(n);
  return {sum[0] / dn, sum[1] / dn, sum[2] / dn};
}

double norm3(const Vec3& v) { return std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]); }

struct FieldStats {
  std::size_t n = 0;
  double mean = 0.0;
  double var = 0.0;
};

FieldStats field_stats(const DistanceField& u, const RoiMask& mask) {
  FieldStats s;
  double sum = 0.0;
  for (std::size_t p = 0; p < u.u.size(); ++p) {
    if (mask[p]) {
      sum += u.u[p];
      ++s.n;
    }
  }
  s.mean = sum / static_cast<double>(s.n);
  double acc = 0.0;
  for (std::size_t p = 0; p < u.u.size(); ++p) {
    if (mask[p]) {
      const double d = u.u[p] - s.mean;
      acc += d * d;
    }
  }
  s.var = acc / static_cast<double>(s.n);
  return s;
}

}  // namespace

void LossHyperparams::validate() const {
  auto positive = [](double v, const char* key) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw std::invalid_argument(std::string(key) + ": must be positive");
    }
  };
  auto non_negative = [](double v, const char* key) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw std::invalid_argument(std::string(key) + ": must be non-negative");
    }
  };
  positive(w_L, "loss.w_L");
  positive(w_ab, "loss.w_ab");
  non_negative(tau_mean, "loss.tau_mean");
  non_negative(tau_pix, "loss.tau_pix");
  non_negative(tau_tail, "loss.tau_tail");
  non_negative(tau_max, "loss.tau_max");
  non_negative(tau_var, "loss.tau_var");
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw std::invalid_argument("loss.alpha: must lie in (0,1)");
  }
  positive(beta, "loss.beta");
  if (!(p >= 1.0) || !std::isfinite(p)) {
    throw std::invalid_argument("loss.p: must be at least 1");
  }
  positive(eps, "loss.eps");
  positive(delta, "loss.delta");
  non_negative(lambda_mean, "loss.lambda_mean");
  non_negative(lambda_pix, "loss.lambda_pix");
  non_negative(lambda_tail, "loss.lambda_tail");
  non_negative(lambda_max, "loss.lambda_max");
  non_negative(lambda_var, "loss.lambda_var");
}

double LossTerms::weighted(const LossHyperparams& hp) const {
  return hp.lambda_mean * l_mean + hp.lambda_pix * l_pix + hp.lambda_tail * l_tail + hp.lambda_max * l_max +
         hp.lambda_var * l_var;
}

double linear_rgb_enforcer_loss(const PixelImage& linear, const RoiMask& mask, const ColorTriple& target_linear) {
  require_encoding(linear, Encoding::LinearRgb, "linear_rgb_enforcer_loss");
  require_encoding(target_linear, Encoding::LinearRgb, "linear_rgb_enforcer_loss target");
  require_shape(linear, mask, "linear_rgb_enforcer_loss");
  Vec3 sum{0.0, 0.0, 0.0};
  std::size_t n = 0;
  for (std::size_t p = 0; p < linear.pixels(); ++p) {
    const auto px = linear.pixel(p);
    if (mask[p] && pixel_finite(px)) {
      sum[0] += px[0];
      sum[1] += px[1];
      sum[2] += px[2];
      ++n;
    }
  }
  if (n == 0) {
    return 0.0;
  }
  double out = 0.0;
  for (int c = 0; c < 3; ++c) {
    const double d = sum[c] / static_cast<double>(n) - target_linear[c];
    out += d * d;
  }
  return out;
}

Tensor3 linear_rgb_enforcer_gradient(const PixelImage& linear, const RoiMask& mask,
                                     const ColorTriple& target_linear) {
  require_encoding(linear, Encoding::LinearRgb, "linear_rgb_enforcer_gradient");
  require_shape(linear, mask, "linear_rgb_enforcer_gradient");
  Tensor3 grad(linear.height(), linear.width(), 3);
  Vec3 sum{0.0, 0.0, 0.0};
  std::size_t n = 0;
  for (std::size_t p = 0; p < linear.pixels(); ++p) {
    const auto px = linear.pixel(p);
    if (mask[p] && pixel_finite(px)) {
      sum[0] += px[0];
      sum[1] += px[1];
      sum[2] += px[2];
      ++n;
    }
  }
  if (n == 0) {
    return grad;
  }
  const double dn = static_cast<double>(n);
  Vec3 g{};
  for (int c = 0; c < 3; ++c) {
    g[c] = 2.0 * (sum[c] / dn - target_linear[c]) / dn;
  }
  for (std::size_t p = 0; p < linear.pixels(); ++p) {
    if (mask[p] && pixel_finite(linear.pixel(p))) {
      auto o = grad.pixel(p);
      o[0] = g[0];
      o[1] = g[1];
      o[2] = g[2];
    }
  }
  return grad;
}

double lab_euclidean_loss(const PixelImage& lab, const RoiMask& mask, const ColorTriple& target_lab, double delta,
                          double mean_eps) {
  require_encoding(lab, Encoding::Lab, "lab_euclidean_loss");
  require_encoding(target_lab, Encoding::Lab, "lab_euclidean_loss target");
  require_shape(lab, mask, "lab_euclidean_loss");
  require_finite(lab, "lab_euclidean_loss");
  const std::size_t n = mask.count();
  if (n == 0) {
    return 0.0;
  }
  Vec3 sum{0.0, 0.0, 0.0};
  for (std::size_t p = 0; p < lab.pixels(); ++p) {
    if (mask[p]) {
      const auto px = lab.pixel(p);
      sum[0] += px[0];
      sum[1] += px[1];
      sum[2] += px[2];
    }
  }
  double sq = 0.0;
  for (int c = 0; c < 3; ++c) {
    const double d = sum[c] / (static_cast<double>(n) + mean_eps) - target_lab[c];
    sq += d * d;
  }
  return std::sqrt(sq + delta);
}

Tensor3 lab_euclidean_gradient(const PixelImage& lab, const RoiMask& mask, const ColorTriple& target_lab,
                               double delta, double mean_eps) {
  require_encoding(lab, Encoding::Lab, "lab_euclidean_gradient");
  require_shape(lab, mask, "lab_euclidean_gradient");
  require_finite(lab, "lab_euclidean_gradient");
  Tensor3 grad(lab.height(), lab.width(), 3);
  const std::size_t n = mask.count();
  if (n == 0) {
    return grad;
  }
  const double denom = static_cast<double>(n) + mean_eps;
  Vec3 sum{0.0, 0.0, 0.0};
  for (std::size_t p = 0; p < lab.pixels(); ++p) {
    if (mask[p]) {
      const auto px = lab.pixel(p);
      sum[0] += px[0];
      sum[1] += px[1];
      sum[2] += px[2];
    }
  }
  Vec3 d{};
  double sq = 0.0;
  for (int c = 0; c < 3; ++c) {
    d[c] = sum[c] / denom - target_lab[c];
    sq += d[c] * d[c];
  }
  const double dist = std::sqrt(sq + delta);
  for (std::size_t p = 0; p < lab.pixels(); ++p) {
    if (mask[p]) {
      auto o = grad.pixel(p);
      for (int c = 0; c < 3; ++c) {
        o[c] = d[c] / (dist * denom);
      }
    }
  }
  return grad;
}

DistanceField distance_field(const PixelImage& lab, const ColorTriple& target_lab, double gate,
                             const LossHyperparams& hp) {
  require_encoding(lab, Encoding::Lab, "distance_field");
  require_encoding(target_lab, Encoding::Lab, "distance_field target");
  require_finite(lab, "distance_field");
  if (!(gate >= 0.0 && gate <= 1.0)) {
    throw std::invalid_argument("distance_field: gate must lie in [0,1]");
  }
  DistanceField field{lab.height(), lab.width(), std::vector<double>(lab.pixels()), gate};
  for (std::size_t p = 0; p < lab.pixels(); ++p) {
    const auto px = lab.pixel(p);
    const double dl = px[0] - target_lab[0];
    const double da = px[1] - target_lab[1];
    const double db = px[2] - target_lab[2];
    const double ab2 = da * da + db * db;
    const double q_safe = hp.w_L * dl * dl + hp.w_ab * ab2;
    const double q00 = dl * dl + ab2;
    const double q = (1.0 - gate) * q_safe + gate * q00;
    field.u[p] = std::sqrt(q + hp.eps);
  }
  return field;
}

double hinge(double r, double p) {
  if (r <= 0.0) {
    return 0.0;
  }
  return p == 2.0 ? r * r : std::pow(r, p);
}

double hinge_derivative(double r, double p) {
  if (r <= 0.0) {
    return 0.0;
  }
  if (p == 1.0) {
    return 1.0;
  }
  return p == 2.0 ? 2.0 * r : p * std::pow(r, p - 1.0);
}

CvarResult cvar_select(const DistanceField& u, const RoiMask& mask, double alpha) {
  require_field(u, mask, "cvar");
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw std::invalid_argument("cvar: alpha must lie in (0,1)");
  }
  std::vector<std::size_t> idx;
  for (std::size_t p = 0; p < u.u.size(); ++p) {
    if (mask[p]) {
      idx.push_back(p);
    }
  }
  if (idx.empty()) {
    throw std::invalid_argument("cvar: undefined on an empty mask");
  }
  const double raw = std::ceil((1.0 - alpha) * static_cast<double>(idx.size()));
  const std::size_t k = std::clamp<std::size_t>(static_cast<std::size_t>(raw), 1, idx.size());
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                    [&](std::size_t a, std::size_t b) { return u.u[a] > u.u[b] || (u.u[a] == u.u[b] && a < b); });
  idx.resize(k);
  double sum = 0.0;
  for (std::size_t p : idx) {
    sum += u.u[p];
  }
  return {sum / static_cast<double>(k), k, std::move(idx)};
}

double cvar(const DistanceField& u, const RoiMask& mask, double alpha) { return cvar_select(u, mask, alpha).value; }

double soft_max_lse(const DistanceField& u, const RoiMask& mask, double beta) {
  require_field(u, mask, "soft_max_lse");
  if (!(beta > 0.0)) {
    throw std::invalid_argument("soft_max_lse: beta must be positive");
  }
  double m = -INFINITY;
  std::size_t n = 0;
  for (std::size_t p = 0; p < u.u.size(); ++p) {
    if (mask[p]) {
      m = std::max(m, u.u[p]);
      ++n;
    }
  }
  if (n == 0) {
    throw std::invalid_argument("soft_max_lse: undefined on an empty mask");
  }
  double acc = 0.0;
  for (std::size_t p = 0; p < u.u.size(); ++p) {
    if (mask[p]) {
      acc += std::exp(beta * (u.u[p] - m));
    }
  }
  return m + std::log(acc / static_cast<double>(n)) / beta;
}

LossTerms roi_loss_terms(const DistanceField& u, const PixelImage& lab, const ColorTriple& target_lab,
                         const RoiMask& mask, const LossHyperparams& hp) {
  require_encoding(lab, Encoding::Lab, "roi_loss_terms");
  require_shape(lab, mask, "roi_loss_terms");
  require_field(u, mask, "roi_loss_terms");
  const std::size_t n = mask.count();
  if (n == 0) {
    std::cerr << "warning: roi_loss_terms called with an empty mask, all terms set to 0\n";
    return {};
  }
  LossTerms out;
  const Vec3 mu = masked_mean(lab, mask, n);
  const double mean_dist = norm3({mu[0] - target_lab[0], mu[1] - target_lab[1], mu[2] - target_lab[2]});
  out.l_mean = hinge(mean_dist - hp.tau_mean, hp.p);

  double pix = 0.0;
  for (std::size_t p = 0; p < u.u.size(); ++p) {
    if (mask[p]) {
      pix += hinge(u.u[p] - hp.tau_pix, hp.p);
    }
  }
  out.l_pix = pix / static_cast<double>(n);
  out.l_tail = hinge(cvar(u, mask, hp.alpha) - hp.tau_tail, hp.p);
  out.l_max = hinge(soft_max_lse(u, mask, hp.beta) - hp.tau_max, hp.p);
  out.l_var = hinge(field_stats(u, mask).var - hp.tau_var, hp.p);
  return out;
}

Tensor3 roi_loss_terms_gradient(const PixelImage& lab, const ColorTriple& target_lab, const RoiMask& mask,
                                double gate, const LossHyperparams& hp) {
  require_encoding(lab, Encoding::Lab, "roi_loss_terms_gradient");
  require_shape(lab, mask, "roi_loss_terms_gradient");
  Tensor3 grad(lab.height(), lab.width(), 3);
  const std::size_t n = mask.count();
  if (n == 0) {
    return grad;
  }
  const double dn = static_cast<double>(n);
  const DistanceField u = distance_field(lab, target_lab, gate, hp);

  // dL/du per pixel, accumulated from the four u-based terms.
  std::vector<double> du(u.u.size(), 0.0);
  for (std::size_t p = 0; p < u.u.size(); ++p) {
    if (mask[p]) {
      du[p] += hp.lambda_pix * hinge_derivative(u.u[p] - hp.tau_pix, hp.p) / dn;
    }
  }
  const CvarResult tail = cvar_select(u, mask, hp.alpha);
  const double tail_scale = hp.lambda_tail * hinge_derivative(tail.value - hp.tau_tail, hp.p) / static_cast<double>(tail.k);
  if (tail_scale != 0.0) {
    for (std::size_t p : tail.selected) {
      du[p] += tail_scale;
    }
  }
  const double lse = soft_max_lse(u, mask, hp.beta);
  const double max_scale = hp.lambda_max * hinge_derivative(lse - hp.tau_max, hp.p);
  if (max_scale != 0.0) {
    // softmax weight exp(beta (u - lse)) / n
    for (std::size_t p = 0; p < u.u.size(); ++p) {
      if (mask[p]) {
        du[p] += max_scale * std::exp(hp.beta * (u.u[p] - lse)) / dn;
      }
    }
  }
  const FieldStats fs = field_stats(u, mask);
  const double var_scale = hp.lambda_var * hinge_derivative(fs.var - hp.tau_var, hp.p);
  if (var_scale != 0.0) {
    for (std::size_t p = 0; p < u.u.size(); ++p) {
      if (mask[p]) {
        du[p] += var_scale * 2.0 * (u.u[p] - fs.mean) / dn;
      }
    }
  }

  const double cl = 2.0 * ((1.0 - gate) * hp.w_L + gate);
  const double cab = 2.0 * ((1.0 - gate) * hp.w_ab + gate);
  for (std::size_t p = 0; p < u.u.size(); ++p) {
    if (!mask[p] || du[p] == 0.0) {
      continue;
    }
    const auto px = lab.pixel(p);
    const double dq = du[p] / (2.0 * u.u[p]);
    auto o = grad.pixel(p);
    o[0] += dq * cl * (px[0] - target_lab[0]);
    o[1] += dq * cab * (px[1] - target_lab[1]);
    o[2] += dq * cab * (px[2] - target_lab[2]);
  }

  const Vec3 mu = masked_mean(lab, mask, n);
  const Vec3 d{mu[0] - target_lab[0], mu[1] - target_lab[1], mu[2] - target_lab[2]};
  const double r = norm3(d);
  const double mean_scale = hp.lambda_mean * hinge_derivative(r - hp.tau_mean, hp.p);
  if (mean_scale != 0.0 && r > 0.0) {
    const Vec3 g{mean_scale * d[0] / (r * dn), mean_scale * d[1] / (r * dn), mean_scale * d[2] / (r * dn)};
    for (std::size_t p = 0; p < u.u.size(); ++p) {
      if (mask[p]) {
        auto o = grad.pixel(p);
        o[0] += g[0];
        o[1] += g[1];
        o[2] += g[2];
      }
    }
  }
  return grad;
}

TotalLoss total_loss(const PixelImage& srgb, double t, const schedule::ScheduleContext& ctx,
                     const ColorTriple& target_lab, const RoiMask& mask, const LossHyperparams& hp) {
  require_encoding(srgb, Encoding::Srgb, "total_loss");
  require_shape(srgb, mask, "total_loss");
  const PixelImage lab = colorspace::srgb_to_lab(srgb);
  const double gate = schedule::late_start_gate(schedule::progress(t, ctx), ctx.s);
  const DistanceField u = distance_field(lab, target_lab, gate, hp);
  TotalLoss out;
  out.terms = roi_loss_terms(u, lab, target_lab, mask, hp);
  out.value = out.terms.weighted(hp);
  out.gate = gate;
  return out;
}

Tensor3 total_loss_gradient(const PixelImage& srgb, double t, const schedule::ScheduleContext& ctx,
                            const ColorTriple& target_lab, const RoiMask& mask, const LossHyperparams& hp) {
  require_encoding(srgb, Encoding::Srgb, "total_loss_gradient");
  require_shape(srgb, mask, "total_loss_gradient");
  const PixelImage lab = colorspace::srgb_to_lab(srgb);
  const double gate = schedule::late_start_gate(schedule::progress(t, ctx), ctx.s);
  const Tensor3 g_lab = roi_loss_terms_gradient(lab, target_lab, mask, gate, hp);
  return colorspace::pull_back(colorspace::srgb_to_lab_jacobian(srgb), g_lab);
}

double safe_quadratic_form(const ColorTriple& a, const ColorTriple& b) {
  require_encoding(a, Encoding::Lab, "safe_quadratic_form");
  require_encoding(b, Encoding::Lab, "safe_quadratic_form");
  const double dl = a[0] - b[0];
  const double da = a[1] - b[1];
  const double db = a[2] - b[2];
  return dl * dl + da * da + db * db;
}

double delta_e00_taylor(const ColorTriple& a, const ColorTriple& b) { return std::sqrt(safe_quadratic_form(a, b)); }

}  // namespace colorguide::loss
