#include "colorguide/toy_diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "colorguide/colorspace.hpp"

namespace colorguide::diffusion {
namespace {

void require_same_shape(const Tensor3& a, const Tensor3& b, const char* what) {
  if (!a.same_shape(b)) {
    throw std::invalid_argument(std::string(what) + ": tensor shapes differ");
  }
}

// sqrt(ab) * C * (ab * C + noise * I)^-1 for symmetric C.
Mat3 gain(const Mat3& c, double ab, double noise) {
  Mat3 m = scaled(c, ab);
  for (int i = 0; i < 3; ++i) {
    m[i][i] += noise;
  }
  return scaled(mul(c, inverse(m)), std::sqrt(ab));
}

}  // namespace

double NoiseSchedule::alpha_bar_at(int t) const {
  if (t < 0 || t >= static_cast<int>(alpha_bar.size())) {
    throw std::invalid_argument("alpha_bar_at: timestep " + std::to_string(t) + " outside the training grid");
  }
  return alpha_bar[static_cast<std::size_t>(t)];
}

int NoiseSchedule::index_of(int t) const {
  const auto it = std::find(timesteps.begin(), timesteps.end(), t);
  if (it == timesteps.end()) {
    throw std::invalid_argument("timestep " + std::to_string(t) + " is not in the schedule");
  }
  return static_cast<int>(it - timesteps.begin());
}

NoiseSchedule build_schedule(int N, int T_train, double beta_start, double beta_end) {
  if (N < 1 || T_train < 1 || N > T_train) {
    throw std::invalid_argument("build_schedule: need 1 <= N <= T_train");
  }
  if (!(beta_start > 0.0 && beta_start < beta_end && beta_end < 1.0)) {
    throw std::invalid_argument("build_schedule: need 0 < beta_start < beta_end < 1");
  }
  NoiseSchedule s;
  s.N = N;
  s.T_train = T_train;
  s.alpha_bar.resize(static_cast<std::size_t>(T_train));
  double prod = 1.0;
  for (int i = 0; i < T_train; ++i) {
    const double frac = T_train == 1 ? 0.0 : static_cast<double>(i) / (T_train - 1);
    prod *= 1.0 - (beta_start + (beta_end - beta_start) * frac);
    s.alpha_bar[static_cast<std::size_t>(i)] = prod;
  }
  s.timesteps.resize(static_cast<std::size_t>(N));
  for (int i = 0; i < N; ++i) {
    s.timesteps[static_cast<std::size_t>(i)] =
        static_cast<int>((static_cast<long long>(N - 1 - i) * T_train) / N);
  }
  return s;
}

Tensor3 add_noise(const Tensor3& x0, const Tensor3& eps, int t, const NoiseSchedule& sched) {
  require_same_shape(x0, eps, "add_noise");
  const double ab = sched.alpha_bar_at(t);
  const double a = std::sqrt(ab);
  const double b = std::sqrt(1.0 - ab);
  Tensor3 out(x0.height(), x0.width(), x0.channels());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = a * x0[i] + b * eps[i];
  }
  return out;
}

void FlatColorPrior::validate() const {
  require_encoding(mu_cond, Encoding::LinearRgb, "prior.mu_cond");
  require_encoding(mu_uncond, Encoding::LinearRgb, "prior.mu_uncond");
  if (!(sigma_cond > 0.0)) {
    throw std::invalid_argument("prior.sigma_cond: must be positive");
  }
  if (!(sigma_uncond > 0.0)) {
    throw std::invalid_argument("prior.sigma_uncond: must be positive");
  }
  if (!(sigma_texture > 0.0)) {
    throw std::invalid_argument("prior.sigma_texture: must be positive");
  }
}

LatentCodec::LatentCodec(const Mat3& mix, const Vec3& offset, double alpha_vae)
    : mix_(mix), offset_(offset), alpha_vae_(alpha_vae) {
  if (!(alpha_vae > 0.0) || !std::isfinite(alpha_vae)) {
    throw std::invalid_argument("codec.alpha_vae: must be positive");
  }
  if (determinant(mix) == 0.0) {
    throw std::invalid_argument("codec.mix: matrix is singular");
  }
  const double cond = condition_number(mix);
  if (!(cond < 100.0)) {
    throw std::invalid_argument("codec.mix: condition number " + std::to_string(cond) + " is not below 100");
  }
  forward_ = scaled(mix, alpha_vae);
  inverse_ = inverse(forward_);
}

Vec3 LatentCodec::encode_color(const Vec3& srgb) const {
  return mul(forward_, Vec3{srgb[0] + offset_[0], srgb[1] + offset_[1], srgb[2] + offset_[2]});
}

Tensor3 LatentCodec::encode(const PixelImage& srgb) const {
  require_encoding(srgb, Encoding::Srgb, "encode");
  Tensor3 z(srgb.height(), srgb.width(), 3);
  for (std::size_t p = 0; p < srgb.pixels(); ++p) {
    const auto px = srgb.pixel(p);
    const Vec3 v = encode_color({px[0], px[1], px[2]});
    auto o = z.pixel(p);
    o[0] = v[0];
    o[1] = v[1];
    o[2] = v[2];
  }
  return z;
}

PixelImage LatentCodec::decode_unclamped(const Tensor3& z) const {
  if (z.channels() != 3) {
    throw std::invalid_argument("decode: latent must have 3 channels");
  }
  PixelImage x(z.height(), z.width(), Encoding::Srgb);
  for (std::size_t p = 0; p < z.pixels(); ++p) {
    const auto zp = z.pixel(p);
    const Vec3 v = mul(inverse_, Vec3{zp[0], zp[1], zp[2]});
    auto o = x.pixel(p);
    o[0] = v[0] - offset_[0];
    o[1] = v[1] - offset_[1];
    o[2] = v[2] - offset_[2];
  }
  return x;
}

PixelImage LatentCodec::decode(const Tensor3& z) const { return colorspace::clamp_unit(decode_unclamped(z)); }

Tensor3 posterior_mean(const Tensor3& z, int t, Branch branch, const FlatColorPrior& prior, const LatentCodec& codec,
                       const NoiseSchedule& sched, const RoiMask& regions) {
  if (z.channels() != 3 || !regions.matches(z)) {
    throw std::invalid_argument("posterior_mean: latent and region mask shapes differ");
  }
  const double ab = sched.alpha_bar_at(t);
  const double sa = std::sqrt(ab);
  const ColorTriple mu_lin = branch == Branch::Conditional ? prior.mu_cond : prior.mu_uncond;
  const double sigma_c = branch == Branch::Conditional ? prior.sigma_cond : prior.sigma_uncond;
  const ColorTriple mu = colorspace::to_srgb(mu_lin);
  const Vec3 m = codec.encode_color(mu.c);
  const Mat3& a = codec.encode_matrix();
  const Mat3 s = mul(a, transpose(a));
  const double st2 = prior.sigma_texture * prior.sigma_texture;
  const Mat3 k_tex = gain(scaled(s, st2), ab, 1.0 - ab);

  Tensor3 out(z.height(), z.width(), 3);
  for (int region = 0; region < 2; ++region) {
    const bool want = region == 0;
    std::size_t count = 0;
    Vec3 sum{0.0, 0.0, 0.0};
    for (std::size_t p = 0; p < z.pixels(); ++p) {
      if (regions[p] == want) {
        const auto zp = z.pixel(p);
        sum[0] += zp[0];
        sum[1] += zp[1];
        sum[2] += zp[2];
        ++count;
      }
    }
    if (count == 0) {
      continue;
    }
    const double P = static_cast<double>(count);
    const Vec3 zbar{sum[0] / P, sum[1] / P, sum[2] / P};
    const Mat3 k_mean = gain(scaled(s, sigma_c * sigma_c + st2 / P), ab, (1.0 - ab) / P);
    const Vec3 shift = mul(k_mean, Vec3{zbar[0] - sa * m[0], zbar[1] - sa * m[1], zbar[2] - sa * m[2]});
    for (std::size_t p = 0; p < z.pixels(); ++p) {
      if (regions[p] != want) {
        continue;
      }
      const auto zp = z.pixel(p);
      const Vec3 dev = mul(k_tex, Vec3{zp[0] - zbar[0], zp[1] - zbar[1], zp[2] - zbar[2]});
      auto o = out.pixel(p);
      for (int c = 0; c < 3; ++c) {
        o[c] = m[c] + shift[c] + dev[c];
      }
    }
  }
  return out;
}

Tensor3 analytic_denoiser(const Tensor3& z, int t, Branch branch, const FlatColorPrior& prior,
                          const LatentCodec& codec, const NoiseSchedule& sched, const RoiMask& regions) {
  const Tensor3 x0 = posterior_mean(z, t, branch, prior, codec, sched, regions);
  const double ab = sched.alpha_bar_at(t);
  const double sa = std::sqrt(ab);
  const double sb = std::sqrt(1.0 - ab);
  Tensor3 eps(z.height(), z.width(), z.channels());
  for (std::size_t i = 0; i < eps.size(); ++i) {
    eps[i] = (z[i] - sa * x0[i]) / sb;
  }
  return eps;
}

Tensor3 analytic_denoiser(const Tensor3& z, int t, Branch branch, const FlatColorPrior& prior,
                          const LatentCodec& codec, const NoiseSchedule& sched) {
  return analytic_denoiser(z, t, branch, prior, codec, sched, RoiMask(z.height(), z.width(), true));
}

Tensor3 cfg_combine(const Tensor3& eps_u, const Tensor3& eps_c, double s_cfg) {
  require_same_shape(eps_u, eps_c, "cfg_combine");
  Tensor3 out(eps_u.height(), eps_u.width(), eps_u.channels());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = eps_u[i] + s_cfg * (eps_c[i] - eps_u[i]);
  }
  return out;
}

Tensor3 scheduler_step(const Tensor3& eps_hat, int t, const Tensor3& z, const NoiseSchedule& sched) {
  require_same_shape(eps_hat, z, "scheduler_step");
  const int idx = sched.index_of(t);
  const double ab = sched.alpha_bar_at(t);
  const double sa = std::sqrt(ab);
  const double sb = std::sqrt(1.0 - ab);
  Tensor3 x0(z.height(), z.width(), z.channels());
  for (std::size_t i = 0; i < x0.size(); ++i) {
    x0[i] = (z[i] - sb * eps_hat[i]) / sa;
  }
  if (idx == sched.N - 1) {
    return x0;
  }
  return add_noise(x0, eps_hat, sched.timesteps[static_cast<std::size_t>(idx) + 1], sched);
}

RoiMask resize_mask_nearest(const RoiMask& mask, int target_h, int target_w) {
  if (target_h <= 0 || target_w <= 0) {
    throw std::invalid_argument("resize_mask_nearest: target dimensions must be positive");
  }
  RoiMask out(target_h, target_w);
  for (int y = 0; y < target_h; ++y) {
    const int sy = static_cast<int>(static_cast<long long>(y) * mask.height() / target_h);
    for (int x = 0; x < target_w; ++x) {
      const int sx = static_cast<int>(static_cast<long long>(x) * mask.width() / target_w);
      out.set(y, x, mask(sy, sx));
    }
  }
  return out;
}

}  // namespace colorguide::diffusion
