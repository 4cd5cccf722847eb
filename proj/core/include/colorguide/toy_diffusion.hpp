#pragma once

// Analytic diffusion backend: linear-beta noise schedule, deterministic DDIM
// reverse step, classifier-free guidance, an invertible linear latent codec
// and a closed-form denoiser for a flat-color-plus-texture Gaussian prior.
//
// Latents share the pixel grid (spatial factor 1) and carry 3 channels.

#include <vector>

#include "colorguide/mat3.hpp"
#include "colorguide/types.hpp"

namespace colorguide::diffusion {

struct NoiseSchedule {
  int N = 0;
  int T_train = 0;
  std::vector<int> timesteps;     // descending, length N
  std::vector<double> alpha_bar;  // indexed by training timestep
  double init_noise_sigma = 1.0;

  double alpha_bar_at(int t) const;
  /// Position of t in `timesteps`; throws when t is not scheduled.
  int index_of(int t) const;
  bool is_last(int t) const { return index_of(t) == N - 1; }
  /// Scheduled successor of t; only valid when t is not last.
  int next(int t) const { return timesteps[static_cast<std::size_t>(index_of(t)) + 1]; }
};

/// t_i = floor((N - 1 - i) * T_train / N) for i = 0..N-1.
NoiseSchedule build_schedule(int N, int T_train = 1000, double beta_start = 8.5e-4, double beta_end = 0.012);

/// sqrt(ab_t) x0 + sqrt(1 - ab_t) eps.
Tensor3 add_noise(const Tensor3& x0, const Tensor3& eps, int t, const NoiseSchedule& sched);

struct FlatColorPrior {
  ColorTriple mu_cond = ColorTriple::linear(0.60, 0.17, 0.38);
  double sigma_cond = 0.02;
  ColorTriple mu_uncond = ColorTriple::linear(0.5, 0.5, 0.5);
  double sigma_uncond = 0.25;
  double sigma_texture = 0.05;

  void validate() const;

  bool operator==(const FlatColorPrior&) const = default;
};

inline constexpr double kAlphaVae = 0.18215;

/// Default channel mixing matrix of the codec.
inline constexpr Mat3 kDefaultMix{{{0.55, 0.60, 0.45}, {0.70, -0.15, -0.55}, {0.25, -0.75, 0.55}}};

/// z = alpha_vae * mix * (x + offset) per pixel; decode inverts and clamps.
class LatentCodec {
 public:
  /// Rejects singular mixes and condition numbers of 100 or more.
  explicit LatentCodec(const Mat3& mix = kDefaultMix, const Vec3& offset = {-0.5, -0.5, -0.5},
                       double alpha_vae = kAlphaVae);

  const Mat3& mix() const { return mix_; }
  const Vec3& offset() const { return offset_; }
  double alpha_vae() const { return alpha_vae_; }

  /// Constant per-pixel encode Jacobian alpha_vae * mix.
  const Mat3& encode_matrix() const { return forward_; }
  /// Constant per-pixel decode Jacobian (before the clamp).
  const Mat3& decode_matrix() const { return inverse_; }

  Tensor3 encode(const PixelImage& srgb) const;
  Vec3 encode_color(const Vec3& srgb) const;
  PixelImage decode_unclamped(const Tensor3& z) const;
  PixelImage decode(const Tensor3& z) const;

 private:
  Mat3 mix_;
  Vec3 offset_;
  double alpha_vae_;
  Mat3 forward_;
  Mat3 inverse_;
};

enum class Branch { Unconditional, Conditional };

/// Posterior mean E[x0_latent | z_t] under the flat-color prior. Pixels of the
/// latent mask and of its complement are treated as two independent images,
/// each with its own shared color; an all-zero or all-one mask gives a single
/// region.
Tensor3 posterior_mean(const Tensor3& z, int t, Branch branch, const FlatColorPrior& prior, const LatentCodec& codec,
                       const NoiseSchedule& sched, const RoiMask& regions);

/// Exact epsilon prediction (z - sqrt(ab) E[x0|z]) / sqrt(1 - ab).
Tensor3 analytic_denoiser(const Tensor3& z, int t, Branch branch, const FlatColorPrior& prior,
                          const LatentCodec& codec, const NoiseSchedule& sched, const RoiMask& regions);

/// Single-region form over the whole latent.
Tensor3 analytic_denoiser(const Tensor3& z, int t, Branch branch, const FlatColorPrior& prior,
                          const LatentCodec& codec, const NoiseSchedule& sched);

/// eps_u + s (eps_c - eps_u).
Tensor3 cfg_combine(const Tensor3& eps_u, const Tensor3& eps_c, double s_cfg);

/// Deterministic DDIM step (eta = 0). Returns x0_hat at the last timestep.
Tensor3 scheduler_step(const Tensor3& eps_hat, int t, const Tensor3& z, const NoiseSchedule& sched);

/// Nearest-neighbour resize: source index floor(i * src / dst).
RoiMask resize_mask_nearest(const RoiMask& mask, int target_h, int target_w);

}  // namespace colorguide::diffusion
