#pragma once

// Guided inpainting loop: CFG denoise, background anchor, guidance window,
// loss evaluation with decay schedules, clipped and normalised ROI-only latent
// nudging, NaN repair and per-step logging.

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "colorguide/roi_loss.hpp"
#include "colorguide/schedule.hpp"
#include "colorguide/toy_diffusion.hpp"
#include "colorguide/types.hpp"

namespace colorguide::engine {

struct GuidanceConfig {
  double eta = 0.009;
  double lambda_master = 0.07;
  double lambda_lin = 100.0;
  double s_cfg = 8.0;
  int N = 80;
  double f_start = 0.2;
  double f_stop = 1.0;
  double s = 0.2;  // late-start threshold of the gate
  double k = 2.0;  // cvar ramp divisor
  bool enable_lin_rgb = true;
  bool enable_cvar = true;
  bool enable_bg_anchor = true;
  bool anchor_resample_noise = false;
  ColorTriple target_srgb = ColorTriple::srgb(1.0, 0.53, 0.60);
  ColorTriple bg_srgb = ColorTriple::srgb(1.0, 1.0, 1.0);
  int height = 64;
  int width = 64;
  Rect roi{24, 24, 16, 16};
  std::uint64_t seed = 0;
  int snapshot_every = 10;  // 0 disables snapshots
  double nudge_eps = 1e-8;
  double monitor_eps = 1e-8;
  loss::LossHyperparams loss_hp;
  diffusion::FlatColorPrior prior;
  double alpha_vae = diffusion::kAlphaVae;
  int T_train = 1000;
  double beta_start = 8.5e-4;
  double beta_end = 0.012;
  int inject_nonfinite_latent_step = -1;  // fault injection, -1 disables

  /// Throws std::invalid_argument naming the offending key.
  void validate() const;

  bool operator==(const GuidanceConfig&) const = default;
};

/// Context derived from the schedule: T = T0 = first timestep, t_min = last.
schedule::ScheduleContext make_schedule_context(const GuidanceConfig& cfg, const diffusion::NoiseSchedule& sched);

struct StepRecord {
  int step = 0;
  int timestep = 0;
  double L_total = 0.0;
  double L_lin = 0.0;
  double L_cvar = 0.0;
  double grad_norm = 0.0;
  double gate = 0.0;
  ColorTriple roi_lab = ColorTriple::lab(0, 0, 0);
  ColorTriple roi_srgb = ColorTriple::srgb(0, 0, 0);
  bool nudged = false;
  bool nan_repaired = false;
};

struct RunLog {
  std::vector<StepRecord> records;
  std::vector<std::pair<int, PixelImage>> snapshots;
  double runtime_seconds = 0.0;
};

struct RunResult {
  PixelImage final_image;
  Tensor3 final_latent;
  RunLog log;
};

class EngineAbort : public std::runtime_error {
 public:
  EngineAbort(int step, const std::string& what)
      : std::runtime_error("step " + std::to_string(step) + ": " + what), step_(step) {}
  int step() const { return step_; }

 private:
  int step_;
};

/// Test hooks. Each is called only on guided steps.
struct RunOptions {
  std::function<void(int step, double& loss)> on_loss;
  std::function<void(int step, Tensor3& grad)> on_gradient;
  std::function<void(int step, const Tensor3& before, const Tensor3& after)> on_nudge;
};

/// Constant background image with ROI pixels zeroed, plus the ROI mask.
std::pair<PixelImage, RoiMask> build_canvas(const ColorTriple& bg, const Rect& roi, int height, int width);

/// (1 - M) * add_noise(z0, eps, t) + M * z.
Tensor3 background_anchor(const Tensor3& z, const Tensor3& z0, const Tensor3& eps, int t,
                          const RoiMask& mask_latent, const diffusion::NoiseSchedule& sched);

/// Masked means sum(v * M) / (n + eps) of the Lab and sRGB versions of x.
std::pair<ColorTriple, ColorTriple> roi_means(const PixelImage& srgb, const RoiMask& mask, double eps = 1e-8);

struct GuidanceTargets {
  ColorTriple linear;
  ColorTriple lab;
};
GuidanceTargets make_targets(const ColorTriple& target_srgb);

struct GuidanceLoss {
  double L = 0.0;
  double L_lin = 0.0;
  double L_cvar = 0.0;
  double gate = 0.0;
  loss::LossTerms terms;
};

/// L = lambda_master (w_lin(i) lambda_lin Alg1 + w_cvar(t) Alg5) on the
/// decoded, clamped latent.
GuidanceLoss compute_guidance_loss(const Tensor3& z, int i, int t, const GuidanceConfig& cfg,
                                   const schedule::ScheduleContext& ctx, const diffusion::LatentCodec& codec,
                                   const GuidanceTargets& targets, const RoiMask& mask);

/// dL/dz through decode, clamp, colorspace and loss.
Tensor3 compute_guidance_gradient(const Tensor3& z, int i, int t, const GuidanceConfig& cfg,
                                  const schedule::ScheduleContext& ctx, const diffusion::LatentCodec& codec,
                                  const GuidanceTargets& targets, const RoiMask& mask);

struct NudgeOutcome {
  bool nudged = false;
  bool nan_repaired = false;
  double grad_norm = 0.0;  // norm of the clipped gradient
};

/// Clip to [-1,1], normalise by the 2-norm, step by eta on mask entries only,
/// then replace non-finite entries with 0. Skips when L is not finite or
/// L <= 0, or when the clipped norm is not positive.
NudgeOutcome nudge_latent(Tensor3& z, double L, const Tensor3& grad, double eta, const RoiMask& mask_latent,
                          double eps = 1e-8);

RunResult run_guided_inpaint(const GuidanceConfig& cfg, const RunOptions& options = {});

}  // namespace colorguide::engine
