#include "colorguide/guidance_engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <random>

#include "colorguide/colorspace.hpp"

namespace colorguide::engine {
namespace {

void require(bool ok, const char* key, const char* msg) {
  if (!ok) {
    throw std::invalid_argument(std::string(key) + ": " + msg);
  }
}

bool in_unit(const ColorTriple& c) {
  return std::all_of(c.c.begin(), c.c.end(), [](double v) { return v >= 0.0 && v <= 1.0; });
}

Tensor3 gaussian(int h, int w, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Tensor3 out(h, w, 3);
  for (double& v : out.values()) {
    v = normal(rng);
  }
  return out;
}

}  // namespace

void GuidanceConfig::validate() const {
  require(eta >= 0.0 && std::isfinite(eta), "guidance.eta", "must be non-negative");
  require(lambda_master >= 0.0 && std::isfinite(lambda_master), "guidance.lambda_master", "must be non-negative");
  require(lambda_lin >= 0.0 && std::isfinite(lambda_lin), "guidance.lambda_lin", "must be non-negative");
  require(std::isfinite(s_cfg), "guidance.s_cfg", "must be finite");
  require(N >= 1, "schedule.steps", "must be at least 1");
  require(T_train >= 1, "schedule.T_train", "must be positive");
  require(N <= T_train, "schedule.steps", "must not exceed schedule.T_train");
  require(beta_start > 0.0 && beta_start < beta_end && beta_end < 1.0, "schedule.beta_start",
          "need 0 < beta_start < beta_end < 1");
  require(f_start >= 0.0 && f_start <= 1.0, "schedule.f_start", "must lie in [0,1]");
  require(f_stop >= 0.0 && f_stop <= 1.0, "schedule.f_stop", "must lie in [0,1]");
  require(f_start <= f_stop, "schedule.f_start", "must not exceed schedule.f_stop");
  require(s >= 0.0 && s < 1.0, "schedule.s", "must lie in [0,1)");
  require(k != 0.0 && std::isfinite(k), "schedule.k", "must be finite and nonzero");
  require(target_srgb.encoding == Encoding::Srgb && in_unit(target_srgb), "target.srgb",
          "must be an sRGB color in [0,1]");
  require(bg_srgb.encoding == Encoding::Srgb && in_unit(bg_srgb), "bg.srgb", "must be an sRGB color in [0,1]");
  require(height > 0, "canvas.height", "must be positive");
  require(width > 0, "canvas.width", "must be positive");
  require(roi.w > 0, "roi.w", "must be positive");
  require(roi.h > 0, "roi.h", "must be positive");
  require(roi.x >= 0 && roi.x + roi.w <= width, "roi.x", "rectangle exceeds the canvas width");
  require(roi.y >= 0 && roi.y + roi.h <= height, "roi.y", "rectangle exceeds the canvas height");
  require(snapshot_every >= 0, "run.snapshot_every", "must be non-negative");
  require(nudge_eps > 0.0, "numerics.nudge_eps", "must be positive");
  require(monitor_eps >= 0.0, "numerics.monitor_eps", "must be non-negative");
  require(alpha_vae > 0.0 && std::isfinite(alpha_vae), "codec.alpha_vae", "must be positive");
  loss_hp.validate();
  prior.validate();
}

schedule::ScheduleContext make_schedule_context(const GuidanceConfig& cfg, const diffusion::NoiseSchedule& sched) {
  schedule::ScheduleContext ctx;
  ctx.T = sched.timesteps.front();
  ctx.t_min = sched.timesteps.back();
  if (!(ctx.T > ctx.t_min)) {
    ctx.T = sched.T_train;
  }
  ctx.T0 = sched.timesteps.front();
  ctx.s = cfg.s;
  ctx.N = cfg.N;
  ctx.f_start = cfg.f_start;
  ctx.f_stop = cfg.f_stop;
  ctx.k = cfg.k;
  return ctx;
}

std::pair<PixelImage, RoiMask> build_canvas(const ColorTriple& bg, const Rect& roi, int height, int width) {
  require_encoding(bg, Encoding::Srgb, "build_canvas");
  RoiMask mask = RoiMask::from_rect(height, width, roi);
  PixelImage img = PixelImage::filled(height, width, bg);
  for (std::size_t p = 0; p < img.pixels(); ++p) {
    if (mask[p]) {
      img.set_color(p, ColorTriple::srgb(0.0, 0.0, 0.0));
    }
  }
  return {std::move(img), std::move(mask)};
}

Tensor3 background_anchor(const Tensor3& z, const Tensor3& z0, const Tensor3& eps, int t,
                          const RoiMask& mask_latent, const diffusion::NoiseSchedule& sched) {
  if (!z.same_shape(z0) || !mask_latent.matches(z)) {
    throw std::invalid_argument("background_anchor: shapes differ");
  }
  const Tensor3 z_bg = diffusion::add_noise(z0, eps, t, sched);
  Tensor3 out = z;
  for (std::size_t p = 0; p < z.pixels(); ++p) {
    if (!mask_latent[p]) {
      auto o = out.pixel(p);
      const auto b = z_bg.pixel(p);
      std::copy(b.begin(), b.end(), o.begin());
    }
  }
  return out;
}

std::pair<ColorTriple, ColorTriple> roi_means(const PixelImage& srgb, const RoiMask& mask, double eps) {
  require_encoding(srgb, Encoding::Srgb, "roi_means");
  if (!mask.matches(srgb)) {
    throw std::invalid_argument("roi_means: mask and image shapes differ");
  }
  const std::size_t n = mask.count();
  if (n == 0) {
    throw std::invalid_argument("roi_means: empty mask");
  }
  const PixelImage lab = colorspace::srgb_to_lab(srgb);
  Vec3 sl{0.0, 0.0, 0.0};
  Vec3 sr{0.0, 0.0, 0.0};
  for (std::size_t p = 0; p < srgb.pixels(); ++p) {
    if (mask[p]) {
      for (int c = 0; c < 3; ++c) {
        sl[c] += lab.pixel(p)[c];
        sr[c] += srgb.pixel(p)[c];
      }
    }
  }
  const double d = static_cast<double>(n) + eps;
  return {ColorTriple::lab(sl[0] / d, sl[1] / d, sl[2] / d), ColorTriple::srgb(sr[0] / d, sr[1] / d, sr[2] / d)};
}

GuidanceTargets make_targets(const ColorTriple& target_srgb) {
  return {colorspace::to_linear(target_srgb), colorspace::to_lab(target_srgb)};
}

GuidanceLoss compute_guidance_loss(const Tensor3& z, int i, int t, const GuidanceConfig& cfg,
                                   const schedule::ScheduleContext& ctx, const diffusion::LatentCodec& codec,
                                   const GuidanceTargets& targets, const RoiMask& mask) {
  const PixelImage x = codec.decode(z);
  GuidanceLoss out;
  out.gate = schedule::late_start_gate(schedule::progress(t, ctx), ctx.s);
  if (cfg.enable_lin_rgb) {
    const double base = loss::linear_rgb_enforcer_loss(colorspace::srgb_to_linear(x), mask, targets.linear);
    out.L_lin = schedule::lin_decay_weight(i) * cfg.lambda_lin * base;
  }
  if (cfg.enable_cvar && ctx.k != 0.0) {
    const loss::TotalLoss tl = loss::total_loss(x, t, ctx, targets.lab, mask, cfg.loss_hp);
    out.terms = tl.terms;
    out.L_cvar = schedule::cvar_ramp_weight(t, ctx) * tl.value;
  }
  out.L = cfg.lambda_master * (out.L_lin + out.L_cvar);
  return out;
}

Tensor3 compute_guidance_gradient(const Tensor3& z, int i, int t, const GuidanceConfig& cfg,
                                  const schedule::ScheduleContext& ctx, const diffusion::LatentCodec& codec,
                                  const GuidanceTargets& targets, const RoiMask& mask) {
  const PixelImage raw = codec.decode_unclamped(z);
  const PixelImage x = colorspace::clamp_unit(raw);
  Tensor3 g_x(z.height(), z.width(), 3);
  if (cfg.enable_lin_rgb) {
    const PixelImage lin = colorspace::srgb_to_linear(x);
    const Tensor3 g_lin = loss::linear_rgb_enforcer_gradient(lin, mask, targets.linear);
    const Tensor3 g = colorspace::pull_back(colorspace::srgb_to_linear_jacobian(x), g_lin);
    const double w = schedule::lin_decay_weight(i) * cfg.lambda_lin;
    for (std::size_t e = 0; e < g_x.size(); ++e) {
      g_x[e] += w * g[e];
    }
  }
  if (cfg.enable_cvar && ctx.k != 0.0) {
    const double w = schedule::cvar_ramp_weight(t, ctx);
    if (w != 0.0) {
      const Tensor3 g = loss::total_loss_gradient(x, t, ctx, targets.lab, mask, cfg.loss_hp);
      for (std::size_t e = 0; e < g_x.size(); ++e) {
        g_x[e] += w * g[e];
      }
    }
  }
  const Tensor3 gate = colorspace::clamp_unit_gradient_gate(raw);
  const Mat3& d = codec.decode_matrix();
  Tensor3 g_z(z.height(), z.width(), 3);
  for (std::size_t p = 0; p < z.pixels(); ++p) {
    const auto gx = g_x.pixel(p);
    const auto gg = gate.pixel(p);
    const Vec3 v{cfg.lambda_master * gx[0] * gg[0], cfg.lambda_master * gx[1] * gg[1],
                 cfg.lambda_master * gx[2] * gg[2]};
    auto o = g_z.pixel(p);
    for (int c = 0; c < 3; ++c) {
      o[c] = d[0][c] * v[0] + d[1][c] * v[1] + d[2][c] * v[2];
    }
  }
  return g_z;
}

NudgeOutcome nudge_latent(Tensor3& z, double L, const Tensor3& grad, double eta, const RoiMask& mask_latent,
                          double eps) {
  NudgeOutcome out;
  if (!std::isfinite(L) || L <= 0.0) {
    return out;
  }
  if (!z.same_shape(grad) || !mask_latent.matches(z)) {
    throw std::invalid_argument("nudge_latent: shapes differ");
  }
  Tensor3 g = grad;
  double sq = 0.0;
  for (double& v : g.values()) {
    v = std::clamp(v, -1.0, 1.0);
    sq += v * v;
  }
  const double a = std::sqrt(sq);
  out.grad_norm = a;
  if (a <= 0.0) {
    return out;
  }
  const double scale = eta / (a + eps);
  for (std::size_t p = 0; p < z.pixels(); ++p) {
    if (!mask_latent[p]) {
      continue;
    }
    auto zp = z.pixel(p);
    const auto gp = g.pixel(p);
    for (int c = 0; c < 3; ++c) {
      zp[c] -= scale * gp[c];
    }
  }
  out.nudged = true;
  for (double& v : z.values()) {
    if (!std::isfinite(v)) {
      v = 0.0;
      out.nan_repaired = true;
    }
  }
  return out;
}

RunResult run_guided_inpaint(const GuidanceConfig& cfg, const RunOptions& options) {
  cfg.validate();
  const auto started = std::chrono::steady_clock::now();

  const diffusion::NoiseSchedule sched = diffusion::build_schedule(cfg.N, cfg.T_train, cfg.beta_start, cfg.beta_end);
  const schedule::ScheduleContext ctx = make_schedule_context(cfg, sched);
  const diffusion::LatentCodec codec(diffusion::kDefaultMix, {-0.5, -0.5, -0.5}, cfg.alpha_vae);
  const GuidanceTargets targets = make_targets(cfg.target_srgb);

  const auto [canvas, mask] = build_canvas(cfg.bg_srgb, cfg.roi, cfg.height, cfg.width);
  const Tensor3 z0 = codec.encode(canvas);
  const RoiMask mask_latent = diffusion::resize_mask_nearest(mask, z0.height(), z0.width());

  std::mt19937_64 rng(cfg.seed);
  const Tensor3 eps = gaussian(z0.height(), z0.width(), rng);
  Tensor3 z = eps;
  for (double& v : z.values()) {
    v *= sched.init_noise_sigma;
  }
  const bool guidance_on = cfg.enable_lin_rgb || cfg.enable_cvar;

  RunResult result;
  result.log.records.reserve(static_cast<std::size_t>(cfg.N));
  for (int i = 0; i < cfg.N; ++i) {
    const int t = sched.timesteps[static_cast<std::size_t>(i)];
    StepRecord rec;
    rec.step = i;
    rec.timestep = t;

    // (1) CFG denoise + scheduler step
    const Tensor3 eps_u =
        diffusion::analytic_denoiser(z, t, diffusion::Branch::Unconditional, cfg.prior, codec, sched, mask_latent);
    const Tensor3 eps_c =
        diffusion::analytic_denoiser(z, t, diffusion::Branch::Conditional, cfg.prior, codec, sched, mask_latent);
    z = diffusion::scheduler_step(diffusion::cfg_combine(eps_u, eps_c, cfg.s_cfg), t, z, sched);
    const bool last = i == cfg.N - 1;

    if (cfg.enable_bg_anchor) {
      if (last) {
        for (std::size_t p = 0; p < z.pixels(); ++p) {
          if (!mask_latent[p]) {
            std::copy(z0.pixel(p).begin(), z0.pixel(p).end(), z.pixel(p).begin());
          }
        }
      } else {
        const Tensor3 anchor_eps = cfg.anchor_resample_noise ? gaussian(z0.height(), z0.width(), rng) : eps;
        z = background_anchor(z, z0, anchor_eps, sched.timesteps[static_cast<std::size_t>(i) + 1], mask_latent,
                              sched);
      }
    }

    // (3) ROI means for monitoring
    const PixelImage x = codec.decode(z);
    std::tie(rec.roi_lab, rec.roi_srgb) = roi_means(x, mask, cfg.monitor_eps);

    // (2) gate, (4) losses, (5) nudge
    if (guidance_on && schedule::guidance_window(i, ctx)) {
      GuidanceLoss gl = compute_guidance_loss(z, i, t, cfg, ctx, codec, targets, mask);
      if (options.on_loss) {
        options.on_loss(i, gl.L);
      }
      if (std::isfinite(gl.L) && gl.L > 0.0) {
        rec.L_total = gl.L;
        rec.L_lin = gl.L_lin;
        rec.L_cvar = gl.L_cvar;
        rec.gate = gl.gate;
        Tensor3 grad = compute_guidance_gradient(z, i, t, cfg, ctx, codec, targets, mask);
        if (options.on_gradient) {
          options.on_gradient(i, grad);
        }
        const Tensor3 before = options.on_nudge ? z : Tensor3{};
        const NudgeOutcome nudge = nudge_latent(z, gl.L, grad, cfg.eta, mask_latent, cfg.nudge_eps);
        if (options.on_nudge) {
          options.on_nudge(i, before, z);
        }
        rec.grad_norm = nudge.grad_norm;
        rec.nudged = nudge.nudged;
        rec.nan_repaired = nudge.nan_repaired;
      }
    }

    if (i == cfg.inject_nonfinite_latent_step) {
      z[0] = std::numeric_limits<double>::quiet_NaN();
    }
    if (!z.all_finite()) {
      throw EngineAbort(i, "latent contains non-finite values after repair");
    }
    if (cfg.snapshot_every > 0 && (i % cfg.snapshot_every == 0 || last)) {
      result.log.snapshots.emplace_back(i, codec.decode(z));
    }
    result.log.records.push_back(rec);
  }

  result.final_image = codec.decode(z);
  result.final_latent = std::move(z);
  result.log.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

}  // namespace colorguide::engine
