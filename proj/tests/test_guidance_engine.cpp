#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "colorguide/colorspace.hpp"
#include "colorguide/config.hpp"
#include "colorguide/guidance_engine.hpp"

namespace eng = colorguide::engine;
namespace dif = colorguide::diffusion;
namespace cs = colorguide::colorspace;
using colorguide::ColorTriple;
using colorguide::Encoding;
using colorguide::PixelImage;
using colorguide::Rect;
using colorguide::RoiMask;
using colorguide::Tensor3;

namespace {

eng::GuidanceConfig small_config() {
  eng::GuidanceConfig cfg = colorguide::config::preset("cvar-lrgb");
  cfg.height = 16;
  cfg.width = 16;
  cfg.roi = {4, 4, 8, 8};
  cfg.N = 20;
  cfg.snapshot_every = 0;
  return cfg;
}

Tensor3 normal_tensor(int h, int w, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Tensor3 t(h, w, 3);
  for (double& v : t.values()) {
    v = n(rng);
  }
  return t;
}

}  // namespace

TEST(Canvas, CenterQuarter) {
  const auto [img, mask] = eng::build_canvas(ColorTriple::srgb(1, 1, 1), {2, 2, 4, 4}, 8, 8);
  EXPECT_EQ(mask.count(), 16u);
  for (std::size_t p = 0; p < img.pixels(); ++p) {
    const double expect = mask[p] ? 0.0 : 1.0;
    for (int c = 0; c < 3; ++c) {
      EXPECT_EQ(img.pixel(p)[c], expect);
    }
  }
}

TEST(Canvas, FullImageRoi) {
  const auto [img, mask] = eng::build_canvas(ColorTriple::srgb(0.3, 0.6, 0.9), {0, 0, 5, 3}, 3, 5);
  EXPECT_EQ(mask, RoiMask(3, 5, true));
  EXPECT_EQ(img, PixelImage(3, 5, Encoding::Srgb, 0.0));
}

TEST(Anchor, MaskEndpoints) {
  const auto s = dif::build_schedule(10);
  std::mt19937_64 rng(1);
  const Tensor3 z = normal_tensor(4, 4, rng);
  const Tensor3 z0 = normal_tensor(4, 4, rng);
  const Tensor3 e = normal_tensor(4, 4, rng);
  EXPECT_EQ(eng::background_anchor(z, z0, e, 300, RoiMask(4, 4, true), s), z);
  EXPECT_EQ(eng::background_anchor(z, z0, e, 300, RoiMask(4, 4, false), s), dif::add_noise(z0, e, 300, s));
}

TEST(RoiMeans, ConstantSinglePixelAndMidpoint) {
  const ColorTriple c = ColorTriple::srgb(0.2, 0.4, 0.6);
  const auto [lab, rgb] = eng::roi_means(PixelImage::filled(4, 4, c), RoiMask(4, 4, true));
  const ColorTriple lab_c = cs::to_lab(c);
  for (int k = 0; k < 3; ++k) {
    EXPECT_NEAR(rgb[k], c[k], 1e-6);
    EXPECT_NEAR(lab[k], lab_c[k], 1e-6);
  }

  PixelImage img = PixelImage::filled(4, 4, c);
  img.set_color(5, ColorTriple::srgb(0.9, 0.1, 0.5));
  RoiMask one(4, 4);
  one.set(5, true);
  EXPECT_NEAR(eng::roi_means(img, one).second[0], 0.9, 1e-6);

  PixelImage half(1, 2, Encoding::Srgb);
  half.set_color(0, ColorTriple::srgb(0.2, 0.2, 0.2));
  half.set_color(1, ColorTriple::srgb(0.6, 0.8, 1.0));
  const auto mid = eng::roi_means(half, RoiMask(1, 2, true)).second;
  EXPECT_NEAR(mid[0], 0.4, 1e-6);
  EXPECT_NEAR(mid[1], 0.5, 1e-6);
  EXPECT_NEAR(mid[2], 0.6, 1e-6);
}

TEST(GuidanceLoss, MasterWeightZeroGivesZero) {
  eng::GuidanceConfig cfg = small_config();
  cfg.lambda_master = 0.0;
  const auto sched = dif::build_schedule(cfg.N);
  const auto ctx = eng::make_schedule_context(cfg, sched);
  const dif::LatentCodec codec;
  std::mt19937_64 rng(2);
  const Tensor3 z = normal_tensor(16, 16, rng);
  const RoiMask mask = RoiMask::from_rect(16, 16, cfg.roi);
  const auto gl = eng::compute_guidance_loss(z, 5, sched.timesteps[5], cfg, ctx, codec,
                                             eng::make_targets(cfg.target_srgb), mask);
  EXPECT_EQ(gl.L, 0.0);
  Tensor3 moved = z;
  EXPECT_FALSE(eng::nudge_latent(moved, gl.L, normal_tensor(16, 16, rng), cfg.eta, mask).nudged);
  EXPECT_EQ(moved, z);
}

TEST(GuidanceLoss, LinearOnlyAtFirstStepComposes) {
  eng::GuidanceConfig cfg = small_config();
  cfg.enable_cvar = false;
  const auto sched = dif::build_schedule(cfg.N);
  const auto ctx = eng::make_schedule_context(cfg, sched);
  const dif::LatentCodec codec;
  std::mt19937_64 rng(3);
  const Tensor3 z = normal_tensor(16, 16, rng);
  const RoiMask mask = RoiMask::from_rect(16, 16, cfg.roi);
  const auto targets = eng::make_targets(cfg.target_srgb);
  const auto gl = eng::compute_guidance_loss(z, 0, sched.timesteps[0], cfg, ctx, codec, targets, mask);
  const double alg1 = colorguide::loss::linear_rgb_enforcer_loss(cs::srgb_to_linear(codec.decode(z)), mask,
                                                                  cs::to_linear(cfg.target_srgb));
  EXPECT_GT(alg1, 0.0);
  EXPECT_DOUBLE_EQ(gl.L, 0.07 * 100.0 * 1.0 * alg1);
  EXPECT_EQ(gl.L_cvar, 0.0);
}

TEST(GuidanceLoss, GradientMatchesFiniteDifferences) {
  eng::GuidanceConfig cfg = small_config();
  cfg.height = cfg.width = 6;
  cfg.roi = {1, 1, 4, 4};
  const auto sched = dif::build_schedule(cfg.N);
  const auto ctx = eng::make_schedule_context(cfg, sched);
  const dif::LatentCodec codec;
  const RoiMask mask = RoiMask::from_rect(6, 6, cfg.roi);
  const auto targets = eng::make_targets(cfg.target_srgb);
  // latent of an interior image keeps every pixel clear of the clamp
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.15, 0.85);
  PixelImage x(6, 6, Encoding::Srgb);
  for (double& v : x.tensor().values()) {
    v = u(rng);
  }
  Tensor3 z = codec.encode(x);
  const int i = 12;
  const int t = sched.timesteps[i];
  const Tensor3 g = eng::compute_guidance_gradient(z, i, t, cfg, ctx, codec, targets, mask);
  constexpr double h = 1e-7;
  double worst = 0.0;
  for (std::size_t e = 0; e < z.size(); ++e) {
    const double keep = z[e];
    z[e] = keep + h;
    const double up = eng::compute_guidance_loss(z, i, t, cfg, ctx, codec, targets, mask).L;
    z[e] = keep - h;
    const double dn = eng::compute_guidance_loss(z, i, t, cfg, ctx, codec, targets, mask).L;
    z[e] = keep;
    const double fd = (up - dn) / (2 * h);
    worst = std::max(worst, std::abs(fd - g[e]) / std::max({std::abs(fd), std::abs(g[e]), 1e-2}));
  }
  EXPECT_LT(worst, 1e-3);
}

TEST(Nudge, ZeroGradientSkips) {
  std::mt19937_64 rng(5);
  Tensor3 z = normal_tensor(4, 4, rng);
  const Tensor3 keep = z;
  const auto out = eng::nudge_latent(z, 1.0, Tensor3(4, 4, 3), 0.009, RoiMask(4, 4, true));
  EXPECT_FALSE(out.nudged);
  EXPECT_EQ(z, keep);
}

TEST(Nudge, NonPositiveOrNonFiniteLossSkips) {
  std::mt19937_64 rng(6);
  Tensor3 z = normal_tensor(4, 4, rng);
  const Tensor3 keep = z;
  const Tensor3 g(4, 4, 3, 1.0);
  for (double L : {0.0, -1.0, std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::infinity()}) {
    EXPECT_FALSE(eng::nudge_latent(z, L, g, 0.009, RoiMask(4, 4, true)).nudged);
    EXPECT_EQ(z, keep);
  }
}

TEST(Nudge, AllOnesGradientStepsByEtaOverRootDim) {
  Tensor3 z(4, 4, 3, 0.5);
  const Tensor3 g(4, 4, 3, 1.0);
  const auto out = eng::nudge_latent(z, 1.0, g, 0.009, RoiMask(4, 4, true), 0.0);
  EXPECT_TRUE(out.nudged);
  EXPECT_DOUBLE_EQ(out.grad_norm, std::sqrt(48.0));
  for (double v : z.values()) {
    EXPECT_NEAR(v, 0.5 - 0.009 / std::sqrt(48.0), 1e-15);
  }
}

TEST(Nudge, ClipsBeforeNormalising) {
  Tensor3 z(1, 1, 3, 0.0);
  Tensor3 g(1, 1, 3);
  g[0] = 50.0;
  g[1] = -3.0;
  const auto out = eng::nudge_latent(z, 1.0, g, 1.0, RoiMask(1, 1, true), 0.0);
  EXPECT_DOUBLE_EQ(out.grad_norm, std::sqrt(2.0));
  EXPECT_NEAR(z[0], -1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(z[1], 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_EQ(z[2], 0.0);
}

TEST(Nudge, OutsideMaskBitwiseUnchanged) {
  std::mt19937_64 rng(7);
  Tensor3 z = normal_tensor(6, 6, rng);
  const Tensor3 keep = z;
  const RoiMask mask = RoiMask::from_rect(6, 6, {2, 1, 3, 3});
  EXPECT_TRUE(eng::nudge_latent(z, 2.0, normal_tensor(6, 6, rng), 0.5, mask).nudged);
  for (std::size_t p = 0; p < z.pixels(); ++p) {
    for (int c = 0; c < 3; ++c) {
      if (!mask[p]) {
        EXPECT_EQ(z.pixel(p)[c], keep.pixel(p)[c]);
      } else {
        EXPECT_NE(z.pixel(p)[c], keep.pixel(p)[c]);
      }
    }
  }
}

TEST(Nudge, RepairsNonFiniteEntries) {
  Tensor3 z(2, 2, 3, 0.25);
  z[4] = std::numeric_limits<double>::infinity();
  const auto out = eng::nudge_latent(z, 1.0, Tensor3(2, 2, 3, 1.0), 0.01, RoiMask(2, 2, true));
  EXPECT_TRUE(out.nan_repaired);
  EXPECT_TRUE(z.all_finite());
  EXPECT_EQ(z[4], 0.0);
}

TEST(Config, ValidateNamesOffendingKey) {
  auto expect_key = [](eng::GuidanceConfig cfg, const std::string& key) {
    try {
      cfg.validate();
      ADD_FAILURE() << "no throw for " << key;
    } catch (const std::invalid_argument& e) {
      EXPECT_NE(std::string(e.what()).find(key), std::string::npos) << e.what();
    }
  };
  eng::GuidanceConfig cfg;
  cfg.eta = -0.1;
  expect_key(cfg, "guidance.eta");
  cfg = {};
  cfg.f_start = 0.8;
  cfg.f_stop = 0.5;
  expect_key(cfg, "schedule.f_start");
  cfg = {};
  cfg.roi = {60, 0, 16, 16};
  expect_key(cfg, "roi");
  cfg = {};
  cfg.N = 0;
  expect_key(cfg, "schedule.steps");
}

TEST(Run, PresetLogsOneRecordPerStep) {
  const auto r = eng::run_guided_inpaint(colorguide::config::preset("cvar-lrgb"));
  ASSERT_EQ(r.log.records.size(), 80u);
  for (std::size_t i = 0; i < 80; ++i) {
    const auto& rec = r.log.records[i];
    EXPECT_EQ(rec.step, static_cast<int>(i));
    if (i < 16) {
      EXPECT_EQ(rec.L_total, 0.0);
      EXPECT_EQ(rec.grad_norm, 0.0);
      EXPECT_FALSE(rec.nudged);
    } else {
      EXPECT_TRUE(rec.nudged) << "step " << i;
    }
  }
  EXPECT_EQ(r.log.snapshots.size(), 9u);
  EXPECT_EQ(r.log.snapshots.back().first, 79);
  EXPECT_EQ(r.final_image.encoding(), Encoding::Srgb);
}

TEST(Run, TogglesOffMatchesBareSamplerWithAnchor) {
  eng::GuidanceConfig cfg = small_config();
  cfg.enable_lin_rgb = cfg.enable_cvar = false;
  cfg.seed = 11;
  const auto r = eng::run_guided_inpaint(cfg);

  const auto sched = dif::build_schedule(cfg.N);
  const dif::LatentCodec codec;
  const auto [canvas, mask] = eng::build_canvas(cfg.bg_srgb, cfg.roi, cfg.height, cfg.width);
  const Tensor3 z0 = codec.encode(canvas);
  std::mt19937_64 rng(cfg.seed);
  const Tensor3 eps = normal_tensor(cfg.height, cfg.width, rng);
  Tensor3 z = eps;
  for (int i = 0; i < cfg.N; ++i) {
    const int t = sched.timesteps[static_cast<std::size_t>(i)];
    const Tensor3 eu = dif::analytic_denoiser(z, t, dif::Branch::Unconditional, cfg.prior, codec, sched, mask);
    const Tensor3 ec = dif::analytic_denoiser(z, t, dif::Branch::Conditional, cfg.prior, codec, sched, mask);
    z = dif::scheduler_step(dif::cfg_combine(eu, ec, cfg.s_cfg), t, z, sched);
    if (i + 1 < cfg.N) {
      z = eng::background_anchor(z, z0, eps, sched.timesteps[static_cast<std::size_t>(i) + 1], mask, sched);
    } else {
      for (std::size_t p = 0; p < z.pixels(); ++p) {
        if (!mask[p]) {
          for (int c = 0; c < 3; ++c) {
            z.pixel(p)[c] = z0.pixel(p)[c];
          }
        }
      }
    }
  }
  EXPECT_EQ(r.final_latent, z);
}

TEST(Run, DeterministicForSameSeed) {
  const eng::GuidanceConfig cfg = small_config();
  const auto a = eng::run_guided_inpaint(cfg);
  const auto b = eng::run_guided_inpaint(cfg);
  EXPECT_EQ(a.final_latent, b.final_latent);
  eng::GuidanceConfig other = cfg;
  other.seed = 1;
  EXPECT_NE(eng::run_guided_inpaint(other).final_latent, a.final_latent);
}

TEST(Run, NudgeNeverTouchesBackgroundLatent) {
  const eng::GuidanceConfig cfg = small_config();
  const RoiMask mask = RoiMask::from_rect(cfg.height, cfg.width, cfg.roi);
  int nudges = 0;
  eng::RunOptions opts;
  opts.on_nudge = [&](int, const Tensor3& before, const Tensor3& after) {
    ++nudges;
    for (std::size_t p = 0; p < mask.pixels(); ++p) {
      if (!mask[p]) {
        for (int c = 0; c < 3; ++c) {
          ASSERT_EQ(before.pixel(p)[c], after.pixel(p)[c]);
        }
      }
    }
  };
  eng::run_guided_inpaint(cfg, opts);
  EXPECT_EQ(nudges, 16);
}

TEST(Run, InjectedNonPositiveLossSkipsAndRecordsZeros) {
  const eng::GuidanceConfig cfg = small_config();
  eng::RunOptions opts;
  opts.on_loss = [](int step, double& L) {
    if (step == 6) {
      L = -1.0;
    } else if (step == 7) {
      L = std::numeric_limits<double>::quiet_NaN();
    }
  };
  const auto r = eng::run_guided_inpaint(cfg, opts);
  for (int s : {6, 7}) {
    EXPECT_FALSE(r.log.records[static_cast<std::size_t>(s)].nudged);
    EXPECT_EQ(r.log.records[static_cast<std::size_t>(s)].L_total, 0.0);
  }
  EXPECT_TRUE(r.log.records[8].nudged);
  EXPECT_TRUE(r.final_latent.all_finite());
}

TEST(Run, InjectedZeroGradientSkips) {
  const eng::GuidanceConfig cfg = small_config();
  eng::RunOptions opts;
  opts.on_gradient = [](int step, Tensor3& g) {
    if (step == 10) {
      for (double& v : g.values()) {
        v = 0.0;
      }
    }
  };
  const auto r = eng::run_guided_inpaint(cfg, opts);
  EXPECT_FALSE(r.log.records[10].nudged);
  EXPECT_EQ(r.log.records[10].grad_norm, 0.0);
  EXPECT_GT(r.log.records[10].L_total, 0.0);
  EXPECT_TRUE(r.final_latent.all_finite());
}

TEST(Run, InjectedNonFiniteGradientIsRepaired) {
  const eng::GuidanceConfig cfg = small_config();
  const RoiMask mask = RoiMask::from_rect(cfg.height, cfg.width, cfg.roi);
  eng::RunOptions opts;
  opts.on_gradient = [&](int step, Tensor3& g) {
    if (step == 12) {
      g[0] = std::numeric_limits<double>::quiet_NaN();
    }
  };
  opts.on_nudge = [&](int step, const Tensor3& before, const Tensor3& after) {
    if (step != 12) {
      return;
    }
    EXPECT_TRUE(after.all_finite());
    for (std::size_t p = 0; p < mask.pixels(); ++p) {
      if (!mask[p]) {
        for (int c = 0; c < 3; ++c) {
          EXPECT_EQ(before.pixel(p)[c], after.pixel(p)[c]);
        }
      }
    }
  };
  const auto r = eng::run_guided_inpaint(cfg, opts);
  EXPECT_TRUE(r.log.records[12].nan_repaired);
  EXPECT_TRUE(r.final_latent.all_finite());
  EXPECT_EQ(r.log.records.size(), 20u);
}

TEST(Run, UnrepairedNonFiniteLatentAborts) {
  eng::GuidanceConfig cfg = small_config();
  cfg.inject_nonfinite_latent_step = 3;
  try {
    eng::run_guided_inpaint(cfg);
    FAIL() << "expected EngineAbort";
  } catch (const eng::EngineAbort& e) {
    EXPECT_EQ(e.step(), 3);
    EXPECT_NE(std::string(e.what()).find("step 3"), std::string::npos);
  }
}
