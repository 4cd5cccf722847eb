#include "colorguide/selftest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>

#include "colorguide/colorspace.hpp"
#include "colorguide/roi_loss.hpp"
#include "colorguide/schedule.hpp"
#include "colorguide/toy_diffusion.hpp"

namespace colorguide::selftest {
namespace {

std::string describe(const char* fmt, double a, double b = 0.0) {
  char buf[160];
  std::snprintf(buf, sizeof buf, fmt, a, b);
  return buf;
}

PixelImage random_image(int h, int w, Encoding enc, double lo, double hi, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(lo, hi);
  PixelImage img(h, w, enc);
  for (double& v : img.tensor().values()) {
    v = u(rng);
  }
  return img;
}

CheckResult lab_anchor(const char* name, const ColorTriple& srgb, const Vec3& expect, double tol,
                       const colorspace::WhitePoint& white) {
  const ColorTriple lab = colorspace::to_lab(srgb, white);
  double worst = 0.0;
  for (int c = 0; c < 3; ++c) {
    worst = std::max(worst, std::abs(lab[c] - expect[c]));
  }
  return {name, worst <= tol, describe("max |dLab| = %.3g (tol %.3g)", worst, tol)};
}

CheckResult srgb_round_trip() {
  double worst = 0.0;
  for (int i = 0; i < 256; ++i) {
    const double x = i / 255.0;
    worst = std::max(worst, std::abs(colorspace::linear_to_srgb(colorspace::srgb_to_linear(x)) - x));
  }
  return {"srgb_round_trip", worst < 1e-6, describe("max error %.3g", worst)};
}

CheckResult codec_round_trip(std::mt19937_64& rng) {
  const diffusion::LatentCodec codec;
  const PixelImage x = random_image(8, 8, Encoding::Srgb, 0.0, 1.0, rng);
  const PixelImage y = codec.decode_unclamped(codec.encode(x));
  double worst = 0.0;
  for (std::size_t i = 0; i < x.tensor().size(); ++i) {
    worst = std::max(worst, std::abs(x.tensor()[i] - y.tensor()[i]));
  }
  return {"codec_round_trip", worst < 1e-9, describe("max error %.3g", worst)};
}

CheckResult lab_jacobian(std::mt19937_64& rng) {
  const PixelImage img = random_image(10, 10, Encoding::Srgb, 0.06, 0.94, rng);
  const auto jac = colorspace::srgb_to_lab_jacobian(img);
  constexpr double h = 1e-5;
  double worst = 0.0;
  for (std::size_t p = 0; p < img.pixels(); ++p) {
    if (jac.near_kink[p]) {
      continue;
    }
    for (int j = 0; j < 3; ++j) {
      ColorTriple hi = img.color_at(p);
      ColorTriple lo = hi;
      hi[static_cast<std::size_t>(j)] += h;
      lo[static_cast<std::size_t>(j)] -= h;
      const ColorTriple a = colorspace::to_lab(hi);
      const ColorTriple b = colorspace::to_lab(lo);
      for (int i = 0; i < 3; ++i) {
        const double fd = (a[i] - b[i]) / (2 * h);
        const double an = jac.per_pixel[p][i][j];
        const double scale = std::max({std::abs(fd), std::abs(an), 1e-3});
        worst = std::max(worst, std::abs(fd - an) / scale);
      }
    }
  }
  return {"lab_jacobian_fd", worst < 1e-4, describe("max relative error %.3g", worst)};
}

CheckResult composite_gradient(std::mt19937_64& rng) {
  const PixelImage img = random_image(8, 8, Encoding::Srgb, 0.1, 0.9, rng);
  const RoiMask mask = RoiMask::from_rect(8, 8, {1, 1, 6, 5});
  const ColorTriple target = colorspace::to_lab(ColorTriple::srgb(1.0, 0.53, 0.60));
  schedule::ScheduleContext ctx;
  ctx.T = 1000;
  ctx.t_min = 0;
  loss::LossHyperparams hp;
  hp.tau_mean = hp.tau_pix = hp.tau_tail = hp.tau_max = hp.tau_var = 0.5;
  const double t = 250.0;
  const Tensor3 g = loss::total_loss_gradient(img, t, ctx, target, mask, hp);
  constexpr double h = 1e-6;
  double worst = 0.0;
  PixelImage probe = img;
  for (std::size_t e = 0; e < probe.tensor().size(); ++e) {
    const double keep = probe.tensor()[e];
    probe.tensor()[e] = keep + h;
    const double up = loss::total_loss(probe, t, ctx, target, mask, hp).value;
    probe.tensor()[e] = keep - h;
    const double dn = loss::total_loss(probe, t, ctx, target, mask, hp).value;
    probe.tensor()[e] = keep;
    const double fd = (up - dn) / (2 * h);
    const double scale = std::max({std::abs(fd), std::abs(g[e]), 1e-2});
    worst = std::max(worst, std::abs(fd - g[e]) / scale);
  }
  return {"composite_gradient_fd", worst < 1e-3, describe("max relative error %.3g", worst)};
}

CheckResult cvar_oracle(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> size(1, 64);
  std::uniform_real_distribution<double> value(0.0, 10.0);
  std::uniform_real_distribution<double> level(0.01, 0.99);
  int mismatches = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = size(rng);
    loss::DistanceField u{1, n, std::vector<double>(static_cast<std::size_t>(n)), 0.0};
    for (double& v : u.u) {
      v = std::round(value(rng) * 4.0) / 4.0;  // quarter steps force ties
    }
    const double alpha = level(rng);
    std::vector<double> sorted = u.u;
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    const std::size_t k =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil((1.0 - alpha) * static_cast<double>(n))));
    double sum = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      sum += sorted[i];
    }
    if (loss::cvar(u, RoiMask(1, n, true), alpha) != sum / static_cast<double>(k)) {
      ++mismatches;
    }
  }
  return {"cvar_oracle", mismatches == 0, describe("%.0f mismatches in 1000 fields", mismatches)};
}

CheckResult lse_oracle() {
  const loss::DistanceField u{1, 2, {0.0, 10.0}, 0.0};
  const double got = loss::soft_max_lse(u, RoiMask(1, 2, true), 100.0);
  const double expect = 10.0 - std::log(2.0) / 100.0;
  return {"lse_two_term", std::abs(got - expect) < 1e-3, describe("lse %.9g vs %.9g", got, expect)};
}

CheckResult scheduler_identity(std::mt19937_64& rng) {
  const auto sched = diffusion::build_schedule(80);
  std::normal_distribution<double> normal(0.0, 1.0);
  Tensor3 x0(4, 4, 3);
  Tensor3 eps(4, 4, 3);
  for (std::size_t i = 0; i < x0.size(); ++i) {
    x0[i] = normal(rng);
    eps[i] = normal(rng);
  }
  double worst = 0.0;
  for (int i = 0; i + 1 < sched.N; ++i) {
    const int t = sched.timesteps[static_cast<std::size_t>(i)];
    const int next = sched.timesteps[static_cast<std::size_t>(i) + 1];
    const Tensor3 stepped = diffusion::scheduler_step(eps, t, diffusion::add_noise(x0, eps, t, sched), sched);
    const Tensor3 direct = diffusion::add_noise(x0, eps, next, sched);
    for (std::size_t e = 0; e < x0.size(); ++e) {
      worst = std::max(worst, std::abs(stepped[e] - direct[e]) / std::max(1.0, std::abs(direct[e])));
    }
  }
  return {"scheduler_identity", worst < 1e-12, describe("max relative error %.3g", worst)};
}

CheckResult window() {
  schedule::ScheduleContext ctx;
  ctx.N = 80;
  ctx.f_start = 0.2;
  ctx.f_stop = 1.0;
  const auto [a, b] = schedule::window_bounds(ctx);
  return {"guidance_window", a == 16 && b == 80, describe("window [%.0f, %.0f)", a, b)};
}

}  // namespace

std::vector<CheckResult> run_selftest(const SelftestOptions& options) {
  colorspace::WhitePoint white = colorspace::kD65;
  if (options.perturb_white_point) {
    white.x *= 1.01;
  }
  std::mt19937_64 rng(20240611);
  std::vector<CheckResult> out;
  out.push_back(lab_anchor("white_anchor", ColorTriple::srgb(1, 1, 1), {100.0, 0.0, 0.0}, 0.01, white));
  out.push_back(lab_anchor("black_anchor", ColorTriple::srgb(0, 0, 0), {0.0, 0.0, 0.0}, 0.01, white));
  out.push_back(lab_anchor("target_anchor", ColorTriple::srgb(1.0, 0.53, 0.60), {69.97, 47.40, 11.54}, 0.5, white));
  out.push_back(srgb_round_trip());
  out.push_back(codec_round_trip(rng));
  out.push_back(lab_jacobian(rng));
  out.push_back(composite_gradient(rng));
  out.push_back(cvar_oracle(rng));
  out.push_back(lse_oracle());
  out.push_back(scheduler_identity(rng));
  out.push_back(window());
  return out;
}

}  // namespace colorguide::selftest
