#include <benchmark/benchmark.h>

#include <random>

#include "colorguide/colorspace.hpp"
#include "colorguide/config.hpp"
#include "colorguide/guidance_engine.hpp"
#include "colorguide/roi_loss.hpp"
#include "colorguide/toy_diffusion.hpp"

namespace cs = colorguide::colorspace;
using colorguide::ColorTriple;
using colorguide::Encoding;
using colorguide::PixelImage;
using colorguide::RoiMask;

namespace {

PixelImage random_srgb(int side) {
  std::mt19937_64 rng(0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  PixelImage img(side, side, Encoding::Srgb);
  for (double& v : img.tensor().values()) {
    v = u(rng);
  }
  return img;
}

void BM_SrgbToLab(benchmark::State& state) {
  const PixelImage img = random_srgb(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(cs::srgb_to_lab(img));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(img.pixels()));
}
BENCHMARK(BM_SrgbToLab)->Arg(16)->Arg(64)->Arg(256);

void BM_TotalLossGradient(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  const PixelImage img = random_srgb(side);
  const RoiMask mask = RoiMask::from_rect(side, side, {side / 4, side / 4, side / 2, side / 2});
  const ColorTriple target = cs::to_lab(ColorTriple::srgb(1.0, 0.53, 0.60));
  colorguide::schedule::ScheduleContext ctx;
  const colorguide::loss::LossHyperparams hp;
  for (auto _ : state) {
    benchmark::DoNotOptimize(colorguide::loss::total_loss_gradient(img, 500, ctx, target, mask, hp));
  }
}
BENCHMARK(BM_TotalLossGradient)->Arg(16)->Arg(64);

void BM_AnalyticDenoiser(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  const colorguide::diffusion::LatentCodec codec;
  const auto sched = colorguide::diffusion::build_schedule(80);
  const colorguide::diffusion::FlatColorPrior prior;
  const colorguide::Tensor3 z = codec.encode(random_srgb(side));
  for (auto _ : state) {
    benchmark::DoNotOptimize(colorguide::diffusion::analytic_denoiser(
        z, 500, colorguide::diffusion::Branch::Conditional, prior, codec, sched));
  }
}
BENCHMARK(BM_AnalyticDenoiser)->Arg(16)->Arg(64);

void BM_FullRun(benchmark::State& state) {
  colorguide::engine::GuidanceConfig cfg = colorguide::config::preset("cvar-lrgb");
  cfg.snapshot_every = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(colorguide::engine::run_guided_inpaint(cfg));
  }
}
BENCHMARK(BM_FullRun)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
