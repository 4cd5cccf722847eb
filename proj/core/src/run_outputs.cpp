#include "colorguide/run_outputs.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "colorguide/config.hpp"
#include "colorguide/png_io.hpp"

namespace colorguide::output {

RunMetrics evaluate(const engine::GuidanceConfig& cfg, const PixelImage& final_srgb) {
  const RoiMask mask = RoiMask::from_rect(cfg.height, cfg.width, cfg.roi);
  const std::vector<double> de = report::roi_delta_e(final_srgb, cfg.target_srgb, mask);
  RunMetrics m;
  m.stats = report::delta_e_stats(de);
  m.p95 = report::percentile(de, 0.95);
  m.thresholds = report::threshold_satisfaction(final_srgb, cfg.target_srgb, mask);
  for (std::size_t p = 0; p < mask.pixels(); ++p) {
    if (mask[p]) {
      continue;
    }
    for (int c = 0; c < 3; ++c) {
      m.background_max_dev = std::max(m.background_max_dev, std::abs(final_srgb.pixel(p)[c] - cfg.bg_srgb[c]));
    }
  }
  return m;
}

RunMetrics write_run_outputs(const std::filesystem::path& dir, const engine::GuidanceConfig& cfg,
                             const engine::RunResult& result, const std::string& preset) {
  std::error_code ec;
  std::filesystem::create_directories(dir / "snapshots", ec);
  if (ec) {
    throw std::runtime_error(dir.string() + ": cannot create output directory: " + ec.message());
  }
  const RoiMask mask = RoiMask::from_rect(cfg.height, cfg.width, cfg.roi);
  const RunMetrics m = evaluate(cfg, result.final_image);

  io::write_png(dir / "final.png", result.final_image);
  const report::Heatmaps maps = report::render_heatmaps(result.final_image, cfg.target_srgb, mask);
  io::write_png(dir / "heatmap_de.png", maps.delta_e);
  io::write_png(dir / "heatmap_dL.png", maps.dL);
  io::write_png(dir / "heatmap_da.png", maps.da);
  io::write_png(dir / "heatmap_db.png", maps.db);
  io::write_png(dir / "thresholds.png", report::render_threshold_panel(m.thresholds));
  for (const auto& [step, img] : result.log.snapshots) {
    char name[32];
    std::snprintf(name, sizeof name, "%03d.png", step);
    io::write_png(dir / "snapshots" / name, img);
  }
  report::write_log_csv(dir / "log.csv", result.log);
  const report::SummaryInput in{&cfg, &result.log, &result.final_image, &mask, preset};
  report::write_run_summary(dir / "summary.txt", in, m.stats, m.thresholds);
  report::write_text(dir / "config.resolved", config::serialize(cfg));
  char runtime[64];
  std::snprintf(runtime, sizeof runtime, "runtime_seconds = %.3f\n", result.log.runtime_seconds);
  report::write_text(dir / "runtime.txt", runtime);
  return m;
}

}  // namespace colorguide::output
