#pragma once

#include <filesystem>
#include <string>

#include "colorguide/guidance_engine.hpp"
#include "colorguide/metrics_report.hpp"

namespace colorguide::output {

struct RunMetrics {
  report::DeltaEStats stats;
  report::ThresholdReport thresholds;
  double p95 = 0.0;
  double background_max_dev = 0.0;  // max |pixel - bg| over non-ROI pixels, sRGB
};

RunMetrics evaluate(const engine::GuidanceConfig& cfg, const PixelImage& final_srgb);

/// Writes final.png, heatmap_{de,dL,da,db}.png, thresholds.png,
/// snapshots/NNN.png, log.csv, summary.txt, config.resolved and runtime.txt.
/// Everything except runtime.txt is a pure function of (config, seed).
/// Throws std::runtime_error on I/O failure.
RunMetrics write_run_outputs(const std::filesystem::path& dir, const engine::GuidanceConfig& cfg,
                             const engine::RunResult& result, const std::string& preset);

}  // namespace colorguide::output
