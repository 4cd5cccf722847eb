#pragma once

// Pixelwise color-difference statistics, threshold analysis, heatmaps and
// run summaries. The metric throughout is Delta E (Taylor), the Euclidean Lab
// distance.

#include <filesystem>
#include <string>
#include <vector>

#include "colorguide/guidance_engine.hpp"
#include "colorguide/types.hpp"

namespace colorguide::report {

inline const std::vector<double> kDefaultThresholds{2.0, 5.0, 10.0, 20.0, 50.0};

struct DeltaEStats {
  double min = 0.0;
  double max = 0.0;
  double mean = 0.0;
  double std = 0.0;     // population
  double median = 0.0;  // lower middle element for even counts
  std::size_t count = 0;
};

/// Per-ROI-pixel Delta E (Taylor) against the target, row-major.
std::vector<double> roi_delta_e(const PixelImage& final_srgb, const ColorTriple& target_srgb, const RoiMask& mask);

/// Throws on an empty list.
DeltaEStats delta_e_stats(const std::vector<double>& values);
DeltaEStats roi_delta_e_stats(const PixelImage& final_srgb, const ColorTriple& target_srgb, const RoiMask& mask);

/// Linear interpolation between closest ranks, q in [0,1].
double percentile(std::vector<double> values, double q);

struct ThresholdReport {
  std::vector<double> thresholds;
  std::vector<double> fraction_satisfied;
  std::vector<RoiMask> maps;  // pixel set where Delta E < T, inside the ROI
  RoiMask roi;
};

/// Strict inequality Delta E < T. Thresholds must be ascending.
ThresholdReport threshold_satisfaction(const PixelImage& final_srgb, const ColorTriple& target_srgb,
                                       const RoiMask& mask,
                                       const std::vector<double>& thresholds = kDefaultThresholds);

struct Heatmaps {
  PixelImage delta_e;  // sequential ramp over [0, max]
  PixelImage dL;       // diverging ramps, symmetric about 0
  PixelImage da;
  PixelImage db;
};

/// Pixels outside the ROI are drawn mid-grey.
Heatmaps render_heatmaps(const PixelImage& final_srgb, const ColorTriple& target_srgb, const RoiMask& mask);

/// Ramp lookup helpers; exposed for tests.
int sequential_index(double value, double max_value);
int diverging_index(double value, double max_abs);
ColorTriple sequential_color(int index);
ColorTriple diverging_color(int index);

/// One panel per threshold side by side, green where satisfied, red where
/// not, dark grey outside the ROI, 2 px separators.
PixelImage render_threshold_panel(const ThresholdReport& report);

/// Deterministic host descriptor for the Device field.
std::string device_descriptor();

struct SummaryInput {
  const engine::GuidanceConfig* cfg = nullptr;
  const engine::RunLog* log = nullptr;
  const PixelImage* final_srgb = nullptr;
  const RoiMask* mask = nullptr;
  std::string preset;
};

/// Key-value run summary mirroring the report layout: run summary, target vs
/// final table, pixelwise statistics and threshold table.
std::string format_run_summary(const SummaryInput& in, const DeltaEStats& stats, const ThresholdReport& report);
void write_run_summary(const std::filesystem::path& path, const SummaryInput& in, const DeltaEStats& stats,
                       const ThresholdReport& report);

inline constexpr const char* kLogHeader =
    "step,timestep,L_total,L_lin,L_cvar,grad_norm,gate,roi_L,roi_a,roi_b,roi_r,roi_g,roi_b2,nudged,nan_repaired";

std::string format_log_csv(const engine::RunLog& log);
void write_log_csv(const std::filesystem::path& path, const engine::RunLog& log);
std::vector<engine::StepRecord> read_log_csv(const std::filesystem::path& path);

/// Writes `text` to `path`; throws std::runtime_error on failure.
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace colorguide::report
