#include "colorguide/metrics_report.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "colorguide/colorspace.hpp"
#include "colorguide/roi_loss.hpp"
#include "colorguide/schedule.hpp"

namespace colorguide::report {
namespace {

constexpr std::array<std::array<unsigned char, 3>, 256> kSequential{{
#include "ramp_sequential.inc"
}};

constexpr std::array<std::array<unsigned char, 3>, 256> kDiverging{{
#include "ramp_diverging.inc"
}};

std::string num(double v, const char* format = "%.9g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, v);
  return buf;
}

std::string triple(const ColorTriple& c, const char* format) {
  return num(c[0], format) + ", " + num(c[1], format) + ", " + num(c[2], format);
}

const char* flag(bool b) { return b ? "True" : "False"; }

ColorTriple from_table(const std::array<unsigned char, 3>& e) {
  return ColorTriple::srgb(e[0] / 255.0, e[1] / 255.0, e[2] / 255.0);
}

void require_roi(const PixelImage& img, const RoiMask& mask, const char* what) {
  require_encoding(img, Encoding::Srgb, what);
  if (!mask.matches(img)) {
    throw std::invalid_argument(std::string(what) + ": mask and image shapes differ");
  }
}

}  // namespace

std::vector<double> roi_delta_e(const PixelImage& final_srgb, const ColorTriple& target_srgb, const RoiMask& mask) {
  require_roi(final_srgb, mask, "roi_delta_e");
  const PixelImage lab = colorspace::srgb_to_lab(final_srgb);
  const ColorTriple target = colorspace::to_lab(target_srgb);
  std::vector<double> out;
  out.reserve(mask.count());
  for (std::size_t p = 0; p < lab.pixels(); ++p) {
    if (mask[p]) {
      out.push_back(loss::delta_e00_taylor(lab.color_at(p), target));
    }
  }
  return out;
}

DeltaEStats delta_e_stats(const std::vector<double>& values) {
  if (values.empty()) {
    throw std::invalid_argument("delta_e_stats: empty ROI");
  }
  DeltaEStats s;
  s.count = values.size();
  const double n = static_cast<double>(values.size());
  double sum = 0.0;
  s.min = values.front();
  s.max = values.front();
  for (double v : values) {
    sum += v;
    s.min = std::min(s.min, v);
    s.max = std::max(s.max, v);
  }
  s.mean = sum / n;
  double acc = 0.0;
  for (double v : values) {
    acc += (v - s.mean) * (v - s.mean);
  }
  s.std = std::sqrt(acc / n);
  std::vector<double> sorted = values;
  std::sort(sorted.begin(), sorted.end());
  s.median = sorted[(sorted.size() - 1) / 2];
  return s;
}

DeltaEStats roi_delta_e_stats(const PixelImage& final_srgb, const ColorTriple& target_srgb, const RoiMask& mask) {
  if (mask.empty()) {
    throw std::invalid_argument("roi_delta_e_stats: empty ROI");
  }
  return delta_e_stats(roi_delta_e(final_srgb, target_srgb, mask));
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) {
    throw std::invalid_argument("percentile: empty list");
  }
  std::sort(values.begin(), values.end());
  const double pos = std::clamp(q, 0.0, 1.0) * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

ThresholdReport threshold_satisfaction(const PixelImage& final_srgb, const ColorTriple& target_srgb,
                                       const RoiMask& mask, const std::vector<double>& thresholds) {
  if (!std::is_sorted(thresholds.begin(), thresholds.end())) {
    throw std::invalid_argument("threshold_satisfaction: thresholds must be ascending");
  }
  require_roi(final_srgb, mask, "threshold_satisfaction");
  const PixelImage lab = colorspace::srgb_to_lab(final_srgb);
  const ColorTriple target = colorspace::to_lab(target_srgb);
  const std::size_t n = mask.count();
  ThresholdReport r;
  r.thresholds = thresholds;
  r.roi = mask;
  for (double T : thresholds) {
    RoiMask map(mask.height(), mask.width());
    std::size_t hit = 0;
    for (std::size_t p = 0; p < lab.pixels(); ++p) {
      if (mask[p] && loss::delta_e00_taylor(lab.color_at(p), target) < T) {
        map.set(p, true);
        ++hit;
      }
    }
    r.fraction_satisfied.push_back(n == 0 ? 0.0 : static_cast<double>(hit) / static_cast<double>(n));
    r.maps.push_back(std::move(map));
  }
  return r;
}

int sequential_index(double value, double max_value) {
  if (!(max_value > 0.0)) {
    return 0;
  }
  const double pos = std::floor(value / max_value * 255.0);
  return static_cast<int>(std::clamp(pos, 0.0, 255.0));
}

int diverging_index(double value, double max_abs) {
  if (!(max_abs > 0.0)) {
    return 128;
  }
  const double pos = std::round(127.5 + 127.5 * value / max_abs);
  return static_cast<int>(std::clamp(pos, 0.0, 255.0));
}

ColorTriple sequential_color(int index) { return from_table(kSequential.at(static_cast<std::size_t>(index))); }
ColorTriple diverging_color(int index) { return from_table(kDiverging.at(static_cast<std::size_t>(index))); }

Heatmaps render_heatmaps(const PixelImage& final_srgb, const ColorTriple& target_srgb, const RoiMask& mask) {
  require_roi(final_srgb, mask, "render_heatmaps");
  const PixelImage lab = colorspace::srgb_to_lab(final_srgb);
  const ColorTriple target = colorspace::to_lab(target_srgb);
  const ColorTriple grey = ColorTriple::srgb(0.5, 0.5, 0.5);
  const int h = final_srgb.height();
  const int w = final_srgb.width();
  Heatmaps out{PixelImage::filled(h, w, grey), PixelImage::filled(h, w, grey), PixelImage::filled(h, w, grey),
               PixelImage::filled(h, w, grey)};

  double max_de = 0.0;
  std::array<double, 3> max_abs{0.0, 0.0, 0.0};
  for (std::size_t p = 0; p < lab.pixels(); ++p) {
    if (!mask[p]) {
      continue;
    }
    max_de = std::max(max_de, loss::delta_e00_taylor(lab.color_at(p), target));
    for (int c = 0; c < 3; ++c) {
      max_abs[c] = std::max(max_abs[c], std::abs(lab.pixel(p)[c] - target[c]));
    }
  }
  PixelImage* channel_maps[3] = {&out.dL, &out.da, &out.db};
  for (std::size_t p = 0; p < lab.pixels(); ++p) {
    if (!mask[p]) {
      continue;
    }
    out.delta_e.set_color(p, sequential_color(sequential_index(loss::delta_e00_taylor(lab.color_at(p), target), max_de)));
    for (int c = 0; c < 3; ++c) {
      channel_maps[c]->set_color(p, diverging_color(diverging_index(lab.pixel(p)[c] - target[c], max_abs[c])));
    }
  }
  return out;
}

PixelImage render_threshold_panel(const ThresholdReport& report) {
  if (report.maps.empty()) {
    throw std::invalid_argument("render_threshold_panel: no thresholds");
  }
  constexpr int kGap = 2;
  const int h = report.maps.front().height();
  const int w = report.maps.front().width();
  const int count = static_cast<int>(report.maps.size());
  PixelImage panel(h, count * w + (count - 1) * kGap, Encoding::Srgb, 1.0);
  for (int k = 0; k < count; ++k) {
    const RoiMask& map = report.maps[static_cast<std::size_t>(k)];
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const int px = k * (w + kGap) + x;
        if (!report.roi(y, x)) {
          panel.at(y, px, 0) = panel.at(y, px, 1) = panel.at(y, px, 2) = 0.25;
          continue;
        }
        const bool ok = map(y, x);
        panel.at(y, px, 0) = ok ? 0.10 : 0.85;
        panel.at(y, px, 1) = ok ? 0.70 : 0.15;
        panel.at(y, px, 2) = ok ? 0.20 : 0.15;
      }
    }
  }
  return panel;
}

std::string device_descriptor() {
#if defined(__x86_64__)
  const char* arch = "x86_64";
#elif defined(__aarch64__)
  const char* arch = "aarch64";
#else
  const char* arch = "unknown-arch";
#endif
  return std::string("CPU ") + arch + ", analytic toy backend";
}

std::string format_run_summary(const SummaryInput& in, const DeltaEStats& stats, const ThresholdReport& report) {
  if (!in.cfg || !in.log || !in.final_srgb || !in.mask) {
    throw std::invalid_argument("format_run_summary: incomplete input");
  }
  const engine::GuidanceConfig& cfg = *in.cfg;
  schedule::ScheduleContext win;
  win.N = cfg.N;
  win.f_start = cfg.f_start;
  win.f_stop = cfg.f_stop;
  const auto [i_start, i_stop] = schedule::window_bounds(win);
  const ColorTriple target_lab = colorspace::to_lab(cfg.target_srgb);
  const auto [final_lab, final_srgb] = engine::roi_means(*in.final_srgb, *in.mask, cfg.monitor_eps);

  std::ostringstream os;
  os << "# Run summary\n";
  os << "preset = " << (in.preset.empty() ? "custom" : in.preset) << "\n";
  os << "device = " << device_descriptor() << "\n";
  os << "steps = " << cfg.N << "\n";
  os << "enforcer_active = " << num(cfg.f_start * 100.0, "%.0f") << "%-" << num(cfg.f_stop * 100.0, "%.0f")
     << "% (steps " << i_start << " to " << i_stop << ", half-open)\n";
  os << "eta = " << num(cfg.eta) << "\n";
  os << "lambda_guidance = " << num(cfg.lambda_lin) << "\n";
  os << "lambda_master = " << num(cfg.lambda_master) << "\n";
  os << "s_cfg = " << num(cfg.s_cfg) << "\n";
  os << "k = " << num(cfg.k) << "\n";
  os << "toggles = LinearRGB=" << flag(cfg.enable_lin_rgb) << ", Angad=" << flag(cfg.enable_cvar)
     << ", BgAnchor=" << flag(cfg.enable_bg_anchor) << "\n";
  os << "seed = " << cfg.seed << "\n";
  os << "records = " << in.log->records.size() << "\n";
  os << "\n# Target vs final (ROI mean)\n";
  os << "target.lab = " << triple(target_lab, "%.2f") << "\n";
  os << "target.srgb = " << triple(cfg.target_srgb, "%.2f") << "\n";
  os << "final.lab = " << triple(final_lab, "%.2f") << "\n";
  os << "final.srgb = " << triple(final_srgb, "%.2f") << "\n";
  os << "mean_color_delta_e = " << num(loss::delta_e00_taylor(final_lab, target_lab), "%.2f") << "\n";
  os << "\n# Pixelwise Delta E (Taylor)\n";
  os << "delta_e.count = " << stats.count << "\n";
  os << "delta_e.min = " << num(stats.min) << "\n";
  os << "delta_e.max = " << num(stats.max) << "\n";
  os << "delta_e.mean = " << num(stats.mean) << "\n";
  os << "delta_e.std = " << num(stats.std) << "\n";
  os << "delta_e.median = " << num(stats.median) << "\n";
  os << "\n# Threshold satisfaction (Delta E (Taylor) < T)\n";
  for (std::size_t i = 0; i < report.thresholds.size(); ++i) {
    os << "threshold." << num(report.thresholds[i]) << " = " << num(report.fraction_satisfied[i], "%.4f") << "\n";
  }
  return os.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw std::runtime_error(path.string() + ": cannot open for writing");
  }
  out << text;
  out.flush();
  if (!out) {
    throw std::runtime_error(path.string() + ": write failed");
  }
}

void write_run_summary(const std::filesystem::path& path, const SummaryInput& in, const DeltaEStats& stats,
                       const ThresholdReport& report) {
  write_text(path, format_run_summary(in, stats, report));
}

std::string format_log_csv(const engine::RunLog& log) {
  std::ostringstream os;
  os << kLogHeader << "\n";
  for (const engine::StepRecord& r : log.records) {
    os << r.step << ',' << r.timestep << ',' << num(r.L_total) << ',' << num(r.L_lin) << ',' << num(r.L_cvar) << ','
       << num(r.grad_norm) << ',' << num(r.gate) << ',' << num(r.roi_lab[0]) << ',' << num(r.roi_lab[1]) << ','
       << num(r.roi_lab[2]) << ',' << num(r.roi_srgb[0]) << ',' << num(r.roi_srgb[1]) << ','
       << num(r.roi_srgb[2]) << ',' << (r.nudged ? 1 : 0) << ',' << (r.nan_repaired ? 1 : 0) << "\n";
  }
  return os.str();
}

void write_log_csv(const std::filesystem::path& path, const engine::RunLog& log) {
  write_text(path, format_log_csv(log));
}

std::vector<engine::StepRecord> read_log_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error(path.string() + ": cannot open for reading");
  }
  std::string line;
  if (!std::getline(in, line) || line != kLogHeader) {
    throw std::runtime_error(path.string() + ": unexpected header");
  }
  std::vector<engine::StepRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) {
      continue;
    }
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      cells.push_back(cell);
    }
    if (cells.size() != 15) {
      throw std::runtime_error(path.string() + ": expected 15 columns, got " + std::to_string(cells.size()));
    }
    auto d = [&](int i) { return std::stod(cells[static_cast<std::size_t>(i)]); };
    engine::StepRecord r;
    r.step = std::stoi(cells[0]);
    r.timestep = std::stoi(cells[1]);
    r.L_total = d(2);
    r.L_lin = d(3);
    r.L_cvar = d(4);
    r.grad_norm = d(5);
    r.gate = d(6);
    r.roi_lab = ColorTriple::lab(d(7), d(8), d(9));
    r.roi_srgb = ColorTriple::srgb(d(10), d(11), d(12));
    r.nudged = cells[13] == "1";
    r.nan_repaired = cells[14] == "1";
    out.push_back(r);
  }
  return out;
}

}  // namespace colorguide::report
