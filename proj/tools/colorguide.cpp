#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "colorguide/config.hpp"
#include "colorguide/guidance_engine.hpp"
#include "colorguide/run_outputs.hpp"
#include "colorguide/selftest.hpp"

namespace fs = std::filesystem;
using colorguide::engine::GuidanceConfig;

namespace {

enum Exit : int { kOk = 0, kConfigError = 1, kEngineAbort = 2, kIoError = 3 };

struct ConfigFlags {
  std::string preset = "cvar-lrgb";
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> sets;
};

void add_config_flags(CLI::App* cmd, ConfigFlags& f) {
  cmd->add_option("--preset", f.preset, "Built-in preset")
      ->check(CLI::IsMember(colorguide::config::preset_names()));
  cmd->add_option("--config", f.config_path, "Config file applied on top of the preset")->check(CLI::ExistingFile);
  cmd->add_option("--set", f.sets, "Override one key, key=value (repeatable)");
}

GuidanceConfig resolve(const ConfigFlags& f) {
  GuidanceConfig cfg = colorguide::config::preset(f.preset);
  if (!f.config_path.empty()) {
    cfg = colorguide::config::load(f.config_path, cfg);
  }
  if (f.seed) {
    cfg.seed = *f.seed;
  }
  for (const std::string& s : f.sets) {
    colorguide::config::apply_assignment(cfg, s);
  }
  cfg.validate();
  return cfg;
}

fs::path default_out(const std::string& leaf) {
  const char* root = std::getenv("COLORGUIDE_OUT");
  return fs::path(root && *root ? root : "runs") / leaf;
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = std::min(text.find(',', pos), text.size());
    const std::string item = text.substr(pos, comma - pos);
    pos = comma + 1;
    if (item.empty()) {
      continue;
    }
    const std::size_t dash = item.find('-');
    std::size_t used = 0;
    if (dash == std::string::npos) {
      seeds.push_back(std::stoull(item, &used));
      if (used != item.size()) {
        throw std::invalid_argument("--seeds: bad seed '" + item + "'");
      }
      continue;
    }
    const std::uint64_t lo = std::stoull(item.substr(0, dash));
    const std::uint64_t hi = std::stoull(item.substr(dash + 1));
    if (hi < lo) {
      throw std::invalid_argument("--seeds: empty range '" + item + "'");
    }
    for (std::uint64_t s = lo; s <= hi; ++s) {
      seeds.push_back(s);
    }
  }
  if (seeds.empty()) {
    throw std::invalid_argument("--seeds: no seeds given");
  }
  return seeds;
}

struct SeedOutcome {
  int code = kOk;
  colorguide::output::RunMetrics metrics;
  double runtime = 0.0;
  std::string error;
};

SeedOutcome run_one(const GuidanceConfig& cfg, const fs::path& dir, const std::string& preset) {
  SeedOutcome out;
  colorguide::engine::RunResult result;
  try {
    result = colorguide::engine::run_guided_inpaint(cfg);
  } catch (const colorguide::engine::EngineAbort& e) {
    out.code = kEngineAbort;
    out.error = std::string("engine abort at ") + e.what();
    return out;
  }
  try {
    out.metrics = colorguide::output::write_run_outputs(dir, cfg, result, preset);
  } catch (const std::exception& e) {
    out.code = kIoError;
    out.error = e.what();
    return out;
  }
  out.runtime = result.log.runtime_seconds;
  return out;
}

int cmd_run(const ConfigFlags& flags, std::string out) {
  GuidanceConfig cfg;
  try {
    cfg = resolve(flags);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfigError;
  }
  const fs::path dir = out.empty() ? default_out(flags.preset + "-seed" + std::to_string(cfg.seed)) : fs::path(out);
  const SeedOutcome r = run_one(cfg, dir, flags.preset);
  if (r.code != kOk) {
    std::fprintf(stderr, "%s\n", r.error.c_str());
    return r.code;
  }
  std::printf("wrote %s\n", dir.string().c_str());
  std::printf("ROI mean dE (Taylor) %.4f, p95 %.4f, background max dev %.3g\n", r.metrics.stats.mean, r.metrics.p95,
              r.metrics.background_max_dev);
  std::printf("runtime %.3f s\n", r.runtime);
  return kOk;
}

std::vector<SeedOutcome> sweep_seeds(const GuidanceConfig& base, const std::vector<std::uint64_t>& seeds,
                                     const fs::path& root, const std::string& preset, unsigned workers) {
  std::vector<SeedOutcome> results(seeds.size());
  std::atomic<std::size_t> next{0};
  std::mutex log_mu;
  auto worker = [&] {
    for (std::size_t i = next++; i < seeds.size(); i = next++) {
      GuidanceConfig cfg = base;
      cfg.seed = seeds[i];
      char leaf[32];
      std::snprintf(leaf, sizeof leaf, "seed_%03llu", static_cast<unsigned long long>(seeds[i]));
      results[i] = run_one(cfg, root / leaf, preset);
      std::lock_guard<std::mutex> lock(log_mu);
      if (results[i].code == kOk) {
        std::printf("[%s] seed %llu: mean dE %.4f\n", preset.c_str(), static_cast<unsigned long long>(seeds[i]),
                    results[i].metrics.stats.mean);
      } else {
        std::fprintf(stderr, "[%s] seed %llu: %s\n", preset.c_str(), static_cast<unsigned long long>(seeds[i]),
                     results[i].error.c_str());
      }
    }
  };
  std::vector<std::thread> pool;
  const unsigned n = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(seeds.size())));
  for (unsigned w = 0; w < n; ++w) {
    pool.emplace_back(worker);
  }
  for (auto& t : pool) {
    t.join();
  }
  return results;
}

int worst_code(const std::vector<SeedOutcome>& rs) {
  int code = kOk;
  for (const auto& r : rs) {
    code = std::max(code, r.code);
  }
  return code;
}

void write_sweep_csv(const fs::path& path, const std::vector<std::uint64_t>& seeds,
                     const std::vector<SeedOutcome>& rs) {
  std::ofstream f(path);
  f << "seed,status,mean_de,median_de,p95_de,max_de,frac_lt_2,frac_lt_5,frac_lt_10,frac_lt_20,frac_lt_50,"
       "bg_max_dev\n";
  char buf[64];
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    f << seeds[i] << ',' << rs[i].code;
    if (rs[i].code != kOk) {
      f << ",,,,,,,,,,\n";
      continue;
    }
    const auto& m = rs[i].metrics;
    for (double v : {m.stats.mean, m.stats.median, m.p95, m.stats.max}) {
      std::snprintf(buf, sizeof buf, ",%.9g", v);
      f << buf;
    }
    for (double v : m.thresholds.fraction_satisfied) {
      std::snprintf(buf, sizeof buf, ",%.9g", v);
      f << buf;
    }
    std::snprintf(buf, sizeof buf, ",%.9g\n", m.background_max_dev);
    f << buf;
  }
  if (!f) {
    throw std::runtime_error(path.string() + ": write failed");
  }
}

double aggregate_mean(const std::vector<SeedOutcome>& rs, int* count) {
  double sum = 0.0;
  *count = 0;
  for (const auto& r : rs) {
    if (r.code == kOk) {
      sum += r.metrics.stats.mean;
      ++*count;
    }
  }
  return *count ? sum / *count : 0.0;
}

int cmd_sweep(const ConfigFlags& flags, const std::string& seeds_text, std::string out, unsigned workers,
              const std::string& baseline) {
  GuidanceConfig cfg;
  GuidanceConfig base_cfg;
  std::vector<std::uint64_t> seeds;
  try {
    cfg = resolve(flags);
    seeds = parse_seeds(seeds_text);
    if (!baseline.empty()) {
      ConfigFlags bf = flags;
      bf.preset = baseline;
      base_cfg = resolve(bf);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfigError;
  }
  const fs::path root = out.empty() ? default_out(flags.preset + "-sweep") : fs::path(out);
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec) {
    std::fprintf(stderr, "%s: %s\n", root.string().c_str(), ec.message().c_str());
    return kIoError;
  }

  const auto guided = sweep_seeds(cfg, seeds, root, flags.preset, workers);
  int code = worst_code(guided);
  int n_ok = 0;
  const double mean = aggregate_mean(guided, &n_ok);
  try {
    write_sweep_csv(root / "sweep.csv", seeds, guided);
    char line[160];
    std::snprintf(line, sizeof line, "preset,seeds,completed,mean_de\n%s,%zu,%d,%.9g\n", flags.preset.c_str(),
                  seeds.size(), n_ok, mean);
    colorguide::report::write_text(root / "aggregate.csv", line);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return kIoError;
  }
  std::printf("%s: %d/%zu seeds, aggregate mean dE %.4f\n", flags.preset.c_str(), n_ok, seeds.size(), mean);

  if (baseline.empty()) {
    return code;
  }
  const auto base = sweep_seeds(base_cfg, seeds, root / "baseline", baseline, workers);
  code = std::max(code, worst_code(base));
  int n_base = 0;
  const double base_mean = aggregate_mean(base, &n_base);
  try {
    write_sweep_csv(root / "baseline" / "sweep.csv", seeds, base);
    std::ofstream f(root / "comparison.csv");
    f << "seed,guided_mean_de,baseline_mean_de,guided_p95_de,baseline_p95_de,improved\n";
    char buf[160];
    int improved = 0;
    int paired = 0;
    for (std::size_t i = 0; i < seeds.size(); ++i) {
      if (guided[i].code != kOk || base[i].code != kOk) {
        continue;
      }
      const auto& g = guided[i].metrics;
      const auto& b = base[i].metrics;
      const bool better = g.stats.mean < b.stats.mean;
      improved += better;
      ++paired;
      std::snprintf(buf, sizeof buf, "%llu,%.9g,%.9g,%.9g,%.9g,%d\n", static_cast<unsigned long long>(seeds[i]),
                    g.stats.mean, b.stats.mean, g.p95, b.p95, better ? 1 : 0);
      f << buf;
    }
    if (!f) {
      throw std::runtime_error((root / "comparison.csv").string() + ": write failed");
    }
    const double gain = base_mean > 0.0 ? 1.0 - mean / base_mean : 0.0;
    std::printf("%s vs %s: lower mean dE on %d/%d seeds, aggregate %.4f vs %.4f (%.2f%% improvement)\n",
                flags.preset.c_str(), baseline.c_str(), improved, paired, mean, base_mean, 100.0 * gain);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return kIoError;
  }
  return code;
}

int cmd_selftest(bool perturb) {
  colorguide::selftest::SelftestOptions opts;
  opts.perturb_white_point = perturb;
  const auto checks = colorguide::selftest::run_selftest(opts);
  int failed = 0;
  for (const auto& c : checks) {
    std::printf("%-24s %s  %s\n", c.name.c_str(), c.passed ? "PASS" : "FAIL", c.detail.c_str());
    failed += !c.passed;
  }
  std::printf("%zu checks, %d failed\n", checks.size(), failed);
  return failed ? kConfigError : kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Color-guided inpainting on a toy latent diffusion model"};
  app.require_subcommand(1);

  ConfigFlags run_flags;
  std::string run_out;
  auto* run = app.add_subcommand("run", "Run one guided inpaint and write its output directory");
  add_config_flags(run, run_flags);
  run->add_option("--seed", run_flags.seed, "Noise seed");
  run->add_option("--out", run_out, "Output directory (default $COLORGUIDE_OUT/<preset>-seed<N>)");

  ConfigFlags sweep_flags;
  std::string sweep_out;
  std::string seeds = "0-9";
  std::string baseline;
  unsigned workers = std::max(1u, std::thread::hardware_concurrency());
  auto* sweep = app.add_subcommand("sweep", "Run a seed sweep, optionally paired with a baseline preset");
  add_config_flags(sweep, sweep_flags);
  sweep->add_option("--seeds", seeds, "Seeds, e.g. 0-9 or 1,4,7")->capture_default_str();
  sweep->add_option("--out", sweep_out, "Output root (default $COLORGUIDE_OUT/<preset>-sweep)");
  sweep->add_option("--workers", workers, "Concurrent runs")->capture_default_str()->check(CLI::PositiveNumber);
  sweep->add_option("--baseline", baseline, "Preset run on the same seeds for comparison.csv")
      ->check(CLI::IsMember(colorguide::config::preset_names()));

  bool perturb = false;
  auto* self = app.add_subcommand("selftest", "Run the embedded invariant checks");
  self->add_flag("--perturb-white-point", perturb, "Negative control: shift the reference white");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfigError;
  }

  if (run->parsed()) {
    return cmd_run(run_flags, run_out);
  }
  if (sweep->parsed()) {
    return cmd_sweep(sweep_flags, seeds, sweep_out, workers, baseline);
  }
  return cmd_selftest(perturb);
}
