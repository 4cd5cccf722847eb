#include "colorguide/config.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>

namespace colorguide::config {
namespace {

using engine::GuidanceConfig;

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) {
    return {};
  }
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad(std::string_view key, const std::string& why) {
  throw std::invalid_argument(std::string(key) + ": " + why);
}

double parse_double(std::string_view key, std::string_view v) {
  v = trim(v);
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || ptr != v.data() + v.size()) {
    bad(key, "expected a number, got '" + std::string(v) + "'");
  }
  return out;
}

template <class Int>
Int parse_int(std::string_view key, std::string_view v) {
  v = trim(v);
  Int out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || ptr != v.data() + v.size()) {
    bad(key, "expected an integer, got '" + std::string(v) + "'");
  }
  return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
  std::string s(trim(v));
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (s == "true" || s == "1" || s == "on" || s == "yes") {
    return true;
  }
  if (s == "false" || s == "0" || s == "off" || s == "no") {
    return false;
  }
  bad(key, "expected a boolean, got '" + std::string(v) + "'");
}

std::array<double, 3> parse_triple(std::string_view key, std::string_view v) {
  std::array<double, 3> out{};
  std::size_t start = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    const std::size_t comma = v.find(',', start);
    const bool last = i == 2;
    if (last != (comma == std::string_view::npos)) {
      bad(key, "expected three comma-separated numbers");
    }
    out[i] = parse_double(key, v.substr(start, last ? std::string_view::npos : comma - start));
    start = comma + 1;
  }
  return out;
}

std::string fmt(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string fmt(const ColorTriple& c) { return fmt(c[0]) + ", " + fmt(c[1]) + ", " + fmt(c[2]); }

struct Field {
  std::string key;
  std::function<std::string(const GuidanceConfig&)> get;
  std::function<void(GuidanceConfig&, std::string_view)> set;
};

Field real(std::string key, double GuidanceConfig::*member) {
  return {key, [member](const GuidanceConfig& c) { return fmt(c.*member); },
          [member, key](GuidanceConfig& c, std::string_view v) { c.*member = parse_double(key, v); }};
}

Field loss_real(std::string key, double loss::LossHyperparams::*member) {
  return {key, [member](const GuidanceConfig& c) { return fmt(c.loss_hp.*member); },
          [member, key](GuidanceConfig& c, std::string_view v) { c.loss_hp.*member = parse_double(key, v); }};
}

Field prior_real(std::string key, double diffusion::FlatColorPrior::*member) {
  return {key, [member](const GuidanceConfig& c) { return fmt(c.prior.*member); },
          [member, key](GuidanceConfig& c, std::string_view v) { c.prior.*member = parse_double(key, v); }};
}

Field integer(std::string key, int GuidanceConfig::*member) {
  return {key, [member](const GuidanceConfig& c) { return std::to_string(c.*member); },
          [member, key](GuidanceConfig& c, std::string_view v) { c.*member = parse_int<int>(key, v); }};
}

Field roi_int(std::string key, int Rect::*member) {
  return {key, [member](const GuidanceConfig& c) { return std::to_string(c.roi.*member); },
          [member, key](GuidanceConfig& c, std::string_view v) { c.roi.*member = parse_int<int>(key, v); }};
}

Field boolean(std::string key, bool GuidanceConfig::*member) {
  return {key, [member](const GuidanceConfig& c) { return std::string(c.*member ? "true" : "false"); },
          [member, key](GuidanceConfig& c, std::string_view v) { c.*member = parse_bool(key, v); }};
}

Field color(std::string key, Encoding enc, ColorTriple GuidanceConfig::*member) {
  return {key, [member](const GuidanceConfig& c) { return fmt(c.*member); },
          [member, key, enc](GuidanceConfig& c, std::string_view v) { c.*member = {parse_triple(key, v), enc}; }};
}

Field prior_color(std::string key, ColorTriple diffusion::FlatColorPrior::*member) {
  return {key, [member](const GuidanceConfig& c) { return fmt(c.prior.*member); },
          [member, key](GuidanceConfig& c, std::string_view v) {
            c.prior.*member = {parse_triple(key, v), Encoding::LinearRgb};
          }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    using C = GuidanceConfig;
    using L = loss::LossHyperparams;
    using P = diffusion::FlatColorPrior;
    std::vector<Field> f;
    f.push_back(real("guidance.eta", &C::eta));
    f.push_back(real("guidance.lambda_master", &C::lambda_master));
    f.push_back(real("guidance.lambda_lin", &C::lambda_lin));
    f.push_back(real("guidance.s_cfg", &C::s_cfg));
    f.push_back(integer("schedule.steps", &C::N));
    f.push_back(real("schedule.f_start", &C::f_start));
    f.push_back(real("schedule.f_stop", &C::f_stop));
    f.push_back(real("schedule.s", &C::s));
    f.push_back(real("schedule.k", &C::k));
    f.push_back(integer("schedule.T_train", &C::T_train));
    f.push_back(real("schedule.beta_start", &C::beta_start));
    f.push_back(real("schedule.beta_end", &C::beta_end));
    f.push_back(boolean("toggles.lin_rgb", &C::enable_lin_rgb));
    f.push_back(boolean("toggles.cvar", &C::enable_cvar));
    f.push_back(boolean("toggles.bg_anchor", &C::enable_bg_anchor));
    f.push_back(boolean("anchor.resample_noise", &C::anchor_resample_noise));
    f.push_back(color("target.srgb", Encoding::Srgb, &C::target_srgb));
    f.push_back(color("bg.srgb", Encoding::Srgb, &C::bg_srgb));
    f.push_back(integer("canvas.height", &C::height));
    f.push_back(integer("canvas.width", &C::width));
    f.push_back(roi_int("roi.x", &Rect::x));
    f.push_back(roi_int("roi.y", &Rect::y));
    f.push_back(roi_int("roi.w", &Rect::w));
    f.push_back(roi_int("roi.h", &Rect::h));
    f.push_back({"run.seed", [](const C& c) { return std::to_string(c.seed); },
                 [](C& c, std::string_view v) { c.seed = parse_int<std::uint64_t>("run.seed", v); }});
    f.push_back(integer("run.snapshot_every", &C::snapshot_every));
    f.push_back(loss_real("loss.w_L", &L::w_L));
    f.push_back(loss_real("loss.w_ab", &L::w_ab));
    f.push_back(loss_real("loss.tau_mean", &L::tau_mean));
    f.push_back(loss_real("loss.tau_pix", &L::tau_pix));
    f.push_back(loss_real("loss.tau_tail", &L::tau_tail));
    f.push_back(loss_real("loss.tau_max", &L::tau_max));
    f.push_back(loss_real("loss.tau_var", &L::tau_var));
    f.push_back(loss_real("loss.alpha", &L::alpha));
    f.push_back(loss_real("loss.beta", &L::beta));
    f.push_back(loss_real("loss.p", &L::p));
    f.push_back(loss_real("loss.eps", &L::eps));
    f.push_back(loss_real("loss.delta", &L::delta));
    f.push_back(loss_real("loss.lambda_mean", &L::lambda_mean));
    f.push_back(loss_real("loss.lambda_pix", &L::lambda_pix));
    f.push_back(loss_real("loss.lambda_tail", &L::lambda_tail));
    f.push_back(loss_real("loss.lambda_max", &L::lambda_max));
    f.push_back(loss_real("loss.lambda_var", &L::lambda_var));
    f.push_back(prior_color("prior.mu_cond", &P::mu_cond));
    f.push_back(prior_real("prior.sigma_cond", &P::sigma_cond));
    f.push_back(prior_color("prior.mu_uncond", &P::mu_uncond));
    f.push_back(prior_real("prior.sigma_uncond", &P::sigma_uncond));
    f.push_back(prior_real("prior.sigma_texture", &P::sigma_texture));
    f.push_back(real("codec.alpha_vae", &C::alpha_vae));
    f.push_back(real("numerics.nudge_eps", &C::nudge_eps));
    f.push_back(real("numerics.monitor_eps", &C::monitor_eps));
    f.push_back(integer("debug.inject_nonfinite_latent_step", &C::inject_nonfinite_latent_step));
    return f;
  }();
  return table;
}

std::string_view canonical(std::string_view key) {
  if (key == "lambda_guidance" || key == "guidance.lambda_guidance") {
    return "guidance.lambda_lin";
  }
  if (key == "toggles.angad") {
    return "toggles.cvar";
  }
  return key;
}

}  // namespace

void apply(GuidanceConfig& cfg, std::string_view key, std::string_view value) {
  key = canonical(trim(key));
  for (const Field& f : fields()) {
    if (f.key == key) {
      f.set(cfg, trim(value));
      return;
    }
  }
  bad(key, "unknown key");
}

void apply_assignment(GuidanceConfig& cfg, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) {
    throw std::invalid_argument("expected key=value, got '" + std::string(assignment) + "'");
  }
  apply(cfg, assignment.substr(0, eq), assignment.substr(eq + 1));
}

GuidanceConfig parse(std::string_view text, const GuidanceConfig& base) {
  GuidanceConfig cfg = base;
  std::size_t pos = 0;
  int line_no = 0;
  while (pos < text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) {
      continue;
    }
    if (line.find('=') == std::string_view::npos) {
      throw std::invalid_argument("line " + std::to_string(line_no) + ": expected key = value");
    }
    apply_assignment(cfg, line);
  }
  cfg.validate();
  return cfg;
}

GuidanceConfig load(const std::string& path, const GuidanceConfig& base) {
  std::ifstream in(path);
  if (!in) {
    throw std::invalid_argument(path + ": cannot open config file");
  }
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), base);
}

std::string serialize(const GuidanceConfig& cfg) {
  std::string out;
  for (const Field& f : fields()) {
    out += f.key + " = " + f.get(cfg) + "\n";
  }
  return out;
}

std::vector<std::string> preset_names() { return {"cvar-lrgb", "lrgb-only", "no-guidance"}; }

GuidanceConfig preset(std::string_view name) {
  GuidanceConfig cfg;
  cfg.N = 80;
  cfg.eta = 0.009;
  cfg.lambda_lin = 100.0;
  cfg.lambda_master = 0.07;
  cfg.s_cfg = 8.0;
  cfg.k = 2.0;
  cfg.f_start = 0.2;
  cfg.f_stop = 1.0;
  cfg.s = 0.2;
  cfg.target_srgb = ColorTriple::srgb(1.00, 0.53, 0.60);
  cfg.enable_bg_anchor = true;
  if (name == "cvar-lrgb") {
    cfg.enable_lin_rgb = true;
    cfg.enable_cvar = true;
  } else if (name == "lrgb-only") {
    cfg.enable_lin_rgb = true;
    cfg.enable_cvar = false;
  } else if (name == "no-guidance") {
    cfg.enable_lin_rgb = false;
    cfg.enable_cvar = false;
  } else {
    throw std::invalid_argument("preset: unknown name '" + std::string(name) + "'");
  }
  return cfg;
}

}  // namespace colorguide::config
