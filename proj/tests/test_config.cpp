#include <gtest/gtest.h>

#include <fstream>
#include <random>
#include <sstream>

#include "colorguide/config.hpp"

namespace cfgio = colorguide::config;
using colorguide::engine::GuidanceConfig;

namespace {

std::string golden(const std::string& name) {
  std::ifstream f(std::string(COLORGUIDE_GOLDEN_DIR) + "/" + name);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Presets, SerializedFormMatchesGolden) {
  for (const std::string name : {"cvar-lrgb", "lrgb-only", "no-guidance"}) {
    EXPECT_EQ(cfgio::serialize(cfgio::preset(name)), golden("preset_" + name + ".cfg")) << name;
  }
}

TEST(Presets, PublishedRunParameters) {
  for (const std::string name : {"cvar-lrgb", "lrgb-only", "no-guidance"}) {
    const GuidanceConfig c = cfgio::preset(name);
    EXPECT_EQ(c.N, 80);
    EXPECT_EQ(c.eta, 0.009);
    EXPECT_EQ(c.lambda_lin, 100.0);
    EXPECT_EQ(c.lambda_master, 0.07);
    EXPECT_EQ(c.s_cfg, 8.0);
    EXPECT_EQ(c.k, 2.0);
    EXPECT_EQ(c.f_start, 0.2);
    EXPECT_EQ(c.f_stop, 1.0);
    EXPECT_TRUE(c.enable_bg_anchor);
  }
  EXPECT_TRUE(cfgio::preset("cvar-lrgb").enable_lin_rgb);
  EXPECT_TRUE(cfgio::preset("cvar-lrgb").enable_cvar);
  EXPECT_TRUE(cfgio::preset("lrgb-only").enable_lin_rgb);
  EXPECT_FALSE(cfgio::preset("lrgb-only").enable_cvar);
  EXPECT_FALSE(cfgio::preset("no-guidance").enable_lin_rgb);
  EXPECT_FALSE(cfgio::preset("no-guidance").enable_cvar);
  EXPECT_THROW(cfgio::preset("nope"), std::invalid_argument);
}

TEST(Parse, RoundTripForPresetsAndRandomConfigs) {
  for (const auto& name : cfgio::preset_names()) {
    const GuidanceConfig c = cfgio::preset(name);
    EXPECT_EQ(cfgio::parse(cfgio::serialize(c)), c) << name;
  }
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    GuidanceConfig c;
    c.eta = u(rng) * 0.1;
    c.lambda_master = u(rng);
    c.lambda_lin = 1000 * u(rng);
    c.s_cfg = 20 * u(rng);
    c.N = 1 + static_cast<int>(rng() % 200);
    c.f_start = 0.5 * u(rng);
    c.f_stop = 0.5 + 0.5 * u(rng);
    c.s = 0.99 * u(rng);
    c.k = 0.1 + u(rng);
    c.enable_lin_rgb = rng() % 2;
    c.enable_cvar = rng() % 2;
    c.enable_bg_anchor = rng() % 2;
    c.target_srgb = colorguide::ColorTriple::srgb(u(rng), u(rng), u(rng));
    c.seed = rng();
    c.loss_hp.alpha = 0.01 + 0.98 * u(rng);
    c.loss_hp.tau_tail = 10 * u(rng);
    c.prior.sigma_cond = 0.001 + u(rng);
    c.nudge_eps = 1e-9 + u(rng) * 1e-6;
    EXPECT_EQ(cfgio::parse(cfgio::serialize(c)), c) << cfgio::serialize(c);
  }
}

TEST(Parse, CommentsWhitespaceAndAliases) {
  const GuidanceConfig c = cfgio::parse(
      "# comment\n"
      "   guidance.eta = 0.02   \n"
      "\n"
      "lambda_guidance=50\n"
      "toggles.angad = false\n"
      "target.srgb = 0.1, 0.2,0.3\n");
  EXPECT_EQ(c.eta, 0.02);
  EXPECT_EQ(c.lambda_lin, 50.0);
  EXPECT_FALSE(c.enable_cvar);
  EXPECT_EQ(c.target_srgb, colorguide::ColorTriple::srgb(0.1, 0.2, 0.3));
}

TEST(Parse, LaterValuesOverrideEarlierOnes) {
  GuidanceConfig base = cfgio::preset("cvar-lrgb");
  GuidanceConfig c = cfgio::parse("guidance.eta = 0.5\n", base);
  cfgio::apply_assignment(c, "guidance.eta=0.25");
  EXPECT_EQ(c.eta, 0.25);
  EXPECT_EQ(c.lambda_master, 0.07);
}

TEST(Parse, RejectsWithKeyNamed) {
  auto message = [](const std::string& text) {
    try {
      cfgio::parse(text);
    } catch (const std::invalid_argument& e) {
      return std::string(e.what());
    }
    return std::string("<no error>");
  };
  EXPECT_NE(message("guidance.eta = -1\n").find("guidance.eta"), std::string::npos);
  EXPECT_NE(message("schedule.f_start = 0.9\nschedule.f_stop = 0.5\n").find("schedule.f_start"), std::string::npos);
  EXPECT_NE(message("roi.x = 60\n").find("roi"), std::string::npos);
  EXPECT_NE(message("bogus.key = 1\n").find("bogus.key"), std::string::npos);
  EXPECT_NE(message("guidance.eta = fast\n").find("guidance.eta"), std::string::npos);
  EXPECT_NE(message("toggles.cvar = maybe\n").find("toggles.cvar"), std::string::npos);
  EXPECT_NE(message("no equals sign\n"), "<no error>");
}
