#pragma once

// Flat `key = value` configuration with dotted keys, `#` comments and
// comma-separated triples. Numbers serialise in shortest round-trip form, so
// parse(serialize(cfg)) == cfg.

#include <string>
#include <string_view>
#include <vector>

#include "colorguide/guidance_engine.hpp"

namespace colorguide::config {

/// Applies one key to cfg. Unknown keys and malformed values throw
/// std::invalid_argument naming the key. Accepted aliases:
/// `lambda_guidance` for guidance.lambda_lin, `toggles.angad` for toggles.cvar.
void apply(engine::GuidanceConfig& cfg, std::string_view key, std::string_view value);

/// Applies `key=value` (the --set form).
void apply_assignment(engine::GuidanceConfig& cfg, std::string_view assignment);

/// Parses text on top of `base`, then validates.
engine::GuidanceConfig parse(std::string_view text, const engine::GuidanceConfig& base = {});
engine::GuidanceConfig load(const std::string& path, const engine::GuidanceConfig& base = {});

/// Every key, one per line, in a fixed order.
std::string serialize(const engine::GuidanceConfig& cfg);

std::vector<std::string> preset_names();
/// Throws std::invalid_argument for an unknown name.
engine::GuidanceConfig preset(std::string_view name);

}  // namespace colorguide::config
