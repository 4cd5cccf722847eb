#pragma once

#include <string>
#include <vector>

namespace colorguide::selftest {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct SelftestOptions {
  // Negative control: scales the reference white X by 1.01 for the anchor
  // checks, which must then fail.
  bool perturb_white_point = false;
};

/// Color anchors, round trips, Jacobian and gradient checks, CVaR/LSE
/// oracles, the scheduler identity and the guidance window.
std::vector<CheckResult> run_selftest(const SelftestOptions& options = {});

}  // namespace colorguide::selftest
