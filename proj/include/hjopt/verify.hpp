#pragma once

#include <string>
#include <vector>

#include <json.hpp>

namespace hjopt {

struct VerifyCheck {
  std::string check_name;
  double max_error = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

// level: "quick" (deterministic numeric cross-checks) or "full" (adds the
// Monte Carlo and refinement oracles).
std::vector<VerifyCheck> run_verification(const std::string& level);

nlohmann::json verification_report(const std::vector<VerifyCheck>& checks);

}  // namespace hjopt
