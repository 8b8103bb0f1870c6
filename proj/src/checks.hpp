#pragma once

#include <json.hpp>

#include <string>
#include <vector>

namespace eoslab::checks {

struct CheckResult {
  int id = 0;
  std::string name;
  bool passed = false;
  bool slow = false;
  double runtime_s = 0.0;
  double runtime_budget_s = 0.0;
  nlohmann::json measured;  // the numbers behind the verdict
  std::string detail;       // on failure: which clause broke

  std::string to_line() const;
};

/// Runs the acceptance checks whose id is listed (empty = all 12), in order.
/// `verbose` streams one line per finished check to stdout.
std::vector<CheckResult> run_all(const std::vector<int>& only = {},
                                 bool verbose = true);

nlohmann::json to_json(const std::vector<CheckResult>& results);

}  // namespace eoslab::checks
