#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

namespace ellpos {

struct CheckOptions {
  std::uint64_t seed = 0;
  int workers = 0;
  /// Multiplies every tolerance; values below 1 tighten the suite (diagnostic mode).
  double tolerance_scale = 1.0;
  /// Multiplies Monte Carlo sample budgets.
  double budget_scale = 1.0;
  /// Criterion ids to run ("A1".."A9"); empty runs all.
  std::vector<std::string> only;
  /// A9 reruns A1-A8 with another worker count and compares the reports.
  bool determinism = true;
};

struct CriterionResult {
  std::string id;
  std::string title;
  bool passed = false;
  std::string summary;  // one line, human readable
  nlohmann::ordered_json details;
};

struct CheckReport {
  std::vector<CriterionResult> criteria;
  bool passed() const;
};

using CriterionCallback = std::function<void(const CriterionResult&)>;

CheckReport run_all_checks(const CheckOptions& opts, const CriterionCallback& on_result = {});

/// The timestamp ("generated_at") is the only field that may differ between runs with equal options.
nlohmann::ordered_json to_json(const CheckReport& report, const CheckOptions& opts, bool with_timestamp = true);

}  // namespace ellpos
