#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace mcrb {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool passed = false;
  std::string detail;
};

struct AcceptanceOptions {
  std::uint64_t seed = 20240601;
  unsigned workers = 0;
  /// Criteria to run (all ten when empty).
  std::vector<int> only;
};

inline constexpr int kCriterionCount = 10;

CriterionResult run_criterion(int id, const AcceptanceOptions& options);
std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& options);

/// "PASS [3] name: detail".
std::string format_result(const CriterionResult& r);

}  // namespace mcrb
