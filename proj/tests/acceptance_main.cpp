#include "mcrb/acceptance.hpp"
#include "mcrb/config.hpp"
#include "mcrb/errors.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <iostream>
#include <set>

// Runs the acceptance criteria and prints one PASS/FAIL line each. The exit
// status is zero only when the failing criteria are exactly the ones named
// with --expect-fail, so a documented shortfall keeps ctest green while any
// new failure, or an unexpected pass, still breaks it.
int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::string seed, only, expect_fail;
  unsigned workers = 0;
  app.add_option("--seed", seed, "master seed");
  app.add_option("--workers", workers, "worker threads, 0 = all cores");
  app.add_option("--only", only, "criteria to run, e.g. 1,3,10");
  app.add_option("--expect-fail", expect_fail, "criteria known to fail, e.g. 8");
  CLI11_PARSE(app, argc, argv);

  try {
    mcrb::AcceptanceOptions options;
    if (!seed.empty()) options.seed = mcrb::parse_seed("--seed", seed);
    options.workers = workers;
    std::vector<int> ids;
    if (only.empty()) {
      for (int i = 1; i <= mcrb::kCriterionCount; ++i) ids.push_back(i);
    } else {
      for (double v : mcrb::parse_grid(only)) ids.push_back(static_cast<int>(v));
    }
    std::set<int> expected;
    if (!expect_fail.empty()) {
      for (double v : mcrb::parse_grid(expect_fail)) expected.insert(static_cast<int>(v));
    }

    std::set<int> failed;
    for (int id : ids) {
      const mcrb::CriterionResult r = mcrb::run_criterion(id, options);
      std::cout << mcrb::format_result(r) << std::endl;
      if (!r.passed) failed.insert(id);
    }
    std::set<int> expected_here;
    for (int id : expected) {
      if (std::find(ids.begin(), ids.end(), id) != ids.end()) expected_here.insert(id);
    }
    std::cout << ids.size() - failed.size() << "/" << ids.size() << " criteria passed";
    if (!expected_here.empty()) std::cout << " (" << expected_here.size() << " expected failure(s))";
    std::cout << std::endl;
    if (failed != expected_here) {
      std::cout << "failures differ from the expected list" << std::endl;
      return 1;
    }
    return 0;
  } catch (const mcrb::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
