#include <algorithm>
#include <cstdlib>
#include <iostream>
#include <string>

#include "rissense/validation.hpp"

// Runs every acceptance criterion and prints one PASS/FAIL line per criterion.
// Usage: rissense_acceptance [figure-output-dir] [criterion ids...]
int main(int argc, char** argv) {
  rissense::ValidationOptions opt;
  opt.verbose = std::getenv("RISSENSE_VERBOSE") != nullptr;
  if (argc > 1) {
    opt.figure_dir = argv[1];
  }
  for (int i = 2; i < argc; ++i) {
    opt.only.push_back(std::stoi(argv[i]));
  }
  int failed = 0;
  for (int id = 1; id <= 10; ++id) {
    if (!opt.only.empty() && std::find(opt.only.begin(), opt.only.end(), id) == opt.only.end()) {
      continue;
    }
    const rissense::CriterionResult r = rissense::run_criterion(id, opt);
    std::cout << rissense::format_result(r) << std::endl;
    failed += r.passed ? 0 : 1;
  }
  std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed")
            << std::endl;
  return failed == 0 ? 0 : 1;
}
