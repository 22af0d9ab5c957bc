#pragma once

#include <string>
#include <vector>

namespace rissense {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

struct ValidationOptions {
  std::vector<int> only;        // criterion ids to run; empty runs all ten
  std::string figure_dir;       // where the figure suite writes its outputs; empty skips writing
  bool emit_plots = true;
  bool verbose = false;         // print per-check details to stderr
};

/// Runs one acceptance criterion (1 to 10). Throws std::invalid_argument for other ids.
CriterionResult run_criterion(int id, const ValidationOptions& opt);

/// Runs the selected criteria in order.
std::vector<CriterionResult> run_validation(const ValidationOptions& opt);

/// "PASS  [n] name: detail (x.x s)" style summary line.
std::string format_result(const CriterionResult& r);

}  // namespace rissense
