#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace gflowlab {

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
  bool informational = false;  // reported but not counted as a failure
};

// Exhaustive structural and exact-oracle checks on small enumerable
// instances. `progress` (optional) receives one line per check as it ends.
std::vector<CheckResult> run_invariant_checks(std::ostream* progress = nullptr);

}  // namespace gflowlab
