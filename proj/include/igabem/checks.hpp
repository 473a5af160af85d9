#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace igabem {

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string details;
};

/// Names of the executable property suites.
std::vector<std::string> check_names();

/// Runs one property suite with the given seed.
CheckResult run_check(const std::string& name, uint64_t seed);

/// Runs every suite; stops at nothing, reports each.
std::vector<CheckResult> run_all_checks(uint64_t seed);

}  // namespace igabem
