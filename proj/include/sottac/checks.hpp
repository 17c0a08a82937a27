#pragma once

// Invariant suite run by `sottac check` and by the acceptance tests.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace sottac::checks {

struct CheckOptions {
  /// Policy parameter dimension for TinyMdp instances (even, 2..32).
  std::size_t d = 8;
  int trials = 10;
  /// Random probes for the curvature-sign check.
  int probes = 1000;
  std::uint64_t seed = 20240611;
  int horizon = 4;
  double gamma = 0.9;
};

struct CheckResult {
  std::string name;
  bool passed = false;
  /// Worst observed value against its tolerance, plus the step sizes used.
  std::string detail;
  double seconds = 0.0;
};

const std::vector<std::string>& check_names();
bool is_known_check(std::string_view name);

/// Throws ContractViolation for unknown names or invalid options.
CheckResult run_check(std::string_view name, const CheckOptions& options);

/// Runs `only` (all checks when empty) in the listed order.
std::vector<CheckResult> run_checks(const CheckOptions& options,
                                    const std::vector<std::string>& only = {});

}  // namespace sottac::checks
