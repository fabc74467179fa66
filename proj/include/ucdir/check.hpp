#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace ucdir {

struct PropertyResult {
  std::string name;
  double worst = 0.0;      // measured worst-case error or violation
  double tolerance = 0.0;  // pass iff worst < tolerance
  std::size_t trials = 0;
  bool pass = false;
  std::string detail;
};

struct CheckOptions {
  std::uint64_t seed = 0;
  std::size_t trials = 100;  // permutation-invariance trials
  std::size_t grad_trials = 5;
  bool grad_only = false;
};

/// Runs the built-in property suite: gradient checks for every loss,
/// centroid-order invariance, entropy bounds and reduction identities.
std::vector<PropertyResult> run_property_suite(const CheckOptions& options);

}  // namespace ucdir
