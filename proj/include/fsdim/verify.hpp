#pragma once

// Property suites run by `fsdim verify`: each compares a library routine
// against an independent oracle on seeded random inputs.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace fsdim {

struct SuiteCheck {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct SuiteReport {
  std::string suite;
  std::uint64_t seed = 0;
  std::size_t samples = 0;
  std::vector<SuiteCheck> checks;

  bool pass() const;
};

/// viete, sin-bound, am-oracle, discrepancy-oracle, weyl-certificate.
const std::vector<std::string>& suite_names();

/// samples = 0 picks the suite's default size. Throws std::invalid_argument
/// for an unknown suite.
SuiteReport run_suite(std::string_view name, std::uint64_t seed = 0, std::size_t samples = 0);

}  // namespace fsdim
