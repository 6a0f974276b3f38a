#pragma once

// Interval discrepancy of point sets, the low-discrepancy word test behind
// the sets G_b^{n'}, rejection sampling of their members and Monte Carlo
// calibration of the per-base constants C_b.

#include "fsdim/base_arith.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <stdexcept>
#include <vector>

namespace fsdim {

struct BaseConstants {
  double C = 0.0;
  std::size_t N = 50;
};

struct DiscrepancyParams {
  std::map<Base, BaseConstants> per_base;
  unsigned z_len_cap = 6;

  bool has_base(Base b) const { return per_base.count(b) != 0; }
  /// Throws std::out_of_range when b has no constants.
  const BaseConstants& for_base(Base b) const;
  /// C > 0, N >= 1 for every entry; z_len_cap >= 1.
  void validate() const;
};

/// sup over open intervals (a1,a2) in [0,1] of |#{y_i in (a1,a2)}/n - (a2-a1)|,
/// from one pass over the sorted points.
double star_discrepancy(std::span<const double> points);
double star_discrepancy(std::span<const ExactFraction> points);

/// Shift values 0.w_j w_{j+1}... w_n for j = 1..n, truncated at the word end.
std::vector<double> shift_points(const DigitWord& w);

/// Smallest C for which w passes at threshold N, i.e. the maximum over
/// 1 <= |z| <= min(|w|-N, cap) and N <= n <= |w|-|z| of
/// |N(z,w_1^n)/n - b^{-|z|}| * sqrt(n / ln ln n). Infinite when some checked
/// n has ln ln n <= 0; 0 when nothing is checked. Throws BlockLimitExceeded
/// when b^|z| does not fit in 64 bits.
double discrepancy_ratio(const DigitWord& w, std::size_t N, unsigned z_len_cap);

/// Strict inequality for all (z, n) in range. Throws std::invalid_argument
/// when |w| <= N_b.
bool low_discrepancy_test(const DigitWord& w, const DiscrepancyParams& params);

/// Membership in G_b^{|w|}: the quantifier range is empty when |w| <= N_b,
/// so such words belong vacuously.
bool in_good_set(const DigitWord& w, const DiscrepancyParams& params);

struct NoGoodString : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SampleResult {
  DigitWord word;
  std::size_t attempts;
};

/// Uniform words of the given length, drawn with seeds derived from `seed`
/// and the attempt index, until one lies in G_b.
SampleResult sample_good_string(Base b, std::size_t length, std::uint64_t seed, const DiscrepancyParams& params,
                                std::size_t max_attempts = 1000);

struct CalibrationOptions {
  std::size_t N = 50;
  std::size_t length = 2000;
  std::size_t samples = 1000;
  double target_pass_rate = 0.6;
  std::uint64_t seed = 0;
  unsigned z_len_cap = 6;
};

struct CalibrationResult {
  BaseConstants constants;
  double pass_rate;  // on the calibration sample
};

/// Smallest C passing at least target_pass_rate of uniform random words.
CalibrationResult calibrate_base(Base b, const CalibrationOptions& options = {});

/// Calibrates any base in `bases` that has no constants yet.
void ensure_calibrated(DiscrepancyParams& params, std::span<const Base> bases, const CalibrationOptions& options = {});

/// Plain-text config, section [discrepancy] with keys C_<b>, N_<b> and
/// z_len_cap. Pairs may be separated by newlines or commas.
DiscrepancyParams read_discrepancy_config(std::istream& in);
DiscrepancyParams load_discrepancy_config(const std::filesystem::path& path);
void write_discrepancy_config(std::ostream& out, const DiscrepancyParams& params);
void save_discrepancy_config(const std::filesystem::path& path, const DiscrepancyParams& params);

}  // namespace fsdim
