#pragma once

// Schmidt's step schedule <m>, <m;r> = ceil(<m>/ln r), a_m and b_m; base
// equivalence r ~ s; the representative sequence r_k; stage plans with
// target dimensions q, p(b), v(k), v*(k); beta_m and good-sequence checks.

#include "fsdim/base_arith.hpp"
#include "fsdim/discrepancy.hpp"
#include "fsdim/ratio.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace fsdim {

struct PrimitiveRoot {
  Base root;
  unsigned exponent;
};

/// Smallest t >= 2 with t^a = b for some a; a is then the largest such.
PrimitiveRoot primitive_root(Base b);

/// r ~ s: r and s are powers of a common integer.
bool equivalent(Base r, Base s);

/// i-th (0-based) integer >= 2 that is not a perfect power: 2, 3, 5, 6, 7, 10, ...
Base non_perfect_power(std::size_t i);

/// Representative sequence: r_k is the (nu_2(k))-th non-perfect power, so
/// r_1 = 2, odd k give 2, consecutive terms differ and the i-th
/// representative has density 2^{-(i+1)}.
Base r_seq(std::size_t k);

/// <m> = ceil(e^{sqrt m} + 2 u(1) m^3).
struct ExponentialGrowth {};
/// <m> = c0 + c1 m^2 for m >= 1.
struct ScaledGrowth {
  std::uint64_t c0 = 8;
  std::uint64_t c1 = 4;
};
/// <m> = values[m-1] for 1 <= m <= values.size().
struct TableGrowth {
  std::vector<std::uint64_t> values;
};
using Growth = std::variant<ExponentialGrowth, ScaledGrowth, TableGrowth>;

std::string describe(const Growth& g);

/// ceil(value / ln r), exact: the float quotient is verified against a
/// 256-bit ln r whenever it lies near an integer.
std::uint64_t ceil_div_ln(std::uint64_t value, Base r);

class Schedule {
 public:
  explicit Schedule(Growth growth = ScaledGrowth{}, std::vector<Base> u = {});

  const Growth& growth() const noexcept { return growth_; }
  const std::vector<Base>& bases() const noexcept { return u_; }
  std::size_t size() const noexcept { return u_.size(); }
  /// u(m), 1-based.
  Base u(std::size_t m) const;
  void push(Base b);

  /// <m>; <0> = 0. ExponentialGrowth needs u(1).
  std::uint64_t angle(std::size_t m) const;
  /// <m;r>.
  std::uint64_t angle_base(std::size_t m, Base r) const;
  /// a_m = <m;u(m)>, b_m = <m+1;u(m)>.
  std::uint64_t a(std::size_t m) const { return angle_base(m, u(m)); }
  std::uint64_t b(std::size_t m) const { return angle_base(m + 1, u(m)); }
  /// b_m - a_m - 2, the number of digits step m fixes.
  std::uint64_t block_length(std::size_t m) const;

 private:
  Growth growth_;
  std::vector<Base> u_;
};

struct PlanError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Symmetric table of alpha(r,s) in (0, 1/2]; missing entries read as 1/2.
class AlphaTable {
 public:
  static constexpr double kCap = 0.5;

  double get(Base r, Base s) const;
  void set(Base r, Base s, double value);
  const std::map<std::pair<Base, Base>, double>& entries() const noexcept { return entries_; }

 private:
  std::map<std::pair<Base, Base>, double> entries_;
};

/// Target dimensions per ~-class plus the schedule growth and alpha table.
///
/// Plan file lines:  q <base> <num>/<den>,  growth exponential | growth scaled c0 c1
/// | growth table v1 v2 ...,  alpha <r> <s> <value>.  '#' starts a comment.
class StagePlan {
 public:
  /// q must lie in (0,1]; conflicting values within one class are rejected.
  void set_q(Base b, Ratio q);
  bool has_q(Base b) const;
  /// q_b; throws PlanError when the class of b has no target.
  Ratio q(Base b) const;
  const std::map<Base, Ratio>& targets() const noexcept { return q_; }

  /// floor(b^{q_b}) by integer root extraction.
  Base p_of(Base b) const;

  Base r(std::size_t k) const { return r_seq(k); }
  /// q_{r_k} = e/d in lowest terms.
  std::uint64_t d(std::size_t k) const { return q(r(k)).den(); }
  std::uint64_t e(std::size_t k) const { return q(r(k)).num(); }
  /// v(k) = r_k^{d}, v*(k) = r_k^{e}.
  Base v(std::size_t k) const;
  Base v_star(std::size_t k) const;
  bool stage_defined(std::size_t k) const { return k >= 1 && has_q(r(k)); }

  Growth growth = ScaledGrowth{};
  AlphaTable alpha;

  static StagePlan parse(std::istream& in);
  static StagePlan load(const std::filesystem::path& path);
  void write(std::ostream& out) const;

 private:
  std::map<Base, Ratio> q_;  // keyed by primitive root
};

/// min({alpha(u(i),u(j)) : i <= j <= m, u(i) !~ u(j)} u {1/2}).
double beta_m(const Schedule& sched, const AlphaTable& alpha, std::size_t m);
inline double beta_prime_m(const Schedule& sched, const AlphaTable& alpha, std::size_t m) {
  return beta_m(sched, alpha, m) / 2.0;
}

struct GoodSequenceRow {
  std::size_t m;
  double product_lower_bound;  // condition 1 (1.0 for m = 1)
  double beta;                 // condition 2
  bool cond1, cond2, cond3, cond4;
  bool cond4_vacuous;
  std::uint64_t gap;       // b_m - a_m
  std::size_t threshold;   // max(N_u, N_p) used by condition 4
  bool all() const { return cond1 && cond2 && cond3 && cond4; }
};

struct GoodSequenceReport {
  std::vector<GoodSequenceRow> rows;
  bool all_pass() const;
  /// Index of the first failing m, or 0.
  std::size_t first_failure() const;
};

/// Conditions 1-4 for m = 1..m_max. Condition 1's infinite product is
/// bounded below by tail_terms exact factors times the sin lower-bound tail.
/// p(u(m)) comes from `plan` when the class has a target and is u(m)
/// otherwise. N thresholds come from `disc` (default N when absent).
GoodSequenceReport validate_good_sequence(const Schedule& sched, const AlphaTable& alpha, const StagePlan& plan,
                                          const DiscrepancyParams& disc, std::size_t m_max,
                                          std::size_t tail_terms = 60);

}  // namespace fsdim
