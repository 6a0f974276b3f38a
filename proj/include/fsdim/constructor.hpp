#pragma once

// The staged construction: rounding eta_m, candidate sets sigma_m and
// sigma*_m, per-step selection minimizing A_m over G-filtered blocks,
// substage termination predicates and the requirement monitors.

#include "fsdim/base_arith.hpp"
#include "fsdim/blockstats.hpp"
#include "fsdim/discrepancy.hpp"
#include "fsdim/expsum.hpp"
#include "fsdim/schedule.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace fsdim {

struct EtaG {
  mpz_class g;
  ExactFraction eta;
};

/// g = ceil(lambda u(m)^{a_m}), eta = g u(m)^{-a_m}. Throws std::domain_error
/// when eta reaches 1.
EtaG eta_g(const ExactFraction& lambda, std::size_t m, const Schedule& sched);

/// eta_m(lambda) + sum_i c_i u(m)^{-(a_m+i)}. `block` is over base u(m) with
/// length b_m - a_m - 2 and digits below `alphabet` (default u(m)).
ExactFraction sigma_element(const ExactFraction& lambda, std::size_t m, const Schedule& sched,
                            const DigitWord& block, std::optional<Base> alphabet = std::nullopt);

/// A_m on the candidates of one step. Residues u(h)^{<m;u(h)>} x mod D are
/// split into a shared part from eta and a per-block part, so each candidate
/// costs one multiplication per base before its orbit is walked.
class StepObjective {
 public:
  StepObjective(const ExactFraction& prev, std::size_t m, const Schedule& sched,
                std::optional<long> t_cap = std::nullopt);
  double operator()(const DigitWord& block) const;
  /// True when no earlier base is non-equivalent to u(m), so A_m is 0.
  bool trivial() const noexcept { return terms_.empty(); }

 private:
  struct Term {
    Base r;
    std::size_t multiplicity;
    std::uint64_t length;
    mpz_class shared;  // r^{lo} G mod D
    mpz_class scale;   // r^{lo} mod D
  };
  Base u_;
  long t_max_;
  mpz_class den_;
  std::vector<Term> terms_;
};

enum class SearchMode { exhaustive, sampled };

/// Objective injected in place of A_m, evaluated on the candidate point.
using Objective = std::function<double(const ExactFraction& x, std::size_t m, const Schedule& sched)>;

struct SelectOptions {
  SearchMode mode = SearchMode::sampled;
  std::size_t samples = 64;
  std::uint64_t seed = 0;
  std::uint64_t exhaustive_limit = std::uint64_t{1} << 20;
  std::size_t max_attempts = 1000;
  std::optional<long> t_cap;
  Objective objective;  // empty: A_m
};

struct StepChoice {
  std::size_t m = 0;
  int criterion = 2;
  Base u = 2;
  Base alphabet = 2;
  std::uint64_t a = 0, b = 0;
  ExactFraction xi;
  DigitWord digit_block{2};
  double objective = 0.0;
  double mean_objective = 0.0;
  std::size_t candidates_examined = 0;
  bool filter_passed = true;
};

struct NoCandidate : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Criterion 1 (alphabet p(u(m))) or 2 (alphabet u(m)): the G-filtered block
/// minimizing the objective, ties to the lexicographically smallest block.
/// `p` is the restricted alphabet, used only by criterion 1; an alphabet of
/// size 1 admits the zero block alone.
StepChoice select_step(const ExactFraction& prev, std::size_t m, const Schedule& sched, int criterion, Base p,
                       const DiscrepancyParams& disc, const SelectOptions& options = {});

/// Largest delta <= 1/e with A (-delta ln delta) <= eps l ln(base), A = base^l:
/// distributions on base^l points within delta pointwise have normalized
/// l-block entropies within eps.
double delta_k(double eps, Base base, unsigned l);

struct CheckVerdict {
  std::string name;
  bool pass = false;
  bool vacuous = false;
  double value = 0.0;
  double threshold = 0.0;
};

struct SubstageReport {
  std::size_t m = 0;
  std::vector<CheckVerdict> checks;
  bool done() const;
};

struct ConstructionParams {
  SelectOptions select;
  DiscrepancyParams disc;
  CalibrationOptions calibration;
  unsigned l_cap = 4;
  /// Replaces every 2^{-k}-type threshold; nullopt keeps them.
  std::optional<double> tolerance = 0.1;
  /// Digit floor per substage, F - I + 1.
  std::uint64_t min_substage_digits = 20000;
  /// Weyl check: |average| < gamma/2 for 0 < |t| <= t; nullopt uses the
  /// certificate thresholds at 2^{-(k+1)} extended to l_cap blocks.
  std::optional<long> weyl_t = 8;
  double weyl_gamma = 0.5;
  /// Stand-ins for L, L' and M.
  double L = 0.0;
  double L_prime = 0.0;
  std::size_t M = 0;
  std::size_t step_budget = 5000;
  /// Extra terms of u' checked by the good-sequence condition.
  std::size_t good_horizon = 4;
  /// Called after every step with its termination report.
  std::function<void(const StepChoice&, const SubstageReport&)> on_step;
};

struct StageRecord {
  std::size_t k = 0;
  Base v = 2, v_star = 2;
  std::size_t first_step = 0;
  std::size_t P1 = 0, P2 = 0;
  bool budget_exhausted = false;
  /// Entropies of X(k) at F_k^1 and F_k^2 for l = 1..l_cap.
  std::vector<double> entropy_f1, entropy_f2;
  std::vector<SubstageReport> reports;  // one per step of the stage
};

struct RequirementVerdict {
  std::string name;  // F, S1, S2, R, T1, T2
  std::size_t k = 0;
  unsigned l_max = 0;
  std::uint64_t n_from = 0, n_to = 0;
  double deviation = 0.0;
  double threshold = 0.0;
  bool pass = false;
  bool vacuous = false;
  bool unavailable = false;
  std::string note;
};

struct ConstructionTrace {
  StagePlan plan;
  Schedule sched;
  ConstructionParams params;
  std::vector<StepChoice> steps;
  std::vector<StageRecord> stages;
  std::vector<RequirementVerdict> monitors;
  bool complete = true;
  /// Steps whose stability gap guard failed.
  std::vector<std::size_t> unstable_steps;

  ExactFraction xi() const { return steps.empty() ? ExactFraction() : steps.back().xi; }
  const StageRecord& stage(std::size_t k) const { return stages.at(k - 1); }
};

/// Runtime view of the construction shared by the termination predicates.
class ConstructionState;

SubstageReport first_substage_done(const ConstructionState& state, std::size_t k, const ConstructionParams& params);
SubstageReport second_substage_done(const ConstructionState& state, std::size_t k, const ConstructionParams& params);

/// Runs stages 1..K. Each stage's q must be set in the plan; a missing
/// v(k+1) makes the look-ahead checks vacuous.
ConstructionTrace run_construction(const StagePlan& plan, std::size_t stages, ConstructionParams params);

/// Monitors for stage k computed from the digits of the trace's final xi.
std::vector<RequirementVerdict> check_requirements(const ConstructionTrace& trace, std::size_t k);

/// sum_{i>m} 2 u(i)^{-a_i} < u(m)^{-(b_m-2)} over the recorded steps.
bool stability_gap_holds(const Schedule& sched, std::size_t m, std::size_t last);

/// Index of the first step whose block differs from the final xi's digits, or 0.
std::size_t first_unstable_block(const ConstructionTrace& trace);

/// Digits of the final xi in base v up to the last digit fixed in that base.
DigitWord stage_digits(const ConstructionTrace& trace, Base v);

void write_trace_csv(std::ostream& out, const ConstructionTrace& trace);
void write_monitor_json(std::ostream& out, const ConstructionTrace& trace);
/// trace.csv, monitors.json and digits_base<v>.txt for every stage base.
void export_trace(const std::filesystem::path& dir, const ConstructionTrace& trace);

// ---------------------------------------------------------------------------

class ConstructionState {
 public:
  ConstructionState(const StagePlan& plan, const ConstructionParams& params);

  const StagePlan& plan() const noexcept { return plan_; }
  const Schedule& sched() const noexcept { return sched_; }
  const std::vector<StepChoice>& steps() const noexcept { return steps_; }
  const ExactFraction& xi() const noexcept { return xi_; }

  /// Opens stage k with base v(k): loads X(k) up to a_m of the next step.
  void begin_stage(std::size_t k);
  /// Selects and records step m = steps().size() + 1 under the criterion.
  const StepChoice& step(int criterion);

  std::size_t stage() const noexcept { return k_; }
  std::size_t stage_first_step() const noexcept { return first_step_; }
  /// Last step of the first substage (0 while it runs).
  std::size_t p1() const noexcept { return p1_; }
  void close_first_substage() { p1_ = steps_.size(); }

  /// X(k) prefix fixed so far: exact digits of xi in base v(k).
  const StreamingBlockCounter& counter() const { return *counter_; }
  std::uint64_t digits_fixed() const noexcept { return counter_ ? counter_->length() : 0; }
  /// Weyl averages of xi in base v(k) over the fixed digits, 0 < t <= t_max.
  std::vector<Complex> weyl_averages(long t_max) const;

  Schedule& mutable_sched() noexcept { return sched_; }
  std::vector<StepChoice>& mutable_steps() noexcept { return steps_; }

 private:
  void push_digits(std::span<const Digit> digits);

  StagePlan plan_;
  ConstructionParams params_;
  Schedule sched_;
  std::vector<StepChoice> steps_;
  ExactFraction xi_;
  std::size_t k_ = 0;
  std::size_t first_step_ = 0;
  std::size_t p1_ = 0;
  Base v_ = 2;
  std::optional<StreamingBlockCounter> counter_;
  // Weyl sums: points j <= settled_ are final; later ones wait for more digits.
  long weyl_t_ = 0;
  std::vector<Complex> weyl_sums_;
  std::vector<Digit> pending_;
  std::uint64_t settled_ = 0;
};

}  // namespace fsdim
