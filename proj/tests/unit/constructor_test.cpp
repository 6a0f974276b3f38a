#include "fsdim/constructor.hpp"
#include "fsdim/digit_file.hpp"
#include "fsdim/rng.hpp"

#include "json.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numeric>
#include <sstream>

#include <unistd.h>

using namespace fsdim;

namespace {

// <1> = 2, <2> = 4 in base 2: a_1 = 3, b_1 = 6.
Schedule tiny_schedule() { return Schedule(TableGrowth{{2, 4}}, {2}); }

// u = (2, 3): a_2 = 8, b_2 = 15, block length 5 over base 3.
Schedule two_base_schedule() { return Schedule(TableGrowth{{4, 8, 16}}, {2, 3}); }

DiscrepancyParams loose_disc() {
  DiscrepancyParams d;
  for (Base b : {2u, 3u, 4u, 5u, 9u}) d.per_base[b] = BaseConstants{1.0, 50};
  return d;
}

std::vector<Digit> to_digits(std::uint64_t idx, Base b, std::size_t len) {
  std::vector<Digit> d(len, 0);
  for (std::size_t i = len; i-- > 0;) {
    d[i] = static_cast<Digit>(idx % b);
    idx /= b;
  }
  return d;
}

const ConstructionTrace& single_stage_trace() {
  static const ConstructionTrace trace = [] {
    StagePlan plan;
    plan.set_q(2, Ratio(1, 2));
    return run_construction(plan, 1, ConstructionParams{});
  }();
  return trace;
}

double entropy_of(const std::vector<double>& p) {
  double h = 0.0;
  for (double x : p) {
    if (x > 0.0) h -= x * std::log(x);
  }
  return h;
}

}  // namespace

TEST(EtaG, RoundsUpToTheGrid) {
  const Schedule s = tiny_schedule();
  ASSERT_EQ(s.a(1), 3u);
  ASSERT_EQ(s.b(1), 6u);
  const EtaG zero = eta_g(ExactFraction(), 1, s);
  EXPECT_EQ(zero.g, 0);
  EXPECT_TRUE(zero.eta.is_zero());
  const EtaG third = eta_g(ExactFraction(1, 3), 1, s);
  EXPECT_EQ(third.g, 3);
  EXPECT_EQ(third.eta, ExactFraction(3, 8));
  const EtaG half = eta_g(ExactFraction(1, 2), 1, s);
  EXPECT_EQ(half.g, 4);
  EXPECT_EQ(half.eta, ExactFraction(1, 2));
}

TEST(EtaG, IsSmallestGridPointNotBelowLambda) {
  const Schedule s(ScaledGrowth{}, {3, 3});
  CounterRng rng(7);
  for (int i = 0; i < 200; ++i) {
    const mpz_class den = 1000003;
    const ExactFraction lambda(mpz_class(static_cast<unsigned long>(rng.below(1000000))), den);
    const EtaG eg = eta_g(lambda, 2, s);
    EXPECT_GE(eg.eta, lambda);
    const mpq_class gap = mpq_class(eg.eta.numerator(), eg.eta.denominator()) -
                          mpq_class(lambda.numerator(), lambda.denominator());
    EXPECT_LT(gap, mpq_class(mpz_class(1), power(3, s.a(2))));
  }
}

TEST(EtaG, ThrowsWhenReachingOne) {
  EXPECT_THROW(eta_g(ExactFraction(255, 256), 1, tiny_schedule()), std::domain_error);
}

TEST(SigmaElement, ValueOfBlock) {
  const Schedule s(TableGrowth{{2, 5}}, {2});
  ASSERT_EQ(s.a(1), 3u);
  ASSERT_EQ(s.b(1), 8u);
  EXPECT_EQ(sigma_element(ExactFraction(), 1, s, DigitWord::from_string(2, "101")), ExactFraction(5, 64));
  const ExactFraction lambda(1, 3);
  EXPECT_EQ(sigma_element(lambda, 1, s, DigitWord::from_string(2, "000")), eta_g(lambda, 1, s).eta);
}

TEST(SigmaElement, StaysInsideTheEtaCylinder) {
  const Schedule s(ScaledGrowth{}, {2, 3});
  const ExactFraction lambda(5, 17);
  const std::size_t len = s.block_length(2);
  const DigitWord top(3, std::vector<Digit>(len, 2));
  const ExactFraction hi = sigma_element(lambda, 2, s, top);
  const ExactFraction eta = eta_g(lambda, 2, s).eta;
  const mpq_class width = mpq_class(hi.numerator(), hi.denominator()) - mpq_class(eta.numerator(), eta.denominator());
  EXPECT_GT(width, 0);
  EXPECT_LT(width, mpq_class(mpz_class(1), power(3, s.a(2))));
  const DigitWord head = digits_prefix(eta, 3, s.a(2));
  EXPECT_EQ(digits_prefix(hi, 3, s.a(2)), head);
  EXPECT_EQ(digits_prefix(hi, 3, s.b(2)).slice(s.a(2), len), top);
}

TEST(SigmaElement, RejectsBadBlocks) {
  const Schedule s(TableGrowth{{2, 5}}, {2});
  EXPECT_THROW(sigma_element(ExactFraction(), 1, s, DigitWord::from_string(3, "101")), std::invalid_argument);
  EXPECT_THROW(sigma_element(ExactFraction(), 1, s, DigitWord::from_string(2, "10")), std::invalid_argument);
  EXPECT_THROW(sigma_element(ExactFraction(), 1, s, DigitWord::from_string(2, "101"), Base{1}), std::invalid_argument);
  EXPECT_NO_THROW(sigma_element(ExactFraction(), 1, s, DigitWord::from_string(2, "000"), Base{1}));
}

TEST(StepObjective, MatchesAmOnCandidates) {
  const Schedule s(ScaledGrowth{}, {2, 3, 2, 5, 3});
  const ExactFraction prev(12345, 99991);
  const std::size_t m = 5;
  const StepObjective obj(prev, m, s);
  EXPECT_FALSE(obj.trivial());
  CounterRng rng(3);
  for (int i = 0; i < 5; ++i) {
    std::vector<Digit> d(s.block_length(m));
    for (auto& x : d) x = static_cast<Digit>(rng.below(3));
    const DigitWord block(3, d);
    const ExactFraction x = sigma_element(prev, m, s, block);
    const double ref = a_m(x, m, s);
    EXPECT_NEAR(obj(block), ref, 1e-9 * std::max(1.0, ref));
  }
}

TEST(StepObjective, CappedT) {
  const Schedule s(ScaledGrowth{}, {2, 3, 2});
  const ExactFraction prev(2, 7);
  const StepObjective obj(prev, 3, s, 1);
  const DigitWord block(2, std::vector<Digit>(s.block_length(3), 1));
  EXPECT_NEAR(obj(block), a_m(sigma_element(prev, 3, s, block), 3, s, 1), 1e-9);
}

TEST(StepObjective, TrivialWhenAllBasesEquivalent) {
  const Schedule s(ScaledGrowth{}, {2, 4, 8});
  const StepObjective obj(ExactFraction(1, 3), 3, s);
  EXPECT_TRUE(obj.trivial());
  EXPECT_EQ(obj(DigitWord(8, std::vector<Digit>(s.block_length(3), 7))), 0.0);
}

TEST(SelectStep, ExhaustiveMatchesBruteForce) {
  // u = (3, 2): block of 17 binary digits; the filter looks at prefixes 16 and 17.
  const Schedule s(TableGrowth{{4, 8, 21}}, {3, 2});
  ASSERT_EQ(s.block_length(2), 17u);
  DiscrepancyParams disc;
  disc.per_base[2] = BaseConstants{0.3, 15};
  const ExactFraction prev(1, 7);

  bool have = false;
  double best = 0.0;
  std::vector<Digit> best_digits;
  std::size_t passing = 0;
  for (std::uint64_t idx = 0; idx < (1u << 17); ++idx) {
    const auto digits = to_digits(idx, 2, 17);
    const DigitWord block(2, digits);
    if (!in_good_set(block, disc)) continue;
    ++passing;
    const double v = a_m_reference(sigma_element(prev, 2, s, block), 2, s);
    if (!have || v < best - 1e-9) {
      have = true;
      best = v;
      best_digits = digits;
    }
  }
  ASSERT_GT(passing, 0u);
  ASSERT_LT(passing, 1u << 17);

  SelectOptions o;
  o.mode = SearchMode::exhaustive;
  const StepChoice c = select_step(prev, 2, s, 2, 2, disc, o);
  EXPECT_EQ(c.candidates_examined, passing);
  EXPECT_NEAR(c.objective, best, 1e-9 * std::max(1.0, best));
  EXPECT_EQ(c.digit_block, DigitWord(2, best_digits));
  EXPECT_TRUE(c.filter_passed);
  EXPECT_EQ(c.xi, sigma_element(prev, 2, s, c.digit_block));
  EXPECT_EQ(c.a, 12u);
  EXPECT_EQ(c.b, 31u);
}

TEST(SelectStep, ArgminBelowMean) {
  const Schedule s(ScaledGrowth{}, {2, 3, 2});
  SelectOptions o;
  o.samples = 16;
  DiscrepancyParams disc;
  ensure_calibrated(disc, std::vector<Base>{2, 3});
  const StepChoice c = select_step(ExactFraction(1, 5), 3, s, 2, 2, disc, o);
  EXPECT_EQ(c.candidates_examined, 16u);
  EXPECT_LE(c.objective, c.mean_objective);
  EXPECT_NEAR(c.objective, a_m(c.xi, 3, s), 1e-9 * std::max(1.0, c.objective));
  EXPECT_TRUE(c.filter_passed);
}

TEST(SelectStep, DeterministicForSeed) {
  const Schedule s(ScaledGrowth{}, {2, 3, 2});
  DiscrepancyParams disc;
  ensure_calibrated(disc, std::vector<Base>{2, 3});
  SelectOptions o;
  o.samples = 8;
  o.seed = 11;
  const StepChoice a = select_step(ExactFraction(1, 5), 3, s, 2, 2, disc, o);
  const StepChoice b = select_step(ExactFraction(1, 5), 3, s, 2, 2, disc, o);
  EXPECT_EQ(a.digit_block, b.digit_block);
  EXPECT_EQ(a.objective, b.objective);
}

TEST(SelectStep, InjectedObjectiveAndAffineInvariance) {
  const Schedule s = two_base_schedule();
  const DiscrepancyParams disc = loose_disc();
  const auto f = [](const ExactFraction& x, std::size_t, const Schedule&) {
    return std::abs(x.to_double() - 0.3);
  };
  SelectOptions o;
  o.mode = SearchMode::exhaustive;
  o.objective = f;
  const StepChoice c1 = select_step(ExactFraction(1, 7), 2, s, 2, 3, disc, o);
  o.objective = [&](const ExactFraction& x, std::size_t m, const Schedule& sc) { return 3.0 * f(x, m, sc) + 7.0; };
  const StepChoice c2 = select_step(ExactFraction(1, 7), 2, s, 2, 3, disc, o);
  EXPECT_EQ(c1.digit_block, c2.digit_block);
  EXPECT_EQ(c1.candidates_examined, 243u);
}

TEST(SelectStep, TiesGoToSmallestBlock) {
  const Schedule s = two_base_schedule();
  SelectOptions o;
  o.mode = SearchMode::exhaustive;
  o.objective = [](const ExactFraction&, std::size_t, const Schedule&) { return 1.0; };
  const StepChoice c = select_step(ExactFraction(1, 7), 2, s, 2, 3, loose_disc(), o);
  EXPECT_EQ(c.digit_block, DigitWord::from_string(3, "00000"));
  EXPECT_EQ(c.mean_objective, 1.0);
}

TEST(SelectStep, RestrictedAlphabet) {
  const Schedule s = two_base_schedule();
  SelectOptions o;
  o.mode = SearchMode::exhaustive;
  const StepChoice c = select_step(ExactFraction(1, 7), 2, s, 1, 2, loose_disc(), o);
  EXPECT_EQ(c.alphabet, 2u);
  EXPECT_EQ(c.candidates_examined, 32u);
  for (const Digit d : c.digit_block.digits()) EXPECT_LT(d, 2u);

  const StepChoice z = select_step(ExactFraction(1, 7), 2, s, 1, 1, loose_disc(), o);
  EXPECT_EQ(z.candidates_examined, 1u);
  EXPECT_EQ(z.digit_block, DigitWord::from_string(3, "00000"));
  EXPECT_EQ(z.xi, eta_g(ExactFraction(1, 7), 2, s).eta);
}

TEST(SelectStep, RejectsBadArguments) {
  const Schedule s = two_base_schedule();
  EXPECT_THROW(select_step(ExactFraction(), 2, s, 3, 3, loose_disc()), std::invalid_argument);
  EXPECT_THROW(select_step(ExactFraction(), 2, s, 1, 4, loose_disc()), std::invalid_argument);
  SelectOptions o;
  o.samples = 0;
  EXPECT_THROW(select_step(ExactFraction(), 2, s, 2, 3, loose_disc(), o), std::invalid_argument);
  o.mode = SearchMode::exhaustive;
  o.exhaustive_limit = 100;
  EXPECT_THROW(select_step(ExactFraction(), 2, s, 2, 3, loose_disc(), o), std::invalid_argument);
}

TEST(SelectStep, NoCandidateWhenFilterRejectsAll) {
  const Schedule s = two_base_schedule();
  DiscrepancyParams disc = loose_disc();
  disc.per_base[3] = BaseConstants{1e-9, 1};
  SelectOptions o;
  o.mode = SearchMode::exhaustive;
  EXPECT_THROW(select_step(ExactFraction(1, 7), 2, s, 2, 3, disc, o), NoCandidate);
  o.mode = SearchMode::sampled;
  o.max_attempts = 20;
  EXPECT_THROW(select_step(ExactFraction(1, 7), 2, s, 2, 3, disc, o), NoCandidate);
}

TEST(DeltaK, SatisfiesItsDefiningBound) {
  for (Base b : {2u, 3u, 10u}) {
    for (unsigned l : {1u, 2u, 3u}) {
      for (double eps : {0.5, 0.1, 0.01}) {
        const double d = delta_k(eps, b, l);
        const double A = std::pow(static_cast<double>(b), l);
        EXPECT_GT(d, 0.0);
        EXPECT_LE(d, 1.0 / std::numbers::e);
        EXPECT_LE(-A * d * std::log(d), eps * l * std::log(static_cast<double>(b)) * (1 + 1e-12));
        if (d < 1.0 / std::numbers::e) {
          const double d2 = d * (1 + 1e-9);
          EXPECT_GT(-A * d2 * std::log(d2), eps * l * std::log(static_cast<double>(b)));
        }
      }
    }
  }
}

TEST(DeltaK, Monotone) {
  EXPECT_LT(delta_k(0.1, 2, 3), delta_k(0.1, 2, 2));
  EXPECT_LT(delta_k(0.1, 5, 2), delta_k(0.1, 3, 2));
  EXPECT_LT(delta_k(0.05, 3, 2), delta_k(0.1, 3, 2));
  EXPECT_THROW(delta_k(0.0, 2, 1), std::invalid_argument);
  EXPECT_THROW(delta_k(0.1, 2, 0), std::invalid_argument);
  EXPECT_THROW(delta_k(0.1, 1, 1), std::invalid_argument);
}

TEST(DeltaK, CloseDistributionsHaveCloseEntropies) {
  CounterRng rng(99);
  for (int trial = 0; trial < 10000; ++trial) {
    const Base b = 2 + static_cast<Base>(rng.below(4));
    const unsigned l = 1 + static_cast<unsigned>(rng.below(2));
    const double eps = 0.05 + 0.4 * rng.uniform();
    const std::size_t A = static_cast<std::size_t>(std::llround(std::pow(b, l)));
    const double delta = delta_k(eps, b, l);
    std::vector<double> p(A);
    for (auto& x : p) x = rng.uniform() < 0.3 ? 0.0 : rng.uniform();
    double total = std::accumulate(p.begin(), p.end(), 0.0);
    if (total == 0.0) continue;
    for (auto& x : p) x /= total;
    // Move mass between pairs by at most delta per coordinate.
    std::vector<double> q = p;
    for (std::size_t i = 0; i + 1 < A; i += 2) {
      const double shift = (2.0 * rng.uniform() - 1.0) * delta;
      const double s = std::clamp(shift, -q[i], q[i + 1]);
      q[i] += s;
      q[i + 1] -= s;
    }
    const double diff = std::abs(entropy_of(p) - entropy_of(q)) / (l * std::log(static_cast<double>(b)));
    ASSERT_LE(diff, eps + 1e-12) << "b=" << b << " l=" << l << " eps=" << eps;
  }
}

TEST(Construction, SingleStageReachesTargets) {
  const ConstructionTrace& t = single_stage_trace();
  ASSERT_TRUE(t.complete);
  ASSERT_EQ(t.stages.size(), 1u);
  const StageRecord& st = t.stage(1);
  EXPECT_EQ(st.v, 4u);
  EXPECT_EQ(st.v_star, 2u);
  EXPECT_EQ(st.first_step, 1u);
  EXPECT_LT(st.P1, st.P2);
  for (double h : st.entropy_f1) EXPECT_NEAR(h, 0.5, 0.1);
  for (double h : st.entropy_f2) EXPECT_NEAR(h, 1.0, 0.1);
  EXPECT_GE(t.sched.b(st.P1), 20000u);
  EXPECT_GE(t.sched.b(st.P2) - t.sched.b(st.P1), 20000u);
  for (const auto& r : t.monitors) EXPECT_TRUE(r.pass) << r.name;
}

TEST(Construction, SubstageReportsEndAtFirstSuccess) {
  const ConstructionTrace& t = single_stage_trace();
  const StageRecord& st = t.stage(1);
  ASSERT_EQ(st.reports.size(), st.P2);
  for (std::size_t m = 1; m <= st.P2; ++m) {
    const SubstageReport& r = st.reports[m - 1];
    EXPECT_EQ(r.m, m);
    EXPECT_EQ(r.done(), m == st.P1 || m == st.P2) << m;
  }
  std::vector<std::string> first, second;
  for (const auto& c : st.reports[st.P1 - 1].checks) first.push_back(c.name);
  for (const auto& c : st.reports[st.P2 - 1].checks) second.push_back(c.name);
  EXPECT_EQ(first, (std::vector<std::string>{"entropy", "block_gap", "digit_floor"}));
  EXPECT_EQ(second, (std::vector<std::string>{"entropy", "weyl", "step_floor", "next_base_entropy", "block_gap",
                                               "good_sequence", "digit_floor"}));
}

TEST(Construction, CriteriaFollowSubstages) {
  const ConstructionTrace& t = single_stage_trace();
  const StageRecord& st = t.stage(1);
  for (const auto& s : t.steps) {
    EXPECT_EQ(s.criterion, s.m <= st.P1 ? 1 : 2);
    EXPECT_EQ(s.u, 4u);
    EXPECT_EQ(s.alphabet, s.m <= st.P1 ? 2u : 4u);
  }
}

TEST(Construction, XiIncreasesAndDigitsStayFixed) {
  const ConstructionTrace& t = single_stage_trace();
  for (std::size_t i = 1; i < t.steps.size(); ++i) EXPECT_LE(t.steps[i - 1].xi, t.steps[i].xi);
  EXPECT_EQ(first_unstable_block(t), 0u);
  EXPECT_TRUE(t.unstable_steps.empty());
  const DigitWord d = stage_digits(t, 4);
  ASSERT_EQ(d.size(), t.steps.back().b);
  for (const auto& s : t.steps) {
    EXPECT_EQ(d.slice(s.a, s.b - s.a - 2), s.digit_block);
    EXPECT_EQ(d[s.b - 2], 0u);
    EXPECT_EQ(d[s.b - 1], 0u);
  }
}

TEST(Construction, ZeroStagesAndUndefinedStages) {
  StagePlan plan;
  plan.set_q(2, Ratio(1, 2));
  const ConstructionTrace empty = run_construction(plan, 0, ConstructionParams{});
  EXPECT_TRUE(empty.steps.empty());
  EXPECT_TRUE(empty.xi().is_zero());
  StagePlan only3;
  only3.set_q(3, Ratio(1, 1));
  EXPECT_THROW(run_construction(only3, 1, ConstructionParams{}), PlanError);
  EXPECT_THROW(run_construction(plan, 2, ConstructionParams{}), PlanError);
  ConstructionParams p;
  p.step_budget = 0;
  EXPECT_THROW(run_construction(plan, 1, p), std::invalid_argument);
}

TEST(Construction, BudgetExhaustionMarksIncomplete) {
  StagePlan plan;
  plan.set_q(2, Ratio(1, 2));
  ConstructionParams p;
  p.step_budget = 3;
  const ConstructionTrace t = run_construction(plan, 1, p);
  EXPECT_FALSE(t.complete);
  EXPECT_TRUE(t.stage(1).budget_exhausted);
  EXPECT_EQ(t.steps.size(), 6u);
}

TEST(Construction, TwoStagesWithSmallFloors) {
  StagePlan plan;
  plan.set_q(2, Ratio(1, 2));
  plan.set_q(3, Ratio(1, 1));
  ConstructionParams p;
  p.l_cap = 1;
  p.min_substage_digits = 300;
  std::vector<std::size_t> seen;
  p.on_step = [&](const StepChoice& c, const SubstageReport& r) {
    seen.push_back(c.m);
    EXPECT_EQ(r.m, c.m);
  };
  const ConstructionTrace t = run_construction(plan, 2, p);
  ASSERT_TRUE(t.complete);
  EXPECT_EQ(seen.size(), t.steps.size());
  EXPECT_EQ(t.stage(2).v, 3u);
  EXPECT_EQ(t.stage(2).first_step, t.stage(1).P2 + 1);
  EXPECT_EQ(first_unstable_block(t), 0u);
  bool saw_r = false;
  for (const auto& r : t.monitors) {
    if (r.name == "R" && r.k == 2) {
      saw_r = true;
      EXPECT_FALSE(r.vacuous);
      EXPECT_TRUE(r.pass) << r.deviation;
    }
    if (!r.unavailable) {
      EXPECT_TRUE(r.pass) << r.name << " k=" << r.k << " dev=" << r.deviation;
    }
  }
  EXPECT_TRUE(saw_r);
}

TEST(Requirements, FailOnFabricatedConstantDigits) {
  ConstructionTrace t = single_stage_trace();
  for (auto& s : t.steps) s.xi = ExactFraction();
  const auto v = check_requirements(t, 1);
  bool f_failed = false, s1_failed = false;
  for (const auto& r : v) {
    if (r.name == "F") f_failed = !r.pass;
    if (r.name == "S1") s1_failed = !r.pass;
    if (r.name == "R") {
      EXPECT_TRUE(r.vacuous);
    }
  }
  EXPECT_TRUE(f_failed);
  EXPECT_TRUE(s1_failed);
  EXPECT_THROW(check_requirements(t, 2), std::out_of_range);
  EXPECT_THROW(check_requirements(t, 0), std::out_of_range);
}

TEST(Requirements, WindowsMatchTheStageRecord) {
  const ConstructionTrace& t = single_stage_trace();
  const StageRecord& st = t.stage(1);
  for (const auto& r : check_requirements(t, 1)) {
    if (r.name == "F") {
      EXPECT_EQ(r.n_from, t.sched.b(st.P1));
      EXPECT_NEAR(r.deviation, std::abs(st.entropy_f1[0] - 0.5), 1e-12);
    }
    if (r.name == "T1") {
      EXPECT_EQ(r.n_from, t.sched.b(st.P1));
      EXPECT_EQ(r.n_to, t.sched.b(st.P2));
    }
  }
}

TEST(Stability, GapMatchesDirectSum) {
  const Schedule s(ScaledGrowth{}, {2, 3, 2, 5, 3, 2, 6});
  for (std::size_t m = 1; m <= 7; ++m) {
    long double sum = 0;
    for (std::size_t i = m + 1; i <= 7; ++i) sum += 2.0L * std::pow(static_cast<long double>(s.u(i)), -static_cast<long double>(s.a(i)));
    const long double rhs = std::pow(static_cast<long double>(s.u(m)), -static_cast<long double>(s.b(m) - 2));
    EXPECT_EQ(stability_gap_holds(s, m, 7), sum < rhs) << m;
  }
  EXPECT_TRUE(stability_gap_holds(s, 7, 7));
}

TEST(State, WeylAccumulatorMatchesDirectAverages) {
  StagePlan plan;
  plan.set_q(2, Ratio(1, 2));
  ConstructionParams p;
  ensure_calibrated(p.disc, std::vector<Base>{4});
  ConstructionState state(plan, p);
  state.begin_stage(1);
  for (int i = 0; i < 6; ++i) state.step(2);
  const auto acc = state.weyl_averages(8);
  const WeylReport rep = weyl_report(state.xi(), 4, 8, state.digits_fixed());
  for (long t = 1; t <= 8; ++t) {
    EXPECT_NEAR(std::abs(acc[t - 1] - rep.averages.at(t)), 0.0, 1e-9) << t;
  }
  EXPECT_THROW(state.weyl_averages(9), std::out_of_range);
  EXPECT_EQ(state.digits_fixed(), state.steps().back().b);
}

TEST(State, StepBeforeStageThrows) {
  StagePlan plan;
  plan.set_q(2, Ratio(1, 2));
  ConstructionState state(plan, ConstructionParams{});
  EXPECT_THROW(state.step(2), std::logic_error);
}

TEST(Output, TraceCsvAndMonitorJson) {
  const ConstructionTrace& t = single_stage_trace();
  std::ostringstream csv;
  write_trace_csv(csv, t);
  std::istringstream in(csv.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "m,k,substage,criterion,u,a_m,b_m,block,objective");
  std::size_t rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, t.steps.size());

  std::ostringstream js;
  write_monitor_json(js, t);
  const auto j = nlohmann::json::parse(js.str());
  EXPECT_TRUE(j.at("complete").get<bool>());
  EXPECT_FALSE(j.at("monitors").empty());
}

TEST(Output, ExportWritesFiles) {
  const ConstructionTrace& t = single_stage_trace();
  const auto dir = std::filesystem::temp_directory_path() / ("fsdim_export_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  export_trace(dir, t);
  EXPECT_TRUE(std::filesystem::exists(dir / "trace.csv"));
  EXPECT_TRUE(std::filesystem::exists(dir / "monitors.json"));
  EXPECT_EQ(read_digit_file(dir / "digits_base4.txt", Base{4}), stage_digits(t, 4));
  std::filesystem::remove_all(dir);
}
