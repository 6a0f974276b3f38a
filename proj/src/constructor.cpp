#include "fsdim/constructor.hpp"

#include "fsdim/digit_file.hpp"
#include "fsdim/rng.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace fsdim {

namespace {

double pow2(long e) { return std::ldexp(1.0, static_cast<int>(e)); }

/// Block lengths l <= min(k, l_cap) whose table of base^l entries stays
/// within the default block limit; at least 1.
unsigned effective_l(Base v, unsigned l_cap, std::size_t k) {
  unsigned l = 0;
  double space = 1.0;
  while (l < l_cap && l < k) {
    space *= static_cast<double>(v);
    if (space > static_cast<double>(kDefaultBlockLimit)) break;
    ++l;
  }
  return std::max(l, 1u);
}

mpz_class block_value(const DigitWord& w) {
  mpz_class value = 0;
  for (const Digit d : w.digits()) {
    value *= w.base();
    value += d;
  }
  return value;
}

ExactFraction compose(const EtaG& eg, Base u, std::uint64_t a, std::uint64_t b, const DigitWord& block) {
  const mpz_class num = eg.g * power(u, b - 2 - a) + block_value(block);
  return ExactFraction(num, power(u, b - 2));
}

double threshold_or(const std::optional<double>& override_value, double asymptotic) {
  return override_value ? *override_value : asymptotic;
}

CertificateParams weyl_thresholds(std::size_t k, Base v, const ConstructionParams& p) {
  if (p.weyl_t) return CertificateParams{*p.weyl_t, p.weyl_gamma};
  return certificate_params_for_blocks(pow2(-static_cast<long>(k + 1)), effective_l(v, p.l_cap, k));
}

/// Smallest delta over l <= min(k, l_cap).
double stage_delta(double eps, Base v, unsigned l_cap, std::size_t k) {
  return delta_k(eps, v, effective_l(v, l_cap, k));
}

/// min over m >= m_from of b_m - a_m in base r, bounded below for growth
/// laws with non-decreasing increments.
double gap_lower_bound(const Schedule& sched, Base r, std::size_t m_from) {
  const auto exact = [&](std::size_t m) {
    return static_cast<double>(sched.angle_base(m + 1, r) - sched.angle_base(m, r));
  };
  if (const auto* t = std::get_if<TableGrowth>(&sched.growth())) {
    double low = std::numeric_limits<double>::infinity();
    for (std::size_t m = m_from; m + 1 <= t->values.size(); ++m) low = std::min(low, exact(m));
    return low;
  }
  const double increment = static_cast<double>(sched.angle(m_from + 1) - sched.angle(m_from));
  const double bound = (increment - 1.0) / std::log(static_cast<double>(r)) - 1.0;
  return std::min(exact(m_from), bound);
}

double max_abs_deviation(const StreamingBlockCounter& c, unsigned l_max, double target) {
  double dev = 0.0;
  for (unsigned l = 1; l <= l_max; ++l) dev = std::max(dev, std::abs(c.entropy(l) - target));
  return dev;
}

StreamingBlockCounter count_digits(const DigitWord& w, unsigned l_max) {
  StreamingBlockCounter c(w.base(), l_max);
  c.push(w.digits());
  return c;
}

CheckVerdict verdict(std::string name, bool pass, double value, double threshold) {
  return CheckVerdict{std::move(name), pass, false, value, threshold};
}

CheckVerdict vacuous_verdict(std::string name) { return CheckVerdict{std::move(name), true, true, 0.0, 0.0}; }

/// v(k+1) when stage k+1 is defined and some k' < k has v(k') = v(k+1).
std::optional<Base> recurring_next_base(const StagePlan& plan, std::size_t k) {
  if (!plan.stage_defined(k + 1)) return std::nullopt;
  const Base next = plan.v(k + 1);
  for (std::size_t kp = 1; kp < k; ++kp) {
    if (plan.stage_defined(kp) && plan.v(kp) == next) return next;
  }
  return std::nullopt;
}

std::vector<double> entropies(const StreamingBlockCounter& c) {
  std::vector<double> h;
  for (unsigned l = 1; l <= c.l_max(); ++l) h.push_back(c.entropy(l));
  return h;
}

}  // namespace

// ---------------------------------------------------------------------------

EtaG eta_g(const ExactFraction& lambda, std::size_t m, const Schedule& sched) {
  const Base u = sched.u(m);
  const mpz_class scale = power(u, sched.a(m));
  mpz_class g = lambda.numerator() * scale;
  mpz_cdiv_q(g.get_mpz_t(), g.get_mpz_t(), lambda.denominator().get_mpz_t());
  if (g >= scale) throw std::domain_error("eta_m reached 1");
  return EtaG{g, ExactFraction(g, scale)};
}

ExactFraction sigma_element(const ExactFraction& lambda, std::size_t m, const Schedule& sched,
                            const DigitWord& block, std::optional<Base> alphabet) {
  const Base u = sched.u(m);
  const std::uint64_t a = sched.a(m), b = sched.b(m);
  if (block.base() != u) throw std::invalid_argument("sigma_element: block must be over base u(m)");
  if (b < a + 2 || block.size() != b - a - 2) {
    throw std::invalid_argument("sigma_element: block length must be b_m - a_m - 2");
  }
  const Base limit = alphabet.value_or(u);
  for (const Digit d : block.digits()) {
    if (d >= limit) throw std::invalid_argument("sigma_element: digit outside the alphabet");
  }
  return compose(eta_g(lambda, m, sched), u, a, b, block);
}

StepObjective::StepObjective(const ExactFraction& prev, std::size_t m, const Schedule& sched,
                             std::optional<long> t_cap)
    : u_(sched.u(m)) {
  t_max_ = static_cast<long>(m);
  if (t_cap) t_max_ = std::min(t_max_, *t_cap);
  t_max_ = std::max(t_max_, 0L);
  std::map<Base, std::size_t> bases;
  for (std::size_t h = 1; h <= m; ++h) {
    if (!equivalent(sched.u(h), u_)) ++bases[sched.u(h)];
  }
  if (bases.empty() || t_max_ == 0) return;
  const std::uint64_t a = sched.a(m), b = sched.b(m);
  if (b < a + 2) throw std::invalid_argument("StepObjective: b_m < a_m + 2");
  den_ = power(u_, b - 2);
  const mpz_class G = eta_g(prev, m, sched).g * power(u_, b - 2 - a);
  for (const auto& [r, mult] : bases) {
    const std::uint64_t lo = sched.angle_base(m, r), hi = sched.angle_base(m + 1, r);
    Term term{r, mult, hi - lo, 0, 0};
    const mpz_class rr(r), exp(static_cast<unsigned long>(lo));
    mpz_powm(term.scale.get_mpz_t(), rr.get_mpz_t(), exp.get_mpz_t(), den_.get_mpz_t());
    term.shared = term.scale * G;
    mpz_mod(term.shared.get_mpz_t(), term.shared.get_mpz_t(), den_.get_mpz_t());
    terms_.push_back(std::move(term));
  }
}

double StepObjective::operator()(const DigitWord& block) const {
  if (terms_.empty()) return 0.0;
  const mpz_class B = block_value(block);
  double total = 0.0;
  std::vector<Complex> z, w;
  mpz_class res, y, d, top;
  for (const Term& term : terms_) {
    res = term.shared + term.scale * B;
    mpz_mod(res.get_mpz_t(), res.get_mpz_t(), den_.get_mpz_t());
    // Fixed point y/2^P of res/D; multiplying by r loses log2 r bits per point.
    const auto P = static_cast<mp_bitcnt_t>(
        96 + std::ceil(static_cast<double>(term.length) * std::log2(static_cast<double>(term.r))));
    const std::size_t den_bits = mpz_sizeinbase(den_.get_mpz_t(), 2);
    if (den_bits > P + 64) {
      const auto shift = static_cast<mp_bitcnt_t>(den_bits - P - 64);
      mpz_tdiv_q_2exp(y.get_mpz_t(), res.get_mpz_t(), shift);
      mpz_tdiv_q_2exp(d.get_mpz_t(), den_.get_mpz_t(), shift);
    } else {
      y = res;
      d = den_;
    }
    mpz_mul_2exp(y.get_mpz_t(), y.get_mpz_t(), P);
    mpz_tdiv_q(y.get_mpz_t(), y.get_mpz_t(), d.get_mpz_t());
    z.clear();
    for (std::uint64_t i = 0; i < term.length; ++i) {
      mpz_tdiv_q_2exp(top.get_mpz_t(), y.get_mpz_t(), P - 64);
      z.push_back(e_of(std::ldexp(top.get_d(), -64)));
      y *= term.r;
      mpz_tdiv_r_2exp(y.get_mpz_t(), y.get_mpz_t(), P);
    }
    w = z;
    double sum_t = 0.0;
    for (long t = 1; t <= t_max_; ++t) {
      Complex s = 0.0;
      for (std::size_t i = 0; i < w.size(); ++i) {
        s += w[i];
        w[i] *= z[i];
      }
      sum_t += std::norm(s);
    }
    total += 2.0 * static_cast<double>(term.multiplicity) * sum_t;
  }
  return total;
}

StepChoice select_step(const ExactFraction& prev, std::size_t m, const Schedule& sched, int criterion, Base p,
                       const DiscrepancyParams& disc, const SelectOptions& options) {
  if (criterion != 1 && criterion != 2) throw std::invalid_argument("select_step: criterion must be 1 or 2");
  const Base u = sched.u(m);
  const std::uint64_t a = sched.a(m), b = sched.b(m);
  if (b < a + 3) throw std::invalid_argument("select_step: block length b_m - a_m - 2 must be >= 1");
  const std::size_t len = b - a - 2;
  const Base alphabet = criterion == 1 ? p : u;
  if (alphabet < 1 || alphabet > u) throw std::invalid_argument("select_step: alphabet must lie in [1, u(m)]");
  if (options.mode == SearchMode::sampled && options.samples == 0) {
    throw std::invalid_argument("select_step: sampled mode needs at least one sample");
  }

  const EtaG eg = eta_g(prev, m, sched);
  std::optional<StepObjective> fast;
  if (!options.objective) fast.emplace(prev, m, sched, options.t_cap);

  bool have_best = false;
  double best_obj = 0.0;
  std::vector<Digit> best;
  double sum = 0.0;
  std::size_t examined = 0;
  const auto consider = [&](const std::vector<Digit>& digits) {
    const DigitWord block(u, digits);
    const double obj = fast ? (*fast)(block) : options.objective(compose(eg, u, a, b, block), m, sched);
    sum += obj;
    ++examined;
    if (!have_best || obj < best_obj || (obj == best_obj && digits < best)) {
      have_best = true;
      best_obj = obj;
      best = digits;
    }
  };

  if (alphabet == 1) {
    consider(std::vector<Digit>(len, 0));
  } else if (options.mode == SearchMode::exhaustive) {
    const double space = std::pow(static_cast<double>(alphabet), static_cast<double>(len));
    if (space > static_cast<double>(options.exhaustive_limit)) {
      throw std::invalid_argument("select_step: exhaustive search space exceeds the limit");
    }
    const auto total = static_cast<std::uint64_t>(std::llround(space));
    std::vector<Digit> digits(len, 0);
    for (std::uint64_t idx = 0; idx < total; ++idx) {
      if (in_good_set(DigitWord(alphabet, digits), disc)) consider(digits);
      for (std::size_t i = len; i-- > 0;) {
        if (++digits[i] < alphabet) break;
        digits[i] = 0;
      }
    }
  } else {
    for (std::size_t i = 0; i < options.samples; ++i) {
      try {
        const SampleResult s =
            sample_good_string(alphabet, len, derive_seed(options.seed, m, i), disc, options.max_attempts);
        consider(std::vector<Digit>(s.word.digits().begin(), s.word.digits().end()));
      } catch (const NoGoodString& e) {
        throw NoCandidate(std::string("select_step: ") + e.what());
      }
    }
  }
  if (!have_best) throw NoCandidate("select_step: no block passes the low-discrepancy filter");

  StepChoice choice;
  choice.m = m;
  choice.criterion = criterion;
  choice.u = u;
  choice.alphabet = alphabet;
  choice.a = a;
  choice.b = b;
  choice.digit_block = DigitWord(u, best);
  choice.xi = compose(eg, u, a, b, choice.digit_block);
  choice.objective = best_obj;
  choice.mean_objective = sum / static_cast<double>(examined);
  choice.candidates_examined = examined;
  choice.filter_passed = alphabet < 2 || in_good_set(DigitWord(alphabet, best), disc);
  return choice;
}

double delta_k(double eps, Base base, unsigned l) {
  if (!(eps > 0.0 && eps < 1.0)) throw std::invalid_argument("delta_k: eps must lie in (0,1)");
  if (l < 1) throw std::invalid_argument("delta_k: l must be >= 1");
  DigitWord::check_base(base);
  const double A = std::pow(static_cast<double>(base), static_cast<double>(l));
  const double target = eps * l * std::log(static_cast<double>(base));
  const auto bound = [A](double d) { return -A * d * std::log(d); };
  double hi = 1.0 / std::numbers::e;
  if (bound(hi) <= target) return hi;
  double lo = 0.0;
  for (int i = 0; i < 200 && hi - lo > lo * 1e-15; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (bound(mid) <= target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return lo;
}

bool SubstageReport::done() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckVerdict& c) { return c.pass; });
}

// ---------------------------------------------------------------------------

ConstructionState::ConstructionState(const StagePlan& plan, const ConstructionParams& params)
    : plan_(plan), params_(params), sched_(plan.growth, {}) {}

void ConstructionState::begin_stage(std::size_t k) {
  k_ = k;
  v_ = plan_.v(k);
  p1_ = 0;
  const std::size_t m = steps_.size() + 1;
  first_step_ = m;
  sched_.push(v_);
  const EtaG eg = eta_g(xi_, m, sched_);
  counter_.emplace(v_, effective_l(v_, params_.l_cap, std::numeric_limits<std::size_t>::max()));
  weyl_t_ = weyl_thresholds(k, v_, params_).t_max;
  weyl_sums_.assign(static_cast<std::size_t>(weyl_t_), Complex(0.0));
  pending_.clear();
  settled_ = 0;
  const DigitWord head = digits_prefix(eg.eta, v_, sched_.a(m));
  push_digits(head.digits());
}

const StepChoice& ConstructionState::step(int criterion) {
  if (k_ == 0) throw std::logic_error("ConstructionState: no stage open");
  const std::size_t m = steps_.size() + 1;
  if (sched_.size() < m) sched_.push(v_);
  StepChoice c = select_step(xi_, m, sched_, criterion, plan_.p_of(v_), params_.disc, params_.select);
  xi_ = c.xi;
  std::vector<Digit> digits(c.digit_block.digits().begin(), c.digit_block.digits().end());
  digits.push_back(0);
  digits.push_back(0);
  push_digits(digits);
  if (counter_->length() != c.b) throw std::logic_error("ConstructionState: X(k) out of step with b_m");
  steps_.push_back(std::move(c));
  return steps_.back();
}

void ConstructionState::push_digits(std::span<const Digit> digits) {
  counter_->push(digits);
  pending_.insert(pending_.end(), digits.begin(), digits.end());
  // Points further than `guard` digits from the end are fixed to double precision.
  const auto guard = static_cast<std::size_t>(std::ceil(64.0 / std::log2(static_cast<double>(v_)))) + 1;
  const double base = v_;
  std::size_t consumed = 0;
  while (pending_.size() - consumed > guard) {
    double y = 0.0;
    for (std::size_t i = consumed + guard; i-- > consumed;) y = (static_cast<double>(pending_[i]) + y) / base;
    const Complex z = e_of(y);
    Complex w = z;
    for (auto& s : weyl_sums_) {
      s += w;
      w *= z;
    }
    ++consumed;
    ++settled_;
  }
  pending_.erase(pending_.begin(), pending_.begin() + static_cast<std::ptrdiff_t>(consumed));
}

std::vector<Complex> ConstructionState::weyl_averages(long t_max) const {
  if (t_max > weyl_t_) throw std::out_of_range("weyl_averages: t beyond the tracked range");
  const std::uint64_t n = digits_fixed();
  std::vector<Complex> out(static_cast<std::size_t>(std::max(t_max, 0L)));
  if (n == 0) return out;
  for (std::size_t t = 0; t < out.size(); ++t) out[t] = weyl_sums_[t];
  const double base = v_;
  double y = 0.0;
  for (std::size_t i = pending_.size(); i-- > 0;) {
    y = (static_cast<double>(pending_[i]) + y) / base;
    const Complex z = e_of(y);
    Complex w = z;
    for (auto& s : out) {
      s += w;
      w *= z;
    }
  }
  for (auto& s : out) s /= static_cast<double>(n);
  return out;
}

// ---------------------------------------------------------------------------

SubstageReport first_substage_done(const ConstructionState& state, std::size_t k, const ConstructionParams& params) {
  SubstageReport report;
  report.m = state.steps().size();
  const std::size_t P = report.m;
  const Base v = state.plan().v(k);
  const Schedule& sched = state.sched();
  const unsigned l_max = effective_l(v, params.l_cap, k);
  const double eps = pow2(-static_cast<long>(k));

  const double q = state.plan().q(v).value();
  const double dev = max_abs_deviation(state.counter(), l_max, q);
  const double tol = threshold_or(params.tolerance, eps);
  report.checks.push_back(verdict("entropy", dev <= tol, dev, tol));

  const double delta = stage_delta(eps, v, params.l_cap, k);
  const double rhs = (params.L + 2.0 * k) / (std::min(delta, eps) / 2.0) + static_cast<double>(k);
  const double gap = gap_lower_bound(sched, v, P);
  report.checks.push_back(verdict("block_gap", gap >= rhs, gap, rhs));

  const double digits = static_cast<double>(sched.b(P) - sched.a(state.stage_first_step()));
  report.checks.push_back(verdict("digit_floor", digits >= static_cast<double>(params.min_substage_digits), digits,
                                  static_cast<double>(params.min_substage_digits)));
  return report;
}

SubstageReport second_substage_done(const ConstructionState& state, std::size_t k, const ConstructionParams& params) {
  SubstageReport report;
  report.m = state.steps().size();
  const std::size_t P = report.m;
  const StagePlan& plan = state.plan();
  const Base v = plan.v(k);
  const Schedule& sched = state.sched();
  const unsigned l_max = effective_l(v, params.l_cap, k);
  const double eps_k = pow2(-static_cast<long>(k));
  const std::optional<Base> next = plan.stage_defined(k + 1) ? std::optional<Base>(plan.v(k + 1)) : std::nullopt;

  // (1) entropy near 1 at F_k^2.
  const double dev = max_abs_deviation(state.counter(), l_max, 1.0);
  const double tol1 = threshold_or(params.tolerance, pow2(-static_cast<long>(k + 1)));
  report.checks.push_back(verdict("entropy", dev <= tol1, dev, tol1));

  // (2) Weyl averages below gamma/2.
  const CertificateParams wt = weyl_thresholds(k, v, params);
  double max_mod = 0.0;
  for (const Complex& z : state.weyl_averages(wt.t_max)) max_mod = std::max(max_mod, std::abs(z));
  report.checks.push_back(verdict("weyl", max_mod < wt.gamma / 2.0, max_mod, wt.gamma / 2.0));

  // (3) step floors.
  const double floor3 = static_cast<double>(std::max<std::size_t>(params.M, static_cast<std::size_t>(wt.t_max)));
  report.checks.push_back(verdict("step_floor", static_cast<double>(P) >= floor3, static_cast<double>(P), floor3));

  // (4) entropy in a recurring next base.
  if (const auto nb = recurring_next_base(plan, k)) {
    const std::uint64_t n = sched.angle_base(P + 1, *nb);
    const unsigned l4 = effective_l(*nb, params.l_cap, k);
    const auto c = count_digits(digits_prefix(state.xi(), *nb, n), l4);
    const double dev4 = max_abs_deviation(c, l4, 1.0);
    const double tol4 = threshold_or(params.tolerance, eps_k);
    report.checks.push_back(verdict("next_base_entropy", dev4 <= tol4, dev4, tol4));
  } else {
    report.checks.push_back(vacuous_verdict("next_base_entropy"));
  }

  // (5) block-length floor for m >= P.
  double delta = std::min(stage_delta(eps_k, v, params.l_cap, k), eps_k);
  if (next) delta = std::min(delta, stage_delta(eps_k, *next, params.l_cap, k + 1));
  const double rhs = (params.L_prime + 2.0 * k) / (delta / 2.0) + static_cast<double>(k);
  double gap = static_cast<double>(sched.b(P) - sched.a(P));
  gap = std::min(gap, next ? gap_lower_bound(sched, *next, P + 1) : gap_lower_bound(sched, v, P));
  report.checks.push_back(verdict("block_gap", gap >= rhs, gap, rhs));

  // (6) good sequence after switching to v(k+1).
  if (next) {
    std::vector<Base> u(sched.bases().begin(), sched.bases().begin() + static_cast<std::ptrdiff_t>(P));
    u.insert(u.end(), std::max<std::size_t>(params.good_horizon, 1), *next);
    const Schedule extended(sched.growth(), u);
    const auto good = validate_good_sequence(extended, plan.alpha, plan, params.disc, u.size());
    report.checks.push_back(verdict("good_sequence", good.all_pass(), static_cast<double>(good.first_failure()), 0.0));
  } else {
    report.checks.push_back(vacuous_verdict("good_sequence"));
  }

  const double digits = static_cast<double>(sched.b(P) - sched.b(state.p1()));
  report.checks.push_back(verdict("digit_floor", digits >= static_cast<double>(params.min_substage_digits), digits,
                                  static_cast<double>(params.min_substage_digits)));
  return report;
}

// ---------------------------------------------------------------------------

ConstructionTrace run_construction(const StagePlan& plan, std::size_t stages, ConstructionParams params) {
  ConstructionTrace trace{plan, Schedule(plan.growth, {}), params, {}, {}, {}, true, {}};
  if (stages == 0) return trace;
  if (params.step_budget == 0) throw std::invalid_argument("run_construction: step budget must be positive");
  std::set<Base> bases;
  for (std::size_t k = 1; k <= stages + 1; ++k) {
    if (!plan.stage_defined(k)) {
      if (k <= stages) {
        throw PlanError("stage " + std::to_string(k) + ": no target dimension for the class of r_k = " +
                        std::to_string(plan.r(k)));
      }
      continue;
    }
    bases.insert(plan.v(k));
    if (plan.v_star(k) >= 2) bases.insert(plan.v_star(k));
  }
  const std::vector<Base> base_list(bases.begin(), bases.end());
  ensure_calibrated(params.disc, base_list, params.calibration);
  trace.params = params;

  ConstructionState state(plan, params);
  const auto run_substage = [&](StageRecord& rec, int criterion) {
    for (std::size_t n = 1;; ++n) {
      state.step(criterion);
      SubstageReport rep = criterion == 1 ? first_substage_done(state, rec.k, params)
                                          : second_substage_done(state, rec.k, params);
      const bool done = rep.done();
      if (params.on_step) params.on_step(state.steps().back(), rep);
      rec.reports.push_back(std::move(rep));
      if (done) return;
      if (n >= params.step_budget) {
        rec.budget_exhausted = true;
        trace.complete = false;
        return;
      }
    }
  };
  for (std::size_t k = 1; k <= stages; ++k) {
    state.begin_stage(k);
    StageRecord rec;
    rec.k = k;
    rec.v = plan.v(k);
    rec.v_star = plan.v_star(k);
    rec.first_step = state.stage_first_step();
    run_substage(rec, 1);
    rec.P1 = state.steps().size();
    rec.entropy_f1 = entropies(state.counter());
    state.close_first_substage();
    run_substage(rec, 2);
    rec.P2 = state.steps().size();
    rec.entropy_f2 = entropies(state.counter());
    trace.stages.push_back(std::move(rec));
  }
  trace.steps = state.steps();
  trace.sched = state.sched();
  for (std::size_t m = 1; m <= trace.steps.size(); ++m) {
    if (!stability_gap_holds(trace.sched, m, trace.steps.size())) trace.unstable_steps.push_back(m);
  }
  for (std::size_t k = 1; k <= stages; ++k) {
    auto v = check_requirements(trace, k);
    trace.monitors.insert(trace.monitors.end(), v.begin(), v.end());
  }
  return trace;
}

bool stability_gap_holds(const Schedule& sched, std::size_t m, std::size_t last) {
  const double rhs = -static_cast<double>(sched.b(m) - 2) * std::log(static_cast<double>(sched.u(m)));
  std::vector<double> logs;
  for (std::size_t i = m + 1; i <= last; ++i) {
    logs.push_back(std::log(2.0) - static_cast<double>(sched.a(i)) * std::log(static_cast<double>(sched.u(i))));
  }
  if (logs.empty()) return true;
  const double top = *std::max_element(logs.begin(), logs.end());
  double sum = 0.0;
  for (const double l : logs) sum += std::exp(l - top);
  return top + std::log(sum) < rhs;
}

namespace {

std::uint64_t fixed_length(const ConstructionTrace& trace, Base v) {
  std::uint64_t n = 0;
  for (const auto& s : trace.steps) {
    if (s.u == v) n = std::max(n, s.b);
  }
  return n;
}

/// Digits of the final xi per base, extended on demand.
class DigitCache {
 public:
  explicit DigitCache(const ExactFraction& xi) : xi_(xi) {}
  const DigitWord& get(Base b, std::uint64_t n) {
    auto it = cache_.find(b);
    if (it == cache_.end() || it->second.size() < n) {
      it = cache_.insert_or_assign(b, digits_prefix(xi_, b, n)).first;
    }
    return it->second;
  }

 private:
  ExactFraction xi_;
  std::map<Base, DigitWord> cache_;
};

struct WindowStats {
  double max_abs_dev = 0.0;  // max |H - target|
  double max_shortfall = -std::numeric_limits<double>::infinity();  // max (target - H)
};

WindowStats scan_window(const DigitWord& digits, unsigned l_max, std::uint64_t from, std::uint64_t to,
                        double target) {
  StreamingBlockCounter c(digits.base(), l_max);
  WindowStats s;
  for (std::uint64_t n = 1; n <= to; ++n) {
    c.push(digits[n - 1]);
    if (n < from) continue;
    for (unsigned l = 1; l <= l_max; ++l) {
      const double h = c.entropy(l);
      s.max_abs_dev = std::max(s.max_abs_dev, std::abs(h - target));
      s.max_shortfall = std::max(s.max_shortfall, target - h);
    }
  }
  return s;
}

RequirementVerdict make_verdict(std::string name, std::size_t k, unsigned l_max, std::uint64_t from,
                                std::uint64_t to, double deviation, double threshold) {
  RequirementVerdict r;
  r.name = std::move(name);
  r.k = k;
  r.l_max = l_max;
  r.n_from = from;
  r.n_to = to;
  r.deviation = deviation;
  r.threshold = threshold;
  r.pass = deviation <= threshold;
  return r;
}

RequirementVerdict vacuous_requirement(std::string name, std::size_t k, std::string note) {
  RequirementVerdict r;
  r.name = std::move(name);
  r.k = k;
  r.pass = true;
  r.vacuous = true;
  r.note = std::move(note);
  return r;
}

}  // namespace

std::vector<RequirementVerdict> check_requirements(const ConstructionTrace& trace, std::size_t k) {
  std::vector<RequirementVerdict> out;
  if (k == 0 || k > trace.stages.size()) throw std::out_of_range("check_requirements: stage not in trace");
  const StageRecord& st = trace.stage(k);
  const StagePlan& plan = trace.plan;
  const Schedule& sched = trace.sched;
  const auto& tol = trace.params.tolerance;
  const unsigned l_cap = trace.params.l_cap;
  const Base v = st.v;
  const double q = plan.q(v).value();
  DigitCache cache(trace.xi());
  const auto eps = [](long e) { return pow2(e); };
  const long kk = static_cast<long>(k);

  const std::uint64_t F1 = sched.b(st.P1), F2 = sched.b(st.P2);
  const unsigned lk = effective_l(v, l_cap, k);
  {
    const auto s = scan_window(cache.get(v, F2), lk, F1, F1, q);
    out.push_back(make_verdict("F", k, lk, F1, F1, s.max_abs_dev, threshold_or(tol, eps(-kk))));
  }
  {
    const auto s = scan_window(cache.get(v, F2), lk, F2, F2, 1.0);
    out.push_back(make_verdict("S1", k, lk, F2, F2, s.max_abs_dev, threshold_or(tol, eps(-kk - 1))));
  }
  const auto next = recurring_next_base(plan, k);
  if (next) {
    const std::uint64_t n = sched.angle_base(st.P2 + 1, *next);
    const unsigned l2 = effective_l(*next, l_cap, k);
    const auto s = scan_window(cache.get(*next, n), l2, n, n, 1.0);
    out.push_back(make_verdict("S2", k, l2, n, n, s.max_abs_dev, threshold_or(tol, eps(-kk))));
  } else {
    out.push_back(vacuous_requirement("S2", k, "v(k+1) has not occurred before stage k"));
  }

  bool any_r = false;
  if (k > 1) {
    const std::size_t prev_p2 = trace.stage(k - 1).P2;
    for (std::size_t kp = 1; kp < k; ++kp) {
      const Base vp = trace.stage(kp).v;
      if (equivalent(vp, v)) continue;
      any_r = true;
      const std::uint64_t from = sched.angle_base(prev_p2 + 1, vp) + 1;
      const std::uint64_t to = sched.angle_base(st.P2 + 1, vp);
      const unsigned lr = effective_l(vp, l_cap, kp);
      const auto s = scan_window(cache.get(vp, to), lr, from, to, 1.0);
      auto r = make_verdict("R", k, lr, from, to, s.max_abs_dev, threshold_or(tol, eps(-static_cast<long>(kp) - 1)));
      r.note = "k'=" + std::to_string(kp);
      out.push_back(std::move(r));
    }
  }
  if (!any_r) out.push_back(vacuous_requirement("R", k, "no earlier non-equivalent base"));

  {
    const auto s = scan_window(cache.get(v, F2), lk, F1, F2, q);
    out.push_back(make_verdict("T1", k, lk, F1, F2, s.max_shortfall, threshold_or(tol, eps(-kk + 1))));
  }
  if (next) {
    if (k + 1 > trace.stages.size() || trace.stage(k + 1).P1 == 0) {
      RequirementVerdict r;
      r.name = "T2";
      r.k = k;
      r.unavailable = true;
      r.note = "stage k+1 not in trace";
      out.push_back(std::move(r));
    } else {
      const std::uint64_t from = sched.angle_base(st.P2 + 1, *next) + 1;
      const std::uint64_t to = sched.angle_base(trace.stage(k + 1).P1 + 1, *next);
      const unsigned l2 = effective_l(*next, l_cap, k);
      const double q2 = plan.q(*next).value();
      const auto s = scan_window(cache.get(*next, to), l2, from, to, q2);
      out.push_back(make_verdict("T2", k, l2, from, to, s.max_shortfall, threshold_or(tol, eps(-kk + 1))));
    }
  } else {
    out.push_back(vacuous_requirement("T2", k, "v(k+1) has not occurred before stage k"));
  }
  return out;
}

std::size_t first_unstable_block(const ConstructionTrace& trace) {
  DigitCache cache(trace.xi());
  for (const auto& s : trace.steps) {
    const DigitWord& d = cache.get(s.u, fixed_length(trace, s.u));
    if (d.slice(s.a, s.b - s.a - 2) != s.digit_block) return s.m;
  }
  return 0;
}

DigitWord stage_digits(const ConstructionTrace& trace, Base v) {
  return digits_prefix(trace.xi(), v, fixed_length(trace, v));
}

// ---------------------------------------------------------------------------

namespace {

std::pair<std::size_t, int> stage_of(const ConstructionTrace& trace, std::size_t m) {
  for (const auto& st : trace.stages) {
    if (m >= st.first_step && m <= st.P2) return {st.k, m <= st.P1 ? 1 : 2};
  }
  return {0, 0};
}

}  // namespace

void write_trace_csv(std::ostream& out, const ConstructionTrace& trace) {
  out << "m,k,substage,criterion,u,a_m,b_m,block,objective\n";
  char buf[64];
  for (const auto& s : trace.steps) {
    const auto [k, sub] = stage_of(trace, s.m);
    std::snprintf(buf, sizeof buf, "%.17g", s.objective);
    out << s.m << ',' << k << ',' << sub << ',' << s.criterion << ',' << s.u << ',' << s.a << ',' << s.b << ','
        << s.digit_block.str() << ',' << buf << '\n';
  }
}

void write_monitor_json(std::ostream& out, const ConstructionTrace& trace) {
  using nlohmann::json;
  json j;
  j["complete"] = trace.complete;
  j["steps"] = trace.steps.size();
  j["unstable_steps"] = trace.unstable_steps;
  j["tolerance"] = trace.params.tolerance ? json(*trace.params.tolerance) : json(nullptr);
  json stages = json::array();
  for (const auto& st : trace.stages) {
    json s;
    s["k"] = st.k;
    s["v"] = st.v;
    s["v_star"] = st.v_star;
    s["first_step"] = st.first_step;
    s["P1"] = st.P1;
    s["P2"] = st.P2;
    s["budget_exhausted"] = st.budget_exhausted;
    s["entropy_F1"] = st.entropy_f1;
    s["entropy_F2"] = st.entropy_f2;
    json reports = json::array();
    for (const auto& r : st.reports) {
      json checks = json::array();
      for (const auto& c : r.checks) {
        checks.push_back({{"name", c.name}, {"pass", c.pass}, {"vacuous", c.vacuous}, {"value", c.value},
                          {"threshold", c.threshold}});
      }
      reports.push_back({{"m", r.m}, {"done", r.done()}, {"checks", checks}});
    }
    s["step_checks"] = reports;
    stages.push_back(s);
  }
  j["stages"] = stages;
  json monitors = json::array();
  for (const auto& r : trace.monitors) {
    monitors.push_back({{"name", r.name},
                        {"k", r.k},
                        {"l_max", r.l_max},
                        {"n_from", r.n_from},
                        {"n_to", r.n_to},
                        {"deviation", r.deviation},
                        {"threshold", r.threshold},
                        {"pass", r.pass},
                        {"vacuous", r.vacuous},
                        {"unavailable", r.unavailable},
                        {"note", r.note}});
  }
  j["monitors"] = monitors;
  out << j.dump(2) << '\n';
}

void export_trace(const std::filesystem::path& dir, const ConstructionTrace& trace) {
  std::filesystem::create_directories(dir);
  std::ostringstream csv, js;
  write_trace_csv(csv, trace);
  write_monitor_json(js, trace);
  write_file_atomic(dir / "trace.csv", csv.str());
  write_file_atomic(dir / "monitors.json", js.str());
  std::set<Base> written;
  for (const auto& st : trace.stages) {
    if (!written.insert(st.v).second) continue;
    write_digit_file(dir / ("digits_base" + std::to_string(st.v) + ".txt"), stage_digits(trace, st.v));
  }
}

}  // namespace fsdim
