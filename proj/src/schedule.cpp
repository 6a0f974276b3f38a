#include "fsdim/schedule.hpp"

#include "fsdim/expsum.hpp"

#include <mpfr.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>

namespace fsdim {

namespace {

// Integer a-th root of b when exact.
std::optional<Base> exact_root(Base b, unsigned a) {
  auto t = static_cast<std::uint64_t>(std::llround(std::pow(static_cast<double>(b), 1.0 / a)));
  for (std::uint64_t cand = (t > 1 ? t - 1 : 1); cand <= t + 1; ++cand) {
    std::uint64_t v = 1;
    bool over = false;
    for (unsigned i = 0; i < a && !over; ++i) {
      v *= cand;
      over = v > b;
    }
    if (!over && v == b && cand >= 2) return static_cast<Base>(cand);
  }
  return std::nullopt;
}

class Mpfr {
 public:
  explicit Mpfr(mpfr_prec_t prec = 256) { mpfr_init2(v_, prec); }
  ~Mpfr() { mpfr_clear(v_); }
  Mpfr(const Mpfr&) = delete;
  Mpfr& operator=(const Mpfr&) = delete;
  mpfr_ptr get() { return v_; }

 private:
  mpfr_t v_;
};

}  // namespace

PrimitiveRoot primitive_root(Base b) {
  DigitWord::check_base(b);
  for (unsigned a = static_cast<unsigned>(std::bit_width(b)) - 1; a >= 2; --a) {
    if (const auto t = exact_root(b, a)) {
      const PrimitiveRoot inner = primitive_root(*t);
      return PrimitiveRoot{inner.root, inner.exponent * a};
    }
  }
  return PrimitiveRoot{b, 1};
}

bool equivalent(Base r, Base s) { return primitive_root(r).root == primitive_root(s).root; }

Base non_perfect_power(std::size_t i) {
  static std::vector<Base> cache;
  Base next = cache.empty() ? 2 : cache.back() + 1;
  while (cache.size() <= i) {
    if (primitive_root(next).exponent == 1) cache.push_back(next);
    ++next;
  }
  return cache[i];
}

Base r_seq(std::size_t k) {
  if (k < 1) throw std::invalid_argument("r_seq: k starts at 1");
  return non_perfect_power(static_cast<std::size_t>(std::countr_zero(k)));
}

std::string describe(const Growth& g) {
  if (std::holds_alternative<ExponentialGrowth>(g)) return "exponential";
  if (const auto* s = std::get_if<ScaledGrowth>(&g)) {
    return "scaled " + std::to_string(s->c0) + " " + std::to_string(s->c1);
  }
  std::string out = "table";
  for (const auto v : std::get<TableGrowth>(g).values) out += " " + std::to_string(v);
  return out;
}

std::uint64_t ceil_div_ln(std::uint64_t value, Base r) {
  DigitWord::check_base(r);
  if (value == 0) return 0;
  const long double q = static_cast<long double>(value) / std::log(static_cast<long double>(r));
  const long double nearest = std::round(q);
  if (std::fabs(q - nearest) > 1e-9L * std::max(1.0L, q)) return static_cast<std::uint64_t>(std::ceil(q));
  // value / ln r is never an integer, so ceil is k iff (k-1) ln r < value < k ln r.
  Mpfr ln_r, bound;
  mpfr_set_ui(ln_r.get(), r, MPFR_RNDN);
  mpfr_log(ln_r.get(), ln_r.get(), MPFR_RNDN);
  auto k = static_cast<std::uint64_t>(nearest);
  for (;;) {
    mpfr_mul_ui(bound.get(), ln_r.get(), k, MPFR_RNDN);
    if (mpfr_cmp_ui(bound.get(), value) <= 0) {
      ++k;
      continue;
    }
    if (k == 0) return 0;
    mpfr_mul_ui(bound.get(), ln_r.get(), k - 1, MPFR_RNDN);
    if (mpfr_cmp_ui(bound.get(), value) >= 0) {
      --k;
      continue;
    }
    return k;
  }
}

// ---------------------------------------------------------------------------

Schedule::Schedule(Growth growth, std::vector<Base> u) : growth_(std::move(growth)), u_(std::move(u)) {
  for (const Base b : u_) DigitWord::check_base(b);
  if (const auto* s = std::get_if<ScaledGrowth>(&growth_); s && s->c1 < 1) {
    throw std::invalid_argument("scaled growth needs c1 >= 1");
  }
  if (const auto* t = std::get_if<TableGrowth>(&growth_)) {
    std::uint64_t prev = 0;
    for (const auto v : t->values) {
      if (v <= prev) throw std::invalid_argument("growth table must be positive and strictly increasing");
      prev = v;
    }
  }
}

Base Schedule::u(std::size_t m) const {
  if (m < 1 || m > u_.size()) throw std::out_of_range("u(" + std::to_string(m) + ") undefined");
  return u_[m - 1];
}

void Schedule::push(Base b) {
  DigitWord::check_base(b);
  u_.push_back(b);
}

std::uint64_t Schedule::angle(std::size_t m) const {
  if (m == 0) return 0;
  if (std::holds_alternative<ExponentialGrowth>(growth_)) {
    const std::uint64_t u1 = u(1);
    if (m > 1900) throw std::overflow_error("<m> exceeds 64 bits");
    // e^{sqrt m} is irrational for m >= 1, so the ceiling splits off the integer part.
    Mpfr x;
    mpfr_set_ui(x.get(), static_cast<unsigned long>(m), MPFR_RNDN);
    mpfr_sqrt(x.get(), x.get(), MPFR_RNDN);
    mpfr_exp(x.get(), x.get(), MPFR_RNDN);
    mpfr_ceil(x.get(), x.get());
    const std::uint64_t e_part = mpfr_get_uj(x.get(), MPFR_RNDN);
    const auto mm = static_cast<UInt128>(m);
    const UInt128 total = e_part + 2 * u1 * mm * mm * mm;
    if (total > std::numeric_limits<std::uint64_t>::max()) throw std::overflow_error("<m> exceeds 64 bits");
    return static_cast<std::uint64_t>(total);
  }
  if (const auto* s = std::get_if<ScaledGrowth>(&growth_)) {
    const auto mm = static_cast<UInt128>(m);
    const UInt128 total = s->c0 + s->c1 * mm * mm;
    if (total > std::numeric_limits<std::uint64_t>::max()) throw std::overflow_error("<m> exceeds 64 bits");
    return static_cast<std::uint64_t>(total);
  }
  const auto& values = std::get<TableGrowth>(growth_).values;
  if (m > values.size()) throw std::out_of_range("growth table has no entry for m = " + std::to_string(m));
  return values[m - 1];
}

std::uint64_t Schedule::angle_base(std::size_t m, Base r) const { return ceil_div_ln(angle(m), r); }

std::uint64_t Schedule::block_length(std::size_t m) const {
  const auto lo = a(m);
  const auto hi = b(m);
  return hi >= lo + 2 ? hi - lo - 2 : 0;
}

// ---------------------------------------------------------------------------

double AlphaTable::get(Base r, Base s) const {
  const auto it = entries_.find(std::minmax(r, s));
  return it == entries_.end() ? kCap : it->second;
}

void AlphaTable::set(Base r, Base s, double value) {
  if (!(value > 0.0 && value <= kCap)) throw std::invalid_argument("alpha values must lie in (0, 1/2]");
  entries_[std::minmax(r, s)] = value;
}

void StagePlan::set_q(Base b, Ratio q) {
  DigitWord::check_base(b);
  if (q.num() == 0 || q.num() > q.den()) throw PlanError("q_" + std::to_string(b) + " must lie in (0,1]");
  const Base root = primitive_root(b).root;
  const auto [it, inserted] = q_.emplace(root, q);
  if (!inserted && it->second != q) {
    throw PlanError("q_" + std::to_string(b) + " = " + q.str() + " conflicts with q = " + it->second.str() +
                    " already set for the class of " + std::to_string(root));
  }
}

bool StagePlan::has_q(Base b) const { return q_.count(primitive_root(b).root) != 0; }

Ratio StagePlan::q(Base b) const {
  const auto it = q_.find(primitive_root(b).root);
  if (it == q_.end()) throw PlanError("no target dimension for the class of base " + std::to_string(b));
  return it->second;
}

Base StagePlan::p_of(Base b) const {
  const Ratio qb = q(b);
  mpz_class value;
  mpz_ui_pow_ui(value.get_mpz_t(), b, qb.num());
  mpz_root(value.get_mpz_t(), value.get_mpz_t(), qb.den());
  if (!value.fits_uint_p()) throw PlanError("p(" + std::to_string(b) + ") overflows");
  return static_cast<Base>(value.get_ui());
}

namespace {

Base checked_power(Base r, std::uint64_t exponent) {
  std::uint64_t v = 1;
  for (std::uint64_t i = 0; i < exponent; ++i) {
    v *= r;
    if (v > std::numeric_limits<Base>::max()) throw PlanError("base power overflows");
  }
  return static_cast<Base>(v);
}

}  // namespace

Base StagePlan::v(std::size_t k) const { return checked_power(r(k), d(k)); }
Base StagePlan::v_star(std::size_t k) const { return checked_power(r(k), e(k)); }

StagePlan StagePlan::parse(std::istream& in) {
  StagePlan plan;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    std::string word;
    if (!(ls >> word)) continue;
    const std::string where = "plan line " + std::to_string(line_no) + ": ";
    try {
      if (word == "q") {
        Base b = 0;
        std::string ratio;
        if (!(ls >> b >> ratio)) throw PlanError(where + "expected 'q <base> <num>/<den>'");
        plan.set_q(b, Ratio::parse(ratio));
      } else if (word == "growth") {
        std::string kind;
        ls >> kind;
        if (kind == "exponential") {
          plan.growth = ExponentialGrowth{};
        } else if (kind == "scaled") {
          ScaledGrowth g;
          if (!(ls >> g.c0 >> g.c1)) throw PlanError(where + "expected 'growth scaled <c0> <c1>'");
          plan.growth = g;
        } else if (kind == "table") {
          TableGrowth g;
          std::uint64_t v = 0;
          while (ls >> v) g.values.push_back(v);
          plan.growth = g;
        } else {
          throw PlanError(where + "unknown growth '" + kind + "'");
        }
        Schedule check(plan.growth);
      } else if (word == "alpha") {
        Base r = 0, s = 0;
        double value = 0;
        if (!(ls >> r >> s >> value)) throw PlanError(where + "expected 'alpha <r> <s> <value>'");
        plan.alpha.set(r, s, value);
      } else {
        throw PlanError(where + "unknown directive '" + word + "'");
      }
      std::string extra;
      if (ls >> extra) throw PlanError(where + "trailing text '" + extra + "'");
    } catch (const PlanError&) {
      throw;
    } catch (const std::exception& e) {
      throw PlanError(where + e.what());
    }
  }
  return plan;
}

StagePlan StagePlan::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw PlanError("cannot open plan file " + path.string());
  return parse(in);
}

void StagePlan::write(std::ostream& out) const {
  for (const auto& [root, q] : q_) out << "q " << root << ' ' << q.str() << '\n';
  out << "growth " << describe(growth) << '\n';
  for (const auto& [pair, value] : alpha.entries()) {
    out << "alpha " << pair.first << ' ' << pair.second << ' ' << value << '\n';
  }
}

// ---------------------------------------------------------------------------

double beta_m(const Schedule& sched, const AlphaTable& alpha, std::size_t m) {
  if (m > sched.size()) throw std::out_of_range("beta_m: u(m) undefined");
  std::vector<Base> distinct(sched.bases().begin(), sched.bases().begin() + static_cast<std::ptrdiff_t>(m));
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  double beta = AlphaTable::kCap;
  for (std::size_t i = 0; i < distinct.size(); ++i) {
    for (std::size_t j = i + 1; j < distinct.size(); ++j) {
      if (!equivalent(distinct[i], distinct[j])) beta = std::min(beta, alpha.get(distinct[i], distinct[j]));
    }
  }
  return beta;
}

bool GoodSequenceReport::all_pass() const {
  return std::all_of(rows.begin(), rows.end(), [](const GoodSequenceRow& r) { return r.all(); });
}

std::size_t GoodSequenceReport::first_failure() const {
  for (const auto& r : rows) {
    if (!r.all()) return r.m;
  }
  return 0;
}

GoodSequenceReport validate_good_sequence(const Schedule& sched, const AlphaTable& alpha, const StagePlan& plan,
                                          const DiscrepancyParams& disc, std::size_t m_max,
                                          std::size_t tail_terms) {
  if (m_max < 1 || m_max > sched.size()) throw std::out_of_range("validate_good_sequence: m_max outside schedule");
  const double eta = 2.0 / std::numbers::pi;
  const double beta_1 = beta_m(sched, alpha, 1);
  const auto n_for = [&](Base b) { return disc.has_base(b) ? disc.for_base(b).N : BaseConstants{}.N; };

  GoodSequenceReport report;
  bool switched = false;
  for (std::size_t m = 1; m <= m_max; ++m) {
    const Base um = sched.u(m);
    const Base p = plan.has_q(um) ? plan.p_of(um) : um;
    GoodSequenceRow row{};
    row.m = m;

    row.product_lower_bound = 1.0;
    if (m > 1) {
      // prod_{i >= b_m - 1} f(1/2^{i+1}) = prod_{i' >= b_m} f(1/2^{i'}).
      const std::uint64_t from = sched.b(m);
      const std::uint64_t to = from + tail_terms - 1;
      row.product_lower_bound = p < 2 ? 1.0
                                      : sin_ratio_product(p, 2, 1.0, from, to) *
                                            sin_ratio_tail_lower_bound(p, 2, 1.0, to);
    }
    row.cond1 = m == 1 || row.product_lower_bound >= eta;

    row.beta = beta_m(sched, alpha, m);
    row.cond2 = row.beta >= beta_1 / std::pow(static_cast<double>(m), 0.25);

    row.cond3 = static_cast<std::uint64_t>(um) <= static_cast<std::uint64_t>(sched.u(1)) * m;

    if (m > 1 && sched.u(m - 1) != um) switched = true;
    row.gap = sched.b(m) - sched.a(m);
    row.threshold = std::max(n_for(um), p >= 2 ? n_for(p) : std::size_t{0});
    row.cond4_vacuous = !switched;
    row.cond4 = row.cond4_vacuous || row.gap >= row.threshold;
    report.rows.push_back(row);
  }
  return report;
}

}  // namespace fsdim
