#include "fsdim/expsum.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <ostream>
#include <stdexcept>

namespace fsdim {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
}

Complex e_of(double x) {
  const double f = x - std::floor(x);
  // Exact values at the quarter points keep e(0), e(1/4), e(1/2) exact.
  if (f == 0.0) return {1.0, 0.0};
  if (f == 0.25) return {0.0, 1.0};
  if (f == 0.5) return {-1.0, 0.0};
  if (f == 0.75) return {0.0, -1.0};
  return {std::cos(kTwoPi * f), std::sin(kTwoPi * f)};
}

std::vector<double> shift_orbit(const ExactFraction& x, Base b, std::size_t n) {
  const auto guard = static_cast<std::size_t>(std::ceil(64.0 / std::log2(static_cast<double>(b)))) + 1;
  const DigitWord digits = digits_prefix(x, b, n + guard);
  std::vector<double> y(n);
  const double base = b;
  double tail = 0.0;
  for (std::size_t j = n + guard; j-- > 0;) {
    tail = (static_cast<double>(digits[j]) + tail) / base;
    if (j < n) y[j] = std::min(tail, std::nextafter(1.0, 0.0));
  }
  return y;
}

Complex weyl_average(const ExactFraction& x, Base b, long t, std::size_t n) {
  if (t == 0) throw std::invalid_argument("weyl_average: t must be nonzero");
  if (n == 0) throw std::invalid_argument("weyl_average: n must be positive");
  const mpz_class& den = x.denominator();
  mpz_class r = scaled_residue(x, mpz_class(t), b, 0);
  Complex sum = 0.0;
  for (std::size_t j = 1; j <= n; ++j) {
    sum += e_of(residue_to_unit(r, den));
    r *= b;
    mpz_mod(r.get_mpz_t(), r.get_mpz_t(), den.get_mpz_t());
  }
  return sum / static_cast<double>(n);
}

void WeylReport::write_csv(std::ostream& out) const {
  out << "t,re,im,modulus\n";
  char buf[128];
  for (const auto& [t, z] : averages) {
    std::snprintf(buf, sizeof buf, "%ld,%.15e,%.15e,%.15e\n", t, z.real(), z.imag(), std::abs(z));
    out << buf;
  }
}

namespace {

void finish(WeylReport& report) {
  report.max_modulus = 0.0;
  for (const auto& [t, z] : report.averages) report.max_modulus = std::max(report.max_modulus, std::abs(z));
}

WeylReport report_direct(const ExactFraction& x, Base b, long t_max, std::size_t n) {
  WeylReport report{b, t_max, n, {}, 0.0};
  const auto y = shift_orbit(x, b, n);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (long t = 1; t <= t_max; ++t) {
    const auto td = static_cast<double>(t);
    Complex s = 0.0;
    for (const double yj : y) {
      const double phase = td * yj;
      s += e_of(phase - std::floor(phase));
    }
    s *= inv_n;
    report.averages[t] = s;
    report.averages[-t] = std::conj(s);
  }
  finish(report);
  return report;
}

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};

WeylReport report_spectral(const ExactFraction& x, Base b, long t_max, std::size_t n) {
  if (x.denominator() > kSpectralMaxDenominator) {
    throw std::invalid_argument("spectral Weyl route needs a denominator up to 2^22");
  }
  const std::uint64_t den = x.denominator().get_ui();
  const auto size = static_cast<std::size_t>(den);
  // Real histogram: the half-spectrum suffices, with bin den - k the conjugate of bin k.
  std::unique_ptr<double[], FftwFree> in(fftw_alloc_real(size));
  std::unique_ptr<fftw_complex[], FftwFree> out(fftw_alloc_complex(size / 2 + 1));
  if (!in || !out) throw std::bad_alloc();
  // Plan before filling: FFTW may scribble on the arrays while planning.
  fftw_plan plan = fftw_plan_dft_r2c_1d(static_cast<int>(size), in.get(), out.get(), FFTW_ESTIMATE);
  if (!plan) throw std::runtime_error("FFTW planning failed");
  for (std::size_t i = 0; i < size; ++i) in[i] = 0.0;
  std::uint64_t r = x.numerator().get_ui() % den;
  for (std::size_t j = 0; j < n; ++j) {
    in[r] += 1.0;
    r = static_cast<std::uint64_t>(static_cast<UInt128>(r) * b % den);
  }
  fftw_execute(plan);
  fftw_destroy_plan(plan);

  WeylReport report{b, t_max, n, {}, 0.0};
  const double inv_n = 1.0 / static_cast<double>(n);
  for (long t = 1; t <= t_max; ++t) {
    // The forward transform carries e(-tk/den); the sum wants e(+tk/den).
    const auto k = static_cast<std::size_t>(static_cast<std::uint64_t>(t) % den);
    const Complex s = k <= size / 2 ? Complex(out[k][0] * inv_n, -out[k][1] * inv_n)
                                    : Complex(out[size - k][0] * inv_n, out[size - k][1] * inv_n);
    report.averages[t] = s;
    report.averages[-t] = std::conj(s);
  }
  finish(report);
  return report;
}

}  // namespace

WeylReport weyl_report(const ExactFraction& x, Base b, long t_max, std::size_t n, WeylRoute route) {
  DigitWord::check_base(b);
  if (t_max < 1) throw std::invalid_argument("weyl_report: t_max must be >= 1");
  if (n == 0) throw std::invalid_argument("weyl_report: n must be positive");
  if (route == WeylRoute::automatic) {
    route = WeylRoute::direct;
    if (x.denominator() <= kSpectralMaxDenominator) {
      const double den = x.denominator().get_d();
      const double spectral_cost = 8.0 * den * std::log2(den + 2.0) + static_cast<double>(n);
      const double direct_cost = static_cast<double>(n) * static_cast<double>(t_max);
      if (spectral_cost < direct_cost) route = WeylRoute::spectral;
    }
  }
  return route == WeylRoute::spectral ? report_spectral(x, b, t_max, n) : report_direct(x, b, t_max, n);
}

// ---------------------------------------------------------------------------

namespace {

long effective_t(std::size_t m, std::optional<long> t_cap) {
  long t = static_cast<long>(m);
  if (t_cap) t = std::min(t, *t_cap);
  return std::max(t, 0L);
}

}  // namespace

double a_m(const ExactFraction& x, std::size_t m, const Schedule& sched, std::optional<long> t_cap) {
  const Base um = sched.u(m);
  const long T = effective_t(m, t_cap);
  // Multiplicity of each non-equivalent base among u(1..m).
  std::map<Base, std::size_t> bases;
  for (std::size_t h = 1; h <= m; ++h) {
    if (!equivalent(sched.u(h), um)) ++bases[sched.u(h)];
  }
  const mpz_class& den = x.denominator();
  double total = 0.0;
  std::vector<Complex> z, w;
  for (const auto& [r, mult] : bases) {
    const std::uint64_t lo = sched.angle_base(m, r);
    const std::uint64_t hi = sched.angle_base(m + 1, r);
    z.clear();
    mpz_class res = scaled_residue(x, mpz_class(1), r, lo);  // j = lo + 1
    for (std::uint64_t j = lo + 1; j <= hi; ++j) {
      z.push_back(e_of(residue_to_unit(res, den)));
      res *= r;
      mpz_mod(res.get_mpz_t(), res.get_mpz_t(), den.get_mpz_t());
    }
    w = z;
    double sum_t = 0.0;
    for (long t = 1; t <= T; ++t) {
      Complex s = 0.0;
      for (std::size_t i = 0; i < w.size(); ++i) {
        s += w[i];
        w[i] *= z[i];
      }
      sum_t += std::norm(s);
    }
    // |S_{-t}| = |S_t|.
    total += 2.0 * static_cast<double>(mult) * sum_t;
  }
  return total;
}

double a_m_reference(const ExactFraction& x, std::size_t m, const Schedule& sched, std::optional<long> t_cap) {
  const Base um = sched.u(m);
  const long T = effective_t(m, t_cap);
  double total = 0.0;
  for (long t = -T; t <= T; ++t) {
    if (t == 0) continue;
    for (std::size_t h = 1; h <= m; ++h) {
      const Base r = sched.u(h);
      if (equivalent(r, um)) continue;
      Complex s = 0.0;
      for (std::uint64_t j = sched.angle_base(m, r) + 1; j <= sched.angle_base(m + 1, r); ++j) {
        s += e_of(frac_of_scaled(x, mpz_class(t), r, j - 1));
      }
      total += std::norm(s);
    }
  }
  return total;
}

// ---------------------------------------------------------------------------

double sin_ratio(std::uint64_t p, double x) {
  if (p < 2) throw std::invalid_argument("sin_ratio: p must be >= 2");
  // |f| has period 1; reduce to [-1/2, 1/2] first.
  const double r = x - std::round(x);
  if (r == 0.0) return 1.0;
  const double pd = static_cast<double>(p);
  const double value = std::abs(std::sin(pd * std::numbers::pi * r) / (pd * std::sin(std::numbers::pi * r)));
  return std::min(value, 1.0);
}

double sin_ratio_product(std::uint64_t p, Base s, double L, std::uint64_t i_from, std::uint64_t i_to) {
  double product = 1.0;
  for (std::uint64_t i = i_from; i <= i_to && i_from <= i_to; ++i) {
    product *= sin_ratio(p, L * std::pow(static_cast<double>(s), -static_cast<double>(i)));
  }
  return product;
}

double sin_ratio_tail_lower_bound(std::uint64_t p, Base s, double L, std::uint64_t i_after) {
  const double sd = s;
  const double x_first = std::numbers::pi * std::abs(L) * std::pow(sd, -static_cast<double>(i_after + 1));
  if (!(x_first < 1.0)) return 0.0;
  // prod (1 - c_i) >= 1 - sum c_i with c_i = (p^2-1) x_i^2 / 6, a geometric series in s^{-2}.
  const double pd = static_cast<double>(p);
  const double c = (pd * pd - 1.0) * x_first * x_first / 6.0;
  const double sum = c / (1.0 - 1.0 / (sd * sd));
  return std::max(0.0, 1.0 - sum);
}

double eta_constant(std::size_t terms) {
  if (terms < 1) throw std::invalid_argument("eta_constant: terms must be >= 1");
  double product = 1.0;
  for (std::size_t i = 1; i <= terms; ++i) product *= std::cos(std::numbers::pi / std::ldexp(1.0, static_cast<int>(i + 1)));
  return product;
}

bool check_sin_lower_bound(std::uint64_t n, double x) {
  if (n < 2) throw std::invalid_argument("check_sin_lower_bound: n must be >= 2");
  if (!(std::abs(x) < 1.0)) throw std::invalid_argument("check_sin_lower_bound: |x| must be < 1");
  if (x == 0.0) return true;
  const double nd = static_cast<double>(n);
  const double lhs = std::sin(nd * x) / (nd * std::sin(x));
  const double rhs = 1.0 - (nd * nd - 1.0) * x * x / 6.0;
  return lhs >= rhs - 1e-12;
}

CertificateParams certificate_params(double eps) {
  if (!(eps > 0.0 && eps < 1.0)) throw std::invalid_argument("certificate: eps must lie in (0,1)");
  // The small slack keeps 64/eps^2 from rounding just above an integer.
  const double t = 64.0 / (eps * eps);
  const auto t_max = static_cast<long>(std::ceil(t * (1.0 - 1e-12)));
  const double e2 = eps * eps;
  return CertificateParams{t_max, e2 * e2 / 2048.0};
}

CertificateParams certificate_params_for_blocks(double eps, unsigned l, double safety) {
  if (l < 1) throw std::invalid_argument("certificate: block length must be >= 1");
  if (!(safety >= 1.0)) throw std::invalid_argument("certificate: safety factor must be >= 1");
  return certificate_params(eps / (safety * static_cast<double>(l)));
}

CertificateResult weyl_entropy_certificate(const ExactFraction& x, Base b, const CertificateParams& params,
                                           std::size_t n) {
  WeylReport report = weyl_report(x, b, params.t_max, n);
  const bool passes = report.max_modulus < params.gamma;
  return CertificateResult{passes, params, std::move(report)};
}

CertificateResult weyl_entropy_certificate(const ExactFraction& x, Base b, double eps, std::size_t n) {
  return weyl_entropy_certificate(x, b, certificate_params(eps), n);
}

}  // namespace fsdim
