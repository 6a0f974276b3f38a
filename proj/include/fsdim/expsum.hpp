#pragma once

// Exponential sums: e(x), Weyl averages of b^{j-1} x, the step objective
// A_m, sin-ratio products, the constant eta and the explicit Weyl
// certificate thresholds T'(eps) = ceil(64/eps^2), gamma'(eps) = eps^4/2048.

#include "fsdim/base_arith.hpp"
#include "fsdim/schedule.hpp"

#include <complex>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <vector>

namespace fsdim {

using Complex = std::complex<double>;

/// e^{2 pi i x}.
Complex e_of(double x);

/// frac(b^{j-1} x) for j = 1..n, assembled from exact base-b digits of x.
std::vector<double> shift_orbit(const ExactFraction& x, Base b, std::size_t n);

/// (1/n) sum_{j=1}^n e(t b^{j-1} x), each argument reduced exactly mod 1.
/// Throws std::invalid_argument for t = 0 or n = 0.
Complex weyl_average(const ExactFraction& x, Base b, long t, std::size_t n);

struct WeylReport {
  Base base = 2;
  long t_range = 0;
  std::size_t n = 0;
  std::map<long, Complex> averages;  // 0 < |t| <= t_range
  double max_modulus = 0.0;

  void write_csv(std::ostream& out) const;
};

enum class WeylRoute {
  automatic,
  /// Sums e(t y_j) over the orbit for every t.
  direct,
  /// DFT of the orbit's residue histogram (denominators up to kSpectralMaxDenominator).
  spectral,
};

inline constexpr std::uint64_t kSpectralMaxDenominator = std::uint64_t{1} << 22;

/// Averages for all 0 < |t| <= t_max over the first n orbit points.
WeylReport weyl_report(const ExactFraction& x, Base b, long t_max, std::size_t n,
                       WeylRoute route = WeylRoute::automatic);

/// A_m(x): sum over 0 < |t| <= min(m, t_cap) and h <= m with u(h) !~ u(m) of
/// |sum_{j=<m;u(h)>+1}^{<m+1;u(h)>} e(u(h)^{j-1} t x)|^2. Terms sharing a base
/// share one orbit; powers of e(y_j) are built by repeated multiplication.
double a_m(const ExactFraction& x, std::size_t m, const Schedule& sched, std::optional<long> t_cap = std::nullopt);

/// Same quantity by the literal triple loop, one exact reduction per term.
double a_m_reference(const ExactFraction& x, std::size_t m, const Schedule& sched,
                     std::optional<long> t_cap = std::nullopt);

/// |sin(p pi x) / (p sin(pi x))|, equal to 1 at integers.
double sin_ratio(std::uint64_t p, double x);

/// prod_{i=i_from}^{i_to} sin_ratio(p, L / s^i); 1 for an empty range.
double sin_ratio_product(std::uint64_t p, Base s, double L, std::uint64_t i_from, std::uint64_t i_to);

/// Lower bound for prod_{i > i_after} sin_ratio(p, L / s^i) from
/// sin(nx)/(n sin x) >= 1 - (n^2-1)x^2/6; 0 when that bound is unavailable.
double sin_ratio_tail_lower_bound(std::uint64_t p, Base s, double L, std::uint64_t i_after);

/// prod_{i=1}^{terms} cos(pi / 2^{i+1}); decreases to 2/pi.
double eta_constant(std::size_t terms);

/// sin(nx)/(n sin x) >= 1 - (n^2-1)x^2/6 - 1e-12 for n >= 2, |x| < 1.
bool check_sin_lower_bound(std::uint64_t n, double x);

struct CertificateParams {
  long t_max;    // T'
  double gamma;  // gamma'
};

/// T'(eps) = ceil(64/eps^2), gamma'(eps) = eps^4/2048.
CertificateParams certificate_params(double eps);

/// Heuristic extension to blocks of length l: the single-digit thresholds at
/// eps / (safety * l).
CertificateParams certificate_params_for_blocks(double eps, unsigned l, double safety = 4.0);

struct CertificateResult {
  bool passes;
  CertificateParams params;
  WeylReport report;
};

/// Passes iff every |average| with 0 < |t| <= T' is below gamma'.
CertificateResult weyl_entropy_certificate(const ExactFraction& x, Base b, double eps, std::size_t n);
CertificateResult weyl_entropy_certificate(const ExactFraction& x, Base b, const CertificateParams& params,
                                           std::size_t n);

}  // namespace fsdim
