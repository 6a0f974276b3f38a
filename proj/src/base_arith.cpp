#include "fsdim/base_arith.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace fsdim {

ExactFraction::ExactFraction(mpz_class num, mpz_class den) : num_(std::move(num)), den_(std::move(den)) {
  if (den_ <= 0) throw std::domain_error("ExactFraction: denominator must be positive");
  if (num_ < 0 || num_ >= den_) {
    throw std::domain_error("ExactFraction: value " + num_.get_str() + "/" + den_.get_str() +
                            " outside [0,1)");
  }
  mpz_class g;
  mpz_gcd(g.get_mpz_t(), num_.get_mpz_t(), den_.get_mpz_t());
  if (g > 1) {
    mpz_divexact(num_.get_mpz_t(), num_.get_mpz_t(), g.get_mpz_t());
    mpz_divexact(den_.get_mpz_t(), den_.get_mpz_t(), g.get_mpz_t());
  }
  if (num_ == 0) den_ = 1;
}

ExactFraction ExactFraction::parse(std::string_view text) {
  const auto slash = text.find('/');
  try {
    if (slash == std::string_view::npos) {
      return ExactFraction(mpz_class(std::string(text)), mpz_class(1));
    }
    return ExactFraction(mpz_class(std::string(text.substr(0, slash))),
                         mpz_class(std::string(text.substr(slash + 1))));
  } catch (const std::invalid_argument&) {
    throw std::invalid_argument("ExactFraction: cannot parse '" + std::string(text) + "'");
  }
}

double ExactFraction::to_double() const { return residue_to_unit(num_, den_); }

std::string ExactFraction::str() const { return num_.get_str() + "/" + den_.get_str(); }

std::strong_ordering operator<=>(const ExactFraction& a, const ExactFraction& b) {
  const mpz_class lhs = a.num_ * b.den_;
  const mpz_class rhs = b.num_ * a.den_;
  const int c = cmp(lhs, rhs);
  if (c < 0) return std::strong_ordering::less;
  if (c > 0) return std::strong_ordering::greater;
  return std::strong_ordering::equal;
}

// ---------------------------------------------------------------------------

void DigitWord::check_base(Base base) {
  if (base < 2) throw std::invalid_argument("DigitWord: base must be >= 2");
}

DigitWord::DigitWord(Base base, std::vector<Digit> digits) : base_(base), digits_(std::move(digits)) {
  check_base(base);
  for (const Digit d : digits_) {
    if (d >= base_) {
      throw std::invalid_argument("DigitWord: digit " + std::to_string(d) + " not below base " +
                                  std::to_string(base_));
    }
  }
}

namespace {

constexpr std::string_view kChars = "0123456789abcdefghijklmnopqrstuvwxyz";

Digit char_value(char c) {
  if (c >= '0' && c <= '9') return static_cast<Digit>(c - '0');
  if (c >= 'a' && c <= 'z') return static_cast<Digit>(c - 'a' + 10);
  if (c >= 'A' && c <= 'Z') return static_cast<Digit>(c - 'A' + 10);
  throw std::invalid_argument(std::string("DigitWord: bad digit character '") + c + "'");
}

}  // namespace

DigitWord DigitWord::from_string(Base base, std::string_view text) {
  std::vector<Digit> digits;
  digits.reserve(text.size());
  for (const char c : text) digits.push_back(char_value(c));
  return DigitWord(base, std::move(digits));
}

void DigitWord::push_back(Digit d) {
  if (d >= base_) throw std::invalid_argument("DigitWord: digit out of range");
  digits_.push_back(d);
}

void DigitWord::append(const DigitWord& other) {
  if (other.base_ != base_) throw std::invalid_argument("DigitWord: base mismatch in append");
  digits_.insert(digits_.end(), other.digits_.begin(), other.digits_.end());
}

DigitWord DigitWord::prefix(std::size_t n) const { return slice(0, n); }

DigitWord DigitWord::slice(std::size_t from, std::size_t count) const {
  if (from > digits_.size() || count > digits_.size() - from) {
    throw std::out_of_range("DigitWord: slice out of range");
  }
  DigitWord out(base_);
  out.digits_.assign(digits_.begin() + static_cast<std::ptrdiff_t>(from),
                     digits_.begin() + static_cast<std::ptrdiff_t>(from + count));
  return out;
}

bool DigitWord::starts_with(const DigitWord& w) const {
  return w.base_ == base_ && w.size() <= size() && std::equal(w.digits_.begin(), w.digits_.end(), digits_.begin());
}

std::string DigitWord::str() const {
  std::string out;
  if (base_ <= 36) {
    out.reserve(digits_.size());
    for (const Digit d : digits_) out.push_back(kChars[d]);
    return out;
  }
  for (std::size_t i = 0; i < digits_.size(); ++i) {
    if (i) out.push_back('.');
    out += std::to_string(digits_[i]);
  }
  return out;
}

std::strong_ordering operator<=>(const DigitWord& a, const DigitWord& b) {
  if (const auto c = a.base_ <=> b.base_; c != 0) return c;
  return std::lexicographical_compare_three_way(a.digits_.begin(), a.digits_.end(), b.digits_.begin(),
                                                b.digits_.end());
}

// ---------------------------------------------------------------------------

mpz_class power(Base b, std::uint64_t n) {
  mpz_class out;
  mpz_ui_pow_ui(out.get_mpz_t(), b, n);
  return out;
}

double residue_to_unit(const mpz_class& r, const mpz_class& den) {
  // floor(r·2^64 / den) carries 64 significant bits of r/den. For long
  // denominators both sides drop all but their top 128 bits first, which
  // moves the result by less than 2^-126.
  const std::size_t bits = mpz_sizeinbase(den.get_mpz_t(), 2);
  mpz_class scaled, d;
  if (bits > 192) {
    const auto shift = static_cast<mp_bitcnt_t>(bits - 128);
    mpz_tdiv_q_2exp(scaled.get_mpz_t(), r.get_mpz_t(), shift);
    mpz_tdiv_q_2exp(d.get_mpz_t(), den.get_mpz_t(), shift);
  } else {
    scaled = r;
    d = den;
  }
  mpz_mul_2exp(scaled.get_mpz_t(), scaled.get_mpz_t(), 64);
  mpz_tdiv_q(scaled.get_mpz_t(), scaled.get_mpz_t(), d.get_mpz_t());
  return std::min(std::ldexp(scaled.get_d(), -64), std::nextafter(1.0, 0.0));
}

ExactFraction value_of_word(const DigitWord& w) {
  mpz_class num = 0;
  for (const Digit d : w.digits()) {
    num *= w.base();
    num += d;
  }
  return ExactFraction(std::move(num), power(w.base(), w.size()));
}

Digit digit_at(const ExactFraction& x, Base b, std::size_t i) {
  DigitWord::check_base(b);
  if (i < 1) throw std::invalid_argument("digit_at: positions start at 1");
  // r = num·b^{i-1} mod den; the digit is floor(r·b/den).
  mpz_class r;
  const mpz_class base(b);
  mpz_powm_ui(r.get_mpz_t(), base.get_mpz_t(), i - 1, x.denominator().get_mpz_t());
  r *= x.numerator();
  mpz_mod(r.get_mpz_t(), r.get_mpz_t(), x.denominator().get_mpz_t());
  r *= b;
  mpz_tdiv_q(r.get_mpz_t(), r.get_mpz_t(), x.denominator().get_mpz_t());
  return static_cast<Digit>(r.get_ui());
}

namespace {

// Writes exactly n base-b digits of value (value < b^n) into out[0..n).
void expand_digits(const mpz_class& value, Base b, std::size_t n, Digit* out,
                   std::map<std::size_t, mpz_class>& powers) {
  if (n <= 48) {
    mpz_class v = value;
    for (std::size_t i = n; i-- > 0;) {
      out[i] = static_cast<Digit>(mpz_tdiv_q_ui(v.get_mpz_t(), v.get_mpz_t(), b));
    }
    return;
  }
  const std::size_t low = n / 2;
  auto it = powers.find(low);
  if (it == powers.end()) it = powers.emplace(low, power(b, low)).first;
  mpz_class hi, lo;
  mpz_tdiv_qr(hi.get_mpz_t(), lo.get_mpz_t(), value.get_mpz_t(), it->second.get_mpz_t());
  expand_digits(hi, b, n - low, out, powers);
  expand_digits(lo, b, low, out + (n - low), powers);
}

}  // namespace

DigitWord digits_prefix(const ExactFraction& x, Base b, std::size_t n) {
  DigitWord::check_base(b);
  std::vector<Digit> digits(n, 0);
  if (n == 0 || x.is_zero()) return DigitWord(b, std::move(digits));
  mpz_class scaled = x.numerator() * power(b, n);
  mpz_tdiv_q(scaled.get_mpz_t(), scaled.get_mpz_t(), x.denominator().get_mpz_t());
  if (b <= 36) {
    const std::string text = scaled.get_str(static_cast<int>(b));
    const std::size_t pad = n - text.size();
    for (std::size_t i = 0; i < text.size(); ++i) digits[pad + i] = char_value(text[i]);
  } else {
    std::map<std::size_t, mpz_class> powers;
    expand_digits(scaled, b, n, digits.data(), powers);
  }
  return DigitWord(b, std::move(digits));
}

bool in_cylinder(const ExactFraction& x, const DigitWord& w) {
  // x in [v, v + b^{-n})  <=>  floor(x·b^n) == integer value of w.
  mpz_class word_value = 0;
  for (const Digit d : w.digits()) {
    word_value *= w.base();
    word_value += d;
  }
  mpz_class scaled = x.numerator() * power(w.base(), w.size());
  mpz_fdiv_q(scaled.get_mpz_t(), scaled.get_mpz_t(), x.denominator().get_mpz_t());
  return scaled == word_value;
}

CylinderInterval cylinder_of(const DigitWord& w) {
  return CylinderInterval{w, value_of_word(w), mpq_class(mpz_class(1), power(w.base(), w.size()))};
}

bool CylinderInterval::contains(const ExactFraction& x) const { return in_cylinder(x, word); }

mpz_class scaled_residue(const ExactFraction& x, const mpz_class& t, Base u, std::uint64_t j) {
  DigitWord::check_base(u);
  const mpz_class& den = x.denominator();
  mpz_class factor;
  // Plain powering is cheaper while u^j stays comparable to den.
  if (static_cast<double>(j) * std::log2(static_cast<double>(u)) <= 4.0 * static_cast<double>(mpz_sizeinbase(den.get_mpz_t(), 2)) + 64.0) {
    factor = power(u, j);
  } else {
    const mpz_class base(u);
    mpz_powm_ui(factor.get_mpz_t(), base.get_mpz_t(), j, den.get_mpz_t());
  }
  mpz_class r = factor * x.numerator();
  r *= t;
  mpz_fdiv_r(r.get_mpz_t(), r.get_mpz_t(), den.get_mpz_t());
  return r;
}

double frac_of_scaled(const ExactFraction& x, const mpz_class& t, Base u, std::uint64_t j) {
  return residue_to_unit(scaled_residue(x, t, u, j), x.denominator());
}

}  // namespace fsdim
