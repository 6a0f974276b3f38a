#pragma once

// Exact arithmetic for points of [0,1): rationals, base-b digit words,
// cylinder intervals and exact reduction of b^j·t·x modulo 1.

#include <gmpxx.h>

#include <compare>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fsdim {

using Digit = std::uint32_t;
using Base = std::uint32_t;

/// Nonnegative rational in [0,1), always in lowest terms.
class ExactFraction {
 public:
  ExactFraction() : num_(0), den_(1) {}

  /// Normalizes num/den; throws std::domain_error unless 0 <= num/den < 1.
  ExactFraction(mpz_class num, mpz_class den);
  ExactFraction(std::int64_t num, std::int64_t den) : ExactFraction(mpz_class(num), mpz_class(den)) {}

  /// "a/b" or "0".
  static ExactFraction parse(std::string_view text);

  const mpz_class& numerator() const noexcept { return num_; }
  const mpz_class& denominator() const noexcept { return den_; }
  bool is_zero() const noexcept { return num_ == 0; }

  double to_double() const;
  std::string str() const;

  friend bool operator==(const ExactFraction& a, const ExactFraction& b) {
    return a.num_ == b.num_ && a.den_ == b.den_;
  }
  friend std::strong_ordering operator<=>(const ExactFraction& a, const ExactFraction& b);

 private:
  mpz_class num_;
  mpz_class den_;
};

/// Finite word over the alphabet {0, ..., base-1}.
class DigitWord {
 public:
  explicit DigitWord(Base base) : base_(base) { check_base(base); }
  DigitWord(Base base, std::vector<Digit> digits);

  /// Word from single characters '0'-'9', 'a'-'z' (base <= 36).
  static DigitWord from_string(Base base, std::string_view text);

  Base base() const noexcept { return base_; }
  std::size_t size() const noexcept { return digits_.size(); }
  bool empty() const noexcept { return digits_.empty(); }
  Digit operator[](std::size_t i) const { return digits_[i]; }
  std::span<const Digit> digits() const noexcept { return digits_; }

  void push_back(Digit d);
  void append(const DigitWord& other);
  DigitWord prefix(std::size_t n) const;
  DigitWord slice(std::size_t from, std::size_t count) const;
  bool starts_with(const DigitWord& w) const;

  /// Same characters as from_string; tokens joined by '.' when base > 36.
  std::string str() const;

  friend bool operator==(const DigitWord&, const DigitWord&) = default;
  /// Lexicographic on digits; words of different bases compare by base first.
  friend std::strong_ordering operator<=>(const DigitWord& a, const DigitWord& b);

  static void check_base(Base base);

 private:
  Base base_;
  std::vector<Digit> digits_;
};

/// I_w = [v_b(w), v_b(w) + b^{-|w|}). The width is 1 for the empty word,
/// so it is kept as a general rational.
struct CylinderInterval {
  DigitWord word;
  ExactFraction low;
  mpq_class width;

  bool contains(const ExactFraction& x) const;
};

/// v_b(w) = sum_i w_i b^{-i}, exactly.
ExactFraction value_of_word(const DigitWord& w);

/// floor(x·b^i) mod b, i >= 1. Terminating expansion for b-adic points.
Digit digit_at(const ExactFraction& x, Base b, std::size_t i);

/// First n base-b digits of x.
DigitWord digits_prefix(const ExactFraction& x, Base b, std::size_t n);

bool in_cylinder(const ExactFraction& x, const DigitWord& w);
CylinderInterval cylinder_of(const DigitWord& w);

/// (t·u^j·num) mod den, in [0, den). Negative t is reduced to its
/// nonnegative residue.
mpz_class scaled_residue(const ExactFraction& x, const mpz_class& t, Base u, std::uint64_t j);

/// Fractional part of t·u^j·x, reduced exactly before conversion to double.
double frac_of_scaled(const ExactFraction& x, const mpz_class& t, Base u, std::uint64_t j);
inline double frac_of_scaled(const ExactFraction& x, long t, Base u, std::uint64_t j) {
  return frac_of_scaled(x, mpz_class(t), u, j);
}

/// r / den as a double in [0,1), with r in [0, den).
double residue_to_unit(const mpz_class& r, const mpz_class& den);

/// b^n as an exact integer.
mpz_class power(Base b, std::uint64_t n);

}  // namespace fsdim
