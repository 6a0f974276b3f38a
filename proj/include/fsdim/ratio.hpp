#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace fsdim {

__extension__ using UInt128 = unsigned __int128;

/// Small exact nonnegative rational num/den, kept in lowest terms.
///
/// Used for occurrence probabilities (counts fit in 64 bits) and for the
/// target dimensions q_b of a stage plan. Values may equal 1, unlike
/// ExactFraction.
class Ratio {
 public:
  Ratio() = default;
  Ratio(std::uint64_t num, std::uint64_t den);

  /// Parses "a/b" or a bare integer "a".
  static Ratio parse(std::string_view text);

  std::uint64_t num() const noexcept { return num_; }
  std::uint64_t den() const noexcept { return den_; }
  double value() const noexcept { return static_cast<double>(num_) / static_cast<double>(den_); }
  std::string str() const;

  friend bool operator==(const Ratio&, const Ratio&) = default;
  friend std::strong_ordering operator<=>(const Ratio& a, const Ratio& b);

 private:
  std::uint64_t num_ = 0;
  std::uint64_t den_ = 1;
};

}  // namespace fsdim
