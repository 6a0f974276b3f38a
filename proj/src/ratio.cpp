#include "fsdim/ratio.hpp"

#include <charconv>
#include <numeric>
#include <stdexcept>

namespace fsdim {

Ratio::Ratio(std::uint64_t num, std::uint64_t den) {
  if (den == 0) throw std::invalid_argument("Ratio: zero denominator");
  const std::uint64_t g = std::gcd(num, den);
  num_ = num / g;
  den_ = den / g;
  if (num == 0) den_ = 1;
}

namespace {

std::uint64_t parse_u64(std::string_view s) {
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) {
    throw std::invalid_argument("Ratio: bad integer '" + std::string(s) + "'");
  }
  return v;
}

}  // namespace

Ratio Ratio::parse(std::string_view text) {
  const auto slash = text.find('/');
  if (slash == std::string_view::npos) return Ratio(parse_u64(text), 1);
  return Ratio(parse_u64(text.substr(0, slash)), parse_u64(text.substr(slash + 1)));
}

std::string Ratio::str() const {
  return std::to_string(num_) + "/" + std::to_string(den_);
}

std::strong_ordering operator<=>(const Ratio& a, const Ratio& b) {
  const auto lhs = static_cast<UInt128>(a.num_) * b.den_;
  const auto rhs = static_cast<UInt128>(b.num_) * a.den_;
  return lhs <=> rhs;
}

}  // namespace fsdim
