#include "fsdim/blockstats.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace fsdim {

std::uint64_t block_space(Base b, unsigned l, std::uint64_t limit) {
  std::uint64_t space = 1;
  for (unsigned i = 0; i < l; ++i) {
    if (space > limit / b) {
      throw BlockLimitExceeded("block table " + std::to_string(b) + "^" + std::to_string(l) + " exceeds limit " +
                               std::to_string(limit));
    }
    space *= b;
  }
  if (space > limit) throw BlockLimitExceeded("block table exceeds limit");
  return space;
}

namespace {

void check_pair(const DigitWord& z, const DigitWord& w) {
  if (z.base() != w.base()) throw std::invalid_argument("occurrence: base mismatch");
  if (z.size() > w.size()) throw std::invalid_argument("occurrence: |z| > |w|");
}

std::uint64_t pack(std::span<const Digit> block, Base b) {
  std::uint64_t key = 0;
  for (const Digit d : block) key = key * b + d;
  return key;
}

double normalized_entropy(double sum_c_log_c, std::uint64_t total, unsigned l, Base b) {
  if (total == 0) return 0.0;
  const double n = static_cast<double>(total);
  const double h = (std::log(n) - sum_c_log_c / n) / (static_cast<double>(l) * std::log(static_cast<double>(b)));
  return std::clamp(h, 0.0, 1.0);
}

double c_log_c(std::uint64_t c) {
  return c <= 1 ? 0.0 : static_cast<double>(c) * std::log(static_cast<double>(c));
}

}  // namespace

std::uint64_t occurrence_count(const DigitWord& z, const DigitWord& w) {
  check_pair(z, w);
  const auto wd = w.digits();
  const auto zd = z.digits();
  std::uint64_t count = 0;
  for (std::size_t i = 0; i + zd.size() <= wd.size(); ++i) {
    if (std::equal(zd.begin(), zd.end(), wd.begin() + static_cast<std::ptrdiff_t>(i))) ++count;
  }
  return count;
}

Ratio occurrence_prob(const DigitWord& z, const DigitWord& w) {
  check_pair(z, w);
  return Ratio(occurrence_count(z, w), w.size() - z.size() + 1);
}

BlockDistribution BlockDistribution::of(const DigitWord& w, unsigned l, std::uint64_t limit) {
  if (l < 1 || l > w.size()) throw std::out_of_range("block length outside [1, |w|]");
  const std::uint64_t space = block_space(w.base(), l, limit);
  BlockDistribution out;
  out.base_ = w.base();
  out.block_len_ = l;
  out.window_total_ = w.size() - l + 1;
  const auto d = w.digits();
  std::uint64_t key = pack(d.first(l - 1), w.base());
  for (std::size_t i = l - 1; i < d.size(); ++i) {
    key = (key * w.base() + d[i]) % space;
    ++out.counts_[key];
  }
  return out;
}

std::uint64_t BlockDistribution::count(const DigitWord& z) const {
  if (z.base() != base_ || z.size() != block_len_) throw std::invalid_argument("block shape mismatch");
  const auto it = counts_.find(pack(z.digits(), base_));
  return it == counts_.end() ? 0 : it->second;
}

Ratio BlockDistribution::prob(const DigitWord& z) const { return Ratio(count(z), window_total_); }

double BlockDistribution::entropy() const {
  // Summed in key order so results do not depend on hash iteration order.
  std::vector<std::uint64_t> values;
  values.reserve(counts_.size());
  for (const auto& [key, c] : counts_) values.push_back(c);
  std::sort(values.begin(), values.end());
  double s = 0.0;
  for (const auto c : values) s += c_log_c(c);
  return normalized_entropy(s, window_total_, block_len_, base_);
}

double block_entropy(const DigitWord& w, unsigned l, std::uint64_t limit) {
  return BlockDistribution::of(w, l, limit).entropy();
}

// ---------------------------------------------------------------------------

namespace {
constexpr std::uint64_t kDenseLimit = std::uint64_t{1} << 20;
}

BlockCountTable::BlockCountTable(std::uint64_t space) : space_(space) {
  if (space_ <= kDenseLimit) dense_.assign(space_, 0);
}

std::uint64_t BlockCountTable::get(std::uint64_t key) const {
  if (!dense_.empty()) return dense_[key];
  const auto it = sparse_.find(key);
  return it == sparse_.end() ? 0 : it->second;
}

std::uint64_t BlockCountTable::increment(std::uint64_t key) {
  if (!dense_.empty()) return ++dense_[key];
  return ++sparse_[key];
}

void BlockCountTable::clear() {
  std::fill(dense_.begin(), dense_.end(), 0);
  sparse_.clear();
}

StreamingBlockCounter::StreamingBlockCounter(Base base, unsigned l_max, std::uint64_t limit)
    : base_(base), l_max_(l_max) {
  DigitWord::check_base(base);
  if (l_max < 1) throw std::invalid_argument("l_max must be >= 1");
  for (unsigned l = 1; l <= l_max; ++l) {
    modulus_.push_back(block_space(base, l, limit));
    tables_.emplace_back(modulus_.back());
  }
  rolling_.assign(l_max, 0);
  sum_c_log_c_.assign(l_max, 0.0);
}

void StreamingBlockCounter::push(Digit d) {
  if (d >= base_) throw std::invalid_argument("digit not below base");
  ++length_;
  for (unsigned l = 1; l <= l_max_; ++l) {
    auto& r = rolling_[l - 1];
    r = (r * base_ + d) % modulus_[l - 1];
    if (length_ < l) continue;
    const std::uint64_t c = tables_[l - 1].increment(r);
    sum_c_log_c_[l - 1] += c_log_c(c) - c_log_c(c - 1);
  }
}

void StreamingBlockCounter::push(std::span<const Digit> digits) {
  for (const Digit d : digits) push(d);
}

std::uint64_t StreamingBlockCounter::window_total(unsigned l) const {
  if (l < 1 || l > l_max_) throw std::out_of_range("block length outside [1, l_max]");
  return length_ >= l ? length_ - l + 1 : 0;
}

std::uint64_t StreamingBlockCounter::count(unsigned l, std::uint64_t key) const {
  if (l < 1 || l > l_max_) throw std::out_of_range("block length outside [1, l_max]");
  return tables_[l - 1].get(key);
}

std::uint64_t StreamingBlockCounter::count(const DigitWord& z) const {
  if (z.base() != base_) throw std::invalid_argument("base mismatch");
  return count(static_cast<unsigned>(z.size()), pack(z.digits(), base_));
}

double StreamingBlockCounter::entropy(unsigned l) const {
  return normalized_entropy(sum_c_log_c_.at(l - 1), window_total(l), l, base_);
}

// ---------------------------------------------------------------------------

void EntropyProfile::write_csv(std::ostream& out) const {
  out << "n,l,H\n";
  char buf[64];
  for (unsigned l = 1; l <= l_max; ++l) {
    for (std::size_t i = 0; i < checkpoints.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.12f", at(l, i));
      out << checkpoints[i] << ',' << l << ',' << buf << '\n';
    }
  }
}

EntropyProfile entropy_profile(const DigitWord& stream, unsigned l_max, std::span<const std::uint64_t> checkpoints,
                               std::uint64_t limit) {
  if (!std::is_sorted(checkpoints.begin(), checkpoints.end()) ||
      std::adjacent_find(checkpoints.begin(), checkpoints.end()) != checkpoints.end()) {
    throw std::invalid_argument("checkpoints must be strictly increasing");
  }
  EntropyProfile profile;
  profile.base = stream.base();
  profile.l_max = l_max;
  profile.table.assign(l_max, {});
  StreamingBlockCounter counter(stream.base(), l_max, limit);
  const auto digits = stream.digits();
  for (const std::uint64_t n : checkpoints) {
    if (n > digits.size()) break;
    while (counter.length() < n) counter.push(digits[counter.length()]);
    profile.checkpoints.push_back(n);
    for (unsigned l = 1; l <= l_max; ++l) profile.table[l - 1].push_back(counter.entropy(l));
  }
  return profile;
}

std::vector<std::uint64_t> geometric_checkpoints(std::uint64_t n, std::size_t count, std::uint64_t first) {
  std::vector<std::uint64_t> out;
  if (n == 0 || count == 0) return out;
  first = std::clamp<std::uint64_t>(first, 1, n);
  if (count == 1 || first == n) return {n};
  const double ratio = std::pow(static_cast<double>(n) / static_cast<double>(first), 1.0 / static_cast<double>(count - 1));
  double x = static_cast<double>(first);
  for (std::size_t i = 0; i + 1 < count; ++i, x *= ratio) {
    const auto v = static_cast<std::uint64_t>(std::llround(x));
    if (v < n && (out.empty() || v > out.back())) out.push_back(v);
  }
  out.push_back(n);
  return out;
}

double dimension_estimate(const EntropyProfile& profile, double tail_fraction) {
  if (profile.checkpoints.empty() || profile.table.empty()) throw std::invalid_argument("empty entropy profile");
  if (!(tail_fraction > 0.0 && tail_fraction <= 1.0)) throw std::invalid_argument("tail_fraction must be in (0,1]");
  const std::size_t count = profile.checkpoints.size();
  const auto tail = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(tail_fraction * static_cast<double>(count))));
  double best = 1.0;
  for (const auto& row : profile.table) {
    for (std::size_t i = count - tail; i < count; ++i) best = std::min(best, row[i]);
  }
  return best;
}

}  // namespace fsdim
