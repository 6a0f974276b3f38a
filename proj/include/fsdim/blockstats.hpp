#pragma once

// Sliding-window block statistics: occurrence counts N(z,w), occurrence
// probabilities P(z,w), normalized block entropies H_l^b and entropy
// profiles over growing prefixes.

#include "fsdim/base_arith.hpp"
#include "fsdim/ratio.hpp"

#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <unordered_map>
#include <vector>

namespace fsdim {

/// Default ceiling on b^l, the number of distinct l-blocks a table may hold.
inline constexpr std::uint64_t kDefaultBlockLimit = std::uint64_t{1} << 24;

struct BlockLimitExceeded : std::length_error {
  using std::length_error::length_error;
};

/// b^l, throwing BlockLimitExceeded when it exceeds `limit`.
std::uint64_t block_space(Base b, unsigned l, std::uint64_t limit = kDefaultBlockLimit);

/// Overlapping occurrences of z in w.
std::uint64_t occurrence_count(const DigitWord& z, const DigitWord& w);

/// N(z,w) / (|w| - |z| + 1).
Ratio occurrence_prob(const DigitWord& z, const DigitWord& w);

/// Counts of l-blocks keyed by the block's base-b integer value.
class BlockDistribution {
 public:
  static BlockDistribution of(const DigitWord& w, unsigned l, std::uint64_t limit = kDefaultBlockLimit);

  Base base() const noexcept { return base_; }
  unsigned block_len() const noexcept { return block_len_; }
  std::uint64_t window_total() const noexcept { return window_total_; }
  const std::unordered_map<std::uint64_t, std::uint64_t>& counts() const noexcept { return counts_; }

  std::uint64_t count(const DigitWord& z) const;
  Ratio prob(const DigitWord& z) const;

  /// -(l ln b)^{-1} sum_z P ln P, with 0 ln 0 = 0.
  double entropy() const;

 private:
  Base base_ = 2;
  unsigned block_len_ = 1;
  std::uint64_t window_total_ = 0;
  std::unordered_map<std::uint64_t, std::uint64_t> counts_;
};

/// H_l^b(w); requires 1 <= l <= |w|.
double block_entropy(const DigitWord& w, unsigned l, std::uint64_t limit = kDefaultBlockLimit);

/// Count table for one block length: dense up to 2^20 entries, hashed above.
class BlockCountTable {
 public:
  BlockCountTable(std::uint64_t space);
  std::uint64_t get(std::uint64_t key) const;
  /// Increments and returns the new count.
  std::uint64_t increment(std::uint64_t key);
  void clear();

 private:
  std::uint64_t space_;
  std::vector<std::uint64_t> dense_;
  std::unordered_map<std::uint64_t, std::uint64_t> sparse_;
};

/// Single-writer streaming counter for every block length 1..l_max.
///
/// Each pushed digit closes one new window per block length; the running
/// sum S_l = sum_z c ln c gives H_l in O(1) at any prefix length.
class StreamingBlockCounter {
 public:
  StreamingBlockCounter(Base base, unsigned l_max, std::uint64_t limit = kDefaultBlockLimit);

  void push(Digit d);
  void push(std::span<const Digit> digits);

  Base base() const noexcept { return base_; }
  unsigned l_max() const noexcept { return l_max_; }
  std::uint64_t length() const noexcept { return length_; }
  std::uint64_t window_total(unsigned l) const;
  std::uint64_t count(unsigned l, std::uint64_t key) const;
  std::uint64_t count(const DigitWord& z) const;

  /// H_l of the prefix pushed so far; 0 while no l-window exists.
  double entropy(unsigned l) const;

 private:
  Base base_;
  unsigned l_max_;
  std::uint64_t length_ = 0;
  std::vector<std::uint64_t> modulus_;  // b^l per length
  std::vector<std::uint64_t> rolling_;  // value of the last l digits
  std::vector<BlockCountTable> tables_;
  std::vector<double> sum_c_log_c_;
};

/// H_l^b(X_1^n) for l = 1..l_max at each checkpoint n.
struct EntropyProfile {
  Base base = 2;
  unsigned l_max = 1;
  std::vector<std::uint64_t> checkpoints;
  std::vector<std::vector<double>> table;  // table[l-1][i] at checkpoints[i]

  double at(unsigned l, std::size_t checkpoint_index) const { return table.at(l - 1).at(checkpoint_index); }
  void write_csv(std::ostream& out) const;
};

/// One streaming pass; checkpoints beyond the stream length are dropped.
EntropyProfile entropy_profile(const DigitWord& stream, unsigned l_max, std::span<const std::uint64_t> checkpoints,
                               std::uint64_t limit = kDefaultBlockLimit);

/// `count` checkpoints spaced geometrically up to n (always ending at n).
std::vector<std::uint64_t> geometric_checkpoints(std::uint64_t n, std::size_t count, std::uint64_t first = 16);

/// Finite-sample estimate of inf_l liminf_n H_l: the minimum over l of the
/// minimum over the last `tail_fraction` of the checkpoints. It is an
/// estimator only; the limit itself is not computable from a finite prefix.
double dimension_estimate(const EntropyProfile& profile, double tail_fraction = 0.5);

}  // namespace fsdim
