#include "fsdim/blockstats.hpp"
#include "fsdim/discrepancy.hpp"
#include "fsdim/rng.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

using namespace fsdim;

namespace {

// O(n^2) supremum over intervals with endpoints in {0, 1, points}, each end
// open or closed where the interval stays inside (0,1).
double brute_force_discrepancy(const std::vector<double>& pts) {
  std::vector<double> ends = {0.0, 1.0};
  ends.insert(ends.end(), pts.begin(), pts.end());
  const double n = static_cast<double>(pts.size());
  double best = 0.0;
  for (const double a : ends) {
    for (const double b : ends) {
      if (b < a) continue;
      for (int left_closed = 0; left_closed < 2; ++left_closed) {
        if (left_closed && a <= 0.0) continue;
        for (int right_closed = 0; right_closed < 2; ++right_closed) {
          if (a == b && !(left_closed && right_closed)) continue;
          std::size_t count = 0;
          for (const double y : pts) {
            const bool after = left_closed ? y >= a : y > a;
            const bool before = right_closed ? y <= b : y < b;
            count += after && before;
          }
          best = std::max(best, std::abs(static_cast<double>(count) / n - (b - a)));
        }
      }
    }
  }
  return best;
}

// The displayed inequality evaluated with occurrence_count on each prefix.
bool reference_test(const DigitWord& w, double C, std::size_t N, unsigned cap) {
  const std::size_t len = w.size();
  const std::size_t levels = std::min<std::size_t>(len - N, cap);
  for (std::size_t l = 1; l <= levels; ++l) {
    const auto space = static_cast<std::size_t>(std::pow(w.base(), l));
    for (std::size_t key = 0; key < space; ++key) {
      std::vector<Digit> z(l);
      std::size_t k = key;
      for (std::size_t i = l; i-- > 0;) { z[i] = static_cast<Digit>(k % w.base()); k /= w.base(); }
      const DigitWord zw(w.base(), z);
      for (std::size_t n = N; n + l <= len; ++n) {
        const double freq = static_cast<double>(occurrence_count(zw, w.prefix(n))) / static_cast<double>(n);
        const double bound = C * std::sqrt(std::log(std::log(static_cast<double>(n)))) / std::sqrt(static_cast<double>(n));
        if (!(std::abs(freq - std::pow(w.base(), -static_cast<double>(l))) < bound)) return false;
      }
    }
  }
  return true;
}

DigitWord random_word(Base b, std::size_t n, std::uint64_t seed) {
  CounterRng rng(seed);
  std::vector<Digit> d(n);
  for (auto& x : d) x = static_cast<Digit>(rng.below(b));
  return DigitWord(b, std::move(d));
}

DiscrepancyParams params_for(Base b, double C, std::size_t N, unsigned cap = 6) {
  DiscrepancyParams p;
  p.per_base[b] = BaseConstants{C, N};
  p.z_len_cap = cap;
  return p;
}

}  // namespace

TEST(StarDiscrepancy, SpecExamples) {
  EXPECT_DOUBLE_EQ(star_discrepancy(std::vector<double>{0.0}), 1.0);
  EXPECT_DOUBLE_EQ(star_discrepancy(std::vector<double>{0.0, 0.5}), 0.5);
  EXPECT_DOUBLE_EQ(star_discrepancy(std::vector<ExactFraction>{ExactFraction(), ExactFraction(1, 2)}), 0.5);
  EXPECT_THROW(star_discrepancy(std::vector<double>{}), std::invalid_argument);
  EXPECT_THROW(star_discrepancy(std::vector<double>{1.0}), std::invalid_argument);
}

TEST(StarDiscrepancy, MatchesBruteForce) {
  CounterRng rng(3);
  for (int trial = 0; trial < 60; ++trial) {
    std::vector<double> pts(1 + rng.below(200));
    for (auto& p : pts) p = rng.uniform();
    if (trial % 3 == 0) pts[0] = 0.0;
    if (trial % 4 == 0) pts.push_back(pts.back());
    if (trial % 5 == 0) {
      for (auto& p : pts) p = std::floor(p * 8) / 8;
    }
    EXPECT_NEAR(star_discrepancy(pts), brute_force_discrepancy(pts), 1e-12) << "trial " << trial;
  }
}

TEST(StarDiscrepancy, RangeAndPermutationInvariance) {
  CounterRng rng(4);
  std::vector<double> pts(100);
  for (auto& p : pts) p = rng.uniform();
  const double d = star_discrepancy(pts);
  EXPECT_GT(d, 0.0);
  EXPECT_LE(d, 1.0);
  std::reverse(pts.begin(), pts.end());
  EXPECT_EQ(star_discrepancy(pts), d);
  std::rotate(pts.begin(), pts.begin() + 37, pts.end());
  EXPECT_EQ(star_discrepancy(pts), d);
}

TEST(ShiftPoints, TruncatedSuffixValues) {
  const auto y = shift_points(DigitWord::from_string(2, "101"));
  ASSERT_EQ(y.size(), 3u);
  EXPECT_DOUBLE_EQ(y[0], 0.625);
  EXPECT_DOUBLE_EQ(y[1], 0.25);
  EXPECT_DOUBLE_EQ(y[2], 0.5);
  // A long random word has small discrepancy of its shift values.
  EXPECT_LT(star_discrepancy(shift_points(random_word(3, 20000, 1))), 0.03);
}

TEST(LowDiscrepancyTest, ConstantWordFails) {
  const auto params = params_for(2, 1.0, 50);
  EXPECT_FALSE(low_discrepancy_test(DigitWord(2, std::vector<Digit>(1000, 0)), params));
}

TEST(LowDiscrepancyTest, TooShortAndMissingBase) {
  const auto params = params_for(2, 1.0, 50);
  EXPECT_THROW(low_discrepancy_test(random_word(2, 50, 1), params), std::invalid_argument);
  EXPECT_TRUE(in_good_set(random_word(2, 50, 1), params));
  EXPECT_THROW(in_good_set(random_word(3, 100, 1), params), std::out_of_range);
}

TEST(LowDiscrepancyTest, AgreesWithOccurrenceCountReference) {
  CounterRng rng(21);
  int agree_true = 0;
  for (int trial = 0; trial < 60; ++trial) {
    const Base b = static_cast<Base>(2 + rng.below(3));
    const std::size_t N = 3 + rng.below(20);
    const auto w = random_word(b, N + 1 + rng.below(60), rng());
    const double C = 0.3 + 1.5 * rng.uniform();
    const unsigned cap = static_cast<unsigned>(1 + rng.below(4));
    const bool expected = reference_test(w, C, N, cap);
    EXPECT_EQ(low_discrepancy_test(w, params_for(b, C, N, cap)), expected) << "trial " << trial;
    agree_true += expected;
  }
  EXPECT_GT(agree_true, 0);
}

TEST(LowDiscrepancyTest, MonotoneInCap) {
  CounterRng rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    const auto w = random_word(2, 400, rng());
    for (unsigned cap = 2; cap <= 6; ++cap) {
      if (low_discrepancy_test(w, params_for(2, 1.2, 50, cap))) {
        for (unsigned smaller = 1; smaller < cap; ++smaller) {
          EXPECT_TRUE(low_discrepancy_test(w, params_for(2, 1.2, 50, smaller)));
        }
      }
    }
  }
}

TEST(DiscrepancyRatio, SmallThresholdIsInfinite) {
  EXPECT_TRUE(std::isinf(discrepancy_ratio(random_word(2, 20, 1), 2, 2)));
  EXPECT_EQ(discrepancy_ratio(random_word(2, 20, 1), 20, 2), 0.0);
}

TEST(Calibration, PassRateWithinBand) {
  CalibrationOptions opt;
  opt.samples = 400;
  opt.seed = 1;
  const auto cal = calibrate_base(2, opt);
  EXPECT_GE(cal.pass_rate, 0.6);
  EXPECT_GT(cal.constants.C, 0.0);
  EXPECT_EQ(cal.constants.N, 50u);
  const auto params = params_for(2, cal.constants.C, cal.constants.N);
  std::size_t pass = 0;
  const std::size_t fresh = 400;
  for (std::size_t i = 0; i < fresh; ++i) pass += low_discrepancy_test(random_word(2, 2000, derive_seed(77, i)), params);
  const double rate = static_cast<double>(pass) / static_cast<double>(fresh);
  EXPECT_GE(rate, 0.5);
  EXPECT_LE(rate, 0.95);
}

TEST(Calibration, SlightlySmallerConstantLosesPasses) {
  CalibrationOptions opt;
  opt.samples = 200;
  const auto cal = calibrate_base(3, opt);
  EXPECT_LT(calibrate_base(3, CalibrationOptions{50, 2000, 200, 0.3, 0, 6}).constants.C, cal.constants.C);
}

TEST(SampleGoodString, PassesAndIsDeterministic) {
  CalibrationOptions opt;
  opt.samples = 300;
  const auto cal = calibrate_base(2, opt);
  const auto params = params_for(2, cal.constants.C, cal.constants.N);
  double attempts = 0;
  const int runs = 60;
  for (int s = 0; s < runs; ++s) {
    const auto r = sample_good_string(2, 2000, static_cast<std::uint64_t>(s), params);
    EXPECT_TRUE(low_discrepancy_test(r.word, params));
    attempts += static_cast<double>(r.attempts);
    if (s < 3) EXPECT_EQ(sample_good_string(2, 2000, static_cast<std::uint64_t>(s), params).word, r.word);
  }
  EXPECT_LE(attempts / runs, 2.0);
}

TEST(SampleGoodString, GivesUpOnImpossibleParams) {
  const auto params = params_for(2, 1e-9, 50);
  EXPECT_THROW(sample_good_string(2, 200, 0, params, 5), NoGoodString);
}

TEST(DiscrepancyConfig, RoundTripAndParsing) {
  auto p = params_for(2, 1.25, 50, 5);
  p.per_base[7] = BaseConstants{0.875, 40};
  std::stringstream buf;
  write_discrepancy_config(buf, p);
  const auto q = read_discrepancy_config(buf);
  EXPECT_EQ(q.z_len_cap, 5u);
  EXPECT_DOUBLE_EQ(q.for_base(2).C, 1.25);
  EXPECT_EQ(q.for_base(7).N, 40u);

  std::istringstream inline_form("[other]\nfoo=1\n[discrepancy]\nC_3=1.5, N_3=60  # comment\n");
  const auto r = read_discrepancy_config(inline_form);
  EXPECT_DOUBLE_EQ(r.for_base(3).C, 1.5);
  EXPECT_EQ(r.for_base(3).N, 60u);

  std::istringstream bad("[discrepancy]\nC_2=-1\n");
  EXPECT_THROW(read_discrepancy_config(bad), std::invalid_argument);
  std::istringstream unknown("[discrepancy]\nQ=1\n");
  EXPECT_THROW(read_discrepancy_config(unknown), std::runtime_error);
}
