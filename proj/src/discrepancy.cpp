#include "fsdim/discrepancy.hpp"

#include "fsdim/blockstats.hpp"
#include "fsdim/digit_file.hpp"
#include "fsdim/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <unordered_map>

namespace fsdim {

const BaseConstants& DiscrepancyParams::for_base(Base b) const {
  const auto it = per_base.find(b);
  if (it == per_base.end()) throw std::out_of_range("no discrepancy constants for base " + std::to_string(b));
  return it->second;
}

void DiscrepancyParams::validate() const {
  if (z_len_cap < 1) throw std::invalid_argument("z_len_cap must be >= 1");
  for (const auto& [b, c] : per_base) {
    DigitWord::check_base(b);
    if (!(c.C > 0.0)) throw std::invalid_argument("C_" + std::to_string(b) + " must be positive");
    if (c.N < 1) throw std::invalid_argument("N_" + std::to_string(b) + " must be >= 1");
  }
}

// ---------------------------------------------------------------------------

double star_discrepancy(std::span<const double> points) {
  if (points.empty()) throw std::invalid_argument("star_discrepancy: empty point set");
  std::vector<double> y(points.begin(), points.end());
  for (const double v : y) {
    if (!(v >= 0.0 && v < 1.0)) throw std::invalid_argument("star_discrepancy: point outside [0,1)");
  }
  std::sort(y.begin(), y.end());
  const auto n = static_cast<double>(y.size());
  // With g_i = y_i - i/n the excess of count over length on [y_i, y_j] is
  // 1/n + g_i - g_j (i <= j), and the excess of length over count on the
  // open (y_i, y_j) is 1/n + g_j - g_i (i < j), sentinels y_0 = 0, y_{n+1} = 1.
  // Duplicate points only make these index counts pessimistic, never optimistic.
  double best = 0.0;
  double max_g_closed = -std::numeric_limits<double>::infinity();  // over i <= j with y_i > 0
  double min_g_open = 0.0;                                          // g_0
  for (std::size_t j = 1; j <= y.size(); ++j) {
    const double g = y[j - 1] - static_cast<double>(j) / n;
    best = std::max(best, 1.0 / n + g - min_g_open);
    if (y[j - 1] > 0.0) max_g_closed = std::max(max_g_closed, g);
    best = std::max(best, 1.0 / n + max_g_closed - g);
    min_g_open = std::min(min_g_open, g);
  }
  const double g_end = 1.0 - (n + 1.0) / n;
  best = std::max(best, 1.0 / n + g_end - min_g_open);
  return std::min(best, 1.0);
}

double star_discrepancy(std::span<const ExactFraction> points) {
  std::vector<double> y;
  y.reserve(points.size());
  for (const auto& p : points) y.push_back(p.to_double());
  return star_discrepancy(y);
}

std::vector<double> shift_points(const DigitWord& w) {
  std::vector<double> y(w.size());
  const double b = w.base();
  double tail = 0.0;
  for (std::size_t j = w.size(); j-- > 0;) {
    tail = (static_cast<double>(w[j]) + tail) / b;
    y[j] = std::min(tail, std::nextafter(1.0, 0.0));
  }
  return y;
}

// ---------------------------------------------------------------------------

namespace {
constexpr std::uint64_t kDenseSpace = std::uint64_t{1} << 16;
}

double discrepancy_ratio(const DigitWord& w, std::size_t N, unsigned z_len_cap) {
  const std::size_t n_total = w.size();
  if (n_total <= N) return 0.0;
  const auto levels = static_cast<unsigned>(std::min<std::size_t>(n_total - N, z_len_cap));
  const Base b = w.base();

  // Per block length: counts, a histogram of counts for the running minimum,
  // and the running maximum. Counts only grow by one, so both extremes move
  // monotonically.
  struct Level {
    std::uint64_t space;
    double p;
    std::vector<std::uint32_t> counts;                  // dense spaces
    std::unordered_map<std::uint64_t, std::uint32_t> sparse;  // large spaces
    std::vector<std::uint64_t> hist;
    std::uint64_t key = 0;
    std::uint32_t max_c = 0;
    std::uint32_t min_c = 0;
  };
  std::vector<Level> lv;
  for (unsigned l = 1; l <= levels; ++l) {
    Level L;
    L.space = block_space(b, l, std::numeric_limits<std::uint64_t>::max() / b);
    L.p = std::pow(static_cast<double>(b), -static_cast<double>(l));
    if (L.space <= kDenseSpace) L.counts.assign(L.space, 0);
    L.hist.assign(n_total + 2, 0);
    L.hist[0] = L.space;
    lv.push_back(std::move(L));
  }

  double ratio = 0.0;
  for (std::size_t n = 1; n <= n_total; ++n) {
    const Digit d = w[n - 1];
    const double inv_n = 1.0 / static_cast<double>(n);
    const double lln = n >= 3 ? std::log(std::log(static_cast<double>(n))) : -1.0;
    for (unsigned l = 1; l <= levels; ++l) {
      Level& L = lv[l - 1];
      L.key = (L.key * b + d) % L.space;
      if (n >= l) {
        const std::uint32_t c = L.counts.empty() ? ++L.sparse[L.key] : ++L.counts[L.key];
        --L.hist[c - 1];
        ++L.hist[c];
        L.max_c = std::max(L.max_c, c);
        while (L.hist[L.min_c] == 0) ++L.min_c;
      }
      if (n < N || n + l > n_total) continue;
      if (lln <= 0.0) return std::numeric_limits<double>::infinity();
      const double dev = std::max(std::abs(L.max_c * inv_n - L.p), std::abs(L.min_c * inv_n - L.p));
      ratio = std::max(ratio, dev / std::sqrt(lln * inv_n));
    }
  }
  return ratio;
}

bool low_discrepancy_test(const DigitWord& w, const DiscrepancyParams& params) {
  const BaseConstants& k = params.for_base(w.base());
  if (w.size() <= k.N) {
    throw std::invalid_argument("low_discrepancy_test: word length " + std::to_string(w.size()) +
                                " does not exceed N_b = " + std::to_string(k.N));
  }
  return discrepancy_ratio(w, k.N, params.z_len_cap) < k.C;
}

bool in_good_set(const DigitWord& w, const DiscrepancyParams& params) {
  const BaseConstants& k = params.for_base(w.base());
  if (w.size() <= k.N) return true;
  return discrepancy_ratio(w, k.N, params.z_len_cap) < k.C;
}

namespace {

DigitWord uniform_word(Base b, std::size_t length, std::uint64_t seed) {
  CounterRng rng(seed);
  std::vector<Digit> digits(length);
  for (auto& d : digits) d = static_cast<Digit>(rng.below(b));
  return DigitWord(b, std::move(digits));
}

}  // namespace

SampleResult sample_good_string(Base b, std::size_t length, std::uint64_t seed, const DiscrepancyParams& params,
                                std::size_t max_attempts) {
  DigitWord::check_base(b);
  for (std::size_t attempt = 0; attempt < max_attempts; ++attempt) {
    DigitWord w = uniform_word(b, length, derive_seed(seed, attempt));
    if (in_good_set(w, params)) return SampleResult{std::move(w), attempt + 1};
  }
  throw NoGoodString("no word of length " + std::to_string(length) + " in base " + std::to_string(b) +
                     " passed the low-discrepancy test in " + std::to_string(max_attempts) + " attempts");
}

CalibrationResult calibrate_base(Base b, const CalibrationOptions& options) {
  DigitWord::check_base(b);
  if (options.samples == 0) throw std::invalid_argument("calibration needs samples");
  if (options.length <= options.N) throw std::invalid_argument("calibration length must exceed N");
  if (!(options.target_pass_rate > 0.0 && options.target_pass_rate <= 1.0)) {
    throw std::invalid_argument("target pass rate must be in (0,1]");
  }
  std::vector<double> ratios;
  ratios.reserve(options.samples);
  for (std::size_t i = 0; i < options.samples; ++i) {
    const auto w = uniform_word(b, options.length, derive_seed(options.seed, 0xCA11B, i));
    ratios.push_back(discrepancy_ratio(w, options.N, options.z_len_cap));
  }
  std::sort(ratios.begin(), ratios.end());
  const auto k = static_cast<std::size_t>(std::ceil(options.target_pass_rate * static_cast<double>(options.samples)));
  const double r = ratios[std::min(k, options.samples) - 1];
  if (!std::isfinite(r)) throw std::runtime_error("calibration produced an infinite constant");
  const double C = std::nextafter(r, std::numeric_limits<double>::infinity());
  const auto passing = static_cast<double>(std::lower_bound(ratios.begin(), ratios.end(), C) - ratios.begin());
  return CalibrationResult{BaseConstants{C, options.N}, passing / static_cast<double>(options.samples)};
}

void ensure_calibrated(DiscrepancyParams& params, std::span<const Base> bases, const CalibrationOptions& options) {
  for (const Base b : bases) {
    if (params.has_base(b)) continue;
    CalibrationOptions o = options;
    o.z_len_cap = params.z_len_cap;
    params.per_base[b] = calibrate_base(b, o).constants;
  }
}

// ---------------------------------------------------------------------------

namespace {

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace

DiscrepancyParams read_discrepancy_config(std::istream& in) {
  DiscrepancyParams params;
  std::map<Base, double> cs;
  std::map<Base, std::size_t> ns;
  std::string section;
  std::string line;
  while (std::getline(in, line)) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw std::runtime_error("config: bad section header '" + line + "'");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    if (!section.empty() && section != "discrepancy") continue;
    std::stringstream items(line);
    std::string item;
    while (std::getline(items, item, ',')) {
      item = trim(item);
      if (item.empty()) continue;
      const auto eq = item.find('=');
      if (eq == std::string::npos) throw std::runtime_error("config: expected key=value, got '" + item + "'");
      const std::string key = trim(item.substr(0, eq));
      const std::string value = trim(item.substr(eq + 1));
      try {
        if (key == "z_len_cap") {
          params.z_len_cap = static_cast<unsigned>(std::stoul(value));
        } else if (key.size() > 2 && key[1] == '_' && (key[0] == 'C' || key[0] == 'N')) {
          const auto b = static_cast<Base>(std::stoul(key.substr(2)));
          if (key[0] == 'C') cs[b] = std::stod(value);
          else ns[b] = std::stoul(value);
        } else {
          throw std::runtime_error("config: unknown key '" + key + "'");
        }
      } catch (const std::logic_error&) {
        throw std::runtime_error("config: bad value for '" + key + "'");
      }
    }
  }
  for (const auto& [b, c] : cs) {
    BaseConstants k;
    k.C = c;
    if (const auto it = ns.find(b); it != ns.end()) k.N = it->second;
    params.per_base[b] = k;
  }
  for (const auto& [b, n] : ns) {
    if (!cs.count(b)) throw std::runtime_error("config: N_" + std::to_string(b) + " given without C_" + std::to_string(b));
  }
  params.validate();
  return params;
}

DiscrepancyParams load_discrepancy_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  return read_discrepancy_config(in);
}

void write_discrepancy_config(std::ostream& out, const DiscrepancyParams& params) {
  out << "[discrepancy]\n";
  out << "z_len_cap=" << params.z_len_cap << '\n';
  char buf[64];
  for (const auto& [b, k] : params.per_base) {
    std::snprintf(buf, sizeof buf, "%.17g", k.C);
    out << "C_" << b << '=' << buf << '\n';
    out << "N_" << b << '=' << k.N << '\n';
  }
}

void save_discrepancy_config(const std::filesystem::path& path, const DiscrepancyParams& params) {
  std::ostringstream buf;
  write_discrepancy_config(buf, params);
  write_file_atomic(path, buf.str());
}

}  // namespace fsdim
