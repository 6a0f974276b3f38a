#include "fsdim/cli.hpp"

#include "fsdim/blockstats.hpp"
#include "fsdim/constructor.hpp"
#include "fsdim/digit_file.hpp"
#include "fsdim/discrepancy.hpp"
#include "fsdim/expsum.hpp"
#include "fsdim/schedule.hpp"
#include "fsdim/verify.hpp"

#include "CLI11.hpp"

#include <algorithm>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>

namespace fsdim {

namespace {

namespace fs = std::filesystem;

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

/// Resolved settings, printed first and stored next to written files.
class ConfigHeader {
 public:
  explicit ConfigHeader(std::string command) : command_(std::move(command)) {}
  template <class T>
  void add(std::string key, const T& value) {
    std::ostringstream s;
    s << value;
    items_.emplace_back(std::move(key), s.str());
  }
  void add(std::string key, double value) { items_.emplace_back(std::move(key), num(value)); }
  void add(std::string key, bool value) { items_.emplace_back(std::move(key), value ? "true" : "false"); }
  std::string str() const {
    std::string out = "# fsdim " + command_ + "\n";
    for (const auto& [k, v] : items_) out += "# " + k + " = " + v + "\n";
    return out;
  }

 private:
  std::string command_;
  std::vector<std::pair<std::string, std::string>> items_;
};

struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

template <class T>
void require_positive(const char* flag, const T& v) {
  if (!(v > 0)) throw UsageError(std::string(flag) + " must be positive");
}

// ---------------------------------------------------------------------------

struct AnalyzeArgs {
  std::string file;
  std::optional<unsigned> base;
  unsigned lmax = 3;
  std::size_t checkpoints = 20;
  std::string out_dir;
};

int cmd_analyze(const AnalyzeArgs& a, std::ostream& out) {
  require_positive("--lmax", a.lmax);
  require_positive("--checkpoints", a.checkpoints);
  const DigitWord w = read_digit_file(a.file, a.base ? std::optional<Base>(*a.base) : std::nullopt);
  if (w.empty()) throw UsageError("digit file is empty");
  ConfigHeader h("analyze");
  h.add("file", a.file);
  h.add("base", w.base());
  h.add("lmax", a.lmax);
  h.add("checkpoints", a.checkpoints);
  const auto points = geometric_checkpoints(w.size(), a.checkpoints, std::min<std::uint64_t>(16, w.size()));
  const EntropyProfile profile = entropy_profile(w, a.lmax, points);
  std::ostringstream csv;
  profile.write_csv(csv);

  out << h.str();
  out << "digits = " << w.size() << "\n";
  for (unsigned l = 1; l <= a.lmax; ++l) {
    out << "H_" << l << " = " << num(profile.at(l, profile.checkpoints.size() - 1)) << "\n";
  }
  out << "estimate = " << num(dimension_estimate(profile))
      << "  (finite-prefix estimate; the dimension itself is a limit)\n";
  if (!a.out_dir.empty()) {
    fs::create_directories(a.out_dir);
    write_file_atomic(fs::path(a.out_dir) / "profile.csv", csv.str());
    write_file_atomic(fs::path(a.out_dir) / "config.txt", h.str());
    out << "wrote " << (fs::path(a.out_dir) / "profile.csv").string() << "\n";
  } else {
    out << csv.str();
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct ConstructArgs {
  std::string plan;
  std::size_t stages = 1;
  std::string mode = "sampled";
  std::size_t samples = 64;
  std::uint64_t seed = 0;
  std::string out_dir;
  double tolerance = 0.1;
  bool asymptotic_thresholds = false;
  unsigned lmax = 4;
  std::uint64_t min_digits = 20000;
  std::size_t step_budget = 5000;
  std::optional<long> t_cap;
  long weyl_t = 8;
  double weyl_gamma = 0.5;
  unsigned zcap = 6;
  std::string disc_config;
  bool progress = false;
};

int cmd_construct(const ConstructArgs& a, std::ostream& out, std::ostream& err) {
  require_positive("--samples", a.samples);
  require_positive("--lmax", a.lmax);
  require_positive("--step-budget", a.step_budget);
  require_positive("--zcap", a.zcap);
  require_positive("--weyl-t", a.weyl_t);
  require_positive("--weyl-gamma", a.weyl_gamma);
  if (a.t_cap) require_positive("--t-cap", *a.t_cap);
  if (!a.asymptotic_thresholds && !(a.tolerance > 0.0)) throw UsageError("--tolerance must be positive");

  const StagePlan plan = StagePlan::load(a.plan);
  ConstructionParams p;
  p.select.mode = a.mode == "exhaustive" ? SearchMode::exhaustive : SearchMode::sampled;
  p.select.samples = a.samples;
  p.select.seed = a.seed;
  p.select.t_cap = a.t_cap;
  p.calibration.seed = a.seed;
  p.calibration.z_len_cap = a.zcap;
  if (!a.disc_config.empty()) p.disc = load_discrepancy_config(a.disc_config);
  p.disc.z_len_cap = a.zcap;
  p.disc.validate();
  p.l_cap = a.lmax;
  p.tolerance = a.asymptotic_thresholds ? std::nullopt : std::optional<double>(a.tolerance);
  p.min_substage_digits = a.min_digits;
  p.step_budget = a.step_budget;
  p.weyl_t = a.weyl_t;
  p.weyl_gamma = a.weyl_gamma;
  if (a.progress) {
    p.on_step = [&err](const StepChoice& c, const SubstageReport& r) {
      err << "step " << c.m << " u=" << c.u << " criterion=" << c.criterion << " b=" << c.b
          << " objective=" << num(c.objective) << (r.done() ? " substage done" : "") << "\n";
    };
  }

  ConfigHeader h("construct");
  h.add("plan", a.plan);
  h.add("growth", describe(plan.growth));
  h.add("stages", a.stages);
  h.add("mode", a.mode);
  h.add("samples", a.samples);
  h.add("seed", a.seed);
  h.add("tolerance", a.asymptotic_thresholds ? std::string("2^-k") : num(a.tolerance));
  h.add("lmax", a.lmax);
  h.add("min_digits", a.min_digits);
  h.add("step_budget", a.step_budget);
  h.add("t_cap", a.t_cap ? std::to_string(*a.t_cap) : std::string("m"));
  h.add("weyl_t", a.weyl_t);
  h.add("weyl_gamma", a.weyl_gamma);
  h.add("zcap", a.zcap);
  out << h.str();

  const ConstructionTrace trace = run_construction(plan, a.stages, p);

  std::ostringstream disc;
  write_discrepancy_config(disc, trace.params.disc);
  for (const auto& [b, c] : trace.params.disc.per_base) {
    out << "# C_" << b << " = " << num(c.C) << ", N_" << b << " = " << c.N << "\n";
  }
  for (const auto& st : trace.stages) {
    out << "stage " << st.k << ": v=" << st.v << " v*=" << st.v_star << " steps " << st.first_step << ".."
        << st.P1 << ".." << st.P2 << " F1=" << trace.sched.b(st.P1) << " F2=" << trace.sched.b(st.P2);
    out << " H(F1)=";
    for (std::size_t i = 0; i < st.entropy_f1.size(); ++i) out << (i ? "/" : "") << num(st.entropy_f1[i]);
    out << " H(F2)=";
    for (std::size_t i = 0; i < st.entropy_f2.size(); ++i) out << (i ? "/" : "") << num(st.entropy_f2[i]);
    out << (st.budget_exhausted ? " [budget exhausted]" : "") << "\n";
    if (st.budget_exhausted) err << "warning: stage " << st.k << " hit the step budget\n";
  }
  for (const auto& r : trace.monitors) {
    out << "monitor " << r.name << " k=" << r.k << ": ";
    if (r.unavailable) {
      out << "unavailable (" << r.note << ")\n";
    } else if (r.vacuous) {
      out << "vacuous (" << r.note << ")\n";
    } else {
      out << (r.pass ? "pass" : "fail") << " deviation=" << num(r.deviation) << " threshold=" << num(r.threshold)
          << " n=" << r.n_from << ".." << r.n_to << (r.note.empty() ? "" : " " + r.note) << "\n";
    }
  }
  out << "unstable steps = " << trace.unstable_steps.size() << "\n";
  out << "complete = " << (trace.complete ? "true" : "false") << "\n";

  if (!a.out_dir.empty()) {
    const fs::path dir(a.out_dir);
    export_trace(dir, trace);
    write_file_atomic(dir / "config.txt", h.str() + disc.str());
    std::set<Base> done;
    for (const auto& st : trace.stages) {
      if (!done.insert(st.v).second) continue;
      const DigitWord d = stage_digits(trace, st.v);
      const unsigned l = std::min<unsigned>(a.lmax, 3);
      const EntropyProfile prof = entropy_profile(d, l, geometric_checkpoints(d.size(), 40, std::min<std::uint64_t>(16, d.size())));
      std::ostringstream csv;
      prof.write_csv(csv);
      write_file_atomic(dir / ("entropy_base" + std::to_string(st.v) + ".csv"), csv.str());
    }
    out << "wrote " << dir.string() << "\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

int cmd_verify(const std::string& suite, std::uint64_t seed, std::size_t samples, std::ostream& out) {
  std::vector<std::string> names;
  if (suite == "all") {
    names = suite_names();
  } else {
    const auto& known = suite_names();
    if (std::find(known.begin(), known.end(), suite) == known.end()) {
      std::string list;
      for (const auto& n : known) list += " " + n;
      throw UsageError("unknown suite '" + suite + "'; known:" + list + " all");
    }
    names.push_back(suite);
  }
  ConfigHeader h("verify");
  h.add("suite", suite);
  h.add("seed", seed);
  h.add("samples", samples ? std::to_string(samples) : std::string("default"));
  out << h.str();
  bool all_pass = true;
  for (const auto& n : names) {
    const SuiteReport r = run_suite(n, seed, samples);
    for (const auto& c : r.checks) {
      out << (c.pass ? "PASS " : "FAIL ") << n << "/" << c.name << ": " << c.detail << "\n";
    }
    all_pass = all_pass && r.pass();
  }
  out << (all_pass ? "all checks passed" : "some checks failed") << "\n";
  return all_pass ? kExitOk : kExitVerificationFailure;
}

// ---------------------------------------------------------------------------

struct WeylArgs {
  std::string file;
  std::string x;
  std::optional<unsigned> base;
  long tmax = 8;
  std::optional<std::size_t> n;
  std::string route = "auto";
  std::string out_dir;
};

int cmd_weyl(const WeylArgs& a, std::ostream& out) {
  require_positive("--tmax", a.tmax);
  if (a.file.empty() == a.x.empty()) throw UsageError("give exactly one of FILE or --x");
  ExactFraction x;
  Base b = 0;
  std::size_t n = 0;
  if (!a.file.empty()) {
    const DigitWord w = read_digit_file(a.file);
    if (w.empty()) throw UsageError("digit file is empty");
    x = value_of_word(w);
    b = a.base.value_or(w.base());
    n = a.n.value_or(w.size());
  } else {
    if (!a.base || !a.n) throw UsageError("--x needs --base and --n");
    x = ExactFraction::parse(a.x);
    b = *a.base;
    n = *a.n;
  }
  require_positive("--n", n);
  const WeylRoute route = a.route == "direct" ? WeylRoute::direct
                          : a.route == "spectral" ? WeylRoute::spectral
                                                  : WeylRoute::automatic;
  ConfigHeader h("weyl");
  h.add("input", a.file.empty() ? "x=" + a.x : a.file);
  h.add("base", b);
  h.add("tmax", a.tmax);
  h.add("n", n);
  h.add("route", a.route);
  const WeylReport rep = weyl_report(x, b, a.tmax, n, route);
  std::ostringstream csv;
  rep.write_csv(csv);
  out << h.str();
  out << "max |average| = " << num(rep.max_modulus) << "\n";
  if (!a.out_dir.empty()) {
    fs::create_directories(a.out_dir);
    write_file_atomic(fs::path(a.out_dir) / "weyl.csv", csv.str());
    write_file_atomic(fs::path(a.out_dir) / "config.txt", h.str());
    out << "wrote " << (fs::path(a.out_dir) / "weyl.csv").string() << "\n";
  } else {
    out << csv.str();
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct DiscrepancyArgs {
  std::string file;
  std::optional<unsigned> base;
  std::size_t N = 50;
  std::optional<double> C;
  unsigned zcap = 6;
  std::uint64_t seed = 0;
  std::string disc_config;
};

int cmd_discrepancy(const DiscrepancyArgs& a, std::ostream& out) {
  require_positive("--N", a.N);
  require_positive("--zcap", a.zcap);
  if (a.C) require_positive("--C", *a.C);
  const DigitWord w = read_digit_file(a.file, a.base ? std::optional<Base>(*a.base) : std::nullopt);
  if (w.empty()) throw UsageError("digit file is empty");
  DiscrepancyParams params;
  if (!a.disc_config.empty()) params = load_discrepancy_config(a.disc_config);
  params.z_len_cap = a.zcap;
  std::string source = "config";
  if (a.C) {
    params.per_base[w.base()] = BaseConstants{*a.C, a.N};
    source = "flag";
  } else if (!params.has_base(w.base())) {
    CalibrationOptions o;
    o.N = a.N;
    o.seed = a.seed;
    o.z_len_cap = a.zcap;
    params.per_base[w.base()] = calibrate_base(w.base(), o).constants;
    source = "calibrated";
  }
  params.validate();
  const BaseConstants& k = params.for_base(w.base());
  ConfigHeader h("discrepancy");
  h.add("file", a.file);
  h.add("base", w.base());
  h.add("N", k.N);
  h.add("C", k.C);
  h.add("C_source", source);
  h.add("zcap", a.zcap);
  h.add("seed", a.seed);
  out << h.str();
  out << "digits = " << w.size() << "\n";
  out << "ratio = " << num(discrepancy_ratio(w, k.N, a.zcap)) << "\n";
  out << "in_G = " << (in_good_set(w, params) ? "true" : "false") << "\n";
  out << "star_discrepancy(shifts) = " << num(star_discrepancy(shift_points(w))) << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct CalibrateArgs {
  std::vector<unsigned> bases;
  std::size_t samples = 1000;
  std::size_t length = 2000;
  std::size_t N = 50;
  double target = 0.6;
  unsigned zcap = 6;
  std::uint64_t seed = 0;
  std::string out_file;
};

int cmd_calibrate(const CalibrateArgs& a, std::ostream& out) {
  require_positive("--samples", a.samples);
  require_positive("--N", a.N);
  require_positive("--zcap", a.zcap);
  if (a.length <= a.N) throw UsageError("--length must exceed --N");
  if (!(a.target > 0.0 && a.target <= 1.0)) throw UsageError("--target must lie in (0, 1]");
  ConfigHeader h("calibrate");
  std::string list;
  for (const auto b : a.bases) list += (list.empty() ? "" : ",") + std::to_string(b);
  h.add("bases", list);
  h.add("samples", a.samples);
  h.add("length", a.length);
  h.add("N", a.N);
  h.add("target", a.target);
  h.add("zcap", a.zcap);
  h.add("seed", a.seed);
  out << h.str();
  DiscrepancyParams params;
  params.z_len_cap = a.zcap;
  for (const auto b : a.bases) {
    CalibrationOptions o;
    o.N = a.N;
    o.length = a.length;
    o.samples = a.samples;
    o.target_pass_rate = a.target;
    o.seed = a.seed;
    o.z_len_cap = a.zcap;
    const CalibrationResult r = calibrate_base(b, o);
    params.per_base[b] = r.constants;
    out << "base " << b << ": C = " << num(r.constants.C) << ", N = " << r.constants.N
        << ", pass rate = " << num(r.pass_rate) << "\n";
  }
  if (!a.out_file.empty()) {
    save_discrepancy_config(a.out_file, params);
    out << "wrote " << a.out_file << "\n";
  } else {
    write_discrepancy_config(out, params);
  }
  return kExitOk;
}

}  // namespace

// ---------------------------------------------------------------------------

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Finite-state dimension toolkit: block entropies, discrepancy, Weyl sums and staged constructions",
               "fsdim"};
  app.require_subcommand(1);

  AnalyzeArgs an;
  auto* analyze = app.add_subcommand("analyze", "Entropy profile and dimension estimate of a digit file");
  analyze->add_option("file", an.file, "Digit file")->required();
  analyze->add_option("--base", an.base, "Declared base; overrides the header");
  analyze->add_option("--lmax", an.lmax, "Largest block length")->capture_default_str();
  analyze->add_option("--checkpoints", an.checkpoints, "Number of geometric checkpoints")->capture_default_str();
  analyze->add_option("--out", an.out_dir, "Directory for profile.csv");

  ConstructArgs co;
  auto* construct = app.add_subcommand("construct", "Run the staged construction from a plan file");
  construct->add_option("--plan", co.plan, "Plan file")->required();
  construct->add_option("--stages", co.stages, "Number of stages")->capture_default_str();
  construct->add_option("--mode", co.mode, "Candidate search")
      ->check(CLI::IsMember({"sampled", "exhaustive"}))
      ->capture_default_str();
  construct->add_option("--samples", co.samples, "Candidates per step in sampled mode")->capture_default_str();
  construct->add_option("--seed", co.seed, "Seed for sampling and calibration")->capture_default_str();
  construct->add_option("--out", co.out_dir, "Output directory");
  construct->add_option("--tolerance", co.tolerance, "Replaces the 2^-k thresholds")->capture_default_str();
  construct->add_flag("--asymptotic-thresholds", co.asymptotic_thresholds, "Keep the 2^-k thresholds");
  construct->add_option("--lmax", co.lmax, "Block length cap l_cap")->capture_default_str();
  construct->add_option("--min-digits", co.min_digits, "Digit floor per substage")->capture_default_str();
  construct->add_option("--step-budget", co.step_budget, "Step budget per substage")->capture_default_str();
  construct->add_option("--t-cap", co.t_cap, "Cap on t in A_m");
  construct->add_option("--weyl-t", co.weyl_t, "Weyl check range")->capture_default_str();
  construct->add_option("--weyl-gamma", co.weyl_gamma, "Weyl check gamma")->capture_default_str();
  construct->add_option("--zcap", co.zcap, "Cap on |z| in the discrepancy filter")->capture_default_str();
  construct->add_option("--disc-config", co.disc_config, "Discrepancy constants file");
  construct->add_flag("--progress", co.progress, "Per-step progress on stderr");

  std::string suite;
  std::uint64_t vseed = 0;
  std::size_t vsamples = 0;
  auto* verify = app.add_subcommand("verify", "Run a property suite");
  verify->add_option("suite", suite, "viete | sin-bound | am-oracle | discrepancy-oracle | weyl-certificate | all")
      ->required();
  verify->add_option("--seed", vseed, "Seed")->capture_default_str();
  verify->add_option("--samples", vsamples, "Suite size (0: suite default)")->capture_default_str();

  WeylArgs we;
  auto* weyl = app.add_subcommand("weyl", "Weyl averages of a digit file or a rational");
  weyl->add_option("file", we.file, "Digit file; x is its value in the file base");
  weyl->add_option("--x", we.x, "Rational a/b in [0,1)");
  weyl->add_option("--base", we.base, "Orbit base");
  weyl->add_option("--tmax", we.tmax, "Largest |t|")->capture_default_str();
  weyl->add_option("--n", we.n, "Orbit length");
  weyl->add_option("--route", we.route, "Summation route")
      ->check(CLI::IsMember({"auto", "direct", "spectral"}))
      ->capture_default_str();
  weyl->add_option("--out", we.out_dir, "Directory for weyl.csv");

  DiscrepancyArgs di;
  auto* discrepancy = app.add_subcommand("discrepancy", "Low-discrepancy ratio and star discrepancy of a digit file");
  discrepancy->add_option("file", di.file, "Digit file")->required();
  discrepancy->add_option("--base", di.base, "Declared base");
  discrepancy->add_option("--N", di.N, "Threshold N_b")->capture_default_str();
  discrepancy->add_option("--C", di.C, "Constant C_b (default: config or calibration)");
  discrepancy->add_option("--zcap", di.zcap, "Cap on |z|")->capture_default_str();
  discrepancy->add_option("--seed", di.seed, "Calibration seed")->capture_default_str();
  discrepancy->add_option("--disc-config", di.disc_config, "Discrepancy constants file");

  CalibrateArgs ca;
  auto* calibrate = app.add_subcommand("calibrate", "Calibrate discrepancy constants");
  calibrate->add_option("--base", ca.bases, "Base (repeatable)")->required();
  calibrate->add_option("--samples", ca.samples, "Random words")->capture_default_str();
  calibrate->add_option("--length", ca.length, "Word length")->capture_default_str();
  calibrate->add_option("--N", ca.N, "Threshold N_b")->capture_default_str();
  calibrate->add_option("--target", ca.target, "Target pass rate")->capture_default_str();
  calibrate->add_option("--zcap", ca.zcap, "Cap on |z|")->capture_default_str();
  calibrate->add_option("--seed", ca.seed, "Seed")->capture_default_str();
  calibrate->add_option("--out", ca.out_file, "Config file to write");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*analyze) return cmd_analyze(an, out);
    if (*construct) return cmd_construct(co, out, err);
    if (*verify) return cmd_verify(suite, vseed, vsamples, out);
    if (*weyl) return cmd_weyl(we, out);
    if (*discrepancy) return cmd_discrepancy(di, out);
    if (*calibrate) return cmd_calibrate(ca, out);
  } catch (const NoCandidate& e) {
    err << "error: " << e.what() << "\n";
    return kExitVerificationFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace fsdim
