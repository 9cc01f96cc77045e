// Acceptance gate: one PASS/FAIL line per criterion 1-10, then non-gating
// supplementary lines. Exit status is nonzero when any gating criterion fails.
//
//   acceptance <path-to-kaon-eraser> <work-dir>

#include <sys/wait.h>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/quadrature/exp_sinh.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "kaon/analytic_probabilities.hpp"
#include "kaon/decay_model.hpp"
#include "kaon/entangled_pair.hpp"
#include "kaon/eraser_experiments.hpp"
#include "kaon/event_generator.hpp"

namespace fs = std::filesystem;
using namespace kaon;

namespace tol {
constexpr double exact = 1e-12;          // criteria 1, 2, 3, 5
constexpr double passive_active = 1e-10;  // criterion 4
constexpr double n_sigma = 3.0;           // criteria 6, 7, 8, 9
constexpr double agree_fraction = 0.99;   // criteria 6, 7, 8
constexpr double chi2_alpha = 1e-3;       // criterion 6
constexpr double misid_round = 5e-6;      // criterion 9: three significant figures
constexpr double misid_ceiling = 1e-2;
}  // namespace tol

namespace cfg {
constexpr std::uint64_t n_pairs = 1000000;
constexpr std::uint64_t n_single = 1000000;
constexpr std::size_t min_grid_bins = 100;      // criterion 6 and 8 evaluable bins
constexpr std::size_t min_side_bins = 5;        // criterion 7 per side of tau_r0
constexpr std::uint64_t determinism_pairs = 200000;
}  // namespace cfg

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

// ---- independent oracles --------------------------------------------------

double oracle_like(double dt, const PhysicsParams& p) {
  const double v = 1.0 / std::cosh(0.5 * (p.gamma_l - p.gamma_s) * dt);
  return 0.25 * (1.0 - v * std::cos(p.delta_m * dt));
}

double oracle_strange_ks(double dt, const PhysicsParams& p) {
  return 0.5 / (1.0 + std::exp((p.gamma_l - p.gamma_s) * dt));
}

double oracle_norm(double tl, double tr, const PhysicsParams& p) {
  return 0.5 * (std::exp(-p.gamma_s * tl - p.gamma_l * tr) +
                std::exp(-p.gamma_l * tl - p.gamma_s * tr));
}

// Random widths with gamma_s = 1 and a semileptonic-consistent branching set.
PhysicsParams random_params(std::mt19937_64& rng, bool alternate) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  PhysicsParams p;
  p.gamma_l = 1e-3 + 0.9 * u(rng);
  p.delta_m = 3.0 * u(rng);
  p.br_semileptonic_l = alternate ? 0.3 : 0.6759;
  p.br_l_3pi = alternate ? 0.5 : 0.3206;
  p.br_semileptonic_s = p.gamma_l * p.br_semileptonic_l / p.gamma_s;
  p.br_s_2pi = alternate ? 0.5 * (1.0 - p.br_semileptonic_s) : 1.0 - p.br_semileptonic_s;
  validate(p);
  return p;
}

// ---- scan comparison helpers ------------------------------------------------

using Column = Estimate ScanRow::*;
using Twin = double ScanRow::*;

struct ColumnRef {
  const char* name;
  Column value;
  Twin analytic;
};

const std::vector<ColumnRef> table_columns{{"like", &ScanRow::like, &ScanRow::like_analytic},
                                           {"unlike", &ScanRow::unlike, &ScanRow::unlike_analytic},
                                           {"ks", &ScanRow::ks, &ScanRow::ks_analytic},
                                           {"kl", &ScanRow::kl, &ScanRow::kl_analytic}};

bool row_evaluable(const ScanRow& r) {
  for (const auto& c : table_columns)
    if ((r.*c.value).flagged) return false;
  return true;
}

struct Fit {
  std::size_t rows = 0;       // evaluable grid bins
  std::size_t estimates = 0;  // estimates in those bins
  std::size_t agree = 0;
  double fraction() const { return estimates ? double(agree) / double(estimates) : 0.0; }
};

Fit fit_to_analytic(const ScanResult& s, const std::function<bool(const ScanRow&)>& keep) {
  Fit f;
  for (const ScanRow& r : s.rows) {
    if (!keep(r) || !row_evaluable(r)) continue;
    ++f.rows;
    for (const auto& c : table_columns) {
      const Estimate& e = r.*c.value;
      ++f.estimates;
      if (std::abs(e.value - r.*c.analytic) <= tol::n_sigma * e.sigma) ++f.agree;
    }
  }
  return f;
}

std::string describe(const Fit& f) {
  return std::to_string(f.rows) + " evaluable bins, " + std::to_string(f.agree) + "/" +
         std::to_string(f.estimates) + " estimates within 3 sigma";
}

// Pairwise comparison on the columns whose analytic twins coincide.
Fit compare(const ScanResult& x, const ScanResult& y) {
  Fit f;
  for (std::size_t i = 0; i < x.rows.size() && i < y.rows.size(); ++i) {
    const ScanRow& a = x.rows[i];
    const ScanRow& b = y.rows[i];
    std::size_t matched = 0, ok = 0;
    bool evaluable = true;
    for (const auto& c : table_columns) {
      if (std::abs(a.*c.analytic - b.*c.analytic) > 1e-12) continue;
      const Estimate& ea = a.*c.value;
      const Estimate& eb = b.*c.value;
      if (ea.flagged || eb.flagged) {
        evaluable = false;
        break;
      }
      ++matched;
      const double s = std::hypot(ea.sigma, eb.sigma);
      if (std::abs(ea.value - eb.value) <= tol::n_sigma * s) ++ok;
    }
    if (!evaluable || matched == 0) continue;
    ++f.rows;
    f.estimates += matched;
    f.agree += ok;
  }
  return f;
}

ExperimentSpec spec_for(ExperimentKind k, double tau_r0, std::vector<double> grid, double bin,
                        std::uint64_t seed) {
  ExperimentSpec s;
  s.kind = k;
  s.tau_r0 = tau_r0;
  s.tau_l_grid = std::move(grid);
  s.bin_width = bin;
  s.seed = seed;
  return s;
}

std::vector<PairEvent> events(std::uint64_t seed, std::uint64_t n, const PhysicsParams& p) {
  GeneratorConfig c;
  c.seed = seed;
  c.n_pairs = n;
  return generate(c, p);
}

// Expected like-plus-unlike strangeness pairs in the best passive bin: the
// four semileptonic pair rates sum to (semileptonic width)^2 N.
double best_strangeness_bin(const ExperimentSpec& s, std::uint64_t n, const PhysicsParams& p) {
  double best = 0.0;
  const double g = p.semileptonic_width();
  for (double tl : s.tau_l_grid) {
    const double l0 = std::max(0.0, tl - 0.5 * s.bin_width), l1 = tl + 0.5 * s.bin_width;
    const double r0 = std::max(0.0, s.tau_r0 - 0.5 * s.bin_width), r1 = s.tau_r0 + 0.5 * s.bin_width;
    best = std::max(best, double(n) * g * g * normalization_integral(l0, l1, r0, r1, p));
  }
  return best;
}

// ---- criterion 6 chi-squared ------------------------------------------------

struct ChiSquare {
  double stat = 0.0;
  int dof = 0;
  double p_value = 0.0;
  double total_expected = 0.0;
};

ChiSquare mode_pair_chi2(std::span<const PairEvent> ev, const PhysicsParams& p) {
  const TransitionAmplitudes amps(p);
  std::array<std::array<double, 5>, 5> counts{};
  for (const auto& e : ev) counts[index_of(e.left.mode)][index_of(e.right.mode)] += 1.0;
  ChiSquare c;
  int cells = 0;
  boost::math::quadrature::exp_sinh<double> outer, inner;
  for (DecayMode ml : all_decay_modes)
    for (DecayMode mr : all_decay_modes) {
      const double prob = outer.integrate([&](double tl) {
        return inner.integrate([&](double tr) {
          return joint_decay_rate_all_channels(ml, tl, mr, tr, amps, p);
        });
      });
      c.total_expected += prob;
      const double expect = prob * double(ev.size());
      const double obs = counts[index_of(ml)][index_of(mr)];
      if (expect < 1e-9) {
        if (obs > 0) c.stat = INFINITY;
        continue;
      }
      c.stat += (obs - expect) * (obs - expect) / expect;
      ++cells;
    }
  c.dof = cells - 1;
  c.p_value = std::isfinite(c.stat)
                  ? boost::math::cdf(boost::math::complement(boost::math::chi_squared(c.dof), c.stat))
                  : 0.0;
  return c;
}

// ---- criterion 10 helpers ---------------------------------------------------

int shell(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---- criteria ---------------------------------------------------------------

Verdict criterion1() {
  const PhysicsParams p;
  double worst = 0.0;
  for (double t : {0.0, 0.1, 1.0, 2.5, 10.0, 100.0}) {
    worst = std::max(worst, std::abs(joint_strangeness(t, t, Outcome::K0, Outcome::K0, p)));
    worst = std::max(worst, std::abs(joint_strangeness(t, t, Outcome::K0bar, Outcome::K0bar, p)));
    worst = std::max(worst, std::abs(joint_strangeness(t, t, Outcome::K0, Outcome::K0bar, p) - 0.5));
    worst = std::max(worst, std::abs(joint_strangeness(t, t, Outcome::K0bar, Outcome::K0, p) - 0.5));
  }
  return {worst <= tol::exact, fmt("max deviation %.2e at equal times", worst)};
}

Verdict criterion2() {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> t(0.0, 20.0);
  double worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    const PhysicsParams p = random_params(rng, false);
    const double tl = t(rng), tr = t(rng);
    const PairAmplitude n = normalize_surviving(evolved_state(tl, tr, p, Basis::Strangeness));
    const double like = oracle_like(tl - tr, p);
    worst = std::max(worst, std::abs(project(n, Outcome::K0, Outcome::K0) - like));
    worst = std::max(worst, std::abs(project(n, Outcome::K0bar, Outcome::K0bar) - like));
    worst = std::max(worst, std::abs(project(n, Outcome::K0, Outcome::K0bar) - (0.5 - like)));
    worst = std::max(worst, std::abs(joint_strangeness(tl, tr, Outcome::K0, Outcome::K0, p) - like));
  }
  return {worst <= tol::exact, fmt("100 random (dG, dt): max deviation %.2e", worst)};
}

Verdict criterion3() {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> t(0.0, 20.0);
  double worst = 0.0, worst_marginal = 0.0;
  for (int k = 0; k < 100; ++k) {
    const PhysicsParams p = random_params(rng, false);
    const double tl = t(rng), tr = t(rng);
    const PairAmplitude n = normalize_surviving(evolved_state(tl, tr, p, Basis::Lifetime));
    const double ks = oracle_strange_ks(tl - tr, p);
    for (Outcome s : {Outcome::K0, Outcome::K0bar}) {
      const double pks = joint_strangeness_lifetime(tl, tr, s, Outcome::KS, p);
      const double pkl = joint_strangeness_lifetime(tl, tr, s, Outcome::KL, p);
      worst = std::max(worst, std::abs(pks - ks));
      worst = std::max(worst, std::abs(pkl - (0.5 - ks)));
      worst = std::max(worst, std::abs(project(n, s, Outcome::KS) - ks));
      worst = std::max(worst, std::abs(project(n, s, Outcome::KL) - (0.5 - ks)));
      worst_marginal = std::max(worst_marginal, std::abs(pks + pkl - 0.5));
    }
  }
  return {worst <= tol::exact && worst_marginal <= tol::exact,
          fmt("max deviation %.2e, marginal deviation %.2e", worst, worst_marginal)};
}

Verdict criterion4() {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> t(0.0, 15.0);
  std::uniform_int_distribution<int> mode(0, 3);
  double worst = 0.0;
  for (int k = 0; k < 200; ++k) {
    const PhysicsParams p = random_params(rng, k % 2 == 1);
    const DecayMode ml = identifying_modes[mode(rng)];
    const DecayMode mr = identifying_modes[mode(rng)];
    const double tl = t(rng), tr = t(rng);
    const double passive = passive_probability(ml, tl, mr, tr, p);
    const double active = joint_probability(tl, tr, *identified_state(ml), *identified_state(mr), p);
    worst = std::max(worst, std::abs(passive - active));
  }
  return {worst <= tol::passive_active,
          fmt("200 draws over two branching sets: max deviation %.2e", worst)};
}

Verdict criterion5() {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> t(0.0, 30.0);
  double worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    const PhysicsParams p = random_params(rng, false);
    const double tl = t(rng), tr = t(rng);
    const double expect = oracle_norm(tl, tr, p);
    for (Basis b : {Basis::Strangeness, Basis::Lifetime})
      worst = std::max(worst, std::abs(evolved_state(tl, tr, p, b).norm2() / expect - 1.0));
  }
  return {worst <= tol::exact, fmt("max relative deviation %.2e", worst)};
}

Verdict passive_fidelity(const PhysicsParams& p, std::span<const PairEvent> ev,
                         const ExperimentSpec& s, bool with_chi2) {
  const ScanResult r = run_experiment(s, p, ev);
  const Fit f = fit_to_analytic(r, [](const ScanRow&) { return true; });
  bool pass = f.rows >= cfg::min_grid_bins && f.fraction() >= tol::agree_fraction;
  std::string detail = std::to_string(s.tau_l_grid.size()) + "-bin grid, " + describe(f);
  if (f.rows < cfg::min_grid_bins) {
    detail += fmt("; best bin expects %.3g strangeness pairs", best_strangeness_bin(s, ev.size(), p));
  }
  if (with_chi2) {
    const ChiSquare c = mode_pair_chi2(ev, p);
    pass = pass && c.p_value > tol::chi2_alpha;
    detail += fmt("; mode-pair chi2 %.1f on %.0f dof, p = %.3f", c.stat, c.dof, c.p_value);
  }
  return {pass, detail};
}

Verdict delayed_choice(const PhysicsParams& p, std::span<const PairEvent> ev, const ExperimentSpec& s) {
  const ScanResult r = run_experiment(s, p, ev);
  const double t0 = s.tau_r0;
  const Fit before = fit_to_analytic(r, [&](const ScanRow& row) { return row.tau_l < t0; });
  const Fit after = fit_to_analytic(r, [&](const ScanRow& row) { return row.tau_l > t0; });
  const bool pass = before.rows >= cfg::min_side_bins && after.rows >= cfg::min_side_bins &&
                    before.fraction() >= tol::agree_fraction &&
                    after.fraction() >= tol::agree_fraction;
  return {pass, "tau_l < tau_r0: " + describe(before) + "; tau_l > tau_r0: " + describe(after)};
}

Verdict cross_experiment(const PhysicsParams& p, std::vector<double> grid, double tau_r0, double bin,
                         std::uint64_t n) {
  const ExperimentKind kinds[] = {ExperimentKind::ActiveActive, ExperimentKind::PartiallyActive,
                                  ExperimentKind::PassiveMeterActiveObject,
                                  ExperimentKind::PassivePassive};
  std::vector<ScanResult> scans;
  for (int i = 0; i < 4; ++i) {
    const auto ev = events(800 + i, n, p);
    scans.push_back(run_experiment(spec_for(kinds[i], tau_r0, grid, bin, 800 + i), p, ev));
  }
  bool pass = true;
  std::string detail;
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j) {
      const Fit f = compare(scans[i], scans[j]);
      const bool ok = f.rows >= cfg::min_grid_bins && f.fraction() >= tol::agree_fraction;
      pass = pass && ok;
      if (!detail.empty()) detail += "; ";
      detail += std::string(1, letter(kinds[i])) + "-" + letter(kinds[j]) + " " +
                std::to_string(f.rows) + " bins " + std::to_string(f.agree) + "/" +
                std::to_string(f.estimates);
    }
  return {pass, detail};
}

Verdict criterion9() {
  const PhysicsParams p;
  const MisidentificationRates m = misidentification_rates(p);
  // Direct exponential evaluation.
  const double kl_as_ks = 1.0 - std::exp(-p.gamma_l * p.lifetime_window);
  const double ks_as_kl = std::exp(-p.gamma_s * p.lifetime_window);
  bool pass = std::abs(m.kl_as_ks - kl_as_ks) < 1e-15 && std::abs(m.ks_as_kl - ks_as_kl) < 1e-15;
  pass = pass && std::abs(kl_as_ks - 8.26e-3) < tol::misid_round &&
         std::abs(ks_as_kl - 8.23e-3) < tol::misid_round && kl_as_ks < tol::misid_ceiling &&
         ks_as_kl < tol::misid_ceiling;
  CounterRng rs(9, 0), rl(9, 1);
  std::uint64_t ks_late = 0, kl_early = 0;
  for (std::uint64_t i = 0; i < cfg::n_single; ++i) {
    if (sample_eigenstate_decay_time(rs, Eigenstate::S, p) > p.lifetime_window) ++ks_late;
    if (sample_eigenstate_decay_time(rl, Eigenstate::L, p) <= p.lifetime_window) ++kl_early;
  }
  const double n = double(cfg::n_single);
  auto z = [&](double k, double q) { return (k / n - q) / std::sqrt(q * (1 - q) / n); };
  const double z_ks = z(double(ks_late), ks_as_kl), z_kl = z(double(kl_early), kl_as_ks);
  pass = pass && std::abs(z_ks) <= tol::n_sigma && std::abs(z_kl) <= tol::n_sigma;
  return {pass, fmt("K_L as K_S %.4e (MC z %.2f), K_S as K_L %.4e (MC z %.2f)", kl_as_ks, z_kl,
                    ks_as_kl, z_ks)};
}

Verdict criterion10(const std::string& exe, const fs::path& work) {
  fs::create_directories(work);
  const std::string q = "\"" + exe + "\"";
  const std::string n = std::to_string(cfg::determinism_pairs);
  std::vector<std::string> event_files, scans_a, scans_c, scans_d;
  bool ok = true;
  for (const char* th : {"1", "2", "8", "1"}) {
    const std::string tag = std::string(th) + "_" + std::to_string(event_files.size());
    const fs::path ev = work / ("events_" + tag + ".csv");
    const fs::path a = work / ("scan_a_" + tag + ".csv");
    const fs::path c = work / ("scan_c_" + tag + ".csv");
    const fs::path d = work / ("scan_d_" + tag + ".csv");
    ok = ok && shell(q + " generate --pairs " + n + " --seed 77 --threads " + th + " --out \"" +
                     ev.string() + "\"") == 0;
    ok = ok && shell(q + " experiment a --tau-r0 1 --grid 0:10:0.2 --pairs " + n +
                     " --seed 77 --threads " + th + " --out \"" + a.string() + "\"") == 0;
    ok = ok && shell(q + " experiment c --tau-r0 1 --grid 0:10:0.2 --threads " + th +
                     " --events-in \"" + ev.string() + "\" --out \"" + c.string() + "\"") == 0;
    ok = ok && shell(q + " experiment d --tau-r0 1 --grid 0:10:0.2 --threads " + th +
                     " --events-in \"" + ev.string() + "\" --out \"" + d.string() + "\"") == 0;
    event_files.push_back(slurp(ev));
    scans_a.push_back(slurp(a));
    scans_c.push_back(slurp(c));
    scans_d.push_back(slurp(d));
  }
  auto same = [](const std::vector<std::string>& v) {
    for (const auto& s : v)
      if (s != v.front() || s.empty()) return false;
    return true;
  };
  const bool pass = ok && same(event_files) && same(scans_a) && same(scans_c) && same(scans_d);
  return {pass, std::string("threads 1, 2, 8 and a repeat: events ") +
                    (same(event_files) ? "identical" : "DIFFER") + ", scan a " +
                    (same(scans_a) ? "identical" : "DIFFER") + ", scan c " +
                    (same(scans_c) ? "identical" : "DIFFER") + ", scan d " +
                    (same(scans_d) ? "identical" : "DIFFER") + (ok ? "" : ", a command failed")};
}

// Broad widths and a fast oscillation: every passive family is populated.
PhysicsParams supplementary_params() {
  PhysicsParams p;
  p.gamma_l = 0.5;
  p.delta_m = 4.0;
  p.br_semileptonic_l = 0.6;
  p.br_l_3pi = 0.4;
  p.br_semileptonic_s = 0.3;
  p.br_s_2pi = 0.7;
  p.lifetime_window = std::log(2.0) / 0.5;
  validate(p);
  return p;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 3) {
    std::fprintf(stderr, "usage: acceptance <kaon-eraser> <work-dir>\n");
    return 2;
  }
  const std::string exe = argv[1];
  const fs::path work = argv[2];
  int failures = 0;
  auto report = [&](const char* id, const char* title, const Verdict& v, bool gating = true) {
    std::printf("%s %s %s: %s\n", v.pass ? "PASS" : "FAIL", id, title, v.detail.c_str());
    std::fflush(stdout);
    if (gating && !v.pass) ++failures;
  };

  report("1", "EPR anti-correlation", criterion1());
  report("2", "visibility law", criterion2());
  report("3", "strangeness-lifetime law", criterion3());
  report("4", "passive equals active", criterion4());
  report("5", "norm equals N", criterion5());

  const PhysicsParams defaults;
  const auto sample = events(606, cfg::n_pairs, defaults);
  report("6", "Monte Carlo fidelity, experiment d at defaults",
         passive_fidelity(defaults, sample,
                          spec_for(ExperimentKind::PassivePassive, 1.0, make_grid(0.0, 20.0, 0.2),
                                   0.2, 606),
                          true));
  report("7", "delayed-choice invariance, experiment d at defaults",
         delayed_choice(defaults, sample,
                        spec_for(ExperimentKind::PassivePassive, 2.0, make_grid(0.0, 4.0, 0.2), 0.2,
                                 606)));
  report("8", "cross-experiment equality at defaults",
         cross_experiment(defaults, make_grid(0.0, 20.0, 0.2), 1.0, 0.2, cfg::n_pairs));
  report("9", "misidentification magnitudes", criterion9());
  report("10", "determinism", criterion10(exe, work));

  // Non-gating: the same procedures where every passive family is populated.
  const PhysicsParams broad = supplementary_params();
  const auto broad_sample = events(707, 2 * cfg::n_pairs, broad);
  const auto broad_grid = make_grid(0.0, 4.0, 0.04);
  report("S6", "supplementary (non-gating) fidelity, broad widths",
         passive_fidelity(broad, broad_sample,
                          spec_for(ExperimentKind::PassivePassive, 0.5, broad_grid, 0.04, 707), true),
         false);
  report("S7", "supplementary (non-gating) delayed choice, broad widths",
         delayed_choice(broad, broad_sample,
                        spec_for(ExperimentKind::PassivePassive, 2.0, broad_grid, 0.04, 707)),
         false);
  report("S8", "supplementary (non-gating) cross-experiment, broad widths",
         cross_experiment(broad, broad_grid, 0.5, 0.04, 2 * cfg::n_pairs), false);

  std::printf("%d gating criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
