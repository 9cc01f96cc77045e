#pragma once

// The four quantum-eraser set-ups. The left kaon is the object, scanned over
// tau_l; the right kaon is the meter, examined around a fixed tau_r0.
//
//  (a) ActiveActive: both kaons must survive to their detectors. Set-up 1
//      puts matter in both beams (strangeness x strangeness, projected with
//      the Born rule of the surviving pair state). Set-up 2 removes the right
//      slab and identifies the meter lifetime by the decay-time window; the
//      window misidentification is unfolded with misidentification_rates().
//  (b) PartiallyActive: matter in the right beam at tau_r0, decays before it
//      observed. Survivors are strangeness-projected at tau_r0; early 2pi/3pi
//      decays give lifetime information and early semileptonic decays give
//      strangeness, both estimated in the last bin before tau_r0.
//  (c) PassiveMeterActiveObject: the meter is classified by its decay mode in
//      a bin around tau_r0; the object is conditioned on survival to tau_l and
//      actively projected given the meter's decay record.
//  (d) PassivePassive: both sides classified by decay mode in bins around
//      (tau_l, tau_r0), probabilities from the binned rate estimator.
//
// Active projections of the object that are made alongside a recorded meter
// decay draw from the exact conditional state given that decay. Every random
// choice uses a counter-based stream keyed by (seed, event id, row), and all
// accumulation is into integer counters, so results do not depend on thread
// count.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "kaon/analytic_probabilities.hpp"
#include "kaon/decay_model.hpp"
#include "kaon/entangled_pair.hpp"
#include "kaon/errors.hpp"
#include "kaon/event_generator.hpp"
#include "kaon/physics_params.hpp"

namespace kaon {

enum class ExperimentKind { ActiveActive, PartiallyActive, PassiveMeterActiveObject, PassivePassive };

inline char letter(ExperimentKind k) noexcept {
  switch (k) {
    case ExperimentKind::ActiveActive: return 'a';
    case ExperimentKind::PartiallyActive: return 'b';
    case ExperimentKind::PassiveMeterActiveObject: return 'c';
    case ExperimentKind::PassivePassive: return 'd';
  }
  return '?';
}

inline std::optional<ExperimentKind> experiment_from_letter(std::string_view s) {
  if (s == "a") return ExperimentKind::ActiveActive;
  if (s == "b") return ExperimentKind::PartiallyActive;
  if (s == "c") return ExperimentKind::PassiveMeterActiveObject;
  if (s == "d") return ExperimentKind::PassivePassive;
  return std::nullopt;
}

struct ExperimentSpec {
  ExperimentKind kind = ExperimentKind::ActiveActive;
  double tau_r0 = 0.0;
  std::vector<double> tau_l_grid;
  std::uint64_t n_pairs = 0;  // 0: analytic columns only
  std::uint64_t seed = 0;
  double bin_width = 0.2;
  std::uint64_t min_events = 10;  // family count below which a row is flagged
  unsigned threads = 1;
};

inline void validate(const ExperimentSpec& spec) {
  if (!(spec.tau_r0 >= 0.0)) throw ValidationError("tau_r0 >= 0 violated");
  if (spec.tau_l_grid.empty()) throw ValidationError("tau_l grid must be nonempty");
  if (!(spec.bin_width > 0.0)) throw ValidationError("bin_width > 0 violated");
  for (std::size_t i = 0; i < spec.tau_l_grid.size(); ++i) {
    if (!(spec.tau_l_grid[i] >= 0.0)) throw ValidationError("tau_l grid must be nonnegative");
    if (i > 0 && !(spec.tau_l_grid[i] > spec.tau_l_grid[i - 1])) {
      throw ValidationError("tau_l grid must be strictly increasing");
    }
    if (spec.kind == ExperimentKind::PassivePassive && i > 0 &&
        spec.tau_l_grid[i] - spec.tau_l_grid[i - 1] < spec.bin_width * (1.0 - 1e-9)) {
      throw ValidationError("tau_l grid spacing must be >= bin_width so bins do not overlap");
    }
  }
  if ((spec.kind == ExperimentKind::PassiveMeterActiveObject ||
       spec.kind == ExperimentKind::PassivePassive) &&
      spec.n_pairs < 1) {
    throw ValidationError("experiments c and d are event based: n_pairs >= 1 required");
  }
}

// Evenly spaced grid start, start + step, ... up to stop (inclusive within
// half a part in 1e9 of a step).
inline std::vector<double> make_grid(double start, double stop, double step) {
  if (!(step > 0.0) || !(stop >= start)) throw ValidationError("grid needs step > 0, stop >= start");
  std::vector<double> g;
  const auto n = static_cast<std::uint64_t>(std::floor((stop - start) / step + 1e-9));
  g.reserve(n + 1);
  for (std::uint64_t i = 0; i <= n; ++i) g.push_back(start + static_cast<double>(i) * step);
  return g;
}

enum class LifetimeTag { KS, KL, NotApplicable };

inline const char* to_string(LifetimeTag t) noexcept {
  switch (t) {
    case LifetimeTag::KS: return "KS";
    case LifetimeTag::KL: return "KL";
    case LifetimeTag::NotApplicable: return "NotApplicable";
  }
  return "?";
}

// Active identification: a kaon alive at measurement_time that decays no
// later than measurement_time + window is a K_S, otherwise a K_L.
inline LifetimeTag classify_event_lifetime(const DecayEvent& event, double measurement_time,
                                           double window) {
  if (event.tau < measurement_time) return LifetimeTag::NotApplicable;
  return event.tau <= measurement_time + window ? LifetimeTag::KS : LifetimeTag::KL;
}

// Passive identification from the decay mode alone.
inline LifetimeTag classify_lifetime_by_mode(DecayMode mode) noexcept {
  if (mode == DecayMode::TwoPi) return LifetimeTag::KS;
  if (mode == DecayMode::ThreePi) return LifetimeTag::KL;
  return LifetimeTag::NotApplicable;
}

struct MisidentificationRates {
  double kl_as_ks = 0.0;
  double ks_as_kl = 0.0;
};

inline MisidentificationRates misidentification_rates(const PhysicsParams& p) {
  return {-std::expm1(-p.gamma_l * p.lifetime_window), std::exp(-p.gamma_s * p.lifetime_window)};
}

struct Estimate {
  double value = 0.0;
  double sigma = 0.0;
  bool flagged = true;
  std::uint64_t family = 0;  // events in the family the estimate is drawn from
};

struct ScanRow {
  double tau_l = 0.0;
  double tau_r = 0.0;           // meter time of the strangeness columns
  double tau_r_lifetime = 0.0;  // meter time of the lifetime (and early) columns
  // Per outcome pair: like = P[K0,K0] = P[K0bar,K0bar], unlike = P[K0,K0bar],
  // ks = P[K0,K_S] = P[K0bar,K_S], kl likewise.
  Estimate like, unlike, ks, kl;
  double like_analytic = 0.0, unlike_analytic = 0.0, ks_analytic = 0.0, kl_analytic = 0.0;
  // Experiment (b) only: strangeness seen through early semileptonic decays.
  Estimate early_like, early_unlike;
  double early_like_analytic = 0.0, early_unlike_analytic = 0.0;
  std::uint64_t n_strangeness = 0, n_lifetime = 0, n_discarded = 0;
};

struct ScanResult {
  ExperimentSpec spec;
  std::uint64_t n_pairs = 0;
  std::vector<ScanRow> rows;
};

// Per grid point estimate of the passive-passive tables.
struct PassiveBinTables {
  JointProbabilityTable strangeness_strangeness;
  JointProbabilityTable strangeness_lifetime;
  std::array<std::array<std::uint64_t, 5>, 5> counts{};
  std::uint64_t n_discarded = 0;
};

namespace detail {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double t) const noexcept { return t >= lo && t < hi; }
  double width() const noexcept { return hi - lo; }
  double center() const noexcept { return 0.5 * (lo + hi); }
};

inline Interval centered_bin(double center, double width) {
  return {std::max(0.0, center - 0.5 * width), center + 0.5 * width};
}

// Binomial fraction k / n. A zero (or full) count is given the error of a
// single event so that it never claims infinite precision.
inline Estimate fraction_estimate(std::uint64_t k, std::uint64_t n, double scale,
                                  std::uint64_t min_events) {
  Estimate e;
  e.family = n;
  e.flagged = n < std::max<std::uint64_t>(min_events, 1);
  if (n == 0) return e;
  const double dn = static_cast<double>(n);
  const double dk = static_cast<double>(k);
  e.value = scale * dk / dn;
  e.sigma = scale * std::sqrt(std::max(dk, 1.0) * std::max(dn - dk, 1.0) / dn) / dn;
  return e;
}

// Binned rate estimator: value = k / denominator, binomial error on k out of
// n_pairs. family decides the low-statistics flag.
inline Estimate rate_estimate(std::uint64_t k, std::uint64_t n_pairs, double denominator,
                              std::uint64_t family, std::uint64_t min_events) {
  Estimate e;
  e.family = family;
  e.flagged = family < std::max<std::uint64_t>(min_events, 1) || !(denominator > 0.0);
  if (e.flagged && family == 0) return e;
  if (!(denominator > 0.0)) return e;
  const double dk = static_cast<double>(k);
  const double keff = std::max(dk, 1.0);
  e.value = dk / denominator;
  e.sigma = std::sqrt(keff * std::max(0.0, 1.0 - dk / static_cast<double>(n_pairs))) / denominator;
  return e;
}

inline Estimate sum_half(const Estimate& a, const Estimate& b) {
  Estimate e;
  e.value = 0.5 * (a.value + b.value);
  e.sigma = 0.5 * std::sqrt(a.sigma * a.sigma + b.sigma * b.sigma);
  e.flagged = a.flagged || b.flagged;
  e.family = a.family;
  return e;
}

// Cumulative Born probabilities over (l, r) in the strangeness basis, index
// 2 l + r, for the surviving pair at (tau_l, tau_r).
inline std::array<double, 4> strangeness_cdf(double tau_l, double tau_r, const PhysicsParams& p) {
  const PairAmplitude s = normalize_surviving(evolved_state(tau_l, tau_r, p, Basis::Strangeness));
  std::array<double, 4> cdf{};
  double acc = 0.0;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      acc += std::norm(s.amps[i][j]);
      cdf[2 * i + j] = acc;
    }
  return cdf;
}

inline int draw_index(const std::array<double, 4>& cdf, double u) {
  const double target = u * cdf[3];
  for (int k = 0; k < 3; ++k)
    if (target < cdf[k]) return k;
  return 3;
}

inline constexpr std::uint64_t joint_projection_stream = 1ULL << 40;
inline constexpr std::uint64_t conditional_projection_stream = 2ULL << 40;

// Integer tallies per grid row; merged by addition.
struct RowCounts {
  std::uint64_t survivors = 0, survivors_like = 0, survivors_window_ks = 0;
  std::uint64_t early_other = 0;
  std::uint64_t bin_2pi = 0, bin_3pi = 0, bin_like = 0, bin_unlike = 0, bin_other = 0;
  std::array<std::array<std::uint64_t, 5>, 5> pair{};
  std::uint64_t pair_total = 0;

  RowCounts& operator+=(const RowCounts& o) {
    survivors += o.survivors;
    survivors_like += o.survivors_like;
    survivors_window_ks += o.survivors_window_ks;
    early_other += o.early_other;
    bin_2pi += o.bin_2pi;
    bin_3pi += o.bin_3pi;
    bin_like += o.bin_like;
    bin_unlike += o.bin_unlike;
    bin_other += o.bin_other;
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 5; ++j) pair[i][j] += o.pair[i][j];
    pair_total += o.pair_total;
    return *this;
  }
};

// Left strangeness outcome (0 = K0, 1 = K0bar) for an object alive at tau_l
// whose partner decayed at t_r into mode; like when it matches the meter.
inline bool conditional_like(const PairEvent& ev, std::size_t row, double tau_l, std::uint64_t seed,
                             const TransitionAmplitudes& amps, const PhysicsParams& p) {
  const auto probs = left_strangeness_given_right_decay(tau_l, ev.right.tau, ev.right.mode, amps, p);
  CounterRng rng(seed, ev.id, conditional_projection_stream + row);
  const int left = rng.uniform() < probs[0] ? 0 : 1;
  const int right = ev.right.mode == DecayMode::SemileptonicPlus ? 0 : 1;
  return left == right;
}

struct RowSetup {
  double tau_l = 0.0;
  std::array<double, 4> cdf{};
  Interval left_bin;
  Interval meter_bin;  // (b): last bin before tau_r0; (c), (d): bin around tau_r0
};

inline void accumulate(const ExperimentSpec& spec, const PhysicsParams& p,
                       const TransitionAmplitudes& amps, std::span<const RowSetup> rows,
                       std::span<const PairEvent> events, std::vector<RowCounts>& counts) {
  const std::size_t nrows = rows.size();
  for (const PairEvent& ev : events) {
    switch (spec.kind) {
      case ExperimentKind::ActiveActive: {
        if (ev.right.tau < spec.tau_r0) break;
        const LifetimeTag tag = classify_event_lifetime(ev.right, spec.tau_r0, p.lifetime_window);
        for (std::size_t r = 0; r < nrows && rows[r].tau_l <= ev.left.tau; ++r) {
          RowCounts& c = counts[r];
          ++c.survivors;
          CounterRng rng(spec.seed, ev.id, joint_projection_stream + r);
          const int k = draw_index(rows[r].cdf, rng.uniform());
          if (k == 0 || k == 3) ++c.survivors_like;
          if (tag == LifetimeTag::KS) ++c.survivors_window_ks;
        }
        break;
      }
      case ExperimentKind::PartiallyActive: {
        const bool survived = ev.right.tau >= spec.tau_r0;
        for (std::size_t r = 0; r < nrows && rows[r].tau_l <= ev.left.tau; ++r) {
          RowCounts& c = counts[r];
          if (survived) {
            ++c.survivors;
            CounterRng rng(spec.seed, ev.id, joint_projection_stream + r);
            const int k = draw_index(rows[r].cdf, rng.uniform());
            if (k == 0 || k == 3) ++c.survivors_like;
            continue;
          }
          const DecayMode m = ev.right.mode;
          const bool in_bin = rows[r].meter_bin.contains(ev.right.tau);
          if (is_nonleptonic(m)) {
            if (in_bin) ++(m == DecayMode::TwoPi ? c.bin_2pi : c.bin_3pi);
          } else if (is_semileptonic(m)) {
            if (in_bin) {
              ++(conditional_like(ev, r, rows[r].tau_l, spec.seed, amps, p) ? c.bin_like
                                                                           : c.bin_unlike);
            }
          } else {
            ++c.early_other;
          }
        }
        break;
      }
      case ExperimentKind::PassiveMeterActiveObject: {
        if (nrows == 0 || !rows[0].meter_bin.contains(ev.right.tau)) break;
        const DecayMode m = ev.right.mode;
        for (std::size_t r = 0; r < nrows && rows[r].tau_l <= ev.left.tau; ++r) {
          RowCounts& c = counts[r];
          if (is_nonleptonic(m)) {
            ++(m == DecayMode::TwoPi ? c.bin_2pi : c.bin_3pi);
          } else if (is_semileptonic(m)) {
            ++(conditional_like(ev, r, rows[r].tau_l, spec.seed, amps, p) ? c.bin_like
                                                                         : c.bin_unlike);
          } else {
            ++c.bin_other;
          }
        }
        break;
      }
      case ExperimentKind::PassivePassive: {
        if (nrows == 0 || !rows[0].meter_bin.contains(ev.right.tau)) break;
        // Left bins are disjoint: at most one row can hold the decay.
        auto it = std::upper_bound(rows.begin(), rows.end(), ev.left.tau,
                                   [](double t, const RowSetup& s) { return t < s.left_bin.lo; });
        if (it == rows.begin()) break;
        --it;
        if (!it->left_bin.contains(ev.left.tau)) break;
        RowCounts& c = counts[static_cast<std::size_t>(it - rows.begin())];
        ++c.pair[index_of(ev.left.mode)][index_of(ev.right.mode)];
        ++c.pair_total;
        break;
      }
    }
  }
}

inline std::vector<RowCounts> tally(const ExperimentSpec& spec, const PhysicsParams& p,
                                    std::span<const RowSetup> rows,
                                    std::span<const PairEvent> events) {
  const TransitionAmplitudes amps(p);
  const std::size_t n = events.size();
  const unsigned workers = static_cast<unsigned>(
      std::max<std::size_t>(1, std::min<std::size_t>(std::max(spec.threads, 1u), n)));
  std::vector<std::vector<RowCounts>> partial(workers, std::vector<RowCounts>(rows.size()));
  if (workers == 1) {
    accumulate(spec, p, amps, rows, events, partial[0]);
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (n + workers - 1) / workers;
    for (unsigned w = 0; w < workers; ++w) {
      const std::size_t begin = std::min(n, w * chunk);
      const std::size_t end = std::min(n, begin + chunk);
      pool.emplace_back([&, w, begin, end] {
        accumulate(spec, p, amps, rows, events.subspan(begin, end - begin), partial[w]);
      });
    }
    for (auto& t : pool) t.join();
  }
  std::vector<RowCounts> total(rows.size());
  for (const auto& part : partial)
    for (std::size_t r = 0; r < rows.size(); ++r) total[r] += part[r];
  return total;
}

inline JointProbabilityTable estimate_table(ObservableKind kind_r, double tau_l, double tau_r,
                                            const PassiveBinTables& bins, std::uint64_t n_pairs,
                                            double n_integral, const TransitionAmplitudes& amps,
                                            std::uint64_t min_events) {
  JointProbabilityTable t;
  t.kind_l = ObservableKind::Strangeness;
  t.kind_r = kind_r;
  t.tau_l = tau_l;
  t.tau_r = tau_r;
  t.source = Source::MonteCarlo;
  const std::array<DecayMode, 2> left_modes{DecayMode::SemileptonicPlus,
                                            DecayMode::SemileptonicMinus};
  const std::array<DecayMode, 2> right_modes =
      kind_r == ObservableKind::Strangeness
          ? std::array<DecayMode, 2>{DecayMode::SemileptonicPlus, DecayMode::SemileptonicMinus}
          : std::array<DecayMode, 2>{DecayMode::TwoPi, DecayMode::ThreePi};
  std::uint64_t family = 0;
  for (DecayMode ml : left_modes)
    for (DecayMode mr : right_modes) family += bins.counts[index_of(ml)][index_of(mr)];
  t.low_statistics = family < std::max<std::uint64_t>(min_events, 1);
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      const DecayMode ml = left_modes[i];
      const DecayMode mr = right_modes[j];
      const double denom = static_cast<double>(n_pairs) * n_integral *
                           amps.identified_width(ml) * amps.identified_width(mr);
      const Estimate e =
          rate_estimate(bins.counts[index_of(ml)][index_of(mr)], n_pairs, denom, family, min_events);
      t.p[i][j] = e.value;
      t.sigma[i][j] = e.sigma;
    }
  }
  return t;
}

inline Estimate cell(const JointProbabilityTable& t, int i, int j) {
  return {t.p[i][j], t.sigma[i][j], t.low_statistics, 0};
}

}  // namespace detail

// Binned passive estimator for experiment (d): one pair of tables per grid
// point, with the left bin centred on the grid point and the right bin on
// tau_r0. value = count / (n_pairs * integral of N over the bin * widths).
inline std::vector<PassiveBinTables> sort_passive_events(std::span<const PairEvent> events,
                                                         std::uint64_t n_pairs,
                                                         std::span<const double> grid,
                                                         double tau_r0, double bin_width,
                                                         const PhysicsParams& params,
                                                         std::uint64_t min_events = 10,
                                                         unsigned threads = 1) {
  if (!(bin_width > 0.0)) throw ValidationError("bin_width > 0 violated");
  ExperimentSpec spec;
  spec.kind = ExperimentKind::PassivePassive;
  spec.tau_r0 = tau_r0;
  spec.tau_l_grid.assign(grid.begin(), grid.end());
  spec.bin_width = bin_width;
  spec.n_pairs = std::max<std::uint64_t>(n_pairs, 1);
  spec.threads = threads;
  validate(spec);

  std::vector<detail::RowSetup> rows(grid.size());
  const detail::Interval meter = detail::centered_bin(tau_r0, bin_width);
  for (std::size_t r = 0; r < grid.size(); ++r) {
    rows[r].tau_l = grid[r];
    rows[r].left_bin = detail::centered_bin(grid[r], bin_width);
    rows[r].meter_bin = meter;
  }
  const auto counts = detail::tally(spec, params, rows, events);
  const TransitionAmplitudes amps(params);
  std::vector<PassiveBinTables> out(grid.size());
  for (std::size_t r = 0; r < grid.size(); ++r) {
    PassiveBinTables& b = out[r];
    b.counts = counts[r].pair;
    std::uint64_t used = 0;
    for (int i : {index_of(DecayMode::SemileptonicPlus), index_of(DecayMode::SemileptonicMinus)})
      for (int j = 0; j < 4; ++j) used += b.counts[i][j];
    b.n_discarded = counts[r].pair_total - used;
    const double integral = normalization_integral(rows[r].left_bin.lo, rows[r].left_bin.hi,
                                                   meter.lo, meter.hi, params);
    b.strangeness_strangeness = detail::estimate_table(ObservableKind::Strangeness, grid[r], tau_r0,
                                                       b, n_pairs, integral, amps, min_events);
    b.strangeness_lifetime = detail::estimate_table(ObservableKind::Lifetime, grid[r], tau_r0, b,
                                                    n_pairs, integral, amps, min_events);
  }
  return out;
}

// Runs an experiment on a supplied event sample (n_pairs = events.size()).
inline ScanResult run_experiment(const ExperimentSpec& spec_in, const PhysicsParams& params,
                                 std::span<const PairEvent> events) {
  ExperimentSpec spec = spec_in;
  spec.n_pairs = events.size();
  validate(spec);
  const double w = spec.bin_width;
  const std::uint64_t n = events.size();

  ScanResult result;
  result.spec = spec;
  result.n_pairs = n;
  result.rows.resize(spec.tau_l_grid.size());

  // (b) reads its lifetime information from decays just before tau_r0.
  const detail::Interval early_bin{std::max(0.0, spec.tau_r0 - w), spec.tau_r0};
  const detail::Interval around_r0 = detail::centered_bin(spec.tau_r0, w);
  const bool early = spec.kind == ExperimentKind::PartiallyActive;
  const double tau_r_lifetime = early ? (early_bin.width() > 0.0 ? early_bin.center() : spec.tau_r0)
                                      : spec.tau_r0;

  std::vector<detail::RowSetup> setups(spec.tau_l_grid.size());
  for (std::size_t r = 0; r < setups.size(); ++r) {
    auto& s = setups[r];
    s.tau_l = spec.tau_l_grid[r];
    s.left_bin = detail::centered_bin(s.tau_l, w);
    s.meter_bin = early ? early_bin : around_r0;
    if (n > 0 && (spec.kind == ExperimentKind::ActiveActive || early)) {
      s.cdf = detail::strangeness_cdf(s.tau_l, spec.tau_r0, params);
    }
  }

  for (std::size_t r = 0; r < setups.size(); ++r) {
    ScanRow& row = result.rows[r];
    const double tl = setups[r].tau_l;
    row.tau_l = tl;
    row.tau_r = spec.tau_r0;
    row.tau_r_lifetime = tau_r_lifetime;
    row.like_analytic = joint_strangeness(tl, spec.tau_r0, Outcome::K0, Outcome::K0, params);
    row.unlike_analytic = joint_strangeness(tl, spec.tau_r0, Outcome::K0, Outcome::K0bar, params);
    row.ks_analytic = joint_strangeness_lifetime(tl, tau_r_lifetime, Outcome::K0, Outcome::KS, params);
    row.kl_analytic = joint_strangeness_lifetime(tl, tau_r_lifetime, Outcome::K0, Outcome::KL, params);
    if (early) {
      row.early_like_analytic =
          joint_strangeness(tl, tau_r_lifetime, Outcome::K0, Outcome::K0, params);
      row.early_unlike_analytic =
          joint_strangeness(tl, tau_r_lifetime, Outcome::K0, Outcome::K0bar, params);
    }
  }
  if (n == 0) return result;

  const auto counts = detail::tally(spec, params, setups, events);
  const TransitionAmplitudes amps(params);
  const double g_sl = amps.identified_width(DecayMode::SemileptonicPlus);
  const double g_2pi = amps.identified_width(DecayMode::TwoPi);
  const double g_3pi = amps.identified_width(DecayMode::ThreePi);
  const double dn = static_cast<double>(n);
  const std::uint64_t min_ev = spec.min_events;

  // Per outcome pair the pooled class holds two outcome pairs.
  auto meter_rates = [&](const detail::RowCounts& c, double n_int, ScanRow& row, Estimate& like,
                         Estimate& unlike) {
    const std::uint64_t s_family = c.bin_like + c.bin_unlike;
    const std::uint64_t l_family = c.bin_2pi + c.bin_3pi;
    like = detail::rate_estimate(c.bin_like, n, 2.0 * dn * n_int * g_sl, s_family, min_ev);
    unlike = detail::rate_estimate(c.bin_unlike, n, 2.0 * dn * n_int * g_sl, s_family, min_ev);
    row.ks = detail::rate_estimate(c.bin_2pi, n, 2.0 * dn * n_int * g_2pi, l_family, min_ev);
    row.kl = detail::rate_estimate(c.bin_3pi, n, 2.0 * dn * n_int * g_3pi, l_family, min_ev);
  };

  for (std::size_t r = 0; r < setups.size(); ++r) {
    ScanRow& row = result.rows[r];
    const detail::RowCounts& c = counts[r];
    const double tl = setups[r].tau_l;
    switch (spec.kind) {
      case ExperimentKind::ActiveActive: {
        row.like = detail::fraction_estimate(c.survivors_like, c.survivors, 0.5, min_ev);
        row.unlike = detail::fraction_estimate(c.survivors - c.survivors_like, c.survivors, 0.5,
                                               min_ev);
        // Unfold the window misidentification: f = q (1 - e_S) + (1 - q) e_L.
        const MisidentificationRates mis = misidentification_rates(params);
        const double purity = 1.0 - mis.ks_as_kl - mis.kl_as_ks;
        const Estimate f = detail::fraction_estimate(c.survivors_window_ks, c.survivors, 1.0, min_ev);
        const double q = (f.value - mis.kl_as_ks) / purity;
        row.ks = f;
        row.ks.value = 0.5 * q;
        row.ks.sigma = 0.5 * f.sigma / purity;
        row.kl = row.ks;
        row.kl.value = 0.5 * (1.0 - q);
        row.n_strangeness = c.survivors;
        row.n_lifetime = c.survivors;
        break;
      }
      case ExperimentKind::PartiallyActive: {
        row.like = detail::fraction_estimate(c.survivors_like, c.survivors, 0.5, min_ev);
        row.unlike = detail::fraction_estimate(c.survivors - c.survivors_like, c.survivors, 0.5,
                                               min_ev);
        const double n_int =
            normalization_integral_right(tl, setups[r].meter_bin.lo, setups[r].meter_bin.hi, params);
        meter_rates(c, n_int, row, row.early_like, row.early_unlike);
        row.n_strangeness = c.survivors + c.bin_like + c.bin_unlike;
        row.n_lifetime = c.bin_2pi + c.bin_3pi;
        row.n_discarded = c.early_other;
        break;
      }
      case ExperimentKind::PassiveMeterActiveObject: {
        const double n_int =
            normalization_integral_right(tl, around_r0.lo, around_r0.hi, params);
        meter_rates(c, n_int, row, row.like, row.unlike);
        row.n_strangeness = c.bin_like + c.bin_unlike;
        row.n_lifetime = c.bin_2pi + c.bin_3pi;
        row.n_discarded = c.bin_other;
        break;
      }
      case ExperimentKind::PassivePassive: {
        PassiveBinTables b;
        b.counts = c.pair;
        const double n_int = normalization_integral(setups[r].left_bin.lo, setups[r].left_bin.hi,
                                                    around_r0.lo, around_r0.hi, params);
        const auto ss = detail::estimate_table(ObservableKind::Strangeness, tl, spec.tau_r0, b, n,
                                               n_int, amps, min_ev);
        const auto sl = detail::estimate_table(ObservableKind::Lifetime, tl, spec.tau_r0, b, n,
                                               n_int, amps, min_ev);
        std::uint64_t ss_family = 0, sl_family = 0;
        for (int i = 2; i < 4; ++i) {
          ss_family += c.pair[i][2] + c.pair[i][3];
          sl_family += c.pair[i][0] + c.pair[i][1];
        }
        row.like = detail::sum_half(detail::cell(ss, 0, 0), detail::cell(ss, 1, 1));
        row.unlike = detail::sum_half(detail::cell(ss, 0, 1), detail::cell(ss, 1, 0));
        row.ks = detail::sum_half(detail::cell(sl, 0, 0), detail::cell(sl, 1, 0));
        row.kl = detail::sum_half(detail::cell(sl, 0, 1), detail::cell(sl, 1, 1));
        row.like.family = row.unlike.family = ss_family;
        row.ks.family = row.kl.family = sl_family;
        row.n_strangeness = ss_family;
        row.n_lifetime = sl_family;
        row.n_discarded = c.pair_total - ss_family - sl_family;
        break;
      }
    }
  }
  return result;
}

// Generates spec.n_pairs events (if any) and runs the experiment on them.
inline ScanResult run_experiment(const ExperimentSpec& spec, const PhysicsParams& params) {
  validate(spec);
  if (spec.n_pairs == 0) return run_experiment(spec, params, std::span<const PairEvent>{});
  GeneratorConfig cfg;
  cfg.seed = spec.seed;
  cfg.n_pairs = spec.n_pairs;
  cfg.threads = spec.threads;
  const std::vector<PairEvent> events = generate(cfg, params);
  return run_experiment(spec, params, events);
}

}  // namespace kaon
