#pragma once

// Passive measurements: identifying decay modes, their transition amplitudes,
// the joint decay rate of an entangled pair, and the conversion of rates into
// joint probabilities
//
//   P[K_fl(tau_l), K_fr(tau_r)] =
//       Rate(f_l, tau_l; f_r, tau_r) / (N(tau_l, tau_r) Width(K_fl -> f_l) Width(K_fr -> f_r)).
//
// The joint rate contracts the un-normalized lifetime-basis pair amplitudes
// with one transition amplitude per side:
//   Rate = | sum_ij A_ij(tau_l, tau_r) a(f_l, i) a(f_r, j) |^2.
//
// Amplitudes are real. a(2pi, K_L) = a(3pi, K_S) = 0 (CP conserved); the
// semileptonic amplitudes carry the Delta S = Delta Q sign pattern
//   a(pi- l+ nu, K_S) =  a(pi- l+ nu, K_L)
//   a(pi+ l- nu, K_S) = -a(pi+ l- nu, K_L)
// so that K0 only feeds pi- l+ nu and K0bar only pi+ l- nubar. The residual
// "Other" mode is modelled as two distinct final states, one reachable from
// K_S and one from K_L, which never interfere.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <initializer_list>
#include <optional>
#include <span>
#include <string>

#include "kaon/entangled_pair.hpp"
#include "kaon/errors.hpp"
#include "kaon/kaon_algebra.hpp"
#include "kaon/physics_params.hpp"

namespace kaon {

enum class DecayMode { TwoPi, ThreePi, SemileptonicPlus, SemileptonicMinus, Other };

inline constexpr std::array<DecayMode, 5> all_decay_modes{
    DecayMode::TwoPi, DecayMode::ThreePi, DecayMode::SemileptonicPlus,
    DecayMode::SemileptonicMinus, DecayMode::Other};

inline constexpr std::array<DecayMode, 4> identifying_modes{
    DecayMode::TwoPi, DecayMode::ThreePi, DecayMode::SemileptonicPlus,
    DecayMode::SemileptonicMinus};

inline const char* to_string(DecayMode m) noexcept {
  switch (m) {
    case DecayMode::TwoPi: return "TwoPi";
    case DecayMode::ThreePi: return "ThreePi";
    case DecayMode::SemileptonicPlus: return "SemileptonicPlus";
    case DecayMode::SemileptonicMinus: return "SemileptonicMinus";
    case DecayMode::Other: return "Other";
  }
  return "?";
}

inline std::optional<DecayMode> decay_mode_from_string(std::string_view s) {
  for (DecayMode m : all_decay_modes)
    if (s == to_string(m)) return m;
  return std::nullopt;
}

inline int index_of(DecayMode m) noexcept { return static_cast<int>(m); }

// TwoPi => K_S, ThreePi => K_L, pi- l+ nu => K0, pi+ l- nubar => K0bar.
inline std::optional<Outcome> identified_state(DecayMode m) noexcept {
  switch (m) {
    case DecayMode::TwoPi: return Outcome::KS;
    case DecayMode::ThreePi: return Outcome::KL;
    case DecayMode::SemileptonicPlus: return Outcome::K0;
    case DecayMode::SemileptonicMinus: return Outcome::K0bar;
    case DecayMode::Other: return std::nullopt;
  }
  return std::nullopt;
}

inline bool is_semileptonic(DecayMode m) noexcept {
  return m == DecayMode::SemileptonicPlus || m == DecayMode::SemileptonicMinus;
}

inline bool is_nonleptonic(DecayMode m) noexcept {
  return m == DecayMode::TwoPi || m == DecayMode::ThreePi;
}

// One final state: its transition amplitudes from K_S and K_L.
struct Channel {
  double from_s = 0.0;
  double from_l = 0.0;
  double operator[](int i) const noexcept { return i == 0 ? from_s : from_l; }
};

class TransitionAmplitudes {
 public:
  explicit TransitionAmplitudes(const PhysicsParams& p) {
    auto root = [](double w) { return std::sqrt(std::max(w, 0.0)); };
    const double sl_s = root(0.5 * p.gamma_s * p.br_semileptonic_s);
    const double sl_l = root(0.5 * p.gamma_l * p.br_semileptonic_l);
    set(DecayMode::TwoPi, {{root(p.gamma_s * p.br_s_2pi), 0.0}});
    set(DecayMode::ThreePi, {{0.0, root(p.gamma_l * p.br_l_3pi)}});
    set(DecayMode::SemileptonicPlus, {{sl_s, sl_l}});
    set(DecayMode::SemileptonicMinus, {{sl_s, -sl_l}});
    set(DecayMode::Other,
        {{root(p.gamma_s * p.br_other_s()), 0.0}, {0.0, root(p.gamma_l * p.br_other_l())}});
  }

  // a(mode, eigenstate) for the identifying modes.
  double amplitude(DecayMode mode, Eigenstate which) const {
    if (mode == DecayMode::Other) {
      throw UnsupportedModeError("Other has no single transition amplitude");
    }
    const Channel& c = channels(mode)[0];
    return which == Eigenstate::S ? c.from_s : c.from_l;
  }

  std::span<const Channel> channels(DecayMode mode) const noexcept {
    const auto& e = entries_[index_of(mode)];
    return {e.channels.data(), e.count};
  }

  // Width(K_f -> f) for the state K_f identified by the mode.
  double identified_width(DecayMode mode) const {
    const auto state = identified_state(mode);
    if (!state) throw UnsupportedModeError("mode Other identifies no kaon state");
    const KaonAmplitude k = to_basis(states::of(*state), Basis::Lifetime);
    const Channel& c = channels(mode)[0];
    return std::norm(k.c1 * c.from_s + k.c2 * c.from_l);
  }

 private:
  struct Entry {
    std::array<Channel, 2> channels{};
    std::size_t count = 0;
  };
  void set(DecayMode m, std::initializer_list<Channel> cs) {
    Entry& e = entries_[index_of(m)];
    e.count = 0;
    for (const Channel& c : cs) e.channels[e.count++] = c;
  }
  std::array<Entry, 5> entries_{};
};

inline double partial_width(DecayMode mode, const PhysicsParams& params) {
  return TransitionAmplitudes(params).identified_width(mode);
}

// N(tau_l, tau_r) = exp(-(G_L + G_S)(tau_l + tau_r)/2) cosh((G_L - G_S)(tau_l - tau_r)/2)
inline double normalization_factor(double tau_l, double tau_r, const PhysicsParams& params) {
  require_nonnegative_time(tau_l, "tau_l");
  require_nonnegative_time(tau_r, "tau_r");
  return std::exp(-params.mean_gamma() * (tau_l + tau_r)) *
         std::cosh(0.5 * params.delta_gamma() * (tau_l - tau_r));
}

namespace detail {

// Integral of exp(-gamma t) over [a, b].
inline double exp_integral(double gamma, double a, double b) {
  if (b <= a) return 0.0;
  if (gamma == 0.0) return b - a;
  return std::exp(-gamma * a) * -std::expm1(-gamma * (b - a)) / gamma;
}

// Contracts the left transition amplitudes into the pair tensor.
inline std::array<cplx, 2> contract_left(const Matrix2c& a, const Channel& left) {
  return {a[0][0] * left.from_s + a[1][0] * left.from_l,
          a[0][1] * left.from_s + a[1][1] * left.from_l};
}

inline double rate_for(const Matrix2c& a, std::span<const Channel> left,
                       std::span<const Channel> right) {
  double total = 0.0;
  for (const Channel& cl : left) {
    const auto v = contract_left(a, cl);
    for (const Channel& cr : right) total += std::norm(v[0] * cr.from_s + v[1] * cr.from_l);
  }
  return total;
}

}  // namespace detail

// Integral of N over [l0, l1] x [r0, r1]. N is a sum of two product
// exponentials, so the integral factorizes term by term.
inline double normalization_integral(double l0, double l1, double r0, double r1,
                                     const PhysicsParams& p) {
  using detail::exp_integral;
  return 0.5 * (exp_integral(p.gamma_s, l0, l1) * exp_integral(p.gamma_l, r0, r1) +
                exp_integral(p.gamma_l, l0, l1) * exp_integral(p.gamma_s, r0, r1));
}

// Integral of N(tau_l, t) over t in [r0, r1] at fixed tau_l.
inline double normalization_integral_right(double tau_l, double r0, double r1,
                                           const PhysicsParams& p) {
  using detail::exp_integral;
  return 0.5 * (std::exp(-p.gamma_s * tau_l) * exp_integral(p.gamma_l, r0, r1) +
                std::exp(-p.gamma_l * tau_l) * exp_integral(p.gamma_s, r0, r1));
}

// Rates summed over every final state of the two modes; accepts Other.
inline double joint_decay_rate_all_channels(DecayMode mode_l, double tau_l, DecayMode mode_r,
                                            double tau_r, const TransitionAmplitudes& amps,
                                            const PhysicsParams& params) {
  const PairAmplitude s = evolved_state(tau_l, tau_r, params, Basis::Lifetime);
  return detail::rate_for(s.amps, amps.channels(mode_l), amps.channels(mode_r));
}

// Density in 1/tau_S^2 per initial pair.
inline double joint_decay_rate(DecayMode mode_l, double tau_l, DecayMode mode_r, double tau_r,
                               const PhysicsParams& params) {
  if (mode_l == DecayMode::Other || mode_r == DecayMode::Other) {
    throw UnsupportedModeError("joint_decay_rate: mode Other is not an identifying mode");
  }
  require_nonnegative_time(tau_l, "tau_l");
  require_nonnegative_time(tau_r, "tau_r");
  return joint_decay_rate_all_channels(mode_l, tau_l, mode_r, tau_r,
                                       TransitionAmplitudes(params), params);
}

// All 25 mode-pair rates at one point, sharing the pair amplitudes.
using ModePairRates = std::array<std::array<double, 5>, 5>;

inline ModePairRates mode_pair_rates(double tau_l, double tau_r, const TransitionAmplitudes& amps,
                                     const PhysicsParams& params) {
  const PairAmplitude s = evolved_state(tau_l, tau_r, params, Basis::Lifetime);
  ModePairRates out{};
  for (DecayMode ml : all_decay_modes)
    for (DecayMode mr : all_decay_modes)
      out[index_of(ml)][index_of(mr)] =
          detail::rate_for(s.amps, amps.channels(ml), amps.channels(mr));
  return out;
}

// Sum over all modes: no K_S-K_L interference survives because the decay
// channels summed over are complete and CP conserving.
inline double total_decay_density(double tau_l, double tau_r, const PhysicsParams& p) {
  return 0.5 * p.gamma_s * p.gamma_l *
         (std::exp(-p.gamma_l * tau_l - p.gamma_s * tau_r) +
          std::exp(-p.gamma_s * tau_l - p.gamma_l * tau_r));
}

inline double passive_probability(DecayMode mode_l, double tau_l, DecayMode mode_r,
                                  double tau_r, const PhysicsParams& params) {
  if (mode_l == DecayMode::Other || mode_r == DecayMode::Other) {
    throw UnsupportedModeError("passive_probability: mode Other identifies no kaon state");
  }
  const TransitionAmplitudes amps(params);
  const double wl = amps.identified_width(mode_l);
  const double wr = amps.identified_width(mode_r);
  if (!(wl > 0.0) || !(wr > 0.0)) {
    throw ConfigurationError(std::string("passive_probability: zero partial width for ") +
                             (wl > 0.0 ? to_string(mode_r) : to_string(mode_l)));
  }
  const double rate = joint_decay_rate(mode_l, tau_l, mode_r, tau_r, params);
  return rate / (normalization_factor(tau_l, tau_r, params) * wl * wr);
}

// Born probabilities {K0, K0bar} for an active strangeness measurement of the
// left kaon at tau_l, given that the right kaon decayed freely at t_r into
// mode. Other sums incoherently over its channels.
inline std::array<double, 2> left_strangeness_given_right_decay(
    double tau_l, double t_r, DecayMode mode, const TransitionAmplitudes& amps,
    const PhysicsParams& params) {
  const PairAmplitude s = evolved_state(tau_l, t_r, params, Basis::Lifetime);
  std::array<double, 2> prob{0.0, 0.0};
  for (const Channel& c : amps.channels(mode)) {
    const cplx cs = s.amps[0][0] * c.from_s + s.amps[0][1] * c.from_l;
    const cplx cl = s.amps[1][0] * c.from_s + s.amps[1][1] * c.from_l;
    const KaonAmplitude strange = to_basis(KaonAmplitude{Basis::Lifetime, cs, cl},
                                           Basis::Strangeness);
    prob[0] += std::norm(strange.c1);
    prob[1] += std::norm(strange.c2);
  }
  const double total = prob[0] + prob[1];
  if (!(total > 0.0)) {
    throw DegenerateStateError("left kaon has no surviving amplitude for this right decay");
  }
  return {prob[0] / total, prob[1] / total};
}

}  // namespace kaon
