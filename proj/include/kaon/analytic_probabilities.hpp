#pragma once

// Closed-form joint detection probabilities for active measurements on both
// kaons, conditional on both members surviving to their measurement times.
// dt = tau_l - tau_r and dG = gamma_l - gamma_s throughout.
//
//   V(dt)              = 1 / cosh(dG dt / 2)
//   P[like strangeness]   = (1 - V cos(dm dt)) / 4   per outcome pair
//   P[unlike strangeness] = (1 + V cos(dm dt)) / 4
//   P[K0 or K0bar, K_S]   = 1 / (2 (1 + exp(dG dt)))
//   P[K0 or K0bar, K_L]   = 1 / (2 (1 + exp(-dG dt)))
//
// The lifetime-lifetime table is not among the classic results; it follows
// from the squared moduli of the normalized lifetime-basis amplitudes:
//   P[K_L, K_S] = 1 / (1 + exp(dG dt)), P[K_S, K_L] = exp(dG dt) / (1 + exp(dG dt)).

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

#include "kaon/errors.hpp"
#include "kaon/kaon_algebra.hpp"
#include "kaon/physics_params.hpp"

namespace kaon {

using ObservableKind = Basis;

enum class Source { Analytic, MonteCarlo };

inline const char* to_string(Source s) noexcept {
  return s == Source::Analytic ? "analytic" : "monte_carlo";
}

struct JointProbabilityTable {
  ObservableKind kind_l = ObservableKind::Strangeness;
  ObservableKind kind_r = ObservableKind::Strangeness;
  double tau_l = 0.0;
  double tau_r = 0.0;
  // p[i][j]: left outcome outcome_of(kind_l, i), right outcome outcome_of(kind_r, j).
  std::array<std::array<double, 2>, 2> p{};
  std::array<std::array<double, 2>, 2> sigma{};
  Source source = Source::Analytic;
  bool low_statistics = false;

  double at(Outcome l, Outcome r) const {
    if (basis_of(l) != kind_l || basis_of(r) != kind_r) {
      throw std::invalid_argument("outcome does not match table kinds");
    }
    return p[component_index(l)][component_index(r)];
  }
  double sum() const noexcept { return p[0][0] + p[0][1] + p[1][0] + p[1][1]; }
};

namespace detail {

// 1 / (1 + exp(x)) without overflow.
inline double logistic_complement(double x) {
  if (x > 0.0) {
    const double e = std::exp(-x);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(x));
}

inline void require_kind(Outcome o, Basis b, const char* which) {
  if (basis_of(o) != b) {
    throw std::invalid_argument(std::string(which) + " outcome must be a " + to_string(b) +
                                " outcome, got " + to_string(o));
  }
}

}  // namespace detail

inline double visibility(double delta_tau, const PhysicsParams& params) {
  const double x = 0.5 * params.delta_gamma() * delta_tau;
  // 1/cosh overflows to 0 gracefully.
  return 1.0 / std::cosh(x);
}

inline double joint_strangeness(double tau_l, double tau_r, Outcome outcome_l,
                                Outcome outcome_r, const PhysicsParams& params) {
  require_nonnegative_time(tau_l, "tau_l");
  require_nonnegative_time(tau_r, "tau_r");
  detail::require_kind(outcome_l, Basis::Strangeness, "left");
  detail::require_kind(outcome_r, Basis::Strangeness, "right");
  const double dt = tau_l - tau_r;
  const double term = visibility(dt, params) * std::cos(params.delta_m * dt);
  return outcome_l == outcome_r ? 0.25 * (1.0 - term) : 0.25 * (1.0 + term);
}

// Strangeness on the left, lifetime identified on the right at tau_r.
inline double joint_strangeness_lifetime(double tau_l, double tau_r, Outcome outcome_l,
                                         Outcome outcome_r, const PhysicsParams& params) {
  require_nonnegative_time(tau_l, "tau_l");
  require_nonnegative_time(tau_r, "tau_r");
  detail::require_kind(outcome_l, Basis::Strangeness, "left");
  detail::require_kind(outcome_r, Basis::Lifetime, "right");
  const double x = params.delta_gamma() * (tau_l - tau_r);
  return outcome_r == Outcome::KS ? 0.5 * detail::logistic_complement(x)
                                  : 0.5 * detail::logistic_complement(-x);
}

// Mirror image: lifetime on the left, strangeness on the right.
inline double joint_lifetime_strangeness(double tau_l, double tau_r, Outcome outcome_l,
                                         Outcome outcome_r, const PhysicsParams& params) {
  return joint_strangeness_lifetime(tau_r, tau_l, outcome_r, outcome_l, params);
}

inline double joint_lifetime(double tau_l, double tau_r, Outcome outcome_l, Outcome outcome_r,
                             const PhysicsParams& params) {
  require_nonnegative_time(tau_l, "tau_l");
  require_nonnegative_time(tau_r, "tau_r");
  detail::require_kind(outcome_l, Basis::Lifetime, "left");
  detail::require_kind(outcome_r, Basis::Lifetime, "right");
  if (outcome_l == outcome_r) return 0.0;
  const double x = params.delta_gamma() * (tau_l - tau_r);
  return outcome_l == Outcome::KL ? detail::logistic_complement(x)
                                  : detail::logistic_complement(-x);
}

inline double joint_probability(double tau_l, double tau_r, Outcome outcome_l,
                                Outcome outcome_r, const PhysicsParams& params) {
  const Basis bl = basis_of(outcome_l);
  const Basis br = basis_of(outcome_r);
  if (bl == Basis::Strangeness && br == Basis::Strangeness)
    return joint_strangeness(tau_l, tau_r, outcome_l, outcome_r, params);
  if (bl == Basis::Strangeness)
    return joint_strangeness_lifetime(tau_l, tau_r, outcome_l, outcome_r, params);
  if (br == Basis::Strangeness)
    return joint_lifetime_strangeness(tau_l, tau_r, outcome_l, outcome_r, params);
  return joint_lifetime(tau_l, tau_r, outcome_l, outcome_r, params);
}

inline JointProbabilityTable full_table(ObservableKind kind_l, ObservableKind kind_r,
                                        double tau_l, double tau_r,
                                        const PhysicsParams& params) {
  JointProbabilityTable t;
  t.kind_l = kind_l;
  t.kind_r = kind_r;
  t.tau_l = tau_l;
  t.tau_r = tau_r;
  t.source = Source::Analytic;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      t.p[i][j] =
          joint_probability(tau_l, tau_r, outcome_of(kind_l, i), outcome_of(kind_r, j), params);
  return t;
}

}  // namespace kaon
