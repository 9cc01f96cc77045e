#pragma once

// The antisymmetric two-kaon state produced at tau = 0 and its evolution to
// independent left and right proper times.
//
// An evolved state stays un-normalized; normalize_surviving() rescales it to
// pairs with both members still alive. The passive decay-rate route needs the
// former and the active projection route the latter.

#include <array>
#include <cmath>
#include <complex>
#include <numbers>

#include "kaon/errors.hpp"
#include "kaon/kaon_algebra.hpp"
#include "kaon/physics_params.hpp"

namespace kaon {

using Matrix2c = std::array<std::array<cplx, 2>, 2>;

struct PairAmplitude {
  Basis basis_l = Basis::Strangeness;
  Basis basis_r = Basis::Strangeness;
  // amps[i][j]: left outcome i, right outcome j, in basis_l x basis_r.
  Matrix2c amps{};
  double tau_l = 0.0;
  double tau_r = 0.0;
  bool normalized = false;

  double norm2() const noexcept {
    double s = 0.0;
    for (const auto& row : amps)
      for (const auto& a : row) s += std::norm(a);
    return s;
  }
  double delta_tau() const noexcept { return tau_l - tau_r; }
};

inline PairAmplitude to_basis(const PairAmplitude& state, Basis left, Basis right) {
  PairAmplitude out = state;
  out.basis_l = left;
  out.basis_r = right;
  const bool change_l = state.basis_l != left;
  const bool change_r = state.basis_r != right;
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      cplx acc{};
      for (int k = 0; k < 2; ++k) {
        for (int m = 0; m < 2; ++m) {
          const double wl = change_l ? basis_change(i, k) : (i == k ? 1.0 : 0.0);
          const double wr = change_r ? basis_change(j, m) : (j == m ? 1.0 : 0.0);
          acc += wl * wr * state.amps[k][m];
        }
      }
      out.amps[i][j] = acc;
    }
  }
  return out;
}

inline PairAmplitude initial_state(Basis basis) {
  constexpr double h = std::numbers::sqrt2 / 2.0;
  PairAmplitude s;
  s.basis_l = s.basis_r = Basis::Strangeness;
  s.amps = {{{0.0, h}, {-h, 0.0}}};  // |K0 K0bar> - |K0bar K0>
  return to_basis(s, basis, basis);
}

inline PairAmplitude evolve_pair(const PairAmplitude& state, double tau_l, double tau_r,
                                 const PhysicsParams& params) {
  require_nonnegative_time(tau_l, "tau_l");
  require_nonnegative_time(tau_r, "tau_r");
  if (state.normalized) {
    throw DomainError("evolve_pair expects an un-normalized state");
  }
  const cplx minus_i{0.0, -1.0};
  const std::array<cplx, 2> lam{lambda_eigenvalue(params, Eigenstate::S),
                                lambda_eigenvalue(params, Eigenstate::L)};
  PairAmplitude life = to_basis(state, Basis::Lifetime, Basis::Lifetime);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      life.amps[i][j] *= std::exp(minus_i * (lam[i] * tau_l + lam[j] * tau_r));
  life.tau_l = state.tau_l + tau_l;
  life.tau_r = state.tau_r + tau_r;
  return to_basis(life, state.basis_l, state.basis_r);
}

// Convenience: the tau = 0 state evolved to (tau_l, tau_r), un-normalized.
inline PairAmplitude evolved_state(double tau_l, double tau_r, const PhysicsParams& params,
                                   Basis basis = Basis::Lifetime) {
  return evolve_pair(initial_state(basis), tau_l, tau_r, params);
}

inline PairAmplitude normalize_surviving(const PairAmplitude& state) {
  const double n2 = state.norm2();
  if (!(n2 > 0.0) || !std::isfinite(n2)) {
    throw DegenerateStateError("cannot normalize a pair state with zero norm");
  }
  PairAmplitude out = state;
  const double scale = 1.0 / std::sqrt(n2);
  for (auto& row : out.amps)
    for (auto& a : row) a *= scale;
  out.normalized = true;
  return out;
}

// Left and right swapped, times swapped. For the antisymmetric state this is
// minus the original state.
inline PairAmplitude exchange_sides(const PairAmplitude& state) {
  PairAmplitude out = state;
  out.basis_l = state.basis_r;
  out.basis_r = state.basis_l;
  out.tau_l = state.tau_r;
  out.tau_r = state.tau_l;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) out.amps[i][j] = state.amps[j][i];
  return out;
}

// |<outcome_l, outcome_r | state>|^2 (divided by nothing).
inline double project(const PairAmplitude& state, Outcome outcome_l, Outcome outcome_r) {
  const PairAmplitude in = to_basis(state, basis_of(outcome_l), basis_of(outcome_r));
  return std::norm(in.amps[component_index(outcome_l)][component_index(outcome_r)]);
}

}  // namespace kaon
