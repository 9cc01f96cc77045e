#pragma once

// Single-kaon states in the strangeness {K0, K0bar} and lifetime {K_S, K_L}
// bases, and their free-space evolution.
//
// Basis convention (CP conserved):
//   |K0>    = (|K_S> + |K_L>) / sqrt(2)
//   |K0bar> = (|K_S> - |K_L>) / sqrt(2)
// The change of basis is the real symmetric Hadamard matrix, which is its own
// inverse. With this choice the antisymmetric pair state reads
//   (|K0 K0bar> - |K0bar K0>) / sqrt(2) = (|K_L K_S> - |K_S K_L>) / sqrt(2).

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>

#include "kaon/errors.hpp"
#include "kaon/physics_params.hpp"

namespace kaon {

using cplx = std::complex<double>;

enum class Basis { Strangeness, Lifetime };

enum class Outcome { K0, K0bar, KS, KL };

inline Basis basis_of(Outcome o) noexcept {
  return (o == Outcome::K0 || o == Outcome::K0bar) ? Basis::Strangeness : Basis::Lifetime;
}

// Index of the outcome within its own basis: K0, KS -> 0; K0bar, KL -> 1.
inline int component_index(Outcome o) noexcept {
  return (o == Outcome::K0 || o == Outcome::KS) ? 0 : 1;
}

inline Outcome outcome_of(Basis b, int index) noexcept {
  if (b == Basis::Strangeness) return index == 0 ? Outcome::K0 : Outcome::K0bar;
  return index == 0 ? Outcome::KS : Outcome::KL;
}

inline const char* to_string(Outcome o) noexcept {
  switch (o) {
    case Outcome::K0: return "K0";
    case Outcome::K0bar: return "K0bar";
    case Outcome::KS: return "KS";
    case Outcome::KL: return "KL";
  }
  return "?";
}

inline const char* to_string(Basis b) noexcept {
  return b == Basis::Strangeness ? "strangeness" : "lifetime";
}

// Entry (row, column) of the basis-change matrix; same in both directions.
inline double basis_change(int row, int column) noexcept {
  constexpr double h = std::numbers::sqrt2 / 2.0;
  return (row == 1 && column == 1) ? -h : h;
}

// (c1, c2) = (<K0|psi>, <K0bar|psi>) in the strangeness basis and
// (<K_S|psi>, <K_L|psi>) in the lifetime basis.
struct KaonAmplitude {
  Basis basis = Basis::Strangeness;
  cplx c1{1.0, 0.0};
  cplx c2{0.0, 0.0};

  double norm2() const noexcept { return std::norm(c1) + std::norm(c2); }
  cplx operator[](int i) const noexcept { return i == 0 ? c1 : c2; }
};

namespace states {
inline KaonAmplitude k0() { return {Basis::Strangeness, 1.0, 0.0}; }
inline KaonAmplitude k0bar() { return {Basis::Strangeness, 0.0, 1.0}; }
inline KaonAmplitude ks() { return {Basis::Lifetime, 1.0, 0.0}; }
inline KaonAmplitude kl() { return {Basis::Lifetime, 0.0, 1.0}; }
inline KaonAmplitude of(Outcome o) {
  switch (o) {
    case Outcome::K0: return k0();
    case Outcome::K0bar: return k0bar();
    case Outcome::KS: return ks();
    case Outcome::KL: return kl();
  }
  return k0();
}
}  // namespace states

inline KaonAmplitude to_basis(const KaonAmplitude& state, Basis target) {
  if (state.basis == target) return state;
  return {target,
          basis_change(0, 0) * state.c1 + basis_change(0, 1) * state.c2,
          basis_change(1, 0) * state.c1 + basis_change(1, 1) * state.c2};
}

// Free propagation over proper time tau: K_S and K_L pick up exp(-i lambda tau).
inline KaonAmplitude evolve(const KaonAmplitude& state, double tau, const PhysicsParams& params) {
  require_nonnegative_time(tau, "tau");
  const cplx minus_i{0.0, -1.0};
  KaonAmplitude life = to_basis(state, Basis::Lifetime);
  life.c1 *= std::exp(minus_i * lambda_eigenvalue(params, Eigenstate::S) * tau);
  life.c2 *= std::exp(minus_i * lambda_eigenvalue(params, Eigenstate::L) * tau);
  return to_basis(life, state.basis);
}

// |<outcome|psi>|^2, not divided by the survival norm.
inline double project(const KaonAmplitude& state, Outcome outcome) {
  const KaonAmplitude in = to_basis(state, basis_of(outcome));
  return std::norm(in[component_index(outcome)]);
}

}  // namespace kaon
