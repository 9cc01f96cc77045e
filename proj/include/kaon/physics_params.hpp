#pragma once

// Physical constants for the neutral kaon system.
//
// Units: proper times in tau_S, widths and masses in 1/tau_S (hbar = 1).
// Phase convention: m_S = 0, m_L = delta_m, so lambda_S = -i gamma_s / 2 and
// lambda_L = delta_m - i gamma_l / 2.
//
// CP is conserved and the Delta S = Delta Q rule holds exactly. Together they
// force the semileptonic partial widths of K_S and K_L to coincide:
//   gamma_s * br_semileptonic_s == gamma_l * br_semileptonic_l.
// Every channel not listed explicitly ends up in a residual "other" channel.

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "kaon/errors.hpp"

namespace kaon {

enum class Eigenstate { S, L };

namespace defaults {
inline constexpr double width_ratio = 579.0;  // gamma_s / gamma_l
inline constexpr double gamma_s = 1.0;
inline constexpr double gamma_l = gamma_s / width_ratio;
inline constexpr double delta_m = 0.47;
// K_L -> pi l nu, both lepton flavours and charges (Ke3 + Kmu3).
inline constexpr double br_semileptonic_l = 0.6759;
// K_L -> 3 pi0 and pi+ pi- pi0.
inline constexpr double br_l_3pi = 0.3206;
inline constexpr double br_semileptonic_s = gamma_l * br_semileptonic_l / gamma_s;
inline constexpr double br_s_2pi = 1.0 - br_semileptonic_s;
inline constexpr double lifetime_window = 4.8;
}  // namespace defaults

struct PhysicsParams {
  double gamma_s = defaults::gamma_s;
  double gamma_l = defaults::gamma_l;
  double delta_m = defaults::delta_m;
  double br_s_2pi = defaults::br_s_2pi;
  double br_l_3pi = defaults::br_l_3pi;
  double br_semileptonic_s = defaults::br_semileptonic_s;
  double br_semileptonic_l = defaults::br_semileptonic_l;
  double lifetime_window = defaults::lifetime_window;

  double delta_gamma() const noexcept { return gamma_l - gamma_s; }
  double mean_gamma() const noexcept { return 0.5 * (gamma_s + gamma_l); }
  double width(Eigenstate which) const noexcept {
    return which == Eigenstate::S ? gamma_s : gamma_l;
  }
  double br_other_s() const noexcept { return 1.0 - br_s_2pi - br_semileptonic_s; }
  double br_other_l() const noexcept { return 1.0 - br_l_3pi - br_semileptonic_l; }

  // Width of K0 -> pi- l+ nu (equivalently K0bar -> pi+ l- nubar).
  double semileptonic_width() const noexcept { return gamma_s * br_semileptonic_s; }

  friend bool operator==(const PhysicsParams&, const PhysicsParams&) = default;
};

inline std::complex<double> lambda_eigenvalue(const PhysicsParams& p, Eigenstate which) {
  if (which == Eigenstate::S) return {0.0, -0.5 * p.gamma_s};
  return {p.delta_m, -0.5 * p.gamma_l};
}

namespace detail {

inline void check(bool ok, const std::string& constraint) {
  if (!ok) throw ValidationError(constraint + " violated");
}

inline bool is_fraction(double x) { return x >= 0.0 && x <= 1.0; }

}  // namespace detail

// Throws ValidationError naming the first failed constraint.
inline void validate(const PhysicsParams& p) {
  using detail::check;
  constexpr double sum_tol = 1e-12;
  check(std::isfinite(p.gamma_s) && std::isfinite(p.gamma_l), "finite widths");
  check(p.gamma_s > p.gamma_l, "gamma_s > gamma_l");
  check(p.gamma_l > 0.0, "gamma_l > 0");
  check(std::isfinite(p.delta_m) && p.delta_m >= 0.0, "delta_m >= 0");
  check(std::isfinite(p.lifetime_window) && p.lifetime_window > 0.0, "lifetime_window > 0");
  check(detail::is_fraction(p.br_s_2pi), "0 <= br_s_2pi <= 1");
  check(detail::is_fraction(p.br_l_3pi), "0 <= br_l_3pi <= 1");
  check(detail::is_fraction(p.br_semileptonic_s), "0 <= br_semileptonic_s <= 1");
  check(detail::is_fraction(p.br_semileptonic_l), "0 <= br_semileptonic_l <= 1");
  check(p.br_other_s() >= -sum_tol, "br_s_2pi + br_semileptonic_s <= 1");
  check(p.br_other_l() >= -sum_tol, "br_l_3pi + br_semileptonic_l <= 1");
  const double ws = p.gamma_s * p.br_semileptonic_s;
  const double wl = p.gamma_l * p.br_semileptonic_l;
  check(std::abs(ws - wl) <= 1e-9 * std::max({ws, wl, 1e-300}),
        "gamma_s * br_semileptonic_s == gamma_l * br_semileptonic_l");
}

inline nlohmann::ordered_json to_json(const PhysicsParams& p) {
  nlohmann::ordered_json j;
  j["gamma_s"] = p.gamma_s;
  j["gamma_l"] = p.gamma_l;
  j["delta_m"] = p.delta_m;
  j["br_s_2pi"] = p.br_s_2pi;
  j["br_l_3pi"] = p.br_l_3pi;
  j["br_semileptonic_s"] = p.br_semileptonic_s;
  j["br_semileptonic_l"] = p.br_semileptonic_l;
  j["lifetime_window"] = p.lifetime_window;
  return j;
}

// Parses a flat JSON object whose keys are the PhysicsParams field names.
// Missing keys take their defaults, except that br_semileptonic_s defaults to
// the value implied by the semileptonic width equality and br_s_2pi to the
// remainder 1 - br_semileptonic_s. Unknown keys are an error.
inline PhysicsParams load_params(std::string_view document) {
  nlohmann::json j = nlohmann::json::object();
  const bool blank = document.find_first_not_of(" \t\r\n") == std::string_view::npos;
  if (!blank) try {
    j = nlohmann::json::parse(document.begin(), document.end(), nullptr, true, true);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("params: ") + e.what());
  }
  if (!j.is_object()) throw ParseError("params: document must be a JSON object");

  PhysicsParams p;
  bool have_sl_s = false;
  bool have_2pi = false;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& key = it.key();
    if (!it->is_number()) throw ParseError("params: key '" + key + "' must be a number");
    const double v = it->get<double>();
    if (key == "gamma_s") p.gamma_s = v;
    else if (key == "gamma_l") p.gamma_l = v;
    else if (key == "delta_m") p.delta_m = v;
    else if (key == "br_s_2pi") { p.br_s_2pi = v; have_2pi = true; }
    else if (key == "br_l_3pi") p.br_l_3pi = v;
    else if (key == "br_semileptonic_s") { p.br_semileptonic_s = v; have_sl_s = true; }
    else if (key == "br_semileptonic_l") p.br_semileptonic_l = v;
    else if (key == "lifetime_window") p.lifetime_window = v;
    else throw ParseError("params: unknown key '" + key + "'");
  }
  if (!have_sl_s && p.gamma_s > 0.0) {
    p.br_semileptonic_s = p.gamma_l * p.br_semileptonic_l / p.gamma_s;
  }
  if (!have_2pi) p.br_s_2pi = 1.0 - p.br_semileptonic_s;
  validate(p);
  return p;
}

inline PhysicsParams load_params_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::ios_base::failure("cannot open params file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return load_params(ss.str());
}

}  // namespace kaon
