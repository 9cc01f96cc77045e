#pragma once

// Monte Carlo generation of entangled-pair decay events.
//
// Summed over all final states the joint decay density has no interference
// term:
//   rho(tau_l, tau_r) = G_S G_L / 2 [exp(-G_L tau_l - G_S tau_r) + exp(-G_S tau_l - G_L tau_r)],
// an equal mixture of (left K_L, right K_S) and (left K_S, right K_L) product
// exponentials. Times are drawn exactly from that mixture; the mode pair is then
// drawn from the exact conditional distribution rate(f_l, f_r) / rho at the
// drawn times, which carries all of the interference.
//
// Each event uses its own counter-based random stream keyed by (seed, id), so
// the output does not depend on how ids are split across threads.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <thread>
#include <vector>

#include "kaon/decay_model.hpp"
#include "kaon/errors.hpp"
#include "kaon/physics_params.hpp"

namespace kaon {

enum class Side { Left, Right };

struct DecayEvent {
  Side side = Side::Left;
  double tau = 0.0;
  DecayMode mode = DecayMode::Other;

  friend bool operator==(const DecayEvent&, const DecayEvent&) = default;
};

struct PairEvent {
  std::uint64_t id = 0;
  DecayEvent left{Side::Left};
  DecayEvent right{Side::Right};

  friend bool operator==(const PairEvent&, const PairEvent&) = default;
};

// SplitMix64 output function applied to a per-stream counter.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream, std::uint64_t substream = 0) noexcept
      : state_(mix(mix(seed) ^ mix(stream + 0x632be59bd9b4e019ULL) ^
                   mix(substream + 0x8cb92ba72f3d8dd7ULL))) {}

  std::uint64_t next() noexcept {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix(state_);
  }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  static std::uint64_t mix(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t state_;
};

struct GeneratorConfig {
  std::uint64_t seed = 0;
  std::uint64_t n_pairs = 1;
  // Truncation horizon in tau_S. Zero selects 50 / min(gamma_s, gamma_l).
  double tau_max = 0.0;
  unsigned threads = 1;
};

inline constexpr double max_truncation_loss = 1e-12;

inline double effective_tau_max(const GeneratorConfig& config, const PhysicsParams& params) {
  if (config.tau_max > 0.0) return config.tau_max;
  return 50.0 / std::min(params.gamma_s, params.gamma_l);
}

inline void validate(const GeneratorConfig& config, const PhysicsParams& params) {
  if (config.n_pairs < 1) throw ValidationError("n_pairs >= 1 violated");
  if (!(params.gamma_s > 0.0) || !(params.gamma_l > 0.0)) {
    throw ValidationError("generator requires gamma_s > 0 and gamma_l > 0");
  }
  if (config.tau_max < 0.0 || !std::isfinite(config.tau_max)) {
    throw ValidationError("tau_max >= 0 violated");
  }
  const double horizon = effective_tau_max(config, params);
  const double loss = std::exp(-std::min(params.gamma_s, params.gamma_l) * horizon);
  if (!(loss < max_truncation_loss)) {
    throw ValidationError("tau_max too short: survival beyond horizon " +
                          std::to_string(horizon) + " is " + std::to_string(loss) +
                          ", must be below 1e-12");
  }
}

namespace detail {

// Exponential with rate gamma truncated to [0, horizon], by inversion.
inline double truncated_exponential(double u, double gamma, double horizon) {
  const double mass = -std::expm1(-gamma * horizon);
  const double t = -std::log1p(-u * mass) / gamma;
  return std::min(t, horizon);
}

}  // namespace detail

// One exact draw of (mode_l, tau_l, mode_r, tau_r).
inline PairEvent sampling_kernel(CounterRng& rng, const TransitionAmplitudes& amps,
                                 const PhysicsParams& params, double horizon) {
  PairEvent ev;
  const bool left_long = rng.uniform() < 0.5;
  const double gl = left_long ? params.gamma_l : params.gamma_s;
  const double gr = left_long ? params.gamma_s : params.gamma_l;
  ev.left.side = Side::Left;
  ev.right.side = Side::Right;
  ev.left.tau = detail::truncated_exponential(rng.uniform(), gl, horizon);
  ev.right.tau = detail::truncated_exponential(rng.uniform(), gr, horizon);

  const ModePairRates rates = mode_pair_rates(ev.left.tau, ev.right.tau, amps, params);
  double total = 0.0;
  for (const auto& row : rates)
    for (double r : row) total += r;
  const double target = rng.uniform() * total;
  double acc = 0.0;
  int pick_l = 4, pick_r = 4;
  bool picked = false;
  for (int i = 0; i < 5 && !picked; ++i) {
    for (int j = 0; j < 5; ++j) {
      if (rates[i][j] <= 0.0) continue;
      acc += rates[i][j];
      pick_l = i;
      pick_r = j;
      if (target < acc) {
        picked = true;
        break;
      }
    }
  }
  ev.left.mode = all_decay_modes[pick_l];
  ev.right.mode = all_decay_modes[pick_r];
  return ev;
}

class EventGenerator {
 public:
  EventGenerator(GeneratorConfig config, PhysicsParams params)
      : config_(config), params_(params), amps_(params_) {
    validate(config_, params_);
    horizon_ = effective_tau_max(config_, params_);
  }

  const GeneratorConfig& config() const noexcept { return config_; }
  const PhysicsParams& params() const noexcept { return params_; }
  double horizon() const noexcept { return horizon_; }

  PairEvent event(std::uint64_t id) const {
    CounterRng rng(config_.seed, id);
    PairEvent ev = sampling_kernel(rng, amps_, params_, horizon_);
    ev.id = id;
    return ev;
  }

  // Events [first, first + count) in id order.
  std::vector<PairEvent> generate_range(std::uint64_t first, std::uint64_t count) const {
    std::vector<PairEvent> out(count);
    const unsigned workers =
        static_cast<unsigned>(std::max<std::uint64_t>(1, std::min<std::uint64_t>(
                                                             std::max(config_.threads, 1u), count)));
    if (workers == 1) {
      for (std::uint64_t k = 0; k < count; ++k) out[k] = event(first + k);
      return out;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    const std::uint64_t chunk = (count + workers - 1) / workers;
    for (unsigned w = 0; w < workers; ++w) {
      const std::uint64_t begin = w * chunk;
      const std::uint64_t end = std::min(count, begin + chunk);
      pool.emplace_back([this, &out, first, begin, end] {
        for (std::uint64_t k = begin; k < end; ++k) out[k] = event(first + k);
      });
    }
    for (auto& t : pool) t.join();
    return out;
  }

  std::vector<PairEvent> generate() const { return generate_range(0, config_.n_pairs); }

  // Streams the run in id-ordered blocks without holding it all in memory.
  void for_each_block(const std::function<void(const std::vector<PairEvent>&)>& sink,
                      std::uint64_t block = 1u << 16) const {
    for (std::uint64_t first = 0; first < config_.n_pairs; first += block) {
      sink(generate_range(first, std::min(block, config_.n_pairs - first)));
    }
  }

 private:
  GeneratorConfig config_;
  PhysicsParams params_;
  TransitionAmplitudes amps_;
  double horizon_ = 0.0;
};

inline std::vector<PairEvent> generate(const GeneratorConfig& config, const PhysicsParams& params) {
  return EventGenerator(config, params).generate();
}

// Single-kaon decay time for a pure lifetime eigenstate, used to count
// lifetime misidentification.
inline double sample_eigenstate_decay_time(CounterRng& rng, Eigenstate which,
                                           const PhysicsParams& params) {
  return -std::log1p(-rng.uniform()) / params.width(which);
}

}  // namespace kaon
