// Scans the object time for two meter choices at a fixed meter time and prints
// the strangeness fringes next to the flat lifetime-tagged probabilities.
//
//   delayed_choice_scan [tau_r0] [n_pairs]

#include <cstdio>
#include <cstdlib>

#include "kaon/eraser_experiments.hpp"

int main(int argc, char** argv) {
  const double tau_r0 = argc > 1 ? std::atof(argv[1]) : 1.0;
  const auto n_pairs = argc > 2 ? std::strtoull(argv[2], nullptr, 10) : 200000ULL;

  const kaon::PhysicsParams params;
  kaon::ExperimentSpec spec;
  spec.kind = kaon::ExperimentKind::ActiveActive;
  spec.tau_r0 = tau_r0;
  spec.tau_l_grid = kaon::make_grid(0.0, 12.0, 1.0);
  spec.n_pairs = n_pairs;
  spec.seed = 7;

  const kaon::ScanResult scan = kaon::run_experiment(spec, params);
  std::printf("tau_r0 = %.3f, %llu pairs, visibility at tau_l = 0: %.4f\n", tau_r0,
              static_cast<unsigned long long>(n_pairs), kaon::visibility(-tau_r0, params));
  std::printf("%6s  %-19s %-19s %-19s %-19s\n", "tau_l", "like (mc / exact)", "unlike", "K_S",
              "K_L");
  for (const kaon::ScanRow& r : scan.rows) {
    std::printf("%6.2f  %.4f / %.4f     %.4f / %.4f     %.4f / %.4f     %.4f / %.4f\n", r.tau_l,
                r.like.value, r.like_analytic, r.unlike.value, r.unlike_analytic, r.ks.value,
                r.ks_analytic, r.kl.value, r.kl_analytic);
  }
}
