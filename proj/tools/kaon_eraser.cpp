// kaon-eraser: analytic tables, event generation and eraser experiment scans.
//
// Exit codes: 0 success, 2 usage or validation, 3 I/O, 4 data format.

#include <CLI11.hpp>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "kaon/analytic_probabilities.hpp"
#include "kaon/eraser_experiments.hpp"
#include "kaon/event_generator.hpp"
#include "kaon/io.hpp"
#include "kaon/physics_params.hpp"

namespace {

constexpr int exit_ok = 0;
constexpr int exit_usage = 2;
constexpr int exit_io = 3;
constexpr int exit_format = 4;

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

kaon::PhysicsParams read_params(const std::string& path) {
  if (path.empty()) return kaon::PhysicsParams{};
  std::ifstream in(path);
  if (!in) throw IoError("cannot read params file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return kaon::load_params(ss.str());
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path + "'");
  return out;
}

void write_manifest(const kaon::RunManifest& m, const std::string& path) {
  const std::string text = kaon::to_json(m).dump(2) + "\n";
  if (path.empty()) {
    std::cerr << text;
    return;
  }
  std::ofstream out = open_output(path);
  out << text;
  if (!out) throw IoError("write failed for '" + path + "'");
}

kaon::Basis parse_kind(const std::string& s) {
  return s == "strangeness" ? kaon::Basis::Strangeness : kaon::Basis::Lifetime;
}

std::vector<double> parse_grid(const std::string& text) {
  const auto parts = kaon::detail::split(text, ':');
  double v[3];
  if (parts.size() != 3) throw kaon::ValidationError("--grid expects start:stop:step");
  for (int i = 0; i < 3; ++i) {
    if (!kaon::detail::parse_number(parts[i], v[i])) {
      throw kaon::ValidationError("--grid: cannot parse '" + std::string(parts[i]) + "'");
    }
  }
  if (v[0] < 0.0) throw kaon::ValidationError("--grid: start must be non-negative");
  return kaon::make_grid(v[0], v[1], v[2]);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neutral kaon quantum-eraser simulator"};
  app.require_subcommand(1);

  std::string params_path;
  unsigned threads = 1;

  // table
  auto* table = app.add_subcommand("table", "Print an analytic joint probability table as JSON");
  std::string left_kind, right_kind;
  double tau_l = 0.0, tau_r = 0.0;
  const std::vector<std::string> kinds{"strangeness", "lifetime"};
  table->add_option("--left", left_kind, "Left observable")->required()->check(CLI::IsMember(kinds));
  table->add_option("--right", right_kind, "Right observable")->required()->check(CLI::IsMember(kinds));
  table->add_option("--tau-l", tau_l, "Left proper time (tau_S)")->required()->check(CLI::NonNegativeNumber);
  table->add_option("--tau-r", tau_r, "Right proper time (tau_S)")->required()->check(CLI::NonNegativeNumber);
  table->add_option("--params", params_path, "Params JSON file");

  // generate
  auto* gen = app.add_subcommand("generate", "Generate pair decay events");
  kaon::GeneratorConfig gcfg;
  std::string out_path;
  gen->add_option("--pairs", gcfg.n_pairs, "Number of pairs")->required()->check(CLI::PositiveNumber);
  gen->add_option("--seed", gcfg.seed, "64-bit seed");
  gen->add_option("--tau-max", gcfg.tau_max, "Truncation horizon (0 = automatic)")
      ->check(CLI::NonNegativeNumber);
  gen->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
  gen->add_option("--out", out_path, "Event file")->required();
  gen->add_option("--params", params_path, "Params JSON file");

  // experiment
  auto* exp = app.add_subcommand("experiment", "Run eraser experiment a, b, c or d");
  std::string kind_letter;
  std::optional<double> tau_r0;
  std::string grid_text = "0:26.8:0.2";
  kaon::ExperimentSpec spec;
  std::string events_in;
  std::string scan_out;
  exp->add_option("kind", kind_letter, "Experiment kind")->required()->check(
      CLI::IsMember({"a", "b", "c", "d"}));
  exp->add_option("--tau-r0", tau_r0, "Fixed meter time (tau_S); mandatory for b")
      ->check(CLI::NonNegativeNumber);
  exp->add_option("--grid", grid_text, "Object scan grid start:stop:step");
  exp->add_option("--pairs", spec.n_pairs, "Monte Carlo pairs (0 = analytic only)");
  exp->add_option("--seed", spec.seed, "64-bit seed");
  exp->add_option("--bin-width", spec.bin_width, "Decay-time bin width (tau_S)")
      ->check(CLI::PositiveNumber);
  exp->add_option("--min-events", spec.min_events, "Family count below which a row is flagged");
  exp->add_option("--events-in", events_in, "Reuse a generated event file");
  exp->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
  exp->add_option("--out", scan_out, "CSV output (default stdout)");
  exp->add_option("--params", params_path, "Params JSON file");

  // verify
  auto* verify = app.add_subcommand("verify", "Check a run manifest's params digest");
  std::string manifest_path;
  verify->add_option("manifest", manifest_path, "Manifest JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return exit_usage;
  }

  try {
    if (*table) {
      const kaon::PhysicsParams params = read_params(params_path);
      const auto t = kaon::full_table(parse_kind(left_kind), parse_kind(right_kind), tau_l, tau_r,
                                      params);
      std::cout << kaon::to_json(t).dump(2) << "\n";
      return exit_ok;
    }

    if (*gen) {
      const kaon::PhysicsParams params = read_params(params_path);
      gcfg.threads = threads;
      kaon::RunManifest m;
      m.command = "generate";
      m.started = kaon::utc_timestamp();
      m.params = params;
      m.seed = gcfg.seed;
      const kaon::EventGenerator generator(gcfg, params);
      std::ofstream out = open_output(out_path);
      kaon::write_event_header(out, {gcfg.seed, gcfg.n_pairs, kaon::params_digest(params)});
      generator.for_each_block([&](const std::vector<kaon::PairEvent>& block) {
        for (const auto& ev : block) kaon::write_event(out, ev);
      });
      out.close();
      if (!out) throw IoError("write failed for '" + out_path + "'");
      m.spec = {{"n_pairs", gcfg.n_pairs}, {"tau_max", generator.horizon()}, {"threads", threads}};
      m.outputs = {out_path};
      m.finished = kaon::utc_timestamp();
      write_manifest(m, out_path + ".manifest.json");
      return exit_ok;
    }

    if (*exp) {
      const kaon::PhysicsParams params = read_params(params_path);
      spec.kind = *kaon::experiment_from_letter(kind_letter);
      if (spec.kind == kaon::ExperimentKind::PartiallyActive && !tau_r0) {
        std::cerr << "experiment b: --tau-r0 is mandatory\n";
        return exit_usage;
      }
      spec.tau_r0 = tau_r0.value_or(0.0);
      spec.tau_l_grid = parse_grid(grid_text);
      spec.threads = threads;

      kaon::RunManifest m;
      m.command = std::string("experiment ") + kind_letter;
      m.started = kaon::utc_timestamp();
      m.params = params;

      kaon::ScanResult result;
      if (!events_in.empty()) {
        std::ifstream in(events_in);
        if (!in) throw IoError("cannot read event file '" + events_in + "'");
        kaon::EventFile file = kaon::read_events(in);
        if (file.header.params_sha256 != kaon::params_digest(params)) {
          std::cerr << "event file '" << events_in
                    << "' was generated with different params (digest mismatch)\n";
          return exit_format;
        }
        spec.seed = file.header.seed;
        spec.n_pairs = file.events.size();
        result = kaon::run_experiment(spec, params, file.events);
        m.outputs.push_back(events_in);
      } else {
        result = kaon::run_experiment(spec, params);
      }
      m.seed = spec.seed;
      m.spec = {{"kind", std::string(1, kaon::letter(spec.kind))},
                {"tau_r0", spec.tau_r0},
                {"grid", grid_text},
                {"n_pairs", result.n_pairs},
                {"bin_width", spec.bin_width},
                {"min_events", spec.min_events},
                {"threads", threads}};
      if (scan_out.empty()) {
        kaon::write_scan_csv(std::cout, result, params);
        m.finished = kaon::utc_timestamp();
        write_manifest(m, "");
      } else {
        std::ofstream out = open_output(scan_out);
        kaon::write_scan_csv(out, result, params);
        out.close();
        if (!out) throw IoError("write failed for '" + scan_out + "'");
        m.outputs.insert(m.outputs.begin(), scan_out);
        m.finished = kaon::utc_timestamp();
        write_manifest(m, scan_out + ".manifest.json");
      }
      return exit_ok;
    }

    if (*verify) {
      std::ifstream in(manifest_path);
      if (!in) throw IoError("cannot read manifest '" + manifest_path + "'");
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(in);
      } catch (const nlohmann::json::exception& e) {
        std::cerr << manifest_path << ": " << e.what() << "\n";
        return exit_format;
      }
      if (!kaon::verify_manifest(j)) {
        std::cerr << manifest_path << ": params digest mismatch\n";
        return exit_format;
      }
      std::cout << "ok " << j.at("params_sha256").get<std::string>() << "\n";
      return exit_ok;
    }
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_io;
  } catch (const kaon::FormatError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return exit_format;
  } catch (const kaon::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_usage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_usage;
  } catch (const std::domain_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_usage;
  }
  return exit_usage;
}
