#pragma once

// File formats.
//
// Event stream (schema kaon-events/1):
//   # kaon-events/1 seed=<u64> n_pairs=<u64> params_sha256=<hex>
//   # columns: id,tau_l,mode_l,tau_r,mode_r
//   0,0.12345678901234567,TwoPi,512.00000000000000,ThreePi
//   ...
// Times carry 17 significant digits; modes are DecayMode names.
//
// Scan table (schema kaon-scan/1): '#' comment block echoing the experiment,
// params digest and seed, then a CSV header and one row per tau_l grid point.
//
// Params digest: SHA-256 of the compact JSON serialization of PhysicsParams
// with keys in declaration order.

#include <openssl/evp.h>

#include <charconv>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "kaon/eraser_experiments.hpp"
#include "kaon/errors.hpp"
#include "kaon/event_generator.hpp"
#include "kaon/physics_params.hpp"

namespace kaon {

inline constexpr const char* tool_version = "0.1.0";
inline constexpr const char* event_schema = "kaon-events/1";
inline constexpr const char* scan_schema = "kaon-scan/1";

inline std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 computation failed");
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xf]);
  }
  return out;
}

inline std::string canonical_params(const PhysicsParams& p) { return to_json(p).dump(); }

inline std::string params_digest(const PhysicsParams& p) {
  return sha256_hex(canonical_params(p));
}

inline std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

// ---- event stream -------------------------------------------------------

struct EventFileHeader {
  std::uint64_t seed = 0;
  std::uint64_t n_pairs = 0;
  std::string params_sha256;
};

inline void write_event_header(std::ostream& out, const EventFileHeader& h) {
  out << "# " << event_schema << " seed=" << h.seed << " n_pairs=" << h.n_pairs
      << " params_sha256=" << h.params_sha256 << "\n"
      << "# columns: id,tau_l,mode_l,tau_r,mode_r\n";
}

inline void write_event(std::ostream& out, const PairEvent& ev) {
  out << ev.id << ',' << format_double(ev.left.tau) << ',' << to_string(ev.left.mode) << ','
      << format_double(ev.right.tau) << ',' << to_string(ev.right.mode) << '\n';
}

inline void write_events(std::ostream& out, const EventFileHeader& h,
                         std::span<const PairEvent> events) {
  write_event_header(out, h);
  for (const PairEvent& ev : events) write_event(out, ev);
}

struct EventFile {
  EventFileHeader header;
  std::vector<PairEvent> events;
};

namespace detail {

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(sep, start);
    parts.push_back(s.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

}  // namespace detail

inline EventFile read_events(std::istream& in) {
  EventFile file;
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (lineno == 1) {
        std::istringstream hs(line.substr(1));
        std::string schema, tok;
        hs >> schema;
        if (schema != event_schema) {
          throw FormatError("unsupported event schema '" + schema + "'", lineno);
        }
        while (hs >> tok) {
          const auto eq = tok.find('=');
          if (eq == std::string::npos) throw FormatError("bad header token '" + tok + "'", lineno);
          const std::string key = tok.substr(0, eq);
          const std::string_view val = std::string_view(tok).substr(eq + 1);
          if (key == "seed") {
            if (!detail::parse_number(val, file.header.seed))
              throw FormatError("bad seed", lineno);
          } else if (key == "n_pairs") {
            if (!detail::parse_number(val, file.header.n_pairs))
              throw FormatError("bad n_pairs", lineno);
          } else if (key == "params_sha256") {
            file.header.params_sha256 = std::string(val);
          } else {
            throw FormatError("unknown header key '" + key + "'", lineno);
          }
        }
        have_header = true;
      }
      continue;
    }
    if (!have_header) throw FormatError("missing event file header", lineno);
    const auto f = detail::split(line, ',');
    if (f.size() != 5) throw FormatError("expected 5 comma-separated fields", lineno);
    PairEvent ev;
    ev.left.side = Side::Left;
    ev.right.side = Side::Right;
    if (!detail::parse_number(f[0], ev.id)) throw FormatError("bad id", lineno);
    if (!detail::parse_number(f[1], ev.left.tau) || !(ev.left.tau >= 0.0))
      throw FormatError("bad tau_l", lineno);
    if (!detail::parse_number(f[3], ev.right.tau) || !(ev.right.tau >= 0.0))
      throw FormatError("bad tau_r", lineno);
    const auto ml = decay_mode_from_string(f[2]);
    const auto mr = decay_mode_from_string(f[4]);
    if (!ml) throw FormatError("unknown mode_l '" + std::string(f[2]) + "'", lineno);
    if (!mr) throw FormatError("unknown mode_r '" + std::string(f[4]) + "'", lineno);
    ev.left.mode = *ml;
    ev.right.mode = *mr;
    if (ev.id != file.events.size()) throw FormatError("event ids must be 0, 1, 2, ...", lineno);
    file.events.push_back(ev);
  }
  if (!have_header) throw FormatError("empty event file", lineno);
  if (file.events.size() != file.header.n_pairs) {
    throw FormatError("header announces " + std::to_string(file.header.n_pairs) +
                          " pairs, file holds " + std::to_string(file.events.size()),
                      lineno);
  }
  return file;
}

// ---- scan table -----------------------------------------------------------

inline std::string grid_echo(std::span<const double> grid) {
  std::string s;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (i) s += ' ';
    s += format_double(grid[i]);
  }
  return s;
}

inline void write_scan_csv(std::ostream& out, const ScanResult& r, const PhysicsParams& params) {
  const ExperimentSpec& s = r.spec;
  out << "# " << scan_schema << "\n"
      << "# experiment=" << letter(s.kind) << " tau_r0=" << format_double(s.tau_r0)
      << " n_pairs=" << r.n_pairs << " seed=" << s.seed
      << " bin_width=" << format_double(s.bin_width) << " min_events=" << s.min_events << "\n"
      << "# grid_points=" << s.tau_l_grid.size() << " grid=" << grid_echo(s.tau_l_grid) << "\n"
      << "# params=" << canonical_params(params) << "\n"
      << "# params_sha256=" << params_digest(params) << "\n"
      << "# Probabilities are per outcome pair: like=P[K0,K0], unlike=P[K0,K0bar],\n"
      << "# ks=P[K0,KS], kl=P[K0,KL]. *_err is one standard error, *_flag=1 marks\n"
      << "# low statistics, *_analytic is the closed form at (tau_l, tau_r) or\n"
      << "# (tau_l, tau_r_lifetime) for the lifetime and early columns.\n";
  const char* cols[] = {"like", "unlike", "ks", "kl", "early_like", "early_unlike"};
  out << "tau_l,tau_r,tau_r_lifetime";
  for (const char* c : cols) out << ',' << c << ',' << c << "_err," << c << "_flag," << c << "_analytic";
  out << ",n_strangeness,n_lifetime,n_discarded\n";
  for (const ScanRow& row : r.rows) {
    out << format_double(row.tau_l) << ',' << format_double(row.tau_r) << ','
        << format_double(row.tau_r_lifetime);
    auto put = [&](const Estimate& e, double analytic) {
      out << ',' << format_double(e.value) << ',' << format_double(e.sigma) << ','
          << (e.flagged ? 1 : 0) << ',' << format_double(analytic);
    };
    put(row.like, row.like_analytic);
    put(row.unlike, row.unlike_analytic);
    put(row.ks, row.ks_analytic);
    put(row.kl, row.kl_analytic);
    put(row.early_like, row.early_like_analytic);
    put(row.early_unlike, row.early_unlike_analytic);
    out << ',' << row.n_strangeness << ',' << row.n_lifetime << ',' << row.n_discarded << '\n';
  }
}

// ---- joint table / manifest ----------------------------------------------

inline nlohmann::ordered_json to_json(const JointProbabilityTable& t) {
  nlohmann::ordered_json j;
  j["left"] = to_string(t.kind_l);
  j["right"] = to_string(t.kind_r);
  j["tau_l"] = t.tau_l;
  j["tau_r"] = t.tau_r;
  j["source"] = to_string(t.source);
  nlohmann::ordered_json probs = nlohmann::ordered_json::array();
  for (int i = 0; i < 2; ++i)
    for (int jj = 0; jj < 2; ++jj) {
      nlohmann::ordered_json e;
      e["left"] = to_string(outcome_of(t.kind_l, i));
      e["right"] = to_string(outcome_of(t.kind_r, jj));
      e["p"] = t.p[i][jj];
      e["sigma"] = t.sigma[i][jj];
      probs.push_back(e);
    }
  j["probabilities"] = probs;
  j["sum"] = t.sum();
  return j;
}

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct RunManifest {
  std::string command;
  nlohmann::ordered_json spec;
  PhysicsParams params;
  std::uint64_t seed = 0;
  std::string started;
  std::string finished;
  std::vector<std::string> outputs;
};

inline nlohmann::ordered_json to_json(const RunManifest& m) {
  nlohmann::ordered_json j;
  j["tool"] = "kaon-eraser";
  j["version"] = tool_version;
  j["command"] = m.command;
  j["params_sha256"] = params_digest(m.params);
  j["params"] = to_json(m.params);
  j["spec"] = m.spec;
  j["seed"] = m.seed;
  j["started"] = m.started;
  j["finished"] = m.finished;
  j["outputs"] = m.outputs;
  return j;
}

// True when the digest recorded in a manifest matches its echoed params.
inline bool verify_manifest(const nlohmann::json& manifest) {
  PhysicsParams p = load_params(manifest.at("params").dump());
  return params_digest(p) == manifest.at("params_sha256").get<std::string>();
}

}  // namespace kaon
