#include <gtest/gtest.h>

#include <sstream>
#include <string>

#include "kaon/io.hpp"

using namespace kaon;

namespace {

std::vector<PairEvent> sample_events() {
  GeneratorConfig c;
  c.seed = 31;
  c.n_pairs = 500;
  return generate(c, PhysicsParams{});
}

std::string serialize(const std::vector<PairEvent>& ev) {
  std::ostringstream out;
  write_events(out, {31, ev.size(), params_digest(PhysicsParams{})}, ev);
  return out.str();
}

std::size_t error_line(const std::string& text) {
  std::istringstream in(text);
  try {
    read_events(in);
  } catch (const FormatError& e) {
    return e.line();
  }
  return 0;
}

std::size_t count_fields(const std::string& line) {
  return static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1;
}

}  // namespace

TEST(Io, Sha256KnownVector) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Io, EventRoundTripIsExact) {
  const auto ev = sample_events();
  std::istringstream in(serialize(ev));
  const EventFile f = read_events(in);
  EXPECT_EQ(f.events, ev);
  EXPECT_EQ(f.header.seed, 31u);
  EXPECT_EQ(f.header.n_pairs, ev.size());
  EXPECT_EQ(f.header.params_sha256, params_digest(PhysicsParams{}));
}

TEST(Io, MalformedLinesReportLineNumber) {
  const std::string good = serialize(sample_events());
  std::istringstream lines(good);
  std::vector<std::string> v;
  for (std::string l; std::getline(lines, l);) v.push_back(l);
  auto join = [](const std::vector<std::string>& ls) {
    std::string s;
    for (const auto& l : ls) s += l + "\n";
    return s;
  };

  auto bad_mode = v;
  bad_mode[4] = "2,0.5,FourPi,1.0,TwoPi";
  EXPECT_EQ(error_line(join(bad_mode)), 5u);

  auto short_row = v;
  short_row[10] = "8,0.5,TwoPi,1.0";
  EXPECT_EQ(error_line(join(short_row)), 11u);

  auto negative = v;
  negative[3] = "1,-0.5,TwoPi,1.0,TwoPi";
  EXPECT_EQ(error_line(join(negative)), 4u);

  auto wrong_schema = v;
  wrong_schema[0] = "# kaon-events/9 seed=1 n_pairs=500 params_sha256=x";
  EXPECT_EQ(error_line(join(wrong_schema)), 1u);

  auto truncated = v;
  truncated.pop_back();
  EXPECT_GT(error_line(join(truncated)), 0u);

  EXPECT_THROW(
      {
        std::istringstream empty("");
        read_events(empty);
      },
      FormatError);
}

TEST(Io, DigestTracksParams) {
  PhysicsParams p;
  const std::string a = params_digest(p);
  EXPECT_EQ(a.size(), 64u);
  EXPECT_EQ(a, params_digest(PhysicsParams{}));
  p.delta_m = 0.48;
  EXPECT_NE(a, params_digest(p));
}

TEST(Io, ManifestVerifies) {
  RunManifest m;
  m.command = "generate";
  m.params = PhysicsParams{};
  m.seed = 3;
  auto j = nlohmann::json::parse(to_json(m).dump());
  EXPECT_TRUE(verify_manifest(j));
  j["params"]["delta_m"] = 0.5;
  EXPECT_FALSE(verify_manifest(j));
}

TEST(Io, ScanCsvShape) {
  const PhysicsParams p;
  ExperimentSpec s;
  s.kind = ExperimentKind::PartiallyActive;
  s.tau_r0 = 1.0;
  s.tau_l_grid = make_grid(0.0, 2.0, 0.5);
  s.n_pairs = 2000;
  std::ostringstream out;
  write_scan_csv(out, run_experiment(s, p), p);
  std::istringstream in(out.str());
  std::string line;
  std::size_t header_fields = 0, rows = 0;
  bool saw_digest = false;
  while (std::getline(in, line)) {
    if (line.rfind("#", 0) == 0) {
      if (line.find("params_sha256=" + params_digest(p)) != std::string::npos) saw_digest = true;
      continue;
    }
    if (header_fields == 0) {
      header_fields = count_fields(line);
      EXPECT_EQ(line.rfind("tau_l,tau_r,tau_r_lifetime,like,like_err,like_flag,like_analytic", 0), 0u);
      continue;
    }
    EXPECT_EQ(count_fields(line), header_fields);
    ++rows;
  }
  EXPECT_TRUE(saw_digest);
  EXPECT_EQ(rows, 5u);
  EXPECT_EQ(header_fields, 3u + 6u * 4u + 3u);
}

TEST(Io, JointTableJson) {
  const auto j = to_json(full_table(Basis::Strangeness, Basis::Lifetime, 1.0, 0.0, PhysicsParams{}));
  EXPECT_EQ(j["probabilities"].size(), 4u);
  EXPECT_EQ(j["probabilities"][1]["right"], "KL");
  EXPECT_NEAR(j["sum"].get<double>(), 1.0, 1e-15);
}
