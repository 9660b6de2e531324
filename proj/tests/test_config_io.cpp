#include "mfc/config.hpp"
#include "mfc/io.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

using namespace mfc;
namespace fs = std::filesystem;

namespace {

std::string error_of(const Json& user) {
  try {
    resolve_config(user);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("mfc_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST(Config, DefaultsPerProblem) {
  const RunConfig lq = resolve_config(Json{{"problem", {{"name", "lq"}}}});
  EXPECT_EQ(lq.problem.horizon, 400);
  EXPECT_EQ(lq.training.particles, 2000);
  EXPECT_EQ(lq.training.iterations, 6000);
  EXPECT_EQ(lq.basis.size(), 10);
  EXPECT_NEAR(*lq.oracle_value(), 1.625, 1e-15);

  const RunConfig k = resolve_config(Json{{"problem", {{"name", "kuramoto"}}}});
  EXPECT_TRUE(k.problem.space.is_torus());
  EXPECT_EQ(k.basis.size(), 20);
  EXPECT_TRUE(std::holds_alternative<TwoClusterTorus>(k.initial_law));
  EXPECT_FALSE(k.network.input_bound.has_value());

  const RunConfig s = resolve_config(Json{{"problem", {{"name", "systemic"}}}});
  EXPECT_EQ(s.problem.horizon, 1);
  EXPECT_NEAR(*s.oracle_value(), 0.52200840 * 2.25 + 0.14330677, 2e-7);
}

TEST(Config, ResolveIsIdempotent) {
  const RunConfig a = resolve_config(Json{{"problem", {{"name", "lq"}}}, {"network", {{"hidden", {16}}}}});
  const RunConfig b = resolve_config(a.resolved);
  EXPECT_EQ(a.resolved, b.resolved);
  EXPECT_EQ(a.config_hash, b.config_hash);
  EXPECT_EQ(a.model_hash, b.model_hash);
}

TEST(Config, HashIgnoresKeyOrderButTracksValues) {
  const Json a = Json::parse(R"({"problem":{"name":"lq","kappa":2.0},"training":{"lr":0.01,"particles":100}})");
  const Json b = Json::parse(R"({"training":{"particles":100,"lr":0.01},"problem":{"kappa":2.0,"name":"lq"}})");
  EXPECT_EQ(resolve_config(a).config_hash, resolve_config(b).config_hash);
  const Json c = Json::parse(R"({"problem":{"name":"lq","kappa":2.0},"training":{"lr":0.02,"particles":100}})");
  EXPECT_NE(resolve_config(a).config_hash, resolve_config(c).config_hash);
  EXPECT_EQ(resolve_config(a).model_hash, resolve_config(c).model_hash);
}

TEST(Config, ErrorsNameTheOffendingPath) {
  EXPECT_NE(error_of(Json{{"problem", {{"name", "lq"}}}, {"network", {{"hiden", {4}}}}})
                .find("network.hiden"),
            std::string::npos);
  EXPECT_NE(error_of(Json{{"problem", {{"name", "lq"}}}, {"training", {{"particles", -5}}}})
                .find("training.particles"),
            std::string::npos);
  EXPECT_NE(error_of(Json{{"problem", {{"name", "lq"}}}, {"training", {{"lr", "fast"}}}})
                .find("training.lr"),
            std::string::npos);
  EXPECT_NE(error_of(Json{{"problem", {{"name", "heat"}}}}).find("problem.name"), std::string::npos);
  EXPECT_NE(error_of(Json{{"problem", {{"name", "lq"}}}, {"discretization", {{"dt", 0.3}}}}),
            "");
  EXPECT_NE(error_of(Json{{"problem", {{"name", "kuramoto"}}},
                          {"initial_law", {{"kind", "gaussian"}}}}),
            "");
}

TEST(Config, SwitchingKindLoadsThatKindsDefaults) {
  const RunConfig k = resolve_config(
      Json{{"problem", {{"name", "kuramoto"}}}, {"initial_law", {{"kind", "uniform"}}}});
  EXPECT_TRUE(std::holds_alternative<UniformTorus>(k.initial_law));
  EXPECT_FALSE(k.resolved["initial_law"].contains("centers"));
  EXPECT_EQ(k.resolved["initial_law"]["seed"], 2);
  const RunConfig n = resolve_config(
      Json{{"problem", {{"name", "lq"}}}, {"noise", {{"law", {{"kind", "uniform"}, {"bound", 0.5}}}}}});
  EXPECT_EQ(n.problem.noise.kind, NoiseKind::Uniform);
  EXPECT_DOUBLE_EQ(n.problem.noise.bound, 0.5);
  EXPECT_NE(error_of(Json{{"problem", {{"name", "lq"}}},
                          {"initial_law", {{"kind", "uniform"}, {"mean", {0.0}}}}}),
            "");
}

TEST(Config, BasisSpaceMismatchNeedsOverride) {
  const Json fourier_on_line = {{"problem", {{"name", "lq"}}},
                                {"network", {{"basis", {{"kind", "fourier"}}}}}};
  EXPECT_NE(error_of(fourier_on_line), "");
  Json forced = fourier_on_line;
  forced["network"]["basis"]["allow_space_mismatch"] = true;
  EXPECT_NO_THROW(resolve_config(forced));
}

TEST(Config, LoadFromFile) {
  const fs::path dir = scratch("cfg");
  {
    std::ofstream(dir / "ok.json") << R"({"problem":{"name":"systemic"},"training":{"iterations":5}})";
    std::ofstream(dir / "bad.json") << R"({"problem": )";
  }
  EXPECT_EQ(load_config((dir / "ok.json").string()).training.iterations, 5);
  EXPECT_THROW(load_config((dir / "bad.json").string()), ConfigError);
  try {
    load_config((dir / "nope.json").string());
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("nope.json"), std::string::npos);
  }
}

TEST(Io, CsvQuotingAndRoundTrip) {
  EXPECT_EQ(io::csv_field("plain"), "plain");
  EXPECT_EQ(io::csv_field("a,b"), "\"a,b\"");
  EXPECT_EQ(io::csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
  const fs::path dir = scratch("csv");
  {
    io::CsvWriter w(dir / "t.csv", {"name", "value", "count"});
    w.add("x,y").add(0.1).add(3);
    w.end_row();
    w.add("line\nbreak").add(-1e-300).add(-7L);
    w.end_row();
    EXPECT_FALSE(fs::exists(dir / "t.csv"));
    w.close();
  }
  const io::CsvTable t = io::read_csv(dir / "t.csv");
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.rows[0][t.column("name")], "x,y");
  EXPECT_EQ(io::parse_real(t.rows[0][t.column("value")]), 0.1);
  EXPECT_EQ(t.rows[1][0], "line\nbreak");
  EXPECT_EQ(io::parse_real(t.rows[1][1]), -1e-300);
  EXPECT_THROW(t.column("missing"), Error);
}

TEST(Io, FormatRealRoundTrips) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<Real> u(-1e6, 1e6);
  for (int i = 0; i < 1000; ++i) {
    const Real x = u(rng) * std::pow(10.0, static_cast<int>(i % 40) - 20);
    EXPECT_EQ(io::parse_real(io::format_real(x)), x);
  }
}

TEST(Io, TrajectoryRoundTrip) {
  const fs::path dir = scratch("traj");
  std::vector<Matrix> states{Matrix::Random(5, 2), Matrix::Random(5, 2)};
  io::write_trajectory_csv(dir / "tr.csv", {0, 3}, states);
  const io::TrajectoryData d = io::read_trajectory_csv(dir / "tr.csv");
  EXPECT_EQ(d.steps, (std::vector<int>{0, 3}));
  ASSERT_EQ(d.states.size(), 2u);
  EXPECT_EQ(d.states[1], states[1]);
}

TEST(Io, HeatmapOfPointMass) {
  io::TrajectoryData d{{0}, {Matrix::Constant(10, 1, 1.5)}};
  const io::Heatmap h = io::build_heatmap(d, 10, false);
  EXPECT_NEAR(h.mass.row(0).maxCoeff(), 1.0, 1e-15);
  EXPECT_NEAR(h.mass.sum(), 1.0, 1e-12);
  EXPECT_THROW(io::build_heatmap(d, 1, false), ArgumentError);
}

TEST(Io, HeatmapOfUniformTorusSample) {
  const Ensemble e = sample_initial(UniformTorus{}, StateSpace::torus(1), 100000, 7);
  const io::Heatmap h = io::build_heatmap({{0}, {e.states}}, 8, true);
  EXPECT_NEAR(h.centers(0), kTwoPi / 16.0, 1e-15);
  for (Index b = 0; b < 8; ++b) EXPECT_NEAR(h.mass(0, b), 0.125, 0.01);
  EXPECT_NEAR(h.mass.row(0).sum(), 1.0, 1e-12);
}

TEST(Io, HeatmapSeparatesTwoClusters) {
  Matrix x(6, 1);
  x << 0.5, 0.6, 0.55, 4.0, 4.1, 4.2;
  const io::Heatmap h = io::build_heatmap({{0}, {x}}, 2, true);
  EXPECT_NEAR(h.mass(0, 0), 0.5, 1e-15);
  EXPECT_NEAR(h.mass(0, 1), 0.5, 1e-15);
}
