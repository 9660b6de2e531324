#include "mfc/cli.hpp"
#include "mfc/parallel.hpp"
#include "mfc/problems.hpp"
#include "mfc/rollout.hpp"
#include "mfc/serialize.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

using namespace mfc;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("mfc_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult run(std::vector<std::string> args) {
  args.insert(args.begin(), "mfc");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

const char* kTinyLq = R"({
  "problem": {"name": "lq"},
  "discretization": {"dt": 0.1, "horizon_time": 0.5},
  "network": {"hidden": [6], "activation": "tanh", "basis": {"degree": 3}},
  "training": {"iterations": 6, "particles": 40, "log_every": 0},
  "evaluation": {"particles": 40},
  "output": {"trajectory_particles": 10}
})";

}  // namespace

TEST(Parallel, PartitionCoversRowsInOrder) {
  parallel::ScopedThreads t(3);
  const auto parts = parallel::partition(10);
  ASSERT_EQ(parts.size(), 3u);
  Index next = 0;
  for (const auto& r : parts) {
    EXPECT_EQ(r.begin, next);
    next = r.end;
  }
  EXPECT_EQ(next, 10);
  EXPECT_THROW(parallel::set_threads(-1), ConfigError);
}

TEST(Parallel, ThreadedRolloutMatchesCanonicalMode) {
  const ProblemSpec problem = make_lq(LqParams{}, 0.05, 0.5);
  const FeatureBasis basis = FeatureBasis::polynomial(1, 4);
  NetworkSpec net;
  net.feature_count = basis.size();
  net.hidden = {16, 16};
  net.horizon_time = 0.5;
  net.input_bound = 10.0;
  const PolicyNetwork policy = PolicyNetwork::initialize(net, 3);
  const Ensemble x0 = sample_initial(GaussianDiag{Vector::Zero(1), Vector::Constant(1, 2.25)},
                                     problem.space, 1000, 2);
  const NoiseBank bank = generate_noise(1000, problem.horizon, 1, problem.noise, 1);
  LossAndGrad serial, a, b;
  {
    parallel::ScopedThreads t(0);
    serial = loss_and_grad(problem, basis, policy, x0, bank);
  }
  {
    parallel::ScopedThreads t(4);
    a = loss_and_grad(problem, basis, policy, x0, bank);
    b = loss_and_grad(problem, basis, policy, x0, bank);
  }
  EXPECT_EQ(a.loss, b.loss);
  EXPECT_EQ(a.gradient, b.gradient);
  EXPECT_NEAR(a.loss, serial.loss, 1e-12 * std::abs(serial.loss));
  EXPECT_LT((a.gradient - serial.gradient).cwiseAbs().maxCoeff(),
            1e-12 * std::max(1.0, serial.gradient.cwiseAbs().maxCoeff()));
}

TEST(Cli, TrainWritesArtifactsAndRerunsIdentically) {
  const fs::path dir = scratch("cli_train");
  write(dir / "cfg.json", kTinyLq);
  const CliResult r = run({"train", "--config", (dir / "cfg.json").string(), "--out", (dir / "a").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* f : {"config.json", "report.json", "manifest.json", "checkpoint.bin", "loss.csv"})
    EXPECT_TRUE(fs::exists(dir / "a" / f)) << f;
  const Json report = Json::parse(slurp(dir / "a" / "report.json"));
  EXPECT_EQ(report["iterations"], 6);
  EXPECT_TRUE(report.contains("config_hash"));
  const Json manifest = Json::parse(slurp(dir / "a" / "manifest.json"));
  EXPECT_EQ(manifest["tool"], "mfc");
  EXPECT_TRUE(manifest.contains("wall_seconds"));

  // The resolved configuration alone reproduces the run.
  const CliResult again = run({"train", "--config", (dir / "a" / "config.json").string(), "--out",
                         (dir / "b").string()});
  ASSERT_EQ(again.code, 0) << again.err;
  EXPECT_EQ(slurp(dir / "a" / "loss.csv"), slurp(dir / "b" / "loss.csv"));
  EXPECT_EQ(slurp(dir / "a" / "checkpoint.bin"), slurp(dir / "b" / "checkpoint.bin"));
  EXPECT_EQ(slurp(dir / "a" / "config.json"), slurp(dir / "b" / "config.json"));

  // Evaluating on the training bank reproduces the reported loss.
  const CliResult ev = run({"evaluate", "--config", (dir / "a" / "config.json").string(), "--checkpoint",
                      (dir / "a" / "checkpoint.bin").string(), "--training-bank", "--out",
                      (dir / "ev").string()});
  ASSERT_EQ(ev.code, 0) << ev.err;
  const Json er = Json::parse(slurp(dir / "ev" / "report.json"));
  EXPECT_EQ(er["mean"].get<double>(), report["final_loss"].get<double>());
}

TEST(Cli, SimulateAndHeatmap) {
  const fs::path dir = scratch("cli_sim");
  write(dir / "cfg.json", kTinyLq);
  const CliResult s = run({"simulate", "--config", (dir / "cfg.json").string(), "--out", (dir / "s").string()});
  ASSERT_EQ(s.code, 0) << s.err;
  EXPECT_TRUE(fs::exists(dir / "s" / "trajectory.csv"));
  const CliResult h = run({"export-heatmap", "--trajectory", (dir / "s" / "trajectory.csv").string(),
                     "--bins", "12", "--out", (dir / "h").string()});
  ASSERT_EQ(h.code, 0) << h.err;
  EXPECT_TRUE(fs::exists(dir / "h" / "heatmap.csv"));
  // Nothing lands outside the output directories.
  std::vector<std::string> entries;
  for (const auto& e : fs::directory_iterator(dir)) entries.push_back(e.path().filename().string());
  std::sort(entries.begin(), entries.end());
  EXPECT_EQ(entries, (std::vector<std::string>{"cfg.json", "h", "s"}));
}

TEST(Cli, ExitCodes) {
  const fs::path dir = scratch("cli_codes");
  write(dir / "typo.json", R"({"problem":{"name":"lq"},"network":{"hiden":[4]}})");
  const CliResult typo = run({"train", "--config", (dir / "typo.json").string(), "--out", (dir / "o").string()});
  EXPECT_EQ(typo.code, 2);
  EXPECT_NE(typo.err.find("network.hiden"), std::string::npos);

  const CliResult missing = run({"train", "--config", (dir / "absent.json").string(), "--out", (dir / "o").string()});
  EXPECT_EQ(missing.code, 2);
  EXPECT_NE(missing.err.find("absent.json"), std::string::npos);

  EXPECT_EQ(run({"train"}).code, 2);
  EXPECT_EQ(run({"frobnicate"}).code, 2);
  EXPECT_EQ(run({"--version"}).code, 0);

  write(dir / "cfg.json", kTinyLq);
  write(dir / "other.json", R"({"problem":{"name":"lq"},"discretization":{"dt":0.1,"horizon_time":0.5},
    "network":{"hidden":[6],"activation":"tanh","basis":{"degree":4}},
    "training":{"iterations":2,"particles":20,"log_every":0},"evaluation":{"particles":20}})");
  ASSERT_EQ(run({"train", "--config", (dir / "cfg.json").string(), "--out", (dir / "t").string()}).code, 0);
  const CliResult mismatch = run({"evaluate", "--config", (dir / "other.json").string(), "--checkpoint",
                            (dir / "t" / "checkpoint.bin").string(), "--out", (dir / "e").string()});
  EXPECT_EQ(mismatch.code, 2);
}

TEST(Cli, GradCheckPasses) {
  const fs::path dir = scratch("cli_grad");
  write(dir / "cfg.json", kTinyLq);
  const CliResult g = run({"grad-check", "--config", (dir / "cfg.json").string()});
  EXPECT_EQ(g.code, 0) << g.out << g.err;
}
