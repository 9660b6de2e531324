#include "mfc/cli.hpp"

#include "mfc/checkpoint.hpp"
#include "mfc/config.hpp"
#include "mfc/diagnostics.hpp"
#include "mfc/io.hpp"
#include "mfc/parallel.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <iomanip>
#include <ostream>

namespace mfc {

namespace fs = std::filesystem;

namespace {

struct Options {
  std::string config;
  std::string out;
  std::string checkpoint;
  bool force = false;
  bool training_bank = false;
  std::optional<std::uint64_t> noise_seed;
  std::optional<std::uint64_t> init_seed;
  std::optional<std::uint64_t> weights_seed;
  // export-heatmap
  std::string trajectory;
  int bins = 100;
  std::string space = "euclidean";
  // grad-check
  Index particles = 8;
  int steps = 3;
  std::string scheme = "auto";
  std::optional<Real> step_size;
  Real floor = 1e-8;
};

using Clock = std::chrono::steady_clock;

class Run {
 public:
  Run(std::string command, const Options& o, std::ostream& out)
      : command_(std::move(command)), opts_(o), out_(out), start_(Clock::now()) {}

  RunConfig load() {
    Json user = read_json_file(opts_.config);
    if (!user.is_object()) throw ConfigError("configuration file '" + opts_.config + "': expected an object");
    auto section = [&](const char* name) -> Json& {
      Json& s = user[name];
      if (s.is_null()) s = Json::object();
      return s;
    };
    if (opts_.noise_seed) section("noise")["seed"] = *opts_.noise_seed;
    if (opts_.init_seed) section("initial_law")["seed"] = *opts_.init_seed;
    if (opts_.weights_seed) section("network")["seed"] = *opts_.weights_seed;
    try {
      cfg_ = resolve_config(user);
    } catch (const ConfigError& e) {
      throw ConfigError(std::string(e.what()) + " (in '" + opts_.config + "')");
    }
    has_cfg_ = true;
    return cfg_;
  }

  void open_output() {
    if (opts_.out.empty()) throw ConfigError("--out: an output directory is required");
    io::ensure_directory(opts_.out);
  }

  fs::path path(const std::string& name) {
    artifacts_.push_back(name);
    return fs::path(opts_.out) / name;
  }

  void write_json(const std::string& name, Json j) {
    if (has_cfg_) {
      j["resolved_config"] = cfg_.resolved;
      j["config_hash"] = cfg_.config_hash;
      j["seeds"] = seeds_json();
    }
    io::write_json_atomic(path(name), j);
  }

  void write_resolved_config() {
    io::write_json_atomic(path("config.json"), cfg_.resolved);
  }

  Json seeds_json() const {
    const Json& r = cfg_.resolved;
    return {{"noise", r["noise"]["seed"]},
            {"initial_law", r["initial_law"]["seed"]},
            {"network", r["network"]["seed"]},
            {"evaluation", r["evaluation"]["noise_seed"]},
            {"poc", r["diagnostics"]["poc"]["seed"]},
            {"rademacher", r["diagnostics"]["rademacher"]["seed"]}};
  }

  void finish() {
    if (opts_.out.empty()) return;
    Json m;
    m["tool"] = "mfc";
    m["version"] = kToolVersion;
    m["command"] = command_;
    m["artifacts"] = artifacts_;
    m["wall_seconds"] = std::chrono::duration<double>(Clock::now() - start_).count();
    m["threads"] = parallel::threads();
    if (has_cfg_) {
      m["resolved_config"] = cfg_.resolved;
      m["config_hash"] = cfg_.config_hash;
      m["model_hash"] = cfg_.model_hash;
      m["basis_hash"] = cfg_.basis_hash;
      m["seeds"] = seeds_json();
    }
    io::write_json_atomic(fs::path(opts_.out) / "manifest.json", m);
  }

  CheckpointMeta meta(long iteration, Real loss) const {
    CheckpointMeta m;
    m.basis_hash = cfg_.basis_hash;
    m.model_hash = cfg_.model_hash;
    m.config_hash = cfg_.config_hash;
    m.basis = to_json(cfg_.basis);
    m.seeds = cfg_.training.seeds;
    m.iteration = iteration;
    m.loss = loss;
    return m;
  }

  // The checkpoint named by --checkpoint, or the freshly initialised policy.
  PolicyNetwork policy() const {
    if (opts_.checkpoint.empty())
      return PolicyNetwork::initialize(cfg_.network, cfg_.training.seeds.weights);
    CheckpointExpectation expect{cfg_.basis_hash, cfg_.model_hash};
    return load_checkpoint(opts_.checkpoint, expect, opts_.force).policy;
  }

  std::ostream& out() { return out_; }
  const Options& opts() const { return opts_; }

 private:
  std::string command_;
  const Options& opts_;
  std::ostream& out_;
  Clock::time_point start_;
  RunConfig cfg_;
  bool has_cfg_ = false;
  std::vector<std::string> artifacts_;
};

Json stats_json(const MeasureStats& s) {
  Json j{{"mean", std::vector<Real>(s.mean.data(), s.mean.data() + s.mean.size())},
         {"variance", s.variance()}};
  if (s.c1.size() > 0) j["order_parameter"] = s.order_parameter();
  return j;
}

// Problem settings for evaluation-style commands: either the evaluation
// section or, with --training-bank, exactly the bank used in training.
std::pair<EvalOptions, InitialLaw> eval_setup(const RunConfig& cfg, bool training_bank) {
  if (!training_bank) return {cfg.evaluation.options, cfg.evaluation_law()};
  EvalOptions o;
  o.noise_seed = cfg.training.seeds.noise;
  o.init_seed = cfg.training.seeds.init;
  o.particles = cfg.training.particles;
  o.replications = 1;
  return {o, cfg.initial_law};
}

void cmd_train(Run& run) {
  const RunConfig cfg = run.load();
  run.open_output();
  run.write_resolved_config();
  const fs::path ckpt = run.path("checkpoint.bin");
  std::ostream& out = run.out();

  TrainCallbacks cb;
  cb.on_log = [&](long it, Real loss, Real lr) {
    out << "iteration " << it << "  loss " << std::setprecision(10) << loss << "  lr " << lr << std::endl;
  };
  cb.on_checkpoint = [&](long it, const PolicyNetwork& best) {
    save_checkpoint(ckpt.string(), best, run.meta(it, std::nan("")));
  };
  cb.on_abort = [&](long it, const PolicyNetwork& last_good) {
    save_checkpoint(ckpt.string(), last_good, run.meta(it, std::nan("")));
    run.finish();
  };
  const TrainReport rep =
      train(cfg.problem, cfg.basis, cfg.network, cfg.initial_law, cfg.training, cb);
  save_checkpoint(ckpt.string(), rep.best, run.meta(rep.best_iteration, rep.best_loss));

  io::CsvWriter csv(run.path("loss.csv"), {"iteration", "loss"});
  for (std::size_t i = 0; i < rep.loss_curve.size(); ++i)
    csv.add(static_cast<long long>(i)).add(rep.loss_curve[i]).end_row();
  csv.close();

  Json r;
  r["iterations"] = rep.loss_curve.size();
  r["initial_loss"] = rep.initial_loss;
  r["final_loss"] = rep.best_loss;
  r["best_iteration"] = rep.best_iteration;
  r["last_loss"] = rep.loss_curve.back();
  char hash[17];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(rep.noise_hash));
  r["noise_hash"] = hash;
  r["model_hash"] = cfg.model_hash;
  r["basis_hash"] = cfg.basis_hash;
  r["checkpoint"] = "checkpoint.bin";
  if (auto v = cfg.oracle_value()) {
    r["oracle_value"] = *v;
    r["relative_gap"] = (rep.best_loss - *v) / std::abs(*v);
  }
  run.write_json("report.json", r);
  out << "best loss " << std::setprecision(10) << rep.best_loss << " at iteration "
      << rep.best_iteration << '\n';
}

void cmd_evaluate(Run& run) {
  if (run.opts().checkpoint.empty()) throw ConfigError("--checkpoint: required for evaluate");
  const RunConfig cfg = run.load();
  run.open_output();
  const PolicyNetwork policy = run.policy();
  auto [options, law] = eval_setup(cfg, run.opts().training_bank);
  const EvalReport rep = evaluate(cfg.problem, cfg.basis, policy, law, options);
  Json r;
  r["costs"] = rep.costs;
  r["mean"] = rep.mean;
  r["stddev"] = rep.stddev;
  r["replications"] = options.replications;
  r["particles"] = options.particles;
  r["noise_seed"] = options.noise_seed;
  r["initial_law"] = describe(law);
  Json term = Json::array();
  for (const auto& s : rep.terminal) term.push_back(stats_json(s));
  r["terminal"] = term;
  if (!rep.terminal_order.empty()) r["terminal_order"] = rep.terminal_order;
  run.write_json("report.json", r);
  run.out() << "mean cost " << std::setprecision(10) << rep.mean << " (std " << rep.stddev
            << ", " << options.replications << " replications)\n";
}

void cmd_simulate(Run& run) {
  const RunConfig cfg = run.load();
  run.open_output();
  const PolicyNetwork policy = run.policy();
  auto [options, law] = eval_setup(cfg, run.opts().training_bank);
  const Ensemble x0 = sample_initial(law, cfg.problem.space, options.particles, options.init_seed);
  const NoiseBank noise = generate_noise(options.particles, cfg.problem.horizon,
                                         cfg.problem.noise_dim, cfg.problem.noise,
                                         options.noise_seed);
  const Trajectory traj = simulate(cfg.problem, cfg.basis, policy, x0, noise);
  const Json& oj = cfg.resolved["output"];
  const auto keep = std::min<Index>(oj["trajectory_particles"].get<Index>(), x0.size());
  const int every = oj["record_every"].get<int>();
  const int T = cfg.problem.horizon;

  std::vector<int> steps;
  std::vector<Matrix> blocks;
  for (int j = 0; j <= T; ++j) {
    if (j % every != 0 && j != T) continue;
    steps.push_back(j);
    blocks.push_back(traj.states[static_cast<std::size_t>(j)].topRows(keep));
  }
  if (keep > 0) io::write_trajectory_csv(run.path("trajectory.csv"), steps, blocks);

  const bool torus = cfg.problem.space.is_torus();
  std::vector<std::string> header{"step", "time", "mean", "variance"};
  if (torus) header.push_back("order_parameter");
  header.push_back("running_cost");
  io::CsvWriter stats(run.path("stats.csv"), header);
  for (int j = 0; j <= T; ++j) {
    const MeasureStats& s = traj.stats[static_cast<std::size_t>(j)];
    stats.add(j).add(j * cfg.problem.dt).add(s.mean(0)).add(s.variance());
    if (torus) stats.add(s.order_parameter());
    stats.add(j < T ? traj.running[static_cast<std::size_t>(j)] : traj.terminal).end_row();
  }
  stats.close();

  if (oj["write_features"].get<bool>()) {
    io::CsvWriter f(run.path("features.csv"), {"step", "feature", "value"});
    for (int j = 0; j <= T; ++j) {
      const RowVector& v = traj.stats[static_cast<std::size_t>(j)].features;
      for (Index l = 0; l < v.size(); ++l) f.add(j).add(static_cast<long long>(l)).add(v(l)).end_row();
    }
    f.close();
  }

  Json r;
  r["cost"] = traj.cost;
  r["terminal_cost"] = traj.terminal;
  r["particles"] = options.particles;
  r["initial"] = stats_json(traj.stats.front());
  r["final"] = stats_json(traj.final_stats);
  r["policy"] = run.opts().checkpoint.empty() ? "initial weights" : run.opts().checkpoint;
  run.write_json("report.json", r);
  run.out() << "cost " << std::setprecision(10) << traj.cost << '\n';
}

void cmd_poc(Run& run) {
  const RunConfig cfg = run.load();
  run.open_output();
  const PolicyNetwork policy = run.policy();
  PocOptions o;
  o.particles = cfg.poc.particles;
  o.replications = cfg.poc.replications;
  o.reference_particles = cfg.poc.reference_particles;
  o.seed = cfg.poc.seed;
  const PocStudyReport rep = poc_study(cfg.problem, cfg.basis, policy, cfg.initial_law, o);

  io::CsvWriter csv(run.path("poc.csv"), {"particles", "mean_sup_w1", "stderr", "mean_cost_gap"});
  for (const auto& row : rep.rows)
    csv.add(static_cast<long long>(row.particles)).add(row.mean_w1).add(row.stderr_w1)
        .add(row.mean_cost_gap).end_row();
  csv.close();
  io::CsvWriter steps(run.path("poc_steps.csv"), {"particles", "step", "mean_w1"});
  for (const auto& row : rep.rows)
    for (std::size_t j = 0; j < row.step_w1.size(); ++j)
      steps.add(static_cast<long long>(row.particles)).add(static_cast<long long>(j))
          .add(row.step_w1[j]).end_row();
  steps.close();

  Json r;
  r["slope"] = rep.slope;
  r["intercept"] = rep.intercept;
  r["reference_particles"] = rep.reference_particles;
  r["reference_cost"] = rep.reference_cost;
  Json rows = Json::array();
  for (const auto& row : rep.rows)
    rows.push_back({{"particles", row.particles}, {"mean_sup_w1", row.mean_w1},
                    {"stderr", row.stderr_w1}, {"mean_cost_gap", row.mean_cost_gap}});
  r["rows"] = rows;
  r["policy"] = run.opts().checkpoint.empty() ? "initial weights" : run.opts().checkpoint;
  run.write_json("report.json", r);
  run.out() << "log-log slope " << std::setprecision(6) << rep.slope << '\n';
}

void cmd_rademacher(Run& run) {
  const RunConfig cfg = run.load();
  run.open_output();
  RademacherOptions o;
  o.particles = cfg.rademacher.particles;
  o.sigma_draws = cfg.rademacher.sigma_draws;
  o.starts = cfg.rademacher.starts;
  o.inner_iterations = cfg.rademacher.inner_iterations;
  o.lr = cfg.rademacher.lr;
  o.reference_particles = cfg.rademacher.reference_particles;
  o.seed = cfg.rademacher.seed;
  o.weights_seed = cfg.training.seeds.weights;
  o.frozen_zero_output = cfg.rademacher.frozen_zero_output;
  const RademacherReport rep =
      rademacher_estimate(cfg.problem, cfg.basis, cfg.network, cfg.initial_law, o);

  io::CsvWriter csv(run.path("rademacher.csv"),
                    {"particles", "lower_bound_estimate", "stderr", "draws", "discarded"});
  Json rows = Json::array();
  for (const auto& row : rep.rows) {
    csv.add(static_cast<long long>(row.particles)).add(row.estimate).add(row.stderr_estimate)
        .add(static_cast<long long>(row.draw_maxima.size())).add(row.discarded).end_row();
    rows.push_back({{"particles", row.particles},
                    {"lower_bound_estimate", row.estimate},
                    {"stderr", row.stderr_estimate},
                    {"draw_maxima", row.draw_maxima},
                    {"discarded", row.discarded}});
    run.out() << "N=" << row.particles << "  estimate " << std::setprecision(6) << row.estimate
              << " (lower bound)\n";
  }
  csv.close();
  run.write_json("report.json", {{"rows", rows}, {"estimator", "multi-start Adam ascent, lower bound"}});
}

void cmd_convergence(Run& run) {
  const RunConfig cfg = run.load();
  const auto oracle = cfg.oracle_value();
  if (!oracle)
    throw ConfigError("problem.name: convergence needs a problem and initial law with a value oracle");
  run.open_output();
  const auto rows = value_convergence_study(cfg.problem, cfg.basis, cfg.network, cfg.initial_law,
                                            cfg.training, cfg.convergence.particles, *oracle);
  io::CsvWriter csv(run.path("convergence.csv"), {"particles", "value", "oracle", "gap"});
  Json jr = Json::array();
  for (const auto& row : rows) {
    csv.add(static_cast<long long>(row.particles)).add(row.value).add(row.oracle).add(row.gap).end_row();
    jr.push_back({{"particles", row.particles}, {"value", row.value}, {"oracle", row.oracle},
                  {"gap", row.gap}, {"best_iteration", row.best_iteration}});
    run.out() << "N=" << row.particles << "  value " << std::setprecision(8) << row.value
              << "  gap " << row.gap << '\n';
  }
  csv.close();
  run.write_json("report.json", {{"rows", jr}});
}

void cmd_heatmap(Run& run) {
  const Options& o = run.opts();
  if (o.space != "torus" && o.space != "euclidean")
    throw ConfigError("--space: expected torus or euclidean");
  if (o.bins < 2) throw ConfigError("--bins: must be >= 2");
  run.open_output();
  const io::TrajectoryData data = io::read_trajectory_csv(o.trajectory);
  const io::Heatmap h = io::build_heatmap(data, o.bins, o.space == "torus");
  io::write_heatmap_csv(run.path("heatmap.csv"), h);
  run.out() << "heatmap with " << h.steps.size() << " steps and " << o.bins << " bins\n";
}

int cmd_grad_check(Run& run) {
  RunConfig cfg = run.load();
  const Options& o = run.opts();
  if (o.particles < 1 || o.steps < 1) throw ConfigError("--particles and --steps must be >= 1");
  if (!o.out.empty()) run.open_output();
  ProblemSpec problem = cfg.problem;
  problem.horizon = o.steps;
  const PolicyNetwork policy = run.policy();
  const Ensemble x0 = sample_initial(cfg.initial_law, problem.space, o.particles, cfg.training.seeds.init);
  const NoiseBank noise = generate_noise(o.particles, problem.horizon, problem.noise_dim,
                                         problem.noise, cfg.training.seeds.noise);
  GradCheckOptions gc;
  const bool relu = cfg.network.activation == ad::Activation::ReLU;
  std::string scheme = o.scheme;
  if (scheme == "auto")
    scheme = cfg.network.hard_clamp ? "ladder" : relu ? "kinkfree" : "richardson";
  if (scheme == "richardson" || scheme == "kinkfree") {
    gc.scheme = scheme == "richardson" ? FdScheme::Richardson : FdScheme::KinkFree;
    gc.h = 1e-2;
  } else if (scheme == "ladder") {
    gc.scheme = FdScheme::StepLadder;
  } else if (scheme != "central") {
    throw ConfigError("--scheme: expected auto, central, richardson, kinkfree or ladder");
  }
  if (o.step_size) gc.h = *o.step_size;
  gc.floor = o.floor;
  const GradCheckReport rep = grad_check(problem, cfg.basis, policy, x0, noise, gc);
  run.out() << "max relative error " << std::setprecision(6) << std::scientific << rep.max_rel_error
            << " over " << rep.checked << " parameters (feature-path gradient norm "
            << rep.feature_path_norm << ")\n" << std::defaultfloat;
  if (!o.out.empty())
    run.write_json("report.json", {{"max_rel_error", rep.max_rel_error},
                                   {"worst_index", rep.worst_index},
                                   {"checked", rep.checked},
                                   {"feature_path_norm", rep.feature_path_norm},
                                   {"particles", o.particles},
                                   {"steps", o.steps}});
  return rep.max_rel_error < 1e-4 ? 0 : 1;
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Mean-field optimal control by single-simulation policy training", "mfc"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);
  Options o;

  auto add_config = [&](CLI::App* c) {
    c->add_option("--config", o.config, "JSON run configuration")->required();
  };
  auto add_out = [&](CLI::App* c, bool required) {
    auto* opt = c->add_option("--out", o.out, "output directory");
    if (required) opt->required();
  };
  auto add_seeds = [&](CLI::App* c) {
    c->add_option("--noise-seed", o.noise_seed, "override noise.seed");
    c->add_option("--init-seed", o.init_seed, "override initial_law.seed");
    c->add_option("--weights-seed", o.weights_seed, "override network.seed");
  };
  auto add_checkpoint = [&](CLI::App* c, bool required) {
    auto* opt = c->add_option("--checkpoint", o.checkpoint, "policy checkpoint");
    if (required) opt->required();
    c->add_flag("--force", o.force, "load despite basis or model hash mismatches");
  };

  auto* train_cmd = app.add_subcommand("train", "train a policy on one fixed noise bank");
  add_config(train_cmd);
  add_out(train_cmd, true);
  add_seeds(train_cmd);

  auto* eval_cmd = app.add_subcommand("evaluate", "evaluate a checkpoint on fresh randomness");
  add_config(eval_cmd);
  add_out(eval_cmd, true);
  add_seeds(eval_cmd);
  add_checkpoint(eval_cmd, true);
  eval_cmd->add_flag("--training-bank", o.training_bank, "reuse the training initial ensemble and noise");

  auto* sim_cmd = app.add_subcommand("simulate", "roll out a policy and write trajectories");
  add_config(sim_cmd);
  add_out(sim_cmd, true);
  add_seeds(sim_cmd);
  add_checkpoint(sim_cmd, false);
  sim_cmd->add_flag("--training-bank", o.training_bank, "reuse the training initial ensemble and noise");

  auto* poc_cmd = app.add_subcommand("poc-study", "propagation-of-chaos study for a fixed policy");
  add_config(poc_cmd);
  add_out(poc_cmd, true);
  add_seeds(poc_cmd);
  add_checkpoint(poc_cmd, false);

  auto* rad_cmd = app.add_subcommand("rademacher", "empirical Rademacher complexity estimates");
  add_config(rad_cmd);
  add_out(rad_cmd, true);
  add_seeds(rad_cmd);

  auto* conv_cmd = app.add_subcommand("convergence", "trained value against the oracle over N");
  add_config(conv_cmd);
  add_out(conv_cmd, true);
  add_seeds(conv_cmd);

  auto* heat_cmd = app.add_subcommand("export-heatmap", "per-step histograms of a trajectory");
  heat_cmd->add_option("--trajectory", o.trajectory, "trajectory.csv from simulate")->required();
  heat_cmd->add_option("--bins", o.bins, "number of bins")->capture_default_str();
  heat_cmd->add_option("--space", o.space, "torus or euclidean")->capture_default_str();
  add_out(heat_cmd, true);

  auto* grad_cmd = app.add_subcommand("grad-check", "autodiff against central finite differences");
  add_config(grad_cmd);
  add_out(grad_cmd, false);
  add_seeds(grad_cmd);
  add_checkpoint(grad_cmd, false);
  grad_cmd->add_option("--particles", o.particles, "ensemble size")->capture_default_str();
  grad_cmd->add_option("--steps", o.steps, "time steps")->capture_default_str();
  grad_cmd->add_option("--scheme", o.scheme,
                       "auto, central, richardson, kinkfree or ladder; auto picks richardson for smooth "
                       "networks and kinkfree for ReLU")
      ->capture_default_str();
  grad_cmd->add_option("--fd-step", o.step_size, "finite-difference step (1e-5 central, 1e-2 richardson)");
  grad_cmd->add_option("--floor", o.floor, "denominator floor of the relative error")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  std::string command = app.get_subcommands().front()->get_name();
  try {
    parallel::configure_from_env();
    Run run(command, o, out);
    int code = 0;
    if (command == "train") cmd_train(run);
    else if (command == "evaluate") cmd_evaluate(run);
    else if (command == "simulate") cmd_simulate(run);
    else if (command == "poc-study") cmd_poc(run);
    else if (command == "rademacher") cmd_rademacher(run);
    else if (command == "convergence") cmd_convergence(run);
    else if (command == "export-heatmap") cmd_heatmap(run);
    else code = cmd_grad_check(run);
    run.finish();
    return code;
  } catch (const ConfigError& e) {
    err << "mfc " << command << ": configuration error: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    err << "mfc " << command << ": " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "mfc " << command << ": " << e.what() << '\n';
    return 1;
  }
}

}  // namespace mfc
