#include "mfc/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

namespace mfc {

std::string to_string(ScheduleKind kind) {
  return kind == ScheduleKind::Constant ? "constant" : "step";
}

ScheduleKind parse_schedule(const std::string& name) {
  if (name == "constant") return ScheduleKind::Constant;
  if (name == "step") return ScheduleKind::StepDecay;
  throw ConfigError("unknown learning-rate schedule '" + name + "' (expected constant or step)");
}

Real LrSchedule::rate(Real base, long iteration, long total) const {
  if (kind == ScheduleKind::Constant) return base;
  Real lr = base;
  for (Real m : milestones)
    if (static_cast<Real>(iteration) >= m * static_cast<Real>(total)) lr *= factor;
  return lr;
}

void TrainConfig::validate() const {
  if (iterations < 1) throw ConfigError("training.iterations must be >= 1");
  if (particles < 1) throw ConfigError("training.particles must be >= 1");
  if (!(adam.lr >= 0.0)) throw ConfigError("training.lr must be >= 0");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0))
    throw ConfigError("training Adam betas must lie in [0, 1)");
  if (!(adam.eps > 0.0)) throw ConfigError("training.eps must be > 0");
  if (!(weight_decay >= 0.0)) throw ConfigError("training.weight_decay must be >= 0");
  if (checkpoint_every < 0 || log_every < 0)
    throw ConfigError("training cadences must be >= 0");
  for (Real m : schedule.milestones)
    if (!(m > 0.0 && m < 1.0)) throw ConfigError("schedule milestones must lie in (0, 1)");
  if (!(schedule.factor > 0.0)) throw ConfigError("schedule factor must be > 0");
}

TrainReport train(const ProblemSpec& problem, const FeatureBasis& basis,
                  const PolicyNetwork& initial, const Ensemble& x0, const NoiseBank& noise,
                  const TrainConfig& config, const TrainCallbacks& callbacks) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  TrainReport report;
  report.noise_hash = noise.hash();
  report.loss_curve.reserve(static_cast<std::size_t>(config.iterations));

  PolicyNetwork current = initial;
  report.best = initial;
  AdamState state(current.parameters().size());
  AdamHyper hyper = config.adam;
  const RolloutOptions options{.record = false, .detach_features = config.detach_features};

  long it = 0;
  try {
    for (; it < config.iterations; ++it) {
      if (noise.hash() != report.noise_hash)
        throw StateError("noise bank changed during training");
      const LossAndGrad lg = loss_and_grad(problem, basis, current, x0, noise, options);
      if (!std::isfinite(lg.loss)) throw TrainingError("non-finite loss", it);
      report.loss_curve.push_back(lg.loss);
      if (it == 0 || lg.loss < report.best_loss) {
        report.best_loss = lg.loss;
        report.best_iteration = it;
        report.best = current;
      }
      hyper.lr = config.schedule.rate(config.adam.lr, it, config.iterations);
      if (callbacks.on_log && config.log_every > 0 &&
          (it % config.log_every == 0 || it + 1 == config.iterations))
        callbacks.on_log(it, lg.loss, hyper.lr);
      Vector g = lg.gradient;
      if (config.weight_decay > 0.0) g += config.weight_decay * current.parameters();
      adam_step(current.parameters(), g, state, hyper);
      if (callbacks.on_checkpoint && config.checkpoint_every > 0 &&
          (it + 1) % config.checkpoint_every == 0)
        callbacks.on_checkpoint(it + 1, report.best);
    }
  } catch (const Error&) {
    if (callbacks.on_abort) callbacks.on_abort(it, report.best);
    throw;
  }
  report.initial_loss = report.loss_curve.front();
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

TrainReport train(const ProblemSpec& problem, const FeatureBasis& basis, const NetworkSpec& net,
                  const InitialLaw& law, const TrainConfig& config,
                  const TrainCallbacks& callbacks) {
  config.validate();
  const Ensemble x0 = sample_initial(law, problem.space, config.particles, config.seeds.init);
  const NoiseBank noise = generate_noise(config.particles, problem.horizon, problem.noise_dim,
                                         problem.noise, config.seeds.noise);
  const PolicyNetwork init = PolicyNetwork::initialize(net, config.seeds.weights);
  return train(problem, basis, init, x0, noise, config, callbacks);
}

EvalReport evaluate(const ProblemSpec& problem, const FeatureBasis& basis,
                    const PolicyNetwork& policy, const InitialLaw& law,
                    const EvalOptions& options) {
  if (options.replications < 1) throw ConfigError("evaluation replications must be >= 1");
  if (options.particles < 1) throw ConfigError("evaluation particles must be >= 1");
  EvalReport rep;
  Ensemble x0;
  for (int r = 0; r < options.replications; ++r) {
    if (r == 0 || options.resample_initial)
      x0 = sample_initial(law, problem.space, options.particles,
                          options.init_seed + (options.resample_initial ? r : 0));
    const NoiseBank noise = generate_noise(options.particles, problem.horizon, problem.noise_dim,
                                           problem.noise, options.noise_seed + r);
    const Trajectory traj =
        simulate(problem, basis, policy, x0, noise, RolloutOptions{.record = false});
    rep.costs.push_back(traj.cost);
    rep.terminal.push_back(traj.final_stats);
    rep.terminal_order.push_back(traj.final_stats.order_parameter());
  }
  const auto n = static_cast<Real>(rep.costs.size());
  Real sum = 0.0;
  for (Real c : rep.costs) sum += c;
  rep.mean = sum / n;
  Real ss = 0.0;
  for (Real c : rep.costs) ss += (c - rep.mean) * (c - rep.mean);
  rep.stddev = rep.costs.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  return rep;
}

namespace {

// Hidden-unit activity along the whole rollout, step by step.
std::vector<Matrix> rollout_pattern(const ProblemSpec& problem, const FeatureBasis& basis,
                                    const PolicyNetwork& policy, const Ensemble& x0,
                                    const NoiseBank& noise) {
  const Trajectory tr = simulate(problem, basis, policy, x0, noise);
  std::vector<Matrix> out;
  for (int j = 0; j < problem.horizon; ++j) {
    const auto layers = policy.activation_pattern(problem.context(j).time,
                                                  tr.states[static_cast<std::size_t>(j)],
                                                  tr.stats[static_cast<std::size_t>(j)].features);
    out.insert(out.end(), layers.begin(), layers.end());
  }
  return out;
}

}  // namespace

GradCheckReport grad_check(const ProblemSpec& problem, const FeatureBasis& basis,
                           const PolicyNetwork& policy, const Ensemble& x0,
                           const NoiseBank& noise, const GradCheckOptions& options) {
  if (!(options.h > 0.0)) throw ArgumentError("grad_check needs h > 0");
  const LossAndGrad full = loss_and_grad(problem, basis, policy, x0, noise);
  const LossAndGrad detached =
      loss_and_grad(problem, basis, policy, x0, noise, {.record = false, .detach_features = true});
  GradCheckReport rep;
  rep.feature_path_norm = (full.gradient - detached.gradient).norm();
  const Index n = policy.parameters().size();
  const Index count = options.max_params > 0 ? std::min(options.max_params, n) : n;
  PolicyNetwork probe = policy;
  const auto base_pattern = options.scheme == FdScheme::KinkFree
                                ? rollout_pattern(problem, basis, policy, x0, noise)
                                : std::vector<Matrix>{};
  for (Index c = 0; c < count; ++c) {
    const Index i = count == n ? c : (c * n) / count;
    const Real base = policy.parameters()(i);
    auto central = [&](Real h) {
      probe.parameters()(i) = base + h;
      const Real up = simulate(problem, basis, probe, x0, noise, {.record = false}).cost;
      probe.parameters()(i) = base - h;
      const Real down = simulate(problem, basis, probe, x0, noise, {.record = false}).cost;
      probe.parameters()(i) = base;
      return (up - down) / (2.0 * h);
    };
    const Real g = full.gradient(i);
    auto rel = [&](Real fd) {
      return std::abs(g - fd) / std::max({std::abs(g), std::abs(fd), options.floor});
    };
    Real err = 0.0;
    switch (options.scheme) {
      case FdScheme::Central:
        err = rel(central(options.h));
        break;
      case FdScheme::Richardson:
        err = rel((4.0 * central(0.5 * options.h) - central(options.h)) / 3.0);
        break;
      case FdScheme::StepLadder:
        err = std::numeric_limits<Real>::infinity();
        for (Real f : {0.1, 1.0, 10.0, 50.0}) err = std::min(err, rel(central(f * options.h)));
        break;
      case FdScheme::KinkFree: {
        auto pattern_at = [&](Real h) {
          probe.parameters()(i) = base + h;
          auto p = rollout_pattern(problem, basis, probe, x0, noise);
          probe.parameters()(i) = base;
          return p;
        };
        Real h = options.h;
        for (int shrink = 0; shrink < 12; ++shrink, h *= 0.25) {
          if (pattern_at(h) == base_pattern && pattern_at(-h) == base_pattern &&
              pattern_at(0.5 * h) == base_pattern && pattern_at(-0.5 * h) == base_pattern)
            break;
        }
        err = rel((4.0 * central(0.5 * h) - central(h)) / 3.0);
        break;
      }
    }
    if (err > rep.max_rel_error || rep.worst_index < 0) {
      rep.max_rel_error = std::max(rep.max_rel_error, err);
      rep.worst_index = i;
    }
    ++rep.checked;
  }
  return rep;
}

}  // namespace mfc
