#include "mfc/rollout.hpp"

#include <cmath>

namespace mfc {

void check_divergence(const StateSpace& space, const Matrix& x, int step, Real bound) {
  const bool euclid = !space.is_torus();
  for (Index i = 0; i < x.rows(); ++i) {
    const auto row = x.row(i);
    if (!row.allFinite()) throw NumericalError("non-finite particle state", step, i);
    if (euclid && row.norm() > bound) throw NumericalError("particle state diverged", step, i);
  }
}

TapeStep step_on_tape(const ProblemSpec& problem, const FeatureBasis& /*basis*/,
                      const PolicyNetwork& policy, const PolicyNetwork::Bound& bound, int step,
                      const ad::Var& x, const ad::Var& xi, const StatsVars& stats) {
  const StepContext ctx = problem.context(step);
  TapeStep out;
  out.stats = stats;
  out.controls = policy.forward(bound, ctx.time, x, stats.features);
  const ad::Var drift = problem.drift(ctx, x, stats, out.controls);
  const ad::Var sigma = problem.diffusion(ctx, x, stats, out.controls);
  ad::Var next = x + drift + ad::diffusion_apply(sigma, xi, problem.space.dim, problem.noise_dim);
  if (problem.space.is_torus()) next = ad::wrap_torus(next);
  out.next = next;
  out.running =
      ad::mean(problem.running_cost(ctx, x, stats, out.controls)) * problem.running_weight(step);
  return out;
}

ad::Var terminal_on_tape(const ProblemSpec& problem, const ad::Var& x, const StatsVars& stats) {
  if (!problem.terminal_cost) return x.tape().constant(0.0);
  return ad::mean(problem.terminal_cost(x, stats)) * problem.terminal_weight();
}

namespace {

void check_shapes(const ProblemSpec& problem, const FeatureBasis& basis,
                  const PolicyNetwork& policy, const Ensemble& x0, const NoiseBank& noise) {
  problem.validate();
  if (x0.dim() != problem.space.dim)
    throw ConfigError("initial ensemble has dimension " + std::to_string(x0.dim()) +
                      ", problem state dimension is " + std::to_string(problem.space.dim));
  if (x0.size() < 1) throw ConfigError("ensemble is empty");
  if (noise.particles() != x0.size())
    throw ConfigError("noise bank has " + std::to_string(noise.particles()) +
                      " particles, ensemble has " + std::to_string(x0.size()));
  if (noise.horizon() < problem.horizon)
    throw ConfigError("noise bank covers " + std::to_string(noise.horizon()) +
                      " steps, problem needs " + std::to_string(problem.horizon));
  if (noise.noise_dim() != problem.noise_dim)
    throw ConfigError("noise bank dimension does not match the problem");
  check_input_layout(policy.spec(), problem.space.dim, basis.size());
  if (policy.spec().control_dim != problem.control_dim)
    throw ConfigError("network control dimension does not match the problem");
  if (policy.spec().torus_state != problem.space.is_torus())
    throw ConfigError("network state embedding does not match the state space");
}

}  // namespace

StepOutput step(const ProblemSpec& problem, const FeatureBasis& basis, const PolicyNetwork& policy,
                const Ensemble& ens, const Matrix& xi) {
  ad::Tape tape;
  const auto bound = policy.bind(tape, false);
  const ad::Var x = tape.constant(ens.states);
  const StatsVars stats = stats_on_tape(basis, problem.space, x);
  const TapeStep s = step_on_tape(problem, basis, policy, bound, ens.step, x, tape.constant(xi), stats);
  StepOutput out;
  out.next = Ensemble{ens.step + 1, s.next.value()};
  out.controls = s.controls.value();
  out.stats = stats.values();
  return out;
}

Trajectory simulate(const ProblemSpec& problem, const FeatureBasis& basis,
                    const PolicyNetwork& policy, const Ensemble& x0, const NoiseBank& noise,
                    const RolloutOptions& options) {
  check_shapes(problem, basis, policy, x0, noise);
  Trajectory traj;
  Matrix x = x0.states;
  const int T = problem.horizon;
  if (options.record) {
    traj.states.reserve(T + 1);
    traj.controls.reserve(T);
    traj.stats.reserve(T + 1);
    traj.states.push_back(x);
  }
  for (int j = 0; j <= T; ++j) {
    ad::Tape tape;
    const ad::Var xv = tape.constant(x);
    const StatsVars stats = stats_on_tape(basis, problem.space, xv);
    if (options.record) traj.stats.push_back(stats.values());
    if (j == T) {
      traj.terminal = terminal_on_tape(problem, xv, stats).scalar();
      traj.final_stats = stats.values();
      traj.final_states = x;
      break;
    }
    const auto bound = policy.bind(tape, false);
    const TapeStep s =
        step_on_tape(problem, basis, policy, bound, j, xv, tape.constant(noise.column(j)), stats);
    const Real r = s.running.scalar();
    traj.running.push_back(r);
    traj.cost = j == 0 ? r : traj.cost + r;
    x = s.next.value();
    check_divergence(problem.space, x, j + 1, options.divergence_bound);
    if (options.record) {
      traj.controls.push_back(s.controls.value());
      traj.states.push_back(x);
    }
  }
  traj.cost = traj.cost + traj.terminal;
  return traj;
}

LossAndGrad loss_and_grad(const ProblemSpec& problem, const FeatureBasis& basis,
                          const PolicyNetwork& policy, const Ensemble& x0, const NoiseBank& noise,
                          const RolloutOptions& options) {
  check_shapes(problem, basis, policy, x0, noise);
  ad::Tape tape;
  const auto bound = policy.bind(tape, true);
  LossAndGrad out;
  Trajectory& traj = out.trajectory;
  const int T = problem.horizon;

  ad::Var x = tape.constant(x0.states);
  ad::Var loss;
  if (options.record) traj.states.push_back(x0.states);
  for (int j = 0; j <= T; ++j) {
    const StatsVars stats = stats_on_tape(basis, problem.space, x, options.detach_features);
    if (options.record) traj.stats.push_back(stats.values());
    if (j == T) {
      const ad::Var term = terminal_on_tape(problem, x, stats);
      traj.terminal = term.scalar();
      traj.final_stats = stats.values();
      traj.final_states = x.value();
      loss = loss + term;
      break;
    }
    const TapeStep s =
        step_on_tape(problem, basis, policy, bound, j, x, tape.constant(noise.column(j)), stats);
    traj.running.push_back(s.running.scalar());
    loss = j == 0 ? s.running : loss + s.running;
    check_divergence(problem.space, s.next.value(), j + 1, options.divergence_bound);
    if (options.record) {
      traj.controls.push_back(s.controls.value());
      traj.states.push_back(s.next.value());
    }
    x = s.next;
  }
  out.loss = loss.scalar();
  traj.cost = out.loss;
  tape.backward(loss);
  out.gradient = policy.gather_gradient(tape, bound);
  return out;
}

namespace {

StatsVars stats_constants(ad::Tape& tape, const MeasureStats& s) {
  StatsVars v;
  v.features = tape.constant(Matrix(s.features));
  v.mean = tape.constant(Matrix(s.mean));
  v.second_moment = tape.constant(s.second_moment);
  if (s.c1.size() > 0) {
    v.c1 = tape.constant(Matrix(s.c1));
    v.s1 = tape.constant(Matrix(s.s1));
  }
  return v;
}

}  // namespace

Real pathwise_cost(const ProblemSpec& problem, const Trajectory& traj) {
  const int T = problem.horizon;
  if (static_cast<int>(traj.states.size()) != T + 1 ||
      static_cast<int>(traj.controls.size()) != T ||
      static_cast<int>(traj.stats.size()) != T + 1)
    throw ArgumentError("pathwise_cost needs a fully recorded trajectory");
  Real cost = 0.0;
  for (int j = 0; j < T; ++j) {
    ad::Tape tape;
    const StatsVars st = stats_constants(tape, traj.stats[j]);
    const ad::Var l = problem.running_cost(problem.context(j), tape.constant(traj.states[j]), st,
                                           tape.constant(traj.controls[j]));
    const Real r = ad::mean(l).scalar() * problem.running_weight(j);
    cost = j == 0 ? r : cost + r;
  }
  ad::Tape tape;
  const StatsVars st = stats_constants(tape, traj.stats[T]);
  return cost + terminal_on_tape(problem, tape.constant(traj.states[T]), st).scalar();
}

ProbeRollout mean_field_rollout(const ProblemSpec& problem, const FeatureBasis& basis,
                                const PolicyNetwork& policy, const Ensemble& reference_x0,
                                const NoiseBank& reference_noise, const Ensemble& probe_x0,
                                const NoiseBank& probe_noise) {
  check_shapes(problem, basis, policy, reference_x0, reference_noise);
  check_shapes(problem, basis, policy, probe_x0, probe_noise);
  ProbeRollout out;
  out.reference = simulate(problem, basis, policy, reference_x0, reference_noise);
  const int T = problem.horizon;
  const Index M = probe_x0.size();
  Matrix xp = probe_x0.states;
  out.probe_states.push_back(xp);
  Vector cost = Vector::Zero(M);
  for (int j = 0; j <= T; ++j) {
    ad::Tape tape;
    const StatsVars st = stats_constants(tape, out.reference.stats[j]);
    const ad::Var xv = tape.constant(xp);
    if (j == T) {
      if (problem.terminal_cost) {
        const Matrix g = problem.terminal_cost(xv, st).value();
        cost.array() += problem.terminal_weight() * g.col(0).array().replicate(M / g.rows(), 1);
      }
      break;
    }
    const auto bound = policy.bind(tape, false);
    const TapeStep s =
        step_on_tape(problem, basis, policy, bound, j, xv, tape.constant(probe_noise.column(j)), st);
    const Matrix l =
        problem.running_cost(problem.context(j), xv, st, s.controls).value();
    cost.array() += problem.running_weight(j) * l.col(0).array().replicate(M / l.rows(), 1);
    xp = s.next.value();
    check_divergence(problem.space, xp, j + 1, RolloutOptions{}.divergence_bound);
    out.probe_states.push_back(xp);
  }
  out.probe_costs = std::move(cost);
  return out;
}

}  // namespace mfc
