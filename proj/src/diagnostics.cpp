#include "mfc/diagnostics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>

namespace mfc {

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(base) ^ a) ^ b);
}

std::pair<Real, Real> fit_line(const std::vector<Real>& x, const std::vector<Real>& y) {
  if (x.size() != y.size() || x.size() < 2) throw ArgumentError("fit_line needs two or more points");
  const Real n = static_cast<Real>(x.size());
  Real mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  Real sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  if (!(sxx > 0.0)) throw ArgumentError("fit_line needs distinct abscissae");
  const Real slope = sxy / sxx;
  return {slope, my - slope * mx};
}

namespace {

Real sample_stderr(const std::vector<Real>& v, Real mean) {
  if (v.size() < 2) return 0.0;
  Real ss = 0.0;
  for (Real x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<Real>(v.size() - 1) / static_cast<Real>(v.size()));
}

Real mean_of(const std::vector<Real>& v) {
  Real s = 0.0;
  for (Real x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<Real>(v.size());
}

Real ensemble_w1(const Matrix& a, const Matrix& b, std::uint64_t seed) {
  if (a.cols() == 1) return w1_distance_1d(a.col(0), b.col(0));
  return sliced_w1(a, b, 64, seed);
}

}  // namespace

PocStudyReport poc_study(const ProblemSpec& problem, const FeatureBasis& basis,
                         const PolicyNetwork& policy, const InitialLaw& law,
                         const PocOptions& options) {
  if (options.particles.empty()) throw ConfigError("poc study needs at least one particle count");
  for (std::size_t i = 1; i < options.particles.size(); ++i)
    if (options.particles[i] <= options.particles[i - 1])
      throw ConfigError("poc study particle counts must be strictly increasing");
  if (options.replications < 1) throw ConfigError("poc study needs at least one replication");
  const Index max_n = options.particles.back();
  const Index n_ref = options.reference_particles == 0 ? 10 * max_n : options.reference_particles;
  if (n_ref <= max_n)
    throw ConfigError("poc reference ensemble (" + std::to_string(n_ref) +
                      ") must be larger than the largest N (" + std::to_string(max_n) + ")");

  const int T = problem.horizon;
  const auto& space = problem.space;
  const std::uint64_t s = options.seed;
  const ProbeRollout ref = mean_field_rollout(
      problem, basis, policy, sample_initial(law, space, n_ref, derive_seed(s, 0, 1)),
      generate_noise(n_ref, T, problem.noise_dim, problem.noise, derive_seed(s, 0, 2)),
      sample_initial(law, space, n_ref, derive_seed(s, 0, 3)),
      generate_noise(n_ref, T, problem.noise_dim, problem.noise, derive_seed(s, 0, 4)));

  PocStudyReport report;
  report.reference_particles = n_ref;
  report.reference_cost = ref.probe_costs.mean();

  std::vector<Real> log_n, log_w;
  for (const Index n : options.particles) {
    PocRow row;
    row.particles = n;
    row.step_w1.assign(static_cast<std::size_t>(T + 1), 0.0);
    std::vector<Real> sups, gaps;
    for (int r = 0; r < options.replications; ++r) {
      const auto un = static_cast<std::uint64_t>(n);
      const auto ur = static_cast<std::uint64_t>(r);
      const Ensemble x0 = sample_initial(law, space, n, derive_seed(s, un, 2 * ur + 10));
      const NoiseBank xi =
          generate_noise(n, T, problem.noise_dim, problem.noise, derive_seed(s, un, 2 * ur + 11));
      const Trajectory traj = simulate(problem, basis, policy, x0, xi);
      Real sup = 0.0;
      for (int j = 0; j <= T; ++j) {
        const Real w = ensemble_w1(traj.states[static_cast<std::size_t>(j)],
                                   ref.probe_states[static_cast<std::size_t>(j)],
                                   derive_seed(s, un, 1000 + static_cast<std::uint64_t>(j)));
        row.step_w1[static_cast<std::size_t>(j)] += w / options.replications;
        sup = std::max(sup, w);
      }
      sups.push_back(sup);
      gaps.push_back(std::abs(traj.cost - report.reference_cost));
    }
    row.mean_w1 = mean_of(sups);
    row.stderr_w1 = sample_stderr(sups, row.mean_w1);
    row.mean_cost_gap = mean_of(gaps);
    log_n.push_back(std::log(static_cast<Real>(n)));
    log_w.push_back(std::log(row.mean_w1));
    report.rows.push_back(std::move(row));
  }
  if (report.rows.size() >= 2) std::tie(report.slope, report.intercept) = fit_line(log_n, log_w);
  return report;
}

ProbeObjective weighted_probe_cost(const ProblemSpec& problem, const FeatureBasis& basis,
                                   const PolicyNetwork& policy, const Ensemble& reference_x0,
                                   const NoiseBank& reference_noise, const Ensemble& probe_x0,
                                   const NoiseBank& probe_noise, const Vector& weights) {
  if (weights.size() != probe_x0.size())
    throw ArgumentError("one weight per probe particle is required");
  if (probe_noise.particles() != probe_x0.size() || reference_noise.particles() != reference_x0.size())
    throw ConfigError("noise banks do not match the ensembles");
  const int T = problem.horizon;
  ad::Tape tape;
  const auto bound = policy.bind(tape, true);
  const ad::Var w = tape.constant(Matrix(weights));
  ad::Var xr = tape.constant(reference_x0.states);
  ad::Var xp = tape.constant(probe_x0.states);
  ad::Var total = tape.constant(0.0);
  const Real bound_x = RolloutOptions{}.divergence_bound;
  for (int j = 0; j <= T; ++j) {
    const StatsVars st = stats_on_tape(basis, problem.space, xr);
    if (j == T) {
      if (problem.terminal_cost)
        total = total + ad::sum(problem.terminal_cost(xp, st) * w) * problem.terminal_weight();
      break;
    }
    const TapeStep sr =
        step_on_tape(problem, basis, policy, bound, j, xr, tape.constant(reference_noise.column(j)), st);
    const TapeStep sp =
        step_on_tape(problem, basis, policy, bound, j, xp, tape.constant(probe_noise.column(j)), st);
    const ad::Var l = problem.running_cost(problem.context(j), xp, st, sp.controls);
    total = total + ad::sum(l * w) * problem.running_weight(j);
    check_divergence(problem.space, sr.next.value(), j + 1, bound_x);
    check_divergence(problem.space, sp.next.value(), j + 1, bound_x);
    xr = sr.next;
    xp = sp.next;
  }
  ProbeObjective out;
  out.value = total.scalar();
  tape.backward(total);
  out.gradient = policy.gather_gradient(tape, bound);
  return out;
}

RademacherReport rademacher_estimate(const ProblemSpec& problem, const FeatureBasis& basis,
                                     const NetworkSpec& net, const InitialLaw& law,
                                     const RademacherOptions& options) {
  if (options.sigma_draws < 1 || options.starts < 1 || options.inner_iterations < 0)
    throw ConfigError("rademacher needs sigma_draws >= 1, starts >= 1, inner_iterations >= 0");
  if (options.reference_particles < 1) throw ConfigError("rademacher needs a reference ensemble");
  const int T = problem.horizon;
  const std::uint64_t s = options.seed;
  const Ensemble ref_x0 =
      sample_initial(law, problem.space, options.reference_particles, derive_seed(s, 0, 1));
  const NoiseBank ref_xi = generate_noise(options.reference_particles, T, problem.noise_dim,
                                          problem.noise, derive_seed(s, 0, 2));

  RademacherReport report;
  report.options = options;
  for (const Index n : options.particles) {
    const auto un = static_cast<std::uint64_t>(n);
    const Ensemble x0 = sample_initial(law, problem.space, n, derive_seed(s, un, 1));
    const NoiseBank xi = generate_noise(n, T, problem.noise_dim, problem.noise, derive_seed(s, un, 2));
    RademacherRow row;
    row.particles = n;
    for (int k = 0; k < options.sigma_draws; ++k) {
      std::mt19937_64 rng(derive_seed(s, un, 1000 + static_cast<std::uint64_t>(k)));
      Vector sigma(n);
      for (Index i = 0; i < n; ++i) sigma(i) = (rng() >> 63) ? 1.0 : -1.0;
      const Vector weights = sigma / static_cast<Real>(n);

      Real best = -std::numeric_limits<Real>::infinity();
      bool diverged = false;
      try {
        if (options.frozen_zero_output) {
          best = weighted_probe_cost(problem, basis, PolicyNetwork::zeros(net), ref_x0, ref_xi, x0,
                                     xi, weights)
                     .value;
        } else {
          for (int start = 0; start < options.starts; ++start) {
            PolicyNetwork policy =
                PolicyNetwork::initialize(net, options.weights_seed + static_cast<std::uint64_t>(start));
            AdamState state(policy.parameters().size());
            const AdamHyper hyper{options.lr, 0.9, 0.999, 1e-8};
            for (int it = 0;; ++it) {
              const ProbeObjective f =
                  weighted_probe_cost(problem, basis, policy, ref_x0, ref_xi, x0, xi, weights);
              if (!std::isfinite(f.value)) throw TrainingError("non-finite objective", it);
              best = std::max(best, f.value);
              if (it == options.inner_iterations) break;
              const Vector ascent = -f.gradient;
              adam_step(policy.parameters(), ascent, state, hyper);
            }
          }
        }
      } catch (const NumericalError&) {
        diverged = true;
      } catch (const TrainingError&) {
        diverged = true;
      }
      if (diverged) {
        ++row.discarded;
        continue;
      }
      row.draw_maxima.push_back(best);
    }
    if (row.draw_maxima.empty())
      throw TrainingError("every rademacher draw diverged at N=" + std::to_string(n), 0);
    row.estimate = mean_of(row.draw_maxima);
    row.stderr_estimate = sample_stderr(row.draw_maxima, row.estimate);
    report.rows.push_back(std::move(row));
  }
  return report;
}

std::vector<ConvergenceRow> value_convergence_study(const ProblemSpec& problem,
                                                    const FeatureBasis& basis,
                                                    const NetworkSpec& net, const InitialLaw& law,
                                                    const TrainConfig& config,
                                                    const std::vector<Index>& particles,
                                                    Real oracle) {
  if (particles.empty()) throw ConfigError("convergence study needs at least one particle count");
  std::vector<ConvergenceRow> rows;
  for (const Index n : particles) {
    TrainConfig c = config;
    c.particles = n;
    c.log_every = 0;
    const auto start = std::chrono::steady_clock::now();
    const TrainReport rep = train(problem, basis, net, law, c);
    ConvergenceRow row;
    row.particles = n;
    row.value = rep.best_loss;
    row.oracle = oracle;
    row.gap = std::abs(rep.best_loss - oracle);
    row.best_iteration = rep.best_iteration;
    row.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    rows.push_back(row);
  }
  return rows;
}

}  // namespace mfc
