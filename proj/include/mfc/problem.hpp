#ifndef MFC_PROBLEM_HPP
#define MFC_PROBLEM_HPP

#include "mfc/autodiff.hpp"
#include "mfc/core.hpp"
#include "mfc/features.hpp"

#include <functional>
#include <string>

namespace mfc {

struct StepContext {
  int step = 0;
  Real dt = 1.0;
  Real time = 0.0;  // step * dt
};

// Model functions act on a whole ensemble at once: x is N x d, a is
// N x control_dim, and the statistics are those of the current empirical
// measure. Results may be 1-row when they do not depend on the particle.
using DriftFn = std::function<ad::Var(const StepContext&, const ad::Var& x, const StatsVars&,
                                      const ad::Var& a)>;
// Per-particle d x m matrices flattened row-major: N x (d*m) or 1 x (d*m).
using DiffusionFn = std::function<ad::Var(const StepContext&, const ad::Var& x, const StatsVars&,
                                          const ad::Var& a)>;
// Unweighted per-particle running cost, N x 1 (or 1 x 1).
using RunningCostFn = std::function<ad::Var(const StepContext&, const ad::Var& x,
                                            const StatsVars&, const ad::Var& a)>;
using TerminalCostFn = std::function<ad::Var(const ad::Var& x, const StatsVars&)>;

/// One discrete-time mean-field control problem:
///   X_{j+1} = X_j + b(j, X_j, mu_j, a) + sigma(j, X_j, mu_j, a) xi_j
/// with cost sum_j e^{-beta j dt} dt <l> + w_T <G>, where <.> averages over
/// particles. b already contains the dt factor.
struct ProblemSpec {
  std::string name;
  StateSpace space;
  int control_dim = 1;
  int noise_dim = 1;
  int horizon = 1;  // number of steps T
  Real dt = 1.0;
  Real discount = 0.0;            // beta
  bool infinite_horizon = false;  // terminal weight e^{-beta T dt} instead of 1
  NoiseLaw noise;

  DriftFn drift;
  DiffusionFn diffusion;
  RunningCostFn running_cost;
  TerminalCostFn terminal_cost;  // empty means G = 0

  Real running_weight(int step) const;
  Real terminal_weight() const;
  StepContext context(int step) const { return {step, dt, step * dt}; }

  // Throws ConfigError on inconsistent fields.
  void validate() const;
};

}  // namespace mfc

#endif  // MFC_PROBLEM_HPP
