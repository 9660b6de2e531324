#ifndef MFC_ROLLOUT_HPP
#define MFC_ROLLOUT_HPP

#include "mfc/network.hpp"
#include "mfc/problem.hpp"

#include <vector>

namespace mfc {

struct RolloutOptions {
  bool record = true;            // keep states, controls and statistics
  bool detach_features = false;  // stop gradients through the feature map
  Real divergence_bound = 1e6;   // Euclidean |x| beyond this aborts the rollout
};

/// One coupled N-particle path and its cost.
struct Trajectory {
  std::vector<Matrix> states;         // T+1 blocks, N x d
  std::vector<Matrix> controls;       // T blocks, N x control_dim
  std::vector<MeasureStats> stats;    // T+1 entries
  std::vector<Real> running;          // weighted mean running cost per step
  Real terminal = 0.0;                // weighted mean terminal cost
  Real cost = 0.0;                    // running sum, then + terminal
  Matrix final_states;                // X_T, kept even when not recording
  MeasureStats final_stats;

  int horizon() const { return static_cast<int>(running.size()); }
};

struct StepOutput {
  Ensemble next;
  Matrix controls;
  MeasureStats stats;  // of the input ensemble
};

// Tape-level pieces of a step, for callers composing their own graphs.
struct TapeStep {
  ad::Var next;
  ad::Var controls;
  StatsVars stats;
  ad::Var running;  // 1 x 1, weighted mean running cost
};

TapeStep step_on_tape(const ProblemSpec& problem, const FeatureBasis& basis,
                      const PolicyNetwork& policy, const PolicyNetwork::Bound& bound, int step,
                      const ad::Var& x, const ad::Var& xi, const StatsVars& stats);

// Weighted mean terminal cost (1 x 1); zero when the problem has no G.
ad::Var terminal_on_tape(const ProblemSpec& problem, const ad::Var& x, const StatsVars& stats);

// One Euler-Maruyama step of the whole ensemble.
StepOutput step(const ProblemSpec& problem, const FeatureBasis& basis, const PolicyNetwork& policy,
                const Ensemble& ens, const Matrix& xi);

// Forward rollout without gradients. Throws NumericalError on a non-finite
// or exploding state.
Trajectory simulate(const ProblemSpec& problem, const FeatureBasis& basis,
                    const PolicyNetwork& policy, const Ensemble& x0, const NoiseBank& noise,
                    const RolloutOptions& options = {});

struct LossAndGrad {
  Real loss = 0.0;
  Vector gradient;
  Trajectory trajectory;  // filled when options.record is set
};

// The training objective on one fixed (X_0, xi) and its exact gradient in
// the network parameters, by one reverse sweep through the coupled rollout.
LossAndGrad loss_and_grad(const ProblemSpec& problem, const FeatureBasis& basis,
                          const PolicyNetwork& policy, const Ensemble& x0, const NoiseBank& noise,
                          const RolloutOptions& options = {.record = false});

// Recomputes the cost of a recorded trajectory from its states, controls and
// statistics alone.
Real pathwise_cost(const ProblemSpec& problem, const Trajectory& traj);

/// Probe particles driven by a reference ensemble's empirical measure: the
/// probes feel mu^N of the reference but do not enter it.
struct ProbeRollout {
  Trajectory reference;
  std::vector<Matrix> probe_states;  // T+1 blocks, M x d
  Vector probe_costs;                // per-probe discounted cost, M entries
};

ProbeRollout mean_field_rollout(const ProblemSpec& problem, const FeatureBasis& basis,
                                const PolicyNetwork& policy, const Ensemble& reference_x0,
                                const NoiseBank& reference_noise, const Ensemble& probe_x0,
                                const NoiseBank& probe_noise);

// Throws NumericalError (step, particle) for a non-finite or, on Euclidean
// spaces, out-of-bound row.
void check_divergence(const StateSpace& space, const Matrix& x, int step, Real bound);

}  // namespace mfc

#endif  // MFC_ROLLOUT_HPP
