#ifndef MFC_TRAINING_HPP
#define MFC_TRAINING_HPP

#include "mfc/adam.hpp"
#include "mfc/rollout.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace mfc {

enum class ScheduleKind { Constant, StepDecay };

std::string to_string(ScheduleKind kind);
ScheduleKind parse_schedule(const std::string& name);

struct LrSchedule {
  ScheduleKind kind = ScheduleKind::StepDecay;
  std::vector<Real> milestones{0.5, 0.75};  // fractions of the run
  Real factor = 0.5;

  Real rate(Real base, long iteration, long total) const;
};

struct Seeds {
  std::uint64_t noise = 1;
  std::uint64_t init = 2;
  std::uint64_t weights = 3;
};

struct TrainConfig {
  long iterations = 6000;
  Index particles = 2000;
  AdamHyper adam;
  LrSchedule schedule;
  Real weight_decay = 0.0;
  Seeds seeds;
  long checkpoint_every = 0;  // 0: final checkpoint only
  long log_every = 100;       // 0: silent
  bool detach_features = false;

  void validate() const;
};

struct TrainReport {
  std::vector<Real> loss_curve;  // loss before each update, one entry per iteration
  Real initial_loss = 0.0;
  Real best_loss = 0.0;  // L(theta*, X_0, xi)
  long best_iteration = 0;
  PolicyNetwork best;
  std::uint64_t noise_hash = 0;
  double wall_seconds = 0.0;
};

struct TrainCallbacks {
  std::function<void(long iteration, Real loss, Real lr)> on_log;
  std::function<void(long iteration, const PolicyNetwork& best)> on_checkpoint;
  // Called with the best parameters so far before a failed run rethrows.
  std::function<void(long iteration, const PolicyNetwork& last_good)> on_abort;
};

// Gradient descent on theta for one fixed (X_0, xi); the bank is never
// resampled. Returns the best iterate seen.
TrainReport train(const ProblemSpec& problem, const FeatureBasis& basis,
                  const PolicyNetwork& initial, const Ensemble& x0, const NoiseBank& noise,
                  const TrainConfig& config, const TrainCallbacks& callbacks = {});

// Samples X_0 from the law, the bank from the problem's noise law and the
// initial weights, each from its own seed, then trains.
TrainReport train(const ProblemSpec& problem, const FeatureBasis& basis,
                  const NetworkSpec& net, const InitialLaw& law, const TrainConfig& config,
                  const TrainCallbacks& callbacks = {});

struct EvalOptions {
  std::uint64_t noise_seed = 1001;
  std::uint64_t init_seed = 2;
  bool resample_initial = false;  // fresh X_0 per replication (init_seed + r)
  Index particles = 2000;
  int replications = 1;
};

struct EvalReport {
  std::vector<Real> costs;
  Real mean = 0.0;
  Real stddev = 0.0;  // sample standard deviation, 0 for one replication
  std::vector<MeasureStats> terminal;
  std::vector<Real> terminal_order;  // order parameter at T (torus only)
};

// R rollouts, replication r on the bank seeded with noise_seed + r.
EvalReport evaluate(const ProblemSpec& problem, const FeatureBasis& basis,
                    const PolicyNetwork& policy, const InitialLaw& law,
                    const EvalOptions& options);

struct GradCheckReport {
  Real max_rel_error = 0.0;
  Index worst_index = -1;
  Real feature_path_norm = 0.0;  // gradient share flowing through the features
  Index checked = 0;
};

enum class FdScheme {
  Central,     // (L(t+h) - L(t-h)) / 2h
  Richardson,  // (4 D(h/2) - D(h)) / 3 on central differences D, error O(h^4)
  // Central differences at h/10, h, 10h and 50h, keeping the best agreement
  // per parameter. Small steps lose to roundoff and large ones to ReLU kinks,
  // but a wrong gradient disagrees at every step.
  StepLadder,
  // Richardson, with the step shrunk until no hidden unit along the rollout
  // changes activity between the probe points. Exact up to O(h^4) on ReLU
  // networks, whose loss is smooth between kinks.
  KinkFree,
};

struct GradCheckOptions {
  FdScheme scheme = FdScheme::Central;
  Real h = 1e-5;
  Index max_params = 0;  // 0 checks every parameter, else this many spread evenly
  Real floor = 1e-8;     // denominator floor of the relative error
};

// Finite differences against the autodiff gradient, relative error
// |g - fd| / max(|g|, |fd|, floor) per parameter.
GradCheckReport grad_check(const ProblemSpec& problem, const FeatureBasis& basis,
                           const PolicyNetwork& policy, const Ensemble& x0,
                           const NoiseBank& noise, const GradCheckOptions& options = {});

}  // namespace mfc

#endif  // MFC_TRAINING_HPP
