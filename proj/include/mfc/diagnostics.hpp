#ifndef MFC_DIAGNOSTICS_HPP
#define MFC_DIAGNOSTICS_HPP

#include "mfc/training.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace mfc {

// Independent stream seed for (base, a, b), by SplitMix64 mixing.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0);

// ----- propagation of chaos --------------------------------------------------

struct PocOptions {
  std::vector<Index> particles{100, 200, 400, 800, 1600, 3200};
  int replications = 8;
  Index reference_particles = 0;  // 0: ten times the largest N
  std::uint64_t seed = 11;
};

struct PocRow {
  Index particles = 0;
  Real mean_w1 = 0.0;            // replication mean of sup_j W1(mu^N_j, reference_j)
  Real stderr_w1 = 0.0;
  std::vector<Real> step_w1;     // replication mean of W1 at each step j
  Real mean_cost_gap = 0.0;      // replication mean of |J^N - J_ref|
};

struct PocStudyReport {
  std::vector<PocRow> rows;
  Index reference_particles = 0;
  Real reference_cost = 0.0;  // mean probe cost under the reference measure
  Real slope = 0.0;           // least-squares fit of log mean W1 on log N
  Real intercept = 0.0;
};

// The policy is held fixed. The law of X_j is proxied by as many probe
// particles as the reference ensemble, each driven by the reference
// ensemble's empirical measure but never feeding back into it.
PocStudyReport poc_study(const ProblemSpec& problem, const FeatureBasis& basis,
                         const PolicyNetwork& policy, const InitialLaw& law,
                         const PocOptions& options);

// Least-squares slope and intercept of y on x.
std::pair<Real, Real> fit_line(const std::vector<Real>& x, const std::vector<Real>& y);

// ----- Rademacher complexity --------------------------------------------------

struct RademacherOptions {
  std::vector<Index> particles{100, 1600};
  int sigma_draws = 20;
  int starts = 5;
  int inner_iterations = 200;
  Real lr = 0.01;
  Index reference_particles = 2000;
  std::uint64_t seed = 21;
  std::uint64_t weights_seed = 3;  // start s uses weights_seed + s
  bool frozen_zero_output = false;
};

struct RademacherRow {
  Index particles = 0;
  Real estimate = 0.0;  // mean over kept draws of the inner maximum
  Real stderr_estimate = 0.0;
  std::vector<Real> draw_maxima;
  int discarded = 0;  // draws whose inner ascent diverged
};

/// Lower-bound estimates of the empirical Rademacher complexity of the cost
/// class: E_sigma sup_theta (1/N) sum_i sigma_i J_i(theta), with the supremum
/// approximated by multi-start Adam ascent.
struct RademacherReport {
  std::vector<RademacherRow> rows;
  RademacherOptions options;
};

RademacherReport rademacher_estimate(const ProblemSpec& problem, const FeatureBasis& basis,
                                     const NetworkSpec& net, const InitialLaw& law,
                                     const RademacherOptions& options);

struct ProbeObjective {
  Real value = 0.0;
  Vector gradient;
};

// sum_i w_i J_i(theta) over probe particles driven by the reference
// ensemble's measure, with its gradient. Reference and probes share one
// tape, so theta also acts through the reference measure.
ProbeObjective weighted_probe_cost(const ProblemSpec& problem, const FeatureBasis& basis,
                                   const PolicyNetwork& policy, const Ensemble& reference_x0,
                                   const NoiseBank& reference_noise, const Ensemble& probe_x0,
                                   const NoiseBank& probe_noise, const Vector& weights);

// ----- value convergence ---------------------------------------------------------

struct ConvergenceRow {
  Index particles = 0;
  Real value = 0.0;  // trained L(theta*, X_0, xi)
  Real oracle = 0.0;
  Real gap = 0.0;    // |value - oracle|
  long best_iteration = 0;
  double wall_seconds = 0.0;
};

std::vector<ConvergenceRow> value_convergence_study(const ProblemSpec& problem,
                                                    const FeatureBasis& basis,
                                                    const NetworkSpec& net, const InitialLaw& law,
                                                    const TrainConfig& config,
                                                    const std::vector<Index>& particles,
                                                    Real oracle);

}  // namespace mfc

#endif  // MFC_DIAGNOSTICS_HPP
