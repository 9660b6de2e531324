#ifndef MFC_CONFIG_HPP
#define MFC_CONFIG_HPP

#include "mfc/problems.hpp"
#include "mfc/serialize.hpp"
#include "mfc/training.hpp"

#include <optional>
#include <string>
#include <vector>

namespace mfc {

struct PocConfig {
  std::vector<Index> particles{100, 200, 400, 800, 1600, 3200};
  int replications = 8;
  Index reference_particles = 0;  // 0: ten times the largest N
  std::uint64_t seed = 11;
  std::string policy = "random";  // "random" or "checkpoint"
};

struct RademacherConfig {
  std::vector<Index> particles{100, 1600};
  int sigma_draws = 20;
  int starts = 5;
  int inner_iterations = 200;
  Real lr = 0.01;
  Index reference_particles = 2000;
  std::uint64_t seed = 21;
  bool frozen_zero_output = false;
};

struct ConvergenceConfig {
  std::vector<Index> particles{250, 1000, 4000};
};

struct EvaluationConfig {
  EvalOptions options;
  std::optional<InitialLaw> law;  // falls back to the training law
};

/// A fully resolved run: the JSON with every default written out, and the
/// typed objects built from it.
struct RunConfig {
  Json resolved;
  std::string config_hash;
  std::string model_hash;
  std::string basis_hash;

  std::string problem_name;
  LqParams lq;
  KuramotoParams kuramoto;
  SystemicParams systemic;
  ProblemSpec problem;
  FeatureBasis basis;
  NetworkSpec network;
  InitialLaw initial_law;
  TrainConfig training;
  EvaluationConfig evaluation;
  PocConfig poc;
  RademacherConfig rademacher;
  ConvergenceConfig convergence;

  const InitialLaw& evaluation_law() const {
    return evaluation.law ? *evaluation.law : initial_law;
  }
  // Continuous-time value of the training law, for problems with an oracle.
  std::optional<Real> oracle_value() const;
};

// Every key of a run configuration with its default for a builtin problem.
Json default_config(const std::string& problem);

// Merges the user document over the defaults, rejecting unknown keys and
// mistyped values with a ConfigError that names the offending path.
RunConfig resolve_config(const Json& user);
RunConfig load_config(const std::string& path);
Json read_json_file(const std::string& path);

// Builds the typed law from a resolved initial-law section.
InitialLaw parse_initial_law(const Json& j, const StateSpace& space, const std::string& path);

}  // namespace mfc

#endif  // MFC_CONFIG_HPP
