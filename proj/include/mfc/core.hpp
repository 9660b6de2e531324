#ifndef MFC_CORE_HPP
#define MFC_CORE_HPP

#include "mfc/common.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace mfc {

enum class SpaceKind { Euclidean, Torus };

/// State space E: R^d or the flat torus [0, 2pi)^d.
struct StateSpace {
  SpaceKind kind = SpaceKind::Euclidean;
  int dim = 1;

  static StateSpace euclidean(int d);
  static StateSpace torus(int d);

  bool is_torus() const { return kind == SpaceKind::Torus; }
  bool operator==(const StateSpace&) const = default;
};

std::string to_string(SpaceKind kind);

/// Reduces torus coordinates into [0, 2pi). Identity on Euclidean spaces.
Matrix canonicalize(const StateSpace& space, const Matrix& states);

// Scalar wrap used by canonicalize and the autodiff wrap op.
Real wrap_angle(Real x);

struct Ensemble {
  int step = 0;
  Matrix states;  // N x d, row = particle

  Index size() const { return states.rows(); }
  int dim() const { return static_cast<int>(states.cols()); }
};

// Throws NumericalError naming the first offending particle.
void check_finite(const Ensemble& ens);

enum class NoiseKind { Gaussian, Uniform };

/// Noise law gamma. Gaussian draws have standard deviation sqrt(dt); the
/// optional truncation clips at k*sqrt(dt). Uniform draws are on [-bound, bound].
struct NoiseLaw {
  NoiseKind kind = NoiseKind::Gaussian;
  Real dt = 1.0;
  std::optional<Real> truncate_k;
  Real bound = 1.0;

  static NoiseLaw gaussian(Real dt, std::optional<Real> truncate_k = std::nullopt);
  static NoiseLaw uniform(Real bound);
};

/// The noise tensor xi, fixed for a whole training run. Stored step-major as
/// T matrices of shape N x m so that a step reads one contiguous block.
class NoiseBank {
 public:
  NoiseBank() = default;
  NoiseBank(std::vector<Matrix> steps, std::uint64_t seed, NoiseLaw law);

  Index particles() const { return steps_.empty() ? 0 : steps_.front().rows(); }
  int horizon() const { return static_cast<int>(steps_.size()); }
  int noise_dim() const { return steps_.empty() ? 0 : static_cast<int>(steps_.front().cols()); }
  std::uint64_t seed() const { return seed_; }
  const NoiseLaw& law() const { return law_; }

  const Matrix& column(int step) const { return steps_.at(static_cast<std::size_t>(step)); }

  // FNV-1a over the raw bytes; used to assert the single-bank contract.
  std::uint64_t hash() const;

  // Reorders particles: row i of the result is row perm[i] of this bank.
  NoiseBank permuted(const std::vector<Index>& perm) const;

 private:
  std::vector<Matrix> steps_;
  std::uint64_t seed_ = 0;
  NoiseLaw law_;
};

NoiseBank generate_noise(Index n, int horizon, int noise_dim, const NoiseLaw& law,
                         std::uint64_t seed);

struct GaussianDiag {
  Vector mean;
  Vector var;
};
struct UniformTorus {};
struct TwoClusterTorus {
  std::vector<Real> centers{0.0, std::numbers::pi};
  Real concentration = 10.0;  // inverse variance of each wrapped Gaussian bump
};
struct EmpiricalLaw {
  std::string path;
  Matrix points;  // loaded rows; sampled with replacement
};
struct PointMass {
  Vector x;
};

using InitialLaw = std::variant<GaussianDiag, UniformTorus, TwoClusterTorus, EmpiricalLaw, PointMass>;

std::string describe(const InitialLaw& law);

// Reads whitespace- or comma-separated rows; '#' starts a comment.
Matrix load_points(const std::string& path);

Ensemble sample_initial(const InitialLaw& law, const StateSpace& space, Index n,
                        std::uint64_t seed);

}  // namespace mfc

#endif  // MFC_CORE_HPP
