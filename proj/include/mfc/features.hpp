#ifndef MFC_FEATURES_HPP
#define MFC_FEATURES_HPP

#include "mfc/autodiff.hpp"
#include "mfc/core.hpp"

#include <cstdint>
#include <vector>

namespace mfc {

enum class BasisKind { PolynomialMoments, FourierModes };

/// A finite slice (g_1, ..., g_m) of a separating class. The network sees the
/// empirical averages (1/N) sum_i g_l(x_i).
///
/// Polynomial features are monomials prod_k x_k^{e_k}, divided by prod_k e_k!
/// when factorial scaling is on. Fourier features come in (cos, sin) pairs per
/// integer mode l, evaluated at l . x on the 2pi-periodic torus.
class FeatureBasis {
 public:
  // Every exponent vector with entries in [0, max_degree] and at least one
  // nonzero entry when cross_moments is set; otherwise pure powers per axis.
  static FeatureBasis polynomial(int dim, int max_degree, bool cross_moments = false,
                                 bool factorial_scaling = true);
  // Explicit exponent vectors (each nonzero, no duplicates).
  static FeatureBasis monomials(int dim, std::vector<std::vector<int>> exponents,
                                bool factorial_scaling = true);
  static FeatureBasis fourier(int dim, std::vector<std::vector<int>> modes);
  // Modes +-1..+-max_mode along the first axis (so 4 * max_mode features).
  static FeatureBasis fourier_symmetric(int dim, int max_mode);

  BasisKind kind() const { return kind_; }
  int dim() const { return dim_; }
  int size() const;
  bool factorial_scaling() const { return factorial_; }
  // Exponent vectors (polynomial) or modes (Fourier).
  const std::vector<std::vector<int>>& indices() const { return indices_; }

  // g_l(x_i) for every row: N x size().
  Matrix evaluate(const Matrix& x) const;

  // Empirical averages, 1 x size().
  RowVector average(const Matrix& x) const;

  // Row i of the result is (1/N) sum_l w_l grad g_l(x_i): the pullback of a
  // feature-space covector onto the particles.
  Matrix pullback(const Matrix& x, const RowVector& w) const;

  // Checks the basis against a state space; mismatched kinds throw unless
  // allow_override is set, in which case a warning goes to stderr.
  void check_compatible(const StateSpace& space, bool allow_override = false) const;

 private:
  BasisKind kind_ = BasisKind::PolynomialMoments;
  int dim_ = 1;
  std::vector<std::vector<int>> indices_;
  std::vector<Real> scale_;
  bool factorial_ = true;
};

/// Empirical-measure summary for one ensemble.
struct MeasureStats {
  RowVector features;      // 1 x m(K)
  RowVector mean;          // 1 x d
  Real second_moment = 0;  // (1/N) sum |x_i|^2
  RowVector c1, s1;        // per-axis first Fourier moments; empty off the torus

  Real variance() const { return second_moment - mean.squaredNorm(); }
  // r = sqrt(C1^2 + S1^2) on the first axis.
  Real order_parameter() const;
};

/// Differentiable counterpart of MeasureStats on a tape.
struct StatsVars {
  ad::Var features;
  ad::Var mean;
  ad::Var second_moment;
  ad::Var c1, s1;

  ad::Var variance() const;
  MeasureStats values() const;
};

// Statistics of the rows of x. When detach_features is set, the feature
// vector carries no gradient back to the particles (the raw moments still do).
StatsVars stats_on_tape(const FeatureBasis& basis, const StateSpace& space, const ad::Var& x,
                        bool detach_features = false);

// Feature vector node alone.
ad::Var feature_node(const FeatureBasis& basis, const ad::Var& x);

MeasureStats compute_features(const FeatureBasis& basis, const StateSpace& space,
                              const Ensemble& ens);

// Phi(mu) = -1/2 (C1^2 + S1^2), the Kuramoto interaction potential.
Real kuramoto_potential(const MeasureStats& stats);
ad::Var kuramoto_potential(const StatsVars& stats);

// Exact W1 between two 1-d empirical measures by the quantile coupling.
Real w1_distance_1d(std::vector<Real> a, std::vector<Real> b);

template <typename DerivedA, typename DerivedB>
Real w1_distance_1d(const Eigen::DenseBase<DerivedA>& a, const Eigen::DenseBase<DerivedB>& b) {
  std::vector<Real> va(static_cast<std::size_t>(a.size())), vb(static_cast<std::size_t>(b.size()));
  for (Index i = 0; i < a.size(); ++i) va[static_cast<std::size_t>(i)] = a.derived().coeff(i);
  for (Index i = 0; i < b.size(); ++i) vb[static_cast<std::size_t>(i)] = b.derived().coeff(i);
  return w1_distance_1d(std::move(va), std::move(vb));
}

// Average 1-d W1 over random unit projections (rows are samples). On
// one-dimensional input this is exactly w1_distance_1d.
Real sliced_w1(const Matrix& a, const Matrix& b, int n_projections, std::uint64_t seed);

}  // namespace mfc

#endif  // MFC_FEATURES_HPP
