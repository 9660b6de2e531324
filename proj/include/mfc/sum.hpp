#ifndef MFC_SUM_HPP
#define MFC_SUM_HPP

#include "mfc/common.hpp"

#include <cmath>

namespace mfc {

// Order-independent summation. Every term is rounded onto a fixed-point grid
// anchored at the largest magnitude (which does not depend on order) and the
// integers are accumulated exactly in 128 bits, so any permutation of the
// input gives the same bits. Per-term rounding is at most max|x| * 2^-62.
template <typename Derived>
Real reproducible_sum(const Eigen::DenseBase<Derived>& x) {
  const Index n = x.size();
  if (n == 0) return 0.0;
  if (!x.derived().allFinite()) return x.sum();  // let NaN/Inf propagate
  const Real peak = x.derived().cwiseAbs().maxCoeff();
  if (peak == 0.0) return 0.0;
  const int shift = 61 - std::ilogb(peak);
  __int128 acc = 0;
  if (shift < 1000) {
    // Scaling by a power of two is exact, so this equals ldexp per term.
    const Real scale = std::ldexp(1.0, shift);
    for (Index i = 0; i < n; ++i)
      acc += static_cast<long long>(std::nearbyint(x.derived().coeff(i) * scale));
  } else {
    for (Index i = 0; i < n; ++i)
      acc += static_cast<long long>(std::nearbyint(std::ldexp(x.derived().coeff(i), shift)));
  }
  return std::ldexp(static_cast<Real>(acc), -shift);
}

template <typename Derived>
Real reproducible_mean(const Eigen::DenseBase<Derived>& x) {
  return reproducible_sum(x) / static_cast<Real>(x.size());
}

// Per-column reproducible mean of a particle-major matrix, as a row vector.
template <typename Derived>
RowVector column_mean(const Eigen::MatrixBase<Derived>& m) {
  RowVector out(m.cols());
  for (Index c = 0; c < m.cols(); ++c) out(c) = reproducible_mean(m.col(c));
  return out;
}

}  // namespace mfc

#endif  // MFC_SUM_HPP
