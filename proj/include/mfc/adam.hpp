#ifndef MFC_ADAM_HPP
#define MFC_ADAM_HPP

#include "mfc/common.hpp"

#include <cmath>

namespace mfc {

struct AdamHyper {
  Real lr = 1e-3;
  Real beta1 = 0.9;
  Real beta2 = 0.999;
  Real eps = 1e-8;
};

struct AdamState {
  Vector m;
  Vector v;
  long t = 0;

  explicit AdamState(Index n = 0) : m(Vector::Zero(n)), v(Vector::Zero(n)) {}
};

// One bias-corrected Adam update of theta along -g. Throws TrainingError
// (tagged with the step about to be taken) on a non-finite gradient.
template <typename DerivedTheta, typename DerivedGrad>
void adam_step(Eigen::MatrixBase<DerivedTheta>& theta, const Eigen::MatrixBase<DerivedGrad>& g,
               AdamState& state, const AdamHyper& hyper) {
  if (theta.size() != g.size() || state.m.size() != g.size())
    throw ArgumentError("adam_step: parameter, gradient and state sizes differ");
  if (!g.allFinite()) throw TrainingError("non-finite gradient", state.t + 1);
  state.t += 1;
  state.m = hyper.beta1 * state.m + (1.0 - hyper.beta1) * g;
  state.v = hyper.beta2 * state.v + (1.0 - hyper.beta2) * g.cwiseAbs2();
  const Real c1 = 1.0 - std::pow(hyper.beta1, static_cast<Real>(state.t));
  const Real c2 = 1.0 - std::pow(hyper.beta2, static_cast<Real>(state.t));
  theta -= (hyper.lr * (state.m.array() / c1) /
            ((state.v.array() / c2).sqrt() + hyper.eps))
               .matrix();
}

}  // namespace mfc

#endif  // MFC_ADAM_HPP
