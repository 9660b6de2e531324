#include "mfc/autodiff.hpp"

#include <gtest/gtest.h>

#include <functional>
#include <random>

using namespace mfc;
using ad::Tape;
using ad::Var;

namespace {

using Fn = std::function<Var(Tape&, const std::vector<Var>&)>;

Matrix random_matrix(Index r, Index c, std::mt19937_64& rng, Real lo = -1.5, Real hi = 1.5) {
  std::uniform_real_distribution<Real> u(lo, hi);
  Matrix m(r, c);
  for (Index i = 0; i < m.size(); ++i) m(i) = u(rng);
  return m;
}

Real evaluate(const Fn& f, const std::vector<Matrix>& inputs) {
  Tape tape;
  std::vector<Var> vars;
  for (const auto& m : inputs) vars.push_back(tape.constant(m));
  return f(tape, vars).scalar();
}

// Max error of the reverse-mode gradient against Richardson-extrapolated
// central differences over every input entry, relative to max(|g|, 1).
Real gradient_error(const Fn& f, const std::vector<Matrix>& inputs, Real h = 1e-3) {
  Tape tape;
  std::vector<Var> vars;
  for (const auto& m : inputs) vars.push_back(tape.variable(m));
  const Var out = f(tape, vars);
  tape.backward(out);
  Real worst = 0.0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const Matrix g = tape.grad(vars[k]);
    EXPECT_EQ(g.rows(), inputs[k].rows());
    EXPECT_EQ(g.cols(), inputs[k].cols());
    for (Index i = 0; i < inputs[k].size(); ++i) {
      auto central = [&](Real step) {
        auto up = inputs;
        auto down = inputs;
        up[k](i) += step;
        down[k](i) -= step;
        return (evaluate(f, up) - evaluate(f, down)) / (2.0 * step);
      };
      const Real fd = (4.0 * central(0.5 * h) - central(h)) / 3.0;
      worst = std::max(worst, std::abs(fd - g(i)) / std::max(std::abs(g(i)), 1.0));
    }
  }
  return worst;
}

class OpGradient : public ::testing::Test {
 protected:
  std::mt19937_64 rng{123};
};

}  // namespace

TEST_F(OpGradient, ElementwiseUnaryOps) {
  const Matrix a = random_matrix(4, 3, rng);
  for (auto op : std::vector<Fn>{
           [](Tape&, const std::vector<Var>& v) { return ad::sum(ad::square(v[0])); },
           [](Tape&, const std::vector<Var>& v) { return ad::sum(ad::sin(v[0])); },
           [](Tape&, const std::vector<Var>& v) { return ad::sum(ad::cos(v[0])); },
           [](Tape&, const std::vector<Var>& v) { return ad::sum(ad::exp(v[0])); },
           [](Tape&, const std::vector<Var>& v) { return ad::sum(ad::tanh(v[0])); },
           [](Tape&, const std::vector<Var>& v) { return ad::sum(ad::soft_clamp(v[0], 0.7)); },
           [](Tape&, const std::vector<Var>& v) { return ad::sum(-v[0] * 2.0 + 1.0); },
       })
    EXPECT_LT(gradient_error(op, {a}), 1e-8);
}

TEST_F(OpGradient, ReluAwayFromKink) {
  Matrix a = random_matrix(5, 2, rng);
  for (Index i = 0; i < a.size(); ++i)
    if (std::abs(a(i)) < 0.1) a(i) = 0.5;
  EXPECT_LT(gradient_error([](Tape&, const std::vector<Var>& v) { return ad::sum(ad::relu(v[0])); },
                           {a}),
            1e-8);
}

TEST_F(OpGradient, BroadcastingBinaryOps) {
  const Matrix a = random_matrix(4, 3, rng);
  const Matrix row = random_matrix(1, 3, rng);
  const Matrix s = random_matrix(1, 1, rng);
  const Fn f = [](Tape&, const std::vector<Var>& v) {
    return ad::sum(ad::square((v[0] + v[1]) * v[2] - v[1] * v[0]));
  };
  EXPECT_LT(gradient_error(f, {a, row, s}), 1e-8);
}

TEST_F(OpGradient, MatmulDenseAndReductions) {
  const Matrix x = random_matrix(6, 3, rng);
  const Matrix w = random_matrix(3, 4, rng);
  const Matrix b = random_matrix(1, 4, rng);
  for (auto act : {ad::Activation::Identity, ad::Activation::Tanh}) {
    const Fn f = [act](Tape&, const std::vector<Var>& v) {
      const Var h = ad::dense(v[0], v[1], v[2], act);
      return ad::sum(ad::square(ad::col_mean(h))) + ad::mean(ad::row_sum(h)) +
             ad::sum(ad::matmul(v[0], v[1]));
    };
    EXPECT_LT(gradient_error(f, {x, w, b}), 1e-8);
  }
}

TEST_F(OpGradient, ConcatAndSlices) {
  const Matrix a = random_matrix(3, 2, rng);
  const Matrix b = random_matrix(3, 1, rng);
  const Fn f = [](Tape&, const std::vector<Var>& v) {
    const Var c = ad::concat_cols({v[0], v[1]});
    return ad::sum(ad::square(ad::slice_cols(c, 1, 2))) +
           ad::sum(ad::sin(ad::slice_rows(c, 1, 2)));
  };
  EXPECT_LT(gradient_error(f, {a, b}), 1e-8);
}

TEST_F(OpGradient, DiffusionApplyPerParticleAndShared) {
  const int d = 2, m = 3;
  const Matrix xi = random_matrix(5, m, rng);
  const Matrix sig = random_matrix(5, d * m, rng);
  const Matrix shared = random_matrix(1, d * m, rng);
  const Fn f = [](Tape&, const std::vector<Var>& v) {
    return ad::sum(ad::square(ad::diffusion_apply(v[0], v[1], 2, 3)));
  };
  EXPECT_LT(gradient_error(f, {sig, xi}), 1e-8);
  EXPECT_LT(gradient_error(f, {shared, xi}), 1e-8);

  Tape tape;
  const Matrix out = ad::diffusion_apply(tape.constant(sig), tape.constant(xi), d, m).value();
  for (Index i = 0; i < 5; ++i)
    for (int r = 0; r < d; ++r) {
      Real expect = 0.0;
      for (int c = 0; c < m; ++c) expect += sig(i, r * m + c) * xi(i, c);
      EXPECT_NEAR(out(i, r), expect, 1e-15);
    }
}

TEST_F(OpGradient, WrapTorusPassesGradientThrough) {
  const Matrix a = random_matrix(4, 1, rng, 0.5, 5.5);
  const Fn f = [](Tape&, const std::vector<Var>& v) { return ad::sum(ad::wrap_torus(v[0] * 3.0)); };
  EXPECT_LT(gradient_error(f, {a}, 1e-7), 1e-6);
}

TEST(Tape, SecondBackwardIsAStateError) {
  Tape tape;
  const Var x = tape.variable(Matrix::Ones(2, 2));
  const Var y = ad::sum(ad::square(x));
  tape.backward(y);
  EXPECT_THROW(tape.backward(y), StateError);
  tape.reset();
  const Var z = ad::sum(tape.variable(Matrix::Ones(1, 1)));
  EXPECT_NO_THROW(tape.backward(z));
}

TEST(Tape, BackwardNeedsScalar) {
  Tape tape;
  const Var x = tape.variable(Matrix::Ones(2, 2));
  EXPECT_THROW(tape.backward(ad::square(x)), Error);
}

TEST(Tape, DetachStopsGradient) {
  Tape tape;
  const Var x = tape.variable(Matrix::Constant(1, 1, 2.0));
  const Var y = x * ad::detach(x);
  tape.backward(y);
  EXPECT_DOUBLE_EQ(tape.grad(x)(0), 2.0);
}

TEST(Tape, UnusedLeafHasZeroGradient) {
  Tape tape;
  const Var x = tape.variable(Matrix::Ones(3, 2));
  const Var unused = tape.variable(Matrix::Ones(2, 2));
  tape.backward(ad::sum(x));
  EXPECT_TRUE(tape.grad(unused).isZero());
  EXPECT_TRUE((tape.grad(x).array() == 1.0).all());
}

TEST(Clamp, SoftClampFuzzNeverExceedsBound) {
  std::mt19937_64 rng(5);
  std::normal_distribution<Real> n(0.0, 50.0);
  Matrix x(1000, 1);
  for (Index i = 0; i < x.size(); ++i) x(i) = n(rng);
  x(0) = 1e300;
  x(1) = -1e300;
  Tape tape;
  for (Real k : {0.1, 1.0, 7.5}) {
    const Matrix s = ad::soft_clamp(tape.constant(x), k).value();
    const Matrix h = ad::hard_clamp(tape.constant(x), k).value();
    EXPECT_LE(s.cwiseAbs().maxCoeff(), k);
    EXPECT_LE(h.cwiseAbs().maxCoeff(), k);
  }
  // Near zero the soft clamp is the identity to first order.
  EXPECT_NEAR(ad::soft_clamp(tape.constant(1e-8), 3.0).scalar(), 1e-8, 1e-22);
}

TEST(Shapes, MismatchesThrow) {
  Tape tape;
  const Var a = tape.constant(Matrix::Ones(2, 3));
  const Var b = tape.constant(Matrix::Ones(3, 2));
  EXPECT_THROW(a + b, Error);
  EXPECT_THROW(ad::matmul(a, a), Error);
}
