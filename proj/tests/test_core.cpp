#include "mfc/core.hpp"
#include "mfc/sum.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

using namespace mfc;

TEST(Canonicalize, TorusWrapsIntoPeriod) {
  const StateSpace torus = StateSpace::torus(1);
  Matrix x(4, 1);
  x << 7.0, -0.5, kTwoPi, 0.0;
  const Matrix y = canonicalize(torus, x);
  EXPECT_NEAR(y(0), 7.0 - kTwoPi, 1e-15);
  EXPECT_NEAR(y(1), kTwoPi - 0.5, 1e-15);
  EXPECT_EQ(y(2), 0.0);
  EXPECT_EQ(y(3), 0.0);
}

TEST(Canonicalize, EuclideanIsIdentity) {
  Matrix x(1, 1);
  x << 5.3;
  EXPECT_EQ(canonicalize(StateSpace::euclidean(1), x)(0), 5.3);
}

TEST(Canonicalize, FuzzStaysInHalfOpenInterval) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<Real> u(-1e4, 1e4);
  for (int i = 0; i < 100000; ++i) {
    const Real w = wrap_angle(u(rng));
    ASSERT_GE(w, 0.0);
    ASSERT_LT(w, kTwoPi);
  }
  EXPECT_LT(wrap_angle(-1e-300), kTwoPi);
  EXPECT_GE(wrap_angle(-1e-300), 0.0);
}

TEST(Canonicalize, NanIsReported) {
  Matrix x(2, 1);
  x << 1.0, std::nan("");
  EXPECT_THROW(canonicalize(StateSpace::torus(1), x), NumericalError);
}

TEST(StateSpace, RejectsZeroDimension) {
  EXPECT_THROW(StateSpace::euclidean(0), ConfigError);
  EXPECT_THROW(StateSpace::torus(0), ConfigError);
}

TEST(Ensemble, CheckFiniteNamesParticle) {
  Ensemble e{3, Matrix::Zero(5, 1)};
  e.states(3, 0) = INFINITY;
  try {
    check_finite(e);
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& err) {
    EXPECT_EQ(err.particle(), 3);
    EXPECT_EQ(err.step(), 3);
  }
}

TEST(NoiseBank, SameSeedIsBitIdentical) {
  const NoiseLaw law = NoiseLaw::gaussian(0.05);
  const NoiseBank a = generate_noise(100, 20, 2, law, 42);
  const NoiseBank b = generate_noise(100, 20, 2, law, 42);
  const NoiseBank c = generate_noise(100, 20, 2, law, 43);
  EXPECT_EQ(a.hash(), b.hash());
  EXPECT_NE(a.hash(), c.hash());
  for (int j = 0; j < 20; ++j) EXPECT_TRUE(a.column(j) == b.column(j));
  EXPECT_EQ(a.particles(), 100);
  EXPECT_EQ(a.horizon(), 20);
  EXPECT_EQ(a.noise_dim(), 2);
}

TEST(NoiseBank, GaussianMomentsWithinFourSigma) {
  const Real dt = 0.05;
  const NoiseBank bank = generate_noise(2000, 50, 1, NoiseLaw::gaussian(dt), 9);
  Real s1 = 0.0, s2 = 0.0;
  const Real n = 2000.0 * 50.0;
  for (int j = 0; j < 50; ++j) {
    s1 += bank.column(j).sum();
    s2 += bank.column(j).squaredNorm();
  }
  const Real mean = s1 / n;
  const Real var = s2 / n - mean * mean;
  EXPECT_LT(std::abs(mean), 4.0 * std::sqrt(dt / n));
  EXPECT_LT(std::abs(var - dt), 4.0 * dt * std::sqrt(2.0 / n));
}

TEST(NoiseBank, TruncationClipsAtKSqrtDt) {
  const Real dt = 0.01;
  const NoiseBank bank = generate_noise(5000, 4, 1, NoiseLaw::gaussian(dt, 1.5), 3);
  Real peak = 0.0;
  for (int j = 0; j < 4; ++j) peak = std::max(peak, bank.column(j).cwiseAbs().maxCoeff());
  EXPECT_LE(peak, 1.5 * std::sqrt(dt) + 1e-15);
  EXPECT_GT(peak, 1.4 * std::sqrt(dt));
}

TEST(NoiseBank, UniformStaysInBounds) {
  const NoiseBank bank = generate_noise(1000, 3, 1, NoiseLaw::uniform(0.3), 5);
  for (int j = 0; j < 3; ++j) EXPECT_LE(bank.column(j).cwiseAbs().maxCoeff(), 0.3);
}

TEST(NoiseBank, InvalidLawsAreConfigErrors) {
  EXPECT_THROW(NoiseLaw::gaussian(0.0), ConfigError);
  EXPECT_THROW(NoiseLaw::gaussian(0.1, -1.0), ConfigError);
  EXPECT_THROW(NoiseLaw::uniform(0.0), ConfigError);
  EXPECT_THROW(generate_noise(0, 3, 1, NoiseLaw::gaussian(0.1), 1), ConfigError);
}

TEST(NoiseBank, PermutedReordersRows) {
  const NoiseBank bank = generate_noise(4, 2, 1, NoiseLaw::gaussian(0.1), 8);
  const NoiseBank p = bank.permuted({3, 2, 1, 0});
  for (int j = 0; j < 2; ++j)
    for (Index i = 0; i < 4; ++i) EXPECT_EQ(p.column(j)(i, 0), bank.column(j)(3 - i, 0));
}

TEST(InitialLaw, GaussianOnTorusIsRejected) {
  GaussianDiag g{Vector::Zero(1), Vector::Ones(1)};
  EXPECT_THROW(sample_initial(g, StateSpace::torus(1), 10, 1), ConfigError);
  EXPECT_THROW(sample_initial(UniformTorus{}, StateSpace::euclidean(1), 10, 1), ConfigError);
  EXPECT_THROW(sample_initial(TwoClusterTorus{}, StateSpace::euclidean(1), 10, 1), ConfigError);
}

TEST(InitialLaw, GaussianMomentsAndDeterminism) {
  GaussianDiag g{Vector::Constant(1, 1.0), Vector::Constant(1, 2.25)};
  const Ensemble a = sample_initial(g, StateSpace::euclidean(1), 20000, 4);
  const Ensemble b = sample_initial(g, StateSpace::euclidean(1), 20000, 4);
  EXPECT_TRUE(a.states == b.states);
  const Real mean = a.states.mean();
  const Real var = (a.states.array() - mean).square().mean();
  EXPECT_NEAR(mean, 1.0, 4.0 * std::sqrt(2.25 / 20000));
  EXPECT_NEAR(var, 2.25, 4.0 * 2.25 * std::sqrt(2.0 / 20000));
}

TEST(InitialLaw, PointMassAndUniformTorus) {
  const Ensemble p = sample_initial(PointMass{Vector::Constant(1, 0.7)}, StateSpace::euclidean(1), 50, 1);
  EXPECT_TRUE((p.states.array() == 0.7).all());
  const Ensemble u = sample_initial(UniformTorus{}, StateSpace::torus(1), 50000, 2);
  EXPECT_GE(u.states.minCoeff(), 0.0);
  EXPECT_LT(u.states.maxCoeff(), kTwoPi);
  EXPECT_LT(std::abs(u.states.array().cos().mean()), 4.0 * std::sqrt(0.5 / 50000));
}

TEST(InitialLaw, TwoClusterHasNoFirstMomentButStrongSecond) {
  const Ensemble e = sample_initial(TwoClusterTorus{}, StateSpace::torus(1), 50000, 3);
  const Real c1 = e.states.array().cos().mean();
  const Real c2 = (2.0 * e.states.array()).cos().mean();
  EXPECT_LT(std::abs(c1), 0.03);
  // Wrapped Gaussian with variance 1/10: E cos(2x) = exp(-2 * 0.1).
  EXPECT_NEAR(c2, std::exp(-0.2), 0.02);
}

TEST(InitialLaw, EmpiricalLawReadsPoints) {
  const auto path = std::filesystem::temp_directory_path() / "mfc_points_test.txt";
  {
    std::ofstream out(path);
    out << "# two points\n1.5\n-2.0, \n";
  }
  const Matrix pts = load_points(path.string());
  ASSERT_EQ(pts.rows(), 2);
  EXPECT_EQ(pts(0, 0), 1.5);
  EXPECT_EQ(pts(1, 0), -2.0);
  EmpiricalLaw law{path.string(), pts};
  const Ensemble e = sample_initial(law, StateSpace::euclidean(1), 100, 1);
  EXPECT_TRUE(((e.states.array() == 1.5) || (e.states.array() == -2.0)).all());
  std::filesystem::remove(path);
  EXPECT_THROW(load_points(path.string()), IoError);
}

TEST(ReproducibleSum, PermutationInvariantToTheBit) {
  std::mt19937_64 rng(11);
  std::normal_distribution<Real> n(0.0, 1.0);
  Vector x(10007);
  for (Index i = 0; i < x.size(); ++i) x(i) = n(rng) * std::exp(3.0 * n(rng));
  const Real s = reproducible_sum(x);
  std::vector<Index> perm(static_cast<std::size_t>(x.size()));
  std::iota(perm.begin(), perm.end(), 0);
  for (int trial = 0; trial < 5; ++trial) {
    std::shuffle(perm.begin(), perm.end(), rng);
    Vector y(x.size());
    for (Index i = 0; i < x.size(); ++i) y(i) = x(perm[static_cast<std::size_t>(i)]);
    EXPECT_EQ(reproducible_sum(y), s);
  }
  long double exact = 0.0L;
  for (Index i = 0; i < x.size(); ++i) exact += x(i);
  EXPECT_NEAR(s, static_cast<Real>(exact), 1e-12 * x.cwiseAbs().sum());
}

TEST(ReproducibleSum, EdgeCases) {
  EXPECT_EQ(reproducible_sum(Vector()), 0.0);
  EXPECT_EQ(reproducible_sum(Vector::Zero(5)), 0.0);
  Vector tiny = Vector::Constant(3, 1e-310);
  EXPECT_NEAR(reproducible_sum(tiny), 3e-310, 1e-320);
  Vector big(2);
  big << 1e300, -1e300;
  EXPECT_EQ(reproducible_sum(big), 0.0);
  Vector nan(2);
  nan << 1.0, std::nan("");
  EXPECT_TRUE(std::isnan(reproducible_sum(nan)));
}
