#include "mfc/problems.hpp"
#include "mfc/rollout.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace mfc;

TEST(Problems, HorizonSteps) {
  EXPECT_EQ(horizon_steps(20.0, 0.05), 400);
  EXPECT_EQ(horizon_steps(0.2, 0.2), 1);
  EXPECT_EQ(horizon_steps(0.3, 0.1), 3);
  EXPECT_THROW(horizon_steps(1.0, 0.3), ConfigError);
  EXPECT_THROW(horizon_steps(1.0, 0.0), ConfigError);
  EXPECT_THROW(horizon_steps(-1.0, 0.1), ConfigError);
}

TEST(Problems, LqCoefficients) {
  const LqParams p;
  EXPECT_DOUBLE_EQ(lq_coefficient_a(p), 0.5);
  EXPECT_DOUBLE_EQ(lq_coefficient_b(p), 0.5);
  EXPECT_DOUBLE_EQ(lq_value_oracle(p, 2.25), 1.625);
  EXPECT_DOUBLE_EQ(lq_stationary_variance(p), 0.5);
  // a solves 2 a^2 + beta a - kappa = 0 for any parameters.
  const LqParams q{2.0, 0.7, 0.3};
  const Real a = lq_coefficient_a(q);
  EXPECT_NEAR(2 * a * a + q.beta * a - q.kappa, 0.0, 1e-14);
}

TEST(Problems, LqDiscreteValueApproachesOracle) {
  const LqParams p;
  // Euler is first order: halving dt halves the gap.
  Real prev_gap = 0.0;
  for (Real dt : {0.1, 0.05, 0.025, 0.0125}) {
    const Real v = lq_discrete_value(p, dt, horizon_steps(40.0, dt), 2.25);
    const Real gap = std::abs(v - lq_value_oracle(p, 2.25));
    if (prev_gap > 0.0) {
      EXPECT_NEAR(prev_gap / gap, 2.0, 0.15);
    }
    prev_gap = gap;
  }
  EXPECT_LT(prev_gap, 0.025);
}

TEST(Problems, KuramotoCriticalCoupling) {
  EXPECT_DOUBLE_EQ(KuramotoParams{}.critical(), 1.5);
  EXPECT_DOUBLE_EQ((KuramotoParams{1.0, 2.0, 0.5}).critical(), 2.0 + 8.0);
}

TEST(Problems, SystemicRiccatiReferenceValues) {
  const SystemicParams p;
  const RiccatiSolution sol = solve_systemic_riccati(p);
  EXPECT_NEAR(sol.p0, 0.52200840, 5e-8);
  EXPECT_NEAR(sol.integral, 0.14330677, 5e-8);
  EXPECT_NEAR(systemic_value_oracle(p, 0.0, 2.25), 0.52200840 * 2.25 + 0.14330677, 2e-7);
}

TEST(Problems, SystemicDiscreteValueConverges) {
  const SystemicParams p;
  const Real oracle = systemic_value_oracle(p, 0.0, 2.25);
  EXPECT_NEAR(systemic_discrete_value(p, 1, 2.25), 1.339143, 1e-6);
  Real prev = 1e9;
  for (int steps : {1, 2, 4, 8, 16, 64, 256}) {
    const Real gap = std::abs(systemic_discrete_value(p, steps, 2.25) - oracle);
    EXPECT_LT(gap, prev);
    prev = gap;
  }
  EXPECT_LT(prev, 1e-3);
}

TEST(Problems, SystemicTrivialCostsGiveZeroValue) {
  SystemicParams p;
  p.q = p.eta = p.c = 0.0;
  EXPECT_DOUBLE_EQ(systemic_value_oracle(p, 0.0, 3.0), 0.0);
  EXPECT_DOUBLE_EQ(systemic_discrete_value(p, 4, 3.0), 0.0);
}

TEST(Problems, ConstructorsValidate) {
  EXPECT_THROW(make_lq(LqParams{-1.0, 1.0, 1.0}, 0.1, 1.0), ConfigError);
  EXPECT_THROW(make_lq(LqParams{}, 2.0, 4.0), ConfigError);
  EXPECT_THROW(make_kuramoto(KuramotoParams{}, 0.1, 0.25), ConfigError);
  SystemicParams s;
  s.c = -1.0;
  EXPECT_THROW(make_systemic(s, 0.1), ConfigError);
  const ProblemSpec lq = make_lq(LqParams{}, 0.05, 20.0);
  EXPECT_EQ(lq.horizon, 400);
  EXPECT_TRUE(lq.infinite_horizon);
  EXPECT_NEAR(lq.running_weight(20), std::exp(-1.0) * 0.05, 1e-16);
  EXPECT_NEAR(lq.terminal_weight(), std::exp(-20.0), 1e-20);
  EXPECT_TRUE(make_kuramoto(KuramotoParams{}, 0.05, 1.0).space.is_torus());
  EXPECT_DOUBLE_EQ(make_systemic(SystemicParams{}, 0.2).terminal_weight(), 1.0);
}

TEST(Problems, SystemicCostFunctions) {
  const SystemicParams p;
  EXPECT_DOUBLE_EQ(systemic_running_integrand(p, 1.0, 0.0, 2.0), 2.0 + 0.8 * 2.0 + 1.0);
  EXPECT_DOUBLE_EQ(systemic_terminal(p, 3.0, 1.0), 4.0);
}
