#ifndef MFC_PROBLEMS_HPP
#define MFC_PROBLEMS_HPP

#include "mfc/problem.hpp"

namespace mfc {

// Steps in [0, horizon_time] at spacing dt; horizon_time must be a whole
// number of steps (to 1e-9 relative).
int horizon_steps(Real horizon_time, Real dt);

// --- Linear-quadratic flocking ---------------------------------------------
// dX = a dt + sigma dW, running cost 1/2 |a|^2 + kappa Var(mu), discount beta.

struct LqParams {
  Real kappa = 1.0;
  Real sigma = 1.0;
  Real beta = 1.0;
};

ProblemSpec make_lq(const LqParams& p, Real dt, Real horizon_time);

// v(mu) = a Var(mu) + b for the continuous-time infinite-horizon problem.
Real lq_coefficient_a(const LqParams& p);
Real lq_coefficient_b(const LqParams& p);
Real lq_value_oracle(const LqParams& p, Real variance);
Real lq_stationary_variance(const LqParams& p);

// Exact optimum of the Euler-discretised problem in the N -> infinity limit,
// by the scalar Riccati recursion on the variance (linear feedback is optimal).
Real lq_discrete_value(const LqParams& p, Real dt, int steps, Real variance);

// --- Kuramoto -----------------------------------------------------------------
// dX = a dt + sigma dW on the circle, running cost kappa Phi(mu) + 1/2 a^2.

struct KuramotoParams {
  Real kappa = 2.5;
  Real sigma = 1.0;
  Real beta = 1.0;

  // kappa_c = beta sigma^2 + sigma^4 / 2
  Real critical() const { return beta * sigma * sigma + 0.5 * sigma * sigma * sigma * sigma; }
};

ProblemSpec make_kuramoto(const KuramotoParams& p, Real dt, Real horizon_time);

// --- Systemic risk -------------------------------------------------------------
// dX = [kappa (E X - X) + a] dt + sigma dW on [0, T], running cost
// f(x, xbar, a) = a^2/2 - q a (xbar - x) + eta/2 (xbar - x)^2, terminal
// g(x, xbar) = c/2 (x - xbar)^2, undiscounted.

struct SystemicParams {
  Real kappa = 0.6;
  Real sigma = 1.0;
  Real q = 0.8;
  Real eta = 2.0;
  Real c = 2.0;
  Real horizon_time = 0.2;
};

ProblemSpec make_systemic(const SystemicParams& p, Real dt);

Real systemic_running_integrand(const SystemicParams& p, Real x, Real xbar, Real a);
Real systemic_terminal(const SystemicParams& p, Real x, Real xbar);

struct RiccatiSolution {
  Real p0 = 0.0;        // coefficient of Var(mu_0)
  Real integral = 0.0;  // int_0^T P(t) dt
  int steps = 0;        // RK4 steps of the accepted solution
};

// Backward RK4 for P' = 2 kappa P + (2P + q)^2 / 2 - eta / 2, P(T) = c/2,
// refined by step doubling until successive values agree to 1e-13.
RiccatiSolution solve_systemic_riccati(const SystemicParams& p);

// Continuous-time value P(0) Var_0 + sigma^2 int P for a law with variance
// var0 (the mean does not enter).
Real systemic_value_oracle(const SystemicParams& p, Real mean0, Real var0);

// Exact optimum of the Euler-discretised problem with `steps` steps.
Real systemic_discrete_value(const SystemicParams& p, int steps, Real var0);

}  // namespace mfc

#endif  // MFC_PROBLEMS_HPP
