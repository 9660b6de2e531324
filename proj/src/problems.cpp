#include "mfc/problems.hpp"

#include <cmath>
#include <iostream>
#include <sstream>

namespace mfc {

int horizon_steps(Real horizon_time, Real dt) {
  if (!(dt > 0.0)) throw ConfigError("dt must be positive");
  if (!(horizon_time > 0.0)) throw ConfigError("horizon must be positive");
  const Real ratio = horizon_time / dt;
  const Real steps = std::round(ratio);
  if (steps < 1.0 || std::abs(ratio - steps) > 1e-9 * std::max(1.0, ratio)) {
    std::ostringstream os;
    os << "horizon " << horizon_time << " is not a whole number of steps of dt " << dt;
    throw ConfigError(os.str());
  }
  return static_cast<int>(steps);
}

namespace {

ProblemSpec scalar_problem(std::string name, StateSpace space, Real dt, int steps, Real sigma) {
  if (!(sigma >= 0.0)) throw ConfigError(name + ": sigma must be >= 0");
  ProblemSpec p;
  p.name = std::move(name);
  p.space = space;
  p.dt = dt;
  p.horizon = steps;
  p.noise = NoiseLaw::gaussian(dt);
  p.diffusion = [sigma](const StepContext&, const ad::Var& x, const StatsVars&, const ad::Var&) {
    return x.tape().constant(sigma);
  };
  return p;
}

}  // namespace

// --- LQ -------------------------------------------------------------------------

ProblemSpec make_lq(const LqParams& lq, Real dt, Real horizon_time) {
  if (!(lq.kappa > 0.0) || !(lq.beta > 0.0))
    throw ConfigError("lq: kappa and beta must be positive");
  if (!(dt * lq.beta < 1.0)) throw ConfigError("lq: dt * beta must be < 1");
  ProblemSpec p = scalar_problem("lq", StateSpace::euclidean(1), dt,
                                 horizon_steps(horizon_time, dt), lq.sigma);
  p.discount = lq.beta;
  p.infinite_horizon = true;
  p.drift = [](const StepContext& c, const ad::Var&, const StatsVars&, const ad::Var& a) {
    return a * c.dt;
  };
  const Real kappa = lq.kappa;
  p.running_cost = [kappa](const StepContext&, const ad::Var&, const StatsVars& s,
                           const ad::Var& a) { return 0.5 * ad::square(a) + kappa * s.variance(); };
  return p;
}

Real lq_coefficient_a(const LqParams& p) {
  return (std::sqrt(8.0 * p.kappa + p.beta * p.beta) - p.beta) / 4.0;
}

Real lq_coefficient_b(const LqParams& p) {
  return p.sigma * p.sigma * lq_coefficient_a(p) / p.beta;
}

Real lq_value_oracle(const LqParams& p, Real variance) {
  return lq_coefficient_a(p) * variance + lq_coefficient_b(p);
}

Real lq_stationary_variance(const LqParams& p) {
  return p.sigma * p.sigma / (4.0 * lq_coefficient_a(p));
}

Real lq_discrete_value(const LqParams& lq, Real dt, int steps, Real variance) {
  // Value from step j on is P_j Var + r_j with feedback a = -k_j (x - mean).
  Real P = 0.0, r = 0.0;
  for (int j = steps - 1; j >= 0; --j) {
    const Real w = std::exp(-lq.beta * j * dt) * dt;
    const Real k = 2.0 * P * dt / (w + 2.0 * P * dt * dt);
    const Real damp = 1.0 - dt * k;
    r += P * lq.sigma * lq.sigma * dt;
    P = w * (0.5 * k * k + lq.kappa) + P * damp * damp;
  }
  return P * variance + r;
}

// --- Kuramoto -------------------------------------------------------------------

ProblemSpec make_kuramoto(const KuramotoParams& k, Real dt, Real horizon_time) {
  if (!(k.beta > 0.0)) throw ConfigError("kuramoto: beta must be positive");
  if (!(dt * k.beta < 1.0)) throw ConfigError("kuramoto: dt * beta must be < 1");
  ProblemSpec p = scalar_problem("kuramoto", StateSpace::torus(1), dt,
                                 horizon_steps(horizon_time, dt), k.sigma);
  p.discount = k.beta;
  p.infinite_horizon = true;
  p.drift = [](const StepContext& c, const ad::Var&, const StatsVars&, const ad::Var& a) {
    return a * c.dt;
  };
  const Real kappa = k.kappa;
  p.running_cost = [kappa](const StepContext&, const ad::Var&, const StatsVars& s,
                           const ad::Var& a) {
    return kappa * kuramoto_potential(s) + 0.5 * ad::square(a);
  };
  return p;
}

// --- Systemic risk --------------------------------------------------------------

ProblemSpec make_systemic(const SystemicParams& s, Real dt) {
  if (!(s.eta >= 0.0) || !(s.c >= 0.0)) throw ConfigError("systemic: eta and c must be >= 0");
  if (s.q * s.q > s.eta)
    std::cerr << "warning: systemic: q^2 > eta, the running cost is not convex in (x, a)\n";
  ProblemSpec p = scalar_problem("systemic", StateSpace::euclidean(1), dt,
                                 horizon_steps(s.horizon_time, dt), s.sigma);
  const Real kappa = s.kappa, q = s.q, eta = s.eta, c = s.c;
  p.drift = [kappa](const StepContext& ctx, const ad::Var& x, const StatsVars& st,
                    const ad::Var& a) { return (kappa * (st.mean - x) + a) * ctx.dt; };
  p.running_cost = [q, eta](const StepContext&, const ad::Var& x, const StatsVars& st,
                            const ad::Var& a) {
    const ad::Var gap = st.mean - x;
    return 0.5 * ad::square(a) - q * (a * gap) + 0.5 * eta * ad::square(gap);
  };
  p.terminal_cost = [c](const ad::Var& x, const StatsVars& st) {
    return 0.5 * c * ad::square(x - st.mean);
  };
  return p;
}

Real systemic_running_integrand(const SystemicParams& p, Real x, Real xbar, Real a) {
  const Real gap = xbar - x;
  return 0.5 * a * a - p.q * a * gap + 0.5 * p.eta * gap * gap;
}

Real systemic_terminal(const SystemicParams& p, Real x, Real xbar) {
  return 0.5 * p.c * (x - xbar) * (x - xbar);
}

namespace {

struct RiccatiState {
  Real P;
  Real I;  // int_t^T P
};

RiccatiState riccati_rk4(const SystemicParams& p, int steps) {
  // Backward in s = T - t: dP/ds = -2 kappa P - (2P + q)^2 / 2 + eta / 2,
  // dI/ds = P.
  const auto f = [&](Real P) {
    const Real u = 2.0 * P + p.q;
    return -2.0 * p.kappa * P - 0.5 * u * u + 0.5 * p.eta;
  };
  const Real h = p.horizon_time / steps;
  RiccatiState y{0.5 * p.c, 0.0};
  for (int i = 0; i < steps; ++i) {
    const Real k1 = f(y.P);
    const Real k2 = f(y.P + 0.5 * h * k1);
    const Real k3 = f(y.P + 0.5 * h * k2);
    const Real k4 = f(y.P + h * k3);
    const Real l1 = y.P, l2 = y.P + 0.5 * h * k1, l3 = y.P + 0.5 * h * k2, l4 = y.P + h * k3;
    y.P += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    y.I += h / 6.0 * (l1 + 2.0 * l2 + 2.0 * l3 + l4);
    if (!std::isfinite(y.P)) throw NumericalError("systemic Riccati solution blew up", i, -1);
  }
  return y;
}

}  // namespace

RiccatiSolution solve_systemic_riccati(const SystemicParams& p) {
  if (!(p.horizon_time > 0.0)) throw ConfigError("systemic: horizon must be positive");
  int steps = 64;
  RiccatiState prev = riccati_rk4(p, steps);
  for (int round = 0; round < 16; ++round) {
    steps *= 2;
    const RiccatiState next = riccati_rk4(p, steps);
    const Real tol = 1e-13 * std::max(1.0, std::abs(next.P) + std::abs(next.I));
    if (std::abs(next.P - prev.P) <= tol && std::abs(next.I - prev.I) <= tol)
      return {next.P, next.I, steps};
    prev = next;
  }
  throw Error("systemic Riccati step-size refinement did not converge");
}

Real systemic_value_oracle(const SystemicParams& p, Real /*mean0*/, Real var0) {
  if (!(var0 >= 0.0)) throw ArgumentError("initial variance must be >= 0");
  const RiccatiSolution sol = solve_systemic_riccati(p);
  return sol.p0 * var0 + p.sigma * p.sigma * sol.integral;
}

Real systemic_discrete_value(const SystemicParams& p, int steps, Real var0) {
  if (steps < 1) throw ArgumentError("steps must be >= 1");
  // Deviation y = x - mean: y' = (1 - kappa h) y + h a + noise, cost
  // h (a^2/2 + q a y + eta/2 y^2); linear feedback a = -k y is optimal.
  const Real h = p.horizon_time / steps;
  const Real damp = 1.0 - p.kappa * h;
  Real P = 0.5 * p.c, r = 0.0;
  for (int j = steps - 1; j >= 0; --j) {
    const Real k = (p.q + 2.0 * P * damp) / (1.0 + 2.0 * P * h);
    const Real e = damp - h * k;
    r += P * p.sigma * p.sigma * h;
    P = h * (0.5 * k * k - p.q * k + 0.5 * p.eta) + P * e * e;
  }
  return P * var0 + r;
}

}  // namespace mfc
