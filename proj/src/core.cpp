#include "mfc/core.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

namespace mfc {

StateSpace StateSpace::euclidean(int d) {
  if (d < 1) throw ConfigError("state dimension must be >= 1");
  return {SpaceKind::Euclidean, d};
}

StateSpace StateSpace::torus(int d) {
  if (d < 1) throw ConfigError("state dimension must be >= 1");
  return {SpaceKind::Torus, d};
}

std::string to_string(SpaceKind kind) {
  return kind == SpaceKind::Torus ? "torus" : "euclidean";
}

Real wrap_angle(Real x) {
  Real r = std::fmod(x, kTwoPi);
  if (r < 0.0) r += kTwoPi;
  if (r >= kTwoPi) r = 0.0;  // -tiny + 2pi can round up to 2pi
  return r;
}

Matrix canonicalize(const StateSpace& space, const Matrix& states) {
  for (Index i = 0; i < states.rows(); ++i)
    for (Index k = 0; k < states.cols(); ++k)
      if (std::isnan(states(i, k)))
        throw NumericalError("NaN state passed to canonicalize", -1, i);
  if (!space.is_torus()) return states;
  return states.unaryExpr([](Real x) { return wrap_angle(x); });
}

void check_finite(const Ensemble& ens) {
  for (Index i = 0; i < ens.states.rows(); ++i)
    if (!ens.states.row(i).allFinite())
      throw NumericalError("non-finite particle state", ens.step, i);
}

NoiseLaw NoiseLaw::gaussian(Real dt, std::optional<Real> truncate_k) {
  if (!(dt > 0.0)) throw ConfigError("gaussian noise needs dt > 0");
  if (truncate_k && !(*truncate_k > 0.0)) throw ConfigError("noise truncation k must be > 0");
  NoiseLaw law;
  law.kind = NoiseKind::Gaussian;
  law.dt = dt;
  law.truncate_k = truncate_k;
  return law;
}

NoiseLaw NoiseLaw::uniform(Real bound) {
  if (!(bound > 0.0)) throw ConfigError("uniform noise needs bound > 0");
  NoiseLaw law;
  law.kind = NoiseKind::Uniform;
  law.bound = bound;
  return law;
}

NoiseBank::NoiseBank(std::vector<Matrix> steps, std::uint64_t seed, NoiseLaw law)
    : steps_(std::move(steps)), seed_(seed), law_(law) {}

std::uint64_t NoiseBank::hash() const {
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& m : steps_) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(m.data());
    const std::size_t len = static_cast<std::size_t>(m.size()) * sizeof(Real);
    for (std::size_t b = 0; b < len; ++b) {
      h ^= bytes[b];
      h *= 1099511628211ULL;
    }
  }
  return h;
}

NoiseBank NoiseBank::permuted(const std::vector<Index>& perm) const {
  std::vector<Matrix> out;
  out.reserve(steps_.size());
  for (const auto& m : steps_) {
    Matrix p(m.rows(), m.cols());
    for (Index i = 0; i < m.rows(); ++i) p.row(i) = m.row(perm[static_cast<std::size_t>(i)]);
    out.push_back(std::move(p));
  }
  return NoiseBank(std::move(out), seed_, law_);
}

NoiseBank generate_noise(Index n, int horizon, int noise_dim, const NoiseLaw& law,
                         std::uint64_t seed) {
  if (n < 1 || horizon < 0 || noise_dim < 1)
    throw ConfigError("noise bank dimensions must be positive");
  std::vector<Matrix> steps(static_cast<std::size_t>(horizon), Matrix(n, noise_dim));
  std::mt19937_64 rng(seed);
  std::normal_distribution<Real> normal(0.0, 1.0);
  std::uniform_real_distribution<Real> unif(-law.bound, law.bound);
  const Real scale = std::sqrt(law.dt);
  // Particle-major draw order: particle i's path does not depend on N.
  for (Index i = 0; i < n; ++i) {
    for (int j = 0; j < horizon; ++j) {
      for (int k = 0; k < noise_dim; ++k) {
        Real v;
        if (law.kind == NoiseKind::Gaussian) {
          v = normal(rng);
          if (law.truncate_k) v = std::clamp(v, -*law.truncate_k, *law.truncate_k);
          v *= scale;
        } else {
          v = unif(rng);
        }
        steps[static_cast<std::size_t>(j)](i, k) = v;
      }
    }
  }
  return NoiseBank(std::move(steps), seed, law);
}

std::string describe(const InitialLaw& law) {
  struct Visitor {
    std::string operator()(const GaussianDiag&) const { return "gaussian"; }
    std::string operator()(const UniformTorus&) const { return "uniform_torus"; }
    std::string operator()(const TwoClusterTorus&) const { return "two_cluster_torus"; }
    std::string operator()(const EmpiricalLaw&) const { return "empirical"; }
    std::string operator()(const PointMass&) const { return "point_mass"; }
  };
  return std::visit(Visitor{}, law);
}

Matrix load_points(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open empirical law file '" + path + "'");
  std::vector<std::vector<Real>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ss(line);
    ss.imbue(std::locale::classic());
    std::vector<Real> row;
    Real v;
    while (ss >> v) row.push_back(v);
    if (!ss.eof()) throw IoError("unparsable row in '" + path + "': " + line);
    if (!row.empty()) rows.push_back(std::move(row));
  }
  if (rows.empty()) throw IoError("empirical law file '" + path + "' has no points");
  const std::size_t d = rows.front().size();
  Matrix pts(static_cast<Index>(rows.size()), static_cast<Index>(d));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != d) throw IoError("ragged rows in '" + path + "'");
    for (std::size_t k = 0; k < d; ++k) pts(static_cast<Index>(i), static_cast<Index>(k)) = rows[i][k];
  }
  return pts;
}

namespace {

void require_dim(const Vector& v, int d, const char* what) {
  if (v.size() != d)
    throw ConfigError(std::string(what) + " has dimension " + std::to_string(v.size()) +
                      ", state space has " + std::to_string(d));
}

}  // namespace

Ensemble sample_initial(const InitialLaw& law, const StateSpace& space, Index n,
                        std::uint64_t seed) {
  if (n < 1) throw ConfigError("ensemble size must be >= 1");
  const int d = space.dim;
  std::mt19937_64 rng(seed);
  Ensemble ens;
  ens.states.resize(n, d);

  if (const auto* g = std::get_if<GaussianDiag>(&law)) {
    if (space.is_torus()) throw ConfigError("gaussian initial law is not supported on the torus");
    require_dim(g->mean, d, "gaussian mean");
    require_dim(g->var, d, "gaussian variance");
    if ((g->var.array() < 0.0).any()) throw ConfigError("gaussian variance must be >= 0");
    std::normal_distribution<Real> normal(0.0, 1.0);
    const Vector sd = g->var.cwiseSqrt();
    for (Index i = 0; i < n; ++i)
      for (int k = 0; k < d; ++k) ens.states(i, k) = g->mean(k) + sd(k) * normal(rng);
  } else if (std::holds_alternative<UniformTorus>(law)) {
    if (!space.is_torus()) throw ConfigError("uniform_torus initial law needs a torus state space");
    std::uniform_real_distribution<Real> unif(0.0, kTwoPi);
    for (Index i = 0; i < n; ++i)
      for (int k = 0; k < d; ++k) ens.states(i, k) = unif(rng);
  } else if (const auto* tc = std::get_if<TwoClusterTorus>(&law)) {
    if (!space.is_torus()) throw ConfigError("two_cluster_torus initial law needs a torus state space");
    if (tc->centers.empty()) throw ConfigError("two_cluster_torus needs at least one center");
    if (!(tc->concentration > 0.0)) throw ConfigError("two_cluster_torus concentration must be > 0");
    std::uniform_int_distribution<std::size_t> pick(0, tc->centers.size() - 1);
    std::normal_distribution<Real> normal(0.0, 1.0 / std::sqrt(tc->concentration));
    for (Index i = 0; i < n; ++i) {
      const Real c = tc->centers[pick(rng)];
      for (int k = 0; k < d; ++k) ens.states(i, k) = c + normal(rng);
    }
  } else if (const auto* e = std::get_if<EmpiricalLaw>(&law)) {
    Matrix pts = e->points.size() > 0 ? e->points : load_points(e->path);
    if (pts.cols() != d)
      throw ConfigError("empirical law points have dimension " + std::to_string(pts.cols()) +
                        ", state space has " + std::to_string(d));
    std::uniform_int_distribution<Index> pick(0, pts.rows() - 1);
    for (Index i = 0; i < n; ++i) ens.states.row(i) = pts.row(pick(rng));
  } else if (const auto* p = std::get_if<PointMass>(&law)) {
    require_dim(p->x, d, "point mass location");
    for (Index i = 0; i < n; ++i) ens.states.row(i) = p->x.transpose();
  }

  ens.states = canonicalize(space, ens.states);
  check_finite(ens);
  return ens;
}

}  // namespace mfc
