#include "mfc/features.hpp"

#include "mfc/sum.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <random>
#include <set>

namespace mfc {

namespace {

Real factorial(int n) {
  Real f = 1.0;
  for (int k = 2; k <= n; ++k) f *= k;
  return f;
}

void enumerate_exponents(int dim, int max_degree, std::vector<int>& current, int axis,
                         std::vector<std::vector<int>>& out) {
  if (axis == dim) {
    if (std::any_of(current.begin(), current.end(), [](int e) { return e != 0; }))
      out.push_back(current);
    return;
  }
  for (int e = 0; e <= max_degree; ++e) {
    current[static_cast<std::size_t>(axis)] = e;
    enumerate_exponents(dim, max_degree, current, axis + 1, out);
  }
}

// powers[k] is N x (D+1) with column e holding x_k^e.
std::vector<Matrix> power_table(const Matrix& x, int max_degree) {
  std::vector<Matrix> table;
  for (Index k = 0; k < x.cols(); ++k) {
    Matrix p(x.rows(), max_degree + 1);
    p.col(0).setOnes();
    for (int e = 1; e <= max_degree; ++e) p.col(e) = p.col(e - 1).cwiseProduct(x.col(k));
    table.push_back(std::move(p));
  }
  return table;
}

int max_exponent(const std::vector<std::vector<int>>& indices) {
  int m = 0;
  for (const auto& e : indices)
    for (int v : e) m = std::max(m, v);
  return m;
}

}  // namespace

FeatureBasis FeatureBasis::polynomial(int dim, int max_degree, bool cross_moments,
                                      bool factorial_scaling) {
  if (dim < 1) throw ConfigError("polynomial basis needs dim >= 1");
  if (max_degree < 1) throw ConfigError("polynomial basis needs max_degree >= 1");
  FeatureBasis b;
  b.kind_ = BasisKind::PolynomialMoments;
  b.dim_ = dim;
  b.factorial_ = factorial_scaling;
  if (cross_moments) {
    std::vector<int> cur(static_cast<std::size_t>(dim), 0);
    enumerate_exponents(dim, max_degree, cur, 0, b.indices_);
  } else {
    for (int k = 0; k < dim; ++k)
      for (int e = 1; e <= max_degree; ++e) {
        std::vector<int> ex(static_cast<std::size_t>(dim), 0);
        ex[static_cast<std::size_t>(k)] = e;
        b.indices_.push_back(std::move(ex));
      }
  }
  for (const auto& ex : b.indices_) {
    Real s = 1.0;
    if (factorial_scaling)
      for (int e : ex) s /= factorial(e);
    b.scale_.push_back(s);
  }
  return b;
}

FeatureBasis FeatureBasis::monomials(int dim, std::vector<std::vector<int>> exponents,
                                     bool factorial_scaling) {
  if (dim < 1) throw ConfigError("polynomial basis needs dim >= 1");
  if (exponents.empty()) throw ConfigError("polynomial basis needs at least one monomial");
  std::set<std::vector<int>> seen;
  FeatureBasis b;
  b.kind_ = BasisKind::PolynomialMoments;
  b.dim_ = dim;
  b.factorial_ = factorial_scaling;
  for (auto& ex : exponents) {
    if (static_cast<int>(ex.size()) != dim)
      throw ConfigError("monomial has " + std::to_string(ex.size()) + " exponents, expected " +
                        std::to_string(dim));
    if (std::any_of(ex.begin(), ex.end(), [](int e) { return e < 0; }))
      throw ConfigError("monomial exponents must be >= 0");
    if (std::all_of(ex.begin(), ex.end(), [](int e) { return e == 0; }))
      throw ConfigError("the constant monomial carries no information");
    if (!seen.insert(ex).second) throw ConfigError("duplicate monomial");
    Real s = 1.0;
    if (factorial_scaling)
      for (int e : ex) s /= factorial(e);
    b.scale_.push_back(s);
    b.indices_.push_back(std::move(ex));
  }
  return b;
}

FeatureBasis FeatureBasis::fourier(int dim, std::vector<std::vector<int>> modes) {
  if (dim < 1) throw ConfigError("fourier basis needs dim >= 1");
  if (modes.empty()) throw ConfigError("fourier basis needs at least one mode");
  std::set<std::vector<int>> seen;
  for (const auto& l : modes) {
    if (static_cast<int>(l.size()) != dim)
      throw ConfigError("fourier mode has " + std::to_string(l.size()) + " entries, expected " +
                        std::to_string(dim));
    if (std::all_of(l.begin(), l.end(), [](int v) { return v == 0; }))
      throw ConfigError("fourier mode 0 is constant and carries no information");
    if (!seen.insert(l).second) throw ConfigError("duplicate fourier mode");
  }
  FeatureBasis b;
  b.kind_ = BasisKind::FourierModes;
  b.dim_ = dim;
  b.indices_ = std::move(modes);
  b.scale_.assign(b.indices_.size(), 1.0);
  return b;
}

FeatureBasis FeatureBasis::fourier_symmetric(int dim, int max_mode) {
  if (max_mode < 1) throw ConfigError("fourier basis needs max_mode >= 1");
  std::vector<std::vector<int>> modes;
  for (int s : {1, -1})
    for (int l = 1; l <= max_mode; ++l) {
      std::vector<int> m(static_cast<std::size_t>(dim), 0);
      m[0] = s * l;
      modes.push_back(std::move(m));
    }
  return fourier(dim, std::move(modes));
}

int FeatureBasis::size() const {
  const int n = static_cast<int>(indices_.size());
  return kind_ == BasisKind::FourierModes ? 2 * n : n;
}

namespace {

// For each mode, the index of an earlier mode equal to its negation, or -1.
std::vector<int> negated_partners(const std::vector<std::vector<int>>& modes) {
  std::vector<int> out(modes.size(), -1);
  for (std::size_t l = 0; l < modes.size(); ++l)
    for (std::size_t p = 0; p < l; ++p) {
      bool negated = true;
      for (std::size_t k = 0; k < modes[l].size() && negated; ++k)
        negated = modes[l][k] == -modes[p][k];
      if (negated && out[p] < 0) {
        out[l] = static_cast<int>(p);
        break;
      }
    }
  return out;
}

Vector fourier_phase(const Matrix& x, const std::vector<int>& mode) {
  Vector phase = Vector::Zero(x.rows());
  for (Index k = 0; k < x.cols(); ++k)
    if (const int lk = mode[static_cast<std::size_t>(k)]; lk != 0) phase += lk * x.col(k);
  return phase;
}

}  // namespace

Matrix FeatureBasis::evaluate(const Matrix& x) const {
  if (x.cols() != dim_)
    throw ArgumentError("basis dimension " + std::to_string(dim_) + " vs states " +
                        std::to_string(x.cols()));
  const Index n = x.rows();
  Matrix out(n, size());
  if (kind_ == BasisKind::PolynomialMoments) {
    const auto powers = power_table(x, max_exponent(indices_));
    for (std::size_t l = 0; l < indices_.size(); ++l) {
      Vector col = Vector::Constant(n, scale_[l]);
      for (int k = 0; k < dim_; ++k) {
        const int e = indices_[l][static_cast<std::size_t>(k)];
        if (e > 0) col.array() *= powers[static_cast<std::size_t>(k)].col(e).array();
      }
      out.col(static_cast<Index>(l)) = col;
    }
  } else {
    const auto partner = negated_partners(indices_);
    for (std::size_t l = 0; l < indices_.size(); ++l) {
      const auto c = 2 * static_cast<Index>(l);
      if (const int p = partner[l]; p >= 0) {
        out.col(c) = out.col(2 * p);
        out.col(c + 1) = -out.col(2 * p + 1);
        continue;
      }
      const Vector phase = fourier_phase(x, indices_[l]);
      out.col(c) = phase.array().cos().matrix();
      out.col(c + 1) = phase.array().sin().matrix();
    }
  }
  return out;
}

RowVector FeatureBasis::average(const Matrix& x) const { return column_mean(evaluate(x)); }

Matrix FeatureBasis::pullback(const Matrix& x, const RowVector& w) const {
  const Index n = x.rows();
  const Real inv_n = 1.0 / static_cast<Real>(n);
  Matrix g = Matrix::Zero(n, dim_);
  if (kind_ == BasisKind::PolynomialMoments) {
    const auto powers = power_table(x, max_exponent(indices_));
    for (std::size_t l = 0; l < indices_.size(); ++l) {
      const Real wl = w(static_cast<Index>(l)) * scale_[l] * inv_n;
      if (wl == 0.0) continue;
      const auto& ex = indices_[l];
      for (int k = 0; k < dim_; ++k) {
        const int ek = ex[static_cast<std::size_t>(k)];
        if (ek == 0) continue;
        Vector term = Vector::Constant(n, wl * ek);
        for (int j = 0; j < dim_; ++j) {
          const int e = ex[static_cast<std::size_t>(j)] - (j == k ? 1 : 0);
          if (e > 0) term.array() *= powers[static_cast<std::size_t>(j)].col(e).array();
        }
        g.col(k) += term;
      }
    }
  } else {
    // Mode -l contributes -l (ws cos + wc sin) at the phase of l, so its
    // weights fold into those of l with the sine weight negated.
    const auto partner = negated_partners(indices_);
    std::vector<Real> wc(indices_.size()), ws(indices_.size());
    for (std::size_t l = 0; l < indices_.size(); ++l) {
      const auto c = 2 * static_cast<Index>(l);
      const auto target = static_cast<std::size_t>(partner[l] >= 0 ? partner[l] : static_cast<int>(l));
      const Real sign = partner[l] >= 0 ? -1.0 : 1.0;
      wc[target] += w(c) * inv_n;
      ws[target] += sign * w(c + 1) * inv_n;
    }
    for (std::size_t l = 0; l < indices_.size(); ++l) {
      if (partner[l] >= 0 || (wc[l] == 0.0 && ws[l] == 0.0)) continue;
      const Vector phase = fourier_phase(x, indices_[l]);
      const Vector dphase =
          (ws[l] * phase.array().cos() - wc[l] * phase.array().sin()).matrix();
      for (int k = 0; k < dim_; ++k)
        if (const int lk = indices_[l][static_cast<std::size_t>(k)]; lk != 0) g.col(k) += lk * dphase;
    }
  }
  return g;
}

void FeatureBasis::check_compatible(const StateSpace& space, bool allow_override) const {
  if (space.dim != dim_)
    throw ConfigError("feature basis dimension " + std::to_string(dim_) +
                      " does not match state dimension " + std::to_string(space.dim));
  const bool natural = (kind_ == BasisKind::FourierModes) == space.is_torus();
  if (natural) return;
  const std::string msg = kind_ == BasisKind::FourierModes
                              ? "fourier features on a euclidean state space"
                              : "polynomial features on a torus state space";
  if (!allow_override) throw ConfigError(msg + " (set allow_space_mismatch to force)");
  std::cerr << "warning: " << msg << " (override enabled)\n";
}

Real MeasureStats::order_parameter() const {
  if (c1.size() == 0) return 0.0;
  return std::hypot(c1(0), s1(0));
}

ad::Var StatsVars::variance() const {
  return second_moment - ad::row_sum(ad::square(mean));
}

MeasureStats StatsVars::values() const {
  MeasureStats s;
  s.features = features.value();
  s.mean = mean.value();
  s.second_moment = second_moment.scalar();
  if (c1.valid()) {
    s.c1 = c1.value();
    s.s1 = s1.value();
  }
  return s;
}

ad::Var feature_node(const FeatureBasis& basis, const ad::Var& x) {
  const std::size_t ix = x.id();
  // The basis is copied into the closure; tapes may outlive the caller's basis.
  return x.tape().record(basis.average(x.value()), x.requires_grad(),
                         [ix, basis](ad::Tape& tp, std::size_t self) {
                           tp.accumulate(ix, basis.pullback(tp.value(ix), tp.grad_of(self)));
                         });
}

StatsVars stats_on_tape(const FeatureBasis& basis, const StateSpace& space, const ad::Var& x,
                        bool detach_features) {
  StatsVars s;
  s.features = feature_node(basis, detach_features ? ad::detach(x) : x);
  s.mean = ad::col_mean(x);
  s.second_moment = ad::row_sum(ad::col_mean(ad::square(x)));
  if (space.is_torus()) {
    s.c1 = ad::col_mean(ad::cos(x));
    s.s1 = ad::col_mean(ad::sin(x));
  }
  return s;
}

MeasureStats compute_features(const FeatureBasis& basis, const StateSpace& space,
                              const Ensemble& ens) {
  ad::Tape tape;
  return stats_on_tape(basis, space, tape.constant(ens.states)).values();
}

Real kuramoto_potential(const MeasureStats& stats) {
  if (stats.c1.size() == 0) throw ArgumentError("kuramoto potential needs torus statistics");
  return -0.5 * (stats.c1(0) * stats.c1(0) + stats.s1(0) * stats.s1(0));
}

ad::Var kuramoto_potential(const StatsVars& stats) {
  if (!stats.c1.valid()) throw ArgumentError("kuramoto potential needs torus statistics");
  const ad::Var c = ad::slice_cols(stats.c1, 0, 1);
  const ad::Var s = ad::slice_cols(stats.s1, 0, 1);
  return -0.5 * (ad::square(c) + ad::square(s));
}

Real w1_distance_1d(std::vector<Real> a, std::vector<Real> b) {
  if (a.empty() || b.empty()) throw ArgumentError("w1_distance_1d needs non-empty samples");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const std::size_t n = a.size(), m = b.size();
  if (n == m) {
    Real acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += std::abs(a[i] - b[i]);
    return acc / static_cast<Real>(n);
  }
  // Both quantile functions are step functions with breaks at i/n and j/m.
  // Walk the merged breakpoints in integer units of 1/(n m).
  const std::size_t total = n * m;
  std::size_t i = 0, j = 0, pos = 0;
  Real acc = 0.0;
  while (pos < total) {
    const std::size_t next = std::min((i + 1) * m, (j + 1) * n);
    acc += static_cast<Real>(next - pos) * std::abs(a[i] - b[j]);
    pos = next;
    if (pos == (i + 1) * m) ++i;
    if (pos == (j + 1) * n) ++j;
  }
  return acc / static_cast<Real>(total);
}

Real sliced_w1(const Matrix& a, const Matrix& b, int n_projections, std::uint64_t seed) {
  if (a.rows() == 0 || b.rows() == 0) throw ArgumentError("sliced_w1 needs non-empty samples");
  if (a.cols() != b.cols()) throw ArgumentError("sliced_w1 sample dimensions differ");
  if (n_projections < 1) throw ArgumentError("sliced_w1 needs n_projections >= 1");
  auto column = [](const Matrix& m) {
    return std::vector<Real>(m.data(), m.data() + m.rows());
  };
  if (a.cols() == 1) return w1_distance_1d(column(a), column(b));
  std::mt19937_64 rng(seed);
  std::normal_distribution<Real> normal(0.0, 1.0);
  Real acc = 0.0;
  for (int p = 0; p < n_projections; ++p) {
    Vector u(a.cols());
    do {
      for (Index k = 0; k < u.size(); ++k) u(k) = normal(rng);
    } while (u.norm() == 0.0);
    u.normalize();
    const Vector pa = a * u;
    const Vector pb = b * u;
    acc += w1_distance_1d(column(pa), column(pb));
  }
  return acc / n_projections;
}

}  // namespace mfc
