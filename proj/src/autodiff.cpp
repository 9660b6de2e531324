#include "mfc/autodiff.hpp"

#include "mfc/core.hpp"
#include "mfc/parallel.hpp"
#include "mfc/sum.hpp"

#include <cmath>
#include <string>

namespace mfc::ad {

const Matrix& Var::value() const { return tape_->value(id_); }

Real Var::scalar() const {
  const Matrix& v = value();
  if (v.rows() != 1 || v.cols() != 1)
    throw ArgumentError("scalar() on a " + std::to_string(v.rows()) + "x" +
                        std::to_string(v.cols()) + " node");
  return v(0, 0);
}

bool Var::requires_grad() const { return tape_->requires_grad(id_); }

Var Tape::variable(Matrix value) {
  if (used_) throw StateError("tape already differentiated; reset() before recording");
  Node n;
  n.value = std::move(value);
  n.requires_grad = true;
  n.leaf = true;
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Matrix value) {
  if (used_) throw StateError("tape already differentiated; reset() before recording");
  Node n;
  n.value = std::move(value);
  n.leaf = true;
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Real value) { return constant(Matrix::Constant(1, 1, value)); }

Var Tape::record(Matrix value, bool requires_grad, Backward backward) {
  if (used_) throw StateError("tape already differentiated; reset() before recording");
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  if (requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

void Tape::accumulate(std::size_t id, const Matrix& g) {
  Node& n = nodes_[id];
  if (!n.requires_grad) return;
  const Index r = n.value.rows();
  const Index c = n.value.cols();
  Matrix reduced;
  const Matrix* src = &g;
  if (g.rows() != r || g.cols() != c) {
    reduced = g;
    if (r == 1 && reduced.rows() != 1) reduced = parallel::column_sum(reduced);
    if (c == 1 && reduced.cols() != 1) reduced = reduced.rowwise().sum().eval();
    if (reduced.rows() != r || reduced.cols() != c)
      throw ArgumentError("gradient shape " + std::to_string(g.rows()) + "x" +
                          std::to_string(g.cols()) + " does not reduce to " + std::to_string(r) +
                          "x" + std::to_string(c));
    src = &reduced;
  }
  if (n.grad.size() == 0)
    n.grad = *src;
  else
    n.grad += *src;
}

void Tape::accumulate(std::size_t id, Matrix&& g) {
  Node& n = nodes_[id];
  if (!n.requires_grad) return;
  if (n.grad.size() == 0 && g.rows() == n.value.rows() && g.cols() == n.value.cols()) {
    n.grad = std::move(g);
    return;
  }
  accumulate(id, static_cast<const Matrix&>(g));
}

void Tape::backward(const Var& loss) {
  if (loss.tape_ != this || nodes_.empty())
    throw StateError("backward on a tape that did not record this loss");
  if (used_) throw StateError("backward already ran on this tape; reset() first");
  if (loss.rows() != 1 || loss.cols() != 1) throw StateError("backward needs a scalar loss");
  used_ = true;
  if (!nodes_[loss.id_].requires_grad) return;
  nodes_[loss.id_].grad = Matrix::Ones(1, 1);
  for (std::size_t k = loss.id_ + 1; k-- > 0;) {
    Node& n = nodes_[k];
    if (n.leaf) continue;
    if (n.grad.size() != 0 && n.backward) n.backward(*this, k);
    n.value.resize(0, 0);
    n.grad.resize(0, 0);
    n.backward = nullptr;
  }
}

Matrix Tape::grad(const Var& v) const {
  const Node& n = nodes_[v.id_];
  if (n.grad.size() == 0) return Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::reset() {
  nodes_.clear();
  used_ = false;
}

namespace {

Index broadcast_dim(Index x, Index y) {
  if (x == y) return x;
  if (x == 1) return y;
  if (y == 1) return x;
  throw ArgumentError("incompatible shapes for broadcasting: " + std::to_string(x) + " vs " +
                      std::to_string(y));
}

Matrix expand(const Matrix& m, Index rows, Index cols) {
  if (m.rows() == rows && m.cols() == cols) return m;
  return m.replicate(rows / m.rows(), cols / m.cols());
}

Tape& same_tape(const Var& a, const Var& b) {
  if (&a.tape() != &b.tape()) throw ArgumentError("operands live on different tapes");
  return a.tape();
}

template <typename Fwd, typename Deriv>
Var unary(const Var& a, Fwd fwd, Deriv deriv) {
  Tape& t = a.tape();
  const std::size_t ia = a.id();
  Matrix out = a.value().unaryExpr(fwd);
  return t.record(std::move(out), a.requires_grad(), [ia, deriv](Tape& tp, std::size_t self) {
    Matrix g = tp.take_grad(self);
    g.array() *= deriv(tp.value(ia), tp.value(self)).array();
    tp.accumulate(ia, std::move(g));
  });
}

}  // namespace

Var operator+(const Var& a, const Var& b) {
  Tape& t = same_tape(a, b);
  const Index r = broadcast_dim(a.rows(), b.rows());
  const Index c = broadcast_dim(a.cols(), b.cols());
  Matrix out = expand(a.value(), r, c) + expand(b.value(), r, c);
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(std::move(out), a.requires_grad() || b.requires_grad(),
                  [ia, ib](Tape& tp, std::size_t self) {
                    Matrix g = tp.take_grad(self);
                    tp.accumulate(ia, g);
                    tp.accumulate(ib, std::move(g));
                  });
}

Var operator-(const Var& a, const Var& b) {
  Tape& t = same_tape(a, b);
  const Index r = broadcast_dim(a.rows(), b.rows());
  const Index c = broadcast_dim(a.cols(), b.cols());
  Matrix out = expand(a.value(), r, c) - expand(b.value(), r, c);
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(std::move(out), a.requires_grad() || b.requires_grad(),
                  [ia, ib](Tape& tp, std::size_t self) {
                    Matrix g = tp.take_grad(self);
                    tp.accumulate(ia, g);
                    if (tp.requires_grad(ib)) {
                      g = -g;
                      tp.accumulate(ib, std::move(g));
                    }
                  });
}

Var operator*(const Var& a, const Var& b) {
  Tape& t = same_tape(a, b);
  const Index r = broadcast_dim(a.rows(), b.rows());
  const Index c = broadcast_dim(a.cols(), b.cols());
  Matrix out = expand(a.value(), r, c).cwiseProduct(expand(b.value(), r, c));
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(std::move(out), a.requires_grad() || b.requires_grad(),
                  [ia, ib, r, c](Tape& tp, std::size_t self) {
                    const Matrix& g = tp.grad_of(self);
                    if (tp.requires_grad(ia))
                      tp.accumulate(ia, g.cwiseProduct(expand(tp.value(ib), r, c)));
                    if (tp.requires_grad(ib))
                      tp.accumulate(ib, g.cwiseProduct(expand(tp.value(ia), r, c)));
                  });
}

Var operator-(const Var& a) { return a * -1.0; }

Var operator*(const Var& a, Real s) {
  const std::size_t ia = a.id();
  return a.tape().record(a.value() * s, a.requires_grad(), [ia, s](Tape& tp, std::size_t self) {
    Matrix g = tp.take_grad(self);
    g *= s;
    tp.accumulate(ia, std::move(g));
  });
}

Var operator*(Real s, const Var& a) { return a * s; }

Var operator+(const Var& a, Real s) {
  const std::size_t ia = a.id();
  return a.tape().record(a.value().array() + s, a.requires_grad(),
                         [ia](Tape& tp, std::size_t self) { tp.accumulate(ia, tp.take_grad(self)); });
}

Var operator+(Real s, const Var& a) { return a + s; }
Var operator-(const Var& a, Real s) { return a + (-s); }

Var square(const Var& a) {
  return unary(
      a, [](Real x) { return x * x; },
      [](const Matrix& in, const Matrix&) -> Matrix { return 2.0 * in; });
}

Var sin(const Var& a) {
  return unary(
      a, [](Real x) { return std::sin(x); },
      [](const Matrix& in, const Matrix&) -> Matrix { return in.array().cos().matrix(); });
}

Var cos(const Var& a) {
  return unary(
      a, [](Real x) { return std::cos(x); },
      [](const Matrix& in, const Matrix&) -> Matrix { return -in.array().sin().matrix(); });
}

Var exp(const Var& a) {
  return unary(
      a, [](Real x) { return std::exp(x); },
      [](const Matrix&, const Matrix& out) -> Matrix { return out; });
}

Var relu(const Var& a) {
  // Subgradient at 0 is 0.
  return unary(
      a, [](Real x) { return x > 0.0 ? x : 0.0; },
      [](const Matrix& in, const Matrix&) -> Matrix {
        return (in.array() > 0.0).cast<Real>().matrix();
      });
}

Var tanh(const Var& a) {
  return unary(
      a, [](Real x) { return std::tanh(x); },
      [](const Matrix&, const Matrix& out) -> Matrix {
        return (1.0 - out.array().square()).matrix();
      });
}

Var activate(const Var& a, Activation act) {
  switch (act) {
    case Activation::ReLU: return relu(a);
    case Activation::Tanh: return tanh(a);
    case Activation::Identity: break;
  }
  return a;
}

Var soft_clamp(const Var& a, Real bound) {
  if (!(bound > 0.0)) throw ArgumentError("clamp bound must be > 0");
  return unary(
      a, [bound](Real x) { return bound * std::tanh(x / bound); },
      [bound](const Matrix&, const Matrix& out) -> Matrix {
        return (1.0 - (out.array() / bound).square()).matrix();
      });
}

Var hard_clamp(const Var& a, Real bound) {
  if (!(bound > 0.0)) throw ArgumentError("clamp bound must be > 0");
  return unary(
      a, [bound](Real x) { return std::clamp(x, -bound, bound); },
      [bound](const Matrix& in, const Matrix&) -> Matrix {
        return (in.array().abs() < bound).cast<Real>().matrix();
      });
}

Var wrap_torus(const Var& a) {
  return unary(
      a, [](Real x) { return wrap_angle(x); },
      [](const Matrix& in, const Matrix&) -> Matrix {
        return Matrix::Ones(in.rows(), in.cols());
      });
}

Var matmul(const Var& a, const Var& b) {
  Tape& t = same_tape(a, b);
  if (a.cols() != b.rows())
    throw ArgumentError("matmul shape mismatch: " + std::to_string(a.cols()) + " vs " +
                        std::to_string(b.rows()));
  Matrix out = a.value() * b.value();
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(std::move(out), a.requires_grad() || b.requires_grad(),
                  [ia, ib](Tape& tp, std::size_t self) {
                    const Matrix& g = tp.grad_of(self);
                    if (tp.requires_grad(ia)) tp.accumulate(ia, g * tp.value(ib).transpose());
                    if (tp.requires_grad(ib)) tp.accumulate(ib, tp.value(ia).transpose() * g);
                  });
}

Var dense(const Var& x, const Var& weight, const Var& bias, Activation act) {
  Tape& t = same_tape(x, weight);
  same_tape(x, bias);
  const Matrix& xv = x.value();
  const Matrix& wv = weight.value();
  const Matrix& bv = bias.value();
  if (xv.cols() != wv.rows() || bv.rows() != 1 || bv.cols() != wv.cols())
    throw ArgumentError("dense layer shape mismatch");
  const Index n = xv.rows();
  Matrix out(n, wv.cols());
  parallel::for_rows(n, [&](parallel::RowRange r) {
    auto block = out.middleRows(r.begin, r.size());
    block.noalias() = xv.middleRows(r.begin, r.size()) * wv;
    block.rowwise() += bv.row(0);
    if (act == Activation::ReLU)
      block = block.cwiseMax(0.0);
    else if (act == Activation::Tanh)
      block = block.array().tanh().matrix();
  });
  const std::size_t ix = x.id(), iw = weight.id(), ib = bias.id();
  const bool rg = x.requires_grad() || weight.requires_grad() || bias.requires_grad();
  return t.record(std::move(out), rg, [ix, iw, ib, act](Tape& tp, std::size_t self) {
    const Matrix& y = tp.value(self);
    Matrix gz = tp.take_grad(self);
    if (act == Activation::ReLU)
      gz.array() *= (y.array() > 0.0).cast<Real>();
    else if (act == Activation::Tanh)
      gz.array() *= 1.0 - y.array().square();
    const Matrix& xv = tp.value(ix);
    const Matrix& wv = tp.value(iw);
    if (tp.requires_grad(ix)) {
      Matrix gx(xv.rows(), xv.cols());
      parallel::for_rows(xv.rows(), [&](parallel::RowRange r) {
        gx.middleRows(r.begin, r.size()).noalias() =
            gz.middleRows(r.begin, r.size()) * wv.transpose();
      });
      tp.accumulate(ix, std::move(gx));
    }
    if (tp.requires_grad(iw)) {
      Matrix gw = parallel::reduce_rows<Matrix>(xv.rows(), [&](parallel::RowRange r) -> Matrix {
        return xv.middleRows(r.begin, r.size()).transpose() * gz.middleRows(r.begin, r.size());
      });
      tp.accumulate(iw, gw);
    }
    if (tp.requires_grad(ib)) tp.accumulate(ib, parallel::column_sum(gz));
  });
}

Var col_mean(const Var& a) {
  const std::size_t ia = a.id();
  const Index n = a.rows();
  Matrix out = column_mean(a.value());
  return a.tape().record(std::move(out), a.requires_grad(), [ia, n](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad_of(self);
    tp.accumulate(ia, g.replicate(n, 1) / static_cast<Real>(n));
  });
}

Var sum(const Var& a) {
  const std::size_t ia = a.id();
  const Index r = a.rows(), c = a.cols();
  const Real s = reproducible_sum(a.value().reshaped());
  return a.tape().record(Matrix::Constant(1, 1, s), a.requires_grad(),
                         [ia, r, c](Tape& tp, std::size_t self) {
                           tp.accumulate(ia, Matrix::Constant(r, c, tp.grad_of(self)(0, 0)));
                         });
}

Var mean(const Var& a) { return sum(a) * (1.0 / static_cast<Real>(a.value().size())); }

Var row_sum(const Var& a) {
  const std::size_t ia = a.id();
  const Index c = a.cols();
  return a.tape().record(a.value().rowwise().sum(), a.requires_grad(),
                         [ia, c](Tape& tp, std::size_t self) {
                           tp.accumulate(ia, tp.grad_of(self).replicate(1, c));
                         });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw ArgumentError("concat_cols of nothing");
  Tape& t = parts.front().tape();
  const Index n = parts.front().rows();
  Index total = 0;
  bool rg = false;
  std::vector<std::size_t> ids;
  std::vector<Index> widths;
  for (const auto& p : parts) {
    same_tape(parts.front(), p);
    if (p.rows() != n) throw ArgumentError("concat_cols row mismatch");
    total += p.cols();
    rg = rg || p.requires_grad();
    ids.push_back(p.id());
    widths.push_back(p.cols());
  }
  Matrix out(n, total);
  Index off = 0;
  for (const auto& p : parts) {
    out.middleCols(off, p.cols()) = p.value();
    off += p.cols();
  }
  return t.record(std::move(out), rg, [ids, widths](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad_of(self);
    Index o = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (tp.requires_grad(ids[k])) tp.accumulate(ids[k], g.middleCols(o, widths[k]));
      o += widths[k];
    }
  });
}

Var slice_cols(const Var& a, Index start, Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) throw ArgumentError("slice_cols out of range");
  const std::size_t ia = a.id();
  const Index r = a.rows(), c = a.cols();
  return a.tape().record(a.value().middleCols(start, count), a.requires_grad(),
                         [ia, r, c, start, count](Tape& tp, std::size_t self) {
                           Matrix g = Matrix::Zero(r, c);
                           g.middleCols(start, count) = tp.grad_of(self);
                           tp.accumulate(ia, g);
                         });
}

Var slice_rows(const Var& a, Index start, Index count) {
  if (start < 0 || count < 0 || start + count > a.rows()) throw ArgumentError("slice_rows out of range");
  const std::size_t ia = a.id();
  const Index r = a.rows(), c = a.cols();
  return a.tape().record(a.value().middleRows(start, count), a.requires_grad(),
                         [ia, r, c, start, count](Tape& tp, std::size_t self) {
                           Matrix g = Matrix::Zero(r, c);
                           g.middleRows(start, count) = tp.grad_of(self);
                           tp.accumulate(ia, g);
                         });
}

Var detach(const Var& a) { return a.tape().constant(a.value()); }

Var diffusion_apply(const Var& sigma, const Var& xi, int d, int m) {
  Tape& t = same_tape(sigma, xi);
  const Matrix& s = sigma.value();
  const Matrix& z = xi.value();
  const Index n = z.rows();
  if (z.cols() != m || s.cols() != static_cast<Index>(d) * m || (s.rows() != 1 && s.rows() != n))
    throw ArgumentError("diffusion shape mismatch");
  const bool shared = s.rows() == 1;
  Matrix out(n, d);
  for (Index i = 0; i < n; ++i) {
    const Index si = shared ? 0 : i;
    for (int r = 0; r < d; ++r) {
      Real acc = 0.0;
      for (int k = 0; k < m; ++k) acc += s(si, r * m + k) * z(i, k);
      out(i, r) = acc;
    }
  }
  const std::size_t is = sigma.id(), iz = xi.id();
  return t.record(std::move(out), sigma.requires_grad() || xi.requires_grad(),
                  [is, iz, d, m, shared](Tape& tp, std::size_t self) {
                    const Matrix& g = tp.grad_of(self);
                    const Matrix& s = tp.value(is);
                    const Matrix& z = tp.value(iz);
                    const Index n = z.rows();
                    if (tp.requires_grad(is)) {
                      Matrix gs = Matrix::Zero(n, static_cast<Index>(d) * m);
                      for (Index i = 0; i < n; ++i)
                        for (int r = 0; r < d; ++r)
                          for (int k = 0; k < m; ++k) gs(i, r * m + k) = g(i, r) * z(i, k);
                      tp.accumulate(is, gs);  // reduced to 1 x d*m when shared
                    }
                    if (tp.requires_grad(iz)) {
                      Matrix gz = Matrix::Zero(n, m);
                      for (Index i = 0; i < n; ++i) {
                        const Index si = shared ? 0 : i;
                        for (int r = 0; r < d; ++r)
                          for (int k = 0; k < m; ++k) gz(i, k) += g(i, r) * s(si, r * m + k);
                      }
                      tp.accumulate(iz, gz);
                    }
                  });
}

}  // namespace mfc::ad
