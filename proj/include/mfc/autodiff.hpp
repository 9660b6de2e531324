#ifndef MFC_AUTODIFF_HPP
#define MFC_AUTODIFF_HPP

// Reverse-mode differentiation over dense matrices. Values are particle-major
// (row = particle), so one node typically holds a whole ensemble-sized block
// and a rollout of T steps records O(T) nodes rather than O(N T).

#include "mfc/common.hpp"

#include <deque>
#include <functional>
#include <vector>

namespace mfc::ad {

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  Real scalar() const;
  bool requires_grad() const;
  bool valid() const { return tape_ != nullptr; }
  std::size_t id() const { return id_; }
  Tape& tape() const { return *tape_; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  using Backward = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var variable(Matrix value);
  Var constant(Matrix value);
  Var constant(Real value);

  // Records an op node. When requires_grad is false the backward closure is
  // dropped and the node behaves like a constant.
  Var record(Matrix value, bool requires_grad, Backward backward);

  const Matrix& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  // Upstream gradient of a node; only meaningful inside its backward closure.
  const Matrix& grad_of(std::size_t id) const { return nodes_[id].grad; }

  // Adds g into the gradient of node id, summing over broadcast dimensions
  // when the node is a row vector or scalar and g is larger.
  void accumulate(std::size_t id, const Matrix& g);
  void accumulate(std::size_t id, Matrix&& g);
  // Moves the upstream gradient out; a node's closure may do this once,
  // since the sweep discards the gradient afterwards.
  Matrix take_grad(std::size_t id) { return std::move(nodes_[id].grad); }

  // Runs the reverse sweep from a 1x1 node. Intermediate values and
  // gradients are released as the sweep passes them; leaf gradients stay.
  // A tape supports exactly one backward pass until reset().
  void backward(const Var& loss);

  // Gradient of a leaf after backward; zeros when nothing flowed into it.
  Matrix grad(const Var& v) const;

  std::size_t size() const { return nodes_.size(); }
  bool used() const { return used_; }
  void reset();

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    Backward backward;
    bool requires_grad = false;
    bool leaf = false;
  };

  std::deque<Node> nodes_;
  bool used_ = false;
};

enum class Activation { Identity, ReLU, Tanh };

Var operator+(const Var& a, const Var& b);
Var operator-(const Var& a, const Var& b);
Var operator*(const Var& a, const Var& b);  // elementwise, broadcasting
Var operator-(const Var& a);
Var operator*(Real s, const Var& a);
Var operator*(const Var& a, Real s);
Var operator+(const Var& a, Real s);
Var operator+(Real s, const Var& a);
Var operator-(const Var& a, Real s);

Var square(const Var& a);
Var sin(const Var& a);
Var cos(const Var& a);
Var exp(const Var& a);
Var relu(const Var& a);
Var tanh(const Var& a);
Var activate(const Var& a, Activation act);

// K * tanh(z / K): smooth saturation into (-K, K).
Var soft_clamp(const Var& a, Real bound);
// Hard clip into [-K, K]; zero gradient outside.
Var hard_clamp(const Var& a, Real bound);

// Reduces every entry mod 2pi into [0, 2pi); derivative 1 almost everywhere.
Var wrap_torus(const Var& a);

Var matmul(const Var& a, const Var& b);

// act(x W + b) with b a 1 x h row broadcast over the N rows of x. Row blocks
// are evaluated in parallel when a thread count is configured.
Var dense(const Var& x, const Var& weight, const Var& bias, Activation act);

Var col_mean(const Var& a);  // N x C -> 1 x C, reproducible summation
Var sum(const Var& a);       // -> 1 x 1
Var mean(const Var& a);      // -> 1 x 1
Var row_sum(const Var& a);   // N x C -> N x 1

Var concat_cols(const std::vector<Var>& parts);
Var slice_cols(const Var& a, Index start, Index count);
Var slice_rows(const Var& a, Index start, Index count);

// Same value, no gradient path.
Var detach(const Var& a);

// Per-particle sigma * xi. sigma holds each particle's d x m matrix
// flattened row-major in one row (N x d*m), or a single shared row
// (1 x d*m); xi is N x m. Result is N x d.
Var diffusion_apply(const Var& sigma, const Var& xi, int d, int m);

}  // namespace mfc::ad

#endif  // MFC_AUTODIFF_HPP
