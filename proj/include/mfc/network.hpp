#ifndef MFC_NETWORK_HPP
#define MFC_NETWORK_HPP

#include "mfc/autodiff.hpp"
#include "mfc/core.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace mfc {

enum class TimeEmbedding {
  Linear,      // t / horizon, in [0, 1]
  Saturating,  // 1 - exp(-rate t), for discounted infinite-horizon problems
};

std::string to_string(ad::Activation act);
ad::Activation parse_activation(const std::string& name);
std::string to_string(TimeEmbedding emb);
TimeEmbedding parse_time_embedding(const std::string& name);

/// Architecture of the feedback policy alpha(t, x, features; theta).
///
/// Input layout is [time (1) | state embedding | measure features (m)]. On the
/// torus each angle enters as (cos x, sin x), so the embedding has width 2d.
struct NetworkSpec {
  int state_dim = 1;
  bool torus_state = false;
  int feature_count = 1;
  int control_dim = 1;
  std::vector<int> hidden{32, 32};
  ad::Activation activation = ad::Activation::ReLU;
  std::optional<Real> clamp;
  bool hard_clamp = false;
  // Smooth saturation B tanh(z / B) of the state embedding and the measure
  // features before the first layer. Moments of a spreading ensemble grow
  // without bound; saturating them keeps the policy output bounded.
  std::optional<Real> input_bound;
  // Multiplies the initial output-layer weights, so an untrained policy
  // starts close to a = 0 instead of an arbitrary feedback gain.
  Real output_init_scale = 1.0;

  TimeEmbedding time_embedding = TimeEmbedding::Linear;
  Real horizon_time = 1.0;  // model time T * dt used by the linear embedding
  Real time_rate = 1.0;     // rate of the saturating embedding

  // Euclidean input standardisation (x - shift) / scale; empty means raw.
  Vector state_shift;
  Vector state_scale;

  int state_embed_dim() const { return torus_state ? 2 * state_dim : state_dim; }
  int input_dim() const { return 1 + state_embed_dim() + feature_count; }
  std::vector<int> widths() const;
  Index parameter_count() const;
  Real time_feature(Real t) const;

  // Throws ConfigError on non-positive sizes or inconsistent options.
  void validate() const;
};

/// Feedforward policy with a flat parameter vector. Layer l stores its
/// weight matrix (in_l x out_l, column-major) followed by its bias.
class PolicyNetwork {
 public:
  struct Bound {
    std::vector<ad::Var> weights;
    std::vector<ad::Var> biases;
  };

  PolicyNetwork() = default;
  PolicyNetwork(NetworkSpec spec, Vector params);

  // He-uniform for ReLU, Xavier-uniform otherwise; zero biases.
  static PolicyNetwork initialize(const NetworkSpec& spec, std::uint64_t seed);
  static PolicyNetwork zeros(const NetworkSpec& spec);

  const NetworkSpec& spec() const { return spec_; }
  const Vector& parameters() const { return params_; }
  Vector& parameters() { return params_; }

  // Places the layer parameters on a tape. trainable selects leaf variables
  // (gradients collected) or constants.
  Bound bind(ad::Tape& tape, bool trainable) const;
  Vector gather_gradient(const ad::Tape& tape, const Bound& bound) const;

  // Batched controls for the N rows of x at model time t: N x control_dim.
  // The time and feature inputs are shared by every row, so their share of
  // the first layer is computed once and broadcast.
  // When hidden is given, the post-activation output of every hidden layer
  // is appended to it.
  ad::Var forward(const Bound& bound, Real t, const ad::Var& x, const ad::Var& features,
                  std::vector<ad::Var>* hidden = nullptr) const;

  Matrix evaluate(Real t, const Matrix& x, const RowVector& features) const;

  // Which hidden units are active (output > 0) for each row, layer by layer
  // as N x width blocks of 0/1. Finite differences that keep this pattern
  // fixed never cross a ReLU kink.
  std::vector<Matrix> activation_pattern(Real t, const Matrix& x, const RowVector& features) const;

 private:
  NetworkSpec spec_;
  Vector params_;
};

// Raises ConfigError when inputs disagree with the architecture.
void check_input_layout(const NetworkSpec& spec, int state_dim, int feature_count);

}  // namespace mfc

#endif  // MFC_NETWORK_HPP
