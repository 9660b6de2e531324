#include "mfc/network.hpp"

#include <cmath>
#include <random>

namespace mfc {

std::string to_string(ad::Activation act) {
  switch (act) {
    case ad::Activation::ReLU: return "relu";
    case ad::Activation::Tanh: return "tanh";
    case ad::Activation::Identity: return "identity";
  }
  return "identity";
}

ad::Activation parse_activation(const std::string& name) {
  if (name == "relu") return ad::Activation::ReLU;
  if (name == "tanh") return ad::Activation::Tanh;
  if (name == "identity") return ad::Activation::Identity;
  throw ConfigError("unknown activation '" + name + "' (expected relu, tanh or identity)");
}

std::string to_string(TimeEmbedding emb) {
  return emb == TimeEmbedding::Linear ? "linear" : "saturating";
}

TimeEmbedding parse_time_embedding(const std::string& name) {
  if (name == "linear") return TimeEmbedding::Linear;
  if (name == "saturating") return TimeEmbedding::Saturating;
  throw ConfigError("unknown time embedding '" + name + "' (expected linear or saturating)");
}

std::vector<int> NetworkSpec::widths() const {
  std::vector<int> w{input_dim()};
  w.insert(w.end(), hidden.begin(), hidden.end());
  w.push_back(control_dim);
  return w;
}

Index NetworkSpec::parameter_count() const {
  const auto w = widths();
  Index n = 0;
  for (std::size_t i = 0; i + 1 < w.size(); ++i) n += static_cast<Index>(w[i] + 1) * w[i + 1];
  return n;
}

Real NetworkSpec::time_feature(Real t) const {
  if (time_embedding == TimeEmbedding::Saturating) return 1.0 - std::exp(-time_rate * t);
  return horizon_time > 0.0 ? t / horizon_time : 0.0;
}

void check_input_layout(const NetworkSpec& spec, int state_dim, int feature_count) {
  if (spec.state_dim != state_dim)
    throw ConfigError("network expects state dimension " + std::to_string(spec.state_dim) +
                      ", got " + std::to_string(state_dim));
  if (spec.feature_count != feature_count)
    throw ConfigError("network expects " + std::to_string(spec.feature_count) +
                      " measure features, got " + std::to_string(feature_count));
}

void NetworkSpec::validate() const {
  const NetworkSpec& spec = *this;
  if (spec.state_dim < 1 || spec.feature_count < 1 || spec.control_dim < 1)
    throw ConfigError("network dimensions must be positive");
  for (int h : spec.hidden)
    if (h < 1) throw ConfigError("hidden layer widths must be positive");
  if (spec.clamp && !(*spec.clamp > 0.0)) throw ConfigError("network clamp must be > 0");
  if (spec.input_bound && !(*spec.input_bound > 0.0))
    throw ConfigError("network input_bound must be > 0");
  if (!(spec.output_init_scale >= 0.0))
    throw ConfigError("network output_init_scale must be >= 0");
  if (spec.state_shift.size() != spec.state_scale.size())
    throw ConfigError("state standardisation shift/scale sizes differ");
  if (spec.state_shift.size() != 0) {
    if (spec.torus_state) throw ConfigError("state standardisation is for euclidean states only");
    if (spec.state_shift.size() != spec.state_dim)
      throw ConfigError("state standardisation has the wrong dimension");
    if ((spec.state_scale.array() <= 0.0).any())
      throw ConfigError("state standardisation scale must be > 0");
  }
}


PolicyNetwork::PolicyNetwork(NetworkSpec spec, Vector params)
    : spec_(std::move(spec)), params_(std::move(params)) {
  spec_.validate();
  if (params_.size() != spec_.parameter_count())
    throw ConfigError("parameter vector has " + std::to_string(params_.size()) +
                      " entries, architecture needs " + std::to_string(spec_.parameter_count()));
}

PolicyNetwork PolicyNetwork::initialize(const NetworkSpec& spec, std::uint64_t seed) {
  spec.validate();
  Vector params = Vector::Zero(spec.parameter_count());
  std::mt19937_64 rng(seed);
  const auto w = spec.widths();
  Index off = 0;
  for (std::size_t l = 0; l + 1 < w.size(); ++l) {
    const int fan_in = w[l], fan_out = w[l + 1];
    const Real bound = spec.activation == ad::Activation::ReLU
                           ? std::sqrt(6.0 / fan_in)
                           : std::sqrt(6.0 / (fan_in + fan_out));
    const Real scale = l + 2 == w.size() ? spec.output_init_scale : 1.0;
    std::uniform_real_distribution<Real> unif(-bound * scale, bound * scale);
    for (Index k = 0; k < static_cast<Index>(fan_in) * fan_out; ++k) params(off + k) = unif(rng);
    off += static_cast<Index>(fan_in + 1) * fan_out;
  }
  return PolicyNetwork(spec, std::move(params));
}

PolicyNetwork PolicyNetwork::zeros(const NetworkSpec& spec) {
  return PolicyNetwork(spec, Vector::Zero(spec.parameter_count()));
}

PolicyNetwork::Bound PolicyNetwork::bind(ad::Tape& tape, bool trainable) const {
  Bound b;
  const auto w = spec_.widths();
  Index off = 0;
  for (std::size_t l = 0; l + 1 < w.size(); ++l) {
    const int in = w[l], out = w[l + 1];
    Matrix weight = Eigen::Map<const Matrix>(params_.data() + off, in, out);
    off += static_cast<Index>(in) * out;
    Matrix bias = Eigen::Map<const Matrix>(params_.data() + off, 1, out);
    off += out;
    b.weights.push_back(trainable ? tape.variable(std::move(weight)) : tape.constant(std::move(weight)));
    b.biases.push_back(trainable ? tape.variable(std::move(bias)) : tape.constant(std::move(bias)));
  }
  return b;
}

Vector PolicyNetwork::gather_gradient(const ad::Tape& tape, const Bound& bound) const {
  Vector g(params_.size());
  Index off = 0;
  for (std::size_t l = 0; l < bound.weights.size(); ++l) {
    const Matrix gw = tape.grad(bound.weights[l]);
    g.segment(off, gw.size()) = gw.reshaped();
    off += gw.size();
    const Matrix gb = tape.grad(bound.biases[l]);
    g.segment(off, gb.size()) = gb.reshaped();
    off += gb.size();
  }
  return g;
}

ad::Var PolicyNetwork::forward(const Bound& bound, Real t, const ad::Var& x,
                               const ad::Var& features, std::vector<ad::Var>* hidden) const {
  if (x.cols() != spec_.state_dim)
    throw ConfigError("network expects state dimension " + std::to_string(spec_.state_dim) +
                      ", got " + std::to_string(x.cols()));
  if (features.rows() != 1 || features.cols() != spec_.feature_count)
    throw ConfigError("network expects " + std::to_string(spec_.feature_count) +
                      " measure features, got " + std::to_string(features.cols()));
  ad::Tape& tape = x.tape();

  ad::Var embed;
  if (spec_.torus_state) {
    embed = ad::concat_cols({ad::cos(x), ad::sin(x)});
  } else if (spec_.state_shift.size() > 0) {
    const Matrix shift = spec_.state_shift.transpose();
    const Matrix inv_scale = spec_.state_scale.cwiseInverse().transpose();
    embed = (x - tape.constant(shift)) * tape.constant(inv_scale);
  } else {
    embed = x;
  }

  ad::Var feats = features;
  if (spec_.input_bound) {
    embed = ad::soft_clamp(embed, *spec_.input_bound);
    feats = ad::soft_clamp(features, *spec_.input_bound);
  }

  const int e = spec_.state_embed_dim();
  const int m = spec_.feature_count;
  const std::size_t layers = bound.weights.size();
  const ad::Var& w0 = bound.weights[0];
  const ad::Var time = tape.constant(spec_.time_feature(t));
  const ad::Var shared = time * ad::slice_rows(w0, 0, 1) +
                         ad::matmul(feats, ad::slice_rows(w0, 1 + e, m)) + bound.biases[0];
  const auto act_for = [&](std::size_t l) {
    return l + 1 == layers ? ad::Activation::Identity : spec_.activation;
  };
  ad::Var h = ad::dense(embed, ad::slice_rows(w0, 1, e), shared, act_for(0));
  for (std::size_t l = 1; l < layers; ++l) {
    if (hidden) hidden->push_back(h);
    h = ad::dense(h, bound.weights[l], bound.biases[l], act_for(l));
  }

  if (spec_.clamp)
    h = spec_.hard_clamp ? ad::hard_clamp(h, *spec_.clamp) : ad::soft_clamp(h, *spec_.clamp);
  return h;
}

Matrix PolicyNetwork::evaluate(Real t, const Matrix& x, const RowVector& features) const {
  ad::Tape tape;
  const Bound b = bind(tape, false);
  return forward(b, t, tape.constant(x), tape.constant(Matrix(features))).value();
}

std::vector<Matrix> PolicyNetwork::activation_pattern(Real t, const Matrix& x,
                                                      const RowVector& features) const {
  ad::Tape tape;
  const Bound b = bind(tape, false);
  std::vector<ad::Var> hidden;
  forward(b, t, tape.constant(x), tape.constant(Matrix(features)), &hidden);
  std::vector<Matrix> out;
  out.reserve(hidden.size());
  for (const ad::Var& h : hidden) out.push_back((h.value().array() > 0.0).cast<Real>().matrix());
  return out;
}

}  // namespace mfc
