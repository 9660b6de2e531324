#include "mfc/serialize.hpp"

#include <cstdio>

namespace mfc {

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hash_json(const Json& j) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(j.dump())));
  return buf;
}

namespace {

Json vector_json(const Vector& v) {
  Json a = Json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

Vector json_vector(const Json& a) {
  Vector v(static_cast<Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) v(static_cast<Index>(i)) = a[i].get<Real>();
  return v;
}

}  // namespace

Json to_json(const NetworkSpec& s) {
  Json j;
  j["state_dim"] = s.state_dim;
  j["torus_state"] = s.torus_state;
  j["feature_count"] = s.feature_count;
  j["control_dim"] = s.control_dim;
  j["hidden"] = s.hidden;
  j["activation"] = to_string(s.activation);
  j["clamp"] = s.clamp ? Json(*s.clamp) : Json(nullptr);
  j["hard_clamp"] = s.hard_clamp;
  j["input_bound"] = s.input_bound ? Json(*s.input_bound) : Json(nullptr);
  j["output_init_scale"] = s.output_init_scale;
  j["time_embedding"] = to_string(s.time_embedding);
  j["horizon_time"] = s.horizon_time;
  j["time_rate"] = s.time_rate;
  j["state_shift"] = vector_json(s.state_shift);
  j["state_scale"] = vector_json(s.state_scale);
  return j;
}

NetworkSpec network_spec_from_json(const Json& j) {
  try {
    NetworkSpec s;
    s.state_dim = j.at("state_dim").get<int>();
    s.torus_state = j.at("torus_state").get<bool>();
    s.feature_count = j.at("feature_count").get<int>();
    s.control_dim = j.at("control_dim").get<int>();
    s.hidden = j.at("hidden").get<std::vector<int>>();
    s.activation = parse_activation(j.at("activation").get<std::string>());
    if (!j.at("clamp").is_null()) s.clamp = j.at("clamp").get<Real>();
    s.hard_clamp = j.at("hard_clamp").get<bool>();
    if (!j.at("input_bound").is_null()) s.input_bound = j.at("input_bound").get<Real>();
    s.output_init_scale = j.at("output_init_scale").get<Real>();
    s.time_embedding = parse_time_embedding(j.at("time_embedding").get<std::string>());
    s.horizon_time = j.at("horizon_time").get<Real>();
    s.time_rate = j.at("time_rate").get<Real>();
    s.state_shift = json_vector(j.at("state_shift"));
    s.state_scale = json_vector(j.at("state_scale"));
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed network description: ") + e.what());
  }
}

Json to_json(const FeatureBasis& b) {
  Json j;
  j["dim"] = b.dim();
  if (b.kind() == BasisKind::PolynomialMoments) {
    j["kind"] = "polynomial";
    j["factorial_scaling"] = b.factorial_scaling();
    j["exponents"] = b.indices();
  } else {
    j["kind"] = "fourier";
    j["modes"] = b.indices();
  }
  return j;
}

FeatureBasis basis_from_json(const Json& j) {
  try {
    const int dim = j.at("dim").get<int>();
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "polynomial")
      return FeatureBasis::monomials(dim, j.at("exponents").get<std::vector<std::vector<int>>>(),
                                     j.at("factorial_scaling").get<bool>());
    if (kind == "fourier")
      return FeatureBasis::fourier(dim, j.at("modes").get<std::vector<std::vector<int>>>());
    throw ConfigError("unknown basis kind '" + kind + "'");
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed basis description: ") + e.what());
  }
}

}  // namespace mfc
