#include "mfc/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace mfc {

namespace {

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw ConfigError(path + ": " + what);
}

const Json& field(const Json& obj, const std::string& key, const std::string& path) {
  auto it = obj.find(key);
  if (it == obj.end()) fail(join(path, key), "missing");
  return *it;
}

Real number(const Json& obj, const std::string& key, const std::string& path) {
  const Json& v = field(obj, key, path);
  if (!v.is_number()) fail(join(path, key), "expected a number, got " + v.dump());
  return v.get<Real>();
}

std::optional<Real> optional_number(const Json& obj, const std::string& key,
                                    const std::string& path) {
  if (field(obj, key, path).is_null()) return std::nullopt;
  return number(obj, key, path);
}

Real positive(const Json& obj, const std::string& key, const std::string& path) {
  const Real v = number(obj, key, path);
  if (!(v > 0.0) || !std::isfinite(v)) fail(join(path, key), "must be a positive number");
  return v;
}

long integer(const Json& obj, const std::string& key, const std::string& path, long min) {
  const Json& v = field(obj, key, path);
  if (!v.is_number_integer()) fail(join(path, key), "expected an integer, got " + v.dump());
  const long n = v.get<long>();
  if (n < min) fail(join(path, key), "must be >= " + std::to_string(min));
  return n;
}

std::uint64_t seed(const Json& obj, const std::string& key, const std::string& path) {
  const Json& v = field(obj, key, path);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
    fail(join(path, key), "expected a non-negative integer seed");
  return v.get<std::uint64_t>();
}

bool boolean(const Json& obj, const std::string& key, const std::string& path) {
  const Json& v = field(obj, key, path);
  if (!v.is_boolean()) fail(join(path, key), "expected true or false");
  return v.get<bool>();
}

std::string text(const Json& obj, const std::string& key, const std::string& path) {
  const Json& v = field(obj, key, path);
  if (!v.is_string()) fail(join(path, key), "expected a string");
  return v.get<std::string>();
}

std::vector<Real> reals(const Json& obj, const std::string& key, const std::string& path) {
  const Json& v = field(obj, key, path);
  if (v.is_number()) return {v.get<Real>()};
  if (!v.is_array()) fail(join(path, key), "expected a number or an array of numbers");
  std::vector<Real> out;
  for (const auto& e : v) {
    if (!e.is_number()) fail(join(path, key), "expected an array of numbers");
    out.push_back(e.get<Real>());
  }
  return out;
}

std::vector<Index> counts(const Json& obj, const std::string& key, const std::string& path) {
  const Json& v = field(obj, key, path);
  if (!v.is_array() || v.empty()) fail(join(path, key), "expected a non-empty array of integers");
  std::vector<Index> out;
  for (const auto& e : v) {
    if (!e.is_number_integer() || e.get<long>() < 1)
      fail(join(path, key), "entries must be integers >= 1");
    out.push_back(e.get<Index>());
  }
  return out;
}

std::vector<std::vector<int>> index_lists(const Json& v, const std::string& path) {
  if (!v.is_array() || v.empty()) fail(path, "expected a non-empty array of integer arrays");
  std::vector<std::vector<int>> out;
  for (const auto& row : v) {
    if (!row.is_array()) fail(path, "expected a non-empty array of integer arrays");
    std::vector<int> r;
    for (const auto& e : row) {
      if (!e.is_number_integer()) fail(path, "entries must be integers");
      r.push_back(e.get<int>());
    }
    out.push_back(std::move(r));
  }
  return out;
}

Vector to_vector(const std::vector<Real>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size()));
}

// ----- defaults ---------------------------------------------------------------

Json law_defaults(const std::string& kind, const std::string& path) {
  if (kind == "gaussian") return {{"kind", kind}, {"mean", {0.0}}, {"variance", {2.25}}};
  if (kind == "uniform") return {{"kind", kind}};
  if (kind == "two_cluster")
    return {{"kind", kind}, {"centers", {0.0, std::numbers::pi}}, {"concentration", 10.0}};
  if (kind == "empirical") return {{"kind", kind}, {"path", ""}};
  if (kind == "point_mass") return {{"kind", kind}, {"x", {0.0}}};
  fail(join(path, "kind"),
       "unknown initial law '" + kind + "' (expected gaussian, uniform, two_cluster, empirical, "
       "point_mass)");
}

Json basis_defaults(const std::string& kind, const std::string& path) {
  if (kind == "polynomial")
    return {{"kind", kind},
            {"degree", 10},
            {"cross_moments", false},
            {"factorial_scaling", true},
            {"exponents", nullptr},
            {"allow_space_mismatch", false}};
  if (kind == "fourier")
    return {{"kind", kind},
            {"max_mode", 5},
            {"modes", nullptr},
            {"allow_space_mismatch", false}};
  fail(join(path, "kind"), "unknown basis '" + kind + "' (expected polynomial, fourier)");
}

Json noise_law_defaults(const std::string& kind, const std::string& path) {
  if (kind == "gaussian") return {{"kind", kind}, {"truncate_k", nullptr}};
  if (kind == "uniform") return {{"kind", kind}, {"bound", 1.0}};
  fail(join(path, "kind"), "unknown noise law '" + kind + "' (expected gaussian, uniform)");
}

// Sections whose shape depends on their "kind" field.
std::optional<Json> kind_defaults(const std::string& path, const std::string& kind) {
  if (path == "initial_law") {
    Json j = law_defaults(kind, path);
    j["seed"] = 2;
    return j;
  }
  if (path == "evaluation.initial_law") return law_defaults(kind, path);
  if (path == "network.basis") return basis_defaults(kind, path);
  if (path == "noise.law") return noise_law_defaults(kind, path);
  return std::nullopt;
}

bool polymorphic(const std::string& path) {
  return path == "initial_law" || path == "evaluation.initial_law" || path == "network.basis" ||
         path == "noise.law";
}

Json merge(const Json& base, const Json& user, const std::string& path) {
  if (!user.is_object()) fail(path, "expected an object");
  Json out = base;
  if (polymorphic(path)) {
    auto k = user.find("kind");
    if (k != user.end()) {
      if (!k->is_string()) fail(join(path, "kind"), "expected a string");
      const std::string kind = k->get<std::string>();
      if (base.is_null() || base["kind"] != kind) {
        out = *kind_defaults(path, kind);
        if (!base.is_null() && base.contains("seed")) out["seed"] = base["seed"];
      }
    } else if (base.is_null()) {
      fail(path, "needs a \"kind\" field");
    }
  }
  for (const auto& [key, value] : user.items()) {
    const std::string sub = join(path, key);
    if (!out.contains(key)) fail(sub, "unknown key");
    Json& slot = out[key];
    if ((slot.is_object() || polymorphic(sub)) && !value.is_null()) {
      slot = merge(slot, value, sub);
    } else if (slot.is_object()) {
      fail(sub, "expected an object");
    } else {
      slot = value;
    }
  }
  return out;
}

}  // namespace

Json default_config(const std::string& problem) {
  Json problem_section;
  Json disc;
  Json law;
  Json basis;
  Json hidden = {32, 32};
  Json input_bound = 10.0;
  long particles = 2000;
  if (problem == "lq") {
    problem_section = {{"name", "lq"}, {"kappa", 1.0}, {"sigma", 1.0}, {"beta", 1.0}};
    disc = {{"dt", 0.05}, {"horizon_time", 20.0}};
    law = law_defaults("gaussian", "initial_law");
    basis = basis_defaults("polynomial", "network.basis");
  } else if (problem == "kuramoto") {
    problem_section = {{"name", "kuramoto"}, {"kappa", 2.5}, {"sigma", 1.0}, {"beta", 1.0}};
    disc = {{"dt", 0.05}, {"horizon_time", 20.0}};
    law = law_defaults("two_cluster", "initial_law");
    basis = basis_defaults("fourier", "network.basis");
    input_bound = nullptr;
    particles = 3000;
  } else if (problem == "systemic") {
    problem_section = {{"name", "systemic"}, {"kappa", 0.6}, {"sigma", 1.0}, {"q", 0.8},
                       {"eta", 2.0},         {"c", 2.0}};
    disc = {{"dt", 0.2}, {"horizon_time", 0.2}};
    law = law_defaults("gaussian", "initial_law");
    basis = basis_defaults("polynomial", "network.basis");
    hidden = {20, 20};
    particles = 100000;
  } else {
    fail("problem.name", "unknown problem '" + problem + "' (expected lq, kuramoto, systemic)");
  }
  law["seed"] = 2;

  Json j;
  j["problem"] = problem_section;
  j["discretization"] = disc;
  j["initial_law"] = law;
  j["noise"] = {{"seed", 1}, {"law", noise_law_defaults("gaussian", "noise.law")}};
  j["network"] = {{"hidden", hidden},
                  {"activation", "relu"},
                  {"clamp", nullptr},
                  {"hard_clamp", false},
                  {"input_bound", input_bound},
                  {"output_init_scale", 1.0},
                  {"time_embedding", "linear"},
                  {"time_rate", 1.0},
                  {"standardize", false},
                  {"seed", 3},
                  {"basis", basis}};
  j["training"] = {{"iterations", 6000},
                   {"particles", particles},
                   {"lr", 1e-3},
                   {"beta1", 0.9},
                   {"beta2", 0.999},
                   {"eps", 1e-8},
                   {"schedule", {{"kind", "step"}, {"milestones", {0.5, 0.75}}, {"factor", 0.5}}},
                   {"weight_decay", 0.0},
                   {"checkpoint_every", 0},
                   {"log_every", 100},
                   {"detach_features", false}};
  j["evaluation"] = {{"noise_seed", 1001},
                     {"particles", particles},
                     {"replications", 1},
                     {"resample_initial", false},
                     {"initial_law", nullptr}};
  j["diagnostics"] = {
      {"poc",
       {{"particles", {100, 200, 400, 800, 1600, 3200}},
        {"replications", 8},
        {"reference_particles", 0},
        {"seed", 11}}},
      {"rademacher",
       {{"particles", {100, 1600}},
        {"sigma_draws", 20},
        {"starts", 5},
        {"inner_iterations", 200},
        {"lr", 0.01},
        {"reference_particles", 2000},
        {"seed", 21},
        {"frozen_zero_output", false}}},
      {"convergence", {{"particles", {250, 1000, 4000}}}}};
  j["output"] = {{"trajectory_particles", 1000},
                 {"record_every", 1},
                 {"write_features", true},
                 {"heatmap_bins", 100}};
  return j;
}

InitialLaw parse_initial_law(const Json& j, const StateSpace& space, const std::string& path) {
  const std::string kind = text(j, "kind", path);
  const int d = space.dim;
  auto check_dim = [&](const std::vector<Real>& v, const std::string& key) {
    if (static_cast<int>(v.size()) != d)
      fail(join(path, key), "has " + std::to_string(v.size()) + " entries for a " +
                                std::to_string(d) + "-dimensional state");
  };
  InitialLaw law;
  if (kind == "gaussian") {
    if (space.is_torus()) fail(join(path, "kind"), "gaussian initial law is not supported on the torus");
    auto mean = reals(j, "mean", path);
    auto var = reals(j, "variance", path);
    check_dim(mean, "mean");
    check_dim(var, "variance");
    for (Real v : var)
      if (!(v >= 0.0)) fail(join(path, "variance"), "must be >= 0");
    law = GaussianDiag{to_vector(mean), to_vector(var)};
  } else if (kind == "uniform") {
    if (!space.is_torus()) fail(join(path, "kind"), "uniform initial law needs a torus state space");
    law = UniformTorus{};
  } else if (kind == "two_cluster") {
    if (!space.is_torus())
      fail(join(path, "kind"), "two_cluster initial law needs a torus state space");
    TwoClusterTorus tc;
    tc.centers = reals(j, "centers", path);
    if (tc.centers.empty()) fail(join(path, "centers"), "needs at least one center");
    tc.concentration = positive(j, "concentration", path);
    law = tc;
  } else if (kind == "empirical") {
    EmpiricalLaw e;
    e.path = text(j, "path", path);
    if (e.path.empty()) fail(join(path, "path"), "needs a file of points");
    try {
      e.points = load_points(e.path);
    } catch (const IoError& err) {
      fail(join(path, "path"), err.what());
    }
    if (e.points.cols() != d)
      fail(join(path, "path"), "points have dimension " + std::to_string(e.points.cols()));
    law = e;
  } else if (kind == "point_mass") {
    auto x = reals(j, "x", path);
    check_dim(x, "x");
    law = PointMass{to_vector(x)};
  } else {
    law_defaults(kind, path);
  }
  return law;
}

namespace {

Real law_variance(const InitialLaw& law) {
  if (auto g = std::get_if<GaussianDiag>(&law)) return g->var.sum();
  if (std::holds_alternative<PointMass>(law)) return 0.0;
  return std::nan("");
}

FeatureBasis parse_basis(const Json& j, int dim, const std::string& path) {
  const std::string kind = text(j, "kind", path);
  if (kind == "polynomial") {
    const bool scaled = boolean(j, "factorial_scaling", path);
    if (!j.at("exponents").is_null())
      return FeatureBasis::monomials(dim, index_lists(j.at("exponents"), join(path, "exponents")),
                                     scaled);
    const int degree = static_cast<int>(integer(j, "degree", path, 1));
    return FeatureBasis::polynomial(dim, degree, boolean(j, "cross_moments", path), scaled);
  }
  if (!j.at("modes").is_null())
    return FeatureBasis::fourier(dim, index_lists(j.at("modes"), join(path, "modes")));
  return FeatureBasis::fourier_symmetric(dim, static_cast<int>(integer(j, "max_mode", path, 1)));
}

}  // namespace

std::optional<Real> RunConfig::oracle_value() const {
  const Real var = law_variance(initial_law);
  if (std::isnan(var)) return std::nullopt;
  if (problem_name == "lq") return lq_value_oracle(lq, var);
  if (problem_name == "systemic") return systemic_value_oracle(systemic, 0.0, var);
  return std::nullopt;
}

RunConfig resolve_config(const Json& user) {
  if (!user.is_object()) throw ConfigError("configuration: expected a JSON object");
  std::string name = "lq";
  if (auto p = user.find("problem"); p != user.end()) {
    if (!p->is_object()) fail("problem", "expected an object");
    if (p->contains("name")) name = text(*p, "name", "problem");
  }

  RunConfig rc;
  rc.resolved = merge(default_config(name), user, "");
  const Json& r = rc.resolved;
  rc.problem_name = name;

  try {
    const Json& pj = r["problem"];
    const Json& dj = r["discretization"];
    const Real dt = positive(dj, "dt", "discretization");
    const Real horizon = positive(dj, "horizon_time", "discretization");
    if (name == "lq") {
      rc.lq = {number(pj, "kappa", "problem"),
               number(pj, "sigma", "problem"), number(pj, "beta", "problem")};
      rc.problem = make_lq(rc.lq, dt, horizon);
    } else if (name == "kuramoto") {
      rc.kuramoto = {number(pj, "kappa", "problem"), number(pj, "sigma", "problem"),
                     number(pj, "beta", "problem")};
      rc.problem = make_kuramoto(rc.kuramoto, dt, horizon);
    } else {
      rc.systemic = {number(pj, "kappa", "problem"), number(pj, "sigma", "problem"),
                     number(pj, "q", "problem"),     number(pj, "eta", "problem"),
                     number(pj, "c", "problem"),     horizon};
      rc.problem = make_systemic(rc.systemic, dt);
    }
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    if (msg.rfind("problem", 0) == 0 || msg.rfind("discretization", 0) == 0) throw;
    throw ConfigError("problem: " + msg);
  }

  const Json& nj = r["noise"];
  const Json& lawj = nj["law"];
  if (text(lawj, "kind", "noise.law") == "gaussian") {
    auto k = optional_number(lawj, "truncate_k", "noise.law");
    if (k && !(*k > 0.0)) fail("noise.law.truncate_k", "must be > 0");
    rc.problem.noise = NoiseLaw::gaussian(rc.problem.dt, k);
  } else {
    rc.problem.noise = NoiseLaw::uniform(positive(lawj, "bound", "noise.law"));
  }

  rc.initial_law = parse_initial_law(r["initial_law"], rc.problem.space, "initial_law");

  // Network and basis.
  const Json& netj = r["network"];
  const Json& bj = netj["basis"];
  try {
    rc.basis = parse_basis(bj, rc.problem.space.dim, "network.basis");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    if (msg.rfind("network.basis", 0) == 0) throw;
    throw ConfigError("network.basis: " + msg);
  }
  try {
    rc.basis.check_compatible(rc.problem.space,
                              boolean(bj, "allow_space_mismatch", "network.basis"));
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("network.basis.kind: ") + e.what());
  }

  NetworkSpec& ns = rc.network;
  ns.state_dim = rc.problem.space.dim;
  ns.torus_state = rc.problem.space.is_torus();
  ns.feature_count = rc.basis.size();
  ns.control_dim = rc.problem.control_dim;
  {
    const Json& h = netj["hidden"];
    if (!h.is_array()) fail("network.hidden", "expected an array of layer widths");
    ns.hidden.clear();
    for (const auto& w : h) {
      if (!w.is_number_integer() || w.get<int>() < 1)
        fail("network.hidden", "widths must be integers >= 1");
      ns.hidden.push_back(w.get<int>());
    }
  }
  try {
    ns.activation = parse_activation(text(netj, "activation", "network"));
    ns.time_embedding = parse_time_embedding(text(netj, "time_embedding", "network"));
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("network: ") + e.what());
  }
  ns.clamp = optional_number(netj, "clamp", "network");
  ns.hard_clamp = boolean(netj, "hard_clamp", "network");
  ns.input_bound = optional_number(netj, "input_bound", "network");
  ns.output_init_scale = number(netj, "output_init_scale", "network");
  ns.time_rate = positive(netj, "time_rate", "network");
  ns.horizon_time = rc.problem.horizon * rc.problem.dt;
  if (boolean(netj, "standardize", "network")) {
    const auto* g = std::get_if<GaussianDiag>(&rc.initial_law);
    if (!g) fail("network.standardize", "needs a gaussian initial law");
    ns.state_shift = g->mean;
    ns.state_scale = g->var.cwiseSqrt().cwiseMax(1e-12);
  }
  try {
    ns.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("network: ") + e.what());
  }

  // Training.
  const Json& tj = r["training"];
  TrainConfig& tc = rc.training;
  tc.iterations = integer(tj, "iterations", "training", 1);
  tc.particles = integer(tj, "particles", "training", 1);
  tc.adam.lr = number(tj, "lr", "training");
  if (!(tc.adam.lr >= 0.0)) fail("training.lr", "must be >= 0");
  tc.adam.beta1 = number(tj, "beta1", "training");
  tc.adam.beta2 = number(tj, "beta2", "training");
  tc.adam.eps = positive(tj, "eps", "training");
  const Json& sj = tj["schedule"];
  try {
    tc.schedule.kind = parse_schedule(text(sj, "kind", "training.schedule"));
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("training.schedule.kind: ") + e.what());
  }
  tc.schedule.milestones = reals(sj, "milestones", "training.schedule");
  tc.schedule.factor = number(sj, "factor", "training.schedule");
  tc.weight_decay = number(tj, "weight_decay", "training");
  tc.checkpoint_every = integer(tj, "checkpoint_every", "training", 0);
  tc.log_every = integer(tj, "log_every", "training", 0);
  tc.detach_features = boolean(tj, "detach_features", "training");
  tc.seeds = {seed(nj, "seed", "noise"), seed(r["initial_law"], "seed", "initial_law"),
              seed(netj, "seed", "network")};
  try {
    tc.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("training: ") + e.what());
  }

  // Evaluation.
  const Json& ej = r["evaluation"];
  EvalOptions& eo = rc.evaluation.options;
  eo.noise_seed = seed(ej, "noise_seed", "evaluation");
  eo.init_seed = tc.seeds.init;
  eo.particles = integer(ej, "particles", "evaluation", 1);
  eo.replications = static_cast<int>(integer(ej, "replications", "evaluation", 1));
  eo.resample_initial = boolean(ej, "resample_initial", "evaluation");
  if (!ej["initial_law"].is_null())
    rc.evaluation.law =
        parse_initial_law(ej["initial_law"], rc.problem.space, "evaluation.initial_law");

  // Diagnostics.
  const Json& pocj = r["diagnostics"]["poc"];
  const std::string pp = "diagnostics.poc";
  rc.poc.particles = counts(pocj, "particles", pp);
  for (std::size_t i = 1; i < rc.poc.particles.size(); ++i)
    if (rc.poc.particles[i] <= rc.poc.particles[i - 1])
      fail(pp + ".particles", "must be strictly increasing");
  rc.poc.replications = static_cast<int>(integer(pocj, "replications", pp, 1));
  rc.poc.reference_particles = integer(pocj, "reference_particles", pp, 0);
  rc.poc.seed = seed(pocj, "seed", pp);
  if (rc.poc.reference_particles != 0 &&
      rc.poc.reference_particles <= rc.poc.particles.back())
    fail(pp + ".reference_particles", "must exceed the largest particle count");

  const Json& rj = r["diagnostics"]["rademacher"];
  const std::string rp = "diagnostics.rademacher";
  rc.rademacher.particles = counts(rj, "particles", rp);
  rc.rademacher.sigma_draws = static_cast<int>(integer(rj, "sigma_draws", rp, 1));
  rc.rademacher.starts = static_cast<int>(integer(rj, "starts", rp, 1));
  rc.rademacher.inner_iterations = static_cast<int>(integer(rj, "inner_iterations", rp, 0));
  rc.rademacher.lr = number(rj, "lr", rp);
  rc.rademacher.reference_particles = integer(rj, "reference_particles", rp, 1);
  rc.rademacher.seed = seed(rj, "seed", rp);
  rc.rademacher.frozen_zero_output = boolean(rj, "frozen_zero_output", rp);

  rc.convergence.particles =
      counts(r["diagnostics"]["convergence"], "particles", "diagnostics.convergence");

  const Json& oj = r["output"];
  integer(oj, "trajectory_particles", "output", 0);
  integer(oj, "record_every", "output", 1);
  boolean(oj, "write_features", "output");
  integer(oj, "heatmap_bins", "output", 2);

  rc.config_hash = hash_json(r);
  rc.model_hash = hash_json(Json{{"problem", r["problem"]},
                                 {"discretization", r["discretization"]},
                                 {"network", r["network"]}});
  rc.basis_hash = hash_json(to_json(rc.basis));
  return rc;
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read configuration file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return Json::parse(ss.str());
  } catch (const Json::parse_error& e) {
    throw ConfigError("configuration file '" + path + "' is not valid JSON: " + e.what());
  }
}

RunConfig load_config(const std::string& path) { return resolve_config(read_json_file(path)); }

}  // namespace mfc
