#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gfilt/epi/params.hpp"
#include "gfilt/factored/dirichlet_projection.hpp"
#include "gfilt/fcond/conditional.hpp"
#include "gfilt/filter/jitter.hpp"
#include "gfilt/filter/particle.hpp"
#include "gfilt/harness/metrics.hpp"
#include "gfilt/lorenz/lorenz.hpp"

namespace gfilt {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ModelKind { SEIRS, SIS, Lorenz };

// exact: dense joint filter (small networks only)
// factored / factored-particle / factored-variational: known parameters,
//   one belief per node
// fcf / fcpf / fcvf: conditional factored filters with parameter particles
// cpf: conditional particle filter over joint compartment states
// lorenz: conditional particle filter on the stochastic Lorenz system
enum class FilterKind { Exact, Factored, FactoredParticle, FactoredVariational, Fcf, Fcpf, Fcvf, Cpf, Lorenz };

enum class ObservationKind { Tests, Dirichlet, Counts };

struct NetworkConfig {
  std::string source = "synthetic";  // synthetic, karate, edge-list, path, cycle, star
  std::size_t nodes = 2905;
  std::size_t attach = 5;            // edges per new node of the synthetic generator
  std::uint64_t seed = 1;
  std::string path;                  // edge-list file
  int subpop_size = 1;               // M_k for every node
};

struct ModelConfig {
  ModelKind kind = ModelKind::SEIRS;
  std::vector<double> params;        // (beta, sigma, gamma, rho), (beta, gamma) or theta1..4
  ObservationKind observation = ObservationKind::Tests;
  TestObsParams tests;
  double obs_C = 10.0;               // Dirichlet observation scale
  double obs_alpha = 1.0;            // probability a node is observed (Dirichlet and counts)
  int obs_m = 5;                     // draws per count observation
  SubpopParams subpop{1.0, 1.0, 10.0};
  bool use_subpop = false;
  LorenzParams lorenz;
};

struct FilterConfig {
  FilterKind algorithm = FilterKind::Factored;
  std::size_t N = 1;                 // parameter particles
  std::size_t M = 1;                 // state particles per parameter particle, or per cluster
  JitterSchedule jitter{1e-4, 9e-6, 0.996, {1.0, 1.0, 1.0, 0.09}};
  std::vector<double> init_lo, init_hi;  // uniform box for the initial parameter particles
  ParamBox box = ParamBox::unit(4);
  ParamWeight weight = ParamWeight::FactoredMarginal;
  std::size_t mc_samples = 64;
  ParticleOptions options;
  VariationalSettings variational;
  int sis_threshold = 3;
  double lorenz_init_variance = 10.0;
};

struct ExperimentConfig {
  std::string name = "custom";
  NetworkConfig network;
  ModelConfig model;
  FilterConfig filter;
  std::size_t steps = 600;
  std::size_t runs = 1;
  bool die_out_filter = true;
  std::size_t max_attempts = 0;  // 0: 20 per requested run
  std::uint64_t seed = 1;
  std::string output;

  std::size_t attempt_budget() const { return max_attempts ? max_attempts : 20 * runs; }

  bool has_param_filter() const
  {
    switch (filter.algorithm) {
      case FilterKind::Fcf:
      case FilterKind::Fcpf:
      case FilterKind::Fcvf:
      case FilterKind::Cpf:
      case FilterKind::Lorenz:
        return true;
      default:
        return false;
    }
  }

  std::size_t param_count() const
  {
    return model.kind == ModelKind::SIS ? 2 : 4;
  }

  void validate() const
  {
    if (steps < 1) throw ConfigError("steps must be >= 1");
    if (runs < 1) throw ConfigError("runs must be >= 1");
    if (filter.N < 1 || filter.M < 1) throw ConfigError("particle counts must be >= 1");
    if (model.params.size() != param_count())
      throw ConfigError("model expects " + std::to_string(param_count()) + " parameters, got " +
                        std::to_string(model.params.size()));
    const bool lorenz_model = model.kind == ModelKind::Lorenz;
    if (lorenz_model != (filter.algorithm == FilterKind::Lorenz))
      throw ConfigError("the lorenz filter and the lorenz model go together");
    if (lorenz_model) {
      model.lorenz.validate();
    } else {
      for (double v : model.params)
        if (!(v >= 0.0 && v <= 1.0)) throw ConfigError("epidemic parameters must lie in [0, 1]");
      model.tests.validate();
      model.subpop.validate();
    }
    const bool simplex = filter.algorithm == FilterKind::FactoredVariational || filter.algorithm == FilterKind::Fcvf;
    if (simplex && model.kind != ModelKind::SEIRS) throw ConfigError("simplex-labelled filters need the SEIRS model");
    if (filter.algorithm == FilterKind::FactoredVariational && model.observation != ObservationKind::Dirichlet)
      throw ConfigError("factored-variational needs dirichlet observations");
    if (filter.algorithm == FilterKind::Fcvf && model.observation != ObservationKind::Counts)
      throw ConfigError("fcvf needs counts observations");
    if (!simplex && !lorenz_model && model.observation != ObservationKind::Tests)
      throw ConfigError("compartment filters need test observations");
    if (filter.algorithm == FilterKind::Fcvf && !model.use_subpop) throw ConfigError("fcvf needs the subpopulation model");
    if (network.subpop_size < 1) throw ConfigError("subpop_size must be >= 1");
    if (has_param_filter()) {
      const std::size_t d = param_count();
      if (filter.init_lo.size() != d || filter.init_hi.size() != d)
        throw ConfigError("init box must have one bound per parameter");
      for (std::size_t j = 0; j < d; ++j)
        if (!(filter.init_lo[j] <= filter.init_hi[j])) throw ConfigError("init box bounds are reversed");
      if (filter.jitter.D.size() != d) throw ConfigError("jitter diagonal must have one entry per parameter");
      if (filter.box.lo.size() != d || filter.box.hi.size() != d) throw ConfigError("parameter box dimension mismatch");
      try {
        filter.jitter.validate();
      } catch (const std::domain_error& e) {
        throw ConfigError(e.what());
      }
      if (filter.mc_samples < 1) throw ConfigError("mc_samples must be >= 1");
    }
    if (filter.algorithm == FilterKind::FactoredVariational) filter.variational.validate();
  }
};

// ---------------------------------------------------------------------------
// Named parameter sets

inline std::vector<double> model_params_preset(const std::string& name)
{
  if (name == "seirs-covid") return {0.2, 1.0 / 3.0, 1.0 / 14.0, 1.0 / 180.0};
  if (name == "seirs-flu") return {0.27, 0.5, 1.0 / 7.0, 1.0 / 90.0};
  if (name == "sis-karate") return {0.2, 0.1};
  if (name == "lorenz") return {10.0, 28.0, 8.0 / 3.0, 0.8};
  throw ConfigError("unknown parameter preset '" + name + "'");
}

/// Test rates of the named setups; the error rates follow the parameter
/// preset they are paired with.
inline TestObsParams obs_preset(const std::string& name)
{
  if (name == "obs-setup" || name == "seirs-covid") return {0.2, 0.7, 0.9, 0.05, 0.1, 0.1};
  if (name == "seirs-flu") return {0.2, 0.7, 0.9, 0.05, 0.1, 0.3};
  if (name == "sis-karate") return {0.1, 0.0, 0.9, 0.0, 0.1, 0.1};
  throw ConfigError("unknown observation preset '" + name + "'");
}

inline std::vector<std::string> preset_names()
{
  return {"seirs-covid", "seirs-flu", "lorenz-baseline", "lorenz-adaptive", "sis-karate", "seirs-variational", "subpop-fcvf"};
}

/// Complete experiment setups.
inline ExperimentConfig experiment_preset(const std::string& name)
{
  ExperimentConfig c;
  c.name = name;
  const std::vector<double> epi_lo{0.0, 0.0, 0.0, 0.0}, epi_hi{0.8, 0.8, 0.8, 0.1};
  if (name == "seirs-covid") {
    c.model.params = model_params_preset("seirs-covid");
    c.model.tests = obs_preset("seirs-covid");
    c.filter.algorithm = FilterKind::Factored;
    c.runs = 100;
  } else if (name == "seirs-flu") {
    c.model.params = model_params_preset("seirs-flu");
    c.model.tests = obs_preset("seirs-flu");
    c.filter.algorithm = FilterKind::Fcf;
    c.filter.N = 300;
    c.filter.init_lo = epi_lo;
    c.filter.init_hi = epi_hi;
    c.runs = 20;
  } else if (name == "lorenz-baseline" || name == "lorenz-adaptive") {
    c.model.kind = ModelKind::Lorenz;
    c.model.params = model_params_preset("lorenz");
    c.filter.algorithm = FilterKind::Lorenz;
    c.filter.N = c.filter.M = 300;
    const double s = std::pow(300.0, -1.5);
    c.filter.jitter = name == "lorenz-baseline" ? JitterSchedule::constant({60 * s, 60 * s, 10 * s, s})
                                                : JitterSchedule{25.0, 0.01, 0.996, {60 * s, 60 * s, 10 * s, s}};
    c.filter.init_lo = {5.0, 18.0, 1.0, 0.5};
    c.filter.init_hi = {20.0, 50.0, 8.0, 3.0};
    c.filter.box = {std::vector<double>(4, 0.0), std::vector<double>(4, std::numeric_limits<double>::infinity())};
    c.filter.mc_samples = 32;
    c.filter.options.mixture = MixtureSampling::Stratified;
    c.network.source = "none";
    c.steps = 100000;
    c.runs = 10;
    c.die_out_filter = false;
  } else if (name == "sis-karate") {
    c.model.kind = ModelKind::SIS;
    c.model.params = model_params_preset("sis-karate");
    c.model.tests = obs_preset("sis-karate");
    c.network.source = "karate";
    c.filter.algorithm = FilterKind::Cpf;
    c.filter.N = 300;
    c.filter.M = particle_count_formula(34);
    c.filter.init_lo = {0.0, 0.0};
    c.filter.init_hi = {0.8, 0.8};
    c.filter.jitter = {1e-4, 9e-6, 0.996, {1.0, 1.0}};
    c.filter.box = ParamBox::unit(2);
    c.filter.mc_samples = 32;
    c.runs = 20;
  } else if (name == "seirs-variational") {
    c.model.params = model_params_preset("seirs-covid");
    c.model.observation = ObservationKind::Dirichlet;
    c.model.obs_C = 10.0;
    c.model.obs_alpha = 0.5;
    c.model.subpop.K = 10.0;
    c.filter.algorithm = FilterKind::FactoredVariational;
    c.filter.variational.K = 10.0;
    c.filter.variational.C = 10.0;
    c.runs = 10;
  } else if (name == "subpop-fcvf") {
    c.model.params = model_params_preset("seirs-covid");
    c.model.observation = ObservationKind::Counts;
    c.model.obs_m = 5;
    c.model.obs_alpha = 0.7;
    c.model.subpop = {0.2, 0.1, 3.0};
    c.model.use_subpop = true;
    c.network.subpop_size = 10;
    c.filter.algorithm = FilterKind::Fcvf;
    c.filter.N = 300;
    c.filter.init_lo = epi_lo;
    c.filter.init_hi = epi_hi;
    c.runs = 10;
  } else {
    throw ConfigError("unknown preset '" + name + "'");
  }
  return c;
}

// ---------------------------------------------------------------------------
// JSON form

NLOHMANN_JSON_SERIALIZE_ENUM(ModelKind, {{ModelKind::SEIRS, "seirs"}, {ModelKind::SIS, "sis"}, {ModelKind::Lorenz, "lorenz"}})
NLOHMANN_JSON_SERIALIZE_ENUM(FilterKind, {{FilterKind::Exact, "exact"},
                                          {FilterKind::Factored, "factored"},
                                          {FilterKind::FactoredParticle, "factored-particle"},
                                          {FilterKind::FactoredVariational, "factored-variational"},
                                          {FilterKind::Fcf, "fcf"},
                                          {FilterKind::Fcpf, "fcpf"},
                                          {FilterKind::Fcvf, "fcvf"},
                                          {FilterKind::Cpf, "cpf"},
                                          {FilterKind::Lorenz, "lorenz"}})
NLOHMANN_JSON_SERIALIZE_ENUM(ObservationKind, {{ObservationKind::Tests, "tests"},
                                               {ObservationKind::Dirichlet, "dirichlet"},
                                               {ObservationKind::Counts, "counts"}})
NLOHMANN_JSON_SERIALIZE_ENUM(ParamWeight, {{ParamWeight::FactoredMarginal, "factored-marginal"},
                                           {ParamWeight::MonteCarlo, "monte-carlo"}})
NLOHMANN_JSON_SERIALIZE_ENUM(ResampleScheme, {{ResampleScheme::Multinomial, "multinomial"},
                                              {ResampleScheme::Systematic, "systematic"}})
NLOHMANN_JSON_SERIALIZE_ENUM(MixtureSampling, {{MixtureSampling::Ancestor, "ancestor"},
                                               {MixtureSampling::Stratified, "stratified"}})

namespace detail {

template <class T>
void read(const nlohmann::json& j, const char* key, T& out)
{
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

// Enums must name a known value; the serializer would map unknown strings
// to the first enumerator.
template <class E>
void read_enum(const nlohmann::json& j, const char* key, E& out)
{
  if (!j.contains(key)) return;
  const E v = j.at(key).get<E>();
  if (nlohmann::json(v) != j.at(key)) throw ConfigError(std::string("config key '") + key + "': unknown value " + j.at(key).dump());
  out = v;
}

inline double json_bound(const nlohmann::json& v)
{
  if (v.is_null()) return std::numeric_limits<double>::infinity();
  return v.get<double>();
}

inline nlohmann::json bound_json(double v)
{
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

}  // namespace detail

/// Reads a config, starting from `preset` when the document names one, and
/// overriding only the keys present.
inline ExperimentConfig config_from_json(const nlohmann::json& j)
{
  if (!j.is_object()) throw ConfigError("config must be an object");
  ExperimentConfig c;
  if (j.contains("preset")) c = experiment_preset(j.at("preset").get<std::string>());
  detail::read(j, "name", c.name);
  detail::read(j, "steps", c.steps);
  detail::read(j, "runs", c.runs);
  detail::read(j, "die_out_filter", c.die_out_filter);
  detail::read(j, "max_attempts", c.max_attempts);
  detail::read(j, "seed", c.seed);
  detail::read(j, "output", c.output);
  if (j.contains("network")) {
    const auto& n = j.at("network");
    detail::read(n, "source", c.network.source);
    detail::read(n, "nodes", c.network.nodes);
    detail::read(n, "attach", c.network.attach);
    detail::read(n, "seed", c.network.seed);
    detail::read(n, "path", c.network.path);
    detail::read(n, "subpop_size", c.network.subpop_size);
  }
  if (j.contains("model")) {
    const auto& m = j.at("model");
    detail::read_enum(m, "kind", c.model.kind);
    if (m.contains("params")) {
      const auto& p = m.at("params");
      c.model.params = p.is_string() ? model_params_preset(p.get<std::string>()) : p.get<std::vector<double>>();
    }
    detail::read_enum(m, "observation", c.model.observation);
    if (m.contains("tests")) {
      const auto& t = m.at("tests");
      if (t.is_string()) {
        c.model.tests = obs_preset(t.get<std::string>());
      } else {
        detail::read(t, "alpha_S", c.model.tests.alpha_S);
        detail::read(t, "alpha_E", c.model.tests.alpha_E);
        detail::read(t, "alpha_I", c.model.tests.alpha_I);
        detail::read(t, "alpha_R", c.model.tests.alpha_R);
        detail::read(t, "lambda_FP", c.model.tests.lambda_FP);
        detail::read(t, "lambda_FN", c.model.tests.lambda_FN);
      }
    }
    detail::read(m, "obs_C", c.model.obs_C);
    detail::read(m, "obs_alpha", c.model.obs_alpha);
    detail::read(m, "obs_m", c.model.obs_m);
    if (m.contains("subpop")) {
      const auto& s = m.at("subpop");
      detail::read(s, "kappa1", c.model.subpop.kappa1);
      detail::read(s, "kappa2", c.model.subpop.kappa2);
      detail::read(s, "K", c.model.subpop.K);
    }
    detail::read(m, "use_subpop", c.model.use_subpop);
    if (m.contains("lorenz")) {
      const auto& l = m.at("lorenz");
      detail::read(l, "dt", c.model.lorenz.dt);
      detail::read(l, "obs_stride", c.model.lorenz.obs_stride);
      detail::read(l, "obs_variance", c.model.lorenz.obs_variance);
    }
  }
  if (j.contains("filter")) {
    const auto& f = j.at("filter");
    detail::read_enum(f, "algorithm", c.filter.algorithm);
    detail::read(f, "N", c.filter.N);
    detail::read(f, "M", c.filter.M);
    if (f.contains("jitter")) {
      const auto& s = f.at("jitter");
      detail::read(s, "a", c.filter.jitter.a);
      detail::read(s, "b", c.filter.jitter.b);
      detail::read(s, "r", c.filter.jitter.r);
      detail::read(s, "D", c.filter.jitter.D);
    }
    detail::read(f, "init_lo", c.filter.init_lo);
    detail::read(f, "init_hi", c.filter.init_hi);
    if (f.contains("box")) {
      c.filter.box.lo.clear();
      c.filter.box.hi.clear();
      for (const auto& v : f.at("box").at("lo")) c.filter.box.lo.push_back(v.is_null() ? -std::numeric_limits<double>::infinity() : v.get<double>());
      for (const auto& v : f.at("box").at("hi")) c.filter.box.hi.push_back(detail::json_bound(v));
    }
    detail::read_enum(f, "weight", c.filter.weight);
    detail::read(f, "mc_samples", c.filter.mc_samples);
    detail::read_enum(f, "resample", c.filter.options.resample);
    detail::read_enum(f, "mixture", c.filter.options.mixture);
    if (f.contains("variational")) {
      const auto& v = f.at("variational");
      detail::read(v, "K", c.filter.variational.K);
      detail::read(v, "C", c.filter.variational.C);
      detail::read(v, "samples", c.filter.variational.samples);
      detail::read(v, "eps", c.filter.variational.eps);
    }
    detail::read(f, "sis_threshold", c.filter.sis_threshold);
    detail::read(f, "lorenz_init_variance", c.filter.lorenz_init_variance);
  }
  return c;
}

inline nlohmann::json config_to_json(const ExperimentConfig& c)
{
  using nlohmann::json;
  json box_lo = json::array(), box_hi = json::array();
  for (double v : c.filter.box.lo) box_lo.push_back(detail::bound_json(v));
  for (double v : c.filter.box.hi) box_hi.push_back(detail::bound_json(v));
  const auto& t = c.model.tests;
  return json{
      {"name", c.name},
      {"steps", c.steps},
      {"runs", c.runs},
      {"die_out_filter", c.die_out_filter},
      {"max_attempts", c.max_attempts},
      {"seed", c.seed},
      {"output", c.output},
      {"network",
       {{"source", c.network.source},
        {"nodes", c.network.nodes},
        {"attach", c.network.attach},
        {"seed", c.network.seed},
        {"path", c.network.path},
        {"subpop_size", c.network.subpop_size}}},
      {"model",
       {{"kind", c.model.kind},
        {"params", c.model.params},
        {"observation", c.model.observation},
        {"tests",
         {{"alpha_S", t.alpha_S},
          {"alpha_E", t.alpha_E},
          {"alpha_I", t.alpha_I},
          {"alpha_R", t.alpha_R},
          {"lambda_FP", t.lambda_FP},
          {"lambda_FN", t.lambda_FN}}},
        {"obs_C", c.model.obs_C},
        {"obs_alpha", c.model.obs_alpha},
        {"obs_m", c.model.obs_m},
        {"subpop", {{"kappa1", c.model.subpop.kappa1}, {"kappa2", c.model.subpop.kappa2}, {"K", c.model.subpop.K}}},
        {"use_subpop", c.model.use_subpop},
        {"lorenz",
         {{"dt", c.model.lorenz.dt}, {"obs_stride", c.model.lorenz.obs_stride}, {"obs_variance", c.model.lorenz.obs_variance}}}}},
      {"filter",
       {{"algorithm", c.filter.algorithm},
        {"N", c.filter.N},
        {"M", c.filter.M},
        {"jitter", {{"a", c.filter.jitter.a}, {"b", c.filter.jitter.b}, {"r", c.filter.jitter.r}, {"D", c.filter.jitter.D}}},
        {"init_lo", c.filter.init_lo},
        {"init_hi", c.filter.init_hi},
        {"box", {{"lo", box_lo}, {"hi", box_hi}}},
        {"weight", c.filter.weight},
        {"mc_samples", c.filter.mc_samples},
        {"resample", c.filter.options.resample},
        {"mixture", c.filter.options.mixture},
        {"variational",
         {{"K", c.filter.variational.K},
          {"C", c.filter.variational.C},
          {"samples", c.filter.variational.samples},
          {"eps", c.filter.variational.eps}}},
        {"sis_threshold", c.filter.sis_threshold},
        {"lorenz_init_variance", c.filter.lorenz_init_variance}}},
  };
}

inline nlohmann::json read_config_json(const std::string& path)
{
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config '" + path + "': " + e.what());
  }
}

inline ExperimentConfig load_config(const std::string& path) { return config_from_json(read_config_json(path)); }

}  // namespace gfilt
