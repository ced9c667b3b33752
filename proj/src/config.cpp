#include "attnrc/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace attnrc::cli {

namespace {

json laser_to_json(const reservoir::LaserParams& p) {
  json j;
  j["alpha_tilde"] = p.alpha_tilde;
  j["phi"] = p.phi;
  j["kappa"] = p.kappa;
  j["tau"] = p.tau;
  j["pump"] = p.pump;
  j["eta"] = p.eta;
  j["time_scale"] = p.time_scale;
  j["coupling"] = p.coupling == reservoir::CouplingVariant::gain_coupled ? "gain_coupled" : "literal";
  return j;
}

json esn_to_json(const reservoir::EsnParams& p) {
  json j;
  j["spectral_radius"] = p.spectral_radius;
  j["leak"] = p.leak;
  j["input_scale"] = p.input_scale;
  return j;
}

/// Recursively verify that every key of `given` exists in `schema`; values
/// in `schema` define the expected structure.
void reject_unknown_keys(const json& schema, const json& given, const std::string& prefix) {
  if (!given.is_object()) return;
  for (const auto& [key, value] : given.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    if (!schema.is_object() || !schema.contains(key))
      throw ConfigError("unknown config key: " + path);
    if (value.is_object()) reject_unknown_keys(schema.at(key), value, path);
  }
}

template <typename T>
void maybe_get(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void parse_laser(const json& j, reservoir::LaserParams& p) {
  maybe_get(j, "alpha_tilde", p.alpha_tilde);
  maybe_get(j, "phi", p.phi);
  maybe_get(j, "kappa", p.kappa);
  maybe_get(j, "tau", p.tau);
  maybe_get(j, "pump", p.pump);
  maybe_get(j, "eta", p.eta);
  maybe_get(j, "time_scale", p.time_scale);
  if (j.contains("coupling")) {
    const std::string c = j.at("coupling").get<std::string>();
    if (c == "gain_coupled")
      p.coupling = reservoir::CouplingVariant::gain_coupled;
    else if (c == "literal")
      p.coupling = reservoir::CouplingVariant::literal;
    else
      throw ConfigError("reservoir.laser.coupling must be gain_coupled or literal, got " + c);
  }
}

}  // namespace

json Config::to_json() const {
  json j;
  j["dataset"]["system"] = dataset.system;
  j["dataset"]["sigma_force"] = dataset.sigma_force;
  j["dataset"]["n_train"] = dataset.n_train;
  j["dataset"]["n_test"] = dataset.n_test;
  j["dataset"]["window"] = dataset.window;
  j["dataset"]["alrs_exposure"] = dataset.alrs_exposure;
  j["dataset"]["seed"] = dataset.seed;

  j["reservoir"]["backend"] = reservoir.backend;
  j["reservoir"]["nodes"] = reservoir.nodes;
  j["reservoir"]["theta"] = reservoir.theta;
  j["reservoir"]["h_sub"] = reservoir.h_sub;
  j["reservoir"]["washout"] = reservoir.washout;
  j["reservoir"]["laser"] = laser_to_json(reservoir.laser);
  j["reservoir"]["esn"] = esn_to_json(reservoir.esn);

  j["readout"]["model"] = readout.model;
  j["readout"]["lambda_min"] = readout.lambda_min;
  j["readout"]["lambda_max"] = readout.lambda_max;
  j["readout"]["lambda_points"] = readout.lambda_points;
  j["readout"]["validation_fraction"] = readout.validation_fraction;
  j["readout"]["selection"] = readout.selection;
  j["readout"]["train"]["learning_rate"] = readout.train.learning_rate;
  j["readout"]["train"]["epochs"] = readout.train.epochs;
  j["readout"]["train"]["optimizer"] =
      readout.train.optimizer == attnrc::readout::Optimizer::adam ? "adam" : "plain_gd";
  j["readout"]["train"]["seed"] = readout.train.seed;
  j["readout"]["train"]["patience"] = readout.train.patience;

  j["eval"]["horizon"] = eval.horizon;
  j["eval"]["vpt_threshold"] = eval.vpt_threshold;
  j["eval"]["vpt_starts"] = eval.vpt_starts;
  j["eval"]["closed_loop_duration"] = eval.closed_loop_duration;
  j["eval"]["lyapunov_lorenz"] = eval.lyapunov_lorenz;
  j["eval"]["lyapunov_roessler"] = eval.lyapunov_roessler;
  j["eval"]["spectrum_segment"] = eval.spectrum_segment;

  j["io"]["out_dir"] = io.out_dir;
  j["io"]["cache_dir"] = io.cache_dir;
  j["io"]["no_cache"] = io.no_cache;
  return j;
}

Config config_from_json(const json& given) {
  const Config defaults;
  reject_unknown_keys(defaults.to_json(), given, "");

  Config cfg;
  if (given.contains("dataset")) {
    const auto& d = given.at("dataset");
    maybe_get(d, "system", cfg.dataset.system);
    maybe_get(d, "sigma_force", cfg.dataset.sigma_force);
    maybe_get(d, "n_train", cfg.dataset.n_train);
    maybe_get(d, "n_test", cfg.dataset.n_test);
    maybe_get(d, "window", cfg.dataset.window);
    maybe_get(d, "alrs_exposure", cfg.dataset.alrs_exposure);
    maybe_get(d, "seed", cfg.dataset.seed);
  }
  if (given.contains("reservoir")) {
    const auto& r = given.at("reservoir");
    maybe_get(r, "backend", cfg.reservoir.backend);
    maybe_get(r, "nodes", cfg.reservoir.nodes);
    maybe_get(r, "theta", cfg.reservoir.theta);
    maybe_get(r, "h_sub", cfg.reservoir.h_sub);
    maybe_get(r, "washout", cfg.reservoir.washout);
    if (r.contains("laser")) parse_laser(r.at("laser"), cfg.reservoir.laser);
    if (r.contains("esn")) {
      maybe_get(r.at("esn"), "spectral_radius", cfg.reservoir.esn.spectral_radius);
      maybe_get(r.at("esn"), "leak", cfg.reservoir.esn.leak);
      maybe_get(r.at("esn"), "input_scale", cfg.reservoir.esn.input_scale);
    }
  }
  if (given.contains("readout")) {
    const auto& ro = given.at("readout");
    maybe_get(ro, "model", cfg.readout.model);
    maybe_get(ro, "lambda_min", cfg.readout.lambda_min);
    maybe_get(ro, "lambda_max", cfg.readout.lambda_max);
    maybe_get(ro, "lambda_points", cfg.readout.lambda_points);
    maybe_get(ro, "validation_fraction", cfg.readout.validation_fraction);
    maybe_get(ro, "selection", cfg.readout.selection);
    if (ro.contains("train")) {
      const auto& t = ro.at("train");
      maybe_get(t, "learning_rate", cfg.readout.train.learning_rate);
      maybe_get(t, "epochs", cfg.readout.train.epochs);
      maybe_get(t, "seed", cfg.readout.train.seed);
      maybe_get(t, "patience", cfg.readout.train.patience);
      if (t.contains("optimizer")) {
        const std::string opt = t.at("optimizer").get<std::string>();
        if (opt == "adam")
          cfg.readout.train.optimizer = attnrc::readout::Optimizer::adam;
        else if (opt == "plain_gd")
          cfg.readout.train.optimizer = attnrc::readout::Optimizer::plain_gd;
        else
          throw ConfigError("readout.train.optimizer must be plain_gd or adam, got " + opt);
      }
    }
  }
  if (given.contains("eval")) {
    const auto& e = given.at("eval");
    maybe_get(e, "horizon", cfg.eval.horizon);
    maybe_get(e, "vpt_threshold", cfg.eval.vpt_threshold);
    maybe_get(e, "vpt_starts", cfg.eval.vpt_starts);
    maybe_get(e, "closed_loop_duration", cfg.eval.closed_loop_duration);
    maybe_get(e, "lyapunov_lorenz", cfg.eval.lyapunov_lorenz);
    maybe_get(e, "lyapunov_roessler", cfg.eval.lyapunov_roessler);
    maybe_get(e, "spectrum_segment", cfg.eval.spectrum_segment);
  }
  if (given.contains("io")) {
    const auto& io = given.at("io");
    maybe_get(io, "out_dir", cfg.io.out_dir);
    maybe_get(io, "cache_dir", cfg.io.cache_dir);
    maybe_get(io, "no_cache", cfg.io.no_cache);
  }

  // Cross-field validation.
  if (cfg.dataset.system != "uctls" && cfg.dataset.system != "alrs")
    throw ConfigError("dataset.system must be uctls or alrs, got " + cfg.dataset.system);
  if (cfg.dataset.alrs_exposure != "x" && cfg.dataset.alrs_exposure != "xyz")
    throw ConfigError("dataset.alrs_exposure must be x or xyz");
  if (cfg.reservoir.backend != "lang_kobayashi" && cfg.reservoir.backend != "leaky_esn")
    throw ConfigError("reservoir.backend must be lang_kobayashi or leaky_esn, got " +
                      cfg.reservoir.backend);
  if (cfg.reservoir.nodes < 1) throw ConfigError("reservoir.nodes must be >= 1");
  if (cfg.eval.horizon < 1) throw ConfigError("eval.horizon must be >= 1");
  if (cfg.readout.selection != "last" && cfg.readout.selection != "best")
    throw ConfigError("readout.selection must be last or best");
  (void)cfg.model_kind();  // validates readout.model
  return cfg;
}

Config load_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file: " + path.string());
  json j;
  try {
    j = json::parse(f);
  } catch (const std::exception& e) {
    throw ConfigError("config parse error in " + path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

void apply_override(json& tree, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("--set expects key.path=value, got: " + assignment);
  const std::string key_path = assignment.substr(0, eq);
  const std::string value_str = assignment.substr(eq + 1);

  json value;
  try {
    value = json::parse(value_str);
  } catch (...) {
    value = value_str;  // bare word: take as string
  }

  json* node = &tree;
  std::istringstream keys(key_path);
  std::string key;
  std::vector<std::string> parts;
  while (std::getline(keys, key, '.')) parts.push_back(key);
  if (parts.empty()) throw ConfigError("--set: empty key path");
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) node = &((*node)[parts[i]]);
  (*node)[parts.back()] = value;
}

Config resolve_config(const std::filesystem::path& config_path,
                      const std::vector<std::string>& overrides, bool config_required) {
  json tree = json::object();
  if (!config_path.empty()) {
    std::ifstream f(config_path);
    if (!f) throw ConfigError("cannot open config file: " + config_path.string());
    try {
      tree = json::parse(f);
    } catch (const std::exception& e) {
      throw ConfigError("config parse error in " + config_path.string() + ": " + e.what());
    }
  } else if (config_required) {
    throw ConfigError("a config file is required");
  }
  for (const auto& assignment : overrides) apply_override(tree, assignment);
  return config_from_json(tree);
}

reservoir::BackendConfig Config::backend_config() const {
  reservoir::BackendConfig backend;
  backend.kind = reservoir.backend == "leaky_esn" ? reservoir::BackendKind::leaky_esn
                                                  : reservoir::BackendKind::lang_kobayashi;
  backend.nodes = reservoir.nodes;
  backend.theta = reservoir.theta;
  backend.h_sub = reservoir.h_sub;
  backend.laser = reservoir.laser;
  backend.esn = reservoir.esn;
  return backend;
}

attnrc::readout::ModelKind Config::model_kind() const {
  return attnrc::readout::model_kind_from_name(readout.model);
}

std::string Config::hash() const {
  return hex64(fnv1a64(to_json().dump()));
}

std::filesystem::path Config::resolve_cache_dir() const {
  if (const char* env = std::getenv("ATTNRC_CACHE_DIR"); env != nullptr && *env != '\0')
    return std::filesystem::path(env);
  if (!io.cache_dir.empty()) return io.cache_dir;
  return std::filesystem::path(io.out_dir) / "cache";
}

}  // namespace attnrc::cli
