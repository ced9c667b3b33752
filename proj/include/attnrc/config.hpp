#pragma once

#include "attnrc/common.hpp"
#include "attnrc/readout.hpp"
#include "attnrc/reservoir.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace attnrc::cli {

using json = nlohmann::ordered_json;

/// Resolved experiment configuration. Every field has a default that
/// reproduces the nominal parameter set (50-node laser reservoir, UCTLS
/// task with sigma_force = 0.05, 25000/5000 split); unknown config keys are
/// rejected by name.
struct Config {
  struct Dataset {
    std::string system = "uctls";  // uctls | alrs
    double sigma_force = 0.05;
    long n_train = 25000;
    long n_test = 5000;
    long window = 500;            // alrs switch period
    std::string alrs_exposure = "x";  // x | xyz
    std::uint64_t seed = 1;
  } dataset;

  struct Reservoir {
    std::string backend = "lang_kobayashi";  // lang_kobayashi | leaky_esn
    int nodes = 50;
    double theta = 1e-10;
    double h_sub = 1e-11;
    long washout = 100;
    reservoir::LaserParams laser;
    reservoir::EsnParams esn;
  } reservoir;

  struct Readout {
    std::string model = "linear_attention";  // ridge | linear_attention | nonlinear_attention
    double lambda_min = 1e-9;
    double lambda_max = 1e-1;
    int lambda_points = 9;
    double validation_fraction = 0.1;
    std::string selection = "last";  // last | best
    readout::TrainConfig train;
  } readout;

  struct Eval {
    int horizon = 1;
    double vpt_threshold = 0.4;
    int vpt_starts = 10;
    long closed_loop_duration = 400;
    double lyapunov_lorenz = 0.91;
    double lyapunov_roessler = 0.071;
    long spectrum_segment = 0;  // 0 = auto
  } eval;

  struct Io {
    std::string out_dir = "out";
    std::string cache_dir = "";  // empty = <out_dir>/cache; ATTNRC_CACHE_DIR overrides
    bool no_cache = false;
  } io;

  reservoir::BackendConfig backend_config() const;
  readout::ModelKind model_kind() const;

  json to_json() const;
  std::string hash() const;  // FNV-1a of the canonical JSON dump
  std::filesystem::path resolve_cache_dir() const;
};

/// Defaults overlaid with a JSON config file. Unknown keys anywhere in the
/// tree raise ConfigError naming the offending key path.
Config load_config(const std::filesystem::path& path);
Config config_from_json(const json& j);

/// Apply a `key.path=value` override (values parsed as JSON literals, bare
/// words taken as strings).
void apply_override(json& tree, const std::string& assignment);

/// Overlay file (optional) and --set overrides onto the defaults.
Config resolve_config(const std::filesystem::path& config_path,
                      const std::vector<std::string>& overrides,
                      bool config_required = false);

}  // namespace attnrc::cli
