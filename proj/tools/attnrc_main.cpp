// attnrc: generate chaotic benchmark data, drive the delay-based reservoir
// simulator, train ridge/attention readouts and emit prediction metrics.

#include "attnrc/config.hpp"
#include "attnrc/dynamics.hpp"
#include "attnrc/metrics.hpp"
#include "attnrc/pipeline.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <sstream>
#include <thread>

namespace fs = std::filesystem;
using namespace attnrc;
using cli::Config;
using eval::ExperimentReport;
using eval::SweepSpec;

namespace {

void log_line(const std::string& msg) { std::cerr << "[attnrc] " << msg << "\n"; }

std::vector<double> parse_values(const std::string& csv) {
  std::vector<double> values;
  std::istringstream is(csv);
  std::string cell;
  while (std::getline(is, cell, ',')) {
    if (!cell.empty()) values.push_back(std::stod(cell));
  }
  return values;
}

std::vector<readout::ModelKind> parse_models(const std::string& csv) {
  std::vector<readout::ModelKind> kinds;
  std::istringstream is(csv);
  std::string cell;
  while (std::getline(is, cell, ',')) {
    if (!cell.empty()) kinds.push_back(readout::model_kind_from_name(cell));
  }
  return kinds;
}

int cmd_gen_data(const Config& cfg, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  dynamics::DatasetSplit data;
  if (cfg.dataset.system == "uctls") {
    data = dynamics::build_uctls(cfg.dataset.sigma_force, cfg.dataset.n_train,
                                 cfg.dataset.n_test, cfg.dataset.seed);
  } else {
    const auto exposure = cfg.dataset.alrs_exposure == "xyz" ? dynamics::AlrsExposure::xyz
                                                             : dynamics::AlrsExposure::x_only;
    data = dynamics::build_alrs(cfg.dataset.n_train, cfg.dataset.n_test, cfg.dataset.window,
                                cfg.dataset.seed, exposure);
  }
  dynamics::save_trajectory_bundle(out_dir / "train.csv", data.train, data.stats, data.seed,
                                   data.train_boundaries);
  dynamics::save_trajectory_bundle(out_dir / "test.csv", data.test, data.stats, data.seed,
                                   data.test_boundaries);
  log_line("wrote " + (out_dir / "train.csv").string() + " (" + std::to_string(data.train.rows()) +
           " rows) and test.csv (" + std::to_string(data.test.rows()) + " rows)");
  return 0;
}

int cmd_run(const Config& cfg) {
  const fs::path out_dir = cfg.io.out_dir;
  fs::create_directories(out_dir);
  log_line("config hash " + cfg.hash());

  const auto run = eval::prepare_run(cfg);
  log_line(std::string("state matrix ") + (run.cache_hit ? "loaded from cache" : "harvested") +
           ", hash " + hex64(run.state_hash));

  if (cfg.reservoir.backend == "lang_kobayashi" &&
      cfg.reservoir.laser.coupling == reservoir::CouplingVariant::literal) {
    const auto backend = cfg.backend_config();
    const auto mask = reservoir::make_mask(backend.nodes, static_cast<int>(run.exposed_test.cols()),
                                           backend.theta, derive_seed(cfg.dataset.seed, "mask"));
    const double dev = reservoir::input_coupling_deviation(backend, mask,
                                                           derive_seed(cfg.dataset.seed, "probe"));
    log_line("literal field equation selected: input-coupling deviation = " + std::to_string(dev) +
             (dev < 1e-9 ? " (states are input-independent; readouts cannot see the task)" : ""));
  }

  const auto kind = cfg.model_kind();
  const auto trained = eval::train_readout(run, kind, cfg);
  const std::string name = readout::model_kind_name(kind);
  log_line("trained " + name + (kind == readout::ModelKind::ridge
                                    ? " (lambda " + std::to_string(trained.best_lambda) + ")"
                                    : " (best epoch " + std::to_string(trained.best_epoch) + ")"));

  ExperimentReport report;
  const auto open = eval::open_loop_eval(trained.model, run.states_test, run.exposed_test, run.horizon);
  report.rows.push_back({0.0, name, "nrmse", open.value, 0.0, 1});

  const int exposed = static_cast<int>(run.exposed_test.cols());
  const Matrix probe = readout::predict(trained.model, run.states_test.data.topRows(1));
  if (run.horizon == 1 && probe.cols() == exposed) {
    const auto cl = eval::closed_loop_eval(trained.model, run, cfg);
    report.rows.push_back({0.0, name, "vpt", cl.mean_vpt, 0.0, 1});
    for (const auto& [system, mean] : cl.per_system_vpt)
      report.rows.push_back({0.0, name, "vpt_" + system, mean, 0.0, 1});
  }

  report.provenance["config"] = cfg.to_json();
  report.provenance["config_hash"] = cfg.hash();
  report.provenance["state_hash"] = hex64(run.state_hash);
  report.provenance["cache_hit"] = run.cache_hit;
  report.provenance["model"] = name;
  if (kind == readout::ModelKind::ridge)
    report.provenance["best_lambda"] = trained.best_lambda;
  else
    report.provenance["best_epoch"] = trained.best_epoch;

  eval::save_report_csv(out_dir / "report.csv", report);
  eval::save_report_json(out_dir / "report.json", report);
  readout::save_model_json(out_dir / ("model_" + name + ".json"), trained.model, cfg.hash(),
                           run.node_stats);
  if (!trained.curve.train_nrmse.empty())
    readout::save_loss_curve_csv(out_dir / ("loss_curve_" + name + ".csv"), trained.curve);

  for (const auto& row : report.rows)
    std::cout << row.model << " " << row.metric << " = " << row.mean << "\n";
  return 0;
}

struct PresetSweep {
  std::string file_stem;
  SweepSpec spec;
  Config cfg;
};

std::vector<double> range_values(double lo, double hi, double step) {
  std::vector<double> v;
  for (double x = lo; x <= hi + 1e-9; x += step) v.push_back(x);
  return v;
}

/// Figure presets run at desk scale: shorter splits and a capped epoch count
/// keep a full sweep tractable on a laptop. Overrides are echoed to the log.
Config desk_scale(Config cfg) {
  cfg.dataset.n_train = 6000;
  cfg.dataset.n_test = 2000;
  cfg.readout.train.epochs = 1000;
  cfg.readout.train.patience = 150;
  log_line("preset overrides: n_train=6000 n_test=2000 epochs=1000 patience=150 "
           "(use --set to restore full-scale values)");
  return cfg;
}

std::vector<PresetSweep> figure_presets(int figure, const Config& base) {
  std::vector<PresetSweep> sweeps;
  const auto sizes = range_values(10, 150, 10);
  switch (figure) {
    case 4: {
      Config cfg = desk_scale(base);
      cfg.dataset.system = "uctls";
      cfg.eval.horizon = 1;
      sweeps.push_back({"fig4", {eval::SweepAxis::reservoir_size, sizes, 10, {}}, cfg});
      break;
    }
    case 7: {
      Config cfg = desk_scale(base);
      cfg.dataset.system = "uctls";
      cfg.reservoir.nodes = 50;
      cfg.eval.horizon = 1;
      sweeps.push_back(
          {"fig7", {eval::SweepAxis::sigma_force, range_values(0.0, 0.15, 0.025), 10, {}}, cfg});
      break;
    }
    case 8: {
      Config open_cfg = desk_scale(base);
      open_cfg.dataset.system = "alrs";
      open_cfg.dataset.alrs_exposure = "x";
      open_cfg.eval.horizon = 1;
      sweeps.push_back({"fig8_nrmse", {eval::SweepAxis::reservoir_size, sizes, 10, {}}, open_cfg});
      Config closed_cfg = open_cfg;
      closed_cfg.dataset.alrs_exposure = "xyz";
      sweeps.push_back({"fig8_vpt", {eval::SweepAxis::reservoir_size, sizes, 10, {}}, closed_cfg});
      break;
    }
    case 9: {
      Config uctls = desk_scale(base);
      uctls.dataset.system = "uctls";
      uctls.reservoir.nodes = 50;
      sweeps.push_back({"fig9_uctls", {eval::SweepAxis::horizon_steps, range_values(1, 10, 1), 10, {}}, uctls});
      Config alrs = uctls;
      alrs.dataset.system = "alrs";
      alrs.dataset.alrs_exposure = "x";
      sweeps.push_back({"fig9_alrs", {eval::SweepAxis::horizon_steps, range_values(1, 10, 1), 10, {}}, alrs});
      break;
    }
    case 11: {
      Config cfg = desk_scale(base);
      cfg.dataset.system = "uctls";
      cfg.dataset.sigma_force = 0.0;  // single-Lorenz task
      cfg.eval.horizon = 1;
      SweepSpec spec{eval::SweepAxis::reservoir_size, sizes, 10, {}};
      spec.models = {readout::ModelKind::ridge, readout::ModelKind::linear_attention,
                     readout::ModelKind::nonlinear_attention};
      sweeps.push_back({"fig11", spec, cfg});
      break;
    }
    default:
      throw ConfigError("unknown figure preset: " + std::to_string(figure) +
                        " (supported: 4, 7, 8, 9, 11)");
  }
  for (auto& s : sweeps) {
    if (s.spec.models.empty())
      s.spec.models = {readout::ModelKind::ridge, readout::ModelKind::linear_attention};
  }
  return sweeps;
}

int cmd_sweep(const Config& base, int figure, const std::string& axis, const std::string& values,
              int members, const std::string& models, int jobs) {
  std::vector<PresetSweep> sweeps;
  if (figure > 0) {
    sweeps = figure_presets(figure, base);
  } else {
    if (axis.empty() || values.empty())
      throw ConfigError("sweep needs either --figure or both --axis and --values");
    SweepSpec spec;
    spec.axis = eval::sweep_axis_from_name(axis);
    spec.values = parse_values(values);
    spec.members = members;
    if (!models.empty()) spec.models = parse_models(models);
    sweeps.push_back({"sweep_" + axis, spec, base});
  }

  for (const auto& s : sweeps) {
    log_line("sweep " + s.file_stem + ": axis " + eval::sweep_axis_name(s.spec.axis) + ", " +
             std::to_string(s.spec.values.size()) + " values x " + std::to_string(s.spec.members) +
             " members, " + std::to_string(jobs) + " jobs");
    const ExperimentReport report = eval::run_sweep(s.spec, s.cfg, jobs);
    for (const auto& warning : report.warnings) log_line("warning: " + warning);
    const fs::path out_dir = s.cfg.io.out_dir;
    fs::create_directories(out_dir);
    eval::save_report_csv(out_dir / (s.file_stem + ".csv"), report);
    eval::save_report_json(out_dir / (s.file_stem + ".json"), report);
    log_line("wrote " + (out_dir / (s.file_stem + ".csv")).string());
  }
  return 0;
}

int cmd_spectrum(Config cfg, const fs::path& models_dir, int nodes) {
  cfg.reservoir.nodes = nodes;
  cfg.eval.horizon = 1;
  const fs::path out_dir = cfg.io.out_dir;
  fs::create_directories(out_dir);

  const auto run = eval::prepare_run(cfg);
  const long n_test = run.states_test.rows();
  const long duration = std::min<long>(n_test - 2, std::max<long>(1024, cfg.eval.closed_loop_duration));

  Config cl_cfg = cfg;
  cl_cfg.eval.closed_loop_duration = duration;
  cl_cfg.eval.vpt_starts = 1;

  // Truth spectrum of the first exposed channel over the free-run span.
  const Vector truth_series = run.exposed_test.col(0).head(duration);
  const auto truth_spec = eval::power_spectrum(truth_series, run.data.test.dt_sample,
                                               cfg.eval.spectrum_segment);
  auto write_spectrum = [&](const std::string& stem, const eval::SpectrumResult& s) {
    std::ostringstream os;
    os << "freq,power\n";
    for (long k = 0; k < s.frequencies.size(); ++k)
      os << s.frequencies[k] << ',' << s.power[k] << "\n";
    eval::write_file_atomic(out_dir / (stem + ".csv"), os.str());
    log_line("wrote " + (out_dir / (stem + ".csv")).string() + " (" +
             std::to_string(s.averaging_windows) + " averaging windows)");
  };
  write_spectrum("spectrum_truth", truth_spec);

  for (const std::string name : {"ridge", "linear_attention"}) {
    const fs::path model_path = models_dir / ("model_" + name + ".json");
    if (!fs::exists(model_path))
      throw ConfigError("missing model file: " + model_path.string() +
                        " (train it first with `attnrc run --readout " + name + "`)");
    dynamics::StandardizationStats node_stats;
    const auto model = readout::load_model_json(model_path, &node_stats);
    if (node_stats.channels() != cfg.reservoir.nodes)
      throw ConfigError("model " + model_path.string() + " was trained for " +
                        std::to_string(node_stats.channels()) + " nodes, config asks for " +
                        std::to_string(cfg.reservoir.nodes));
    const auto cl = eval::closed_loop_eval(model, run, cl_cfg);
    if (cl.runs.empty() || cl.runs[0].predicted.rows() < 256)
      throw NumericalError("closed-loop run for " + name +
                           " too short for a spectrum (diverged early?)");
    const Vector pred_series = cl.runs[0].predicted.col(0);
    write_spectrum("spectrum_" + name,
                   eval::power_spectrum(pred_series, run.data.test.dt_sample,
                                        cfg.eval.spectrum_segment));
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Delay-based reservoir computing with attention readouts"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  auto add_config_options = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config file")->expected(1);
    sub->add_option("--set", overrides, "Override a config key, e.g. --set reservoir.nodes=30");
  };

  auto* gen = app.add_subcommand("gen-data", "Generate a benchmark dataset (CSV + JSON sidecar)");
  add_config_options(gen);
  std::string gen_out = "data";
  gen->add_option("--out", gen_out, "Output directory");

  auto* runc = app.add_subcommand("run", "Generate, harvest, train and evaluate one experiment");
  add_config_options(runc);
  std::string run_readout, run_backend, run_out;
  bool no_cache = false;
  runc->add_option("--readout", run_readout, "ridge | linear-attention | nonlinear-attention");
  runc->add_option("--backend", run_backend, "lang_kobayashi | leaky-esn");
  runc->add_option("--out", run_out, "Output directory (overrides io.out_dir)");
  runc->add_flag("--no-cache", no_cache, "Bypass the state-matrix cache");

  auto* sweep = app.add_subcommand("sweep", "Ensemble parameter sweep with CSV reports");
  add_config_options(sweep);
  int figure = 0, members = 10, jobs = static_cast<int>(std::thread::hardware_concurrency());
  std::string axis, values, models, sweep_out;
  sweep->add_option("--figure", figure, "Figure preset: 4, 7, 8, 9 or 11");
  sweep->add_option("--axis", axis, "reservoir_size | sigma_force | horizon_steps");
  sweep->add_option("--values", values, "Comma-separated axis values");
  sweep->add_option("--members", members, "Ensemble members (seeds)");
  sweep->add_option("--models", models, "Comma-separated readout kinds");
  sweep->add_option("--jobs", jobs, "Concurrent sweep cells");
  sweep->add_option("--out", sweep_out, "Output directory (overrides io.out_dir)");

  auto* spectrum = app.add_subcommand("spectrum", "Closed-loop power spectra (truth/ridge/attention)");
  add_config_options(spectrum);
  std::string models_dir = "out";
  int spectrum_nodes = 30;
  spectrum->add_option("--models", models_dir, "Directory holding model_<kind>.json files");
  spectrum->add_option("--nodes", spectrum_nodes, "Reservoir size preset");
  std::string spectrum_out;
  spectrum->add_option("--out", spectrum_out, "Output directory (overrides io.out_dir)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    Config cfg = cli::resolve_config(config_path, overrides);
    if (gen->parsed()) return cmd_gen_data(cfg, gen_out);
    if (runc->parsed()) {
      if (!run_readout.empty()) {
        std::string normalized = run_readout;
        for (auto& ch : normalized)
          if (ch == '-') ch = '_';
        cfg.readout.model = normalized;
      }
      if (!run_backend.empty()) {
        std::string normalized = run_backend;
        for (auto& ch : normalized)
          if (ch == '-') ch = '_';
        cfg.reservoir.backend = normalized;
      }
      if (!run_out.empty()) cfg.io.out_dir = run_out;
      if (no_cache) cfg.io.no_cache = true;
      (void)cfg.model_kind();  // validate after flag overrides
      return cmd_run(cfg);
    }
    if (sweep->parsed()) {
      if (!sweep_out.empty()) cfg.io.out_dir = sweep_out;
      return cmd_sweep(cfg, figure, axis, values, members, models, std::max(1, jobs));
    }
    if (spectrum->parsed()) {
      if (!spectrum_out.empty()) cfg.io.out_dir = spectrum_out;
      return cmd_spectrum(cfg, models_dir, spectrum_nodes);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
