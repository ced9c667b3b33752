#include "attnrc/dynamics.hpp"
#include "attnrc/metrics.hpp"
#include "attnrc/pipeline.hpp"
#include "attnrc/readout.hpp"
#include "attnrc/reservoir.hpp"

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace attnrc;

namespace {

dynamics::Trajectory make_trajectory(const Matrix& samples, double dt_sample,
                                     std::vector<std::string> labels,
                                     std::vector<bool> exposed) {
  dynamics::Trajectory traj;
  traj.samples = samples;
  traj.dt_sample = dt_sample;
  if (labels.empty())
    for (long c = 0; c < samples.cols(); ++c) labels.push_back("ch" + std::to_string(c));
  if (exposed.empty()) exposed.assign(samples.cols(), true);
  traj.channel_labels = std::move(labels);
  traj.exposed_mask = std::move(exposed);
  return traj;
}

void init_dynamics(py::module_& m) {
  py::class_<dynamics::StandardizationStats>(m, "StandardizationStats")
      .def_readonly("mean", &dynamics::StandardizationStats::mean)
      .def_readonly("std", &dynamics::StandardizationStats::std);

  py::class_<dynamics::Trajectory>(m, "Trajectory")
      .def(py::init(&make_trajectory), py::arg("samples"), py::arg("dt_sample") = 0.1,
           py::arg("labels") = std::vector<std::string>{},
           py::arg("exposed") = std::vector<bool>{})
      .def_readonly("samples", &dynamics::Trajectory::samples)
      .def_readonly("dt_sample", &dynamics::Trajectory::dt_sample)
      .def_readonly("channel_labels", &dynamics::Trajectory::channel_labels)
      .def_readonly("exposed_mask", &dynamics::Trajectory::exposed_mask)
      .def("exposed", &dynamics::Trajectory::exposed);

  py::class_<dynamics::DatasetSplit>(m, "DatasetSplit")
      .def_readonly("train", &dynamics::DatasetSplit::train)
      .def_readonly("test", &dynamics::DatasetSplit::test)
      .def_readonly("stats", &dynamics::DatasetSplit::stats)
      .def_readonly("id", &dynamics::DatasetSplit::id)
      .def_readonly("train_boundaries", &dynamics::DatasetSplit::train_boundaries)
      .def_readonly("test_boundaries", &dynamics::DatasetSplit::test_boundaries)
      .def_readonly("first_window_system", &dynamics::DatasetSplit::first_window_system);

  m.def("build_uctls", &dynamics::build_uctls, py::arg("sigma_force"), py::arg("n_train"),
        py::arg("n_test"), py::arg("seed"),
        "Unidirectionally-coupled two-Lorenz dataset, standardized by train stats.");
  m.def(
      "build_alrs",
      [](long n_train, long n_test, long window, std::uint64_t seed, const std::string& exposure) {
        return dynamics::build_alrs(n_train, n_test, window, seed,
                                    exposure == "xyz" ? dynamics::AlrsExposure::xyz
                                                      : dynamics::AlrsExposure::x_only);
      },
      py::arg("n_train"), py::arg("n_test"), py::arg("window") = 500, py::arg("seed") = 1,
      py::arg("exposure") = "x", "Alternating Lorenz-Roessler dataset.");

  m.def(
      "largest_lyapunov",
      [](const std::string& system, double h, double horizon, std::uint64_t seed) {
        dynamics::OdeSystem sys;
        if (system == "lorenz")
          sys = dynamics::lorenz_system();
        else if (system == "roessler")
          sys = dynamics::roessler_system();
        else
          throw ConfigError("unknown system: " + system + " (use lorenz or roessler)");
        return dynamics::largest_lyapunov(sys, h, horizon, seed).value;
      },
      py::arg("system"), py::arg("h"), py::arg("horizon") = 5000.0, py::arg("seed") = 7,
      "Benettin estimate of the largest Lyapunov exponent.");
}

void init_reservoir(py::module_& m) {
  py::class_<reservoir::Mask>(m, "Mask")
      .def_readonly("values", &reservoir::Mask::values)
      .def_readonly("theta", &reservoir::Mask::theta)
      .def_property_readonly("period", &reservoir::Mask::period);

  py::class_<reservoir::LaserParams>(m, "LaserParams")
      .def(py::init<>())
      .def_readwrite("alpha_tilde", &reservoir::LaserParams::alpha_tilde)
      .def_readwrite("phi", &reservoir::LaserParams::phi)
      .def_readwrite("kappa", &reservoir::LaserParams::kappa)
      .def_readwrite("tau", &reservoir::LaserParams::tau)
      .def_readwrite("pump", &reservoir::LaserParams::pump)
      .def_readwrite("eta", &reservoir::LaserParams::eta)
      .def_readwrite("time_scale", &reservoir::LaserParams::time_scale);

  py::class_<reservoir::EsnParams>(m, "EsnParams")
      .def(py::init<>())
      .def_readwrite("spectral_radius", &reservoir::EsnParams::spectral_radius)
      .def_readwrite("leak", &reservoir::EsnParams::leak)
      .def_readwrite("input_scale", &reservoir::EsnParams::input_scale);

  py::class_<reservoir::StateMatrix>(m, "StateMatrix")
      .def_readonly("data", &reservoir::StateMatrix::data)
      .def_readonly("standardized", &reservoir::StateMatrix::standardized)
      .def_readonly("stats", &reservoir::StateMatrix::stats);

  m.def("make_mask", &reservoir::make_mask, py::arg("n_nodes"), py::arg("channels") = 1,
        py::arg("theta") = 1e-10, py::arg("seed") = 1,
        "Uniform-[0,1] piecewise-constant input mask; period T = N theta.");
  m.def("mask_input", &reservoir::mask_input, py::arg("x"), py::arg("mask"));
  m.def("run_lang_kobayashi", &reservoir::run_lang_kobayashi, py::arg("inputs"), py::arg("mask"),
        py::arg("params") = reservoir::LaserParams{}, py::arg("h_sub") = 1e-11,
        py::arg("seed") = 1,
        "Harvest intensity samples of the delayed-feedback laser, one row per input.");
  m.def("run_leaky_esn", &reservoir::run_leaky_esn, py::arg("inputs"), py::arg("nodes"),
        py::arg("params") = reservoir::EsnParams{}, py::arg("seed") = 1,
        "Harvest leaky echo-state responses, one row per input.");
  m.def(
      "standardize_states",
      [](const reservoir::StateMatrix& states) { return reservoir::standardize_states(states); },
      py::arg("states"), "Per-node z-score using the states' own statistics.");
  m.def(
      "standardize_states_with",
      [](const reservoir::StateMatrix& states, const dynamics::StandardizationStats& stats) {
        return reservoir::standardize_states(states, stats);
      },
      py::arg("states"), py::arg("stats"), "Per-node z-score with training statistics.");
}

void init_readout(py::module_& m) {
  py::class_<readout::RidgeWeights>(m, "RidgeWeights")
      .def_readonly("w", &readout::RidgeWeights::w)
      .def_readonly("lambda_", &readout::RidgeWeights::lambda);

  py::class_<readout::LinearAttention>(m, "LinearAttention")
      .def_readonly("w_net", &readout::LinearAttention::w_net)
      .def("forward",
           [](const readout::LinearAttention& model, const Vector& r) {
             const auto fwd = readout::attention_forward(model, r);
             return py::make_tuple(fwd.w_att, fwd.d);
           })
      .def("predict",
           [](const readout::LinearAttention& model, const Matrix& states) {
             return readout::predict(model, states);
           });

  py::class_<readout::NonlinearAttention>(m, "NonlinearAttention")
      .def_property_readonly("interlayer_weight_count",
                             &readout::NonlinearAttention::interlayer_weight_count)
      .def("forward",
           [](const readout::NonlinearAttention& model, const Vector& r) {
             const auto fwd = readout::attention_forward(model, r);
             return py::make_tuple(fwd.w_att, fwd.d);
           })
      .def("predict", [](const readout::NonlinearAttention& model, const Matrix& states) {
        return readout::predict(model, states);
      });

  py::class_<readout::LossCurve>(m, "LossCurve")
      .def_readonly("train_nrmse", &readout::LossCurve::train_nrmse)
      .def_readonly("test_nrmse", &readout::LossCurve::test_nrmse);

  m.def("train_ridge", &readout::train_ridge, py::arg("states"), py::arg("targets"),
        py::arg("lambda_") = 1e-6, "Closed-form ridge readout, one column per target dimension.");
  m.def("predict_ridge", &readout::predict_ridge, py::arg("states"), py::arg("weights"));
  m.def(
      "train_attention",
      [](const std::string& kind, const Matrix& states_train, const Matrix& targets_train,
         const Matrix& states_test, const Matrix& targets_test, double learning_rate, int epochs,
         const std::string& optimizer, std::uint64_t seed, int patience,
         const std::string& selection) {
        readout::TrainConfig cfg;
        cfg.learning_rate = learning_rate;
        cfg.epochs = epochs;
        cfg.optimizer =
            optimizer == "adam" ? readout::Optimizer::adam : readout::Optimizer::plain_gd;
        cfg.seed = seed;
        cfg.patience = patience;
        auto result = readout::train_attention(readout::model_kind_from_name(kind), states_train,
                                               targets_train, states_test, targets_test, cfg);
        py::object model;
        const auto& chosen = selection == "best" ? result.best : result.last;
        if (const auto* lin = std::get_if<readout::LinearAttention>(&chosen))
          model = py::cast(*lin);
        else
          model = py::cast(std::get<readout::NonlinearAttention>(chosen));
        return py::make_tuple(model, result.curve, result.best_epoch);
      },
      py::arg("kind"), py::arg("states_train"), py::arg("targets_train"), py::arg("states_test"),
      py::arg("targets_test"), py::arg("learning_rate") = 0.01, py::arg("epochs") = 2000,
      py::arg("optimizer") = "plain_gd", py::arg("seed") = 0, py::arg("patience") = 200,
      py::arg("selection") = "last",
      "Full-batch gradient descent on precomputed states; returns (model, curve, best_epoch).");
}

void init_metrics(py::module_& m) {
  m.def("nrmse", &eval::nrmse, py::arg("pred"), py::arg("truth"),
        "Root-mean-square error normalized so the mean predictor scores 1.");
  m.def(
      "vpt",
      [](const Matrix& pred, const Matrix& truth, double lyapunov, double dt_sample,
         double threshold) {
        const auto result = eval::vpt(pred, truth, lyapunov, dt_sample, threshold);
        return py::make_tuple(result.lyapunov_times, result.crossing_index, result.saturated);
      },
      py::arg("pred"), py::arg("truth"), py::arg("lyapunov"), py::arg("dt_sample"),
      py::arg("threshold") = 0.4,
      "Valid prediction time in Lyapunov times: (value, crossing_index, saturated).");
  m.def(
      "power_spectrum",
      [](const Vector& series, double dt_sample, long segment) {
        const auto spec = eval::power_spectrum(series, dt_sample, segment);
        return py::make_tuple(spec.frequencies, spec.power, spec.averaging_windows);
      },
      py::arg("series"), py::arg("dt_sample"), py::arg("segment") = 0,
      "Welch-averaged periodogram: (frequencies, power, averaging_windows).");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Delay-based reservoir computing with attention readouts";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  init_dynamics(m);
  init_reservoir(m);
  init_readout(m);
  init_metrics(m);

#ifdef VERSION_INFO
  m.attr("__version__") = VERSION_INFO;
#else
  m.attr("__version__") = "dev";
#endif
}
