#include "attnrc/readout.hpp"

#include "attnrc/metrics.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>

namespace attnrc::readout {

long NonlinearAttention::interlayer_weight_count() const {
  long count = 0;
  for (const auto& net : nets) count += net.w1.size() + net.w2.size();
  return count;
}

std::string model_kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::ridge: return "ridge";
    case ModelKind::linear_attention: return "linear_attention";
    case ModelKind::nonlinear_attention: return "nonlinear_attention";
  }
  return "unknown";
}

ModelKind model_kind_from_name(const std::string& name) {
  if (name == "ridge") return ModelKind::ridge;
  if (name == "linear_attention" || name == "linear-attention") return ModelKind::linear_attention;
  if (name == "nonlinear_attention" || name == "nonlinear-attention")
    return ModelKind::nonlinear_attention;
  throw ConfigError("unknown readout model: " + name);
}

ModelKind kind_of(const ReadoutModel& model) {
  if (std::holds_alternative<RidgeWeights>(model)) return ModelKind::ridge;
  if (std::holds_alternative<LinearAttention>(model)) return ModelKind::linear_attention;
  return ModelKind::nonlinear_attention;
}

RidgeWeights train_ridge(const Matrix& states, const Matrix& targets, double lambda) {
  if (states.rows() != targets.rows())
    throw ConfigError("train_ridge: states and targets disagree on row count");
  if (lambda < 0.0) throw ConfigError("train_ridge: lambda must be >= 0");

  const long n = states.cols();
  if (lambda == 0.0) {
    const long rank = Eigen::ColPivHouseholderQR<Matrix>(states).rank();
    if (rank < n)
      throw NumericalError("train_ridge: states are rank-deficient at lambda = 0; use lambda > 0");
  }
  Matrix gram = states.transpose() * states;
  gram.diagonal().array() += lambda;
  const Eigen::LDLT<Matrix> solver(gram);
  if (solver.info() != Eigen::Success)
    throw NumericalError("train_ridge: normal-equation solve failed; use lambda > 0");

  RidgeWeights weights;
  weights.lambda = lambda;
  weights.w = solver.solve(states.transpose() * targets);
  if (!weights.w.allFinite())
    throw NumericalError("train_ridge: non-finite solution; use lambda > 0");
  return weights;
}

Matrix predict_ridge(const Matrix& states, const RidgeWeights& weights) {
  if (states.cols() != weights.w.rows())
    throw ConfigError("predict_ridge: node-count mismatch");
  Matrix pred = states * weights.w;
  if (!pred.allFinite()) throw NumericalError("predict_ridge: non-finite prediction");
  return pred;
}

double ridge_objective(const Matrix& states, const Matrix& targets, const Matrix& w,
                       double lambda) {
  return (targets - states * w).squaredNorm() + lambda * w.squaredNorm();
}

AttentionForward attention_forward(const LinearAttention& model, const Vector& r) {
  const int m = model.dims();
  if (model.nodes() != r.size())
    throw ConfigError("attention_forward: state dimension mismatch");
  AttentionForward out;
  out.w_att.resize(r.size(), m);
  out.d.resize(m);
  for (int j = 0; j < m; ++j) {
    out.w_att.col(j) = model.w_net[j] * r;
    out.d[j] = out.w_att.col(j).dot(r);
  }
  return out;
}

AttentionForward attention_forward(const NonlinearAttention& model, const Vector& r) {
  const int m = model.dims();
  if (model.nodes() != r.size())
    throw ConfigError("attention_forward: state dimension mismatch");
  AttentionForward out;
  out.w_att.resize(r.size(), m);
  out.d.resize(m);
  for (int j = 0; j < m; ++j) {
    const auto& net = model.nets[j];
    const Vector hidden = (net.w1 * r + net.b1).array().tanh();
    out.w_att.col(j) = net.w2 * hidden + net.b2;
    out.d[j] = out.w_att.col(j).dot(r);
  }
  return out;
}

Matrix predict(const LinearAttention& model, const Matrix& states) {
  Matrix pred(states.rows(), model.dims());
  for (int j = 0; j < model.dims(); ++j) {
    // d_l = r_l^T W^T r_l, evaluated batched as rowwise dot of (R W^T) and R.
    pred.col(j) = ((states * model.w_net[j].transpose()).array() * states.array()).rowwise().sum();
  }
  return pred;
}

Matrix predict(const NonlinearAttention& model, const Matrix& states) {
  Matrix pred(states.rows(), model.dims());
  for (int j = 0; j < model.dims(); ++j) {
    const auto& net = model.nets[j];
    Matrix hidden = ((states * net.w1.transpose()).rowwise() + net.b1.transpose()).array().tanh();
    Matrix w_att = (hidden * net.w2.transpose()).rowwise() + net.b2.transpose();
    pred.col(j) = (w_att.array() * states.array()).rowwise().sum();
  }
  return pred;
}

Matrix predict(const ReadoutModel& model, const Matrix& states) {
  return std::visit(
      [&](const auto& m) -> Matrix {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, RidgeWeights>)
          return predict_ridge(states, m);
        else
          return predict(m, states);
      },
      model);
}

std::vector<Matrix> attention_weights(const LinearAttention& model, const Matrix& states) {
  std::vector<Matrix> all;
  all.reserve(model.dims());
  for (int j = 0; j < model.dims(); ++j) all.push_back(states * model.w_net[j].transpose());
  return all;
}

namespace {

double mean_squared_loss(const Matrix& pred, const Matrix& targets) {
  return 0.5 * (pred - targets).squaredNorm() / static_cast<double>(targets.rows());
}

}  // namespace

double attention_loss(const LinearAttention& model, const Matrix& states, const Matrix& targets) {
  return mean_squared_loss(predict(model, states), targets);
}

double attention_loss(const NonlinearAttention& model, const Matrix& states, const Matrix& targets) {
  return mean_squared_loss(predict(model, states), targets);
}

namespace {

LinearAttention linear_gradient_given_pred(const LinearAttention& model, const Matrix& states,
                                           const Matrix& targets, const Matrix& pred) {
  const double inv_l = 1.0 / static_cast<double>(states.rows());
  LinearAttention grad;
  grad.w_net.reserve(model.dims());
  for (int j = 0; j < model.dims(); ++j) {
    const Vector err = pred.col(j) - targets.col(j);
    // sum_l err_l r_l r_l^T, accumulated as R^T diag(err) R.
    grad.w_net.push_back(inv_l * (states.transpose() * (states.array().colwise() * err.array()).matrix()));
  }
  return grad;
}

NonlinearAttention nonlinear_gradient_impl(const NonlinearAttention& model, const Matrix& states,
                                           const Matrix& targets, Matrix* pred_out) {
  const double inv_l = 1.0 / static_cast<double>(states.rows());
  NonlinearAttention grad;
  grad.nets.resize(model.dims());
  if (pred_out != nullptr) pred_out->resize(states.rows(), model.dims());
  for (int j = 0; j < model.dims(); ++j) {
    const auto& net = model.nets[j];
    const Matrix hidden =
        ((states * net.w1.transpose()).rowwise() + net.b1.transpose()).array().tanh();
    const Matrix w_att = (hidden * net.w2.transpose()).rowwise() + net.b2.transpose();
    const Vector pred = (w_att.array() * states.array()).rowwise().sum();
    if (pred_out != nullptr) pred_out->col(j) = pred;
    const Vector err = pred - targets.col(j);

    // dF/dw_att_l = err_l * r_l; backpropagate through the two layers.
    const Matrix g_watt = states.array().colwise() * err.array();        // L x N
    const Matrix g_hidden_pre =
        (g_watt * net.w2).array() * (1.0 - hidden.array().square());     // L x N

    auto& g = grad.nets[j];
    g.w2 = inv_l * (g_watt.transpose() * hidden);
    g.b2 = inv_l * g_watt.colwise().sum().transpose();
    g.w1 = inv_l * (g_hidden_pre.transpose() * states);
    g.b1 = inv_l * g_hidden_pre.colwise().sum().transpose();
  }
  return grad;
}

}  // namespace

LinearAttention attention_gradient(const LinearAttention& model, const Matrix& states,
                                   const Matrix& targets) {
  if (states.rows() != targets.rows())
    throw ConfigError("attention_gradient: states and targets disagree on row count");
  return linear_gradient_given_pred(model, states, targets, predict(model, states));
}

NonlinearAttention attention_gradient(const NonlinearAttention& model, const Matrix& states,
                                      const Matrix& targets) {
  if (states.rows() != targets.rows())
    throw ConfigError("attention_gradient: states and targets disagree on row count");
  return nonlinear_gradient_impl(model, states, targets, nullptr);
}

namespace {

Matrix seeded_uniform_matrix(long rows, long cols, double scale, Rng& rng) {
  Matrix m(rows, cols);
  for (long j = 0; j < cols; ++j)
    for (long i = 0; i < rows; ++i) m(i, j) = rng.uniform(-scale, scale);
  return m;
}

LinearAttention init_linear(int nodes, int dims, std::uint64_t seed) {
  LinearAttention model;
  const double scale = 1.0 / std::sqrt(static_cast<double>(nodes));
  Rng rng(derive_seed(seed, "attention_init"));
  for (int j = 0; j < dims; ++j) model.w_net.push_back(seeded_uniform_matrix(nodes, nodes, scale, rng));
  return model;
}

NonlinearAttention init_nonlinear(int nodes, int dims, std::uint64_t seed) {
  NonlinearAttention model;
  const double scale = 1.0 / std::sqrt(static_cast<double>(nodes));
  Rng rng(derive_seed(seed, "attention_init"));
  model.nets.resize(dims);
  for (auto& net : model.nets) {
    net.w1 = seeded_uniform_matrix(nodes, nodes, scale, rng);
    net.b1 = Vector::Zero(nodes);
    net.w2 = seeded_uniform_matrix(nodes, nodes, scale, rng);
    net.b2 = Vector::Zero(nodes);
  }
  return model;
}

// Adam state mirroring a parameter matrix.
struct AdamSlot {
  Matrix m, v;
  explicit AdamSlot(const Matrix& shape) : m(Matrix::Zero(shape.rows(), shape.cols())),
                                           v(Matrix::Zero(shape.rows(), shape.cols())) {}
};

void adam_update(Matrix& param, const Matrix& grad, AdamSlot& slot, double lr, long t) {
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  slot.m = beta1 * slot.m + (1.0 - beta1) * grad;
  slot.v = beta2 * slot.v + (1.0 - beta2) * grad.array().square().matrix();
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
  param.array() -=
      lr * (slot.m.array() / bc1) / ((slot.v.array() / bc2).sqrt() + eps);
}

}  // namespace

namespace {

/// Symmetric whitening transform (and its inverse) of the train-state
/// covariance. Node-wise standardization leaves cross-node correlations in
/// place, and those push the descent curvature far beyond 2/gamma as the
/// reservoir grows; running the descent on decorrelated coordinates keeps
/// the fixed learning rate stable for every swept size. The attention
/// function class is closed under the transform, so trained weights map
/// back exactly.
struct Whitener {
  Matrix forward;  // T: z = T r
  Matrix inverse;  // T^{-1}
};

Whitener make_whitener(const Matrix& states) {
  const Matrix covariance =
      states.transpose() * states / static_cast<double>(states.rows());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(covariance);
  const Vector values = eig.eigenvalues();
  const double floor = values.maxCoeff() * 1e-6;  // near-null directions stay bounded
  Vector inv_sqrt(values.size()), sqrt_vals(values.size());
  for (long i = 0; i < values.size(); ++i) {
    const double v = std::max(values[i], floor);
    sqrt_vals[i] = std::sqrt(v);
    inv_sqrt[i] = 1.0 / sqrt_vals[i];
  }
  Whitener w;
  w.forward = eig.eigenvectors() * inv_sqrt.asDiagonal() * eig.eigenvectors().transpose();
  w.inverse = eig.eigenvectors() * sqrt_vals.asDiagonal() * eig.eigenvectors().transpose();
  return w;
}

}  // namespace

AttentionTrainResult train_attention(ModelKind kind, const Matrix& states_train,
                                     const Matrix& targets_train, const Matrix& states_test,
                                     const Matrix& targets_test, const TrainConfig& cfg) {
  if (kind == ModelKind::ridge)
    throw ConfigError("train_attention: use train_ridge for the ridge readout");
  if (cfg.learning_rate < 0.0) throw ConfigError("train_attention: negative learning rate");
  if (cfg.epochs < 1) throw ConfigError("train_attention: epochs must be >= 1");
  if (states_train.rows() != targets_train.rows() || states_test.rows() != targets_test.rows())
    throw ConfigError("train_attention: states and targets disagree on row count");

  const int nodes = static_cast<int>(states_train.cols());
  const int dims = static_cast<int>(targets_train.cols());
  const bool linear = kind == ModelKind::linear_attention;

  const Whitener whitener = make_whitener(states_train);
  const Matrix z_train = states_train * whitener.forward;  // T symmetric
  const Matrix z_test = states_test * whitener.forward;
  const Matrix& states_train_w = z_train;
  const Matrix& states_test_w = z_test;

  // Seeded uniform init in the original coordinates, carried into the
  // whitened parameterization so the starting function is unchanged.
  LinearAttention lin;
  NonlinearAttention nonlin;
  if (linear) {
    lin = init_linear(nodes, dims, cfg.seed);
    for (auto& w : lin.w_net) w = whitener.inverse * w * whitener.inverse;
  } else {
    nonlin = init_nonlinear(nodes, dims, cfg.seed);
    for (auto& net : nonlin.nets) {
      net.w1 = net.w1 * whitener.inverse;
      net.w2 = whitener.inverse * net.w2;
    }
  }

  std::vector<AdamSlot> adam;
  if (cfg.optimizer == Optimizer::adam) {
    if (linear) {
      for (const auto& w : lin.w_net) adam.emplace_back(w);
    } else {
      for (const auto& net : nonlin.nets) {
        adam.emplace_back(net.w1);
        adam.emplace_back(Matrix(net.b1));
        adam.emplace_back(net.w2);
        adam.emplace_back(Matrix(net.b2));
      }
    }
  }

  AttentionTrainResult result;
  double best_test = std::numeric_limits<double>::infinity();
  int since_best = 0;

  // Map the whitened parameterization back to weights acting on the
  // original (node-standardized) states.
  auto current_model = [&]() -> ReadoutModel {
    if (linear) {
      LinearAttention out = lin;
      for (auto& w : out.w_net) w = whitener.forward * w * whitener.forward;
      return out;
    }
    NonlinearAttention out = nonlin;
    for (auto& net : out.nets) {
      net.w1 = net.w1 * whitener.forward;
      net.w2 = whitener.forward * net.w2;
      net.b2 = whitener.forward * net.b2;
    }
    return out;
  };

  // The post-update train predictions recorded for the curve double as the
  // next epoch's gradient input, so the linear model runs one forward pass
  // per epoch.
  Matrix pred_train = linear ? predict(lin, states_train_w) : Matrix();

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    if (linear) {
      const LinearAttention grad =
          linear_gradient_given_pred(lin, states_train_w, targets_train, pred_train);
      if (cfg.optimizer == Optimizer::adam) {
        for (int j = 0; j < dims; ++j) adam_update(lin.w_net[j], grad.w_net[j], adam[j], cfg.learning_rate, epoch);
      } else {
        for (int j = 0; j < dims; ++j) lin.w_net[j] -= cfg.learning_rate * grad.w_net[j];
      }
    } else {
      const NonlinearAttention grad =
          nonlinear_gradient_impl(nonlin, states_train_w, targets_train, nullptr);
      if (cfg.optimizer == Optimizer::adam) {
        for (int j = 0; j < dims; ++j) {
          auto& net = nonlin.nets[j];
          const auto& g = grad.nets[j];
          Matrix b1 = net.b1, b2 = net.b2;
          adam_update(net.w1, g.w1, adam[4 * j + 0], cfg.learning_rate, epoch);
          adam_update(b1, Matrix(g.b1), adam[4 * j + 1], cfg.learning_rate, epoch);
          adam_update(net.w2, g.w2, adam[4 * j + 2], cfg.learning_rate, epoch);
          adam_update(b2, Matrix(g.b2), adam[4 * j + 3], cfg.learning_rate, epoch);
          net.b1 = b1;
          net.b2 = b2;
        }
      } else {
        for (int j = 0; j < dims; ++j) {
          auto& net = nonlin.nets[j];
          const auto& g = grad.nets[j];
          net.w1 -= cfg.learning_rate * g.w1;
          net.b1 -= cfg.learning_rate * g.b1;
          net.w2 -= cfg.learning_rate * g.w2;
          net.b2 -= cfg.learning_rate * g.b2;
        }
      }
    }

    pred_train = linear ? predict(lin, states_train_w) : predict(nonlin, states_train_w);
    const Matrix pred_test = linear ? predict(lin, states_test_w) : predict(nonlin, states_test_w);
    const double train_nrmse = eval::nrmse(pred_train, targets_train);
    const double test_nrmse = eval::nrmse(pred_test, targets_test);
    if (!std::isfinite(train_nrmse) || !std::isfinite(test_nrmse))
      throw NumericalError("train_attention: loss diverged at epoch " + std::to_string(epoch) +
                           "; try a smaller learning rate");
    result.curve.train_nrmse.push_back(train_nrmse);
    result.curve.test_nrmse.push_back(test_nrmse);
    result.epochs_run = epoch;

    if (test_nrmse < best_test) {
      best_test = test_nrmse;
      result.best = current_model();
      result.best_epoch = epoch;
      since_best = 0;
    } else if (cfg.patience > 0 && ++since_best >= cfg.patience) {
      break;
    }
  }

  result.last = current_model();
  if (result.best_epoch == 0) {
    result.best = result.last;
    result.best_epoch = result.epochs_run;
  }
  return result;
}

Vector closed_loop_step(const ReadoutModel& model, reservoir::ReservoirRunner& runner,
                        const dynamics::StandardizationStats& node_stats,
                        const Vector& last_prediction) {
  const Vector raw = runner.step(last_prediction);
  const Vector standardized =
      (raw - node_stats.mean).array() / node_stats.std.array();
  const Matrix pred = predict(model, standardized.transpose());
  if (!pred.allFinite())
    throw NumericalError("closed_loop_step: prediction left the valid range");
  return pred.row(0).transpose();
}

void save_loss_curve_csv(const std::filesystem::path& path, const LossCurve& curve) {
  std::ostringstream os;
  os << "epoch,train_nrmse,test_nrmse\n";
  for (std::size_t e = 0; e < curve.train_nrmse.size(); ++e)
    os << (e + 1) << ',' << curve.train_nrmse[e] << ',' << curve.test_nrmse[e] << "\n";
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot open for writing: " + path.string());
  f << os.str();
}

namespace {

using json = nlohmann::ordered_json;

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (long i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (long j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const json& j) {
  const long rows = static_cast<long>(j.size());
  const long cols = rows > 0 ? static_cast<long>(j[0].size()) : 0;
  Matrix m(rows, cols);
  for (long i = 0; i < rows; ++i)
    for (long c = 0; c < cols; ++c) m(i, c) = j[i][c].get<double>();
  return m;
}

json vector_to_json(const Vector& v) {
  return json(std::vector<double>(v.data(), v.data() + v.size()));
}

Vector vector_from_json(const json& j) {
  Vector v(static_cast<long>(j.size()));
  for (long i = 0; i < v.size(); ++i) v[i] = j[i].get<double>();
  return v;
}

constexpr int kModelFormatVersion = 1;

}  // namespace

void save_model_json(const std::filesystem::path& path, const ReadoutModel& model,
                     const std::string& config_hash,
                     const dynamics::StandardizationStats& node_stats) {
  json doc;
  doc["format_version"] = kModelFormatVersion;
  doc["kind"] = model_kind_name(kind_of(model));
  doc["config_hash"] = config_hash;
  doc["node_stats"]["mean"] = vector_to_json(node_stats.mean);
  doc["node_stats"]["std"] = vector_to_json(node_stats.std);

  if (const auto* ridge = std::get_if<RidgeWeights>(&model)) {
    doc["nodes"] = ridge->w.rows();
    doc["dims"] = ridge->w.cols();
    doc["lambda"] = ridge->lambda;
    doc["w"] = matrix_to_json(ridge->w);
  } else if (const auto* lin = std::get_if<LinearAttention>(&model)) {
    doc["nodes"] = lin->nodes();
    doc["dims"] = lin->dims();
    json nets = json::array();
    for (const auto& w : lin->w_net) nets.push_back(matrix_to_json(w));
    doc["w_net"] = std::move(nets);
  } else {
    const auto& nonlin = std::get<NonlinearAttention>(model);
    doc["nodes"] = nonlin.nodes();
    doc["dims"] = nonlin.dims();
    json nets = json::array();
    for (const auto& net : nonlin.nets) {
      json n;
      n["w1"] = matrix_to_json(net.w1);
      n["b1"] = vector_to_json(net.b1);
      n["w2"] = matrix_to_json(net.w2);
      n["b2"] = vector_to_json(net.b2);
      nets.push_back(std::move(n));
    }
    doc["nets"] = std::move(nets);
  }

  std::ofstream f(path);
  if (!f) throw ConfigError("cannot open for writing: " + path.string());
  f << doc.dump(2) << "\n";
}

ReadoutModel load_model_json(const std::filesystem::path& path,
                             dynamics::StandardizationStats* node_stats) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open model file: " + path.string());
  json doc = json::parse(f);
  if (doc.value("format_version", -1) != kModelFormatVersion)
    throw ConfigError("unsupported model format version in " + path.string());
  if (node_stats != nullptr && doc.contains("node_stats")) {
    node_stats->mean = vector_from_json(doc["node_stats"]["mean"]);
    node_stats->std = vector_from_json(doc["node_stats"]["std"]);
  }
  const std::string kind = doc.at("kind").get<std::string>();
  if (kind == "ridge") {
    RidgeWeights w;
    w.lambda = doc.at("lambda").get<double>();
    w.w = matrix_from_json(doc.at("w"));
    return w;
  }
  if (kind == "linear_attention") {
    LinearAttention model;
    for (const auto& w : doc.at("w_net")) model.w_net.push_back(matrix_from_json(w));
    return model;
  }
  if (kind == "nonlinear_attention") {
    NonlinearAttention model;
    for (const auto& n : doc.at("nets")) {
      NonlinearAttention::Net net;
      net.w1 = matrix_from_json(n.at("w1"));
      net.b1 = vector_from_json(n.at("b1"));
      net.w2 = matrix_from_json(n.at("w2"));
      net.b2 = vector_from_json(n.at("b2"));
      model.nets.push_back(std::move(net));
    }
    return model;
  }
  throw ConfigError("unknown model kind in file: " + kind);
}

}  // namespace attnrc::readout
