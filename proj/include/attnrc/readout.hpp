#pragma once

#include "attnrc/common.hpp"
#include "attnrc/reservoir.hpp"

#include <filesystem>
#include <string>
#include <variant>
#include <vector>

namespace attnrc::readout {

/// Static ridge-regression weights, one column per target dimension.
struct RidgeWeights {
  Matrix w;  // N x M
  double lambda = 0.0;
};

/// Input-dependent linear attention: per target dimension m,
/// w_att = W_net[m] * r and d_m = w_att . r, i.e. a quadratic form in the
/// reservoir state.
struct LinearAttention {
  std::vector<Matrix> w_net;  // M matrices, N x N

  int nodes() const { return w_net.empty() ? 0 : static_cast<int>(w_net[0].rows()); }
  int dims() const { return static_cast<int>(w_net.size()); }
};

/// Attention weights produced by a 3-layer network per target dimension:
/// hidden = tanh(W1 r + b1), w_att = W2 hidden + b2, d = w_att . r.
struct NonlinearAttention {
  struct Net {
    Matrix w1;  // N x N
    Vector b1;
    Matrix w2;  // N x N
    Vector b2;
  };
  std::vector<Net> nets;  // M

  int nodes() const { return nets.empty() ? 0 : static_cast<int>(nets[0].w1.rows()); }
  int dims() const { return static_cast<int>(nets.size()); }

  /// Interlayer weight-matrix entries only (biases excluded): 2 N^2 per
  /// target dimension.
  long interlayer_weight_count() const;
};

using ReadoutModel = std::variant<RidgeWeights, LinearAttention, NonlinearAttention>;

enum class ModelKind { ridge, linear_attention, nonlinear_attention };

std::string model_kind_name(ModelKind kind);
ModelKind model_kind_from_name(const std::string& name);
ModelKind kind_of(const ReadoutModel& model);

/// Closed-form ridge solve per target column, (R^T R + lambda I) w = R^T y,
/// via LDLT (no explicit inverse). At lambda = 0 a rank-deficient R raises
/// NumericalError advising lambda > 0.
RidgeWeights train_ridge(const Matrix& states, const Matrix& targets, double lambda);

Matrix predict_ridge(const Matrix& states, const RidgeWeights& weights);

/// Ridge objective ||y - R w||^2 + lambda ||w||^2 (summed over target
/// dimensions).
double ridge_objective(const Matrix& states, const Matrix& targets,
                       const Matrix& w, double lambda);

struct AttentionForward {
  Matrix w_att;  // N x M, one attention-weight column per target dimension
  Vector d;      // M predictions
};

AttentionForward attention_forward(const LinearAttention& model, const Vector& r);
AttentionForward attention_forward(const NonlinearAttention& model, const Vector& r);

/// Batched predictions, L x M.
Matrix predict(const LinearAttention& model, const Matrix& states);
Matrix predict(const NonlinearAttention& model, const Matrix& states);
Matrix predict(const ReadoutModel& model, const Matrix& states);

/// Attention weights for every row of `states`: per target dimension m an
/// L x N matrix.
std::vector<Matrix> attention_weights(const LinearAttention& model, const Matrix& states);

/// Mean squared-distance loss F = 1/(2L) sum_l ||d_l - y_l||^2. The 1/L
/// factor keeps the fixed learning rate 0.01 inside the gradient-descent
/// stability bound for every reservoir size swept here.
double attention_loss(const LinearAttention& model, const Matrix& states, const Matrix& targets);
double attention_loss(const NonlinearAttention& model, const Matrix& states, const Matrix& targets);

/// Analytic gradients of attention_loss with respect to every trainable
/// parameter; same container shapes as the models.
LinearAttention attention_gradient(const LinearAttention& model, const Matrix& states,
                                   const Matrix& targets);
NonlinearAttention attention_gradient(const NonlinearAttention& model, const Matrix& states,
                                      const Matrix& targets);

enum class Optimizer { plain_gd, adam };

struct TrainConfig {
  double learning_rate = 0.01;
  int epochs = 2000;
  Optimizer optimizer = Optimizer::plain_gd;
  std::uint64_t seed = 0;
  /// Early stopping on test NRMSE; <= 0 disables.
  int patience = 200;
};

struct LossCurve {
  std::vector<double> train_nrmse;  // one entry per completed epoch
  std::vector<double> test_nrmse;
};

struct AttentionTrainResult {
  ReadoutModel best;  // weights at the best-test-NRMSE epoch
  ReadoutModel last;  // weights after the final epoch
  LossCurve curve;
  int best_epoch = 0;
  int epochs_run = 0;
};

/// Full-batch gradient descent on precomputed, standardized states.
/// Initialization is seeded uniform on [-1/sqrt(N), 1/sqrt(N)], biases zero.
/// Throws NumericalError (suggesting a smaller learning rate) when the loss
/// goes non-finite.
AttentionTrainResult train_attention(ModelKind kind, const Matrix& states_train,
                                     const Matrix& targets_train,
                                     const Matrix& states_test,
                                     const Matrix& targets_test,
                                     const TrainConfig& cfg);

/// Advance the reservoir one mask period with the previous prediction as
/// input and apply the readout. The runner's history carries over; trained
/// weights are never mutated.
Vector closed_loop_step(const ReadoutModel& model,
                        reservoir::ReservoirRunner& runner,
                        const dynamics::StandardizationStats& node_stats,
                        const Vector& last_prediction);

void save_loss_curve_csv(const std::filesystem::path& path, const LossCurve& curve);

/// Versioned JSON serialization with shape metadata; `extra` lets callers
/// attach provenance (config hash, node stats).
void save_model_json(const std::filesystem::path& path, const ReadoutModel& model,
                     const std::string& config_hash,
                     const dynamics::StandardizationStats& node_stats);
ReadoutModel load_model_json(const std::filesystem::path& path,
                             dynamics::StandardizationStats* node_stats = nullptr);

}  // namespace attnrc::readout
