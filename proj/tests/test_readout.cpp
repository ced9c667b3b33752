#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "attnrc/readout.hpp"

#include <cmath>
#include <filesystem>

using namespace attnrc;
using namespace attnrc::readout;

namespace {

Matrix random_matrix(long rows, long cols, std::uint64_t seed, double scale = 1.0) {
  Matrix m(rows, cols);
  Rng rng(seed);
  for (long j = 0; j < cols; ++j)
    for (long i = 0; i < rows; ++i) m(i, j) = scale * rng.uniform(-1.0, 1.0);
  return m;
}

// Index-loop quadratic form sum_ij r_i W[i,j] r_j; oracle for the linear
// attention output.
double quadratic_form_oracle(const Matrix& w, const Vector& r) {
  double sum = 0.0;
  for (long i = 0; i < w.rows(); ++i)
    for (long j = 0; j < w.cols(); ++j) sum += r[i] * w(i, j) * r[j];
  return sum;
}

// Flatten every trainable parameter of a model into one vector.
Vector flatten(const LinearAttention& m) {
  long total = 0;
  for (const auto& w : m.w_net) total += w.size();
  Vector v(total);
  long at = 0;
  for (const auto& w : m.w_net) {
    v.segment(at, w.size()) = Eigen::Map<const Vector>(w.data(), w.size());
    at += w.size();
  }
  return v;
}

Vector flatten(const NonlinearAttention& m) {
  long total = 0;
  for (const auto& net : m.nets) total += net.w1.size() + net.b1.size() + net.w2.size() + net.b2.size();
  Vector v(total);
  long at = 0;
  for (const auto& net : m.nets) {
    for (const Matrix* w : {&net.w1, &net.w2}) {
      v.segment(at, w->size()) = Eigen::Map<const Vector>(w->data(), w->size());
      at += w->size();
    }
  }
  // biases appended after the matrices, per net
  for (const auto& net : m.nets) {
    v.segment(at, net.b1.size()) = net.b1;
    at += net.b1.size();
    v.segment(at, net.b2.size()) = net.b2;
    at += net.b2.size();
  }
  return v.head(at);
}

// Central finite differences of the training loss wrt every parameter.
template <typename ModelT>
ModelT finite_difference_gradient(ModelT model, const Matrix& states, const Matrix& targets,
                                  double step) {
  ModelT grad = model;
  auto probe = [&](double* p) {
    const double saved = *p;
    *p = saved + step;
    const double up = attention_loss(model, states, targets);
    *p = saved - step;
    const double down = attention_loss(model, states, targets);
    *p = saved;
    return (up - down) / (2.0 * step);
  };
  if constexpr (std::is_same_v<ModelT, LinearAttention>) {
    for (std::size_t m = 0; m < model.w_net.size(); ++m)
      for (long i = 0; i < model.w_net[m].size(); ++i)
        grad.w_net[m].data()[i] = probe(model.w_net[m].data() + i);
  } else {
    for (std::size_t m = 0; m < model.nets.size(); ++m) {
      auto& net = model.nets[m];
      auto& g = grad.nets[m];
      for (long i = 0; i < net.w1.size(); ++i) g.w1.data()[i] = probe(net.w1.data() + i);
      for (long i = 0; i < net.b1.size(); ++i) g.b1.data()[i] = probe(net.b1.data() + i);
      for (long i = 0; i < net.w2.size(); ++i) g.w2.data()[i] = probe(net.w2.data() + i);
      for (long i = 0; i < net.b2.size(); ++i) g.b2.data()[i] = probe(net.b2.data() + i);
    }
  }
  return grad;
}

}  // namespace

TEST_CASE("ridge recovers planted weights on full-rank data") {
  const Matrix states = random_matrix(40, 6, 1);
  const Matrix planted = random_matrix(6, 2, 2);
  const Matrix targets = states * planted;
  const auto weights = train_ridge(states, targets, 0.0);
  CHECK((weights.w - planted).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("ridge shrinks to zero as lambda dominates") {
  const Matrix states = random_matrix(30, 5, 3);
  const Matrix targets = random_matrix(30, 1, 4);
  const auto weights = train_ridge(states, targets, 1e12);
  CHECK(weights.w.cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("ridge matches a brute-force normal-equation oracle") {
  const Matrix states = random_matrix(5, 3, 5);
  const Matrix targets = random_matrix(5, 1, 6);
  const double lambda = 0.1;
  // Independent dense solve: explicit inverse of the regularized Gram.
  Matrix gram = states.transpose() * states;
  gram.diagonal().array() += lambda;
  const Matrix oracle = gram.inverse() * states.transpose() * targets;
  const auto weights = train_ridge(states, targets, lambda);
  CHECK((weights.w - oracle).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("ridge flags rank deficiency at lambda zero") {
  Matrix states = random_matrix(20, 4, 7);
  states.col(3) = states.col(0);  // duplicated node
  const Matrix targets = random_matrix(20, 1, 8);
  CHECK_THROWS_AS(train_ridge(states, targets, 0.0), NumericalError);
  CHECK_NOTHROW(train_ridge(states, targets, 1e-6));
}

TEST_CASE("ridge predictions reduce to the expected special cases") {
  const Matrix states = random_matrix(4, 3, 9);
  RidgeWeights zero{Matrix::Zero(3, 2), 0.0};
  CHECK(predict_ridge(states, zero).cwiseAbs().maxCoeff() == 0.0);

  RidgeWeights pick{Matrix::Zero(3, 1), 0.0};
  pick.w(1, 0) = 1.0;
  CHECK((predict_ridge(states, pick) - states.col(1)).cwiseAbs().maxCoeff() == 0.0);

  // Naive triple-loop product oracle.
  const Matrix w = random_matrix(3, 2, 10);
  Matrix oracle = Matrix::Zero(4, 2);
  for (long l = 0; l < 4; ++l)
    for (long m = 0; m < 2; ++m)
      for (long n = 0; n < 3; ++n) oracle(l, m) += states(l, n) * w(n, m);
  CHECK((predict_ridge(states, {w, 0.0}) - oracle).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("linear attention forward agrees with the index-loop oracle") {
  LinearAttention model;
  model.w_net.push_back(random_matrix(4, 4, 11));
  const Vector r = random_matrix(4, 1, 12).col(0);

  const auto fwd = attention_forward(model, r);
  CHECK(fwd.d[0] == doctest::Approx(quadratic_form_oracle(model.w_net[0], r)).epsilon(1e-12));

  // identity weights -> squared norm; zero state -> zero everywhere
  LinearAttention eye;
  eye.w_net.push_back(Matrix::Identity(4, 4));
  CHECK(attention_forward(eye, r).d[0] == doctest::Approx(r.squaredNorm()));
  const Vector zero = Vector::Zero(4);
  const auto at_zero = attention_forward(model, zero);
  CHECK(at_zero.w_att.cwiseAbs().maxCoeff() == 0.0);
  CHECK(at_zero.d.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("two-stage linear attention equals the direct quadratic form") {
  LinearAttention model;
  model.w_net.push_back(random_matrix(6, 6, 13));
  model.w_net.push_back(random_matrix(6, 6, 14));
  Rng rng(15);
  for (int trial = 0; trial < 200; ++trial) {
    Vector r(6);
    for (int i = 0; i < 6; ++i) r[i] = rng.uniform(-2.0, 2.0);
    const auto fwd = attention_forward(model, r);
    for (int m = 0; m < 2; ++m) {
      const double direct = r.dot(model.w_net[m].transpose() * r);
      CHECK(std::abs(fwd.d[m] - direct) < 1e-12);
      CHECK(std::abs(fwd.w_att.col(m).dot(r) - direct) < 1e-12);
    }
  }
}

TEST_CASE("nonlinear attention forward matches its per-element oracle") {
  NonlinearAttention model;
  model.nets.resize(1);
  auto& net = model.nets[0];
  net.w1 = random_matrix(3, 3, 16);
  net.b1 = random_matrix(3, 1, 17).col(0);
  net.w2 = random_matrix(3, 3, 18);
  net.b2 = random_matrix(3, 1, 19).col(0);
  const Vector r = random_matrix(3, 1, 20).col(0);

  const auto fwd = attention_forward(model, r);
  Vector hidden(3), w_att(3);
  for (int i = 0; i < 3; ++i) {
    double acc = net.b1[i];
    for (int j = 0; j < 3; ++j) acc += net.w1(i, j) * r[j];
    hidden[i] = std::tanh(acc);
  }
  for (int i = 0; i < 3; ++i) {
    double acc = net.b2[i];
    for (int j = 0; j < 3; ++j) acc += net.w2(i, j) * hidden[j];
    w_att[i] = acc;
  }
  double d = 0.0;
  for (int i = 0; i < 3; ++i) d += w_att[i] * r[i];
  CHECK((fwd.w_att.col(0) - w_att).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(fwd.d[0] == doctest::Approx(d).epsilon(1e-12));

  // zero weights -> w_att = b2; zero state -> d = 0
  NonlinearAttention zeros = model;
  zeros.nets[0].w1.setZero();
  zeros.nets[0].w2.setZero();
  const auto fz = attention_forward(zeros, r);
  CHECK((fz.w_att.col(0) - zeros.nets[0].b2).cwiseAbs().maxCoeff() == 0.0);
  CHECK(fz.d[0] == doctest::Approx(zeros.nets[0].b2.dot(r)));
  CHECK(attention_forward(model, Vector::Zero(3)).d[0] == 0.0);
}

TEST_CASE("nonlinear attention instantiates 2 N^2 interlayer weights per dimension") {
  NonlinearAttention model;
  model.nets.resize(3);
  for (auto& net : model.nets) {
    net.w1 = Matrix::Zero(7, 7);
    net.b1 = Vector::Zero(7);
    net.w2 = Matrix::Zero(7, 7);
    net.b2 = Vector::Zero(7);
  }
  CHECK(model.interlayer_weight_count() == 6 * 7 * 7);
}

TEST_CASE("analytic gradients match central finite differences") {
  const Matrix states = random_matrix(20, 5, 21, 0.7);
  const Matrix targets = random_matrix(20, 2, 22);

  SUBCASE("linear") {
    LinearAttention model;
    model.w_net.push_back(random_matrix(5, 5, 23, 0.4));
    model.w_net.push_back(random_matrix(5, 5, 24, 0.4));
    const auto analytic = attention_gradient(model, states, targets);
    const auto numeric = finite_difference_gradient(model, states, targets, 1e-5);
    const Vector ga = flatten(analytic), gn = flatten(numeric);
    CHECK((ga - gn).norm() / gn.norm() < 1e-6);
  }

  SUBCASE("nonlinear") {
    NonlinearAttention model;
    model.nets.resize(2);
    for (int m = 0; m < 2; ++m) {
      model.nets[m].w1 = random_matrix(5, 5, 25 + m, 0.4);
      model.nets[m].b1 = random_matrix(5, 1, 27 + m, 0.2).col(0);
      model.nets[m].w2 = random_matrix(5, 5, 29 + m, 0.4);
      model.nets[m].b2 = random_matrix(5, 1, 31 + m, 0.2).col(0);
    }
    const auto analytic = attention_gradient(model, states, targets);
    const auto numeric = finite_difference_gradient(model, states, targets, 1e-5);
    const Vector ga = flatten(analytic), gn = flatten(numeric);
    CHECK((ga - gn).norm() / gn.norm() < 1e-6);
  }
}

TEST_CASE("gradient vanishes at a perfect fit and reduces to one term at L=1") {
  LinearAttention model;
  model.w_net.push_back(random_matrix(4, 4, 33, 0.5));
  const Matrix states = random_matrix(12, 4, 34);
  const Matrix targets = predict(model, states);  // d == y
  const auto grad = attention_gradient(model, states, targets);
  CHECK(grad.w_net[0].cwiseAbs().maxCoeff() < 1e-14);

  const Matrix one_state = states.topRows(1);
  Matrix one_target(1, 1);
  one_target(0, 0) = targets(0, 0) + 0.5;
  const auto g1 = attention_gradient(model, one_state, one_target);
  const Vector r = one_state.row(0).transpose();
  const Matrix expected = (predict(model, one_state)(0, 0) - one_target(0, 0)) * r * r.transpose();
  CHECK((g1.w_net[0] - expected).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("training with a zero learning rate leaves the weights alone") {
  const Matrix states = random_matrix(30, 4, 35);
  const Matrix targets = random_matrix(30, 1, 36);
  TrainConfig cfg;
  cfg.learning_rate = 0.0;
  cfg.epochs = 5;
  cfg.seed = 99;
  cfg.patience = 0;
  const auto result = train_attention(ModelKind::linear_attention, states, targets, states,
                                      targets, cfg);
  // After any number of zero-rate epochs the weights equal the seeded init,
  // i.e. the one-epoch run.
  TrainConfig one = cfg;
  one.epochs = 1;
  const auto reference = train_attention(ModelKind::linear_attention, states, targets, states,
                                         targets, one);
  const auto& last = std::get<LinearAttention>(result.last);
  CHECK((last.w_net[0] - std::get<LinearAttention>(reference.last).w_net[0]).cwiseAbs().maxCoeff() == 0.0);
  CHECK(result.curve.train_nrmse.size() == 5);
  CHECK(result.curve.train_nrmse.front() == doctest::Approx(result.curve.train_nrmse.back()));
}

TEST_CASE("training drives a realizable quadratic-form target to zero loss") {
  const Matrix states = random_matrix(60, 5, 37);
  LinearAttention planted;
  planted.w_net.push_back(random_matrix(5, 5, 38, 0.3));
  const Matrix targets = predict(planted, states);

  // Convex least squares in W: descent below the Lipschitz bound is
  // monotone. Bound estimated from the quartic moment of the states.
  double quartic = 0.0;
  for (long l = 0; l < states.rows(); ++l) quartic += std::pow(states.row(l).squaredNorm(), 2);
  quartic /= static_cast<double>(states.rows());

  TrainConfig cfg;
  cfg.learning_rate = 1.0 / quartic;
  cfg.epochs = 4000;
  cfg.seed = 40;
  cfg.patience = 0;
  const auto result = train_attention(ModelKind::linear_attention, states, targets, states,
                                      targets, cfg);
  for (std::size_t e = 1; e < result.curve.train_nrmse.size(); ++e)
    CHECK(result.curve.train_nrmse[e] <= result.curve.train_nrmse[e - 1] + 1e-12);
  CHECK(result.curve.train_nrmse.back() < 1e-3);
}

TEST_CASE("training a target dimension never touches the other dimensions") {
  const Matrix states = random_matrix(25, 4, 41);
  Matrix targets_a = random_matrix(25, 2, 42);
  Matrix targets_b = targets_a;
  targets_b.col(1) = random_matrix(25, 1, 43).col(0);  // only dim 1 differs

  TrainConfig cfg;
  cfg.epochs = 50;
  cfg.seed = 44;
  cfg.patience = 0;
  const auto run_a = train_attention(ModelKind::linear_attention, states, targets_a, states,
                                     targets_a, cfg);
  const auto run_b = train_attention(ModelKind::linear_attention, states, targets_b, states,
                                     targets_b, cfg);
  const auto& wa = std::get<LinearAttention>(run_a.last).w_net;
  const auto& wb = std::get<LinearAttention>(run_b.last).w_net;
  CHECK((wa[0] - wb[0]).cwiseAbs().maxCoeff() == 0.0);  // dim 0 identical
  CHECK((wa[1] - wb[1]).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("training reports divergence with advice") {
  const Matrix states = random_matrix(50, 6, 45, 3.0);
  const Matrix targets = random_matrix(50, 1, 46);
  TrainConfig cfg;
  cfg.learning_rate = 10.0;  // far above the stability bound
  cfg.epochs = 500;
  cfg.seed = 47;
  CHECK_THROWS_AS(train_attention(ModelKind::linear_attention, states, targets, states, targets, cfg),
                  NumericalError);
}

TEST_CASE("equal reservoir states produce equal attention weights") {
  LinearAttention model;
  model.w_net.push_back(random_matrix(5, 5, 48));
  const Vector r = random_matrix(5, 1, 49).col(0);
  const auto a = attention_forward(model, r);
  const auto b = attention_forward(model, r);
  CHECK((a.w_att - b.w_att).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("model serialization round-trips every kind") {
  const auto path = std::filesystem::temp_directory_path() / "attnrc_model_test.json";
  dynamics::StandardizationStats stats;
  stats.mean = random_matrix(4, 1, 50).col(0);
  stats.std = random_matrix(4, 1, 51).col(0).cwiseAbs() + Vector::Ones(4);

  RidgeWeights ridge{random_matrix(4, 2, 52), 1e-3};
  save_model_json(path, ridge, "deadbeef", stats);
  dynamics::StandardizationStats loaded_stats;
  const auto loaded = load_model_json(path, &loaded_stats);
  const auto& lr = std::get<RidgeWeights>(loaded);
  CHECK((lr.w - ridge.w).cwiseAbs().maxCoeff() == 0.0);
  CHECK(lr.lambda == ridge.lambda);
  CHECK((loaded_stats.mean - stats.mean).cwiseAbs().maxCoeff() == 0.0);

  LinearAttention lin;
  lin.w_net.push_back(random_matrix(4, 4, 53));
  save_model_json(path, lin, "deadbeef", stats);
  const auto loaded_lin = load_model_json(path);
  const auto& ll = std::get<LinearAttention>(loaded_lin);
  CHECK((ll.w_net[0] - lin.w_net[0]).cwiseAbs().maxCoeff() == 0.0);

  NonlinearAttention nl;
  nl.nets.resize(1);
  nl.nets[0].w1 = random_matrix(4, 4, 54);
  nl.nets[0].b1 = random_matrix(4, 1, 55).col(0);
  nl.nets[0].w2 = random_matrix(4, 4, 56);
  nl.nets[0].b2 = random_matrix(4, 1, 57).col(0);
  save_model_json(path, nl, "deadbeef", stats);
  const auto loaded_nl = load_model_json(path);
  const auto& lnl = std::get<NonlinearAttention>(loaded_nl);
  CHECK((lnl.nets[0].w2 - nl.nets[0].w2).cwiseAbs().maxCoeff() == 0.0);
  std::filesystem::remove(path);
}
