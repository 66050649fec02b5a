#include "doctest.h"

#include <cmath>
#include <stdexcept>

#include "advml/dataset.hpp"
#include "advml/nn.hpp"

using namespace advml;

namespace {

/// Worst relative error between analytic and finite-difference bundles. The
/// denominator floor absorbs central-difference roundoff on near-zero entries
/// (absolute error ~1e-10 at h=1e-5), which would otherwise dominate.
double max_relative_error(const GradientBundle& analytic, const GradientBundle& numeric) {
  double worst = 0.0;
  const auto compare = [&](const Matrix& a, const Matrix& n) {
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double denom = std::max({std::abs(a.data()[i]), std::abs(n.data()[i]), 1e-3});
      worst = std::max(worst, std::abs(a.data()[i] - n.data()[i]) / denom);
    }
  };
  for (std::size_t l = 0; l < analytic.params.size(); ++l) {
    compare(analytic.params[l].dw, numeric.params[l].dw);
    compare(analytic.params[l].db, numeric.params[l].db);
  }
  compare(analytic.input_grad, numeric.input_grad);
  return worst;
}

/// Keeps ReLU pre-activations away from their kink so central differences
/// see a smooth function.
void nudge_away_from_relu_kinks(MlpModel& model, const Matrix& x) {
  if (model.hidden_activation != ActivationKind::Relu) return;
  for (int attempt = 0; attempt < 50; ++attempt) {
    ForwardCache cache;
    forward(model, x, cache);
    bool close = false;
    for (std::size_t l = 0; l + 1 < model.layers.size(); ++l)
      for (double z : cache.pre[l].data())
        if (std::abs(z) < 1e-3) close = true;
    if (!close) return;
    for (auto& layer : model.layers)
      for (double& b : layer.b.data()) b += 2e-3;
  }
}

}  // namespace

TEST_CASE("mlp_init shapes, zero bias, determinism") {
  Prng rng(11);
  MlpModel m = mlp_init({4, 8, 3}, ActivationKind::Relu, rng);
  REQUIRE(m.layers.size() == 2);
  CHECK(m.layers[0].w.rows() == 8);
  CHECK(m.layers[0].w.cols() == 4);
  CHECK(m.layers[1].w.rows() == 3);
  CHECK(m.layers[1].w.cols() == 8);
  for (const auto& layer : m.layers)
    for (double b : layer.b.data()) CHECK(b == 0.0);

  Prng rng_a(5), rng_b(5);
  MlpModel a = mlp_init({2, 2}, ActivationKind::Relu, rng_a);
  MlpModel b = mlp_init({2, 2}, ActivationKind::Relu, rng_b);
  CHECK(a.layers[0].w == b.layers[0].w);

  CHECK_THROWS_AS(mlp_init({3}, ActivationKind::Relu, rng), std::invalid_argument);
  CHECK_THROWS_AS(mlp_init({3, 0, 2}, ActivationKind::Relu, rng), std::invalid_argument);
}

TEST_CASE("forward: zero weights give uniform softmax") {
  MlpModel m;
  m.layers.push_back({Matrix(4, 3, 0.0), Matrix(1, 4, 0.0)});
  const Matrix x = Matrix::from_rows({{0.3, 0.5, 0.9}});
  const Matrix logits = forward(m, x);
  for (std::size_t c = 0; c < 4; ++c) CHECK(logits(0, c) == 0.0);
  const Matrix probs = softmax_rows(logits);
  for (std::size_t c = 0; c < 4; ++c) CHECK(probs(0, c) == doctest::Approx(0.25));
}

TEST_CASE("forward: identity single layer passes input through") {
  MlpModel m;
  Matrix w(2, 2, 0.0);
  w(0, 0) = 1.0;
  w(1, 1) = 1.0;
  m.layers.push_back({w, Matrix(1, 2, 0.0)});
  const Matrix logits = forward(m, Matrix::from_rows({{2.0, 3.0}}));
  CHECK(logits(0, 0) == doctest::Approx(2.0));
  CHECK(logits(0, 1) == doctest::Approx(3.0));

  CHECK_THROWS_AS(forward(m, Matrix(1, 3)), std::invalid_argument);
}

TEST_CASE("forward: two-layer relu net matches hand computation") {
  // hand-evaluated: z1 = x*W1^T + b1, a1 = relu(z1), z2 = a1*W2^T + b2
  MlpModel m;
  m.layers.push_back({Matrix::from_rows({{0.5, -1.0}, {1.0, 1.0}}),
                      Matrix::from_rows({{0.1, -0.2}})});
  m.layers.push_back({Matrix::from_rows({{1.0, -1.0}}), Matrix::from_rows({{0.05}})});
  const Matrix x = Matrix::from_rows({{1.0, 0.5}});
  // z1 = (0.5*1 - 1*0.5 + 0.1, 1*1 + 1*0.5 - 0.2) = (0.1, 1.3); relu keeps both
  // z2 = 0.1 - 1.3 + 0.05 = -1.15
  const Matrix logits = forward(m, x);
  CHECK(logits(0, 0) == doctest::Approx(-1.15));
}

TEST_CASE("loss values: trivial cases") {
  const Matrix uniform(1, 10, 0.0);
  CHECK(loss_value(LossSpec{LossKind::CrossEntropy}, uniform, Target::from_labels({3})) ==
        doctest::Approx(std::log(10.0)));

  const Matrix logits = Matrix::from_rows({{0.2, 0.8}});
  CHECK(loss_value(LossSpec{LossKind::Mse}, logits, Target::from_values(logits)) == 0.0);

  // SmoothL1 with beta=1, single residual 0.5 -> 0.5*0.25 = 0.125
  const Matrix pred(1, 1, 0.5);
  const Matrix target(1, 1, 0.0);
  CHECK(loss_value(LossSpec{LossKind::SmoothL1, 1.0}, pred, Target::from_values(target)) ==
        doctest::Approx(0.125));

  // CrossEntropy is nonnegative
  CHECK(loss_value(LossSpec{LossKind::CrossEntropy}, Matrix::from_rows({{5.0, -3.0}}),
                   Target::from_labels({0})) >= 0.0);

  CHECK_THROWS_AS(loss_value(LossSpec{LossKind::CrossEntropy}, uniform, Target::from_labels({10})),
                  std::invalid_argument);
}

TEST_CASE("softmax rows sum to one under extreme logits") {
  const Matrix logits = Matrix::from_rows({{1000.0, 999.0, -1000.0}, {-5.0, 3.0, 0.0}});
  const Matrix probs = softmax_rows(logits);
  for (std::size_t r = 0; r < probs.rows(); ++r) {
    double sum = 0.0;
    for (std::size_t c = 0; c < probs.cols(); ++c) sum += probs(r, c);
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("backward: zero-residual mse has zero gradients") {
  Prng rng(2);
  MlpModel m = mlp_init({3, 2}, ActivationKind::Identity, rng);
  const Matrix x = Matrix::from_rows({{0.1, 0.2, 0.3}});
  ForwardCache cache;
  const Matrix logits = forward(m, x, cache);
  const GradientBundle g =
      backward(m, cache, Target::from_values(logits), LossSpec{LossKind::Mse});
  CHECK(max_abs(g.params[0].dw) == 0.0);
  CHECK(max_abs(g.params[0].db) == 0.0);
  CHECK(max_abs(g.input_grad) == 0.0);
}

TEST_CASE("backward: logistic unit at zero logit, bce target 1 -> -0.5") {
  MlpModel m;
  m.layers.push_back({Matrix(1, 1, 0.0), Matrix(1, 1, 0.0)});
  const Matrix x(1, 1, 0.0);
  ForwardCache cache;
  forward(m, x, cache);
  const Matrix grad = loss_logit_grad(LossSpec{LossKind::Bce}, cache.post.back(),
                                      Target::from_values(Matrix(1, 1, 1.0)));
  CHECK(grad(0, 0) == doctest::Approx(-0.5));
}

TEST_CASE("gradient exactness: backward matches finite differences on 20 random nets") {
  const LossKind kinds[] = {LossKind::CrossEntropy, LossKind::Mse, LossKind::SmoothL1,
                            LossKind::MaeOneHot, LossKind::Bce};
  const ActivationKind acts[] = {ActivationKind::Relu, ActivationKind::Sigmoid,
                                 ActivationKind::Tanh, ActivationKind::Identity};
  for (int trial = 0; trial < 20; ++trial) {
    Prng rng(1000 + trial);
    const LossSpec spec{kinds[trial % 5], 0.7};
    const ActivationKind act = acts[trial % 4];
    const std::size_t batch = 1 + trial % 3;
    MlpModel m = mlp_init({3, 5, 4, 3}, act, rng);

    Matrix x(batch, 3);
    for (double& v : x.data()) v = rng.uniform(-1.0, 1.0);
    nudge_away_from_relu_kinks(m, x);

    Target target = Target::from_labels({});
    if (spec.kind == LossKind::CrossEntropy || spec.kind == LossKind::MaeOneHot) {
      std::vector<int> labels(batch);
      for (int& y : labels) y = static_cast<int>(rng.uniform_index(3));
      target = Target::from_labels(labels);
    } else {
      Matrix t(batch, 3);
      for (double& v : t.data()) v = rng.uniform(0.0, 1.0);
      target = Target::from_values(t);
    }

    ForwardCache cache;
    forward(m, x, cache);
    const GradientBundle analytic = backward(m, cache, target, spec);
    const GradientBundle numeric = finite_diff_gradient(m, x, target, spec, 1e-5);
    CHECK(max_relative_error(analytic, numeric) < 1e-6);
  }
}

TEST_CASE("finite differences converge at second order on tanh nets") {
  Prng rng(77);
  MlpModel m = mlp_init({2, 4, 2}, ActivationKind::Tanh, rng);
  Matrix x(2, 2);
  for (double& v : x.data()) v = rng.uniform(-1.0, 1.0);
  const Target target = Target::from_labels({0, 1});
  const LossSpec spec{LossKind::CrossEntropy};

  ForwardCache cache;
  forward(m, x, cache);
  const GradientBundle exact = backward(m, cache, target, spec);
  const GradientBundle coarse = finite_diff_gradient(m, x, target, spec, 2e-3);
  const GradientBundle fine = finite_diff_gradient(m, x, target, spec, 1e-3);

  double worst_coarse = 0.0, worst_fine = 0.0;
  for (std::size_t l = 0; l < exact.params.size(); ++l)
    for (std::size_t i = 0; i < exact.params[l].dw.size(); ++i) {
      worst_coarse = std::max(worst_coarse, std::abs(coarse.params[l].dw.data()[i] -
                                                     exact.params[l].dw.data()[i]));
      worst_fine = std::max(worst_fine, std::abs(fine.params[l].dw.data()[i] -
                                                 exact.params[l].dw.data()[i]));
    }
  // halving h should shrink the error roughly 4x; allow slack for rounding
  CHECK(worst_fine < worst_coarse / 2.5);
}

TEST_CASE("optimizer: sgd basic step and zero-gradient fixpoints") {
  MlpModel m;
  m.layers.push_back({Matrix(1, 1, 1.0), Matrix(1, 1, 0.0)});
  GradientBundle g;
  g.params.push_back({Matrix(1, 1, 2.0), Matrix(1, 1, 0.0)});
  g.input_grad = Matrix(1, 1, 0.0);

  Optimizer sgd(SgdConfig{0.1});
  sgd.step(m, g);
  CHECK(m.layers[0].w(0, 0) == doctest::Approx(0.8));

  // zero gradient leaves parameters unchanged for both optimizers
  GradientBundle zero;
  zero.params.push_back({Matrix(1, 1, 0.0), Matrix(1, 1, 0.0)});
  MlpModel before = m;
  sgd.step(m, zero);
  CHECK(m.layers[0].w == before.layers[0].w);

  Optimizer adam(AdamConfig{});
  adam.step(m, zero);
  CHECK(m.layers[0].w == before.layers[0].w);
}

TEST_CASE("optimizer: adam first step magnitude is lr under unit gradient") {
  MlpModel m;
  m.layers.push_back({Matrix(2, 2, 0.5), Matrix(1, 2, 0.5)});
  GradientBundle g;
  g.params.push_back({Matrix(2, 2, 1.0), Matrix(1, 2, 1.0)});

  AdamConfig cfg;
  Optimizer adam(cfg);
  adam.step(m, g);
  // bias-corrected first step: lr * 1 / (1 + eps)
  for (double v : m.layers[0].w.data())
    CHECK(std::abs((0.5 - v) - cfg.lr) < 1e-9);
}

TEST_CASE("train: epochs=0 is a no-op, same seed reproduces trajectories") {
  Prng gen_rng(9);
  Dataset data = gen_two_gaussians(30, 1.0, 0.7, gen_rng);

  Prng init_rng(3);
  MlpModel m = mlp_init({2, 8, 2}, ActivationKind::Relu, init_rng);

  TrainConfig cfg;
  cfg.epochs = 0;
  MlpModel untouched = m;
  const TrainReport empty_report = train(m, data, cfg);
  CHECK(empty_report.epoch_losses.empty());
  CHECK(m.layers[0].w == untouched.layers[0].w);

  cfg.epochs = 5;
  cfg.seed = 123;
  cfg.optimizer = SgdConfig{0.1};
  MlpModel m1 = untouched;
  MlpModel m2 = untouched;
  const TrainReport r1 = train(m1, data, cfg);
  const TrainReport r2 = train(m2, data, cfg);
  for (std::size_t e = 0; e < r1.epoch_losses.size(); ++e)
    CHECK(r1.epoch_losses[e] == r2.epoch_losses[e]);
  CHECK(m1.layers[1].w == m2.layers[1].w);
}

TEST_CASE("train: two gaussians reaches high accuracy") {
  Prng gen_rng(21);
  Dataset data = gen_two_gaussians(100, 1.0, 0.7, gen_rng);
  Prng init_rng(4);
  MlpModel m = mlp_init({2, 16, 2}, ActivationKind::Relu, init_rng);
  TrainConfig cfg;
  cfg.epochs = 50;
  cfg.batch_size = 16;
  cfg.optimizer = SgdConfig{0.1};
  cfg.seed = 7;
  train(m, data, cfg);
  CHECK(evaluate(m, data).accuracy >= 0.95);
}

TEST_CASE("train: aborts on divergence instead of continuing") {
  Prng gen_rng(5);
  Dataset data = gen_two_gaussians(20, 1.0, 1.0, gen_rng);
  Prng init_rng(6);
  MlpModel m = mlp_init({2, 8, 2}, ActivationKind::Relu, init_rng);
  TrainConfig cfg;
  cfg.epochs = 60;
  cfg.optimizer = SgdConfig{1e6};  // guaranteed blow-up
  cfg.loss = LossSpec{LossKind::Mse};
  CHECK_THROWS_AS(train(m, data, cfg), std::runtime_error);
}

TEST_CASE("evaluate: tie-breaking, tiny sets, argmax shift invariance") {
  MlpModel constant;
  constant.layers.push_back({Matrix(2, 2, 0.0), Matrix(1, 2, 0.0)});

  Dataset data;
  data.features = Matrix(4, 2, 0.5);
  data.labels = {0, 0, 1, 1};
  data.num_classes = 2;
  data.flags.assign(4, RowFlag::Clean);
  // constant logits tie; argmax goes to class 0, half the rows are correct
  CHECK(evaluate(constant, data).accuracy == doctest::Approx(0.5));

  CHECK_THROWS_AS(evaluate(constant, Dataset{}), std::invalid_argument);

  Dataset one;
  one.features = Matrix(1, 2, 0.1);
  one.labels = {0};
  one.num_classes = 2;
  one.flags = {RowFlag::Clean};
  const EvalMetrics single = evaluate(constant, one);
  CHECK(single.accuracy == doctest::Approx(1.0));
  CHECK(single.mean_loss == doctest::Approx(std::log(2.0)));

  // adding a constant to every logit in a row keeps predictions unchanged
  Prng rng(12);
  MlpModel m = mlp_init({2, 6, 3}, ActivationKind::Tanh, rng);
  Matrix x(5, 2);
  for (double& v : x.data()) v = rng.uniform(-1.0, 1.0);
  Matrix logits = forward(m, x);
  Matrix shifted = logits;
  for (std::size_t r = 0; r < shifted.rows(); ++r)
    for (std::size_t c = 0; c < shifted.cols(); ++c) shifted(r, c) += 17.5;
  CHECK(argmax_rows(logits) == argmax_rows(shifted));
}

TEST_CASE("evaluate: model trained to memorize four points is perfect") {
  Dataset tiny;
  tiny.features = Matrix::from_rows({{0.1, 0.9}, {0.9, 0.1}, {0.2, 0.8}, {0.8, 0.2}});
  tiny.labels = {0, 1, 0, 1};
  tiny.num_classes = 2;
  tiny.flags.assign(4, RowFlag::Clean);

  Prng rng(8);
  MlpModel m = mlp_init({2, 16, 2}, ActivationKind::Relu, rng);
  TrainConfig cfg;
  cfg.epochs = 200;
  cfg.batch_size = 4;
  cfg.optimizer = SgdConfig{0.5};
  cfg.seed = 1;
  train(m, tiny, cfg);
  CHECK(evaluate(m, tiny).accuracy == doctest::Approx(1.0));
}

TEST_CASE("train_on_values drives regression targets") {
  Prng rng(31);
  MlpModel m = mlp_init({2, 8, 2}, ActivationKind::Tanh, rng);
  Matrix x(16, 2);
  for (double& v : x.data()) v = rng.uniform(0.0, 1.0);
  const Matrix target = x;  // identity task
  TrainConfig cfg;
  cfg.epochs = 200;
  cfg.batch_size = 8;
  cfg.loss = LossSpec{LossKind::Mse};
  cfg.optimizer = SgdConfig{0.5};
  const TrainReport report = train_on_values(m, x, target, cfg);
  CHECK(report.epoch_losses.back() < report.epoch_losses.front());
  CHECK(report.epoch_losses.back() < 0.01);
}
