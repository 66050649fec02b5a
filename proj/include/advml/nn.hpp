#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <variant>
#include <vector>

#include "advml/matrix.hpp"
#include "advml/prng.hpp"

namespace advml {

enum class ActivationKind { Relu, Sigmoid, Tanh, Identity };

double activate(ActivationKind kind, double x);
/// Derivative given pre-activation z and post-activation a.
double activate_derivative(ActivationKind kind, double z, double a);

struct DenseLayer {
  Matrix w;  // out x in
  Matrix b;  // 1 x out
  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

/// Fully connected feed-forward net. Hidden layers share one activation; the
/// last layer emits raw logits unless output_activation is set (autoencoders
/// use a sigmoid head). Value type: copying clones every parameter.
struct MlpModel {
  std::vector<DenseLayer> layers;
  ActivationKind hidden_activation = ActivationKind::Relu;
  ActivationKind output_activation = ActivationKind::Identity;
  /// When set, backward() reports a zero input gradient (gradient masking);
  /// parameter gradients are untouched. Not persisted in checkpoints.
  bool input_grad_masked = false;

  std::size_t input_dim() const { return layers.front().w.cols(); }
  std::size_t output_dim() const { return layers.back().w.rows(); }
};

/// W ~ N(0, 1/in_dim), b = 0; deterministic under the rng state.
MlpModel mlp_init(const std::vector<std::size_t>& layer_dims, ActivationKind activation,
                  Prng& rng);

struct ForwardCache {
  Matrix input;
  std::vector<Matrix> pre;   // z = a_prev * W^T + b, per layer
  std::vector<Matrix> post;  // activation(z); post.back() is the output
};

Matrix forward(const MlpModel& model, const Matrix& x);
Matrix forward(const MlpModel& model, const Matrix& x, ForwardCache& cache);

/// Rows sum to 1; computed with the max-shift for stability.
Matrix softmax_rows(const Matrix& logits);
std::vector<int> argmax_rows(const Matrix& logits);  // ties break to lowest index

enum class LossKind { CrossEntropy, Mse, SmoothL1, MaeOneHot, Bce };

struct LossSpec {
  LossKind kind = LossKind::CrossEntropy;
  double beta = 1.0;  // SmoothL1 transition point
};

/// Training target: class indices for CrossEntropy/MaeOneHot (and one-hot
/// construction), or a dense value matrix for the regression-style losses.
struct Target {
  std::vector<int> labels;
  Matrix values;
  bool has_labels = false;

  static Target from_labels(std::vector<int> l) {
    Target t;
    t.labels = std::move(l);
    t.has_labels = true;
    return t;
  }
  static Target from_values(Matrix v) {
    Target t;
    t.values = std::move(v);
    return t;
  }
};

/// Mean loss over the batch (CrossEntropy via log-sum-exp).
double loss_value(const LossSpec& spec, const Matrix& logits, const Target& target);
/// dLoss/dlogits with the batch-mean reduction folded in.
Matrix loss_logit_grad(const LossSpec& spec, const Matrix& logits, const Target& target);

struct LayerGrad {
  Matrix dw;
  Matrix db;
};

struct GradientBundle {
  std::vector<LayerGrad> params;  // one per layer
  Matrix input_grad;              // dLoss/dX, batch-shaped
};

GradientBundle backward(const MlpModel& model, const ForwardCache& cache, const Target& target,
                        const LossSpec& spec);
/// Backprop from an arbitrary upstream gradient at the output (distillation,
/// inversion, contrastive heads).
GradientBundle backward_from_output_grad(const MlpModel& model, const ForwardCache& cache,
                                         const Matrix& doutput);

/// Central differences, (L(t+h)-L(t-h))/2h per parameter and input entry.
GradientBundle finite_diff_gradient(const MlpModel& model, const Matrix& x, const Target& target,
                                    const LossSpec& spec, double h);

struct SgdConfig {
  double lr = 0.01;
};

struct AdamConfig {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

using OptimizerSpec = std::variant<SgdConfig, AdamConfig>;

class Optimizer {
 public:
  explicit Optimizer(OptimizerSpec spec) : spec_(std::move(spec)) {}

  void step(MlpModel& model, const GradientBundle& grads);

 private:
  OptimizerSpec spec_;
  std::vector<LayerGrad> first_moment_;
  std::vector<LayerGrad> second_moment_;
  std::uint64_t step_count_ = 0;
};

struct TrainConfig {
  std::size_t epochs = 10;
  std::size_t batch_size = 32;
  LossSpec loss;
  OptimizerSpec optimizer = SgdConfig{0.1};
  std::uint64_t seed = 0;
  bool shuffle = true;
};

struct TrainReport {
  std::vector<double> epoch_losses;  // mean loss per epoch (row-weighted)
};

/// Applied to each batch gradient before the optimizer step (DP processing,
/// update poisoning).
using GradHook = std::function<void(GradientBundle&, Prng&)>;

struct Dataset;  // defined in dataset.hpp

/// Seeded minibatch training; mutates model in place. Throws on a non-finite
/// loss rather than continuing. epochs=0 is a no-op with an empty report.
TrainReport train(MlpModel& model, const Dataset& data, const TrainConfig& cfg,
                  const GradHook& hook = nullptr);
/// Same loop with an explicit dense target (autoencoders, regression).
TrainReport train_on_values(MlpModel& model, const Matrix& x, const Matrix& target,
                            const TrainConfig& cfg, const GradHook& hook = nullptr);

struct EvalMetrics {
  double accuracy = 0.0;
  double mean_loss = 0.0;
};

/// argmax accuracy (ties to the lowest class index) + mean CrossEntropy.
EvalMetrics evaluate(const MlpModel& model, const Dataset& data);

}  // namespace advml
