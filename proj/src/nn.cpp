#include "advml/nn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "advml/dataset.hpp"

namespace advml {

double activate(ActivationKind kind, double x) {
  switch (kind) {
    case ActivationKind::Relu:
      return x > 0.0 ? x : 0.0;
    case ActivationKind::Sigmoid:
      return 1.0 / (1.0 + std::exp(-x));
    case ActivationKind::Tanh:
      return std::tanh(x);
    case ActivationKind::Identity:
      return x;
  }
  return x;
}

double activate_derivative(ActivationKind kind, double z, double a) {
  switch (kind) {
    case ActivationKind::Relu:
      return z > 0.0 ? 1.0 : 0.0;
    case ActivationKind::Sigmoid:
      return a * (1.0 - a);
    case ActivationKind::Tanh:
      return 1.0 - a * a;
    case ActivationKind::Identity:
      return 1.0;
  }
  return 1.0;
}

MlpModel mlp_init(const std::vector<std::size_t>& layer_dims, ActivationKind activation,
                  Prng& rng) {
  if (layer_dims.size() < 2) throw std::invalid_argument("mlp_init: need at least two dims");
  for (std::size_t d : layer_dims)
    if (d == 0) throw std::invalid_argument("mlp_init: zero layer dim");

  MlpModel model;
  model.hidden_activation = activation;
  for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
    const std::size_t in = layer_dims[l];
    const std::size_t out = layer_dims[l + 1];
    DenseLayer layer{Matrix(out, in), Matrix(1, out, 0.0)};
    const double std = 1.0 / std::sqrt(static_cast<double>(in));
    for (double& v : layer.w.data()) v = rng.gaussian(0.0, std);
    model.layers.push_back(std::move(layer));
  }
  return model;
}

namespace {

ActivationKind layer_activation(const MlpModel& model, std::size_t layer_index) {
  return layer_index + 1 == model.layers.size() ? model.output_activation
                                                : model.hidden_activation;
}

}  // namespace

Matrix forward(const MlpModel& model, const Matrix& x, ForwardCache& cache) {
  if (model.layers.empty()) throw std::invalid_argument("forward: empty model");
  if (x.cols() != model.input_dim())
    throw std::invalid_argument("forward: input has " + std::to_string(x.cols()) +
                                " cols, model expects " + std::to_string(model.input_dim()));

  cache.input = x;
  cache.pre.clear();
  cache.post.clear();
  Matrix a = x;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    Matrix z = matmul(a, transpose(model.layers[l].w));
    add_row_inplace(z, model.layers[l].b);
    const ActivationKind act = layer_activation(model, l);
    Matrix out = z;
    if (act != ActivationKind::Identity)
      for (double& v : out.data()) v = activate(act, v);
    cache.pre.push_back(std::move(z));
    cache.post.push_back(out);
    a = std::move(out);
  }
  return cache.post.back();
}

Matrix forward(const MlpModel& model, const Matrix& x) {
  ForwardCache cache;
  return forward(model, x, cache);
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix out = logits;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    double mx = out(r, 0);
    for (std::size_t c = 1; c < out.cols(); ++c) mx = std::max(mx, out(r, c));
    double sum = 0.0;
    for (std::size_t c = 0; c < out.cols(); ++c) {
      out(r, c) = std::exp(out(r, c) - mx);
      sum += out(r, c);
    }
    for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) /= sum;
  }
  return out;
}

std::vector<int> argmax_rows(const Matrix& logits) {
  std::vector<int> out(logits.rows(), 0);
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < logits.cols(); ++c)
      if (logits(r, c) > logits(r, best)) best = c;
    out[r] = static_cast<int>(best);
  }
  return out;
}

namespace {

void check_labels(const Target& target, const Matrix& logits) {
  if (!target.has_labels)
    throw std::invalid_argument("loss: this loss kind needs class labels");
  if (target.labels.size() != logits.rows())
    throw std::invalid_argument("loss: label count does not match batch");
  for (int y : target.labels)
    if (y < 0 || static_cast<std::size_t>(y) >= logits.cols())
      throw std::invalid_argument("loss: label " + std::to_string(y) + " out of range");
}

/// Dense target matrix for the elementwise losses; labels become one-hot.
Matrix dense_target(const Target& target, const Matrix& logits) {
  if (target.has_labels) {
    check_labels(target, logits);
    Matrix t(logits.rows(), logits.cols(), 0.0);
    if (logits.cols() == 1) {
      for (std::size_t r = 0; r < t.rows(); ++r)
        t(r, 0) = static_cast<double>(target.labels[r]);
    } else {
      for (std::size_t r = 0; r < t.rows(); ++r)
        t(r, static_cast<std::size_t>(target.labels[r])) = 1.0;
    }
    return t;
  }
  if (!target.values.same_shape(logits))
    throw std::invalid_argument("loss: target matrix shape mismatch");
  return target.values;
}

double smooth_l1(double d, double beta) {
  const double ad = std::abs(d);
  return ad < beta ? 0.5 * d * d / beta : ad - 0.5 * beta;
}

}  // namespace

double loss_value(const LossSpec& spec, const Matrix& logits, const Target& target) {
  if (logits.empty()) throw std::invalid_argument("loss: empty batch");
  const double n_rows = static_cast<double>(logits.rows());
  const double n_entries = static_cast<double>(logits.size());

  switch (spec.kind) {
    case LossKind::CrossEntropy: {
      check_labels(target, logits);
      double total = 0.0;
      for (std::size_t r = 0; r < logits.rows(); ++r) {
        double mx = logits(r, 0);
        for (std::size_t c = 1; c < logits.cols(); ++c) mx = std::max(mx, logits(r, c));
        double sum = 0.0;
        for (std::size_t c = 0; c < logits.cols(); ++c) sum += std::exp(logits(r, c) - mx);
        const double lse = mx + std::log(sum);
        total += lse - logits(r, static_cast<std::size_t>(target.labels[r]));
      }
      return total / n_rows;
    }
    case LossKind::Mse: {
      const Matrix t = dense_target(target, logits);
      double total = 0.0;
      for (std::size_t i = 0; i < logits.size(); ++i) {
        const double d = logits.data()[i] - t.data()[i];
        total += d * d;
      }
      return total / n_entries;
    }
    case LossKind::SmoothL1: {
      if (spec.beta <= 0.0) throw std::invalid_argument("loss: SmoothL1 beta must be > 0");
      const Matrix t = dense_target(target, logits);
      double total = 0.0;
      for (std::size_t i = 0; i < logits.size(); ++i)
        total += smooth_l1(logits.data()[i] - t.data()[i], spec.beta);
      return total / n_entries;
    }
    case LossKind::MaeOneHot: {
      const Matrix t = dense_target(target, logits);
      double total = 0.0;
      for (std::size_t i = 0; i < logits.size(); ++i)
        total += std::abs(logits.data()[i] - t.data()[i]);
      return total / n_entries;
    }
    case LossKind::Bce: {
      const Matrix t = dense_target(target, logits);
      double total = 0.0;
      for (std::size_t i = 0; i < logits.size(); ++i) {
        const double z = logits.data()[i];
        const double y = t.data()[i];
        total += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
      }
      return total / n_entries;
    }
  }
  throw std::logic_error("loss_value: unknown kind");
}

Matrix loss_logit_grad(const LossSpec& spec, const Matrix& logits, const Target& target) {
  const double n_rows = static_cast<double>(logits.rows());
  const double n_entries = static_cast<double>(logits.size());
  Matrix grad(logits.rows(), logits.cols(), 0.0);

  switch (spec.kind) {
    case LossKind::CrossEntropy: {
      check_labels(target, logits);
      grad = softmax_rows(logits);
      for (std::size_t r = 0; r < grad.rows(); ++r)
        grad(r, static_cast<std::size_t>(target.labels[r])) -= 1.0;
      for (double& v : grad.data()) v /= n_rows;
      return grad;
    }
    case LossKind::Mse: {
      const Matrix t = dense_target(target, logits);
      for (std::size_t i = 0; i < grad.size(); ++i)
        grad.data()[i] = 2.0 * (logits.data()[i] - t.data()[i]) / n_entries;
      return grad;
    }
    case LossKind::SmoothL1: {
      const Matrix t = dense_target(target, logits);
      for (std::size_t i = 0; i < grad.size(); ++i) {
        const double d = logits.data()[i] - t.data()[i];
        const double g = std::abs(d) < spec.beta ? d / spec.beta : (d > 0 ? 1.0 : -1.0);
        grad.data()[i] = g / n_entries;
      }
      return grad;
    }
    case LossKind::MaeOneHot: {
      const Matrix t = dense_target(target, logits);
      for (std::size_t i = 0; i < grad.size(); ++i) {
        const double d = logits.data()[i] - t.data()[i];
        grad.data()[i] = (d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0)) / n_entries;
      }
      return grad;
    }
    case LossKind::Bce: {
      const Matrix t = dense_target(target, logits);
      for (std::size_t i = 0; i < grad.size(); ++i) {
        const double s = 1.0 / (1.0 + std::exp(-logits.data()[i]));
        grad.data()[i] = (s - t.data()[i]) / n_entries;
      }
      return grad;
    }
  }
  throw std::logic_error("loss_logit_grad: unknown kind");
}

GradientBundle backward_from_output_grad(const MlpModel& model, const ForwardCache& cache,
                                         const Matrix& doutput) {
  if (cache.pre.size() != model.layers.size())
    throw std::invalid_argument("backward: cache does not match model");
  if (!doutput.same_shape(cache.post.back()))
    throw std::invalid_argument("backward: output grad shape mismatch");

  GradientBundle grads;
  grads.params.resize(model.layers.size());

  Matrix delta = doutput;  // dLoss/d(post-activation) of the current layer
  for (std::size_t li = model.layers.size(); li-- > 0;) {
    const ActivationKind act = layer_activation(model, li);
    if (act != ActivationKind::Identity) {
      const Matrix& z = cache.pre[li];
      const Matrix& a = cache.post[li];
      for (std::size_t i = 0; i < delta.size(); ++i)
        delta.data()[i] *= activate_derivative(act, z.data()[i], a.data()[i]);
    }
    const Matrix& layer_input = li == 0 ? cache.input : cache.post[li - 1];
    grads.params[li].dw = matmul(transpose(delta), layer_input);
    Matrix db(1, delta.cols(), 0.0);
    for (std::size_t r = 0; r < delta.rows(); ++r)
      for (std::size_t c = 0; c < delta.cols(); ++c) db(0, c) += delta(r, c);
    grads.params[li].db = std::move(db);
    delta = matmul(delta, model.layers[li].w);
  }
  if (model.input_grad_masked)
    grads.input_grad = Matrix(cache.input.rows(), cache.input.cols(), 0.0);
  else
    grads.input_grad = std::move(delta);
  return grads;
}

GradientBundle backward(const MlpModel& model, const ForwardCache& cache, const Target& target,
                        const LossSpec& spec) {
  return backward_from_output_grad(model, cache,
                                   loss_logit_grad(spec, cache.post.back(), target));
}

GradientBundle finite_diff_gradient(const MlpModel& model, const Matrix& x, const Target& target,
                                    const LossSpec& spec, double h) {
  if (h <= 0.0) throw std::invalid_argument("finite_diff_gradient: h must be > 0");

  MlpModel probe = model;
  const auto loss_at = [&](const Matrix& input) {
    return loss_value(spec, forward(probe, input), target);
  };

  GradientBundle grads;
  grads.params.resize(model.layers.size());
  for (std::size_t li = 0; li < model.layers.size(); ++li) {
    grads.params[li].dw = Matrix(model.layers[li].w.rows(), model.layers[li].w.cols());
    grads.params[li].db = Matrix(1, model.layers[li].b.cols());
    for (std::size_t i = 0; i < probe.layers[li].w.size(); ++i) {
      double& theta = probe.layers[li].w.data()[i];
      const double saved = theta;
      theta = saved + h;
      const double up = loss_at(x);
      theta = saved - h;
      const double down = loss_at(x);
      theta = saved;
      grads.params[li].dw.data()[i] = (up - down) / (2.0 * h);
    }
    for (std::size_t i = 0; i < probe.layers[li].b.size(); ++i) {
      double& theta = probe.layers[li].b.data()[i];
      const double saved = theta;
      theta = saved + h;
      const double up = loss_at(x);
      theta = saved - h;
      const double down = loss_at(x);
      theta = saved;
      grads.params[li].db.data()[i] = (up - down) / (2.0 * h);
    }
  }

  grads.input_grad = Matrix(x.rows(), x.cols());
  Matrix probe_x = x;
  for (std::size_t i = 0; i < probe_x.size(); ++i) {
    const double saved = probe_x.data()[i];
    probe_x.data()[i] = saved + h;
    const double up = loss_at(probe_x);
    probe_x.data()[i] = saved - h;
    const double down = loss_at(probe_x);
    probe_x.data()[i] = saved;
    grads.input_grad.data()[i] = (up - down) / (2.0 * h);
  }
  return grads;
}

void Optimizer::step(MlpModel& model, const GradientBundle& grads) {
  if (grads.params.size() != model.layers.size())
    throw std::invalid_argument("optimizer: gradient/model layer count mismatch");
  for (std::size_t li = 0; li < model.layers.size(); ++li) {
    if (!grads.params[li].dw.same_shape(model.layers[li].w) ||
        !grads.params[li].db.same_shape(model.layers[li].b))
      throw std::invalid_argument("optimizer: gradient shape mismatch");
  }

  if (const auto* sgd = std::get_if<SgdConfig>(&spec_)) {
    for (std::size_t li = 0; li < model.layers.size(); ++li) {
      auto& layer = model.layers[li];
      for (std::size_t i = 0; i < layer.w.size(); ++i)
        layer.w.data()[i] -= sgd->lr * grads.params[li].dw.data()[i];
      for (std::size_t i = 0; i < layer.b.size(); ++i)
        layer.b.data()[i] -= sgd->lr * grads.params[li].db.data()[i];
    }
    return;
  }

  const auto& adam = std::get<AdamConfig>(spec_);
  if (first_moment_.empty()) {
    first_moment_.resize(model.layers.size());
    second_moment_.resize(model.layers.size());
    for (std::size_t li = 0; li < model.layers.size(); ++li) {
      first_moment_[li].dw = Matrix(model.layers[li].w.rows(), model.layers[li].w.cols());
      first_moment_[li].db = Matrix(1, model.layers[li].b.cols());
      second_moment_[li].dw = first_moment_[li].dw;
      second_moment_[li].db = first_moment_[li].db;
    }
  }
  ++step_count_;
  const double bc1 = 1.0 - std::pow(adam.beta1, static_cast<double>(step_count_));
  const double bc2 = 1.0 - std::pow(adam.beta2, static_cast<double>(step_count_));

  const auto update = [&](Matrix& theta, Matrix& m, Matrix& v, const Matrix& g) {
    for (std::size_t i = 0; i < theta.size(); ++i) {
      m.data()[i] = adam.beta1 * m.data()[i] + (1.0 - adam.beta1) * g.data()[i];
      v.data()[i] = adam.beta2 * v.data()[i] + (1.0 - adam.beta2) * g.data()[i] * g.data()[i];
      const double m_hat = m.data()[i] / bc1;
      const double v_hat = v.data()[i] / bc2;
      theta.data()[i] -= adam.lr * m_hat / (std::sqrt(v_hat) + adam.eps);
    }
  };
  for (std::size_t li = 0; li < model.layers.size(); ++li) {
    update(model.layers[li].w, first_moment_[li].dw, second_moment_[li].dw, grads.params[li].dw);
    update(model.layers[li].b, first_moment_[li].db, second_moment_[li].db, grads.params[li].db);
  }
}

namespace {

Target batch_target(const Dataset& data, const std::vector<std::size_t>& batch) {
  std::vector<int> labels(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) labels[i] = data.labels[batch[i]];
  return Target::from_labels(std::move(labels));
}

TrainReport train_loop(MlpModel& model, const Matrix& x,
                       const std::function<Target(const std::vector<std::size_t>&)>& target_for,
                       const TrainConfig& cfg, const GradHook& hook) {
  if (x.rows() == 0) throw std::invalid_argument("train: empty dataset");
  if (cfg.batch_size == 0) throw std::invalid_argument("train: batch_size must be >= 1");

  TrainReport report;
  Optimizer opt(cfg.optimizer);
  Prng rng = Prng(cfg.seed).child("train");
  Prng hook_rng = Prng(cfg.seed).child("grad-hook");

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    double loss_sum = 0.0;
    for (const auto& batch : minibatches(x.rows(), cfg.batch_size, cfg.shuffle, rng)) {
      const Matrix bx = take_rows(x, batch);
      const Target bt = target_for(batch);
      ForwardCache cache;
      forward(model, bx, cache);
      const double loss = loss_value(cfg.loss, cache.post.back(), bt);
      if (!std::isfinite(loss))
        throw std::runtime_error("train: non-finite loss at epoch " + std::to_string(epoch) +
                                 " (diverged; lower the learning rate or check the data)");
      loss_sum += loss * static_cast<double>(batch.size());
      GradientBundle grads = backward(model, cache, bt, cfg.loss);
      if (hook) hook(grads, hook_rng);
      opt.step(model, grads);
    }
    report.epoch_losses.push_back(loss_sum / static_cast<double>(x.rows()));
  }
  return report;
}

}  // namespace

TrainReport train(MlpModel& model, const Dataset& data, const TrainConfig& cfg,
                  const GradHook& hook) {
  if (data.size() == 0) throw std::invalid_argument("train: empty dataset");
  if (data.dim() != model.input_dim())
    throw std::invalid_argument("train: dataset dim does not match model input");
  return train_loop(
      model, data.features,
      [&](const std::vector<std::size_t>& batch) { return batch_target(data, batch); },
      cfg, hook);
}

TrainReport train_on_values(MlpModel& model, const Matrix& x, const Matrix& target,
                            const TrainConfig& cfg, const GradHook& hook) {
  if (x.rows() != target.rows())
    throw std::invalid_argument("train_on_values: target rows do not match input");
  return train_loop(
      model, x,
      [&](const std::vector<std::size_t>& batch) {
        return Target::from_values(take_rows(target, batch));
      },
      cfg, hook);
}

EvalMetrics evaluate(const MlpModel& model, const Dataset& data) {
  if (data.size() == 0) throw std::invalid_argument("evaluate: empty dataset");
  const Matrix logits = forward(model, data.features);
  const std::vector<int> pred = argmax_rows(logits);
  std::size_t correct = 0;
  for (std::size_t r = 0; r < data.size(); ++r)
    if (pred[r] == data.labels[r]) ++correct;
  EvalMetrics out;
  out.accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
  out.mean_loss = loss_value(LossSpec{LossKind::CrossEntropy}, logits,
                             Target::from_labels(data.labels));
  return out;
}

}  // namespace advml
