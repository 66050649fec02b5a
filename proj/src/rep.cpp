#include "advml/rep.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "advml/theft.hpp"

namespace advml {

double distillation_loss(const Matrix& student_logits, const Matrix& teacher_logits,
                         double temperature) {
  if (!student_logits.same_shape(teacher_logits))
    throw std::invalid_argument("distillation_loss: logit shapes differ");
  if (temperature <= 0.0) throw std::invalid_argument("distillation_loss: temperature must be > 0");

  const Matrix p = softmax_rows((1.0 / temperature) * teacher_logits);
  const Matrix q = softmax_rows((1.0 / temperature) * student_logits);
  double total = 0.0;
  for (std::size_t r = 0; r < p.rows(); ++r)
    for (std::size_t c = 0; c < p.cols(); ++c)
      if (p(r, c) > 0.0) total += p(r, c) * (std::log(p(r, c)) - std::log(q(r, c)));
  return total / static_cast<double>(p.rows());
}

DistillReport distill_train(const MlpModel& teacher, MlpModel& student, const Dataset& data,
                            const TrainConfig& cfg, double temperature) {
  if (teacher.output_dim() != student.output_dim())
    throw std::invalid_argument("distill_train: teacher/student output dims differ");

  DistillReport report;
  Optimizer opt(cfg.optimizer);
  Prng rng = Prng(cfg.seed).child("distill");
  const Matrix teacher_logits = forward(teacher, data.features);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    double loss_sum = 0.0;
    for (const auto& batch : minibatches(data.size(), cfg.batch_size, cfg.shuffle, rng)) {
      const Matrix bx = take_rows(data.features, batch);
      const Matrix bt = take_rows(teacher_logits, batch);

      ForwardCache cache;
      const Matrix logits = forward(student, bx, cache);
      const double loss = distillation_loss(logits, bt, temperature);
      if (!std::isfinite(loss)) throw std::runtime_error("distill_train: non-finite loss");
      loss_sum += loss * static_cast<double>(batch.size());

      // dKL/dstudent_logit = (softmax(s/T) - softmax(t/T)) / (T * batch)
      const Matrix q = softmax_rows((1.0 / temperature) * logits);
      const Matrix p = softmax_rows((1.0 / temperature) * bt);
      Matrix dout = q - p;
      const double scale = 1.0 / (temperature * static_cast<double>(batch.size()));
      for (double& v : dout.data()) v *= scale;
      opt.step(student, backward_from_output_grad(student, cache, dout));
    }
    report.epoch_losses.push_back(loss_sum / static_cast<double>(data.size()));
  }
  report.agreement = agreement_rate(local_oracle(student), local_oracle(teacher), data.features);
  return report;
}

double contrastive_loss(const Matrix& z1, const Matrix& z2, const std::vector<int>& pair_labels,
                        double margin) {
  if (!z1.same_shape(z2)) throw std::invalid_argument("contrastive_loss: embedding shapes differ");
  if (pair_labels.size() != z1.rows())
    throw std::invalid_argument("contrastive_loss: label count mismatch");
  if (margin <= 0.0) throw std::invalid_argument("contrastive_loss: margin must be > 0");

  double total = 0.0;
  for (std::size_t r = 0; r < z1.rows(); ++r) {
    double d2 = 0.0;
    for (std::size_t c = 0; c < z1.cols(); ++c) {
      const double dv = z1(r, c) - z2(r, c);
      d2 += dv * dv;
    }
    const double d = std::sqrt(d2);
    if (pair_labels[r] == 0) {
      total += d2;
    } else {
      const double gap = std::max(margin - d, 0.0);
      total += gap * gap;
    }
  }
  return total / static_cast<double>(z1.rows());
}

PairSet build_contrastive_pairs(const Dataset& data) {
  if (data.num_classes < 2) throw std::invalid_argument("build_contrastive_pairs: need >= 2 classes");
  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(data.num_classes));
  for (std::size_t i = 0; i < data.size(); ++i)
    by_class[static_cast<std::size_t>(data.labels[i])].push_back(i);
  for (std::size_t c = 0; c < by_class.size(); ++c)
    if (by_class[c].size() < 2)
      throw std::invalid_argument("build_contrastive_pairs: class " + std::to_string(c) +
                                  " has fewer than 2 rows");

  std::vector<std::pair<std::size_t, std::size_t>> positives;
  for (const auto& members : by_class)
    for (std::size_t i = 0; i + 1 < members.size(); i += 2)
      positives.emplace_back(members[i], members[i + 1]);

  // negatives: i-th row of class c against i-th row of the next class, cycling
  std::vector<std::pair<std::size_t, std::size_t>> negatives;
  for (std::size_t c = 0; c < by_class.size() && negatives.size() < positives.size(); ++c) {
    const auto& cur = by_class[c];
    const auto& nxt = by_class[(c + 1) % by_class.size()];
    for (std::size_t i = 0; i < std::min(cur.size(), nxt.size()); ++i) {
      negatives.emplace_back(cur[i], nxt[i]);
      if (negatives.size() == positives.size()) break;
    }
  }
  const std::size_t n = std::min(positives.size(), negatives.size());

  PairSet pairs;
  pairs.a = Matrix(2 * n, data.dim());
  pairs.b = Matrix(2 * n, data.dim());
  for (std::size_t i = 0; i < n; ++i) {
    pairs.a.set_row(2 * i, data.features.row(positives[i].first));
    pairs.b.set_row(2 * i, data.features.row(positives[i].second));
    pairs.labels.push_back(0);
    pairs.a.set_row(2 * i + 1, data.features.row(negatives[i].first));
    pairs.b.set_row(2 * i + 1, data.features.row(negatives[i].second));
    pairs.labels.push_back(1);
  }
  return pairs;
}

TrainReport contrastive_train(MlpModel& encoder, const Dataset& data, const TrainConfig& cfg,
                              double margin) {
  const PairSet pairs = build_contrastive_pairs(data);
  TrainReport report;
  Optimizer opt(cfg.optimizer);
  Prng rng = Prng(cfg.seed).child("contrastive");

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    double loss_sum = 0.0;
    for (const auto& batch : minibatches(pairs.labels.size(), cfg.batch_size, cfg.shuffle, rng)) {
      const Matrix xa = take_rows(pairs.a, batch);
      const Matrix xb = take_rows(pairs.b, batch);
      std::vector<int> labels(batch.size());
      for (std::size_t i = 0; i < batch.size(); ++i) labels[i] = pairs.labels[batch[i]];

      ForwardCache cache_a, cache_b;
      const Matrix za = forward(encoder, xa, cache_a);
      const Matrix zb = forward(encoder, xb, cache_b);
      const double loss = contrastive_loss(za, zb, labels, margin);
      if (!std::isfinite(loss)) throw std::runtime_error("contrastive_train: non-finite loss");
      loss_sum += loss * static_cast<double>(batch.size());

      Matrix da(za.rows(), za.cols(), 0.0);
      const double inv_n = 1.0 / static_cast<double>(batch.size());
      for (std::size_t r = 0; r < za.rows(); ++r) {
        double d2 = 0.0;
        for (std::size_t c = 0; c < za.cols(); ++c) {
          const double dv = za(r, c) - zb(r, c);
          d2 += dv * dv;
        }
        const double d = std::sqrt(d2);
        if (labels[r] == 0) {
          for (std::size_t c = 0; c < za.cols(); ++c)
            da(r, c) = 2.0 * (za(r, c) - zb(r, c)) * inv_n;
        } else if (d > 0.0 && d < margin) {
          const double coeff = -2.0 * (margin - d) / d * inv_n;
          for (std::size_t c = 0; c < za.cols(); ++c) da(r, c) = coeff * (za(r, c) - zb(r, c));
        }
        // d == 0 on a dissimilar pair: flat subgradient, leave zero
      }
      Matrix db = -1.0 * da;
      GradientBundle g = backward_from_output_grad(encoder, cache_a, da);
      const GradientBundle gb = backward_from_output_grad(encoder, cache_b, db);
      for (std::size_t li = 0; li < g.params.size(); ++li) {
        g.params[li].dw = g.params[li].dw + gb.params[li].dw;
        g.params[li].db = g.params[li].db + gb.params[li].db;
      }
      opt.step(encoder, g);
    }
    report.epoch_losses.push_back(loss_sum / static_cast<double>(pairs.labels.size()));
  }
  return report;
}

std::pair<double, double> embedding_class_distances(const MlpModel& encoder, const Dataset& data) {
  const Matrix z = forward(encoder, data.features);
  double intra = 0.0, inter = 0.0;
  std::size_t n_intra = 0, n_inter = 0;
  for (std::size_t i = 0; i < z.rows(); ++i)
    for (std::size_t j = i + 1; j < z.rows(); ++j) {
      double d2 = 0.0;
      for (std::size_t c = 0; c < z.cols(); ++c) {
        const double dv = z(i, c) - z(j, c);
        d2 += dv * dv;
      }
      const double d = std::sqrt(d2);
      if (data.labels[i] == data.labels[j]) {
        intra += d;
        ++n_intra;
      } else {
        inter += d;
        ++n_inter;
      }
    }
  return {n_intra ? intra / static_cast<double>(n_intra) : 0.0,
          n_inter ? inter / static_cast<double>(n_inter) : 0.0};
}

Matrix rotate90(const Matrix& image_row, const GridShape& grid, int k) {
  if (image_row.rows() != 1 || image_row.cols() != grid.height * grid.width)
    throw std::invalid_argument("rotate90: row does not match grid shape");
  k = ((k % 4) + 4) % 4;
  if (k % 2 == 1 && grid.height != grid.width)
    throw std::invalid_argument("rotate90: odd quarter turns need a square grid");

  Matrix out = image_row;
  std::size_t h = grid.height;
  std::size_t w = grid.width;
  for (int turn = 0; turn < k; ++turn) {
    Matrix next(1, out.cols());
    // pixel (r,c) moves to (c, h-1-r) in the rotated image of shape (w, h)
    for (std::size_t r = 0; r < h; ++r)
      for (std::size_t c = 0; c < w; ++c)
        next(0, c * h + (h - 1 - r)) = out(0, r * w + c);
    out = std::move(next);
    std::swap(h, w);
  }
  return out;
}

RotationPretextResult rotation_pretext_train(const std::vector<std::size_t>& encoder_dims,
                                             ActivationKind activation, const Dataset& data,
                                             const TrainConfig& cfg, Prng& rng) {
  if (!data.grid) throw std::invalid_argument("rotation_pretext_train: dataset has no grid");
  if (data.grid->height != data.grid->width)
    throw std::invalid_argument("rotation_pretext_train: grid must be square");

  // balanced rotation labels: a shuffled order dealt 0,1,2,3,0,...
  const std::vector<std::size_t> order = rng.child("rotation-assign").permutation(data.size());
  Dataset pretext;
  pretext.features = Matrix(data.size(), data.dim());
  pretext.labels.resize(data.size());
  pretext.num_classes = 4;
  pretext.grid = data.grid;
  pretext.flags.assign(data.size(), RowFlag::Clean);
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    const std::size_t i = order[pos];
    const int rot = static_cast<int>(pos % 4);
    pretext.features.set_row(i, rotate90(data.features.row(i), *data.grid, rot));
    pretext.labels[i] = rot;
  }

  Prng split_rng = rng.child("rotation-split");
  auto [train_set, test_set] = train_test_split(pretext, 0.25, split_rng);

  std::vector<std::size_t> dims = encoder_dims;
  dims.push_back(4);
  Prng init_rng = rng.child("rotation-init");
  RotationPretextResult result{mlp_init(dims, activation, init_rng), 0.0};
  train(result.model, train_set, cfg);
  result.heldout_accuracy = evaluate(result.model, test_set).accuracy;
  return result;
}

MlpModel autoencoder_init(std::size_t input_dim, std::size_t hidden, std::size_t bottleneck,
                          Prng& rng) {
  if (bottleneck >= input_dim)
    throw std::invalid_argument("autoencoder_init: bottleneck must be smaller than the input");
  MlpModel model = mlp_init({input_dim, hidden, bottleneck, hidden, input_dim},
                            ActivationKind::Relu, rng);
  model.output_activation = ActivationKind::Sigmoid;
  return model;
}

TrainReport autoencoder_train(MlpModel& model, const Dataset& data, const TrainConfig& cfg) {
  TrainConfig ae_cfg = cfg;
  ae_cfg.loss = LossSpec{LossKind::Mse};
  return train_on_values(model, data.features, data.features, ae_cfg);
}

std::vector<double> reconstruction_scores(const MlpModel& model, const Matrix& x) {
  const Matrix recon = forward(model, x);
  std::vector<double> scores(x.rows(), 0.0);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t c = 0; c < x.cols(); ++c) {
      const double d = recon(r, c) - x(r, c);
      scores[r] += d * d;
    }
    scores[r] /= static_cast<double>(x.cols());
  }
  return scores;
}

std::vector<bool> reconstruction_flags(const std::vector<double>& scores, double threshold) {
  std::vector<bool> flags(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) flags[i] = scores[i] > threshold;
  return flags;
}

}  // namespace advml
