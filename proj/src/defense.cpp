#include "advml/defense.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "advml/evasion.hpp"

namespace advml {

void score_against_flags(AuditReport& report, const Dataset& data) {
  std::size_t poisoned_total = 0;
  for (RowFlag f : data.flags)
    if (f != RowFlag::Clean) ++poisoned_total;
  report.has_provenance = poisoned_total > 0;

  std::size_t true_hits = 0;
  for (std::size_t i : report.suspects)
    if (data.flags[i] != RowFlag::Clean) ++true_hits;
  if (!report.suspects.empty())
    report.precision = static_cast<double>(true_hits) / static_cast<double>(report.suspects.size());
  if (poisoned_total > 0)
    report.recall = static_cast<double>(true_hits) / static_cast<double>(poisoned_total);
}

AdvTrainEpochReport adversarial_train_epoch(MlpModel& model, Optimizer& opt, const Dataset& data,
                                            double eps, std::size_t batch_size, bool shuffle,
                                            Prng& rng) {
  if (eps < 0.0) throw std::invalid_argument("adversarial_train_epoch: eps must be >= 0");
  const LossSpec ce{LossKind::CrossEntropy};
  AdvTrainEpochReport report;
  double n = 0.0;
  for (const auto& batch : minibatches(data.size(), batch_size, shuffle, rng)) {
    const Matrix bx = take_rows(data.features, batch);
    std::vector<int> by(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) by[i] = data.labels[batch[i]];
    const Target bt = Target::from_labels(by);

    ForwardCache cache;
    forward(model, bx, cache);
    const double clean_loss = loss_value(ce, cache.post.back(), bt);
    opt.step(model, backward(model, cache, bt, ce));

    const Matrix adv = fgsm(model, bx, by, eps);
    ForwardCache adv_cache;
    forward(model, adv, adv_cache);
    const double adv_loss = loss_value(ce, adv_cache.post.back(), bt);
    opt.step(model, backward(model, adv_cache, bt, ce));

    if (!std::isfinite(clean_loss) || !std::isfinite(adv_loss))
      throw std::runtime_error("adversarial_train_epoch: non-finite loss");
    report.clean_loss += clean_loss * static_cast<double>(batch.size());
    report.adv_loss += adv_loss * static_cast<double>(batch.size());
    n += static_cast<double>(batch.size());
  }
  report.clean_loss /= n;
  report.adv_loss /= n;
  return report;
}

AdvTrainReport adversarial_train(MlpModel& model, const Dataset& data, double eps,
                                 const TrainConfig& cfg) {
  Optimizer opt(cfg.optimizer);
  Prng rng = Prng(cfg.seed).child("adv-train");
  AdvTrainReport report;
  for (std::size_t e = 0; e < cfg.epochs; ++e)
    report.epochs.push_back(
        adversarial_train_epoch(model, opt, data, eps, cfg.batch_size, cfg.shuffle, rng));
  return report;
}

Matrix noise_augment(const Matrix& x, double noise_factor, Prng& rng) {
  if (noise_factor < 0.0) throw std::invalid_argument("noise_augment: factor must be >= 0");
  Matrix out = x;
  if (noise_factor > 0.0)
    for (double& v : out.data()) v = std::clamp(v + rng.gaussian(0.0, noise_factor), 0.0, 1.0);
  return out;
}

MlpModel mask_input_gradient(MlpModel model) {
  model.input_grad_masked = true;
  return model;
}

std::pair<Dataset, AuditReport> sanitize_outliers(const Dataset& data, const SanitizeMode& mode) {
  if (mode.threshold <= 0.0) throw std::invalid_argument("sanitize_outliers: threshold must be > 0");
  AuditReport report;
  std::vector<std::size_t> kept;

  if (mode.kind == SanitizeMode::Kind::StdK) {
    const std::size_t d = data.dim();
    std::vector<double> mean(d, 0.0), std(d, 0.0);
    for (std::size_t r = 0; r < data.size(); ++r)
      for (std::size_t c = 0; c < d; ++c) mean[c] += data.features(r, c);
    for (double& m : mean) m /= static_cast<double>(data.size());
    for (std::size_t r = 0; r < data.size(); ++r)
      for (std::size_t c = 0; c < d; ++c) {
        const double dev = data.features(r, c) - mean[c];
        std[c] += dev * dev;
      }
    for (double& s : std) s = std::sqrt(s / static_cast<double>(data.size()));  // population std

    for (std::size_t r = 0; r < data.size(); ++r) {
      std::size_t hits = 0;
      for (std::size_t c = 0; c < d; ++c)
        if (std::abs(data.features(r, c) - mean[c]) > mode.threshold * std[c]) ++hits;
      if (hits > 0) {
        report.suspects.push_back(r);
        report.evidence.push_back(hits);
      } else {
        kept.push_back(r);
      }
    }
  } else {
    std::vector<std::vector<double>> centers(static_cast<std::size_t>(data.num_classes),
                                             std::vector<double>(data.dim(), 0.0));
    std::vector<std::size_t> counts(static_cast<std::size_t>(data.num_classes), 0);
    for (std::size_t r = 0; r < data.size(); ++r) {
      const auto cls = static_cast<std::size_t>(data.labels[r]);
      ++counts[cls];
      for (std::size_t c = 0; c < data.dim(); ++c) centers[cls][c] += data.features(r, c);
    }
    for (std::size_t cls = 0; cls < centers.size(); ++cls) {
      if (counts[cls] == 0)
        throw std::invalid_argument("sanitize_outliers: class " + std::to_string(cls) + " is empty");
      for (double& v : centers[cls]) v /= static_cast<double>(counts[cls]);
    }
    for (std::size_t r = 0; r < data.size(); ++r) {
      const auto& center = centers[static_cast<std::size_t>(data.labels[r])];
      double dist2 = 0.0;
      for (std::size_t c = 0; c < data.dim(); ++c) {
        const double dev = data.features(r, c) - center[c];
        dist2 += dev * dev;
      }
      if (std::sqrt(dist2) > mode.threshold) {
        report.suspects.push_back(r);
        report.evidence.push_back(1);
      } else {
        kept.push_back(r);
      }
    }
  }

  score_against_flags(report, data);
  return {take(data, kept), report};
}

GradientBundle dp_clip_noise(GradientBundle grads, const DpConfig& dp, Prng& rng) {
  if (dp.clip_norm <= 0.0) throw std::invalid_argument("dp_clip_noise: clip_norm must be > 0");
  if (dp.noise_std < 0.0) throw std::invalid_argument("dp_clip_noise: noise_std must be >= 0");

  double norm2 = 0.0;
  for (const LayerGrad& layer : grads.params) {
    for (const Matrix* m : {&layer.dw, &layer.db})
      for (double v : m->data()) norm2 += v * v;
  }
  const double norm = std::sqrt(norm2);
  const double scale = norm > dp.clip_norm ? dp.clip_norm / norm : 1.0;

  for (LayerGrad& layer : grads.params) {
    for (Matrix* m : {&layer.dw, &layer.db})
      for (double& v : m->data()) {
        v *= scale;
        if (dp.noise_std > 0.0) v += rng.gaussian(0.0, dp.noise_std);
      }
  }
  return grads;
}

Matrix gaussian_blur(const Matrix& image_row, const GridShape& grid, std::size_t kernel_size,
                     double sigma) {
  if (kernel_size % 2 == 0) throw std::invalid_argument("gaussian_blur: kernel must be odd");
  if (kernel_size > std::min(grid.height, grid.width))
    throw std::invalid_argument("gaussian_blur: kernel larger than grid");
  if (sigma <= 0.0) throw std::invalid_argument("gaussian_blur: sigma must be > 0");
  if (image_row.rows() != 1 || image_row.cols() != grid.height * grid.width)
    throw std::invalid_argument("gaussian_blur: row does not match grid shape");

  std::vector<double> kernel(kernel_size);
  const std::ptrdiff_t half = static_cast<std::ptrdiff_t>(kernel_size / 2);
  double sum = 0.0;
  for (std::ptrdiff_t i = -half; i <= half; ++i) {
    kernel[static_cast<std::size_t>(i + half)] =
        std::exp(-static_cast<double>(i * i) / (2.0 * sigma * sigma));
    sum += kernel[static_cast<std::size_t>(i + half)];
  }
  for (double& k : kernel) k /= sum;

  const auto reflect = [](std::ptrdiff_t i, std::ptrdiff_t n) {
    if (i < 0) return -i - 1;
    if (i >= n) return 2 * n - 1 - i;
    return i;
  };
  const auto h = static_cast<std::ptrdiff_t>(grid.height);
  const auto w = static_cast<std::ptrdiff_t>(grid.width);

  // horizontal pass then vertical pass
  Matrix tmp(1, image_row.cols(), 0.0);
  for (std::ptrdiff_t r = 0; r < h; ++r)
    for (std::ptrdiff_t c = 0; c < w; ++c) {
      double acc = 0.0;
      for (std::ptrdiff_t i = -half; i <= half; ++i)
        acc += kernel[static_cast<std::size_t>(i + half)] *
               image_row(0, static_cast<std::size_t>(r * w + reflect(c + i, w)));
      tmp(0, static_cast<std::size_t>(r * w + c)) = acc;
    }
  Matrix out(1, image_row.cols(), 0.0);
  for (std::ptrdiff_t r = 0; r < h; ++r)
    for (std::ptrdiff_t c = 0; c < w; ++c) {
      double acc = 0.0;
      for (std::ptrdiff_t i = -half; i <= half; ++i)
        acc += kernel[static_cast<std::size_t>(i + half)] *
               tmp(0, static_cast<std::size_t>(reflect(r + i, h) * w + c));
      out(0, static_cast<std::size_t>(r * w + c)) = acc;
    }
  return out;
}

double activation_score(const MlpModel& model, const Matrix& row) {
  if (model.layers.size() < 2)
    throw std::invalid_argument("activation_score: model has no hidden layer");
  ForwardCache cache;
  forward(model, row, cache);
  const Matrix& hidden = cache.post.front();
  double sum = 0.0;
  for (double v : hidden.data()) sum += v;
  return sum / static_cast<double>(hidden.size());
}

namespace {

std::vector<double> activation_scores(const MlpModel& model, const Matrix& x) {
  if (model.layers.size() < 2)
    throw std::invalid_argument("activation_anomaly: model has no hidden layer");
  ForwardCache cache;
  forward(model, x, cache);
  const Matrix& hidden = cache.post.front();
  std::vector<double> scores(x.rows(), 0.0);
  for (std::size_t r = 0; r < hidden.rows(); ++r) {
    for (std::size_t c = 0; c < hidden.cols(); ++c) scores[r] += hidden(r, c);
    scores[r] /= static_cast<double>(hidden.cols());
  }
  return scores;
}

}  // namespace

double activation_anomaly_threshold(const MlpModel& model, const Dataset& reference,
                                    double percentile) {
  if (reference.size() == 0)
    throw std::invalid_argument("activation_anomaly_threshold: empty reference");
  std::vector<double> scores = activation_scores(model, reference.features);
  std::sort(scores.begin(), scores.end());
  // linear-interpolation percentile
  const double rank = percentile / 100.0 * static_cast<double>(scores.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const auto hi = static_cast<std::size_t>(std::ceil(rank));
  const double frac = rank - std::floor(rank);
  return scores[lo] + frac * (scores[hi] - scores[lo]);
}

std::vector<bool> activation_anomaly_flags(const MlpModel& model, const Matrix& x,
                                           double threshold) {
  const std::vector<double> scores = activation_scores(model, x);
  std::vector<bool> flags(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) flags[i] = scores[i] > threshold;
  return flags;
}

AuditReport crossval_label_audit(const Dataset& data, const CrossvalAuditConfig& cfg, Prng& rng) {
  if (cfg.folds < 2) throw std::invalid_argument("crossval_label_audit: folds must be >= 2");
  if (!cfg.model_factory) throw std::invalid_argument("crossval_label_audit: no model factory");
  {
    std::vector<std::size_t> class_counts(static_cast<std::size_t>(data.num_classes), 0);
    for (int y : data.labels) ++class_counts[static_cast<std::size_t>(y)];
    for (std::size_t c = 0; c < class_counts.size(); ++c)
      if (class_counts[c] < cfg.folds)
        throw std::invalid_argument("crossval_label_audit: class " + std::to_string(c) +
                                    " smaller than fold count");
  }

  std::vector<std::size_t> miss_counts(data.size(), 0);
  for (std::size_t rep = 0; rep < cfg.repeats; ++rep) {
    Prng round_rng = rng.child("audit-round", rep);
    // stratified fold assignment: per class, shuffled then dealt round-robin
    std::vector<std::size_t> fold_of(data.size(), 0);
    std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(data.num_classes));
    for (std::size_t i = 0; i < data.size(); ++i)
      by_class[static_cast<std::size_t>(data.labels[i])].push_back(i);
    for (auto& members : by_class) {
      round_rng.shuffle(members);
      for (std::size_t i = 0; i < members.size(); ++i) fold_of[members[i]] = i % cfg.folds;
    }

    for (std::size_t fold = 0; fold < cfg.folds; ++fold) {
      std::vector<std::size_t> train_idx, held_idx;
      for (std::size_t i = 0; i < data.size(); ++i)
        (fold_of[i] == fold ? held_idx : train_idx).push_back(i);

      MlpModel model = cfg.model_factory(round_rng.next_u64());
      TrainConfig fold_cfg = cfg.train;
      fold_cfg.seed = round_rng.next_u64();
      train(model, take(data, train_idx), fold_cfg);

      const Matrix held_x = take_rows(data.features, held_idx);
      const std::vector<int> pred = argmax_rows(forward(model, held_x));
      for (std::size_t i = 0; i < held_idx.size(); ++i)
        if (pred[i] != data.labels[held_idx[i]]) ++miss_counts[held_idx[i]];
    }
  }

  AuditReport report;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (miss_counts[i] >= cfg.flag_threshold) {
      report.suspects.push_back(i);
      report.evidence.push_back(miss_counts[i]);
    }
  }
  score_against_flags(report, data);
  return report;
}

std::pair<Dataset, AuditReport> consensus_disagreement_filter(const Dataset& data,
                                                              const MlpModel& model_a,
                                                              const MlpModel& model_b) {
  const std::vector<int> pa = argmax_rows(forward(model_a, data.features));
  const std::vector<int> pb = argmax_rows(forward(model_b, data.features));
  AuditReport report;
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (pa[i] != pb[i]) {
      report.suspects.push_back(i);
      report.evidence.push_back(1);
    } else {
      kept.push_back(i);
    }
  }
  score_against_flags(report, data);
  return {take(data, kept), report};
}

Dataset pseudo_label_relabel(const MlpModel& model, const Dataset& data,
                             const std::vector<std::size_t>& rows) {
  Dataset out = data;
  for (std::size_t i : rows) {
    if (i >= data.size()) throw std::invalid_argument("pseudo_label_relabel: index out of range");
    out.labels[i] = argmax_rows(forward(model, data.features.row(i)))[0];
  }
  return out;
}

}  // namespace advml
