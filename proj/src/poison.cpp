#include "advml/poison.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace advml {

namespace {

/// Exactly floor(fraction*N) distinct indices, uniform, in ascending order.
std::vector<std::size_t> select_exact(std::size_t n, double fraction, Prng& rng) {
  if (fraction < 0.0 || fraction > 1.0)
    throw std::invalid_argument("poison: fraction must be in [0,1]");
  const std::size_t count =
      static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n)));
  std::vector<std::size_t> order = rng.permutation(n);
  order.resize(count);
  std::sort(order.begin(), order.end());
  return order;
}

}  // namespace

Dataset flip_labels(const Dataset& data, double fraction, const FlipRule& rule, Prng& rng) {
  if (rule.kind == FlipRule::Kind::BinarySwap && data.num_classes != 2)
    throw std::invalid_argument("flip_labels: binary_swap needs a binary dataset");
  if (rule.kind == FlipRule::Kind::Pair &&
      (rule.a < 0 || rule.b < 0 || rule.a >= data.num_classes || rule.b >= data.num_classes))
    throw std::invalid_argument("flip_labels: pair labels out of range");

  Dataset out = data;
  for (std::size_t i : select_exact(data.size(), fraction, rng)) {
    const int y = out.labels[i];
    int flipped = y;
    if (rule.kind == FlipRule::Kind::BinarySwap) {
      flipped = 1 - y;
    } else if (y == rule.a) {
      flipped = rule.b;
    } else if (y == rule.b) {
      flipped = rule.a;
    }
    if (flipped != y) {
      out.labels[i] = flipped;
      out.flags[i] = RowFlag::Flipped;
    }
  }
  return out;
}

Dataset noise_flip_inject(const Dataset& data, std::size_t count, double noise_scale, Prng& rng) {
  if (count > data.size()) throw std::invalid_argument("noise_flip_inject: count exceeds dataset");
  Dataset out = data;
  for (std::size_t i = 0; i < count; ++i) {
    for (std::size_t c = 0; c < out.dim(); ++c)
      out.features(i, c) = std::clamp(out.features(i, c) + rng.uniform() * noise_scale, 0.0, 1.0);
    out.labels[i] = data.num_classes == 2 ? 1 - out.labels[i]
                                          : (out.labels[i] + 1) % data.num_classes;
    out.flags[i] = RowFlag::NoisePoisoned;
  }
  return out;
}

Matrix stamp_trigger(const Matrix& image_row, const GridShape& grid, const Trigger& trigger) {
  if (image_row.rows() != 1 || image_row.cols() != grid.height * grid.width)
    throw std::invalid_argument("stamp_trigger: row does not match grid shape");
  if (trigger.size > std::min(grid.height, grid.width))
    throw std::invalid_argument("stamp_trigger: trigger larger than grid");

  Matrix out = image_row;
  for (std::size_t r = grid.height - trigger.size; r < grid.height; ++r)
    for (std::size_t c = grid.width - trigger.size; c < grid.width; ++c)
      out(0, r * grid.width + c) = trigger.value;
  return out;
}

Dataset backdoor_poison(const Dataset& data, double fraction, int target_label,
                        const Trigger& trigger, Prng& rng) {
  if (!data.grid) throw std::invalid_argument("backdoor_poison: dataset has no grid shape");
  if (target_label < 0 || target_label >= data.num_classes)
    throw std::invalid_argument("backdoor_poison: target label out of range");

  Dataset out = data;
  for (std::size_t i : select_exact(data.size(), fraction, rng)) {
    out.features.set_row(i, stamp_trigger(data.features.row(i), *data.grid, trigger));
    out.labels[i] = target_label;
    out.flags[i] = RowFlag::Triggered;
  }
  return out;
}

GradientBundle poison_gradient_update(GradientBundle grads, const GradPoisonMode& mode,
                                      Prng& rng) {
  if (mode.kind == GradPoisonMode::Kind::AddGaussian && mode.sigma < 0.0)
    throw std::invalid_argument("poison_gradient_update: sigma must be >= 0");
  for (LayerGrad& layer : grads.params) {
    for (Matrix* m : {&layer.dw, &layer.db}) {
      for (double& v : m->data()) {
        if (mode.kind == GradPoisonMode::Kind::ReplaceUniform)
          v = rng.uniform();
        else
          v += rng.gaussian(0.0, mode.sigma);
      }
    }
  }
  return grads;
}

std::pair<Dataset, FilterReport> filter_triggered(const Dataset& data, double trigger_value) {
  if (!data.grid) throw std::invalid_argument("filter_triggered: dataset has no grid shape");

  FilterReport report;
  std::vector<std::size_t> kept;
  std::size_t removed_true = 0;
  std::size_t triggered_total = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    double mx = data.features(i, 0);
    for (std::size_t c = 1; c < data.dim(); ++c) mx = std::max(mx, data.features(i, c));
    const bool is_triggered = data.flags[i] == RowFlag::Triggered;
    if (is_triggered) ++triggered_total;
    if (mx == trigger_value) {
      report.removed.push_back(i);
      if (is_triggered) ++removed_true;
    } else {
      kept.push_back(i);
    }
  }
  if (!report.removed.empty())
    report.precision = static_cast<double>(removed_true) / static_cast<double>(report.removed.size());
  if (triggered_total > 0)
    report.recall = static_cast<double>(removed_true) / static_cast<double>(triggered_total);
  return {take(data, kept), report};
}

}  // namespace advml
