#pragma once

#include <cstddef>
#include <vector>

#include "advml/dataset.hpp"
#include "advml/nn.hpp"
#include "advml/prng.hpp"

namespace advml {

/// Square patch stamped into the bottom-right corner of a grid image.
struct Trigger {
  std::size_t size = 3;
  double value = 1.0;
};

struct FlipRule {
  enum class Kind { BinarySwap, Pair } kind = Kind::BinarySwap;
  int a = 0;
  int b = 1;

  static FlipRule binary_swap() { return FlipRule{}; }
  static FlipRule pair(int a, int b) { return FlipRule{Kind::Pair, a, b}; }
};

/// Flips exactly floor(fraction*N) uniformly selected rows. binary_swap maps
/// y -> 1-y (binary data only); pair(a,b) swaps a<->b among the selected rows
/// and leaves other labels alone. Rows whose label changed are flagged.
Dataset flip_labels(const Dataset& data, double fraction, const FlipRule& rule, Prng& rng);

/// The Ch.4-style injection: the first `count` rows get U[0,1)*noise_scale
/// feature noise (clamped to [0,1]) and a flipped label.
Dataset noise_flip_inject(const Dataset& data, std::size_t count, double noise_scale, Prng& rng);

/// Sets pixels (r,c) with r >= H-size and c >= W-size to trigger.value.
Matrix stamp_trigger(const Matrix& image_row, const GridShape& grid, const Trigger& trigger);

/// Stamps and relabels exactly floor(fraction*N) uniformly selected rows.
Dataset backdoor_poison(const Dataset& data, double fraction, int target_label,
                        const Trigger& trigger, Prng& rng);

struct GradPoisonMode {
  enum class Kind { ReplaceUniform, AddGaussian } kind = Kind::ReplaceUniform;
  double sigma = 0.0;

  static GradPoisonMode replace_uniform() { return GradPoisonMode{}; }
  static GradPoisonMode add_gaussian(double sigma) {
    return GradPoisonMode{Kind::AddGaussian, sigma};
  }
};

/// replace_uniform overwrites every parameter-gradient entry with U[0,1);
/// add_gaussian adds N(0, sigma^2). The input gradient is left alone.
GradientBundle poison_gradient_update(GradientBundle grads, const GradPoisonMode& mode, Prng& rng);

struct FilterReport {
  std::vector<std::size_t> removed;  // indices into the input dataset
  double precision = 1.0;            // removed rows that were truly triggered
  double recall = 1.0;               // triggered rows that got removed
};

/// Removes rows whose maximum pixel equals trigger_value exactly (the paper's
/// heuristic). Saturated clean pixels surface as false positives in the report.
std::pair<Dataset, FilterReport> filter_triggered(const Dataset& data, double trigger_value);

}  // namespace advml
