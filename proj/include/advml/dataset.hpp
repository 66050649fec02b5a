#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "advml/matrix.hpp"
#include "advml/prng.hpp"

namespace advml {

/// Per-row provenance, the ground truth for scoring poisoning experiments.
enum class RowFlag { Clean, Flipped, NoisePoisoned, Triggered };

std::string row_flag_name(RowFlag flag);
RowFlag row_flag_from_name(const std::string& name);

struct GridShape {
  std::size_t height = 0;
  std::size_t width = 0;
  friend bool operator==(const GridShape&, const GridShape&) = default;
};

struct GridSpec {
  std::size_t height = 8;
  std::size_t width = 8;
};

struct Dataset {
  Matrix features;  // N x D, feature space is [0,1] for image-like data
  std::vector<int> labels;
  int num_classes = 0;
  std::optional<GridShape> grid;
  std::vector<RowFlag> flags;

  std::size_t size() const { return features.rows(); }
  std::size_t dim() const { return features.cols(); }
};

/// Rows selected by index, in the given order (features, labels and flags).
Dataset take(const Dataset& data, const std::vector<std::size_t>& indices);

/// Class 0 ~ N(-offset*1, std^2 I), class 1 ~ N(+offset*1, std^2 I) in 2-D;
/// class 0 rows first.
Dataset gen_two_gaussians(std::size_t n_per_class, double center_offset, double std, Prng& rng);

/// k distinct stripe templates derived from the class-index bit pattern;
/// pixel = clamp(0.8*template + N(0, noise_std^2), 0, 1). Throws when the
/// grid cannot give templates that pairwise differ in >= 25% of pixels.
Dataset gen_grid_classes(std::size_t n_per_class, int k_classes, const GridSpec& grid,
                         double noise_std, Prng& rng);

/// The 0/1 template image for one class (exposed for tests and inversion checks).
Matrix grid_class_template(int class_index, const GridSpec& grid);

/// Stratified split; (train, test). Each class contributes
/// floor(test_fraction * class_count) rows to the test side.
std::pair<Dataset, Dataset> train_test_split(const Dataset& data, double test_fraction, Prng& rng);

/// Index batches covering every row exactly once; the final short batch is kept.
std::vector<std::vector<std::size_t>> minibatches(std::size_t n, std::size_t batch_size,
                                                  bool shuffle, Prng& rng);

/// x' = (x - mean) / std, applied to every feature.
Dataset normalize(const Dataset& data, double mean = 0.5, double std = 0.5);
Dataset denormalize(const Dataset& data, double mean = 0.5, double std = 0.5);

/// SHA-256 over the canonical byte layout:
///   "advml-data-v1" | n u64le | d u64le | num_classes u64le |
///   has_grid u64le | H u64le | W u64le | labels as u32le | features as f64le
/// Flags are experiment metadata and stay outside the digest.
std::string dataset_sha256(const Dataset& data);

/// Throws "data integrity compromised" on digest mismatch.
void verify_dataset(const Dataset& data, const std::string& expected_hex);

}  // namespace advml
