#pragma once

#include <utility>
#include <vector>

#include "advml/dataset.hpp"
#include "advml/nn.hpp"
#include "advml/prng.hpp"

namespace advml {

/// KL(teacher || student) over temperature-softened distributions: sum over
/// classes, mean over the batch.
double distillation_loss(const Matrix& student_logits, const Matrix& teacher_logits,
                         double temperature);

struct DistillReport {
  std::vector<double> epoch_losses;
  double agreement = 0.0;  // argmax agreement with the teacher on the dataset
};

/// Optimizes the distillation loss only (no hard-label term).
DistillReport distill_train(const MlpModel& teacher, MlpModel& student, const Dataset& data,
                            const TrainConfig& cfg, double temperature);

/// (1-label)*d^2 + label*max(margin-d, 0)^2 where d = ||z1-z2||; pair label 0
/// means similar. Batch mean over rows.
double contrastive_loss(const Matrix& z1, const Matrix& z2, const std::vector<int>& pair_labels,
                        double margin);

struct PairSet {
  Matrix a;
  Matrix b;
  std::vector<int> labels;  // 0 similar, 1 dissimilar
};

/// Deterministic pairs from true class identity: disjoint same-class pairs as
/// positives, cross-class pairs as negatives, balanced counts.
PairSet build_contrastive_pairs(const Dataset& data);

TrainReport contrastive_train(MlpModel& encoder, const Dataset& data, const TrainConfig& cfg,
                              double margin = 1.0);

/// Mean within-class vs cross-class embedding distance (separation check).
std::pair<double, double> embedding_class_distances(const MlpModel& encoder, const Dataset& data);

/// k clockwise quarter turns; (r,c) -> (c, H-1-r). Odd k needs a square grid.
Matrix rotate90(const Matrix& image_row, const GridShape& grid, int k);

struct RotationPretextResult {
  MlpModel model;             // encoder dims + 4-way rotation head
  double heldout_accuracy = 0.0;
};

/// Each image gets a balanced seeded rotation as its pretext label; reports
/// held-out rotation accuracy.
RotationPretextResult rotation_pretext_train(const std::vector<std::size_t>& encoder_dims,
                                             ActivationKind activation, const Dataset& data,
                                             const TrainConfig& cfg, Prng& rng);

/// D -> hidden -> bottleneck -> hidden -> D with a sigmoid output head.
MlpModel autoencoder_init(std::size_t input_dim, std::size_t hidden, std::size_t bottleneck,
                          Prng& rng);

/// Mse against the model's own input.
TrainReport autoencoder_train(MlpModel& model, const Dataset& data, const TrainConfig& cfg);

/// Per-row mean squared reconstruction error.
std::vector<double> reconstruction_scores(const MlpModel& model, const Matrix& x);
std::vector<bool> reconstruction_flags(const std::vector<double>& scores, double threshold = 0.02);

}  // namespace advml
