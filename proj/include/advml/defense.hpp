#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "advml/dataset.hpp"
#include "advml/nn.hpp"
#include "advml/prng.hpp"

namespace advml {

struct DpConfig {
  double clip_norm = 1.0;
  double noise_std = 0.1;
};

struct AuditReport {
  std::vector<std::size_t> suspects;
  std::vector<std::size_t> evidence;  // per-suspect counts, aligned with suspects
  bool has_provenance = false;
  double precision = 1.0;  // suspects that are truly poisoned, when flags exist
  double recall = 1.0;     // poisoned rows that were flagged
};

/// Fills precision/recall against rows whose flag is not Clean.
void score_against_flags(AuditReport& report, const Dataset& data);

struct AdvTrainEpochReport {
  double clean_loss = 0.0;
  double adv_loss = 0.0;
};

/// One epoch of the two-step loop: per batch, an optimizer step on the clean
/// loss, then another on the FGSM(eps) loss.
AdvTrainEpochReport adversarial_train_epoch(MlpModel& model, Optimizer& opt, const Dataset& data,
                                            double eps, std::size_t batch_size, bool shuffle,
                                            Prng& rng);

struct AdvTrainReport {
  std::vector<AdvTrainEpochReport> epochs;
};

AdvTrainReport adversarial_train(MlpModel& model, const Dataset& data, double eps,
                                 const TrainConfig& cfg);

/// clamp(x + N(0, noise_factor^2), 0, 1).
Matrix noise_augment(const Matrix& x, double noise_factor, Prng& rng);

/// Copy whose backward reports a zero input gradient; forward is unchanged.
MlpModel mask_input_gradient(MlpModel model);

struct SanitizeMode {
  enum class Kind { StdK, Centroid } kind = Kind::StdK;
  double threshold = 3.0;

  static SanitizeMode std_k(double k = 3.0) { return SanitizeMode{Kind::StdK, k}; }
  static SanitizeMode centroid(double threshold = 1.5) {
    return SanitizeMode{Kind::Centroid, threshold};
  }
};

/// std_k removes rows with any |feature - mean| > k * population std;
/// centroid removes rows farther than `threshold` from their class mean.
std::pair<Dataset, AuditReport> sanitize_outliers(const Dataset& data, const SanitizeMode& mode);

/// Scales all parameter gradients by min(1, clip_norm / global L2 norm), then
/// adds N(0, noise_std^2) per entry. input_grad passes through untouched.
GradientBundle dp_clip_noise(GradientBundle grads, const DpConfig& dp, Prng& rng);

/// Separable gaussian blur with reflect padding; kernel_size must be odd.
Matrix gaussian_blur(const Matrix& image_row, const GridShape& grid, std::size_t kernel_size = 5,
                     double sigma = 1.0);

/// score(x) = mean first-hidden-layer activation. Threshold is the
/// linear-interpolation percentile of scores over the reference set.
double activation_anomaly_threshold(const MlpModel& model, const Dataset& reference,
                                    double percentile = 95.0);
std::vector<bool> activation_anomaly_flags(const MlpModel& model, const Matrix& x,
                                           double threshold);
double activation_score(const MlpModel& model, const Matrix& row);

struct CrossvalAuditConfig {
  std::size_t folds = 5;
  std::size_t flag_threshold = 3;
  std::size_t repeats = 3;
  std::function<MlpModel(std::uint64_t seed)> model_factory;
  TrainConfig train;
};

/// Repeated seeded k-fold rounds; rows misclassified while held out at least
/// flag_threshold times are flagged.
AuditReport crossval_label_audit(const Dataset& data, const CrossvalAuditConfig& cfg, Prng& rng);

/// Removes rows where the two models' argmax predictions differ.
std::pair<Dataset, AuditReport> consensus_disagreement_filter(const Dataset& data,
                                                              const MlpModel& model_a,
                                                              const MlpModel& model_b);

/// Labels at the given rows are replaced by the model's argmax prediction.
Dataset pseudo_label_relabel(const MlpModel& model, const Dataset& data,
                             const std::vector<std::size_t>& rows);

}  // namespace advml
