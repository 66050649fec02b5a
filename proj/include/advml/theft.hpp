#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "advml/dataset.hpp"
#include "advml/nn.hpp"
#include "advml/prng.hpp"

namespace advml {

/// Opaque predict function: batch features -> class probabilities. Calls are
/// accounted per row so rate-limit experiments can count queries.
class QueryOracle {
 public:
  using Fn = std::function<Matrix(const Matrix&)>;

  explicit QueryOracle(Fn fn) : fn_(std::move(fn)), calls_(std::make_shared<std::size_t>(0)) {}

  Matrix predict(const Matrix& x) const {
    *calls_ += x.rows();
    return fn_(x);
  }

  std::size_t calls() const { return *calls_; }

 private:
  Fn fn_;
  std::shared_ptr<std::size_t> calls_;
};

/// Wraps a local model as softmax probabilities (the model is copied).
QueryOracle local_oracle(const MlpModel& model);

std::vector<int> query_argmax_labels(const QueryOracle& oracle, const Matrix& probe);

/// Standard training on (probe, stolen argmax labels) with CrossEntropy.
MlpModel train_surrogate(const std::vector<std::size_t>& arch, ActivationKind activation,
                         const Matrix& probe, const std::vector<int>& stolen_labels,
                         int num_classes, const TrainConfig& cfg);

/// Fraction of rows where both oracles pick the same class.
double agreement_rate(const QueryOracle& a, const QueryOracle& b, const Matrix& x);

/// FGSM examples crafted on the surrogate, scored on the target: fraction of
/// originally-correct rows the target now gets wrong.
double transfer_attack_rate(const MlpModel& surrogate, const QueryOracle& target, const Matrix& x,
                            const std::vector<int>& labels, double eps);

/// Exact replica; outputs are bit-identical on any input.
MlpModel clone_whitebox(const MlpModel& model);

struct InversionConfig {
  std::size_t steps = 1000;
  double lr = 0.1;
  bool gaussian_init = false;  // zeros otherwise
  std::uint64_t seed = 0;
};

struct InversionResult {
  Matrix input;                    // 1 x D, clamped to [0,1]
  std::vector<double> prob_trace;  // target-class probability per step
};

/// Plain gradient ascent on the target logit, inputs clamped after each step.
InversionResult invert_class_input(const MlpModel& model, int target_class,
                                   const InversionConfig& cfg);

/// Per-row CrossEntropy; lower means more member-like.
std::vector<double> membership_scores(const MlpModel& model, const Matrix& x,
                                      const std::vector<int>& labels);

struct MembershipAttack {
  double best_threshold = 0.0;
  double advantage = 0.0;  // TPR - FPR at the best threshold
};

/// Scans thresholds over all observed scores; member predicted when
/// score < threshold.
MembershipAttack membership_advantage(const std::vector<double>& member_scores,
                                      const std::vector<double>& nonmember_scores);

}  // namespace advml
