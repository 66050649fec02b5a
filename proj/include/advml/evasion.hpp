#pragma once

#include <vector>

#include "advml/nn.hpp"
#include "advml/prng.hpp"

namespace advml {

struct EvasionConfig {
  double epsilon = 0.1;  // inf-norm budget in feature units
  double alpha = 0.01;   // per-iteration step
  std::size_t iters = 40;
  double clamp_lo = 0.0;
  double clamp_hi = 1.0;
  bool random_start = false;
};

/// X_adv = clamp(X + eps * sign(dCE/dX)); sign(0) is 0.
Matrix fgsm(const MlpModel& model, const Matrix& x, const std::vector<int>& labels, double epsilon,
            double clamp_lo = 0.0, double clamp_hi = 1.0);

/// Iterated FGSM: step, clip the perturbation into [-eps, eps], then clamp to
/// the valid range (that order). iters=1 with alpha=epsilon matches fgsm
/// bit for bit.
Matrix pgd(const MlpModel& model, const Matrix& x, const std::vector<int>& labels,
           const EvasionConfig& cfg, Prng* rng = nullptr);

/// Flags a row when more than half its output coordinates move by more than
/// `threshold` between f(x) and f(x + gaussian noise).
std::vector<bool> detect_by_noise_divergence(const MlpModel& model, const Matrix& x,
                                             double noise_factor, double threshold, Prng& rng);

}  // namespace advml
