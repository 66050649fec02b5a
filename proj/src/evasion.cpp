#include "advml/evasion.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace advml {

namespace {

double sign0(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

Matrix input_ce_gradient(const MlpModel& model, const Matrix& x, const std::vector<int>& labels) {
  ForwardCache cache;
  forward(model, x, cache);
  return backward(model, cache, Target::from_labels(labels), LossSpec{LossKind::CrossEntropy})
      .input_grad;
}

}  // namespace

Matrix fgsm(const MlpModel& model, const Matrix& x, const std::vector<int>& labels, double epsilon,
            double clamp_lo, double clamp_hi) {
  if (epsilon < 0.0) throw std::invalid_argument("fgsm: epsilon must be >= 0");
  const Matrix grad = input_ce_gradient(model, x, labels);
  Matrix out = x;
  for (std::size_t i = 0; i < out.size(); ++i)
    out.data()[i] = std::clamp(out.data()[i] + epsilon * sign0(grad.data()[i]),
                               clamp_lo, clamp_hi);
  return out;
}

Matrix pgd(const MlpModel& model, const Matrix& x, const std::vector<int>& labels,
           const EvasionConfig& cfg, Prng* rng) {
  if (cfg.iters == 0) throw std::invalid_argument("pgd: iters must be >= 1");
  if (cfg.epsilon < 0.0) throw std::invalid_argument("pgd: epsilon must be >= 0");

  Matrix adv = x;
  if (cfg.random_start) {
    if (!rng) throw std::invalid_argument("pgd: random_start needs an rng");
    for (std::size_t i = 0; i < adv.size(); ++i)
      adv.data()[i] = std::clamp(adv.data()[i] + rng->uniform(-cfg.epsilon, cfg.epsilon),
                                 cfg.clamp_lo, cfg.clamp_hi);
  }

  for (std::size_t it = 0; it < cfg.iters; ++it) {
    const Matrix grad = input_ce_gradient(model, adv, labels);
    for (std::size_t i = 0; i < adv.size(); ++i) {
      double v = adv.data()[i] + cfg.alpha * sign0(grad.data()[i]);
      // project the perturbation back into the eps-ball, then into range
      v = std::clamp(v, x.data()[i] - cfg.epsilon, x.data()[i] + cfg.epsilon);
      adv.data()[i] = std::clamp(v, cfg.clamp_lo, cfg.clamp_hi);
    }
  }
  return adv;
}

std::vector<bool> detect_by_noise_divergence(const MlpModel& model, const Matrix& x,
                                             double noise_factor, double threshold, Prng& rng) {
  if (threshold < 0.0) throw std::invalid_argument("detect: threshold must be >= 0");
  Matrix noisy = x;
  for (double& v : noisy.data()) v = std::clamp(v + rng.gaussian(0.0, noise_factor), 0.0, 1.0);

  const Matrix clean_out = forward(model, x);
  const Matrix noisy_out = forward(model, noisy);

  std::vector<bool> flagged(x.rows(), false);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    std::size_t exceeding = 0;
    for (std::size_t c = 0; c < clean_out.cols(); ++c)
      if (std::abs(clean_out(r, c) - noisy_out(r, c)) > threshold) ++exceeding;
    flagged[r] = 2 * exceeding > clean_out.cols();
  }
  return flagged;
}

}  // namespace advml
