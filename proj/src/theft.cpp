#include "advml/theft.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "advml/evasion.hpp"

namespace advml {

QueryOracle local_oracle(const MlpModel& model) {
  return QueryOracle([model](const Matrix& x) { return softmax_rows(forward(model, x)); });
}

std::vector<int> query_argmax_labels(const QueryOracle& oracle, const Matrix& probe) {
  if (probe.rows() == 0) throw std::invalid_argument("query_argmax_labels: empty probe");
  return argmax_rows(oracle.predict(probe));
}

MlpModel train_surrogate(const std::vector<std::size_t>& arch, ActivationKind activation,
                         const Matrix& probe, const std::vector<int>& stolen_labels,
                         int num_classes, const TrainConfig& cfg) {
  if (probe.rows() == 0) throw std::invalid_argument("train_surrogate: no probes");
  if (probe.rows() != stolen_labels.size())
    throw std::invalid_argument("train_surrogate: label count mismatch");

  Prng rng = Prng(cfg.seed).child("surrogate-init");
  MlpModel surrogate = mlp_init(arch, activation, rng);

  Dataset stolen;
  stolen.features = probe;
  stolen.labels = stolen_labels;
  stolen.num_classes = num_classes;
  stolen.flags.assign(probe.rows(), RowFlag::Clean);
  train(surrogate, stolen, cfg);
  return surrogate;
}

double agreement_rate(const QueryOracle& a, const QueryOracle& b, const Matrix& x) {
  if (x.rows() == 0) throw std::invalid_argument("agreement_rate: empty input");
  const std::vector<int> pa = argmax_rows(a.predict(x));
  const std::vector<int> pb = argmax_rows(b.predict(x));
  std::size_t same = 0;
  for (std::size_t i = 0; i < pa.size(); ++i)
    if (pa[i] == pb[i]) ++same;
  return static_cast<double>(same) / static_cast<double>(pa.size());
}

double transfer_attack_rate(const MlpModel& surrogate, const QueryOracle& target, const Matrix& x,
                            const std::vector<int>& labels, double eps) {
  if (eps <= 0.0) throw std::invalid_argument("transfer_attack_rate: eps must be > 0");
  const std::vector<int> clean_pred = argmax_rows(target.predict(x));
  std::vector<std::size_t> correct;
  for (std::size_t i = 0; i < clean_pred.size(); ++i)
    if (clean_pred[i] == labels[i]) correct.push_back(i);
  if (correct.empty())
    throw std::invalid_argument("transfer_attack_rate: target classifies nothing correctly");

  const Matrix adv = fgsm(surrogate, x, labels, eps);
  const std::vector<int> adv_pred = argmax_rows(target.predict(adv));
  std::size_t fooled = 0;
  for (std::size_t i : correct)
    if (adv_pred[i] != labels[i]) ++fooled;
  return static_cast<double>(fooled) / static_cast<double>(correct.size());
}

MlpModel clone_whitebox(const MlpModel& model) { return model; }

InversionResult invert_class_input(const MlpModel& model, int target_class,
                                   const InversionConfig& cfg) {
  if (cfg.steps == 0) throw std::invalid_argument("invert_class_input: steps must be >= 1");
  if (target_class < 0 || static_cast<std::size_t>(target_class) >= model.output_dim())
    throw std::invalid_argument("invert_class_input: target class out of range");

  InversionResult result;
  result.input = Matrix(1, model.input_dim(), 0.0);
  if (cfg.gaussian_init) {
    Prng rng = Prng(cfg.seed).child("inversion-init");
    for (double& v : result.input.data()) v = std::clamp(rng.gaussian(0.0, 0.1) + 0.5, 0.0, 1.0);
  }

  const std::size_t k = model.output_dim();
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    ForwardCache cache;
    forward(model, result.input, cache);
    // ascend the raw target logit
    Matrix dout(1, k, 0.0);
    dout(0, static_cast<std::size_t>(target_class)) = 1.0;
    const Matrix grad = backward_from_output_grad(model, cache, dout).input_grad;
    for (std::size_t i = 0; i < result.input.size(); ++i)
      result.input.data()[i] =
          std::clamp(result.input.data()[i] + cfg.lr * grad.data()[i], 0.0, 1.0);
    result.prob_trace.push_back(softmax_rows(forward(model, result.input))(
        0, static_cast<std::size_t>(target_class)));
  }
  return result;
}

std::vector<double> membership_scores(const MlpModel& model, const Matrix& x,
                                      const std::vector<int>& labels) {
  const Matrix logits = forward(model, x);
  std::vector<double> scores(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r)
    scores[r] = loss_value(LossSpec{LossKind::CrossEntropy}, logits.row(r),
                           Target::from_labels({labels[r]}));
  return scores;
}

MembershipAttack membership_advantage(const std::vector<double>& member_scores,
                                      const std::vector<double>& nonmember_scores) {
  if (member_scores.empty() || nonmember_scores.empty())
    throw std::invalid_argument("membership_advantage: empty score set");

  std::vector<double> thresholds = member_scores;
  thresholds.insert(thresholds.end(), nonmember_scores.begin(), nonmember_scores.end());
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.push_back(thresholds.back() + 1.0);  // predict-everyone-member endpoint

  MembershipAttack best;
  best.best_threshold = thresholds.front();
  for (double t : thresholds) {
    const auto below = [t](const std::vector<double>& v) {
      return static_cast<double>(std::count_if(v.begin(), v.end(),
                                               [t](double s) { return s < t; })) /
             static_cast<double>(v.size());
    };
    const double adv = below(member_scores) - below(nonmember_scores);
    if (adv > best.advantage) {
      best.advantage = adv;
      best.best_threshold = t;
    }
  }
  return best;
}

}  // namespace advml
