#include "advml/scenario.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <stdexcept>

#include "httplib.h"
#include "json.hpp"

#include "advml/dataset.hpp"
#include "advml/defense.hpp"
#include "advml/evasion.hpp"
#include "advml/fed.hpp"
#include "advml/io.hpp"
#include "advml/metrics.hpp"
#include "advml/nn.hpp"
#include "advml/poison.hpp"
#include "advml/rep.hpp"
#include "advml/serve.hpp"
#include "advml/theft.hpp"

namespace advml {

namespace {

using nlohmann::json;

LossSpec loss_from_json(const json& p) {
  LossSpec spec;
  const std::string name = p.value("loss", "cross_entropy");
  if (name == "cross_entropy")
    spec.kind = LossKind::CrossEntropy;
  else if (name == "mse")
    spec.kind = LossKind::Mse;
  else if (name == "smooth_l1")
    spec.kind = LossKind::SmoothL1;
  else if (name == "mae_onehot")
    spec.kind = LossKind::MaeOneHot;
  else if (name == "bce")
    spec.kind = LossKind::Bce;
  else
    throw std::runtime_error("unknown loss: " + name);
  spec.beta = p.value("beta", 1.0);
  return spec;
}

OptimizerSpec optimizer_from_json(const json& p) {
  const std::string name = p.value("optimizer", "sgd");
  if (name == "sgd") return SgdConfig{p.value("lr", 0.1)};
  if (name == "adam") {
    AdamConfig adam;
    adam.lr = p.value("lr", 0.001);
    return adam;
  }
  throw std::runtime_error("unknown optimizer: " + name);
}

TrainConfig train_config_from_json(const json& p, std::uint64_t seed) {
  TrainConfig cfg;
  cfg.epochs = p.value("epochs", std::size_t{10});
  cfg.batch_size = p.value("batch", std::size_t{32});
  cfg.loss = loss_from_json(p);
  cfg.optimizer = optimizer_from_json(p);
  cfg.shuffle = p.value("shuffle", true);
  cfg.seed = seed;
  return cfg;
}

std::vector<std::size_t> arch_from_json(const json& p) {
  if (!p.contains("arch")) throw std::runtime_error("scenario: missing arch");
  return p.at("arch").get<std::vector<std::size_t>>();
}

MlpModel init_from_json(const json& p, std::uint64_t seed) {
  Prng rng = Prng(seed).child("init");
  return mlp_init(arch_from_json(p), activation_from_name(p.value("activation", "relu")), rng);
}

Dataset load_input_data(const json& p, RunManifest& manifest) {
  Dataset data = load_dataset(p.at("data").get<std::string>());
  manifest.dataset_digest = dataset_sha256(data);
  if (p.contains("expected_digest"))
    verify_dataset(data, p.at("expected_digest").get<std::string>());
  return data;
}

void save_artifact_dataset(const Dataset& data, const std::string& path, RunManifest& manifest) {
  save_dataset(data, path);
  manifest.artifacts.push_back(path);
}

void save_artifact_model(const MlpModel& model, const std::string& path, RunManifest& manifest) {
  save_checkpoint(model, path);
  manifest.artifacts.push_back(path);
}

double flag_rate(const std::vector<bool>& flags) {
  if (flags.empty()) return 0.0;
  std::size_t hits = 0;
  for (bool f : flags) hits += f ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(flags.size());
}

void scenario_gen_data(const json& p, std::uint64_t seed, MetricsWriter& metrics,
                       RunManifest& manifest) {
  Prng rng = Prng(seed).child("gen-data");
  const std::string kind = p.value("kind", "grid");
  Dataset data;
  if (kind == "gaussians") {
    data = gen_two_gaussians(p.value("n_per_class", std::size_t{100}), p.value("offset", 1.0),
                             p.value("std", 1.0), rng);
  } else if (kind == "grid") {
    GridSpec grid{p.value("height", std::size_t{8}), p.value("width", std::size_t{8})};
    data = gen_grid_classes(p.value("n_per_class", std::size_t{200}), p.value("classes", 4), grid,
                            p.value("noise_std", 0.15), rng);
  } else {
    throw std::runtime_error("gen-data: unknown kind " + kind);
  }
  save_artifact_dataset(data, p.at("out").get<std::string>(), manifest);
  manifest.dataset_digest = dataset_sha256(data);

  if (p.contains("pgm_dir") && data.grid) {
    const std::string dir = p["pgm_dir"].get<std::string>();
    std::filesystem::create_directories(dir);
    const std::size_t count =
        std::min<std::size_t>(p.value("pgm_count", std::size_t{8}), data.size());
    for (std::size_t i = 0; i < count; ++i) {
      const std::string path = dir + "/row" + std::to_string(i) + "_class" +
                               std::to_string(data.labels[i]) + ".pgm";
      write_pgm(data.features.row(i), *data.grid, path);
      manifest.artifacts.push_back(path);
    }
  }
  metrics.add(0, "na", "rows", static_cast<double>(data.size()));
  metrics.add(0, "na", "dims", static_cast<double>(data.dim()));
}

void scenario_train(const json& p, std::uint64_t seed, MetricsWriter& metrics,
                    RunManifest& manifest) {
  const Dataset data = load_input_data(p, manifest);
  Dataset train_set = data;
  Dataset test_set;
  const double test_fraction = p.value("test_fraction", 0.0);
  if (test_fraction > 0.0) {
    Prng split_rng = Prng(seed).child("split");
    std::tie(train_set, test_set) = train_test_split(data, test_fraction, split_rng);
  }

  MlpModel model = init_from_json(p, seed);
  const TrainConfig cfg = train_config_from_json(p, seed);
  const TrainReport report = train(model, train_set, cfg);
  for (std::size_t e = 0; e < report.epoch_losses.size(); ++e)
    metrics.add(e, "train", "loss", report.epoch_losses[e]);

  const EvalMetrics train_eval = evaluate(model, train_set);
  metrics.add(cfg.epochs, "train", "accuracy", train_eval.accuracy);
  metrics.add(cfg.epochs, "train", "loss", train_eval.mean_loss);
  if (test_set.size() > 0) {
    const EvalMetrics test_eval = evaluate(model, test_set);
    metrics.add(cfg.epochs, "test", "accuracy", test_eval.accuracy);
    metrics.add(cfg.epochs, "test", "loss", test_eval.mean_loss);
  }
  if (p.contains("model_out"))
    save_artifact_model(model, p["model_out"].get<std::string>(), manifest);
}

void scenario_attack(const json& p, std::uint64_t seed, MetricsWriter& metrics,
                     RunManifest& manifest) {
  const MlpModel model = load_checkpoint(p.at("model").get<std::string>());
  const Dataset data = load_input_data(p, manifest);
  const std::string method = p.value("method", "fgsm");
  const double eps = p.value("eps", 0.1);

  metrics.add(0, "test", "accuracy_clean", evaluate(model, data).accuracy);

  Matrix adv;
  if (method == "fgsm") {
    adv = fgsm(model, data.features, data.labels, eps);
  } else if (method == "pgd") {
    EvasionConfig cfg;
    cfg.epsilon = eps;
    cfg.alpha = p.value("alpha", 0.01);
    cfg.iters = p.value("iters", std::size_t{40});
    adv = pgd(model, data.features, data.labels, cfg);
  } else {
    throw std::runtime_error("attack: unknown method " + method);
  }

  Dataset adv_data = data;
  adv_data.features = adv;
  metrics.add(0, "test", "accuracy_adversarial", evaluate(model, adv_data).accuracy);

  Prng det_rng = Prng(seed).child("detector");
  metrics.add(0, "test", "detector_flag_rate_clean",
              flag_rate(detect_by_noise_divergence(model, data.features, 0.2, 0.1, det_rng)));
  metrics.add(0, "test", "detector_flag_rate_adversarial",
              flag_rate(detect_by_noise_divergence(model, adv, 0.2, 0.1, det_rng)));

  if (p.contains("adv_out"))
    save_artifact_dataset(adv_data, p["adv_out"].get<std::string>(), manifest);
}

void scenario_poison(const json& p, std::uint64_t seed, MetricsWriter& metrics,
                     RunManifest& manifest) {
  const Dataset data = load_input_data(p, manifest);
  const std::string method = p.value("method", "flip");
  Prng rng = Prng(seed).child("poison");

  Dataset poisoned;
  if (method == "flip") {
    FlipRule rule = FlipRule::binary_swap();
    if (p.value("rule", "binary_swap") == "pair")
      rule = FlipRule::pair(p.value("a", 0), p.value("b", 1));
    poisoned = flip_labels(data, p.value("fraction", 0.1), rule, rng);
  } else if (method == "noiseflip") {
    poisoned = noise_flip_inject(data, p.value("count", std::size_t{10}),
                                 p.value("noise_scale", 0.5), rng);
  } else if (method == "backdoor") {
    Trigger trigger{p.value("trigger_size", std::size_t{3}), p.value("trigger_value", 1.0)};
    poisoned = backdoor_poison(data, p.value("fraction", 0.1), p.value("target", 0), trigger, rng);
  } else {
    throw std::runtime_error("poison: unknown method " + method);
  }

  std::size_t tainted = 0;
  for (RowFlag f : poisoned.flags)
    if (f != RowFlag::Clean) ++tainted;
  metrics.add(0, "train", "poisoned_rows", static_cast<double>(tainted));
  save_artifact_dataset(poisoned, p.at("out").get<std::string>(), manifest);
}

void scenario_defend(const json& p, std::uint64_t seed, MetricsWriter& metrics,
                     RunManifest& manifest) {
  const std::string method = p.at("method").get<std::string>();

  if (method == "advtrain") {
    const Dataset data = load_input_data(p, manifest);
    Prng split_rng = Prng(seed).child("split");
    auto [train_set, test_set] = train_test_split(data, p.value("test_fraction", 0.25), split_rng);
    const double eps = p.value("eps", 0.1);

    MlpModel model = init_from_json(p, seed);
    const TrainConfig cfg = train_config_from_json(p, seed);
    const AdvTrainReport report = adversarial_train(model, train_set, eps, cfg);
    for (std::size_t e = 0; e < report.epochs.size(); ++e) {
      metrics.add(e, "train", "loss_clean", report.epochs[e].clean_loss);
      metrics.add(e, "train", "loss_adversarial", report.epochs[e].adv_loss);
    }
    metrics.add(cfg.epochs, "test", "accuracy_clean", evaluate(model, test_set).accuracy);
    Dataset adv_test = test_set;
    adv_test.features = fgsm(model, test_set.features, test_set.labels, eps);
    metrics.add(cfg.epochs, "test", "accuracy_robust", evaluate(model, adv_test).accuracy);
    if (p.contains("model_out"))
      save_artifact_model(model, p["model_out"].get<std::string>(), manifest);
    return;
  }

  if (method == "sanitize") {
    const Dataset data = load_input_data(p, manifest);
    const SanitizeMode mode = p.value("mode", "std_k") == "centroid"
                                  ? SanitizeMode::centroid(p.value("threshold", 1.5))
                                  : SanitizeMode::std_k(p.value("k", 3.0));
    const auto [kept, report] = sanitize_outliers(data, mode);
    metrics.add(0, "train", "removed_rows", static_cast<double>(report.suspects.size()));
    metrics.add(0, "train", "precision", report.precision);
    metrics.add(0, "train", "recall", report.recall);
    if (p.contains("out")) save_artifact_dataset(kept, p["out"].get<std::string>(), manifest);
    return;
  }

  if (method == "dp") {
    const Dataset data = load_input_data(p, manifest);
    const DpConfig dp{p.value("clip", 1.0), p.value("noise", 0.1)};
    MlpModel model = init_from_json(p, seed);
    const TrainConfig cfg = train_config_from_json(p, seed);
    const GradHook hook = [dp](GradientBundle& g, Prng& hook_rng) {
      g = dp_clip_noise(std::move(g), dp, hook_rng);
    };
    const TrainReport report = train(model, data, cfg, hook);
    for (std::size_t e = 0; e < report.epoch_losses.size(); ++e)
      metrics.add(e, "train", "loss", report.epoch_losses[e]);
    metrics.add(cfg.epochs, "train", "accuracy", evaluate(model, data).accuracy);
    if (p.contains("model_out"))
      save_artifact_model(model, p["model_out"].get<std::string>(), manifest);
    return;
  }

  if (method == "blur") {
    const Dataset data = load_input_data(p, manifest);
    if (!data.grid) throw std::runtime_error("defend blur: dataset has no grid");
    Dataset blurred = data;
    for (std::size_t r = 0; r < data.size(); ++r)
      blurred.features.set_row(
          r, gaussian_blur(data.features.row(r), *data.grid, p.value("kernel", std::size_t{5}),
                           p.value("sigma", 1.0)));
    metrics.add(0, "train", "rows", static_cast<double>(blurred.size()));
    save_artifact_dataset(blurred, p.at("out").get<std::string>(), manifest);
    return;
  }

  if (method == "consensus") {
    const Dataset data = load_input_data(p, manifest);
    const auto arch = arch_from_json(p);
    const auto activation = activation_from_name(p.value("activation", "relu"));
    MlpModel model_a, model_b;
    {
      Prng rng_a = Prng(seed).child("consensus-a");
      Prng rng_b = Prng(seed).child("consensus-b");
      model_a = mlp_init(arch, activation, rng_a);
      model_b = mlp_init(arch, activation, rng_b);
      TrainConfig cfg_a = train_config_from_json(p, Prng(seed).child("consensus-a").next_u64());
      TrainConfig cfg_b = train_config_from_json(p, Prng(seed).child("consensus-b").next_u64());
      train(model_a, data, cfg_a);
      train(model_b, data, cfg_b);
    }
    const auto [kept, report] = consensus_disagreement_filter(data, model_a, model_b);
    metrics.add(0, "train", "removed_rows", static_cast<double>(report.suspects.size()));
    metrics.add(0, "train", "precision", report.precision);
    metrics.add(0, "train", "recall", report.recall);
    if (p.contains("out")) save_artifact_dataset(kept, p["out"].get<std::string>(), manifest);
    return;
  }

  if (method == "audit" || method == "relabel") {
    const Dataset data = load_input_data(p, manifest);
    Prng rng = Prng(seed).child("audit");

    CrossvalAuditConfig audit_cfg;
    audit_cfg.folds = p.value("folds", std::size_t{5});
    audit_cfg.flag_threshold = p.value("flag_threshold", std::size_t{3});
    audit_cfg.repeats = p.value("repeats", std::size_t{3});
    audit_cfg.train = train_config_from_json(p, 0);
    const auto arch = arch_from_json(p);
    const auto activation = activation_from_name(p.value("activation", "relu"));
    audit_cfg.model_factory = [arch, activation](std::uint64_t s) {
      Prng init(s);
      return mlp_init(arch, activation, init);
    };
    const AuditReport report = crossval_label_audit(data, audit_cfg, rng);
    metrics.add(0, "train", "flagged_rows", static_cast<double>(report.suspects.size()));
    metrics.add(0, "train", "precision", report.precision);
    metrics.add(0, "train", "recall", report.recall);
    if (method == "audit") return;

    // relabel pipeline: reference model trained on the unflagged rows supplies
    // pseudo-labels for the suspects, then a fresh model trains on the repair
    std::vector<bool> suspect(data.size(), false);
    for (std::size_t i : report.suspects) suspect[i] = true;
    std::vector<std::size_t> kept_idx;
    for (std::size_t i = 0; i < data.size(); ++i)
      if (!suspect[i]) kept_idx.push_back(i);

    Prng ref_rng = Prng(seed).child("relabel-ref");
    MlpModel reference = mlp_init(arch, activation, ref_rng);
    TrainConfig ref_cfg = train_config_from_json(p, Prng(seed).child("relabel-ref").next_u64());
    train(reference, take(data, kept_idx), ref_cfg);
    const Dataset repaired = pseudo_label_relabel(reference, data, report.suspects);

    Prng final_rng = Prng(seed).child("relabel-final");
    MlpModel final_model = mlp_init(arch, activation, final_rng);
    TrainConfig final_cfg = train_config_from_json(p, Prng(seed).child("relabel-final").next_u64());
    train(final_model, repaired, final_cfg);
    metrics.add(0, "train", "accuracy_after_relabel", evaluate(final_model, repaired).accuracy);
    if (p.contains("eval_data")) {
      const Dataset eval_set = load_dataset(p["eval_data"].get<std::string>());
      metrics.add(0, "test", "accuracy_after_relabel", evaluate(final_model, eval_set).accuracy);
    }
    if (p.contains("out")) save_artifact_dataset(repaired, p["out"].get<std::string>(), manifest);
    if (p.contains("model_out"))
      save_artifact_model(final_model, p["model_out"].get<std::string>(), manifest);
    return;
  }

  throw std::runtime_error("defend: unknown method " + method);
}

void scenario_steal(const json& p, std::uint64_t seed, MetricsWriter& metrics,
                    RunManifest& manifest) {
  const std::size_t n_probes = p.value("probes", std::size_t{2000});
  const std::size_t n_heldout = p.value("heldout", std::size_t{500});
  const double lo = p.value("probe_lo", -3.0);
  const double hi = p.value("probe_hi", 3.0);
  const auto surrogate_arch = arch_from_json(p);
  const std::size_t dim = surrogate_arch.front();
  const int num_classes = static_cast<int>(surrogate_arch.back());

  Prng probe_rng = Prng(seed).child("probes");
  Matrix probes(n_probes, dim);
  for (double& v : probes.data()) v = probe_rng.uniform(lo, hi);
  Matrix heldout(n_heldout, dim);
  for (double& v : heldout.data()) v = probe_rng.uniform(lo, hi);

  TrainConfig cfg = train_config_from_json(p, Prng(seed).child("surrogate").next_u64());

  if (p.contains("target_url")) {
    const std::string host = p["target_url"].get<std::string>();
    const int port = p.at("target_port").get<int>();
    const std::string token = p.value("token", "secure_token_123");
    const ExtractionReport report = extraction_client(
        host, port, token, probes, heldout, surrogate_arch, num_classes, cfg);
    metrics.add(0, "test", "agreement", report.agreement);
    metrics.add(0, "na", "queries_issued", static_cast<double>(report.queries_issued));
    metrics.add(0, "na", "rate_limited", static_cast<double>(report.rate_limited));
    if (p.contains("model_out"))
      save_artifact_model(report.surrogate, p["model_out"].get<std::string>(), manifest);
    return;
  }

  const MlpModel target = load_checkpoint(p.at("target_model").get<std::string>());
  const QueryOracle oracle = local_oracle(target);
  const std::vector<int> stolen = query_argmax_labels(oracle, probes);
  const MlpModel surrogate = train_surrogate(surrogate_arch, ActivationKind::Relu, probes, stolen,
                                             num_classes, cfg);
  metrics.add(0, "test", "agreement", agreement_rate(local_oracle(surrogate), oracle, heldout));
  metrics.add(0, "na", "queries_issued", static_cast<double>(oracle.calls()));
  if (p.contains("model_out"))
    save_artifact_model(surrogate, p["model_out"].get<std::string>(), manifest);
}

void scenario_federate(const json& p, std::uint64_t seed, MetricsWriter& metrics,
                       RunManifest& manifest) {
  const Dataset data = load_input_data(p, manifest);

  FedConfig cfg;
  cfg.num_clients = p.value("clients", std::size_t{4});
  cfg.rounds = p.value("rounds", std::size_t{10});
  cfg.local_epochs = p.value("local_epochs", std::size_t{1});
  cfg.client_batch = p.value("batch", std::size_t{32});
  cfg.client_lr = p.value("lr", 0.05);
  if (p.contains("poisoned")) cfg.poisoned_clients = p["poisoned"].get<std::vector<std::size_t>>();
  if (p.contains("dp_clip") || p.contains("dp_noise"))
    cfg.dp = DpConfig{p.value("dp_clip", 1.0), p.value("dp_noise", 0.1)};
  if (p.value("partition", "iid") == "by_class") cfg.partition = FedConfig::Partition::ByClass;

  MlpModel global_model = init_from_json(p, seed);
  Prng rng = Prng(seed).child("federate");
  const FedHistory history = run_federated(cfg, data, global_model, rng);
  for (std::size_t r = 0; r < history.accuracy.size(); ++r) {
    metrics.add(r, "train", "accuracy", history.accuracy[r]);
    metrics.add(r, "train", "loss", history.loss[r]);
  }
  if (p.contains("model_out"))
    save_artifact_model(global_model, p["model_out"].get<std::string>(), manifest);
}

void scenario_rep(const json& p, std::uint64_t seed, MetricsWriter& metrics,
                  RunManifest& manifest) {
  const std::string task = p.at("task").get<std::string>();

  if (task == "distill") {
    const Dataset data = load_input_data(p, manifest);
    const MlpModel teacher = load_checkpoint(p.at("teacher").get<std::string>());
    Prng student_rng = Prng(seed).child("student");
    MlpModel student = mlp_init(arch_from_json(p),
                                activation_from_name(p.value("activation", "relu")), student_rng);
    const TrainConfig cfg = train_config_from_json(p, seed);
    const DistillReport report =
        distill_train(teacher, student, data, cfg, p.value("temperature", 3.0));
    for (std::size_t e = 0; e < report.epoch_losses.size(); ++e)
      metrics.add(e, "train", "loss", report.epoch_losses[e]);
    metrics.add(cfg.epochs, "train", "teacher_agreement", report.agreement);
    if (p.contains("model_out"))
      save_artifact_model(student, p["model_out"].get<std::string>(), manifest);
    return;
  }

  if (task == "contrastive") {
    const Dataset data = load_input_data(p, manifest);
    Prng enc_rng = Prng(seed).child("encoder");
    MlpModel encoder = mlp_init(arch_from_json(p),
                                activation_from_name(p.value("activation", "relu")), enc_rng);
    const TrainConfig cfg = train_config_from_json(p, seed);
    contrastive_train(encoder, data, cfg, p.value("margin", 1.0));
    const auto [intra, inter] = embedding_class_distances(encoder, data);
    metrics.add(cfg.epochs, "train", "intra_class_distance", intra);
    metrics.add(cfg.epochs, "train", "inter_class_distance", inter);
    if (p.contains("model_out"))
      save_artifact_model(encoder, p["model_out"].get<std::string>(), manifest);
    return;
  }

  if (task == "rotation") {
    const Dataset data = load_input_data(p, manifest);
    Prng rng = Prng(seed).child("rotation");
    const TrainConfig cfg = train_config_from_json(p, seed);
    const RotationPretextResult result = rotation_pretext_train(
        arch_from_json(p), activation_from_name(p.value("activation", "relu")), data, cfg, rng);
    metrics.add(cfg.epochs, "test", "rotation_accuracy", result.heldout_accuracy);
    if (p.contains("model_out"))
      save_artifact_model(result.model, p["model_out"].get<std::string>(), manifest);
    return;
  }

  if (task == "autoencoder") {
    const Dataset data = load_input_data(p, manifest);
    Prng ae_rng = Prng(seed).child("autoencoder");
    MlpModel model = autoencoder_init(data.dim(), p.value("hidden", std::size_t{32}),
                                      p.value("bottleneck", std::size_t{16}), ae_rng);
    const TrainConfig cfg = train_config_from_json(p, seed);
    const TrainReport report = autoencoder_train(model, data, cfg);
    for (std::size_t e = 0; e < report.epoch_losses.size(); ++e)
      metrics.add(e, "train", "loss", report.epoch_losses[e]);
    const std::vector<double> scores = reconstruction_scores(model, data.features);
    const double threshold = p.value("threshold", 0.02);
    double mean_score = 0.0;
    for (double s : scores) mean_score += s;
    mean_score /= static_cast<double>(scores.size());
    metrics.add(cfg.epochs, "train", "mean_reconstruction_error", mean_score);
    metrics.add(cfg.epochs, "train", "flag_rate",
                flag_rate(reconstruction_flags(scores, threshold)));
    if (p.contains("model_out"))
      save_artifact_model(model, p["model_out"].get<std::string>(), manifest);
    return;
  }

  throw std::runtime_error("rep: unknown task " + task);
}

void scenario_serve_audit(const json& p, std::uint64_t seed, MetricsWriter& metrics,
                          RunManifest& manifest) {
  const MlpModel model = load_checkpoint(p.at("model").get<std::string>());
  ServeConfig cfg;
  cfg.token = p.value("token", "secure_token_123");
  cfg.noise_factor = p.value("noise", 0.05);
  cfg.rate_max = p.value("rate_max", std::size_t{5});
  cfg.rate_window = p.value("rate_window", 60.0);
  if (p.contains("top_k")) cfg.top_k = p["top_k"].get<std::size_t>();
  cfg.port = 0;  // ephemeral

  PredictServer server(model, cfg);
  server.start();

  httplib::Client client("127.0.0.1", server.port());
  const std::size_t requests = p.value("requests", std::size_t{6});
  Prng rng = Prng(seed).child("probe");
  std::size_t ok = 0, limited = 0, unauthorized = 0, bad = 0;

  {  // one wrong-token request first; must not consume quota
    json body;
    body["token"] = cfg.token + "-wrong";
    body["features"] = std::vector<double>(model.input_dim(), 0.0);
    auto res = client.Post("/predict", body.dump(), "application/json");
    if (res && res->status == 401) ++unauthorized;
  }
  for (std::size_t i = 0; i < requests; ++i) {
    json body;
    body["token"] = cfg.token;
    std::vector<double> features(model.input_dim());
    for (double& v : features) v = rng.uniform();
    body["features"] = features;
    auto res = client.Post("/predict", body.dump(), "application/json");
    if (!res) continue;
    if (res->status == 200) ++ok;
    else if (res->status == 429) ++limited;
    else if (res->status == 400) ++bad;
  }
  server.stop();

  metrics.add(0, "na", "responses_ok", static_cast<double>(ok));
  metrics.add(0, "na", "responses_rate_limited", static_cast<double>(limited));
  metrics.add(0, "na", "responses_unauthorized", static_cast<double>(unauthorized));
  metrics.add(0, "na", "responses_bad_input", static_cast<double>(bad));
  (void)manifest;
}

void scenario_audit_hash(const json& p, std::uint64_t, MetricsWriter& metrics,
                         RunManifest& manifest) {
  const Dataset data = load_dataset(p.at("data").get<std::string>());
  const std::string digest = dataset_sha256(data);
  manifest.dataset_digest = digest;
  std::cout << digest << "\n";
  if (p.contains("expected")) {
    const bool match = digest == p["expected"].get<std::string>();
    metrics.add(0, "na", "digest_match", match ? 1.0 : 0.0);
    if (!match) throw std::runtime_error("data integrity compromised");
  } else {
    metrics.add(0, "na", "digest_match", 1.0);
  }
}

}  // namespace

int run_scenario(const std::string& config_text, const std::string& metrics_path,
                 const std::string& manifest_path) {
  json config;
  RunManifest manifest;
  manifest.started_at = iso8601_utc_now();
  try {
    config = json::parse(config_text);
    const std::string scenario = config.at("scenario").get<std::string>();
    const std::uint64_t seed = config.value("seed", std::uint64_t{0});
    const json params = config.value("params", json::object());

    manifest.run_id = scenario + "-" + std::to_string(seed);
    manifest.scenario = scenario;
    manifest.seed = seed;
    manifest.config_json = config.dump();

    MetricsWriter metrics(manifest.run_id, scenario, seed);
    if (scenario == "gen-data")
      scenario_gen_data(params, seed, metrics, manifest);
    else if (scenario == "train")
      scenario_train(params, seed, metrics, manifest);
    else if (scenario == "attack")
      scenario_attack(params, seed, metrics, manifest);
    else if (scenario == "poison")
      scenario_poison(params, seed, metrics, manifest);
    else if (scenario == "defend")
      scenario_defend(params, seed, metrics, manifest);
    else if (scenario == "steal")
      scenario_steal(params, seed, metrics, manifest);
    else if (scenario == "federate")
      scenario_federate(params, seed, metrics, manifest);
    else if (scenario == "rep")
      scenario_rep(params, seed, metrics, manifest);
    else if (scenario == "serve-audit")
      scenario_serve_audit(params, seed, metrics, manifest);
    else if (scenario == "audit-hash")
      scenario_audit_hash(params, seed, metrics, manifest);
    else
      throw std::runtime_error("unknown scenario: " + scenario);

    if (!metrics_path.empty()) metrics.write_csv(metrics_path);
    manifest.finished_at = iso8601_utc_now();
    if (!manifest_path.empty()) manifest.write(manifest_path);
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "scenario failed: " << e.what() << "\n";
    return 1;
  }
}

int run_scenario_file(const std::string& config_path, const std::string& metrics_path,
                      const std::string& manifest_path) {
  std::ifstream in(config_path, std::ios::binary);
  if (!in) {
    std::cerr << "cannot open config " << config_path << "\n";
    return 2;
  }
  const std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return run_scenario(text, metrics_path, manifest_path);
}

}  // namespace advml
