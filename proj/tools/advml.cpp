// advml: seeded adversarial-ML scenario driver.
//
// Every subcommand assembles a scenario config and routes it through the same
// runner as `advml run --config FILE`, so CLI runs and config-file runs
// produce identical artifacts.

#include <chrono>
#include <cstdint>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "advml/io.hpp"
#include "advml/scenario.hpp"
#include "advml/serve.hpp"

namespace {

using nlohmann::json;

struct GlobalArgs {
  std::uint64_t seed = 0;
  std::string metrics;
  std::string manifest;
};

int dispatch(const std::string& scenario, const json& params, const GlobalArgs& g) {
  json config;
  config["scenario"] = scenario;
  config["seed"] = g.seed;
  config["params"] = params;
  return advml::run_scenario(config.dump(), g.metrics, g.manifest);
}

std::vector<std::size_t> parse_arch(const std::string& arch) {
  std::vector<std::size_t> dims;
  std::size_t pos = 0;
  while (pos < arch.size()) {
    std::size_t next = arch.find(',', pos);
    if (next == std::string::npos) next = arch.size();
    dims.push_back(static_cast<std::size_t>(std::stoull(arch.substr(pos, next - pos))));
    pos = next + 1;
  }
  return dims;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"advml: desk-scale adversarial ML attacks, defenses and serving"};
  app.require_subcommand(1);

  GlobalArgs g;
  app.add_option("--seed", g.seed, "top-level seed; all randomness derives from it");
  app.add_option("--metrics", g.metrics, "metrics CSV output path");
  app.add_option("--manifest", g.manifest, "run manifest JSON output path");

  // run --config FILE
  auto* run = app.add_subcommand("run", "execute a scenario config file");
  std::string config_path;
  run->add_option("--config", config_path, "scenario JSON config")->required();

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
  std::string gen_kind = "grid", gen_out, gen_pgm_dir;
  std::size_t gen_n = 200, gen_h = 8, gen_w = 8;
  int gen_classes = 4;
  double gen_noise = 0.15, gen_offset = 1.0, gen_std = 1.0;
  gen->add_option("--kind", gen_kind, "gaussians|grid");
  gen->add_option("--n-per-class", gen_n);
  gen->add_option("--classes", gen_classes);
  gen->add_option("--height", gen_h);
  gen->add_option("--width", gen_w);
  gen->add_option("--noise", gen_noise);
  gen->add_option("--offset", gen_offset);
  gen->add_option("--std", gen_std);
  gen->add_option("--out", gen_out)->required();
  gen->add_option("--pgm-dir", gen_pgm_dir, "dump sample rows as PGM images");

  // train
  auto* tr = app.add_subcommand("train", "train an MLP on a dataset file");
  std::string tr_data, tr_arch, tr_activation = "relu", tr_loss = "cross_entropy";
  std::string tr_optimizer = "sgd", tr_model_out, tr_digest;
  std::size_t tr_epochs = 30, tr_batch = 32;
  double tr_lr = 0.1, tr_test_fraction = 0.0, tr_beta = 1.0;
  tr->add_option("--data", tr_data)->required();
  tr->add_option("--arch", tr_arch, "comma dims, e.g. 64,32,4")->required();
  tr->add_option("--activation", tr_activation);
  tr->add_option("--loss", tr_loss, "cross_entropy|mse|smooth_l1|mae_onehot|bce");
  tr->add_option("--beta", tr_beta, "smooth_l1 transition point");
  tr->add_option("--optimizer", tr_optimizer, "sgd|adam");
  tr->add_option("--lr", tr_lr);
  tr->add_option("--epochs", tr_epochs);
  tr->add_option("--batch", tr_batch);
  tr->add_option("--test-fraction", tr_test_fraction);
  tr->add_option("--expected-digest", tr_digest, "abort unless the data hashes to this");
  tr->add_option("--out", tr_model_out, "checkpoint path");

  // attack
  auto* at = app.add_subcommand("attack", "evasion attack against a checkpoint");
  std::string at_method = "fgsm", at_model, at_data, at_out;
  double at_eps = 0.1, at_alpha = 0.01;
  std::size_t at_iters = 40;
  at->add_option("--method", at_method, "fgsm|pgd");
  at->add_option("--eps", at_eps);
  at->add_option("--alpha", at_alpha);
  at->add_option("--iters", at_iters);
  at->add_option("--model", at_model)->required();
  at->add_option("--data", at_data)->required();
  at->add_option("--adv-out", at_out, "write the adversarial dataset");

  // poison
  auto* po = app.add_subcommand("poison", "corrupt a training set");
  std::string po_method = "flip", po_data, po_out, po_rule = "binary_swap";
  double po_fraction = 0.1, po_trigger_value = 1.0, po_noise_scale = 0.5;
  int po_target = 0, po_a = 0, po_b = 1;
  std::size_t po_trigger_size = 3, po_count = 10;
  po->add_option("--method", po_method, "flip|noiseflip|backdoor");
  po->add_option("--fraction", po_fraction);
  po->add_option("--rule", po_rule, "binary_swap|pair");
  po->add_option("--a", po_a);
  po->add_option("--b", po_b);
  po->add_option("--count", po_count);
  po->add_option("--noise-scale", po_noise_scale);
  po->add_option("--target", po_target);
  po->add_option("--trigger-size", po_trigger_size);
  po->add_option("--trigger-value", po_trigger_value);
  po->add_option("--data", po_data)->required();
  po->add_option("--out", po_out)->required();

  // defend
  auto* de = app.add_subcommand("defend", "training/data-side defenses");
  std::string de_method, de_data, de_arch, de_out, de_model_out, de_mode = "std_k";
  double de_eps = 0.1, de_k = 3.0, de_threshold = 1.5, de_lr = 0.1;
  double de_clip = 1.0, de_noise = 0.1, de_sigma = 1.0, de_test_fraction = 0.25;
  std::size_t de_epochs = 30, de_batch = 32, de_kernel = 5;
  std::size_t de_folds = 5, de_flag_threshold = 3, de_repeats = 3;
  de->add_option("--method", de_method, "advtrain|sanitize|dp|blur|audit|consensus|relabel")
      ->required();
  de->add_option("--data", de_data)->required();
  de->add_option("--arch", de_arch);
  de->add_option("--eps", de_eps);
  de->add_option("--mode", de_mode, "std_k|centroid");
  de->add_option("--k", de_k);
  de->add_option("--threshold", de_threshold);
  de->add_option("--clip", de_clip);
  de->add_option("--noise", de_noise);
  de->add_option("--kernel", de_kernel);
  de->add_option("--sigma", de_sigma);
  de->add_option("--folds", de_folds);
  de->add_option("--flag-threshold", de_flag_threshold);
  de->add_option("--repeats", de_repeats);
  de->add_option("--epochs", de_epochs);
  de->add_option("--batch", de_batch);
  de->add_option("--lr", de_lr);
  de->add_option("--test-fraction", de_test_fraction);
  de->add_option("--out", de_out);
  de->add_option("--model-out", de_model_out);

  // steal
  auto* st = app.add_subcommand("steal", "black-box extraction of a target");
  std::string st_target_model, st_target_url, st_arch, st_model_out, st_token = "secure_token_123";
  std::size_t st_probes = 2000, st_heldout = 500, st_epochs = 30, st_batch = 32;
  int st_port = 8080;
  double st_lo = -3.0, st_hi = 3.0, st_lr = 0.1;
  st->add_option("--target-model", st_target_model, "local checkpoint target");
  st->add_option("--target-url", st_target_url, "remote host (with --target-port)");
  st->add_option("--target-port", st_port);
  st->add_option("--token", st_token);
  st->add_option("--probes", st_probes);
  st->add_option("--heldout", st_heldout);
  st->add_option("--probe-lo", st_lo);
  st->add_option("--probe-hi", st_hi);
  st->add_option("--surrogate-arch", st_arch)->required();
  st->add_option("--epochs", st_epochs);
  st->add_option("--batch", st_batch);
  st->add_option("--lr", st_lr);
  st->add_option("--model-out", st_model_out);

  // federate
  auto* fe = app.add_subcommand("federate", "federated averaging simulation");
  std::string fe_data, fe_arch, fe_poisoned, fe_partition = "iid", fe_model_out;
  std::size_t fe_clients = 4, fe_rounds = 10, fe_local_epochs = 1, fe_batch = 32;
  double fe_lr = 0.05, fe_dp_clip = 0.0, fe_dp_noise = 0.0;
  fe->add_option("--data", fe_data)->required();
  fe->add_option("--arch", fe_arch)->required();
  fe->add_option("--clients", fe_clients);
  fe->add_option("--rounds", fe_rounds);
  fe->add_option("--local-epochs", fe_local_epochs);
  fe->add_option("--batch", fe_batch);
  fe->add_option("--lr", fe_lr);
  fe->add_option("--poisoned", fe_poisoned, "comma client indices, e.g. 0,2");
  fe->add_option("--dp-clip", fe_dp_clip);
  fe->add_option("--dp-noise", fe_dp_noise);
  fe->add_option("--partition", fe_partition, "iid|by_class");
  fe->add_option("--model-out", fe_model_out);

  // rep
  auto* re = app.add_subcommand("rep", "representation-level techniques");
  std::string re_task, re_data, re_arch, re_teacher, re_model_out;
  std::size_t re_epochs = 30, re_batch = 32, re_hidden = 32, re_bottleneck = 16;
  double re_lr = 0.1, re_temperature = 3.0, re_margin = 1.0, re_threshold = 0.02;
  re->add_option("--task", re_task, "distill|contrastive|rotation|autoencoder")->required();
  re->add_option("--data", re_data)->required();
  re->add_option("--arch", re_arch);
  re->add_option("--teacher", re_teacher);
  re->add_option("--temperature", re_temperature);
  re->add_option("--margin", re_margin);
  re->add_option("--hidden", re_hidden);
  re->add_option("--bottleneck", re_bottleneck);
  re->add_option("--threshold", re_threshold);
  re->add_option("--epochs", re_epochs);
  re->add_option("--batch", re_batch);
  re->add_option("--lr", re_lr);
  re->add_option("--model-out", re_model_out);

  // serve
  auto* se = app.add_subcommand("serve", "guarded prediction endpoint (blocks)");
  std::string se_model, se_token = "secure_token_123", se_host = "127.0.0.1";
  int se_port = 8080;
  double se_noise = 0.05, se_window = 60.0;
  std::size_t se_rate_max = 5;
  int se_top_k = -1;
  se->add_option("--model", se_model)->required();
  se->add_option("--host", se_host);
  se->add_option("--port", se_port);
  se->add_option("--token", se_token);
  se->add_option("--top-k", se_top_k, "truncate responses; -1 = full distribution");
  se->add_option("--noise", se_noise);
  se->add_option("--rate-max", se_rate_max);
  se->add_option("--rate-window", se_window, "seconds");

  // audit-hash
  auto* ah = app.add_subcommand("audit-hash", "print a dataset's canonical digest");
  std::string ah_data, ah_expected;
  ah->add_option("--data", ah_data)->required();
  ah->add_option("--expected", ah_expected, "fail unless the digest matches");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return advml::run_scenario_file(config_path, g.metrics, g.manifest);

    if (gen->parsed()) {
      json p{{"kind", gen_kind}, {"n_per_class", gen_n}, {"classes", gen_classes},
             {"height", gen_h}, {"width", gen_w},        {"noise_std", gen_noise},
             {"offset", gen_offset}, {"std", gen_std},   {"out", gen_out}};
      if (!gen_pgm_dir.empty()) p["pgm_dir"] = gen_pgm_dir;
      return dispatch("gen-data", p, g);
    }
    if (tr->parsed()) {
      json p{{"data", tr_data},     {"arch", parse_arch(tr_arch)}, {"activation", tr_activation},
             {"loss", tr_loss},     {"beta", tr_beta},             {"optimizer", tr_optimizer},
             {"lr", tr_lr},         {"epochs", tr_epochs},         {"batch", tr_batch},
             {"test_fraction", tr_test_fraction}};
      if (!tr_digest.empty()) p["expected_digest"] = tr_digest;
      if (!tr_model_out.empty()) p["model_out"] = tr_model_out;
      return dispatch("train", p, g);
    }
    if (at->parsed()) {
      json p{{"method", at_method}, {"model", at_model}, {"data", at_data},
             {"eps", at_eps},       {"alpha", at_alpha}, {"iters", at_iters}};
      if (!at_out.empty()) p["adv_out"] = at_out;
      return dispatch("attack", p, g);
    }
    if (po->parsed()) {
      json p{{"method", po_method},          {"data", po_data},
             {"out", po_out},                {"fraction", po_fraction},
             {"rule", po_rule},              {"a", po_a},
             {"b", po_b},                    {"count", po_count},
             {"noise_scale", po_noise_scale}, {"target", po_target},
             {"trigger_size", po_trigger_size}, {"trigger_value", po_trigger_value}};
      return dispatch("poison", p, g);
    }
    if (de->parsed()) {
      json p{{"method", de_method},   {"data", de_data},       {"eps", de_eps},
             {"mode", de_mode},       {"k", de_k},             {"threshold", de_threshold},
             {"clip", de_clip},       {"noise", de_noise},     {"kernel", de_kernel},
             {"sigma", de_sigma},     {"folds", de_folds},     {"flag_threshold", de_flag_threshold},
             {"repeats", de_repeats}, {"epochs", de_epochs},   {"batch", de_batch},
             {"lr", de_lr},           {"test_fraction", de_test_fraction}};
      if (!de_arch.empty()) p["arch"] = parse_arch(de_arch);
      if (!de_out.empty()) p["out"] = de_out;
      if (!de_model_out.empty()) p["model_out"] = de_model_out;
      return dispatch("defend", p, g);
    }
    if (st->parsed()) {
      json p{{"probes", st_probes},   {"heldout", st_heldout}, {"probe_lo", st_lo},
             {"probe_hi", st_hi},     {"epochs", st_epochs},   {"batch", st_batch},
             {"lr", st_lr},           {"arch", parse_arch(st_arch)}, {"token", st_token}};
      if (!st_target_model.empty()) p["target_model"] = st_target_model;
      if (!st_target_url.empty()) {
        p["target_url"] = st_target_url;
        p["target_port"] = st_port;
      }
      if (!st_model_out.empty()) p["model_out"] = st_model_out;
      return dispatch("steal", p, g);
    }
    if (fe->parsed()) {
      json p{{"data", fe_data},   {"arch", parse_arch(fe_arch)}, {"clients", fe_clients},
             {"rounds", fe_rounds}, {"local_epochs", fe_local_epochs}, {"batch", fe_batch},
             {"lr", fe_lr},       {"partition", fe_partition}};
      if (!fe_poisoned.empty()) p["poisoned"] = parse_arch(fe_poisoned);
      if (fe_dp_clip > 0.0 || fe_dp_noise > 0.0) {
        p["dp_clip"] = fe_dp_clip > 0.0 ? fe_dp_clip : 1.0;
        p["dp_noise"] = fe_dp_noise;
      }
      if (!fe_model_out.empty()) p["model_out"] = fe_model_out;
      return dispatch("federate", p, g);
    }
    if (re->parsed()) {
      json p{{"task", re_task},     {"data", re_data},           {"temperature", re_temperature},
             {"margin", re_margin}, {"hidden", re_hidden},       {"bottleneck", re_bottleneck},
             {"threshold", re_threshold}, {"epochs", re_epochs}, {"batch", re_batch},
             {"lr", re_lr}};
      if (!re_arch.empty()) p["arch"] = parse_arch(re_arch);
      if (!re_teacher.empty()) p["teacher"] = re_teacher;
      if (!re_model_out.empty()) p["model_out"] = re_model_out;
      return dispatch("rep", p, g);
    }
    if (se->parsed()) {
      advml::ServeConfig cfg;
      cfg.token = se_token;
      cfg.noise_factor = se_noise;
      cfg.rate_max = se_rate_max;
      cfg.rate_window = se_window;
      cfg.host = se_host;
      cfg.port = se_port;
      if (se_top_k >= 0) cfg.top_k = static_cast<std::size_t>(se_top_k);
      advml::PredictServer server(advml::load_checkpoint(se_model), cfg);
      server.start();
      std::cout << "serving on " << se_host << ":" << server.port() << " (ctrl-c to stop)\n";
      for (;;) std::this_thread::sleep_for(std::chrono::seconds(3600));
    }
    if (ah->parsed()) {
      json p{{"data", ah_data}};
      if (!ah_expected.empty()) p["expected"] = ah_expected;
      return dispatch("audit-hash", p, g);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
