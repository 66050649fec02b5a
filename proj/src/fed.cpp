#include "advml/fed.hpp"

#include <algorithm>
#include <stdexcept>

namespace advml {

std::vector<Dataset> partition_clients(const Dataset& data, std::size_t num_clients,
                                       FedConfig::Partition partition, Prng& rng) {
  if (num_clients == 0) throw std::invalid_argument("partition_clients: need at least one client");

  std::vector<std::vector<std::size_t>> assignment(num_clients);
  if (partition == FedConfig::Partition::Iid) {
    // per class, shuffle then deal round-robin so every client sees every class
    std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(data.num_classes));
    for (std::size_t i = 0; i < data.size(); ++i)
      by_class[static_cast<std::size_t>(data.labels[i])].push_back(i);
    std::size_t next = 0;
    for (auto& members : by_class) {
      rng.shuffle(members);
      for (std::size_t i : members) assignment[next++ % num_clients].push_back(i);
    }
  } else {
    for (std::size_t i = 0; i < data.size(); ++i)
      assignment[static_cast<std::size_t>(data.labels[i]) % num_clients].push_back(i);
  }

  std::vector<Dataset> clients;
  for (auto& idx : assignment) {
    if (idx.empty())
      throw std::invalid_argument("partition_clients: a client would receive no data");
    std::sort(idx.begin(), idx.end());
    clients.push_back(take(data, idx));
  }
  return clients;
}

MlpModel client_local_update(const MlpModel& global_model, const Dataset& client_data,
                             const FedConfig& cfg, bool poisoned, Prng& rng) {
  if (client_data.size() == 0) throw std::invalid_argument("client_local_update: empty client data");

  MlpModel local = global_model;
  TrainConfig tc;
  tc.epochs = cfg.local_epochs;
  tc.batch_size = cfg.client_batch;
  tc.optimizer = SgdConfig{cfg.client_lr};
  tc.seed = rng.next_u64();
  GradHook hook = nullptr;
  if (cfg.dp) {
    const DpConfig dp = *cfg.dp;
    hook = [dp](GradientBundle& g, Prng& hook_rng) { g = dp_clip_noise(std::move(g), dp, hook_rng); };
  }
  train(local, client_data, tc, hook);

  if (poisoned) {
    for (DenseLayer& layer : local.layers) {
      for (double& v : layer.w.data()) v += rng.uniform();
      for (double& v : layer.b.data()) v += rng.uniform();
    }
  }
  return local;
}

MlpModel fedavg_aggregate(const std::vector<MlpModel>& param_sets) {
  if (param_sets.empty()) throw std::invalid_argument("fedavg_aggregate: empty set");
  const MlpModel& first = param_sets.front();
  for (const MlpModel& m : param_sets) {
    if (m.layers.size() != first.layers.size())
      throw std::invalid_argument("fedavg_aggregate: layer count mismatch");
    for (std::size_t li = 0; li < m.layers.size(); ++li)
      if (!m.layers[li].w.same_shape(first.layers[li].w) ||
          !m.layers[li].b.same_shape(first.layers[li].b))
        throw std::invalid_argument("fedavg_aggregate: parameter shape mismatch");
  }

  const double n = static_cast<double>(param_sets.size());
  MlpModel out = first;
  for (std::size_t li = 0; li < out.layers.size(); ++li) {
    const auto average = [&](Matrix& dst, auto layer_matrix) {
      for (std::size_t i = 0; i < dst.size(); ++i) {
        double delta_sum = 0.0;
        for (std::size_t k = 1; k < param_sets.size(); ++k)
          delta_sum += layer_matrix(param_sets[k], li).data()[i] - dst.data()[i];
        dst.data()[i] += delta_sum / n;
      }
    };
    average(out.layers[li].w, [](const MlpModel& m, std::size_t l) -> const Matrix& {
      return m.layers[l].w;
    });
    average(out.layers[li].b, [](const MlpModel& m, std::size_t l) -> const Matrix& {
      return m.layers[l].b;
    });
  }
  return out;
}

FedHistory run_federated(const FedConfig& cfg, const Dataset& data, MlpModel& global_model,
                         Prng& rng) {
  if (cfg.rounds == 0) throw std::invalid_argument("run_federated: rounds must be >= 1");

  Prng partition_rng = rng.child("partition");
  const std::vector<Dataset> clients =
      partition_clients(data, cfg.num_clients, cfg.partition, partition_rng);
  for (std::size_t p : cfg.poisoned_clients)
    if (p >= cfg.num_clients)
      throw std::invalid_argument("run_federated: poisoned client index out of range");

  FedHistory history;
  for (std::size_t round = 0; round < cfg.rounds; ++round) {
    std::vector<MlpModel> updates;
    for (std::size_t c = 0; c < cfg.num_clients; ++c) {
      const bool poisoned = std::find(cfg.poisoned_clients.begin(), cfg.poisoned_clients.end(),
                                      c) != cfg.poisoned_clients.end();
      Prng client_rng = rng.child("round", round).child("client", c);
      updates.push_back(client_local_update(global_model, clients[c], cfg, poisoned, client_rng));
    }
    global_model = fedavg_aggregate(updates);
    const EvalMetrics metrics = evaluate(global_model, data);
    history.accuracy.push_back(metrics.accuracy);
    history.loss.push_back(metrics.mean_loss);
  }
  return history;
}

}  // namespace advml
