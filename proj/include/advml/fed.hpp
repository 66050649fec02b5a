#pragma once

#include <optional>
#include <vector>

#include "advml/dataset.hpp"
#include "advml/defense.hpp"
#include "advml/nn.hpp"
#include "advml/prng.hpp"

namespace advml {

struct FedConfig {
  std::size_t num_clients = 4;
  std::size_t rounds = 10;
  std::size_t local_epochs = 1;
  std::size_t client_batch = 32;
  double client_lr = 0.05;
  std::vector<std::size_t> poisoned_clients;
  std::optional<DpConfig> dp;  // applied to every client batch gradient
  enum class Partition { Iid, ByClass } partition = Partition::Iid;
};

/// Stratified (iid) or class-sliced partition into num_clients datasets.
std::vector<Dataset> partition_clients(const Dataset& data, std::size_t num_clients,
                                       FedConfig::Partition partition, Prng& rng);

/// Copy of the global model trained local_epochs on the client data. Poisoned
/// clients add U[0,1) to every returned parameter entry.
MlpModel client_local_update(const MlpModel& global_model, const Dataset& client_data,
                             const FedConfig& cfg, bool poisoned, Prng& rng);

/// Unweighted elementwise mean. Computed as first + mean(deltas) so identical
/// inputs average to themselves exactly.
MlpModel fedavg_aggregate(const std::vector<MlpModel>& param_sets);

struct FedHistory {
  std::vector<double> accuracy;  // global model on the full dataset, per round
  std::vector<double> loss;
};

/// Rounds of broadcast -> local update -> aggregate with full participation.
FedHistory run_federated(const FedConfig& cfg, const Dataset& data, MlpModel& global_model,
                         Prng& rng);

}  // namespace advml
