#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ballot/conflict.hpp"
#include "ballot/dataset.hpp"
#include "ballot/mask.hpp"
#include "ballot/metrics.hpp"
#include "ballot/model.hpp"

namespace ballot {

enum class PruneMethod { ballot, lth, magnitude, random };

std::string to_string(PruneMethod m);
PruneMethod prune_method_from_string(const std::string& name);

// Which split supplies the previous-epoch per-class accuracy behind the
// fairness-loss class weights.
enum class WeightSplit { train, test };

struct TrainConfig {
  std::vector<std::size_t> hidden{64, 64};
  std::size_t epochs = 30;
  double lr0 = 0.1;
  std::vector<double> milestone_fractions{0.4, 0.6, 0.8};
  std::size_t batch_size = 32;
  double omega = 0.05;
  double gamma = 10.0;
  double eta = 0.95;
  std::size_t rewind_epoch = 10;
  double epsilon = 0.05;
  double delta = 0.0;
  std::size_t max_refine_rounds = 3;
  WeightSplit class_weight_split = WeightSplit::train;
  std::uint64_t seed = 0;

  // Throws ConfigError naming the offending field.
  void validate() const;
};

// lr0 divided by 10 for every milestone floor(fraction * epochs) already
// reached by `epoch` (0-based).
double lr_at(std::size_t epoch, const TrainConfig& config);

// Everything the dense run leaves behind for mask building and rewinding.
struct RunArtifacts {
  NetworkParams theta0;
  NetworkParams theta_k;
  NetworkParams theta_final;
  ConflictLedger ledger;
  EvalReport dense_report;
  double wall_time_s = 0.0;
};

// One trained candidate inside the refinement loop.
struct Candidate {
  std::size_t round = 0;
  EvalReport report;
  NetworkParams params;
  bool accuracy_ok = false;  // dense accuracy - accuracy <= epsilon
  bool fairness_ok = false;  // cwv bias delta <= delta
};

struct RefineResult {
  NetworkParams params;
  EvalReport report;
  std::size_t rounds_used = 0;
  std::size_t selected = 0;
  std::vector<Candidate> candidates;
};

struct PruneResult {
  PruneMethod method = PruneMethod::ballot;
  Mask mask;
  NetworkParams final_params;
  EvalReport pruned_report;
  EvalReport dense_report;
  std::size_t refine_rounds_used = 0;
  double achieved_retention = 0.0;
  double wall_time_s = 0.0;
  std::vector<Candidate> candidates;
};

// Trains `start` under `mask` for `epochs` epochs with plain SGD on the
// accuracy loss. Minibatch order comes from shuffle stream `stream` of the
// config seed; lr(epoch) gives the learning rate for each epoch.
NetworkParams train_masked(NetworkParams start, const Mask* mask, const Dataset& train,
                           const TrainConfig& config, std::uint64_t stream, std::size_t epochs,
                           const std::function<double(std::size_t)>& lr);

// Dense training from a fresh initialization, recording per-neuron accuracy
// and fairness gradient aggregates for every epoch and snapshotting the
// weights at epochs 0, k and E.
RunArtifacts train_dense(const TrainConfig& config, const DataSplit& data);

// Weights a refinement round starts from: theta0 * m for round 0, theta_k * m
// afterwards.
NetworkParams rewind_start(const RunArtifacts& artifacts, const Mask& mask, std::size_t round);

// Index of the preferred candidate: lowest CWV among those within epsilon of
// dense accuracy, else the most accurate one. Earlier rounds win ties.
std::size_t select_candidate(const std::vector<Candidate>& candidates);

RefineResult refine(const Mask& mask, const RunArtifacts& artifacts, const TrainConfig& config,
                    const DataSplit& data);

PruneResult fix_model(const TrainConfig& config, const DataSplit& data);
PruneResult fix_model(const TrainConfig& config, const DataSplit& data,
                      const RunArtifacts& artifacts);

// Fine-tune budget of the magnitude baseline: max(1, floor(E / 5)).
std::size_t magnitude_finetune_epochs(std::size_t epochs);

PruneResult run_baseline(PruneMethod method, const TrainConfig& config, const DataSplit& data);
PruneResult run_baseline(PruneMethod method, const TrainConfig& config, const DataSplit& data,
                         const RunArtifacts& artifacts);

// Dispatches to fix_model or run_baseline.
PruneResult run_method(PruneMethod method, const TrainConfig& config, const DataSplit& data,
                       const RunArtifacts& artifacts);

}  // namespace ballot
