#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "ballot/layers.hpp"
#include "ballot/mask.hpp"
#include "ballot/model.hpp"

namespace ballot {

// Conflict score of one neuron for one epoch. The accuracy and fairness
// gradients conflict only when they pull in opposite directions; the score
// is then |g_a| + gamma * |g_f|, otherwise 0.
double conflict_score(double g_a, double g_f, double gamma);

// Threshold over one epoch's scores: among the m strictly positive scores
// sorted ascending, the one at 0-based rank floor(eta * m). Neurons scoring
// at or above it (and above 0) are counted as conflicting, so roughly the
// top (1 - eta) share is counted. Returns 0 when no score is positive.
double conflict_threshold(std::span<const double> scores, double eta);

// Per-neuron record of accuracy/fairness gradient aggregates across dense
// training. Neurons are indexed in ParamLayout::hidden_neurons() order.
class ConflictLedger {
 public:
  struct Epoch {
    std::size_t epoch = 0;
    std::vector<double> g_a;
    std::vector<double> g_f;
    std::vector<double> scores;
    double threshold = 0.0;
    std::size_t counted = 0;
  };

  ConflictLedger() = default;
  explicit ConflictLedger(const ParamLayout& layout);

  // Scores one epoch and bumps count/cum_score of the neurons above the
  // eta threshold. Throws UsageError if the epoch was already recorded.
  void record_epoch(std::size_t epoch, std::span<const double> g_a, std::span<const double> g_f,
                    double gamma, double eta);

  std::size_t neuron_count() const noexcept { return neurons_.size(); }
  const std::vector<NeuronId>& neurons() const noexcept { return neurons_; }
  const std::vector<Epoch>& epochs() const noexcept { return epochs_; }
  const std::vector<std::size_t>& counts() const noexcept { return counts_; }
  const std::vector<double>& cum_scores() const noexcept { return cum_scores_; }

  // Direct setters for replaying stored ledgers and for tests.
  void set_totals(std::vector<std::size_t> counts, std::vector<double> cum_scores);

  // Hidden neurons ordered for removal: count descending, then cum_score
  // descending, then (layer, unit) ascending.
  std::vector<NeuronId> removal_order() const;

 private:
  std::vector<NeuronId> neurons_;
  std::vector<Epoch> epochs_;
  std::vector<std::size_t> counts_;
  std::vector<double> cum_scores_;
};

// Smallest entry count any neuron-level builder can reach: one neuron left in
// every hidden layer.
std::size_t min_neuron_retained(const ParamLayout& layout);

// Removes whole neurons in conflict order until the entry count first drops
// to floor(omega * |theta|) or below, then trades the overshooting removal
// for entry-level trimming of that neuron (smallest |final weight| first) so
// the budget is hit exactly. No hidden layer is ever emptied.
Mask build_ballot_mask(const ConflictLedger& ledger, const NetworkParams& final_params,
                       double omega);

// keep[i] is true for the k entries of largest |value| (ties: lower index).
std::vector<bool> top_k_by_magnitude(std::span<const double> values, std::size_t k);

// Global magnitude pruning: keep the floor(omega * |theta|) largest |value|
// entries (ties: lower flat index first). Output biases and the largest
// incoming weight of every hidden layer are always kept; with those present
// in the plain top-k the result is exactly the plain top-k.
Mask build_magnitude_mask(const NetworkParams& params, double omega);

// Same as the ballot builder with a seed-determined uniform removal order and
// a seed-determined trimming order.
Mask build_random_mask(const ParamLayout& layout, double omega, std::uint64_t seed);

}  // namespace ballot
