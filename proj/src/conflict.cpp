#include "ballot/conflict.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <string>

#include "ballot/error.hpp"
#include "ballot/random.hpp"

namespace ballot {

double conflict_score(double g_a, double g_f, double gamma) {
  if (g_a * g_f < 0.0) return std::abs(g_a) + gamma * std::abs(g_f);
  return 0.0;
}

double conflict_threshold(std::span<const double> scores, double eta) {
  std::vector<double> positive;
  for (double s : scores) {
    if (s > 0.0) positive.push_back(s);
  }
  if (positive.empty()) return 0.0;
  std::sort(positive.begin(), positive.end());
  const auto rank = static_cast<std::size_t>(std::floor(eta * static_cast<double>(positive.size())));
  return positive[std::min(rank, positive.size() - 1)];
}

ConflictLedger::ConflictLedger(const ParamLayout& layout)
    : neurons_(layout.hidden_neurons()),
      counts_(neurons_.size(), 0),
      cum_scores_(neurons_.size(), 0.0) {}

void ConflictLedger::record_epoch(std::size_t epoch, std::span<const double> g_a,
                                  std::span<const double> g_f, double gamma, double eta) {
  if (g_a.size() != neurons_.size() || g_f.size() != neurons_.size()) {
    throw ConfigError("gradient aggregates cover " + std::to_string(g_a.size()) + "/" +
                      std::to_string(g_f.size()) + " neurons, ledger tracks " +
                      std::to_string(neurons_.size()));
  }
  if (!(gamma > 0.0)) throw ConfigError("gamma must be positive");
  if (!(eta > 0.0 && eta < 1.0)) throw ConfigError("eta must lie in (0, 1)");
  for (const auto& e : epochs_) {
    if (e.epoch == epoch) throw UsageError("epoch " + std::to_string(epoch) + " already recorded");
  }

  Epoch rec;
  rec.epoch = epoch;
  rec.g_a.assign(g_a.begin(), g_a.end());
  rec.g_f.assign(g_f.begin(), g_f.end());
  rec.scores.resize(neurons_.size());
  for (std::size_t i = 0; i < neurons_.size(); ++i) {
    rec.scores[i] = conflict_score(g_a[i], g_f[i], gamma);
  }
  rec.threshold = conflict_threshold(rec.scores, eta);
  for (std::size_t i = 0; i < neurons_.size(); ++i) {
    const double s = rec.scores[i];
    if (s > 0.0 && s >= rec.threshold) {
      ++counts_[i];
      cum_scores_[i] += s;
      ++rec.counted;
    }
  }
  epochs_.push_back(std::move(rec));
}

void ConflictLedger::set_totals(std::vector<std::size_t> counts, std::vector<double> cum_scores) {
  if (counts.size() != neurons_.size() || cum_scores.size() != neurons_.size()) {
    throw ConfigError("ledger totals do not match neuron count");
  }
  counts_ = std::move(counts);
  cum_scores_ = std::move(cum_scores);
}

std::vector<NeuronId> ConflictLedger::removal_order() const {
  std::vector<std::size_t> idx(neurons_.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (counts_[a] != counts_[b]) return counts_[a] > counts_[b];
    if (cum_scores_[a] != cum_scores_[b]) return cum_scores_[a] > cum_scores_[b];
    return neurons_[a] < neurons_[b];
  });
  std::vector<NeuronId> order;
  order.reserve(idx.size());
  for (std::size_t i : idx) order.push_back(neurons_[i]);
  return order;
}

std::size_t min_neuron_retained(const ParamLayout& layout) {
  std::size_t total = 0;
  std::size_t width_in = layout.spec(0).d_in;
  for (std::size_t l = 0; l < layout.layer_count(); ++l) {
    const bool hidden = l + 1 < layout.layer_count();
    const std::size_t width_out = hidden ? 1 : layout.spec(l).d_out;
    total += width_in * width_out + width_out;
    width_in = width_out;
  }
  return total;
}

namespace {

using TrimOrder = std::function<void(std::vector<std::size_t>&)>;

// Whole-neuron removal in `order` followed by exact trimming of the neuron
// whose removal overshoots the budget.
Mask remove_neurons(const ParamLayout& layout, std::span<const NeuronId> order, double omega,
                    const TrimOrder& sort_trim) {
  const std::size_t total = layout.total();
  const std::size_t target = retention_target(omega, total);
  Mask mask = Mask::identity(layout, omega);
  if (target == total) return mask;

  const std::size_t floor_count = min_neuron_retained(layout);
  if (target < floor_count) {
    const double min_ret = static_cast<double>(floor_count) / static_cast<double>(total);
    throw InfeasibleError("omega " + std::to_string(omega) + " is below the minimum achievable retention " +
                              std::to_string(min_ret) + " (one neuron per hidden layer)",
                          min_ret);
  }

  std::vector<std::size_t> alive;
  for (const auto& layer : mask.neuron_keep) alive.push_back(layer.size());
  std::size_t kept = total;

  for (const NeuronId& id : order) {
    if (alive[id.layer] <= 1) continue;
    std::vector<std::size_t> removed;
    for (std::size_t e : layout.neuron_entries(id)) {
      if (mask.weight_keep[e]) {
        mask.weight_keep[e] = false;
        removed.push_back(e);
      }
    }
    kept -= removed.size();
    mask.neuron_keep[id.layer][id.unit] = false;
    --alive[id.layer];
    if (kept > target) continue;

    if (kept < target) {
      for (std::size_t e : removed) mask.weight_keep[e] = true;
      kept += removed.size();
      mask.neuron_keep[id.layer][id.unit] = true;
      ++alive[id.layer];
      sort_trim(removed);
      for (std::size_t e : removed) {
        if (kept == target) break;
        mask.weight_keep[e] = false;
        --kept;
      }
    }
    break;
  }
  if (kept != target) throw Error("neuron removal ended at " + std::to_string(kept) + " entries, wanted " +
                                  std::to_string(target));
  return mask;
}

}  // namespace

Mask build_ballot_mask(const ConflictLedger& ledger, const NetworkParams& final_params,
                       double omega) {
  const ParamLayout layout = final_params.layout();
  if (ledger.epochs().empty()) throw UsageError("conflict ledger has no recorded epochs");
  if (ledger.neuron_count() != layout.hidden_neuron_count()) {
    throw ConfigError("ledger does not match the network's hidden neurons");
  }
  const auto order = ledger.removal_order();
  return remove_neurons(layout, order, omega, [&](std::vector<std::size_t>& entries) {
    std::sort(entries.begin(), entries.end(), [&](std::size_t a, std::size_t b) {
      const double va = std::abs(final_params.flat(a));
      const double vb = std::abs(final_params.flat(b));
      if (va != vb) return va < vb;
      return a < b;
    });
  });
}

Mask build_random_mask(const ParamLayout& layout, double omega, std::uint64_t seed) {
  Rng rng(derive_seed(seed, Stream::mask));
  std::vector<NeuronId> order = layout.hidden_neurons();
  rng.shuffle(std::span(order));
  return remove_neurons(layout, order, omega, [&](std::vector<std::size_t>& entries) {
    rng.shuffle(std::span(entries));
  });
}

std::vector<bool> top_k_by_magnitude(std::span<const double> values, std::size_t k) {
  if (k > values.size()) throw ConfigError("cannot keep " + std::to_string(k) + " of " + std::to_string(values.size()) + " entries");
  std::vector<std::size_t> idx(values.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                    [&](std::size_t a, std::size_t b) {
                      const double va = std::abs(values[a]);
                      const double vb = std::abs(values[b]);
                      if (va != vb) return va > vb;
                      return a < b;
                    });
  std::vector<bool> keep(values.size(), false);
  for (std::size_t i = 0; i < k; ++i) keep[idx[i]] = true;
  return keep;
}

Mask build_magnitude_mask(const NetworkParams& params, double omega) {
  const ParamLayout layout = params.layout();
  const std::size_t total = layout.total();
  const std::size_t target = retention_target(omega, total);
  const std::vector<double> values = params.flatten();

  std::vector<bool> reserved(total, false);
  const std::size_t out = layout.layer_count() - 1;
  for (std::size_t j = 0; j < layout.spec(out).d_out; ++j) reserved[layout.bias_index(out, j)] = true;
  for (std::size_t l = 0; l < out; ++l) {
    const std::size_t begin = layout.weight_offset(l);
    const std::size_t end = layout.bias_offset(l);
    std::size_t best = begin;
    for (std::size_t i = begin + 1; i < end; ++i) {
      if (std::abs(values[i]) > std::abs(values[best])) best = i;
    }
    reserved[best] = true;
  }
  const auto n_reserved = static_cast<std::size_t>(std::count(reserved.begin(), reserved.end(), true));
  if (target < n_reserved) {
    const double min_ret = static_cast<double>(n_reserved) / static_cast<double>(total);
    throw InfeasibleError("omega " + std::to_string(omega) + " leaves fewer entries than the " +
                              std::to_string(n_reserved) + " that magnitude pruning must keep",
                          min_ret);
  }

  std::vector<std::size_t> rest;
  std::vector<double> rest_values;
  rest.reserve(total - n_reserved);
  for (std::size_t i = 0; i < total; ++i) {
    if (reserved[i]) continue;
    rest.push_back(i);
    rest_values.push_back(values[i]);
  }
  // rest is in flat order, so tie-breaking by position there is tie-breaking
  // by flat index.
  const auto picked = top_k_by_magnitude(rest_values, target - n_reserved);

  Mask mask = Mask::identity(layout, omega);
  mask.weight_keep = reserved;
  for (std::size_t i = 0; i < rest.size(); ++i) {
    if (picked[i]) mask.weight_keep[rest[i]] = true;
  }

  for (std::size_t l = 0; l < out; ++l) {
    for (std::size_t u = 0; u < layout.spec(l).d_out; ++u) {
      bool any = false;
      for (std::size_t i = 0; i < layout.spec(l).d_in && !any; ++i) {
        any = mask.weight_keep[layout.weight_index(l, i, u)];
      }
      mask.neuron_keep[l][u] = any;
    }
  }
  return mask;
}

}  // namespace ballot
