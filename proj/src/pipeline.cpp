#include "ballot/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <optional>

#include "ballot/error.hpp"
#include "ballot/random.hpp"

namespace ballot {

std::string to_string(PruneMethod m) {
  switch (m) {
    case PruneMethod::ballot: return "ballot";
    case PruneMethod::lth: return "lth";
    case PruneMethod::magnitude: return "magnitude";
    case PruneMethod::random: return "random";
  }
  return "?";
}

PruneMethod prune_method_from_string(const std::string& name) {
  if (name == "ballot") return PruneMethod::ballot;
  if (name == "lth") return PruneMethod::lth;
  if (name == "magnitude") return PruneMethod::magnitude;
  if (name == "random") return PruneMethod::random;
  throw ConfigError("unknown prune method '" + name + "' (expected ballot|lth|magnitude|random)");
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw ConfigError(field + ": " + why);
  };
  if (hidden.empty()) fail("model.hidden", "needs at least one hidden layer");
  for (std::size_t h : hidden) {
    if (h == 0) fail("model.hidden", "layer widths must be positive");
  }
  if (epochs == 0) fail("train.epochs", "must be positive");
  if (!(lr0 > 0.0) || !std::isfinite(lr0)) fail("train.lr0", "must be positive");
  if (batch_size == 0) fail("train.batch", "must be positive");
  for (double f : milestone_fractions) {
    if (!(f > 0.0 && f < 1.0)) fail("train.milestones", "fractions must lie in (0, 1)");
  }
  if (!(omega > 0.0 && omega <= 1.0)) fail("prune.omega", "must lie in (0, 1]");
  if (!(gamma > 0.0) || !std::isfinite(gamma)) fail("prune.gamma", "must be positive");
  if (!(eta > 0.0 && eta < 1.0)) fail("prune.eta", "must lie in (0, 1)");
  if (rewind_epoch >= epochs) {
    fail("refine.rewind_epoch", "must be smaller than train.epochs (" + std::to_string(epochs) + ")");
  }
  if (!(epsilon >= 0.0)) fail("refine.epsilon", "must be non-negative");
  if (!std::isfinite(delta)) fail("refine.delta", "must be finite");
  if (max_refine_rounds == 0) fail("refine.max_rounds", "must be positive");
}

double lr_at(std::size_t epoch, const TrainConfig& config) {
  double divisor = 1.0;
  for (double f : config.milestone_fractions) {
    const auto milestone =
        static_cast<std::size_t>(std::floor(f * static_cast<double>(config.epochs)));
    if (epoch >= milestone) divisor *= 10.0;
  }
  return config.lr0 / divisor;
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Called after the accuracy-loss backward of each minibatch with the trace
// (so extra losses can be attached), the batch targets and the gradients.
using BatchHook = std::function<void(ForwardTrace&, const Tensor&, const NetworkGrads&)>;

void run_epoch(NetworkParams& params, const Mask* mask, const Dataset& train,
               std::size_t batch_size, double lr, Rng& rng, const BatchHook& hook) {
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(std::span(order));
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t end = std::min(order.size(), start + batch_size);
    const std::span<const std::size_t> rows(order.data() + start, end - start);
    const Tensor targets = train.one_hot(rows);
    ForwardTrace trace = trace_forward(params, mask, train.subset(rows).features);
    const ad::NodeId loss = trace.tape.softmax_cross_entropy(trace.logits, targets);
    const NetworkGrads grads = collect_grads(trace, trace.tape.backward(loss));
    if (hook) hook(trace, targets, grads);
    sgd_step(params, grads, lr, mask);
  }
}

NumericalError at_epoch(std::size_t epoch, const NumericalError& e) {
  return NumericalError("epoch " + std::to_string(epoch) + ": " + e.what());
}

std::vector<double> flatten_preacts(const std::vector<std::vector<double>>& per_layer) {
  std::vector<double> out;
  for (const auto& layer : per_layer) out.insert(out.end(), layer.begin(), layer.end());
  return out;
}

}  // namespace

NetworkParams train_masked(NetworkParams params, const Mask* mask, const Dataset& train,
                           const TrainConfig& config, std::uint64_t stream, std::size_t epochs,
                           const std::function<double(std::size_t)>& lr) {
  Rng rng(derive_seed(config.seed, Stream::shuffle, stream));
  for (std::size_t e = 0; e < epochs; ++e) {
    try {
      run_epoch(params, mask, train, config.batch_size, lr(e), rng, {});
    } catch (const NumericalError& err) {
      throw at_epoch(e + 1, err);
    }
    ++params.epoch_tag;
  }
  return params;
}

RunArtifacts train_dense(const TrainConfig& config, const DataSplit& data) {
  config.validate();
  data.train.validate();
  data.test.validate();
  const auto started = Clock::now();

  const auto specs = make_mlp_specs(data.train.dim(), config.hidden, data.train.num_classes);
  RunArtifacts art;
  NetworkParams params = init_network(specs, config.seed);
  art.theta0 = params;
  art.theta_k = params;
  art.ledger = ConflictLedger(params.layout());

  const Dataset& weight_data =
      config.class_weight_split == WeightSplit::train ? data.train : data.test;
  ClassWeights weights = ClassWeights::uniform(data.train.num_classes);
  const std::size_t neurons = art.ledger.neuron_count();
  Rng rng(derive_seed(config.seed, Stream::shuffle, 0));

  for (std::size_t e = 0; e < config.epochs; ++e) {
    std::vector<double> g_a(neurons, 0.0);
    std::vector<double> g_f(neurons, 0.0);
    auto record = [&](ForwardTrace& trace, const Tensor& targets, const NetworkGrads& acc_grads) {
      const ad::NodeId fair_loss =
          trace.tape.weighted_softmax_cross_entropy(trace.logits, targets, weights.w);
      const NetworkGrads fair_grads = collect_grads(trace, trace.tape.backward(fair_loss));
      const auto a = flatten_preacts(acc_grads.preact);
      const auto f = flatten_preacts(fair_grads.preact);
      for (std::size_t i = 0; i < neurons; ++i) {
        g_a[i] += a[i];
        g_f[i] += f[i];
      }
    };
    try {
      run_epoch(params, nullptr, data.train, config.batch_size, lr_at(e, config), rng, record);
      params.epoch_tag = e + 1;
      art.ledger.record_epoch(e + 1, g_a, g_f, config.gamma, config.eta);
      weights = update_class_weights(evaluate(params, nullptr, weight_data), static_cast<long>(e + 1));
    } catch (const NumericalError& err) {
      throw at_epoch(e + 1, err);
    }
    if (e + 1 == config.rewind_epoch) art.theta_k = params;
  }

  art.theta_final = params;
  art.dense_report = evaluate(params, nullptr, data.test);
  art.wall_time_s = seconds_since(started);
  return art;
}

NetworkParams rewind_start(const RunArtifacts& artifacts, const Mask& mask, std::size_t round) {
  return apply_mask(round == 0 ? artifacts.theta0 : artifacts.theta_k, mask);
}

std::size_t select_candidate(const std::vector<Candidate>& candidates) {
  if (candidates.empty()) throw UsageError("no candidates to select from");
  std::optional<std::size_t> best_fair;
  std::size_t best_acc = 0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto& c = candidates[i];
    if (c.accuracy_ok && (!best_fair || c.report.cwv < candidates[*best_fair].report.cwv)) {
      best_fair = i;
    }
    if (c.report.accuracy > candidates[best_acc].report.accuracy) best_acc = i;
  }
  return best_fair.value_or(best_acc);
}

RefineResult refine(const Mask& mask, const RunArtifacts& artifacts, const TrainConfig& config,
                    const DataSplit& data) {
  validate_mask(mask, artifacts.theta0.layout());
  const auto schedule = [&](std::size_t e) { return lr_at(e, config); };

  RefineResult out;
  auto train_round = [&](std::size_t round) -> const Candidate& {
    NetworkParams params = train_masked(rewind_start(artifacts, mask, round), &mask, data.train,
                                        config, round, config.epochs, schedule);
    Candidate c;
    c.round = round;
    c.report = evaluate(params, &mask, data.test);
    c.params = std::move(params);
    c.accuracy_ok = artifacts.dense_report.accuracy - c.report.accuracy <= config.epsilon;
    c.fairness_ok = bias_delta(c.report, artifacts.dense_report, FairnessMetric::cwv) <= config.delta;
    out.candidates.push_back(std::move(c));
    return out.candidates.back();
  };

  const Candidate& first = train_round(0);
  std::size_t best = 0;
  if (!(first.accuracy_ok && first.fairness_ok)) {
    for (std::size_t round = 1; round <= config.max_refine_rounds; ++round) {
      const Candidate& c = train_round(round);
      out.rounds_used = round;
      const bool accepted = c.accuracy_ok && c.fairness_ok;
      const std::size_t next = select_candidate(out.candidates);
      const bool improved = next != best;
      best = next;
      if (accepted || !improved) break;
    }
  }

  out.selected = best;
  out.params = out.candidates[best].params;
  out.report = out.candidates[best].report;
  return out;
}

namespace {

PruneResult finish(PruneMethod method, const Mask& mask, NetworkParams params, EvalReport report,
                   const RunArtifacts& artifacts, Clock::time_point started) {
  PruneResult r;
  r.method = method;
  r.mask = mask;
  r.achieved_retention = sparsity(mask, params.layout());
  r.final_params = std::move(params);
  r.pruned_report = std::move(report);
  r.dense_report = artifacts.dense_report;
  r.wall_time_s = seconds_since(started);
  return r;
}

}  // namespace

PruneResult fix_model(const TrainConfig& config, const DataSplit& data) {
  return fix_model(config, data, train_dense(config, data));
}

PruneResult fix_model(const TrainConfig& config, const DataSplit& data,
                      const RunArtifacts& artifacts) {
  config.validate();
  const auto started = Clock::now();
  const Mask mask = build_ballot_mask(artifacts.ledger, artifacts.theta_final, config.omega);
  RefineResult refined = refine(mask, artifacts, config, data);
  PruneResult r = finish(PruneMethod::ballot, mask, std::move(refined.params),
                         std::move(refined.report), artifacts, started);
  r.refine_rounds_used = refined.rounds_used;
  r.candidates = std::move(refined.candidates);
  return r;
}

std::size_t magnitude_finetune_epochs(std::size_t epochs) { return std::max<std::size_t>(1, epochs / 5); }

PruneResult run_baseline(PruneMethod method, const TrainConfig& config, const DataSplit& data) {
  return run_baseline(method, config, data, train_dense(config, data));
}

PruneResult run_baseline(PruneMethod method, const TrainConfig& config, const DataSplit& data,
                         const RunArtifacts& artifacts) {
  config.validate();
  const auto started = Clock::now();
  const auto schedule = [&](std::size_t e) { return lr_at(e, config); };

  Mask mask;
  NetworkParams params;
  switch (method) {
    case PruneMethod::lth:
      mask = build_magnitude_mask(artifacts.theta_final, config.omega);
      params = train_masked(apply_mask(artifacts.theta0, mask), &mask, data.train, config, 0,
                            config.epochs, schedule);
      break;
    case PruneMethod::magnitude: {
      mask = build_magnitude_mask(artifacts.theta_final, config.omega);
      const double final_lr = lr_at(config.epochs - 1, config);
      params = train_masked(apply_mask(artifacts.theta_final, mask), &mask, data.train, config, 0,
                            magnitude_finetune_epochs(config.epochs),
                            [final_lr](std::size_t) { return final_lr; });
      break;
    }
    case PruneMethod::random:
      mask = build_random_mask(artifacts.theta0.layout(), config.omega, config.seed);
      params = train_masked(apply_mask(artifacts.theta0, mask), &mask, data.train, config, 0,
                            config.epochs, schedule);
      break;
    case PruneMethod::ballot:
      throw UsageError("ballot is not a baseline; use fix_model");
  }
  EvalReport report = evaluate(params, &mask, data.test);
  PruneResult r = finish(method, mask, params, report, artifacts, started);
  Candidate c;
  c.report = std::move(report);
  c.params = std::move(params);
  c.accuracy_ok = artifacts.dense_report.accuracy - c.report.accuracy <= config.epsilon;
  c.fairness_ok = bias_delta(c.report, artifacts.dense_report, FairnessMetric::cwv) <= config.delta;
  r.candidates.push_back(std::move(c));
  return r;
}

PruneResult run_method(PruneMethod method, const TrainConfig& config, const DataSplit& data,
                       const RunArtifacts& artifacts) {
  if (method == PruneMethod::ballot) return fix_model(config, data, artifacts);
  return run_baseline(method, config, data, artifacts);
}

}  // namespace ballot
