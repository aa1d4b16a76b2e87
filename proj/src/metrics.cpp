#include "ballot/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "ballot/error.hpp"

namespace ballot {

double cwv(std::span<const double> acc) {
  if (acc.empty()) throw DataError("cwv of an empty accuracy vector");
  // Pairwise form of the population variance, sum_{i<j} (a_i - a_j)^2 / C^2.
  // Equal accuracies give exactly 0 and two classes give exactly (mcd/2)^2,
  // which the mean-centred form misses by rounding.
  const double n = static_cast<double>(acc.size());
  double sq = 0.0;
  for (std::size_t i = 0; i < acc.size(); ++i) {
    for (std::size_t j = i + 1; j < acc.size(); ++j) {
      const double d = acc[i] - acc[j];
      sq += d * d;
    }
  }
  return sq / (n * n);
}

double mcd(std::span<const double> acc) {
  if (acc.empty()) throw DataError("mcd of an empty accuracy vector");
  const auto [lo, hi] = std::minmax_element(acc.begin(), acc.end());
  return *hi - *lo;
}

namespace {

std::size_t total_count(const ConfusionMatrix& m) {
  std::size_t n = 0;
  for (const auto& row : m) n += std::accumulate(row.begin(), row.end(), std::size_t{0});
  return n;
}

void check_confusion(const ConfusionMatrix& m) {
  for (const auto& row : m) {
    if (row.size() != m.size()) throw DataError("confusion matrix must be square");
  }
  if (m.empty() || total_count(m) == 0) throw DataError("confusion matrix is empty");
}

double ratio_or_zero(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

double macro_precision(const ConfusionMatrix& m) {
  check_confusion(m);
  const std::size_t k = m.size();
  double sum = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    std::size_t predicted = 0;
    for (std::size_t t = 0; t < k; ++t) predicted += m[t][c];
    sum += ratio_or_zero(m[c][c], predicted);
  }
  return sum / static_cast<double>(k);
}

double macro_recall(const ConfusionMatrix& m) {
  check_confusion(m);
  const std::size_t k = m.size();
  double sum = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    const std::size_t actual = std::accumulate(m[c].begin(), m[c].end(), std::size_t{0});
    sum += ratio_or_zero(m[c][c], actual);
  }
  return sum / static_cast<double>(k);
}

std::size_t argmax_class(std::span<const double> logits) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < logits.size(); ++c) {
    if (logits[c] > logits[best]) best = c;
  }
  return best;
}

EvalReport report_from_predictions(std::span<const std::size_t> predicted,
                                   std::span<const std::size_t> truth, std::size_t num_classes) {
  if (predicted.size() != truth.size()) throw DataError("prediction/label count mismatch");
  if (truth.empty()) throw DataError("cannot evaluate on an empty dataset");
  EvalReport r;
  r.confusion.assign(num_classes, std::vector<std::size_t>(num_classes, 0));
  r.sample_counts.assign(num_classes, 0);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] >= num_classes || predicted[i] >= num_classes) {
      throw DataError("label out of range at sample " + std::to_string(i));
    }
    ++r.confusion[truth[i]][predicted[i]];
    ++r.sample_counts[truth[i]];
    if (truth[i] == predicted[i]) ++correct;
  }
  r.per_class_acc.resize(num_classes);
  for (std::size_t c = 0; c < num_classes; ++c) {
    if (r.sample_counts[c] == 0) {
      throw DataError("class " + std::to_string(c) + " has no samples; its accuracy is undefined");
    }
    r.per_class_acc[c] = ratio_or_zero(r.confusion[c][c], r.sample_counts[c]);
  }
  r.accuracy = ratio_or_zero(correct, truth.size());
  r.macro_precision = macro_precision(r.confusion);
  r.macro_recall = macro_recall(r.confusion);
  r.cwv = cwv(r.per_class_acc);
  r.mcd = mcd(r.per_class_acc);
  return r;
}

EvalReport evaluate(const NetworkParams& params, const Mask* mask, const Dataset& data) {
  if (data.num_classes != params.class_count()) {
    throw DataError("dataset has " + std::to_string(data.num_classes) + " classes, model outputs " +
                    std::to_string(params.class_count()));
  }
  constexpr std::size_t kChunk = 512;
  std::vector<std::size_t> predicted;
  predicted.reserve(data.size());
  std::vector<std::size_t> rows;
  for (std::size_t start = 0; start < data.size(); start += kChunk) {
    const std::size_t end = std::min(data.size(), start + kChunk);
    rows.resize(end - start);
    std::iota(rows.begin(), rows.end(), start);
    const Tensor logits = forward(params, mask, data.subset(rows).features);
    for (std::size_t n = 0; n < logits.rows(); ++n) predicted.push_back(argmax_class(logits.row(n)));
  }
  return report_from_predictions(predicted, data.labels, data.num_classes);
}

ClassWeights ClassWeights::uniform(std::size_t classes) {
  return ClassWeights{std::vector<double>(classes, 1.0), -1};
}

ClassWeights update_class_weights(const EvalReport& prev, long source_epoch) {
  ClassWeights cw;
  cw.source_epoch = source_epoch;
  cw.w.reserve(prev.per_class_acc.size());
  for (double a : prev.per_class_acc) cw.w.push_back(1.0 / std::max(a, kClassWeightFloor));
  return cw;
}

double bias_delta(const EvalReport& pruned, const EvalReport& dense, FairnessMetric metric) {
  if (pruned.class_count() != dense.class_count()) {
    throw DataError("bias delta over reports with different class counts");
  }
  return metric == FairnessMetric::cwv ? pruned.cwv - dense.cwv : pruned.mcd - dense.mcd;
}

}  // namespace ballot
