#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ballot/dataset.hpp"
#include "ballot/mask.hpp"
#include "ballot/model.hpp"

namespace ballot {

// Row = true class, column = predicted class.
using ConfusionMatrix = std::vector<std::vector<std::size_t>>;

struct EvalReport {
  std::vector<double> per_class_acc;
  double accuracy = 0.0;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double cwv = 0.0;
  double mcd = 0.0;
  std::vector<std::size_t> sample_counts;
  ConfusionMatrix confusion;

  std::size_t class_count() const noexcept { return per_class_acc.size(); }
};

// Class-wise variance: population variance of the per-class accuracies.
double cwv(std::span<const double> acc);
// Maximum class-wise discrepancy: max - min of the per-class accuracies.
double mcd(std::span<const double> acc);

// Unweighted means over classes of TP/(TP+FP) and TP/(TP+FN). A class whose
// denominator is 0 contributes 0.
double macro_precision(const ConfusionMatrix& confusion);
double macro_recall(const ConfusionMatrix& confusion);

// Argmax with ties resolved to the lowest class index.
std::size_t argmax_class(std::span<const double> logits);

// Builds the full report from predicted and true labels.
EvalReport report_from_predictions(std::span<const std::size_t> predicted,
                                   std::span<const std::size_t> truth, std::size_t num_classes);

EvalReport evaluate(const NetworkParams& params, const Mask* mask, const Dataset& data);

// Weights for the fairness loss: w_c = 1 / max(acc_c, floor) using the
// previous epoch's per-class accuracy.
struct ClassWeights {
  std::vector<double> w;
  long source_epoch = -1;

  static ClassWeights uniform(std::size_t classes);
};

inline constexpr double kClassWeightFloor = 0.01;

ClassWeights update_class_weights(const EvalReport& prev, long source_epoch = -1);

enum class FairnessMetric { cwv, mcd };

// pruned.metric - dense.metric; positive means the pruned model is less fair.
double bias_delta(const EvalReport& pruned, const EvalReport& dense, FairnessMetric metric);

}  // namespace ballot
