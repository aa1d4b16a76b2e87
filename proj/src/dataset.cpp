#include "ballot/dataset.hpp"

#include <algorithm>
#include <string>

#include "ballot/error.hpp"

namespace ballot {

std::vector<std::size_t> Dataset::class_counts() const {
  std::vector<std::size_t> counts(num_classes, 0);
  for (std::size_t y : labels) {
    if (y < num_classes) ++counts[y];
  }
  return counts;
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  Dataset out;
  out.num_classes = num_classes;
  out.features = Tensor({rows.size(), dim()});
  out.labels.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto src = features.row(rows[i]);
    std::copy(src.begin(), src.end(), out.features.row(i).begin());
    out.labels.push_back(labels[rows[i]]);
  }
  return out;
}

Tensor Dataset::one_hot(std::span<const std::size_t> rows) const {
  Tensor t({rows.size(), num_classes});
  for (std::size_t i = 0; i < rows.size(); ++i) t(i, labels[rows[i]]) = 1.0;
  return t;
}

void Dataset::validate() const {
  if (labels.empty()) throw DataError("dataset is empty");
  if (features.rank() != 2 || features.rows() != labels.size()) {
    throw DataError("feature rows do not match label count");
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= num_classes) {
      throw DataError("row " + std::to_string(i) + " has label " + std::to_string(labels[i]) +
                      " outside [0, " + std::to_string(num_classes) + ")");
    }
  }
  const auto counts = class_counts();
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] == 0) throw DataError("class " + std::to_string(c) + " has no samples");
  }
}

}  // namespace ballot
