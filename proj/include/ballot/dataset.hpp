#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ballot/tensor.hpp"

namespace ballot {

// Labeled samples: features is [n x d], labels[i] in [0, num_classes).
struct Dataset {
  Tensor features;
  std::vector<std::size_t> labels;
  std::size_t num_classes = 0;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t dim() const noexcept { return features.cols(); }

  std::vector<std::size_t> class_counts() const;

  // Rows picked by index, in the given order.
  Dataset subset(std::span<const std::size_t> rows) const;

  // One-hot [rows.size() x num_classes] targets for the given rows.
  Tensor one_hot(std::span<const std::size_t> rows) const;

  // Throws DataError on label/shape inconsistencies or a class with no samples.
  void validate() const;
};

// Train/test views of one dataset. Row lists index the source dataset; the
// feature statistics are empty when no standardization was applied.
struct DataSplit {
  Dataset train;
  Dataset test;
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> test_rows;
  std::vector<double> feature_mean;
  std::vector<double> feature_scale;
};

}  // namespace ballot
