#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ballot/dataset.hpp"

namespace ballot {

// Gaussian blobs: class c is centred on a seed-determined point of the sphere
// of radius mean_scale, samples add isotropic noise of deviation stddev.
// Imbalance comes from per-class counts.
struct SyntheticSpec {
  std::vector<std::size_t> counts{700, 100, 100, 100};
  std::size_t dim = 20;
  double mean_scale = 3.0;
  double stddev = 1.0;
  std::uint64_t seed = 0;

  std::size_t classes() const noexcept { return counts.size(); }
};

struct DatasetSpec {
  // When set, samples come from this CSV instead of the generator.
  std::optional<std::filesystem::path> csv_path;
  std::string label_column = "label";
  std::optional<std::size_t> csv_classes;
  SyntheticSpec synthetic;
  double train_fraction = 0.8;
  bool normalize = true;
  std::uint64_t split_seed = 0;

  // Throws ConfigError naming the offending data.* field.
  void validate() const;
};

Dataset gen_synthetic(const SyntheticSpec& spec);

// Header row required; the label column holds integer ids 0..C-1 and every
// other column is numeric. C is `num_classes` when given, else the number of
// consecutive labels 0, 1, ... present in the file.
// Throws DataError on a missing column, bad cell (with line and column) or a
// class without samples.
Dataset load_csv(const std::filesystem::path& path, const std::string& label_column,
                 std::optional<std::size_t> num_classes = std::nullopt);
Dataset parse_csv(const std::string& text, const std::string& label_column,
                  std::optional<std::size_t> num_classes = std::nullopt);

// Columns f0..f{d-1} then label; values printed with 17 significant digits.
std::string to_csv(const Dataset& data);
void write_csv(const Dataset& data, const std::filesystem::path& path);

// Stratified split: every class keeps at least one row on each side. With
// `normalize`, features are standardized using train-split statistics only.
DataSplit split_dataset(const Dataset& data, double train_fraction, std::uint64_t seed,
                        bool normalize);

// Loads or generates the dataset and splits it.
DataSplit prepare_data(const DatasetSpec& spec);

}  // namespace ballot
