#pragma once

#include <cstddef>
#include <vector>

#include "ballot/layers.hpp"

namespace ballot {

// Keep/remove decisions over a network. weight_keep is authoritative for the
// forward pass (one bit per flat parameter entry); neuron_keep records which
// hidden neurons survive whole-neuron removal.
struct Mask {
  std::vector<std::vector<bool>> neuron_keep;
  std::vector<bool> weight_keep;
  double omega = 1.0;

  static Mask identity(const ParamLayout& layout, double omega = 1.0);

  std::size_t kept() const noexcept;

  friend bool operator==(const Mask&, const Mask&) = default;
};

// Throws ConfigError if the mask does not fit the layout, a hidden layer is
// emptied, or an output bias is masked.
void validate_mask(const Mask& mask, const ParamLayout& layout);

// Kept entries / total entries.
double sparsity(const Mask& mask, const ParamLayout& layout);

// floor(omega * total), the entry budget every builder must hit exactly.
std::size_t retention_target(double omega, std::size_t total);

}  // namespace ballot
