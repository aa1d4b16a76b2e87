#include "ballot/mask.hpp"

#include <algorithm>
#include <cmath>

#include "ballot/error.hpp"

namespace ballot {

Mask Mask::identity(const ParamLayout& layout, double omega) {
  Mask m;
  for (std::size_t l = 0; l < layout.hidden_layer_count(); ++l) {
    m.neuron_keep.emplace_back(layout.spec(l).d_out, true);
  }
  m.weight_keep.assign(layout.total(), true);
  m.omega = omega;
  return m;
}

std::size_t Mask::kept() const noexcept {
  return static_cast<std::size_t>(std::count(weight_keep.begin(), weight_keep.end(), true));
}

void validate_mask(const Mask& mask, const ParamLayout& layout) {
  if (mask.weight_keep.size() != layout.total()) {
    throw ConfigError("mask covers " + std::to_string(mask.weight_keep.size()) +
                      " entries, network has " + std::to_string(layout.total()));
  }
  if (mask.neuron_keep.size() != layout.hidden_layer_count()) {
    throw ConfigError("mask has " + std::to_string(mask.neuron_keep.size()) +
                      " hidden layers, network has " + std::to_string(layout.hidden_layer_count()));
  }
  for (std::size_t l = 0; l < mask.neuron_keep.size(); ++l) {
    const auto& keep = mask.neuron_keep[l];
    if (keep.size() != layout.spec(l).d_out) {
      throw ConfigError("mask hidden layer " + std::to_string(l) + " has wrong width");
    }
    if (std::none_of(keep.begin(), keep.end(), [](bool k) { return k; })) {
      throw ConfigError("mask empties hidden layer " + std::to_string(l));
    }
  }
  const std::size_t out = layout.layer_count() - 1;
  for (std::size_t j = 0; j < layout.spec(out).d_out; ++j) {
    if (!mask.weight_keep[layout.bias_index(out, j)]) {
      throw ConfigError("mask removes output bias " + std::to_string(j));
    }
  }
}

double sparsity(const Mask& mask, const ParamLayout& layout) {
  return static_cast<double>(mask.kept()) / static_cast<double>(layout.total());
}

std::size_t retention_target(double omega, std::size_t total) {
  if (!(omega > 0.0 && omega <= 1.0)) {
    throw ConfigError("omega must lie in (0, 1], got " + std::to_string(omega));
  }
  return static_cast<std::size_t>(std::floor(omega * static_cast<double>(total)));
}

}  // namespace ballot
