#include "ballot/layers.hpp"

#include "ballot/error.hpp"

namespace ballot {

std::string to_string(Activation a) { return a == Activation::relu ? "relu" : "none"; }

Activation activation_from_string(const std::string& name) {
  if (name == "relu") return Activation::relu;
  if (name == "none") return Activation::none;
  throw ConfigError("unknown activation '" + name + "'");
}

std::vector<LayerSpec> make_mlp_specs(std::size_t d_in, std::span<const std::size_t> hidden,
                                      std::size_t classes) {
  std::vector<LayerSpec> specs;
  std::size_t prev = d_in;
  for (std::size_t width : hidden) {
    specs.push_back({prev, width, Activation::relu});
    prev = width;
  }
  specs.push_back({prev, classes, Activation::none});
  validate_specs(specs);
  return specs;
}

void validate_specs(std::span<const LayerSpec> specs) {
  if (specs.empty()) throw ConfigError("network needs at least one layer");
  for (std::size_t l = 0; l < specs.size(); ++l) {
    const auto& s = specs[l];
    const std::string where = "layer " + std::to_string(l);
    if (s.d_in == 0 || s.d_out == 0) throw ConfigError(where + " has a zero dimension");
    if (l > 0 && specs[l - 1].d_out != s.d_in) {
      throw ConfigError(where + " expects d_in=" + std::to_string(s.d_in) + " but layer " +
                        std::to_string(l - 1) + " produces " + std::to_string(specs[l - 1].d_out));
    }
    const bool last = l + 1 == specs.size();
    if (last && s.activation != Activation::none) {
      throw ConfigError("output layer must use activation 'none'");
    }
    if (!last && s.activation != Activation::relu) {
      throw ConfigError(where + " is hidden and must use activation 'relu'");
    }
  }
  if (specs.back().d_out < 2) throw ConfigError("output layer needs at least 2 classes");
}

ParamLayout::ParamLayout(std::span<const LayerSpec> specs) : specs_(specs.begin(), specs.end()) {
  validate_specs(specs_);
  for (const auto& s : specs_) {
    weight_offsets_.push_back(total_);
    total_ += s.d_in * s.d_out;
    bias_offsets_.push_back(total_);
    total_ += s.d_out;
  }
}

std::size_t ParamLayout::hidden_neuron_count() const noexcept {
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < specs_.size(); ++l) n += specs_[l].d_out;
  return n;
}

std::vector<NeuronId> ParamLayout::hidden_neurons() const {
  std::vector<NeuronId> ids;
  ids.reserve(hidden_neuron_count());
  for (std::size_t l = 0; l + 1 < specs_.size(); ++l) {
    for (std::size_t u = 0; u < specs_[l].d_out; ++u) ids.push_back({l, u});
  }
  return ids;
}

std::vector<std::size_t> ParamLayout::neuron_entries(NeuronId id) const {
  if (id.layer + 1 >= specs_.size() || id.unit >= specs_[id.layer].d_out) {
    throw ConfigError("no hidden neuron at layer " + std::to_string(id.layer) + " unit " +
                      std::to_string(id.unit));
  }
  const auto& in = specs_[id.layer];
  const auto& out = specs_[id.layer + 1];
  std::vector<std::size_t> entries;
  entries.reserve(in.d_in + 1 + out.d_out);
  for (std::size_t i = 0; i < in.d_in; ++i) entries.push_back(weight_index(id.layer, i, id.unit));
  entries.push_back(bias_index(id.layer, id.unit));
  for (std::size_t j = 0; j < out.d_out; ++j) {
    entries.push_back(weight_index(id.layer + 1, id.unit, j));
  }
  return entries;
}

}  // namespace ballot
