#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace ballot {

enum class Activation { relu, none };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& name);

// One dense layer: d_in inputs, d_out outputs. The last layer produces
// logits and uses Activation::none.
struct LayerSpec {
  std::size_t d_in = 0;
  std::size_t d_out = 0;
  Activation activation = Activation::relu;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

// Specs for d_in -> hidden... -> classes with ReLU hidden layers.
std::vector<LayerSpec> make_mlp_specs(std::size_t d_in, std::span<const std::size_t> hidden,
                                      std::size_t classes);

// Throws ConfigError unless the layers chain and end in a linear output layer.
void validate_specs(std::span<const LayerSpec> specs);

// Hidden neuron address: `layer` indexes hidden layers (the outputs of
// specs[layer]), so the output layer is never addressable.
struct NeuronId {
  std::size_t layer = 0;
  std::size_t unit = 0;

  friend auto operator<=>(const NeuronId&, const NeuronId&) = default;
};

// Flat indexing of every parameter entry: for each layer in order, the
// weight matrix row-major, then the bias vector. Checkpoints and masks use
// the same order.
class ParamLayout {
 public:
  explicit ParamLayout(std::span<const LayerSpec> specs);

  std::size_t total() const noexcept { return total_; }
  std::size_t layer_count() const noexcept { return specs_.size(); }
  std::size_t hidden_layer_count() const noexcept { return specs_.size() - 1; }
  const LayerSpec& spec(std::size_t layer) const { return specs_.at(layer); }
  const std::vector<LayerSpec>& specs() const noexcept { return specs_; }

  std::size_t weight_offset(std::size_t layer) const { return weight_offsets_.at(layer); }
  std::size_t bias_offset(std::size_t layer) const { return bias_offsets_.at(layer); }
  std::size_t weight_index(std::size_t layer, std::size_t in, std::size_t out) const {
    return weight_offsets_[layer] + in * specs_[layer].d_out + out;
  }
  std::size_t bias_index(std::size_t layer, std::size_t out) const {
    return bias_offsets_[layer] + out;
  }
  bool is_output_bias(std::size_t flat) const noexcept {
    return flat >= bias_offsets_.back();
  }

  std::size_t hidden_neuron_count() const noexcept;
  std::vector<NeuronId> hidden_neurons() const;

  // Entries that belong to a hidden neuron: its incoming weights, its bias
  // and its outgoing weights.
  std::vector<std::size_t> neuron_entries(NeuronId id) const;

 private:
  std::vector<LayerSpec> specs_;
  std::vector<std::size_t> weight_offsets_;
  std::vector<std::size_t> bias_offsets_;
  std::size_t total_ = 0;
};

}  // namespace ballot
