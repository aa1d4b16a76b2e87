#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ballot/autodiff.hpp"
#include "ballot/layers.hpp"
#include "ballot/mask.hpp"
#include "ballot/tensor.hpp"

namespace ballot {

struct DenseLayer {
  Tensor weight;  // [d_in x d_out]
  Tensor bias;    // [d_out]
};

// Full parameter set of an MLP. The same type holds the initial weights,
// the rewind point, the trained dense weights and the pruned result;
// epoch_tag says which training epoch the values reflect.
struct NetworkParams {
  std::vector<LayerSpec> specs;
  std::vector<DenseLayer> layers;
  std::uint64_t seed = 0;
  std::size_t epoch_tag = 0;

  ParamLayout layout() const { return ParamLayout(specs); }
  std::size_t parameter_count() const;
  std::size_t input_dim() const { return specs.front().d_in; }
  std::size_t class_count() const { return specs.back().d_out; }

  // Value at a flat index (see ParamLayout for the ordering).
  double flat(std::size_t index) const;
  std::vector<double> flatten() const;

  // Same specs, seed, epoch and bitwise-identical values.
  bool bit_equal(const NetworkParams& other) const;
};

// Uniform(-sqrt(6/d_in), +sqrt(6/d_in)) weights and zero biases, fully
// determined by the seed.
NetworkParams init_network(std::span<const LayerSpec> specs, std::uint64_t seed);

// Copy with every masked entry set to exactly 0.
NetworkParams apply_mask(const NetworkParams& params, const Mask& mask);

// Logits for a [batch x d_in] input. Masked entries act as 0 whether or not
// they are zero in params.
Tensor forward(const NetworkParams& params, const Mask* mask, const Tensor& batch);

// Forward pass recorded on a tape, keeping handles to the parameters and to
// every hidden pre-activation so backward() can report per-neuron signals.
struct ForwardTrace {
  ad::Tape tape;
  std::vector<ad::NodeId> weights;
  std::vector<ad::NodeId> biases;
  std::vector<ad::NodeId> preacts;  // hidden layers only
  ad::NodeId logits;
};

ForwardTrace trace_forward(const NetworkParams& params, const Mask* mask, const Tensor& batch);

struct NetworkGrads {
  std::vector<DenseLayer> layers;
  // preact[layer][unit]: batch mean of dloss/d(pre-activation).
  std::vector<std::vector<double>> preact;
};

NetworkGrads collect_grads(const ForwardTrace& trace, const ad::Gradients& grads);

// theta <- theta - lr * g on kept entries; masked entries are re-zeroed.
// Throws NumericalError on non-finite gradients.
void sgd_step(NetworkParams& params, const NetworkGrads& grads, double lr, const Mask* mask);

// Checkpoint file:
//   "BLTC" | u32 LE version | u64 LE manifest length | UTF-8 JSON manifest |
//   per layer: weights row-major, then biases, each as f64 LE.
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string encode_checkpoint(const NetworkParams& params);
NetworkParams decode_checkpoint(std::string_view bytes);

void save_checkpoint(const NetworkParams& params, const std::filesystem::path& path);
NetworkParams load_checkpoint(const std::filesystem::path& path);
// Also rejects files whose layers differ from `expected`, naming the layer.
NetworkParams load_checkpoint(const std::filesystem::path& path,
                              std::span<const LayerSpec> expected);

}  // namespace ballot
