#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ballot/tensor.hpp"

namespace ballot::ad {

// Handle to a value recorded on a Tape.
struct NodeId {
  std::size_t index = static_cast<std::size_t>(-1);

  friend bool operator==(NodeId, NodeId) = default;
};

// Result of one reverse sweep. Gradients are owned by this object, so two
// sweeps over the same tape never accumulate into each other.
class Gradients {
 public:
  Gradients() = default;
  explicit Gradients(std::vector<Tensor> grads) : grads_(std::move(grads)) {}

  // Gradient of the loss w.r.t. the node's value. Nodes the sweep never
  // reached (constants, nodes past the loss) yield an empty tensor.
  const Tensor& operator[](NodeId id) const { return grads_.at(id.index); }

 private:
  std::vector<Tensor> grads_;
};

// Reverse-mode tape over dense tensors. Nodes are appended in evaluation
// order, so operands always precede the operations that consume them and a
// single reverse pass visits each node once.
class Tape {
 public:
  // Leaf that does not need a gradient (input batch).
  NodeId constant(Tensor value);
  // Leaf whose gradient is reported by backward().
  NodeId parameter(Tensor value);

  // out[n, j] = sum_i x[n, i] * w[i, j] + b[j]
  NodeId affine(NodeId x, NodeId w, NodeId b);
  // Elementwise max(0, x); the subgradient at exactly 0 is 0.
  NodeId relu(NodeId x);
  // Multiply by a fixed scalar.
  NodeId scale(NodeId x, double factor);

  // Batch mean of -sum_c w_c * y_c * log softmax(z)_c. targets must be
  // one-hot rows of the same shape as logits; class_weights are positive.
  NodeId weighted_softmax_cross_entropy(NodeId logits, const Tensor& targets,
                                        std::span<const double> class_weights);
  // Same as the weighted form with every class weight equal to 1.
  NodeId softmax_cross_entropy(NodeId logits, const Tensor& targets);

  const Tensor& value(NodeId id) const;
  std::size_t size() const noexcept { return nodes_.size(); }

  // Reverse sweep from a scalar (single-element) node. Does not modify the
  // tape; call it as many times as needed on the same forward pass.
  Gradients backward(NodeId loss) const;

 private:
  enum class Op { constant, parameter, affine, relu, scale, cross_entropy };

  struct Node {
    Op op;
    NodeId lhs{};
    NodeId mid{};
    NodeId rhs{};
    bool needs_grad = false;
    double factor = 1.0;
    Tensor value{};
    // cross_entropy: softmax probabilities, then per-class w_c * y_c.
    Tensor probs{};
    Tensor weighted_targets{};
  };

  const Node& node(NodeId id) const;
  NodeId push(Node node);
  NodeId cross_entropy(NodeId logits, const Tensor& targets, std::span<const double> weights);

  std::vector<Node> nodes_;
};

}  // namespace ballot::ad
