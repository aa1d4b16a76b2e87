#include "ballot/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ballot/error.hpp"

namespace ballot::ad {

namespace {

void require_finite(const Tensor& t, const char* op) {
  if (!t.all_finite()) throw NumericalError(std::string("non-finite value produced by ") + op);
}

}  // namespace

const Tape::Node& Tape::node(NodeId id) const {
  if (id.index >= nodes_.size()) {
    throw UsageError("node " + std::to_string(id.index) + " is not on this tape");
  }
  return nodes_[id.index];
}

NodeId Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return NodeId{nodes_.size() - 1};
}

NodeId Tape::constant(Tensor value) {
  require_finite(value, "constant");
  return push(Node{.op = Op::constant, .value = std::move(value)});
}

NodeId Tape::parameter(Tensor value) {
  require_finite(value, "parameter");
  return push(Node{.op = Op::parameter, .needs_grad = true, .value = std::move(value)});
}

const Tensor& Tape::value(NodeId id) const { return node(id).value; }

NodeId Tape::affine(NodeId x_id, NodeId w_id, NodeId b_id) {
  const Tensor& x = node(x_id).value;
  const Tensor& w = node(w_id).value;
  const Tensor& b = node(b_id).value;
  if (x.rank() != 2 || w.rank() != 2 || b.rank() != 1 || x.cols() != w.rows() ||
      w.cols() != b.size()) {
    throw ConfigError("affine shape mismatch: x" + shape_string(x.shape()) + " W" +
                      shape_string(w.shape()) + " b" + shape_string(b.shape()));
  }
  const std::size_t batch = x.rows();
  const std::size_t d_in = w.rows();
  const std::size_t d_out = w.cols();
  Tensor out({batch, d_out});
  for (std::size_t n = 0; n < batch; ++n) {
    auto out_row = out.row(n);
    std::copy(b.values().begin(), b.values().end(), out_row.begin());
    const auto x_row = x.row(n);
    for (std::size_t i = 0; i < d_in; ++i) {
      const double xi = x_row[i];
      if (xi == 0.0) continue;
      const auto w_row = w.row(i);
      for (std::size_t j = 0; j < d_out; ++j) out_row[j] += xi * w_row[j];
    }
  }
  require_finite(out, "affine");
  const bool needs = node(x_id).needs_grad || node(w_id).needs_grad || node(b_id).needs_grad;
  return push(Node{.op = Op::affine,
                   .lhs = x_id,
                   .mid = w_id,
                   .rhs = b_id,
                   .needs_grad = needs,
                   .value = std::move(out)});
}

NodeId Tape::relu(NodeId x_id) {
  Tensor out = node(x_id).value;
  for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
  return push(Node{.op = Op::relu,
                   .lhs = x_id,
                   .needs_grad = node(x_id).needs_grad,
                   .value = std::move(out)});
}

NodeId Tape::scale(NodeId x_id, double factor) {
  Tensor out = node(x_id).value;
  for (double& v : out.values()) v *= factor;
  require_finite(out, "scale");
  return push(Node{.op = Op::scale,
                   .lhs = x_id,
                   .needs_grad = node(x_id).needs_grad,
                   .factor = factor,
                   .value = std::move(out)});
}

NodeId Tape::weighted_softmax_cross_entropy(NodeId logits, const Tensor& targets,
                                            std::span<const double> class_weights) {
  return cross_entropy(logits, targets, class_weights);
}

NodeId Tape::softmax_cross_entropy(NodeId logits, const Tensor& targets) {
  const std::vector<double> ones(node(logits).value.cols(), 1.0);
  return cross_entropy(logits, targets, ones);
}

NodeId Tape::cross_entropy(NodeId logits_id, const Tensor& targets,
                           std::span<const double> weights) {
  const Tensor& z = node(logits_id).value;
  if (z.rank() != 2 || targets.shape() != z.shape()) {
    throw ConfigError("cross entropy shape mismatch: logits" + shape_string(z.shape()) +
                      " targets" + shape_string(targets.shape()));
  }
  const std::size_t batch = z.rows();
  const std::size_t classes = z.cols();
  if (weights.size() != classes) {
    throw ConfigError("expected " + std::to_string(classes) + " class weights, got " +
                      std::to_string(weights.size()));
  }
  for (double w : weights) {
    if (!(w > 0.0) || !std::isfinite(w)) throw ConfigError("class weights must be positive");
  }
  if (!z.all_finite()) throw NumericalError("non-finite logits entering cross entropy");

  Tensor probs({batch, classes});
  Tensor weighted_targets({batch, classes});
  double total = 0.0;
  for (std::size_t n = 0; n < batch; ++n) {
    std::size_t hot = classes;
    for (std::size_t c = 0; c < classes; ++c) {
      const double y = targets(n, c);
      if (y == 1.0 && hot == classes) {
        hot = c;
      } else if (y != 0.0) {
        hot = classes + 1;
        break;
      }
    }
    if (hot >= classes) throw DataError("target row " + std::to_string(n) + " is not one-hot");

    const auto zr = z.row(n);
    const double m = *std::max_element(zr.begin(), zr.end());
    double sum = 0.0;
    for (double v : zr) sum += std::exp(v - m);
    const double lse = m + std::log(sum);
    for (std::size_t c = 0; c < classes; ++c) {
      probs(n, c) = std::exp(zr[c] - lse);
      weighted_targets(n, c) = weights[c] * targets(n, c);
    }
    total += -(weighted_targets(n, hot) * (zr[hot] - lse));
  }
  Tensor loss({1}, total / static_cast<double>(batch));
  require_finite(loss, "cross entropy");
  return push(Node{.op = Op::cross_entropy,
                   .lhs = logits_id,
                   .needs_grad = node(logits_id).needs_grad,
                   .value = std::move(loss),
                   .probs = std::move(probs),
                   .weighted_targets = std::move(weighted_targets)});
}

Gradients Tape::backward(NodeId loss_id) const {
  if (nodes_.empty()) throw UsageError("backward called on an empty tape");
  const Node& loss = node(loss_id);
  if (loss.value.size() != 1) {
    throw UsageError("backward requires a scalar loss, got shape " +
                     shape_string(loss.value.shape()));
  }

  std::vector<Tensor> grads(nodes_.size());
  grads[loss_id.index] = Tensor(loss.value.shape(), 1.0);

  auto accumulate = [&](NodeId target, Tensor&& g) {
    Tensor& slot = grads[target.index];
    if (slot.empty()) {
      slot = std::move(g);
    } else {
      for (std::size_t i = 0; i < slot.size(); ++i) slot[i] += g[i];
    }
  };

  for (std::size_t idx = loss_id.index + 1; idx-- > 0;) {
    const Node& n = nodes_[idx];
    if (!n.needs_grad || grads[idx].empty()) continue;
    const Tensor& upstream = grads[idx];

    switch (n.op) {
      case Op::constant:
      case Op::parameter:
        break;

      case Op::affine: {
        const Node& xn = nodes_[n.lhs.index];
        const Node& wn = nodes_[n.mid.index];
        const Node& bn = nodes_[n.rhs.index];
        const Tensor& x = xn.value;
        const Tensor& w = wn.value;
        const std::size_t batch = x.rows();
        const std::size_t d_in = w.rows();
        const std::size_t d_out = w.cols();
        if (xn.needs_grad) {
          Tensor dx({batch, d_in});
          for (std::size_t r = 0; r < batch; ++r) {
            const auto up = upstream.row(r);
            for (std::size_t i = 0; i < d_in; ++i) {
              const auto w_row = w.row(i);
              double acc = 0.0;
              for (std::size_t j = 0; j < d_out; ++j) acc += up[j] * w_row[j];
              dx(r, i) = acc;
            }
          }
          accumulate(n.lhs, std::move(dx));
        }
        if (wn.needs_grad) {
          Tensor dw({d_in, d_out});
          for (std::size_t r = 0; r < batch; ++r) {
            const auto up = upstream.row(r);
            const auto x_row = x.row(r);
            for (std::size_t i = 0; i < d_in; ++i) {
              const double xi = x_row[i];
              if (xi == 0.0) continue;
              auto dw_row = dw.row(i);
              for (std::size_t j = 0; j < d_out; ++j) dw_row[j] += xi * up[j];
            }
          }
          accumulate(n.mid, std::move(dw));
        }
        if (bn.needs_grad) {
          Tensor db({d_out});
          for (std::size_t r = 0; r < batch; ++r) {
            const auto up = upstream.row(r);
            for (std::size_t j = 0; j < d_out; ++j) db[j] += up[j];
          }
          accumulate(n.rhs, std::move(db));
        }
        break;
      }

      case Op::relu: {
        const Tensor& x = nodes_[n.lhs.index].value;
        Tensor dx(x.shape());
        for (std::size_t i = 0; i < x.size(); ++i) dx[i] = x[i] > 0.0 ? upstream[i] : 0.0;
        accumulate(n.lhs, std::move(dx));
        break;
      }

      case Op::scale: {
        Tensor dx = upstream;
        for (double& v : dx.values()) v *= n.factor;
        accumulate(n.lhs, std::move(dx));
        break;
      }

      case Op::cross_entropy: {
        const std::size_t batch = n.probs.rows();
        const std::size_t classes = n.probs.cols();
        const double g = upstream[0] / static_cast<double>(batch);
        Tensor dz({batch, classes});
        for (std::size_t r = 0; r < batch; ++r) {
          double row_weight = 0.0;
          for (std::size_t c = 0; c < classes; ++c) row_weight += n.weighted_targets(r, c);
          for (std::size_t c = 0; c < classes; ++c) {
            dz(r, c) = g * (row_weight * n.probs(r, c) - n.weighted_targets(r, c));
          }
        }
        accumulate(n.lhs, std::move(dz));
        break;
      }
    }
  }

  for (const Tensor& g : grads) {
    if (!g.empty()) require_finite(g, "backward");
  }
  return Gradients(std::move(grads));
}

}  // namespace ballot::ad
