#include "ballot/model.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "ballot/error.hpp"
#include "ballot/random.hpp"
#include "json.hpp"

namespace ballot {

using ordered_json = nlohmann::ordered_json;

std::size_t NetworkParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weight.size() + l.bias.size();
  return n;
}

double NetworkParams::flat(std::size_t index) const {
  for (const auto& l : layers) {
    if (index < l.weight.size()) return l.weight[index];
    index -= l.weight.size();
    if (index < l.bias.size()) return l.bias[index];
    index -= l.bias.size();
  }
  throw ConfigError("flat parameter index out of range");
}

std::vector<double> NetworkParams::flatten() const {
  std::vector<double> out;
  out.reserve(parameter_count());
  for (const auto& l : layers) {
    out.insert(out.end(), l.weight.values().begin(), l.weight.values().end());
    out.insert(out.end(), l.bias.values().begin(), l.bias.values().end());
  }
  return out;
}

bool NetworkParams::bit_equal(const NetworkParams& other) const {
  if (specs != other.specs || seed != other.seed || epoch_tag != other.epoch_tag ||
      layers.size() != other.layers.size()) {
    return false;
  }
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (!layers[l].weight.bit_equal(other.layers[l].weight) ||
        !layers[l].bias.bit_equal(other.layers[l].bias)) {
      return false;
    }
  }
  return true;
}

NetworkParams init_network(std::span<const LayerSpec> specs, std::uint64_t seed) {
  validate_specs(specs);
  NetworkParams p;
  p.specs.assign(specs.begin(), specs.end());
  p.seed = seed;
  p.epoch_tag = 0;
  Rng rng(derive_seed(seed, Stream::init));
  for (const auto& s : specs) {
    const double bound = std::sqrt(6.0 / static_cast<double>(s.d_in));
    DenseLayer layer{Tensor({s.d_in, s.d_out}), Tensor({s.d_out}, 0.0)};
    for (double& w : layer.weight.values()) w = rng.uniform(-bound, bound);
    p.layers.push_back(std::move(layer));
  }
  return p;
}

namespace {

void check_mask_fits(const NetworkParams& params, const Mask* mask) {
  if (mask != nullptr && mask->weight_keep.size() != params.parameter_count()) {
    throw ConfigError("mask does not match network: " + std::to_string(mask->weight_keep.size()) +
                      " entries vs " + std::to_string(params.parameter_count()));
  }
}

// Masked copy of a tensor whose entries start at flat offset `offset`.
Tensor masked(const Tensor& t, const Mask* mask, std::size_t offset) {
  Tensor out = t;
  if (mask != nullptr) {
    for (std::size_t i = 0; i < out.size(); ++i) {
      if (!mask->weight_keep[offset + i]) out[i] = 0.0;
    }
  }
  return out;
}

void check_batch(const NetworkParams& params, const Tensor& batch) {
  if (batch.rank() != 2 || batch.cols() != params.input_dim()) {
    throw ConfigError("batch shape " + shape_string(batch.shape()) + " does not match input width " +
                      std::to_string(params.input_dim()));
  }
}

}  // namespace

NetworkParams apply_mask(const NetworkParams& params, const Mask& mask) {
  check_mask_fits(params, &mask);
  NetworkParams out = params;
  std::size_t offset = 0;
  for (auto& l : out.layers) {
    l.weight = masked(l.weight, &mask, offset);
    offset += l.weight.size();
    l.bias = masked(l.bias, &mask, offset);
    offset += l.bias.size();
  }
  return out;
}

ForwardTrace trace_forward(const NetworkParams& params, const Mask* mask, const Tensor& batch) {
  check_batch(params, batch);
  check_mask_fits(params, mask);
  ForwardTrace t;
  ad::NodeId h = t.tape.constant(batch);
  std::size_t offset = 0;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const auto& layer = params.layers[l];
    const ad::NodeId w = t.tape.parameter(masked(layer.weight, mask, offset));
    offset += layer.weight.size();
    const ad::NodeId b = t.tape.parameter(masked(layer.bias, mask, offset));
    offset += layer.bias.size();
    t.weights.push_back(w);
    t.biases.push_back(b);
    const ad::NodeId z = t.tape.affine(h, w, b);
    if (params.specs[l].activation == Activation::relu) {
      t.preacts.push_back(z);
      h = t.tape.relu(z);
    } else {
      h = z;
    }
  }
  t.logits = h;
  return t;
}

Tensor forward(const NetworkParams& params, const Mask* mask, const Tensor& batch) {
  ForwardTrace t = trace_forward(params, mask, batch);
  return t.tape.value(t.logits);
}

NetworkGrads collect_grads(const ForwardTrace& trace, const ad::Gradients& grads) {
  NetworkGrads out;
  for (std::size_t l = 0; l < trace.weights.size(); ++l) {
    out.layers.push_back({grads[trace.weights[l]], grads[trace.biases[l]]});
  }
  for (ad::NodeId z : trace.preacts) {
    const Tensor& g = grads[z];
    const Tensor& v = trace.tape.value(z);
    std::vector<double> mean(v.cols(), 0.0);
    if (!g.empty()) {
      for (std::size_t n = 0; n < g.rows(); ++n) {
        for (std::size_t u = 0; u < g.cols(); ++u) mean[u] += g(n, u);
      }
      for (double& m : mean) m /= static_cast<double>(g.rows());
    }
    out.preact.push_back(std::move(mean));
  }
  return out;
}

void sgd_step(NetworkParams& params, const NetworkGrads& grads, double lr, const Mask* mask) {
  check_mask_fits(params, mask);
  if (grads.layers.size() != params.layers.size()) {
    throw ConfigError("gradient set does not match network");
  }
  for (const auto& g : grads.layers) {
    if (!g.weight.all_finite() || !g.bias.all_finite()) {
      throw NumericalError("non-finite gradient in SGD step");
    }
  }
  std::size_t offset = 0;
  auto update = [&](Tensor& value, const Tensor& grad) {
    if (grad.size() != value.size()) throw ConfigError("gradient shape mismatch in SGD step");
    for (std::size_t i = 0; i < value.size(); ++i) {
      if (mask != nullptr && !mask->weight_keep[offset + i]) {
        value[i] = 0.0;
      } else {
        value[i] -= lr * grad[i];
      }
    }
    offset += value.size();
  };
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    update(params.layers[l].weight, grads.layers[l].weight);
    update(params.layers[l].bias, grads.layers[l].bias);
  }
  for (const auto& l : params.layers) {
    if (!l.weight.all_finite() || !l.bias.all_finite()) {
      throw NumericalError("SGD step produced non-finite parameters");
    }
  }
}

// --- checkpoint ---

namespace {

constexpr char kMagic[4] = {'B', 'L', 'T', 'C'};

template <typename T>
void put_le(std::string& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<char>((value >> (8 * i)) & 0xff));
  }
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <typename T>
  T le(const std::string& field) {
    need(sizeof(T), field);
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      v |= static_cast<T>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(T);
    return v;
  }

  std::string_view take(std::size_t n, const std::string& field) {
    need(n, field);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n, const std::string& field) const {
    if (bytes_.size() - pos_ < n) throw PersistenceError("checkpoint truncated in " + field);
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_checkpoint(const NetworkParams& params) {
  ordered_json manifest;
  manifest["layers"] = ordered_json::array();
  for (const auto& s : params.specs) {
    manifest["layers"].push_back(
        {{"d_in", s.d_in}, {"d_out", s.d_out}, {"activation", to_string(s.activation)}});
  }
  manifest["seed"] = params.seed;
  manifest["epoch"] = params.epoch_tag;
  const std::string text = manifest.dump();

  std::string out(kMagic, sizeof(kMagic));
  put_le<std::uint32_t>(out, kCheckpointVersion);
  put_le<std::uint64_t>(out, text.size());
  out += text;
  for (const auto& l : params.layers) {
    for (double v : l.weight.values()) put_le(out, std::bit_cast<std::uint64_t>(v));
    for (double v : l.bias.values()) put_le(out, std::bit_cast<std::uint64_t>(v));
  }
  return out;
}

NetworkParams decode_checkpoint(std::string_view bytes) {
  Reader in(bytes);
  if (in.take(4, "magic") != std::string_view(kMagic, 4)) {
    throw PersistenceError("checkpoint has bad magic bytes");
  }
  const auto version = in.le<std::uint32_t>("version");
  if (version != kCheckpointVersion) {
    throw PersistenceError("checkpoint version " + std::to_string(version) + " unsupported (expected " +
                           std::to_string(kCheckpointVersion) + ")");
  }
  const auto manifest_len = in.le<std::uint64_t>("manifest length");
  if (manifest_len > in.remaining()) throw PersistenceError("checkpoint truncated in manifest");
  const auto text = in.take(static_cast<std::size_t>(manifest_len), "manifest");

  NetworkParams p;
  try {
    const auto manifest = nlohmann::json::parse(text);
    for (const auto& l : manifest.at("layers")) {
      p.specs.push_back({l.at("d_in").get<std::size_t>(), l.at("d_out").get<std::size_t>(),
                         activation_from_string(l.at("activation").get<std::string>())});
    }
    p.seed = manifest.at("seed").get<std::uint64_t>();
    p.epoch_tag = manifest.at("epoch").get<std::size_t>();
    validate_specs(p.specs);
  } catch (const nlohmann::json::exception& e) {
    throw PersistenceError(std::string("checkpoint manifest invalid: ") + e.what());
  } catch (const ConfigError& e) {
    throw PersistenceError(std::string("checkpoint manifest invalid: ") + e.what());
  }

  for (std::size_t l = 0; l < p.specs.size(); ++l) {
    const auto& s = p.specs[l];
    DenseLayer layer{Tensor({s.d_in, s.d_out}), Tensor({s.d_out})};
    const std::string name = "layer " + std::to_string(l);
    for (double& v : layer.weight.values()) {
      v = std::bit_cast<double>(in.le<std::uint64_t>(name + " weights"));
    }
    for (double& v : layer.bias.values()) {
      v = std::bit_cast<double>(in.le<std::uint64_t>(name + " bias"));
    }
    p.layers.push_back(std::move(layer));
  }
  if (in.remaining() != 0) {
    throw PersistenceError("checkpoint has " + std::to_string(in.remaining()) + " trailing bytes");
  }
  return p;
}

void save_checkpoint(const NetworkParams& params, const std::filesystem::path& path) {
  const std::string bytes = encode_checkpoint(params);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw PersistenceError("cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw PersistenceError("failed writing " + path.string());
}

NetworkParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PersistenceError("cannot open checkpoint " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return decode_checkpoint(buf.str());
}

NetworkParams load_checkpoint(const std::filesystem::path& path,
                              std::span<const LayerSpec> expected) {
  NetworkParams p = load_checkpoint(path);
  if (p.specs.size() != expected.size()) {
    throw PersistenceError("checkpoint has " + std::to_string(p.specs.size()) + " layers, expected " +
                           std::to_string(expected.size()));
  }
  for (std::size_t l = 0; l < expected.size(); ++l) {
    if (!(p.specs[l] == expected[l])) {
      throw PersistenceError("checkpoint layer " + std::to_string(l) + " is " +
                             std::to_string(p.specs[l].d_in) + "->" +
                             std::to_string(p.specs[l].d_out) + ", expected " +
                             std::to_string(expected[l].d_in) + "->" +
                             std::to_string(expected[l].d_out));
    }
  }
  return p;
}

}  // namespace ballot
