#include "ucdir/encoder.hpp"

#include <cmath>
#include <string>

#include "ucdir/error.hpp"
#include "ucdir/rng.hpp"

namespace ucdir {

std::vector<std::size_t> EncoderParams::layer_dims() const {
  std::vector<std::size_t> dims;
  if (layers.empty()) return dims;
  dims.push_back(layers.front().weight.rows());
  for (const auto& l : layers) dims.push_back(l.weight.cols());
  return dims;
}

std::size_t EncoderParams::input_dim() const {
  return layers.empty() ? 0 : layers.front().weight.rows();
}

std::size_t EncoderParams::output_dim() const {
  return layers.empty() ? 0 : layers.back().weight.cols();
}

std::vector<DenseArray> EncoderParams::arrays() const {
  std::vector<DenseArray> out;
  out.reserve(2 * layers.size());
  for (const auto& l : layers) {
    out.push_back(l.weight);
    out.push_back(l.bias);
  }
  return out;
}

EncoderParams EncoderParams::from_arrays(std::span<const DenseArray> arrays) {
  if (arrays.size() % 2 != 0) throw StructuralError("encoder arrays must come in (weight, bias) pairs");
  EncoderParams p;
  for (std::size_t i = 0; i < arrays.size(); i += 2) p.layers.push_back({arrays[i], arrays[i + 1]});
  p.validate();
  return p;
}

void EncoderParams::validate() const {
  if (layers.empty()) throw StructuralError("encoder has no layers");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& layer = layers[l];
    if (layer.bias.rows() != 1 || layer.bias.cols() != layer.weight.cols()) {
      throw StructuralError("layer " + std::to_string(l) + ": bias shape " + layer.bias.shape().str() +
                            " does not match weight " + layer.weight.shape().str());
    }
    if (l > 0 && layers[l - 1].weight.cols() != layer.weight.rows()) {
      throw StructuralError("layer " + std::to_string(l) + ": input dim " +
                            std::to_string(layer.weight.rows()) + " does not chain with previous output " +
                            std::to_string(layers[l - 1].weight.cols()));
    }
    if (!layer.weight.all_finite() || !layer.bias.all_finite()) {
      throw StructuralError("layer " + std::to_string(l) + " has non-finite parameters");
    }
  }
}

EncoderParams init_params(std::uint64_t seed, std::span<const std::size_t> layer_dims) {
  if (layer_dims.size() < 2) throw StructuralError("init_params: need at least input and output dims");
  Rng rng(derive_seed(seed, "encoder.init"));
  EncoderParams p;
  for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
    const std::size_t din = layer_dims[l], dout = layer_dims[l + 1];
    if (din == 0 || dout == 0) throw StructuralError("init_params: zero layer dimension");
    const double s = std::sqrt(6.0 / static_cast<double>(din + dout));
    std::uniform_real_distribution<double> dist(-s, s);
    DenseArray w(din, dout);
    for (auto& v : w.data()) v = dist(rng);
    p.layers.push_back({std::move(w), DenseArray(1, dout)});
  }
  return p;
}

std::vector<std::size_t> default_layer_dims(std::size_t input_dim, std::size_t output_dim) {
  return {input_dim, 32, output_dim};
}

std::vector<NodeId> EncoderNodes::ordered() const {
  std::vector<NodeId> out;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    out.push_back(weights[i]);
    out.push_back(biases[i]);
  }
  return out;
}

EncoderNodes place(Tape& tape, const EncoderParams& params, bool trainable) {
  params.validate();
  EncoderNodes nodes;
  for (const auto& l : params.layers) {
    nodes.weights.push_back(trainable ? tape.parameter(l.weight) : tape.constant(l.weight));
    nodes.biases.push_back(trainable ? tape.parameter(l.bias) : tape.constant(l.bias));
  }
  return nodes;
}

EncoderNodes wrap(std::span<const NodeId> ordered) {
  if (ordered.empty() || ordered.size() % 2 != 0) {
    throw StructuralError("encoder node list must come in (weight, bias) pairs");
  }
  EncoderNodes nodes;
  for (std::size_t i = 0; i < ordered.size(); i += 2) {
    nodes.weights.push_back(ordered[i]);
    nodes.biases.push_back(ordered[i + 1]);
  }
  return nodes;
}

NodeId encode(Tape& tape, const EncoderNodes& nodes, NodeId inputs) {
  NodeId h = inputs;
  for (std::size_t l = 0; l < nodes.weights.size(); ++l) {
    h = tape.add_row(tape.matmul(h, nodes.weights[l]), nodes.biases[l]);
    if (l + 1 < nodes.weights.size()) h = tape.tanh(h);
  }
  return tape.l2_normalize_rows(h);
}

DenseArray encode(const EncoderParams& params, const DenseArray& inputs) {
  if (inputs.rows() == 0) throw UsageError("encode: empty batch");
  if (inputs.cols() != params.input_dim()) {
    throw StructuralError("encode: input dim " + std::to_string(inputs.cols()) +
                          " does not match encoder input dim " + std::to_string(params.input_dim()));
  }
  if (!inputs.all_finite()) throw NumericError("encode: non-finite input");
  Tape tape;
  const EncoderNodes nodes = place(tape, params, false);
  const NodeId out = encode(tape, nodes, tape.constant(inputs));
  return tape.forward(out);
}

MomentumParams momentum_update(const EncoderParams& theta, MomentumParams theta_m) {
  if (theta.layer_dims() != theta_m.params.layer_dims()) {
    throw StructuralError("momentum_update: encoder and momentum shapes differ");
  }
  if (!(theta_m.m >= 0.0 && theta_m.m <= 1.0)) throw ConfigError("momentum coefficient must lie in [0,1]");
  const double m = theta_m.m;
  for (std::size_t l = 0; l < theta.layers.size(); ++l) {
    auto& w = theta_m.params.layers[l].weight.data();
    auto& b = theta_m.params.layers[l].bias.data();
    const auto& tw = theta.layers[l].weight.data();
    const auto& tb = theta.layers[l].bias.data();
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = m * w[i] + (1.0 - m) * tw[i];
    for (std::size_t i = 0; i < b.size(); ++i) b[i] = m * b[i] + (1.0 - m) * tb[i];
  }
  return theta_m;
}

}  // namespace ucdir
