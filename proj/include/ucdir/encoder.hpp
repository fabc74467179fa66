#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "ucdir/dense.hpp"
#include "ucdir/tape.hpp"

namespace ucdir {

struct Layer {
  DenseArray weight;  // d_in x d_out
  DenseArray bias;    // 1 x d_out

  bool operator==(const Layer&) const = default;
};

/// MLP feature extractor: tanh between layers, none after the last, and
/// row-wise L2 normalization of the output.
struct EncoderParams {
  std::vector<Layer> layers;

  std::vector<std::size_t> layer_dims() const;
  std::size_t input_dim() const;
  std::size_t output_dim() const;

  /// Parameters as (w0, b0, w1, b1, ...).
  std::vector<DenseArray> arrays() const;
  static EncoderParams from_arrays(std::span<const DenseArray> arrays);

  /// Throws StructuralError if dims do not chain or a value is non-finite.
  void validate() const;

  bool operator==(const EncoderParams&) const = default;
};

/// Momentum twin. Never receives gradients.
struct MomentumParams {
  EncoderParams params;
  double m = 0.99;

  bool operator==(const MomentumParams&) const = default;
};

inline constexpr double kDefaultMomentum = 0.99;

/// Xavier-uniform weights, zero biases. layer_dims = (d_in, h1, ..., d).
EncoderParams init_params(std::uint64_t seed, std::span<const std::size_t> layer_dims);

/// Default architecture input -> 32 -> d.
std::vector<std::size_t> default_layer_dims(std::size_t input_dim, std::size_t output_dim = 16);

/// Tape handles for one set of encoder parameters.
struct EncoderNodes {
  std::vector<NodeId> weights;
  std::vector<NodeId> biases;

  /// Parameter ids in the same order as EncoderParams::arrays().
  std::vector<NodeId> ordered() const;
};

/// Places parameters on the tape, as trainable leaves or as constants.
EncoderNodes place(Tape& tape, const EncoderParams& params, bool trainable);
/// Wraps existing parameter nodes given in EncoderParams::arrays() order.
EncoderNodes wrap(std::span<const NodeId> ordered);

/// Differentiable encoding of a batch (rows) already on the tape.
NodeId encode(Tape& tape, const EncoderNodes& nodes, NodeId inputs);

/// Plain evaluation. Each output row has unit norm. Throws NumericError on
/// non-finite input and CollapseError when a pre-normalization row is ~0.
DenseArray encode(const EncoderParams& params, const DenseArray& inputs);

/// p' <- m p' + (1 - m) p for every parameter.
MomentumParams momentum_update(const EncoderParams& theta, MomentumParams theta_m);

}  // namespace ucdir
