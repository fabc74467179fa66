#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "ucdir/bank.hpp"
#include "ucdir/clustering.hpp"
#include "ucdir/encoder.hpp"
#include "ucdir/losses.hpp"
#include "ucdir/rng.hpp"
#include "ucdir/tape.hpp"

namespace ucdir {

/// Small random problem used by gradient and invariance checks: a tiny
/// encoder, raw batch inputs per domain, momentum view features, full banks
/// and a cluster model per domain.
struct LossInstance {
  EncoderParams theta;
  DenseArray inputs_a;
  DenseArray inputs_b;
  std::vector<std::size_t> indices_a;
  std::vector<std::size_t> indices_b;
  DenseArray views_a;
  DenseArray views_b;
  FeatureBanks banks;
  ClusterModel clusters_a;
  ClusterModel clusters_b;
  LossConfig cfg;
  int epoch = 0;

  ClusterPair clusters() const { return {&clusters_a, &clusters_b}; }
  /// Encodes the raw inputs with `nodes` and assembles the batch.
  BatchView batch(Tape& tape, const EncoderNodes& nodes) const;
};

struct InstanceShape {
  std::size_t max_batch = 8;  // per domain
  std::size_t max_dim = 8;    // feature dim
  std::size_t max_k = 4;
  std::size_t d_in = 5;
};

LossInstance random_loss_instance(std::uint64_t seed, const InstanceShape& shape = {});

enum class LossKind { IW, CW, DD, SE, Total };

std::string_view to_string(LossKind k);

/// Builds the requested loss on `tape` with encoder parameters `params`
/// (ordered as EncoderParams::arrays()).
NodeId build_loss(Tape& tape, const LossInstance& inst, LossKind kind, std::span<const NodeId> params);

/// Random unit vectors, one per row.
DenseArray random_unit_rows(std::size_t rows, std::size_t cols, Rng& rng);

}  // namespace ucdir
