#pragma once

#include <cstddef>
#include <span>

#include "ucdir/clustering.hpp"
#include "ucdir/dense.hpp"

namespace ucdir {

/// Momentum features x'_i for every sample of one domain, indexed by the
/// sample's position within that domain.
struct FeatureBank {
  Domain domain = Domain::A;
  DenseArray features;  // N x d, unit rows

  std::size_t size() const { return features.rows(); }
  std::size_t dim() const { return features.cols(); }

  /// Overwrites rows `indices` with the matching rows of `fresh`.
  void overwrite(std::span<const std::size_t> indices, const DenseArray& fresh);
};

struct FeatureBanks {
  FeatureBank a{Domain::A, {}};
  FeatureBank b{Domain::B, {}};

  FeatureBank& operator[](Domain d) { return d == Domain::A ? a : b; }
  const FeatureBank& operator[](Domain d) const { return d == Domain::A ? a : b; }
};

}  // namespace ucdir
