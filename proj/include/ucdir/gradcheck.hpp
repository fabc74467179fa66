#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ucdir/dense.hpp"
#include "ucdir/tape.hpp"

namespace ucdir {

/// Builds a scalar loss graph on `tape` from parameter leaves already placed on it.
using GraphBuilder = std::function<NodeId(Tape& tape, std::span<const NodeId> params)>;

struct GradCheckReport {
  /// max over coordinates of |analytic - numeric| / max(1, |analytic|, |numeric|)
  double max_rel_error = 0.0;
  std::size_t worst_param = 0;
  std::size_t worst_index = 0;
  std::size_t coordinates = 0;
  /// Set when the loss was non-finite at a perturbed point.
  std::optional<std::string> failure;

  bool ok(double tolerance) const { return !failure && max_rel_error < tolerance; }
};

/// Compares backward() against central finite differences with step h.
GradCheckReport grad_check(const GraphBuilder& build, const std::vector<DenseArray>& params,
                           double h = 1e-5);

}  // namespace ucdir
