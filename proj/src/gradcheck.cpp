#include "ucdir/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ucdir/error.hpp"

namespace ucdir {
namespace {

double evaluate(const GraphBuilder& build, const std::vector<DenseArray>& params) {
  Tape tape;
  std::vector<NodeId> ids;
  ids.reserve(params.size());
  for (const auto& p : params) ids.push_back(tape.constant(p));
  try {
    return tape.forward(build(tape, ids)).item();
  } catch (const CollapseError&) {
    return std::numeric_limits<double>::quiet_NaN();
  }
}

}  // namespace

GradCheckReport grad_check(const GraphBuilder& build, const std::vector<DenseArray>& params,
                           double h) {
  if (!(h > 0.0)) throw UsageError("grad_check: step must be positive");

  Tape tape;
  std::vector<NodeId> ids;
  ids.reserve(params.size());
  for (const auto& p : params) ids.push_back(tape.parameter(p));
  const NodeId root = build(tape, ids);
  tape.forward(root);
  tape.backward(root);

  GradCheckReport report;
  std::vector<DenseArray> probe = params;
  for (std::size_t k = 0; k < params.size(); ++k) {
    const DenseArray analytic = tape.gradient(ids[k]).value();
    for (std::size_t i = 0; i < params[k].size(); ++i) {
      const double x0 = params[k][i];
      probe[k][i] = x0 + h;
      const double up = evaluate(build, probe);
      probe[k][i] = x0 - h;
      const double down = evaluate(build, probe);
      probe[k][i] = x0;
      ++report.coordinates;
      if (!std::isfinite(up) || !std::isfinite(down)) {
        report.failure = "non-finite loss when perturbing parameter " + std::to_string(k) +
                         " coordinate " + std::to_string(i);
        report.worst_param = k;
        report.worst_index = i;
        return report;
      }
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic[i];
      const double err =
          std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
      if (err > report.max_rel_error) {
        report.max_rel_error = err;
        report.worst_param = k;
        report.worst_index = i;
      }
    }
  }
  return report;
}

}  // namespace ucdir
