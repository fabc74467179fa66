#include "ucdir/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <thread>

#include "ucdir/error.hpp"
#include "ucdir/rng.hpp"

namespace ucdir {
namespace {

std::size_t nearest(const DenseArray& centroids, std::span<const double> x) {
  std::size_t best = 0;
  double best_dot = -std::numeric_limits<double>::infinity();
  for (std::size_t u = 0; u < centroids.rows(); ++u) {
    const double s = dot(x, centroids.row_span(u));
    if (s > best_dot) {
      best_dot = s;
      best = u;
    }
  }
  return best;
}

void assign_all(const DenseArray& features, const DenseArray& centroids,
                std::vector<std::size_t>& out, unsigned threads) {
  const std::size_t n = features.rows();
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) out[i] = nearest(centroids, features.row_span(i));
  };
  const std::size_t workers = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(1, n / 256));
  if (workers <= 1) {
    work(0, n);
    return;
  }
  std::vector<std::thread> pool;
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = w * chunk, end = std::min(n, begin + chunk);
    if (begin < end) pool.emplace_back(work, begin, end);
  }
  for (auto& t : pool) t.join();
}

DenseArray seed_plus_plus(const DenseArray& x, std::size_t k, Rng& rng) {
  const std::size_t n = x.rows();
  DenseArray c(k, x.cols());
  std::vector<double> dist(n, std::numeric_limits<double>::infinity());
  std::vector<char> chosen(n, 0);
  std::size_t pick = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
  for (std::size_t u = 0; u < k; ++u) {
    chosen[pick] = 1;
    std::copy_n(x.row_span(pick).begin(), x.cols(), c.row_span(u).begin());
    if (u + 1 == k) break;
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      dist[i] = std::min(dist[i], std::max(0.0, 1.0 - dot(x.row_span(i), c.row_span(u))));
      if (!chosen[i]) total += dist[i];
    }
    if (total > 0.0) {
      double r = std::uniform_real_distribution<double>(0.0, total)(rng);
      pick = n;
      for (std::size_t i = 0; i < n; ++i) {
        if (chosen[i] || dist[i] <= 0.0) continue;
        pick = i;
        r -= dist[i];
        if (r < 0.0) break;
      }
    } else {
      pick = n;
    }
    if (pick == n) {
      // all remaining points coincide with chosen centroids
      pick = static_cast<std::size_t>(std::find(chosen.begin(), chosen.end(), 0) - chosen.begin());
    }
  }
  return c;
}

void repair_empty(const DenseArray& x, DenseArray& c, std::vector<std::size_t>& y) {
  const std::size_t k = c.rows();
  std::vector<std::size_t> counts(k, 0);
  for (std::size_t v : y) ++counts[v];
  for (std::size_t u = 0; u < k; ++u) {
    if (counts[u] > 0) continue;
    std::size_t far = x.rows();
    double worst = -1.0;
    for (std::size_t i = 0; i < x.rows(); ++i) {
      if (counts[y[i]] < 2) continue;
      const double d = 1.0 - dot(x.row_span(i), c.row_span(y[i]));
      if (d > worst) {
        worst = d;
        far = i;
      }
    }
    if (far == x.rows()) break;  // cannot happen while N >= K
    --counts[y[far]];
    y[far] = u;
    counts[u] = 1;
    std::copy_n(x.row_span(far).begin(), x.cols(), c.row_span(u).begin());
  }
}

// Normalized member means; returns largest centroid displacement.
double update_centroids(const DenseArray& x, DenseArray& c, const std::vector<std::size_t>& y) {
  DenseArray sums(c.rows(), c.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto s = sums.row_span(y[i]);
    const auto xi = x.row_span(i);
    for (std::size_t j = 0; j < x.cols(); ++j) s[j] += xi[j];
  }
  double moved = 0.0;
  for (std::size_t u = 0; u < c.rows(); ++u) {
    auto s = sums.row_span(u);
    const double norm = l2_norm(s);
    if (norm < 1e-12) continue;  // members cancel out; keep the old centroid
    double d2 = 0.0;
    auto cu = c.row_span(u);
    for (std::size_t j = 0; j < c.cols(); ++j) {
      const double v = s[j] / norm;
      d2 += (v - cu[j]) * (v - cu[j]);
      cu[j] = v;
    }
    moved = std::max(moved, std::sqrt(d2));
  }
  return moved;
}

ClusterModel lloyd(const DenseArray& features, const KMeansOptions& options, std::uint64_t seed,
                   Domain domain) {
  const std::size_t n = features.rows();
  Rng rng(seed);
  ClusterModel model;
  model.domain = domain;
  model.centroids = seed_plus_plus(features, options.k, rng);
  model.assignments.assign(n, 0);

  for (std::size_t it = 0; it < options.max_iter; ++it) {
    assign_all(features, model.centroids, model.assignments, options.threads);
    repair_empty(features, model.centroids, model.assignments);
    model.inertia_trace.push_back(cluster_inertia(features, model.centroids, model.assignments));
    ++model.iterations;
    const double moved = update_centroids(features, model.centroids, model.assignments);
    if (moved < options.tol) break;
  }
  // Final assignment against the final centroids so every point sits at its
  // nearest centroid.
  assign_all(features, model.centroids, model.assignments, options.threads);
  repair_empty(features, model.centroids, model.assignments);
  model.inertia = cluster_inertia(features, model.centroids, model.assignments);
  model.inertia_trace.push_back(model.inertia);
  return model;
}

}  // namespace

std::string_view to_string(Domain d) { return d == Domain::A ? "A" : "B"; }

Domain parse_domain(std::string_view s) {
  if (s == "A") return Domain::A;
  if (s == "B") return Domain::B;
  throw DataError("unknown domain '" + std::string(s) + "' (expected A or B)");
}

double cluster_inertia(const DenseArray& features, const DenseArray& centroids,
                       std::span<const std::size_t> assignments) {
  double total = 0.0;
  for (std::size_t i = 0; i < features.rows(); ++i) {
    total += 1.0 - dot(features.row_span(i), centroids.row_span(assignments[i]));
  }
  return total;
}

ClusterModel kmeans(const DenseArray& features, const KMeansOptions& options, Domain domain) {
  const std::size_t n = features.rows(), k = options.k;
  if (k < 1) throw UsageError("kmeans: K must be at least 1");
  if (n < k) {
    throw UsageError("kmeans: N=" + std::to_string(n) + " is smaller than K=" + std::to_string(k));
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double norm = l2_norm(features.row_span(i));
    if (!(std::abs(norm - 1.0) <= kUnitNormTolerance)) {
      throw UsageError("kmeans: feature " + std::to_string(i) + " is not unit-norm (norm " +
                       std::to_string(norm) + ")");
    }
  }

  if (options.restarts < 1) throw UsageError("kmeans: restarts must be at least 1");
  ClusterModel best;
  for (std::size_t r = 0; r < options.restarts; ++r) {
    const std::uint64_t seed = r == 0 ? options.seed : derive_seed(options.seed, "kmeans.restart", r);
    ClusterModel model = lloyd(features, options, seed, domain);
    if (r == 0 || model.inertia < best.inertia) best = std::move(model);
  }
  return best;
}

std::size_t assign(const ClusterModel& model, std::span<const double> feature) {
  if (feature.size() != model.dim()) {
    throw StructuralError("assign: feature dim " + std::to_string(feature.size()) +
                          " does not match centroid dim " + std::to_string(model.dim()));
  }
  return nearest(model.centroids, feature);
}

ClusterModel permute_centroids(const ClusterModel& model, std::span<const std::size_t> permutation) {
  const std::size_t k = model.k();
  if (permutation.size() != k) throw UsageError("permute_centroids: permutation length differs from K");
  std::vector<char> seen(k, 0);
  for (std::size_t p : permutation) {
    if (p >= k || seen[p]) throw UsageError("permute_centroids: not a bijection on [0,K)");
    seen[p] = 1;
  }
  ClusterModel out = model;
  for (std::size_t u = 0; u < k; ++u) {
    std::copy_n(model.centroids.row_span(u).begin(), model.dim(),
                out.centroids.row_span(permutation[u]).begin());
  }
  for (auto& y : out.assignments) y = permutation[y];
  return out;
}

}  // namespace ucdir
