#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "ucdir/dense.hpp"

namespace ucdir {

enum class Domain { A, B };

std::string_view to_string(Domain d);
Domain parse_domain(std::string_view s);

/// Spherical K-means result for one domain.
struct ClusterModel {
  DenseArray centroids;                 // K x d, unit rows
  std::vector<std::size_t> assignments;  // per-sample pseudo-label
  double inertia = 0.0;                  // sum_i (1 - x_i . c_{y_i})
  Domain domain = Domain::A;
  /// Inertia after each assignment step, in iteration order.
  std::vector<double> inertia_trace;
  std::size_t iterations = 0;

  std::size_t k() const { return centroids.rows(); }
  std::size_t dim() const { return centroids.cols(); }
};

struct KMeansOptions {
  std::size_t k = 1;
  std::uint64_t seed = 0;
  std::size_t max_iter = 100;
  double tol = 1e-6;
  /// Independent k-means++ runs; the lowest final inertia wins.
  std::size_t restarts = 20;
  unsigned threads = 1;
};

/// Features handed to kmeans must be unit-norm within this tolerance.
inline constexpr double kUnitNormTolerance = 1e-9;

/// Spherical K-means with k-means++ seeding on cosine distance.
///
/// Ties in assignment go to the lowest centroid index. An empty cluster is
/// repaired by moving the point farthest from its own centroid (taken from a
/// cluster with more than one member) into it as a singleton. Iteration stops
/// once the largest centroid displacement is below tol, or after max_iter.
/// Run r > 0 reseeds with derive_seed(seed, "kmeans.restart", r); ties in
/// final inertia keep the earlier run.
ClusterModel kmeans(const DenseArray& features, const KMeansOptions& options, Domain domain = Domain::A);

/// argmax_u feature . c_u, ties to the lowest index.
std::size_t assign(const ClusterModel& model, std::span<const double> feature);

/// Moves centroid u to position permutation[u] and relabels assignments.
ClusterModel permute_centroids(const ClusterModel& model, std::span<const std::size_t> permutation);

/// sum_i (1 - x_i . c_{y_i}).
double cluster_inertia(const DenseArray& features, const DenseArray& centroids,
                       std::span<const std::size_t> assignments);

}  // namespace ucdir
