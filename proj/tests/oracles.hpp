#pragma once

// Explicit-loop reference evaluations used as test oracles. Nothing here
// calls into the library's loss, clustering or retrieval code.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

namespace oracle {

using Vec = std::vector<double>;
using Mat = std::vector<Vec>;

inline double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm(const Vec& a) { return std::sqrt(dot(a, a)); }

// Instance-wise loss for one domain: sum_i -log(exp(x_i.v_i/tau) / sum_a exp(x_i.k_a/tau)),
// keys = bank with batch rows replaced by their views.
inline double instance_wise(const Mat& x, const std::vector<std::size_t>& idx, const Mat& keys, double tau) {
  double total = 0.0;
  for (std::size_t r = 0; r < x.size(); ++r) {
    double denom = 0.0;
    for (const auto& k : keys) denom += std::exp(dot(x[r], k) / tau);
    total += -std::log(std::exp(dot(x[r], keys[idx[r]]) / tau) / denom);
  }
  return total;
}

// Cluster-wise loss for one domain with pseudo-labels y over the bank.
inline double cluster_wise(const Mat& x, const std::vector<std::size_t>& idx, const Mat& keys,
                           const std::vector<std::size_t>& y, double tau) {
  double total = 0.0;
  for (std::size_t r = 0; r < x.size(); ++r) {
    double denom = 0.0;
    for (const auto& k : keys) denom += std::exp(dot(x[r], k) / tau);
    std::size_t count = 0;
    double inner = 0.0;
    for (std::size_t p = 0; p < keys.size(); ++p) {
      if (y[p] != y[idx[r]]) continue;
      ++count;
      inner += std::log(std::exp(dot(x[r], keys[p]) / tau) / denom);
    }
    total += -inner / static_cast<double>(count);
  }
  return total;
}

// Clustering probabilities softmax(x.C^T / phi).
inline Vec probs(const Vec& x, const Mat& centroids, double phi) {
  Vec e(centroids.size());
  double z = 0.0;
  for (std::size_t u = 0; u < centroids.size(); ++u) {
    e[u] = std::exp(dot(x, centroids[u]) / phi);
    z += e[u];
  }
  for (double& v : e) v /= z;
  return e;
}

// In-domain distance between two probability vectors.
inline double cosine_distance(const Vec& p, const Vec& q) { return 1.0 - dot(p, q) / (norm(p) * norm(q)); }

// DD loss summed over ordered pairs within each domain's batch.
inline double dd(const Mat& xa, const Mat& xb, const Mat& ca, const Mat& cb, double phi) {
  double total = 0.0;
  for (const Mat* xs : {&xa, &xb}) {
    for (std::size_t i = 0; i < xs->size(); ++i) {
      for (std::size_t j = 0; j < xs->size(); ++j) {
        if (i == j) continue;
        const double da = cosine_distance(probs((*xs)[i], ca, phi), probs((*xs)[j], ca, phi));
        const double db = cosine_distance(probs((*xs)[i], cb, phi), probs((*xs)[j], cb, phi));
        total += (da - db) * (da - db);
      }
    }
  }
  return total;
}

inline double shannon(const Vec& p) {
  double h = 0.0;
  for (double v : p) h -= v * std::log(v);
  return h;
}

// Self-entropy over the batch.
inline double self_entropy(const Mat& xa, const Mat& xb, const Mat& ca, const Mat& cb, double phi) {
  double total = 0.0;
  for (const Mat* xs : {&xa, &xb}) {
    for (const auto& x : *xs) total += shannon(probs(x, ca, phi)) + shannon(probs(x, cb, phi));
  }
  return total;
}

// Minimum spherical K-means inertia over all 2-partitions of the points;
// returns the best labeling (label of point 0 fixed to 0).
inline std::vector<std::size_t> best_two_partition(const Mat& x, double* best_inertia = nullptr) {
  const std::size_t n = x.size();
  double best = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> best_labels;
  for (std::uint32_t mask = 0; mask < (1u << (n - 1)); ++mask) {
    std::vector<std::size_t> labels(n, 0);
    for (std::size_t i = 1; i < n; ++i) labels[i] = (mask >> (i - 1)) & 1u;
    double inertia = 0.0;
    bool nonempty = true;
    for (std::size_t c = 0; c < 2; ++c) {
      Vec s(x[0].size(), 0.0);
      std::size_t members = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (labels[i] != c) continue;
        ++members;
        for (std::size_t j = 0; j < s.size(); ++j) s[j] += x[i][j];
      }
      if (members == 0) {
        nonempty = false;
        break;
      }
      inertia += static_cast<double>(members) - norm(s);  // sum(1 - x.c) with c = s/|s|
    }
    if (nonempty && inertia < best) {
      best = inertia;
      best_labels = labels;
    }
  }
  if (best_inertia) *best_inertia = best;
  return best_labels;
}

// P@k by full sort of (distance, id) pairs and counting.
inline std::vector<double> precision_at(const Mat& q, const std::vector<int>& ql, const Mat& g,
                                        const std::vector<int>& gl, const std::vector<std::int64_t>& gid,
                                        const std::vector<std::size_t>& ks) {
  std::vector<double> out(ks.size(), 0.0);
  for (std::size_t a = 0; a < q.size(); ++a) {
    std::vector<std::pair<double, std::int64_t>> ranked;
    std::vector<int> label_of;
    for (std::size_t b = 0; b < g.size(); ++b) ranked.push_back({1.0 - dot(q[a], g[b]), gid[b]});
    std::sort(ranked.begin(), ranked.end());
    for (std::size_t t = 0; t < ks.size(); ++t) {
      std::size_t hits = 0;
      for (std::size_t i = 0; i < ks[t]; ++i) {
        const std::size_t b = static_cast<std::size_t>(
            std::find(gid.begin(), gid.end(), ranked[i].second) - gid.begin());
        hits += gl[b] == ql[a] ? 1 : 0;
      }
      out[t] += static_cast<double>(hits) / static_cast<double>(ks[t]);
    }
  }
  for (double& v : out) v /= static_cast<double>(q.size());
  return out;
}

}  // namespace oracle
