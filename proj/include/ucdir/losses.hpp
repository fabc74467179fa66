#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "ucdir/bank.hpp"
#include "ucdir/clustering.hpp"
#include "ucdir/dense.hpp"
#include "ucdir/tape.hpp"

namespace ucdir {

/// Mean divides each summed loss by its number of terms before weighting;
/// Sum keeps the raw sums.
enum class Reduction { Mean, Sum };

/// Ablation variants: v1 = IW, v2 = IW+CW, v3 = IW+CW+SE, full = all.
enum class Variant { V1, V2, V3, Full };

std::string_view to_string(Variant v);
Variant parse_variant(std::string_view s);
std::string_view to_string(Reduction r);
Reduction parse_reduction(std::string_view s);

struct LossConfig {
  double tau = 0.2;    // contrastive temperature
  double phi = 0.1;    // clustering-probability temperature
  double alpha = 1.0;  // peak cluster-wise weight
  double beta = 1.0;   // distance-of-distance weight
  double gamma = 0.5;  // self-entropy weight
  int t1 = 20;         // ramp start epoch
  int t2 = 100;        // ramp end epoch
  bool use_cw = true;
  bool use_se = true;
  bool use_dd = true;
  Reduction reduction = Reduction::Mean;

  void validate() const;
};

LossConfig apply_variant(LossConfig cfg, Variant v);

/// Softmax output: strictly positive entries summing to one.
class ProbabilityVector {
 public:
  /// Throws UsageError unless entries are > 0 and sum to 1 within 1e-9.
  explicit ProbabilityVector(std::vector<double> probs);
  /// Softmax of logits / temperature with max subtraction.
  static ProbabilityVector softmax(std::span<const double> logits, double temperature = 1.0);

  std::span<const double> values() const { return probs_; }
  std::size_t size() const { return probs_.size(); }
  double operator[](std::size_t i) const { return probs_[i]; }

 private:
  std::vector<double> probs_;
};

/// -sum p ln p, with 0 ln 0 = 0.
double entropy(std::span<const double> p);
/// Clustering probabilities of one feature against a cluster model's centroids.
ProbabilityVector clustering_probabilities(std::span<const double> feature, const ClusterModel& clusters,
                                           double phi);
/// Cosine distance 1 - p.q / (|p||q|). Throws UsageError on a zero-norm input.
double in_domain_distance(std::span<const double> p, std::span<const double> q);
/// Squared difference of two in-domain distances.
double dd_pair(double d_a, double d_b);

/// lambda(ep): 0 up to t1, linear ramp to alpha, alpha from t2 on.
double lambda_schedule(int ep, const LossConfig& cfg);

/// The slice of a training batch drawn from one domain.
struct DomainBatch {
  std::vector<std::size_t> indices;  // positions within the domain's bank
  std::optional<NodeId> features;    // trainable embeddings x_i, one row per index
  DenseArray view_features;          // momentum embeddings x'_i of the views

  std::size_t size() const { return indices.size(); }
};

struct BatchView {
  DomainBatch a;
  DomainBatch b;

  DomainBatch& operator[](Domain d) { return d == Domain::A ? a : b; }
  const DomainBatch& operator[](Domain d) const { return d == Domain::A ? a : b; }
};

/// Cluster models for both domains; either may be absent before the first
/// clustering pass.
struct ClusterPair {
  const ClusterModel* a = nullptr;
  const ClusterModel* b = nullptr;

  const ClusterModel* operator[](Domain d) const { return d == Domain::A ? a : b; }
  bool complete() const { return a != nullptr && b != nullptr; }
};

// Tape-level losses. Bank rows and centroids enter as constants; only the
// batch features carry gradients. A batch sample's bank row is replaced by
// its fresh view feature before the contrastive denominators are formed.

NodeId instance_wise_loss(Tape& tape, const BatchView& batch, const FeatureBanks& banks,
                          const LossConfig& cfg);
NodeId cluster_wise_loss(Tape& tape, const BatchView& batch, const FeatureBanks& banks,
                         const ClusterPair& clusters, const LossConfig& cfg);
NodeId in_domain_loss(Tape& tape, const BatchView& batch, const FeatureBanks& banks,
                      const ClusterPair& clusters, int ep, const LossConfig& cfg);

/// Row-wise clustering probabilities (b x K) of tape features (b x d).
NodeId clustering_probabilities(Tape& tape, NodeId features, const ClusterModel& clusters, double phi);
/// Pairwise in-domain distance matrix (b x b) of probability rows (b x K).
NodeId in_domain_distance(Tape& tape, NodeId probabilities);
/// Elementwise squared difference of two same-shape distance nodes.
NodeId dd_pair(Tape& tape, NodeId d_a, NodeId d_b);

NodeId dd_loss(Tape& tape, const BatchView& batch, const ClusterPair& clusters, const LossConfig& cfg);
NodeId self_entropy_loss(Tape& tape, const BatchView& batch, const ClusterPair& clusters,
                         const LossConfig& cfg);

struct LossTerms {
  NodeId total;
  std::optional<NodeId> iw;
  std::optional<NodeId> cw;
  std::optional<NodeId> dd;
  std::optional<NodeId> se;
  double lambda = 0.0;
};

/// Unweighted component values read back after forward(). Disabled
/// components are nullopt.
struct LossValues {
  double total = 0.0;
  std::optional<double> iw;
  std::optional<double> cw;
  std::optional<double> dd;
  std::optional<double> se;
  double lambda = 0.0;
};

/// L_IW + lambda L_CW + beta L_DD + gamma L_SE with terms gated by the config
/// toggles. CW, DD and SE are skipped while cluster models are missing.
LossTerms total_loss(Tape& tape, const BatchView& batch, const FeatureBanks& banks,
                     const ClusterPair& clusters, int ep, const LossConfig& cfg);
LossValues read_values(const Tape& tape, const LossTerms& terms);

}  // namespace ucdir
