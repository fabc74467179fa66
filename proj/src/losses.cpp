#include "ucdir/losses.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "ucdir/error.hpp"

namespace ucdir {
namespace {

constexpr std::array<Domain, 2> kDomains{Domain::A, Domain::B};

// Log-softmax over the domain's bank, one row per batch sample.
struct ContrastiveBlock {
  Domain domain;
  NodeId log_probs;  // b x N
};

ContrastiveBlock contrastive_block(Tape& tape, const DomainBatch& part, const FeatureBank& bank,
                                   double tau) {
  DenseArray keys = bank.features;
  if (part.view_features.rows() != part.size() || part.view_features.cols() != bank.dim()) {
    throw StructuralError("batch domain " + std::string(to_string(bank.domain)) + ": view features " +
                          part.view_features.shape().str() + " for " + std::to_string(part.size()) +
                          " samples of dim " + std::to_string(bank.dim()));
  }
  for (std::size_t r = 0; r < part.size(); ++r) {
    if (part.indices[r] >= bank.size()) {
      throw DataError("missing bank entry " + std::to_string(part.indices[r]) + " in domain " +
                      std::string(to_string(bank.domain)));
    }
  }
  FeatureBank merged{bank.domain, std::move(keys)};
  merged.overwrite(part.indices, part.view_features);
  const NodeId bank_node = tape.constant(std::move(merged.features));
  const NodeId logits = tape.scale(tape.matmul_nt(*part.features, bank_node), 1.0 / tau);
  return {bank.domain, tape.log_softmax_rows(logits)};
}

NodeId iw_sum(Tape& tape, const DomainBatch& part, const ContrastiveBlock& block) {
  const Shape s = tape.shape(block.log_probs);
  DenseArray mask(s.rows, s.cols);
  for (std::size_t r = 0; r < part.size(); ++r) mask(r, part.indices[r]) = 1.0;
  return tape.scale(tape.sum(tape.mul(block.log_probs, tape.constant(std::move(mask)))), -1.0);
}

NodeId cw_sum(Tape& tape, const DomainBatch& part, const ContrastiveBlock& block,
              const ClusterModel& clusters) {
  const Shape s = tape.shape(block.log_probs);
  const auto& y = clusters.assignments;
  if (y.size() != s.cols) {
    throw DataError("cluster model for domain " + std::string(to_string(block.domain)) + " covers " +
                    std::to_string(y.size()) + " samples, bank has " + std::to_string(s.cols));
  }
  std::vector<std::size_t> members(clusters.k(), 0);
  for (std::size_t v : y) ++members.at(v);
  DenseArray weights(s.rows, s.cols);
  for (std::size_t r = 0; r < part.size(); ++r) {
    const std::size_t label = y[part.indices[r]];
    // self is always a member, so |P(i)| >= 1
    const double w = 1.0 / static_cast<double>(members[label]);
    for (std::size_t p = 0; p < s.cols; ++p) {
      if (y[p] == label) weights(r, p) = w;
    }
  }
  return tape.scale(tape.sum(tape.mul(block.log_probs, tape.constant(std::move(weights)))), -1.0);
}

// Log clustering probabilities (b x K).
NodeId log_cluster_probs(Tape& tape, NodeId features, const ClusterModel& clusters, double phi) {
  if (tape.shape(features).cols != clusters.dim()) {
    throw StructuralError("clustering probabilities: feature dim " +
                          std::to_string(tape.shape(features).cols) + " vs centroid dim " +
                          std::to_string(clusters.dim()));
  }
  const NodeId c = tape.constant(clusters.centroids);
  return tape.log_softmax_rows(tape.scale(tape.matmul_nt(features, c), 1.0 / phi));
}

// Clustering probabilities of a domain's batch under both centroid sets.
struct ProbabilityBlock {
  Domain domain;
  std::array<NodeId, 2> log_probs;  // under A's and B's centroids
  std::array<NodeId, 2> probs;
};

ProbabilityBlock probability_block(Tape& tape, Domain d, const DomainBatch& part,
                                   const ClusterPair& clusters, double phi) {
  ProbabilityBlock block{d, {}, {}};
  for (std::size_t s = 0; s < 2; ++s) {
    block.log_probs[s] = log_cluster_probs(tape, *part.features, *clusters[kDomains[s]], phi);
    block.probs[s] = tape.exp(block.log_probs[s]);
  }
  return block;
}

NodeId dd_sum(Tape& tape, const ProbabilityBlock& block, std::size_t n) {
  const NodeId da = in_domain_distance(tape, block.probs[0]);
  const NodeId db = in_domain_distance(tape, block.probs[1]);
  DenseArray off(n, n, 1.0);
  for (std::size_t i = 0; i < n; ++i) off(i, i) = 0.0;
  return tape.sum(tape.mul(dd_pair(tape, da, db), tape.constant(std::move(off))));
}

NodeId se_sum(Tape& tape, const ProbabilityBlock& block) {
  NodeId h = tape.sum(tape.mul(block.probs[0], block.log_probs[0]));
  h = tape.add(h, tape.sum(tape.mul(block.probs[1], block.log_probs[1])));
  return tape.scale(h, -1.0);
}

NodeId zero(Tape& tape) { return tape.constant(DenseArray::scalar(0.0)); }

NodeId accumulate(Tape& tape, std::optional<NodeId> acc, NodeId term) {
  return acc ? tape.add(*acc, term) : term;
}

NodeId reduce(Tape& tape, std::optional<NodeId> sum, std::size_t terms, Reduction r) {
  if (!sum) return zero(tape);
  if (r == Reduction::Sum || terms == 0) return *sum;
  return tape.scale(*sum, 1.0 / static_cast<double>(terms));
}

void require_features(const BatchView& batch) {
  for (Domain d : kDomains) {
    const auto& part = batch[d];
    if (part.size() > 0 && !part.features) {
      throw StructuralError("batch domain " + std::string(to_string(d)) + " has indices but no features");
    }
  }
}

void require_clusters(const ClusterPair& clusters, std::string_view what) {
  if (!clusters.complete()) throw UsageError(std::string(what) + ": missing cluster model");
  if (clusters.a->dim() != clusters.b->dim()) {
    throw StructuralError(std::string(what) + ": centroid dims differ between domains");
  }
}

// Shared building blocks for one batch; each is built at most once.
class LossGraph {
 public:
  LossGraph(Tape& tape, const BatchView& batch, const LossConfig& cfg)
      : tape_(tape), batch_(batch), cfg_(cfg) {
    require_features(batch);
  }

  std::size_t samples() const { return batch_.a.size() + batch_.b.size(); }

  NodeId iw(const FeatureBanks& banks) {
    std::optional<NodeId> sum;
    for (Domain d : kDomains) {
      if (batch_[d].size() == 0) continue;
      sum = accumulate(tape_, sum, iw_sum(tape_, batch_[d], contrastive(d, banks)));
    }
    return reduce(tape_, sum, samples(), cfg_.reduction);
  }

  NodeId cw(const FeatureBanks& banks, const ClusterPair& clusters) {
    std::optional<NodeId> sum;
    for (Domain d : kDomains) {
      if (batch_[d].size() == 0) continue;
      if (clusters[d] == nullptr) throw UsageError("cluster_wise_loss: missing cluster model");
      sum = accumulate(tape_, sum, cw_sum(tape_, batch_[d], contrastive(d, banks), *clusters[d]));
    }
    return reduce(tape_, sum, samples(), cfg_.reduction);
  }

  NodeId dd(const ClusterPair& clusters) {
    require_clusters(clusters, "dd_loss");
    std::optional<NodeId> sum;
    std::size_t pairs = 0;
    for (Domain d : kDomains) {
      const std::size_t n = batch_[d].size();
      if (n < 2) continue;
      pairs += n * (n - 1);
      sum = accumulate(tape_, sum, dd_sum(tape_, probabilities(d, clusters), n));
    }
    return reduce(tape_, sum, pairs, cfg_.reduction);
  }

  NodeId se(const ClusterPair& clusters) {
    require_clusters(clusters, "self_entropy_loss");
    std::optional<NodeId> sum;
    for (Domain d : kDomains) {
      if (batch_[d].size() == 0) continue;
      sum = accumulate(tape_, sum, se_sum(tape_, probabilities(d, clusters)));
    }
    return reduce(tape_, sum, 2 * samples(), cfg_.reduction);
  }

 private:
  const ContrastiveBlock& contrastive(Domain d, const FeatureBanks& banks) {
    auto& slot = contrastive_[d == Domain::A ? 0 : 1];
    if (!slot) slot = contrastive_block(tape_, batch_[d], banks[d], cfg_.tau);
    return *slot;
  }

  const ProbabilityBlock& probabilities(Domain d, const ClusterPair& clusters) {
    auto& slot = probabilities_[d == Domain::A ? 0 : 1];
    if (!slot) slot = probability_block(tape_, d, batch_[d], clusters, cfg_.phi);
    return *slot;
  }

  Tape& tape_;
  const BatchView& batch_;
  const LossConfig& cfg_;
  std::array<std::optional<ContrastiveBlock>, 2> contrastive_;
  std::array<std::optional<ProbabilityBlock>, 2> probabilities_;
};

}  // namespace

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::V1: return "v1";
    case Variant::V2: return "v2";
    case Variant::V3: return "v3";
    case Variant::Full: return "full";
  }
  return "full";
}

Variant parse_variant(std::string_view s) {
  if (s == "v1") return Variant::V1;
  if (s == "v2") return Variant::V2;
  if (s == "v3") return Variant::V3;
  if (s == "full") return Variant::Full;
  throw ConfigError("unknown variant '" + std::string(s) + "' (expected v1, v2, v3 or full)");
}

std::string_view to_string(Reduction r) { return r == Reduction::Mean ? "mean" : "sum"; }

Reduction parse_reduction(std::string_view s) {
  if (s == "mean") return Reduction::Mean;
  if (s == "sum") return Reduction::Sum;
  throw ConfigError("unknown reduction '" + std::string(s) + "' (expected mean or sum)");
}

void LossConfig::validate() const {
  if (!(tau > 0.0)) throw ConfigError("loss.tau must be positive");
  if (!(phi > 0.0)) throw ConfigError("loss.phi must be positive");
  if (!(alpha >= 0.0)) throw ConfigError("loss.alpha must be non-negative");
  if (!(beta >= 0.0)) throw ConfigError("loss.beta must be non-negative");
  if (!(gamma >= 0.0)) throw ConfigError("loss.gamma must be non-negative");
  if (t1 > t2) throw ConfigError("loss.T1 must not exceed loss.T2");
}

LossConfig apply_variant(LossConfig cfg, Variant v) {
  cfg.use_cw = v != Variant::V1;
  cfg.use_se = v == Variant::V3 || v == Variant::Full;
  cfg.use_dd = v == Variant::Full;
  return cfg;
}

ProbabilityVector::ProbabilityVector(std::vector<double> probs) : probs_(std::move(probs)) {
  if (probs_.empty()) throw UsageError("probability vector is empty");
  double total = 0.0;
  for (double p : probs_) {
    if (!(p > 0.0)) throw UsageError("probability vector has a non-positive entry");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) throw UsageError("probability vector does not sum to one");
}

ProbabilityVector ProbabilityVector::softmax(std::span<const double> logits, double temperature) {
  if (logits.empty()) throw UsageError("softmax of empty logits");
  const double mx = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp((logits[i] - mx) / temperature);
    total += p[i];
  }
  for (double& v : p) v /= total;
  return ProbabilityVector(std::move(p));
}

double entropy(std::span<const double> p) {
  double h = 0.0;
  for (double v : p) {
    if (v > 0.0) h -= v * std::log(v);
  }
  return h;
}

ProbabilityVector clustering_probabilities(std::span<const double> feature, const ClusterModel& clusters,
                                           double phi) {
  if (feature.size() != clusters.dim()) {
    throw StructuralError("clustering probabilities: feature dim " + std::to_string(feature.size()) +
                          " vs centroid dim " + std::to_string(clusters.dim()));
  }
  std::vector<double> logits(clusters.k());
  for (std::size_t u = 0; u < clusters.k(); ++u) logits[u] = dot(feature, clusters.centroids.row_span(u));
  return ProbabilityVector::softmax(logits, phi);
}

double in_domain_distance(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw StructuralError("in_domain_distance: length mismatch");
  const double np = l2_norm(p), nq = l2_norm(q);
  if (np == 0.0 || nq == 0.0) throw UsageError("in_domain_distance: zero-norm input");
  return 1.0 - dot(p, q) / (np * nq);
}

double dd_pair(double d_a, double d_b) { return (d_a - d_b) * (d_a - d_b); }

double lambda_schedule(int ep, const LossConfig& cfg) {
  if (ep >= cfg.t2) return cfg.alpha;
  if (ep <= cfg.t1) return 0.0;
  return cfg.alpha * static_cast<double>(ep - cfg.t1) / static_cast<double>(cfg.t2 - cfg.t1);
}

NodeId instance_wise_loss(Tape& tape, const BatchView& batch, const FeatureBanks& banks,
                          const LossConfig& cfg) {
  return LossGraph(tape, batch, cfg).iw(banks);
}

NodeId cluster_wise_loss(Tape& tape, const BatchView& batch, const FeatureBanks& banks,
                         const ClusterPair& clusters, const LossConfig& cfg) {
  return LossGraph(tape, batch, cfg).cw(banks, clusters);
}

NodeId in_domain_loss(Tape& tape, const BatchView& batch, const FeatureBanks& banks,
                      const ClusterPair& clusters, int ep, const LossConfig& cfg) {
  LossGraph graph(tape, batch, cfg);
  const NodeId iw = graph.iw(banks);
  if (!cfg.use_cw) return iw;
  return tape.add(iw, tape.scale(graph.cw(banks, clusters), lambda_schedule(ep, cfg)));
}

NodeId clustering_probabilities(Tape& tape, NodeId features, const ClusterModel& clusters, double phi) {
  return tape.exp(log_cluster_probs(tape, features, clusters, phi));
}

NodeId in_domain_distance(Tape& tape, NodeId probabilities) {
  const NodeId unit = tape.l2_normalize_rows(probabilities);
  return tape.add_scalar(tape.scale(tape.matmul_nt(unit, unit), -1.0), 1.0);
}

NodeId dd_pair(Tape& tape, NodeId d_a, NodeId d_b) { return tape.square(tape.sub(d_a, d_b)); }

NodeId dd_loss(Tape& tape, const BatchView& batch, const ClusterPair& clusters, const LossConfig& cfg) {
  return LossGraph(tape, batch, cfg).dd(clusters);
}

NodeId self_entropy_loss(Tape& tape, const BatchView& batch, const ClusterPair& clusters,
                         const LossConfig& cfg) {
  return LossGraph(tape, batch, cfg).se(clusters);
}

LossTerms total_loss(Tape& tape, const BatchView& batch, const FeatureBanks& banks,
                     const ClusterPair& clusters, int ep, const LossConfig& cfg) {
  cfg.validate();
  LossGraph graph(tape, batch, cfg);
  LossTerms terms;
  terms.lambda = lambda_schedule(ep, cfg);
  terms.iw = graph.iw(banks);
  NodeId total = *terms.iw;
  if (cfg.use_cw && clusters.complete()) {
    terms.cw = graph.cw(banks, clusters);
    total = tape.add(total, tape.scale(*terms.cw, terms.lambda));
  }
  if (cfg.use_dd && clusters.complete()) {
    terms.dd = graph.dd(clusters);
    total = tape.add(total, tape.scale(*terms.dd, cfg.beta));
  }
  if (cfg.use_se && clusters.complete()) {
    terms.se = graph.se(clusters);
    total = tape.add(total, tape.scale(*terms.se, cfg.gamma));
  }
  terms.total = total;
  return terms;
}

LossValues read_values(const Tape& tape, const LossTerms& terms) {
  auto read = [&](const std::optional<NodeId>& id) -> std::optional<double> {
    if (!id) return std::nullopt;
    return tape.value(*id).item();
  };
  LossValues v;
  v.total = tape.value(terms.total).item();
  v.iw = read(terms.iw);
  v.cw = read(terms.cw);
  v.dd = read(terms.dd);
  v.se = read(terms.se);
  v.lambda = terms.lambda;
  return v;
}

}  // namespace ucdir
