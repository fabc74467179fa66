#include "ucdir/evaluation.hpp"

#include <algorithm>
#include <numeric>
#include <string>
#include <thread>

#include "ucdir/error.hpp"

namespace ucdir {

std::string_view to_string(Direction d) { return d == Direction::AtoB ? "A2B" : "B2A"; }

Direction parse_direction(std::string_view s) {
  if (s == "A2B") return Direction::AtoB;
  if (s == "B2A") return Direction::BtoA;
  throw ConfigError("unknown direction '" + std::string(s) + "' (expected A2B or B2A)");
}

double RetrievalResult::at(std::size_t k) const {
  for (std::size_t i = 0; i < ks.size(); ++i) {
    if (ks[i] == k) return precision[i];
  }
  throw UsageError("P@" + std::to_string(k) + " was not computed");
}

RetrievalResult retrieve(const LabeledFeatures& queries, const LabeledFeatures& gallery,
                         std::span<const std::size_t> ks, bool keep_rankings, unsigned threads) {
  const std::size_t nq = queries.features.rows(), ng = gallery.features.rows();
  if (nq == 0) throw UsageError("retrieve: empty query set");
  if (ks.empty()) throw UsageError("retrieve: no k requested");
  if (queries.features.cols() != gallery.features.cols()) {
    throw StructuralError("retrieve: query and gallery dims differ");
  }
  if (queries.labels.size() != nq || gallery.labels.size() != ng) {
    throw UsageError("retrieve: labels required for every query and gallery item");
  }
  if (!gallery.ids.empty() && gallery.ids.size() != ng) throw UsageError("retrieve: gallery ids length");
  for (std::size_t k : ks) {
    if (k == 0 || k > ng) {
      throw UsageError("retrieve: k=" + std::to_string(k) + " outside [1, gallery size " +
                       std::to_string(ng) + "]");
    }
  }
  const std::size_t kmax = *std::max_element(ks.begin(), ks.end());
  auto gid = [&](std::size_t g) {
    return gallery.ids.empty() ? static_cast<std::int64_t>(g) : gallery.ids[g];
  };

  std::vector<QueryResult> results(nq);
  auto work = [&](std::size_t begin, std::size_t end) {
    std::vector<std::size_t> order(ng);
    std::vector<double> dist(ng);
    for (std::size_t q = begin; q < end; ++q) {
      const auto qv = queries.features.row_span(q);
      for (std::size_t g = 0; g < ng; ++g) dist[g] = 1.0 - dot(qv, gallery.features.row_span(g));
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(kmax), order.end(),
                        [&](std::size_t x, std::size_t y) {
                          if (dist[x] != dist[y]) return dist[x] < dist[y];
                          return gid(x) < gid(y);
                        });
      QueryResult& r = results[q];
      r.query = q;
      r.ranking.resize(kmax);
      for (std::size_t i = 0; i < kmax; ++i) {
        const std::size_t g = order[i];
        r.ranking[i] = {gid(g), dist[g], gallery.labels[g] == queries.labels[q]};
      }
      for (std::size_t k : ks) {
        std::size_t hits = 0;
        for (std::size_t i = 0; i < k; ++i) hits += r.ranking[i].correct ? 1 : 0;
        r.precision.push_back(static_cast<double>(hits) / static_cast<double>(k));
      }
    }
  };
  const std::size_t workers = std::clamp<std::size_t>(threads, 1, nq);
  if (workers == 1) {
    work(0, nq);
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (nq + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
      const std::size_t b = w * chunk, e = std::min(nq, b + chunk);
      if (b < e) pool.emplace_back(work, b, e);
    }
    for (auto& t : pool) t.join();
  }

  RetrievalResult out;
  out.ks.assign(ks.begin(), ks.end());
  out.precision.assign(ks.size(), 0.0);
  for (const auto& r : results) {
    for (std::size_t i = 0; i < ks.size(); ++i) out.precision[i] += r.precision[i];
  }
  for (double& p : out.precision) p /= static_cast<double>(nq);
  if (keep_rankings) out.per_query = std::move(results);
  return out;
}

RetrievalResult evaluate_encoder(const EncoderParams& theta, const Dataset& dataset, Direction direction,
                                 std::span<const std::size_t> ks, bool keep_rankings, unsigned threads) {
  if (theta.input_dim() != dataset.d_in) {
    throw StructuralError("checkpoint input dim " + std::to_string(theta.input_dim()) +
                          " does not match dataset d_in " + std::to_string(dataset.d_in));
  }
  const Domain qd = direction == Direction::AtoB ? Domain::A : Domain::B;
  const Domain gd = direction == Direction::AtoB ? Domain::B : Domain::A;
  LabeledFeatures q{encode(theta, dataset.raws(qd)), dataset.labels(qd), {}};
  LabeledFeatures g{encode(theta, dataset.raws(gd)), dataset.labels(gd), {}};
  for (const auto& s : dataset.samples(gd)) g.ids.push_back(s.id);
  RetrievalResult r = retrieve(q, g, ks, keep_rankings, threads);
  r.direction = direction;
  return r;
}

nlohmann::json report_json(const RetrievalResult& result, bool include_per_query) {
  nlohmann::json j;
  j["direction"] = std::string(to_string(result.direction));
  j["ks"] = result.ks;
  nlohmann::json agg = nlohmann::json::object();
  for (std::size_t i = 0; i < result.ks.size(); ++i) {
    agg["P@" + std::to_string(result.ks[i])] = result.precision[i];
  }
  j["aggregate"] = agg;
  if (include_per_query) {
    nlohmann::json pq = nlohmann::json::array();
    for (const auto& q : result.per_query) {
      nlohmann::json e;
      e["query"] = q.query;
      e["precision"] = q.precision;
      nlohmann::json ranked = nlohmann::json::array();
      for (const auto& item : q.ranking) {
        ranked.push_back({{"id", item.id}, {"distance", item.distance}, {"correct", item.correct}});
      }
      e["ranked"] = ranked;
      pq.push_back(e);
    }
    j["per_query"] = pq;
  }
  return j;
}

}  // namespace ucdir
