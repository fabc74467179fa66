#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "ucdir/data.hpp"
#include "ucdir/dense.hpp"
#include "ucdir/encoder.hpp"

namespace ucdir {

enum class Direction { AtoB, BtoA };

std::string_view to_string(Direction d);
Direction parse_direction(std::string_view s);

struct RankedItem {
  std::int64_t id = 0;
  double distance = 0.0;
  bool correct = false;
};

struct QueryResult {
  std::size_t query = 0;
  std::vector<RankedItem> ranking;  // top max(ks) gallery items
  std::vector<double> precision;    // one per k
};

struct RetrievalResult {
  Direction direction = Direction::AtoB;
  std::vector<std::size_t> ks;
  std::vector<double> precision;  // aggregate P@k, one per k
  std::vector<QueryResult> per_query;

  double at(std::size_t k) const;
};

/// A labeled set of unit-norm embeddings.
struct LabeledFeatures {
  DenseArray features;
  std::vector<int> labels;
  std::vector<std::int64_t> ids;  // empty means row index
};

/// Ranks the gallery by cosine distance 1 - q.g for every query, ties broken
/// by ascending gallery id. P@k is the fraction of the top k sharing the
/// query's label, averaged over queries.
RetrievalResult retrieve(const LabeledFeatures& queries, const LabeledFeatures& gallery,
                         std::span<const std::size_t> ks, bool keep_rankings = false, unsigned threads = 1);

/// Encodes the raw (unaugmented) inputs of both domains with `theta` and
/// retrieves across domains in the given direction.
RetrievalResult evaluate_encoder(const EncoderParams& theta, const Dataset& dataset, Direction direction,
                                 std::span<const std::size_t> ks, bool keep_rankings = false,
                                 unsigned threads = 1);

/// {direction, ks, aggregate: {"P@k": ...}, per_query?: [...]}
nlohmann::json report_json(const RetrievalResult& result, bool include_per_query);

inline constexpr std::size_t kDefaultKs[] = {1, 5, 15};

}  // namespace ucdir
