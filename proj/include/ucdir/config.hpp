#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ucdir/data.hpp"
#include "ucdir/evaluation.hpp"
#include "ucdir/losses.hpp"
#include "ucdir/training.hpp"

namespace ucdir {

struct EvalConfig {
  std::vector<std::size_t> ks{1, 5, 15};
  std::size_t eval_interval = 5;
  std::vector<Direction> directions{Direction::AtoB, Direction::BtoA};
};

/// Everything a run needs. One seed drives every component.
struct RunConfig {
  RunConfig() { train.num_clusters = 0; }  // 0: one cluster per generator class

  std::uint64_t seed = 0;
  GeneratorSpec generator;
  TrainConfig train;
  EvalConfig eval;

  /// Pushes the shared seed and cross-section values (loss, eval interval,
  /// cluster count) into the section structs and validates them.
  void finalize();
};

/// Section/key document with every default filled in.
nlohmann::json to_json(const RunConfig& cfg);
/// Strict parse: unknown sections or keys throw ConfigError naming the key.
RunConfig run_config_from_json(const nlohmann::json& j);

/// Merges `overlay` into `base`, rejecting keys `base` does not have.
void merge_config(nlohmann::json& base, const nlohmann::json& overlay, const std::string& origin);

/// Environment overrides: UCDIR_SEED, UCDIR_<SECTION>_<KEY> (case-insensitive).
nlohmann::json env_overrides(const nlohmann::json& defaults, const std::map<std::string, std::string>& env);
std::map<std::string, std::string> process_environment();

/// defaults <- file <- environment <- flag overrides, then parse.
RunConfig load_run_config(const std::optional<std::filesystem::path>& path, const nlohmann::json& flag_overrides,
                          const std::map<std::string, std::string>& env);

}  // namespace ucdir
