#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ucdir/bank.hpp"
#include "ucdir/clustering.hpp"
#include "ucdir/data.hpp"
#include "ucdir/encoder.hpp"
#include "ucdir/losses.hpp"

namespace ucdir {

struct TrainConfig {
  std::size_t epochs = 200;
  std::size_t batch_size = 64;  // split evenly across the two domains
  double lr0 = 0.0002;
  double sgd_momentum = 0.9;
  double encoder_momentum = kDefaultMomentum;
  std::vector<std::size_t> hidden_dims{32};
  std::size_t feature_dim = 16;
  std::size_t num_clusters = 5;
  std::size_t kmeans_max_iter = 100;
  double kmeans_tol = 1e-6;
  std::size_t kmeans_restarts = 20;
  std::size_t eval_interval = 5;
  AugmentOptions augment;
  LossConfig loss;
  std::uint64_t seed = 0;
  unsigned threads = 1;

  void validate() const;
  std::vector<std::size_t> layer_dims(std::size_t input_dim) const;
};

struct TrainState {
  EncoderParams theta;
  MomentumParams theta_m;
  FeatureBanks banks;
  std::optional<ClusterModel> clusters_a;
  std::optional<ClusterModel> clusters_b;
  std::vector<DenseArray> velocity;  // matches theta.arrays()
  std::size_t epoch = 0;             // next epoch to run
  std::size_t step = 0;              // optimizer steps taken

  ClusterPair clusters() const;
};

struct EpochMetrics {
  std::size_t epoch = 0;
  double lr = 0.0;
  double lambda = 0.0;
  std::optional<double> iw;
  std::optional<double> cw;
  std::optional<double> dd;
  std::optional<double> se;
  double total = 0.0;
  std::optional<std::vector<double>> precision;  // one per eval k

  bool operator==(const EpochMetrics&) const = default;
};

/// lr0 * (1 + cos(pi * step / total_steps)) / 2
double cosine_lr(std::size_t step, std::size_t total_steps, double lr0);

/// v <- momentum v + g; p <- p - lr v. Throws NumericError, leaving every
/// array untouched, if any gradient entry is non-finite.
void sgd_step(std::span<DenseArray> params, std::span<const DenseArray> grads, std::span<DenseArray> velocity,
              double lr, double momentum);

/// Per-domain batch size after clamping to the smaller domain.
std::size_t half_batch(const UnlabeledDataset& data, const TrainConfig& cfg);
std::size_t steps_per_epoch(const UnlabeledDataset& data, const TrainConfig& cfg);

TrainState init_state(const UnlabeledDataset& data, const TrainConfig& cfg);

/// Re-encodes every raw input with theta_m into the banks and re-clusters each
/// domain with a seed derived from (cfg.seed, domain, state.epoch).
void refresh_bank_and_clusters(TrainState& state, const UnlabeledDataset& data, const TrainConfig& cfg);

/// One pass of shuffled half-A/half-B batches. Advances state.epoch.
EpochMetrics train_epoch(TrainState& state, const UnlabeledDataset& data, const TrainConfig& cfg);

struct Checkpoint {
  static constexpr int kVersion = 1;

  EncoderParams theta;
  MomentumParams theta_m;
  std::vector<DenseArray> velocity;
  std::size_t epoch = 0;
  std::uint64_t seed = 0;
  nlohmann::json config;  // effective run config, opaque here

  static Checkpoint from_state(const TrainState& state, const TrainConfig& cfg, nlohmann::json config = {});
  nlohmann::json to_json() const;
  static Checkpoint from_json(const nlohmann::json& j);
};

/// Writes to a temporary file and renames it into place.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Returns P@k per eval k for the current encoder. Training code never sees
/// labels; the caller closes over them.
using Evaluator = std::function<std::vector<double>(const EncoderParams& theta)>;

struct TrainOptions {
  std::optional<std::filesystem::path> out_dir;  // metrics.csv and checkpoints
  Evaluator evaluator;
  std::vector<std::size_t> eval_ks{1, 5, 15};
  std::optional<Checkpoint> resume;
  nlohmann::json config;  // echoed into checkpoints
  std::function<void(const EpochMetrics&)> on_epoch;
};

struct TrainResult {
  TrainState state;
  std::vector<EpochMetrics> history;
  std::optional<std::filesystem::path> checkpoint_path;
  std::optional<std::filesystem::path> metrics_path;
};

TrainResult train(const UnlabeledDataset& data, const TrainConfig& cfg, const TrainOptions& options = {});

std::string metrics_header(std::span<const std::size_t> ks);
std::string metrics_row(const EpochMetrics& m, std::size_t num_ks);

}  // namespace ucdir
