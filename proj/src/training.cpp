#include "ucdir/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <numeric>
#include <string>

#include "ucdir/error.hpp"
#include "ucdir/rng.hpp"

namespace ucdir {
namespace {

using json = nlohmann::json;

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json matrix_json(const DenseArray& a) {
  json rows = json::array();
  for (std::size_t r = 0; r < a.rows(); ++r) {
    const auto row = a.row_span(r);
    rows.push_back(std::vector<double>(row.begin(), row.end()));
  }
  return rows;
}

DenseArray matrix_from_json(const json& j) {
  const auto rows = j.get<std::vector<std::vector<double>>>();
  if (rows.empty()) return DenseArray();
  DenseArray out(rows.size(), rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != out.cols()) throw DataError("checkpoint: ragged matrix");
    std::copy(rows[r].begin(), rows[r].end(), out.row_span(r).begin());
  }
  return out;
}

json params_json(const EncoderParams& p) {
  json layers = json::array();
  for (const auto& l : p.layers) {
    const auto b = l.bias.row_span(0);
    layers.push_back({{"weight", matrix_json(l.weight)}, {"bias", std::vector<double>(b.begin(), b.end())}});
  }
  return layers;
}

EncoderParams params_from_json(const json& j) {
  EncoderParams p;
  for (const auto& l : j) {
    p.layers.push_back({matrix_from_json(l.at("weight")), DenseArray::row(l.at("bias").get<std::vector<double>>())});
  }
  p.validate();
  return p;
}

template <class T>
void accumulate(std::optional<double>& acc, const std::optional<T>& v) {
  if (v) acc = acc.value_or(0.0) + *v;
}

void scale(std::optional<double>& v, double s) {
  if (v) *v *= s;
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("train.epochs must be at least 1");
  if (batch_size < 2 || batch_size % 2 != 0) throw ConfigError("train.batch_size must be even and at least 2");
  if (!(lr0 >= 0.0)) throw ConfigError("train.lr0 must be non-negative");
  if (!(sgd_momentum >= 0.0 && sgd_momentum < 1.0)) throw ConfigError("train.sgd_momentum must lie in [0,1)");
  if (!(encoder_momentum >= 0.0 && encoder_momentum <= 1.0)) {
    throw ConfigError("train.encoder_momentum must lie in [0,1]");
  }
  if (feature_dim < 1) throw ConfigError("train.feature_dim must be positive");
  if (num_clusters < 1) throw ConfigError("train.num_clusters must be positive");
  if (kmeans_restarts < 1) throw ConfigError("train.kmeans_restarts must be at least 1");
  if (eval_interval < 1) throw ConfigError("eval.eval_interval must be positive");
  if (std::find(hidden_dims.begin(), hidden_dims.end(), 0) != hidden_dims.end()) {
    throw ConfigError("train.hidden_dims entries must be positive");
  }
  loss.validate();
}

std::vector<std::size_t> TrainConfig::layer_dims(std::size_t input_dim) const {
  std::vector<std::size_t> dims{input_dim};
  dims.insert(dims.end(), hidden_dims.begin(), hidden_dims.end());
  dims.push_back(feature_dim);
  return dims;
}

ClusterPair TrainState::clusters() const {
  return {clusters_a ? &*clusters_a : nullptr, clusters_b ? &*clusters_b : nullptr};
}

double cosine_lr(std::size_t step, std::size_t total_steps, double lr0) {
  if (total_steps == 0) return lr0;
  const double t = static_cast<double>(std::min(step, total_steps)) / static_cast<double>(total_steps);
  return lr0 * 0.5 * (1.0 + std::cos(std::numbers::pi * t));
}

void sgd_step(std::span<DenseArray> params, std::span<const DenseArray> grads, std::span<DenseArray> velocity,
              double lr, double momentum) {
  if (params.size() != grads.size() || params.size() != velocity.size()) {
    throw StructuralError("sgd_step: parameter, gradient and velocity counts differ");
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (!(params[k].shape() == grads[k].shape()) || !(params[k].shape() == velocity[k].shape())) {
      throw StructuralError("sgd_step: shape mismatch at parameter " + std::to_string(k));
    }
    for (std::size_t i = 0; i < grads[k].size(); ++i) {
      if (!std::isfinite(grads[k][i])) {
        throw NumericError("sgd_step: non-finite gradient at parameter " + std::to_string(k) + " entry " +
                           std::to_string(i));
      }
    }
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = params[k].data();
    auto& v = velocity[k].data();
    const auto& g = grads[k].data();
    for (std::size_t i = 0; i < p.size(); ++i) {
      v[i] = momentum * v[i] + g[i];
      p[i] -= lr * v[i];
    }
  }
}

std::size_t half_batch(const UnlabeledDataset& data, const TrainConfig& cfg) {
  const std::size_t smallest = std::min(data.a.raws.rows(), data.b.raws.rows());
  return std::min(cfg.batch_size / 2, smallest);
}

std::size_t steps_per_epoch(const UnlabeledDataset& data, const TrainConfig& cfg) {
  const std::size_t h = half_batch(data, cfg);
  if (h == 0) return 0;
  return std::min(data.a.raws.rows() / h, data.b.raws.rows() / h);
}

TrainState init_state(const UnlabeledDataset& data, const TrainConfig& cfg) {
  cfg.validate();
  if (data.a.raws.rows() == 0 || data.b.raws.rows() == 0) throw DataError("both domains need samples");
  TrainState s;
  const auto dims = cfg.layer_dims(data.d_in);
  s.theta = init_params(derive_seed(cfg.seed, "theta"), dims);
  s.theta_m = MomentumParams{s.theta, cfg.encoder_momentum};
  for (const auto& a : s.theta.arrays()) s.velocity.emplace_back(a.rows(), a.cols());
  return s;
}

void refresh_bank_and_clusters(TrainState& state, const UnlabeledDataset& data, const TrainConfig& cfg) {
  for (Domain d : {Domain::A, Domain::B}) {
    FeatureBank& bank = state.banks[d];
    bank.domain = d;
    bank.features = encode(state.theta_m.params, data[d].raws);
    KMeansOptions opt;
    opt.k = cfg.num_clusters;
    opt.seed = derive_seed(cfg.seed, d == Domain::A ? "kmeans.A" : "kmeans.B", state.epoch);
    opt.max_iter = cfg.kmeans_max_iter;
    opt.tol = cfg.kmeans_tol;
    opt.restarts = cfg.kmeans_restarts;
    opt.threads = cfg.threads;
    (d == Domain::A ? state.clusters_a : state.clusters_b) = kmeans(bank.features, opt, d);
  }
}

EpochMetrics train_epoch(TrainState& state, const UnlabeledDataset& data, const TrainConfig& cfg) {
  const std::size_t h = half_batch(data, cfg);
  const std::size_t steps = steps_per_epoch(data, cfg);
  if (steps == 0) throw DataError("dataset too small for one batch");
  const std::size_t total_steps = steps * cfg.epochs;
  const int ep = static_cast<int>(state.epoch);

  Rng rng(derive_seed(cfg.seed, "train.epoch", state.epoch));
  std::vector<std::size_t> order_a(data.a.raws.rows()), order_b(data.b.raws.rows());
  std::iota(order_a.begin(), order_a.end(), std::size_t{0});
  std::iota(order_b.begin(), order_b.end(), std::size_t{0});
  std::shuffle(order_a.begin(), order_a.end(), rng);
  std::shuffle(order_b.begin(), order_b.end(), rng);

  EpochMetrics m;
  m.epoch = state.epoch;
  m.lr = cosine_lr(state.step, total_steps, cfg.lr0);
  m.lambda = lambda_schedule(ep, cfg.loss);

  auto gather = [&](const DenseArray& raws, std::span<const std::size_t> idx) {
    DenseArray out(idx.size(), raws.cols());
    for (std::size_t r = 0; r < idx.size(); ++r) {
      std::copy_n(raws.row_span(idx[r]).begin(), raws.cols(), out.row_span(r).begin());
    }
    return out;
  };

  for (std::size_t s = 0; s < steps; ++s) {
    const std::span<const std::size_t> idx_a(order_a.data() + s * h, h);
    const std::span<const std::size_t> idx_b(order_b.data() + s * h, h);
    const DenseArray raw_a = gather(data.a.raws, idx_a);
    const DenseArray raw_b = gather(data.b.raws, idx_b);
    const DenseArray query_a = augment_rows(raw_a, rng, cfg.augment);
    const DenseArray query_b = augment_rows(raw_b, rng, cfg.augment);
    const DenseArray key_a = augment_rows(raw_a, rng, cfg.augment);
    const DenseArray key_b = augment_rows(raw_b, rng, cfg.augment);

    Tape tape;
    const EncoderNodes nodes = place(tape, state.theta, true);
    BatchView batch;
    batch.a = {{idx_a.begin(), idx_a.end()}, encode(tape, nodes, tape.constant(query_a)),
               encode(state.theta_m.params, key_a)};
    batch.b = {{idx_b.begin(), idx_b.end()}, encode(tape, nodes, tape.constant(query_b)),
               encode(state.theta_m.params, key_b)};

    const LossTerms terms = total_loss(tape, batch, state.banks, state.clusters(), ep, cfg.loss);
    tape.forward(terms.total);
    tape.backward(terms.total);
    const LossValues values = read_values(tape, terms);

    std::vector<DenseArray> grads;
    for (NodeId id : nodes.ordered()) grads.push_back(*tape.gradient(id));
    std::vector<DenseArray> params = state.theta.arrays();
    const double lr = cosine_lr(state.step, total_steps, cfg.lr0);
    sgd_step(params, grads, state.velocity, lr, cfg.sgd_momentum);
    state.theta = EncoderParams::from_arrays(params);
    state.theta_m = momentum_update(state.theta, std::move(state.theta_m));
    state.banks.a.overwrite(idx_a, batch.a.view_features);
    state.banks.b.overwrite(idx_b, batch.b.view_features);
    ++state.step;

    m.total += values.total;
    accumulate(m.iw, values.iw);
    accumulate(m.cw, values.cw);
    accumulate(m.dd, values.dd);
    accumulate(m.se, values.se);
  }
  const double inv = 1.0 / static_cast<double>(steps);
  m.total *= inv;
  scale(m.iw, inv);
  scale(m.cw, inv);
  scale(m.dd, inv);
  scale(m.se, inv);
  ++state.epoch;
  return m;
}

Checkpoint Checkpoint::from_state(const TrainState& state, const TrainConfig& cfg, json config) {
  return Checkpoint{state.theta, state.theta_m, state.velocity, state.epoch, cfg.seed, std::move(config)};
}

json Checkpoint::to_json() const {
  json j;
  j["version"] = kVersion;
  j["layer_dims"] = theta.layer_dims();
  j["theta"] = params_json(theta);
  j["theta_m"] = params_json(theta_m.params);
  j["m"] = theta_m.m;
  j["epoch"] = epoch;
  j["seed"] = seed;
  json vel = json::array();
  for (const auto& v : velocity) vel.push_back(matrix_json(v));
  j["velocity"] = vel;
  j["config"] = config;
  return j;
}

Checkpoint Checkpoint::from_json(const json& j) {
  try {
    if (j.at("version").get<int>() != kVersion) {
      throw DataError("checkpoint: unsupported version " + j.at("version").dump());
    }
    Checkpoint c;
    c.theta = params_from_json(j.at("theta"));
    c.theta_m.params = params_from_json(j.at("theta_m"));
    c.theta_m.m = j.at("m").get<double>();
    c.epoch = j.at("epoch").get<std::size_t>();
    c.seed = j.at("seed").get<std::uint64_t>();
    if (j.at("layer_dims").get<std::vector<std::size_t>>() != c.theta.layer_dims() ||
        c.theta_m.params.layer_dims() != c.theta.layer_dims()) {
      throw DataError("checkpoint: layer_dims do not match stored parameters");
    }
    if (j.contains("velocity")) {
      for (const auto& v : j.at("velocity")) c.velocity.push_back(matrix_from_json(v));
    }
    if (j.contains("config")) c.config = j.at("config");
    return c;
  } catch (const json::exception& e) {
    throw DataError(std::string("checkpoint: ") + e.what());
  }
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw DataError("cannot open " + tmp.string() + " for writing");
    out << ckpt.to_json().dump(1) << '\n';
    if (!out) throw DataError("write to " + tmp.string() + " failed");
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  try {
    return Checkpoint::from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::string metrics_header(std::span<const std::size_t> ks) {
  std::string h = "epoch,lr,lambda,L_IW,L_CW,L_DD,L_SE,L_total";
  for (std::size_t k : ks) h += ",P@" + std::to_string(k);
  return h;
}

std::string metrics_row(const EpochMetrics& m, std::size_t num_ks) {
  auto opt = [](const std::optional<double>& v) { return v ? fmt_double(*v) : std::string(); };
  std::string row = std::to_string(m.epoch) + "," + fmt_double(m.lr) + "," + fmt_double(m.lambda) + "," +
                    opt(m.iw) + "," + opt(m.cw) + "," + opt(m.dd) + "," + opt(m.se) + "," + fmt_double(m.total);
  for (std::size_t i = 0; i < num_ks; ++i) {
    row += ",";
    if (m.precision && i < m.precision->size()) row += fmt_double((*m.precision)[i]);
  }
  return row;
}

TrainResult train(const UnlabeledDataset& data, const TrainConfig& cfg, const TrainOptions& options) {
  cfg.validate();
  TrainResult result;
  result.state = init_state(data, cfg);
  if (options.resume) {
    const Checkpoint& c = *options.resume;
    if (c.theta.layer_dims() != result.state.theta.layer_dims()) {
      throw DataError("resume checkpoint does not match the configured encoder shape");
    }
    result.state.theta = c.theta;
    result.state.theta_m = c.theta_m;
    if (!c.velocity.empty()) result.state.velocity = c.velocity;
    result.state.epoch = c.epoch;
    result.state.step = c.epoch * steps_per_epoch(data, cfg);
  }

  std::ofstream metrics;
  if (options.out_dir) {
    std::filesystem::create_directories(*options.out_dir);
    result.metrics_path = *options.out_dir / "metrics.csv";
    const bool append = options.resume && std::filesystem::exists(*result.metrics_path);
    metrics.open(*result.metrics_path, append ? std::ios::app : std::ios::trunc);
    if (!metrics) throw DataError("cannot open " + result.metrics_path->string());
    if (!append) metrics << metrics_header(options.eval_ks) << '\n';
  }

  auto write_checkpoint = [&](const std::string& name) {
    if (!options.out_dir) return std::filesystem::path();
    const auto path = *options.out_dir / name;
    save_checkpoint(Checkpoint::from_state(result.state, cfg, options.config), path);
    return path;
  };

  try {
    while (result.state.epoch < cfg.epochs) {
      refresh_bank_and_clusters(result.state, data, cfg);
      EpochMetrics m = train_epoch(result.state, data, cfg);
      const bool last = result.state.epoch == cfg.epochs;
      if (options.evaluator && (result.state.epoch % cfg.eval_interval == 0 || last)) {
        m.precision = options.evaluator(result.state.theta);
      }
      if (metrics.is_open()) metrics << metrics_row(m, options.eval_ks.size()) << '\n' << std::flush;
      if (options.on_epoch) options.on_epoch(m);
      result.history.push_back(std::move(m));
    }
  } catch (const Error&) {
    if (metrics.is_open()) metrics.flush();
    write_checkpoint("checkpoint_abort.json");
    throw;
  }
  if (options.out_dir) result.checkpoint_path = write_checkpoint("checkpoint.json");
  return result;
}

}  // namespace ucdir
