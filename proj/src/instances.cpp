#include "ucdir/instances.hpp"

#include <algorithm>
#include <numeric>

#include "ucdir/rng.hpp"

namespace ucdir {

DenseArray random_unit_rows(std::size_t rows, std::size_t cols, Rng& rng) {
  std::normal_distribution<double> n01(0.0, 1.0);
  DenseArray out(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    auto row = out.row_span(r);
    double norm = 0.0;
    do {
      for (double& v : row) v = n01(rng);
      norm = l2_norm(row);
    } while (norm < 1e-6);
    for (double& v : row) v /= norm;
  }
  return out;
}

std::string_view to_string(LossKind k) {
  switch (k) {
    case LossKind::IW: return "L_IW";
    case LossKind::CW: return "L_CW";
    case LossKind::DD: return "L_DD";
    case LossKind::SE: return "L_SE";
    case LossKind::Total: return "L_total";
  }
  return "?";
}

BatchView LossInstance::batch(Tape& tape, const EncoderNodes& nodes) const {
  BatchView b;
  b.a = {indices_a, encode(tape, nodes, tape.constant(inputs_a)), views_a};
  b.b = {indices_b, encode(tape, nodes, tape.constant(inputs_b)), views_b};
  return b;
}

LossInstance random_loss_instance(std::uint64_t seed, const InstanceShape& shape) {
  Rng rng(derive_seed(seed, "instance"));
  auto pick = [&](std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
  };
  std::normal_distribution<double> n01(0.0, 1.0);

  LossInstance inst;
  const std::size_t d = pick(2, std::max<std::size_t>(2, shape.max_dim));
  const std::size_t k = pick(2, std::max<std::size_t>(2, shape.max_k));
  const std::size_t hidden = pick(3, 6);
  const std::vector<std::size_t> dims{shape.d_in, hidden, d};
  inst.theta = init_params(rng(), dims);
  // non-zero biases so their gradients are exercised
  for (auto& l : inst.theta.layers) {
    for (double& v : l.bias.data()) v = 0.1 * n01(rng);
  }

  for (Domain dom : {Domain::A, Domain::B}) {
    const std::size_t b = pick(std::min<std::size_t>(2, shape.max_batch), shape.max_batch);
    const std::size_t n = std::max(b + pick(0, 4), k);
    DenseArray inputs(b, shape.d_in);
    for (double& v : inputs.data()) v = n01(rng);
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), std::size_t{0});
    std::shuffle(all.begin(), all.end(), rng);
    std::vector<std::size_t> idx(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(b));
    FeatureBank bank{dom, random_unit_rows(n, d, rng)};
    const DenseArray views = random_unit_rows(b, d, rng);
    KMeansOptions opt;
    opt.k = k;
    opt.seed = rng();
    ClusterModel cm = kmeans(bank.features, opt, dom);
    if (dom == Domain::A) {
      inst.inputs_a = std::move(inputs);
      inst.indices_a = std::move(idx);
      inst.views_a = views;
      inst.clusters_a = std::move(cm);
    } else {
      inst.inputs_b = std::move(inputs);
      inst.indices_b = std::move(idx);
      inst.views_b = views;
      inst.clusters_b = std::move(cm);
    }
    inst.banks[dom] = std::move(bank);
  }
  inst.cfg = LossConfig{};
  inst.cfg.t1 = 0;
  inst.cfg.t2 = 4;
  inst.epoch = static_cast<int>(pick(1, 5));
  return inst;
}

NodeId build_loss(Tape& tape, const LossInstance& inst, LossKind kind, std::span<const NodeId> params) {
  const EncoderNodes nodes = wrap(params);
  const BatchView batch = inst.batch(tape, nodes);
  switch (kind) {
    case LossKind::IW: return instance_wise_loss(tape, batch, inst.banks, inst.cfg);
    case LossKind::CW: return cluster_wise_loss(tape, batch, inst.banks, inst.clusters(), inst.cfg);
    case LossKind::DD: return dd_loss(tape, batch, inst.clusters(), inst.cfg);
    case LossKind::SE: return self_entropy_loss(tape, batch, inst.clusters(), inst.cfg);
    case LossKind::Total: return total_loss(tape, batch, inst.banks, inst.clusters(), inst.epoch, inst.cfg).total;
  }
  return total_loss(tape, batch, inst.banks, inst.clusters(), inst.epoch, inst.cfg).total;
}

}  // namespace ucdir
