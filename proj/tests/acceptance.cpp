// Acceptance suite: prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "tmpdir.hpp"
#include "ucdir/clustering.hpp"
#include "ucdir/config.hpp"
#include "ucdir/data.hpp"
#include "ucdir/evaluation.hpp"
#include "ucdir/gradcheck.hpp"
#include "ucdir/instances.hpp"
#include "ucdir/losses.hpp"
#include "ucdir/rng.hpp"
#include "ucdir/training.hpp"

using namespace ucdir;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::vector<std::size_t> permutation(std::size_t k, Rng& rng) {
  std::vector<std::size_t> p(k);
  std::iota(p.begin(), p.end(), std::size_t{0});
  std::shuffle(p.begin(), p.end(), rng);
  return p;
}

std::vector<double> random_probs(std::size_t k, Rng& rng) {
  std::normal_distribution<double> n(0.0, 2.0);
  std::vector<double> logits(k);
  for (double& v : logits) v = n(rng);
  const auto p = ProbabilityVector::softmax(logits);
  return {p.values().begin(), p.values().end()};
}

double loss_with(const LossInstance& inst, LossKind kind, const ClusterModel& a, const ClusterModel& b) {
  LossInstance copy = inst;
  copy.clusters_a = a;
  copy.clusters_b = b;
  Tape t;
  const auto nodes = place(t, copy.theta, true);
  return t.forward(build_loss(t, copy, kind, nodes.ordered())).item();
}

oracle::Mat rows(const DenseArray& a) {
  oracle::Mat m;
  for (std::size_t r = 0; r < a.rows(); ++r) m.emplace_back(a.row_span(r).begin(), a.row_span(r).end());
  return m;
}

// 1. Order invariance.
Outcome order_invariance() {
  const auto t0 = Clock::now();
  Rng rng(derive_seed(1, "acceptance.order"));
  std::uniform_int_distribution<std::size_t> kd(2, 8);
  double worst_d = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t k = kd(rng);
    const auto p = random_probs(k, rng), q = random_probs(k, rng);
    const auto perm = permutation(k, rng);
    std::vector<double> pp(k), qp(k);
    for (std::size_t i = 0; i < k; ++i) {
      pp[perm[i]] = p[i];
      qp[perm[i]] = q[i];
    }
    worst_d = std::max(worst_d, std::abs(in_domain_distance(p, q) - in_domain_distance(pp, qp)));
  }
  double worst_dd = 0.0;
  for (std::uint64_t t = 0; t < 100; ++t) {
    const LossInstance inst = random_loss_instance(derive_seed(1, "acceptance.order.dd", t));
    const double base = loss_with(inst, LossKind::DD, inst.clusters_a, inst.clusters_b);
    const ClusterModel pa = permute_centroids(inst.clusters_a, permutation(inst.clusters_a.k(), rng));
    const ClusterModel pb = permute_centroids(inst.clusters_b, permutation(inst.clusters_b.k(), rng));
    worst_dd = std::max(worst_dd, std::abs(loss_with(inst, LossKind::DD, pa, pb) - base));
  }
  const double secs = seconds_since(t0);
  return {worst_d < 1e-12 && worst_dd < 1e-10 && secs < 5.0,
          "distance dev " + fmt("%.2e", worst_d) + " (<1e-12), dd_loss dev " + fmt("%.2e", worst_dd) +
              " (<1e-10), " + fmt("%.2f", secs) + "s (<5s)"};
}

// 2. Gradient correctness.
Outcome gradients() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  std::string where;
  bool failed = false;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const LossInstance inst = random_loss_instance(derive_seed(2, "acceptance.grad", s));
    for (LossKind kind : {LossKind::IW, LossKind::CW, LossKind::DD, LossKind::SE, LossKind::Total}) {
      const GradCheckReport r = grad_check(
          [&](Tape& t, std::span<const NodeId> p) { return build_loss(t, inst, kind, p); }, inst.theta.arrays(),
          1e-5);
      if (r.failure) {
        failed = true;
        where = std::string(to_string(kind)) + ": " + *r.failure;
      }
      if (r.max_rel_error > worst) {
        worst = r.max_rel_error;
        if (!failed) where = std::string(to_string(kind)) + " instance " + std::to_string(s);
      }
    }
  }
  const double secs = seconds_since(t0);
  return {!failed && worst < 1e-4 && secs < 30.0,
          "max rel err " + fmt("%.2e", worst) + " (<1e-4, worst at " + where + "), " + fmt("%.2f", secs) +
              "s (<30s)"};
}

// 3. Reduction identities.
Outcome reductions() {
  Rng rng(derive_seed(3, "acceptance.reductions"));
  double worst_single = 0.0, worst_shared = 0.0;
  for (std::uint64_t t = 0; t < 50; ++t) {
    LossInstance inst = random_loss_instance(derive_seed(3, "acceptance.singleton", t));
    for (ClusterModel* cm : {&inst.clusters_a, &inst.clusters_b}) {
      cm->centroids = inst.banks[cm->domain].features;
      cm->assignments.resize(cm->centroids.rows());
      std::iota(cm->assignments.begin(), cm->assignments.end(), std::size_t{0});
    }
    const double iw = loss_with(inst, LossKind::IW, inst.clusters_a, inst.clusters_b);
    const double cw = loss_with(inst, LossKind::CW, inst.clusters_a, inst.clusters_b);
    worst_single = std::max(worst_single, std::abs(iw - cw));
  }
  for (std::uint64_t t = 0; t < 50; ++t) {
    const LossInstance inst = random_loss_instance(derive_seed(3, "acceptance.shared", t));
    const ClusterModel a = permute_centroids(inst.clusters_a, permutation(inst.clusters_a.k(), rng));
    ClusterModel b = permute_centroids(inst.clusters_a, permutation(inst.clusters_a.k(), rng));
    b.domain = Domain::B;
    b.assignments = inst.clusters_b.assignments;
    worst_shared = std::max(worst_shared, std::abs(loss_with(inst, LossKind::DD, a, b)));
  }
  return {worst_single < 1e-12 && worst_shared < 1e-10,
          "|L_CW - L_IW| singletons " + fmt("%.2e", worst_single) + " (<1e-12), shared-centroid L_DD " +
              fmt("%.2e", worst_shared) + " (<1e-10)"};
}

// 4. Oracle equivalence.
Outcome oracles() {
  std::size_t km_match = 0;
  double worst_inertia = 0.0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    Rng rng(derive_seed(4, "acceptance.kmeans", s));
    const DenseArray x = random_unit_rows(8, 3, rng);
    double best = 0.0;
    const auto expect = oracle::best_two_partition(rows(x), &best);
    const ClusterModel m = kmeans(x, {.k = 2, .seed = s});
    bool direct = true, swapped = true;
    for (std::size_t i = 0; i < 8; ++i) {
      direct = direct && m.assignments[i] == expect[i];
      swapped = swapped && m.assignments[i] == 1 - expect[i];
    }
    km_match += (direct || swapped) ? 1 : 0;
    worst_inertia = std::max(worst_inertia, std::abs(m.inertia - best));
  }
  double worst_pk = 0.0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    Rng rng(derive_seed(4, "acceptance.retrieval", s));
    const std::size_t ng = 20 + s + s / 2;  // up to 48 gallery items
    const std::size_t nq = 5 + s % 7;
    const DenseArray q = random_unit_rows(nq, 4, rng), g = random_unit_rows(ng, 4, rng);
    std::uniform_int_distribution<int> lab(0, 3);
    std::vector<int> ql(nq), gl(ng);
    for (int& v : ql) v = lab(rng);
    for (int& v : gl) v = lab(rng);
    std::vector<std::int64_t> ids(ng);
    std::iota(ids.begin(), ids.end(), std::int64_t{100});
    std::shuffle(ids.begin(), ids.end(), rng);
    const std::vector<std::size_t> ks{1, 5, 15};
    const RetrievalResult r = retrieve({q, ql, {}}, {g, gl, ids}, ks);
    const auto expect = oracle::precision_at(rows(q), ql, rows(g), gl, ids, ks);
    for (std::size_t i = 0; i < ks.size(); ++i) worst_pk = std::max(worst_pk, std::abs(r.precision[i] - expect[i]));
  }
  return {km_match == 20 && worst_inertia < 1e-12 && worst_pk < 1e-12,
          "kmeans partitions matched " + std::to_string(km_match) + "/20 (inertia dev " +
              fmt("%.2e", worst_inertia) + "), P@k dev " + fmt("%.2e", worst_pk) + " (<1e-12)"};
}

// 5. Schedule conformance.
Outcome schedules() {
  LossConfig cfg;  // T1 = 20, T2 = 100, alpha = 1
  const double l10 = lambda_schedule(10, cfg), l60 = lambda_schedule(60, cfg), l150 = lambda_schedule(150, cfg);
  const double lr0 = 0.0002;
  const double start = cosine_lr(0, 1000, lr0), end = cosine_lr(1000, 1000, lr0), mid = cosine_lr(500, 1000, lr0);
  const double dev = std::max({std::abs(l10), std::abs(l60 - cfg.alpha / 2), std::abs(l150 - cfg.alpha),
                               std::abs(start - lr0), std::abs(end), std::abs(mid - lr0 / 2)});
  return {dev < 1e-12, "lambda(10,60,150) = " + fmt("%.3g", l10) + ", " + fmt("%.3g", l60) + ", " +
                           fmt("%.3g", l150) + "; lr(0,mid,end) = " + fmt("%.3g", start) + ", " + fmt("%.3g", mid) +
                           ", " + fmt("%.3g", end) + "; max dev " + fmt("%.2e", dev)};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunConfig acceptance_config(std::uint64_t seed, Variant v) {
  RunConfig cfg;
  cfg.seed = seed;
  cfg.train.epochs = 60;
  cfg.train.batch_size = 32;
  cfg.eval.eval_interval = 60;
  cfg.train.loss = apply_variant(cfg.train.loss, v);
  cfg.finalize();
  return cfg;
}

double mean_p1(const EncoderParams& theta, const Dataset& ds, const std::vector<std::size_t>& ks) {
  return 0.5 * (evaluate_encoder(theta, ds, Direction::AtoB, ks).at(1) +
                evaluate_encoder(theta, ds, Direction::BtoA, ks).at(1));
}

TrainResult run_training(const RunConfig& cfg, const Dataset& ds, const std::filesystem::path& dir) {
  TrainOptions opt;
  opt.out_dir = dir;
  opt.eval_ks = cfg.eval.ks;
  opt.evaluator = [&](const EncoderParams& theta) {
    std::vector<double> out;
    for (std::size_t k : cfg.eval.ks) {
      const std::vector<std::size_t> one{k};
      out.push_back(0.5 * (evaluate_encoder(theta, ds, Direction::AtoB, one).at(k) +
                           evaluate_encoder(theta, ds, Direction::BtoA, one).at(k)));
    }
    return out;
  };
  opt.config = to_json(cfg);
  return train(strip_labels(ds), cfg.train, opt);
}

double median3(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

// 6. Ablation direction.
Outcome ablation() {
  const auto t0 = Clock::now();
  const std::vector<std::uint64_t> seeds{0, 1, 2};
  const std::vector<std::pair<Variant, const char*>> variants{
      {Variant::V1, "v1"}, {Variant::V3, "v3"}, {Variant::Full, "full"}};
  std::vector<double> medians;
  std::string detail;
  for (const auto& [variant, name] : variants) {
    std::vector<double> finals;
    for (std::uint64_t seed : seeds) {
      const RunConfig cfg = acceptance_config(seed, variant);
      const Dataset ds = generate(cfg.generator);
      const TrainResult r =
          run_training(cfg, ds, scratch_dir(std::string("ablation_") + name + "_" + std::to_string(seed)));
      finals.push_back(r.history.back().precision->front());
    }
    medians.push_back(median3(finals));
    detail += std::string(name) + " " + fmt("%.3f", medians.back()) + " [";
    for (std::size_t i = 0; i < finals.size(); ++i) detail += (i ? " " : "") + fmt("%.3f", finals[i]);
    detail += "]; ";
  }
  const double secs = seconds_since(t0);
  const bool order = medians[2] >= medians[1] && medians[1] >= medians[0];
  const double gain = medians[2] - medians[0];
  detail += "full - v1 = " + fmt("%+.1f", 100.0 * gain) + " pp (>= +5), " + fmt("%.0f", secs) + "s";
  return {order && gain >= 0.05, "median P@1 " + detail};
}

// 7. Determinism.
Outcome determinism() {
  const RunConfig cfg = acceptance_config(0, Variant::Full);
  const Dataset ds = generate(cfg.generator);
  std::string files[2];
  for (int run = 0; run < 2; ++run) {
    const auto dir = scratch_dir("determinism_" + std::to_string(run));
    run_training(cfg, ds, dir);
    files[run] = slurp(dir / "metrics.csv");
  }
  const bool same = !files[0].empty() && files[0] == files[1];
  return {same, std::to_string(files[0].size()) + " bytes of metrics, " + (same ? "identical" : "different")};
}

// 8. Entropy bounds.
Outcome entropy_bounds() {
  Rng rng(derive_seed(8, "acceptance.entropy"));
  std::uniform_int_distribution<std::size_t> kd(2, 32);
  double worst = 0.0;
  for (int t = 0; t < 10000; ++t) {
    const std::size_t k = kd(rng);
    const double h = entropy(random_probs(k, rng));
    worst = std::max({worst, -h, h - std::log(static_cast<double>(k))});
  }
  double uniform_dev = 0.0;
  for (std::size_t k = 2; k <= 32; ++k) {
    const std::vector<double> u(k, 1.0 / static_cast<double>(k));
    uniform_dev = std::max(uniform_dev, std::abs(entropy(ProbabilityVector(u).values()) - std::log(static_cast<double>(k))));
  }
  return {worst <= 0.0 && uniform_dev < 1e-12,
          "max bound violation " + fmt("%.2e", std::max(worst, 0.0)) + " over 10000 vectors, uniform dev " +
              fmt("%.2e", uniform_dev) + " (<1e-12)"};
}

// 9. Chance baseline.
Outcome chance() {
  const std::vector<std::size_t> ks{1};
  bool ok = true;
  std::string detail = "untrained P@1 (A2B/B2A):";
  double chance_level = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    RunConfig cfg;
    cfg.seed = seed;
    cfg.finalize();
    const Dataset ds = generate(cfg.generator);
    chance_level = 1.0 / static_cast<double>(cfg.generator.num_classes);
    const TrainState s = init_state(strip_labels(ds), cfg.train);
    for (Direction d : {Direction::AtoB, Direction::BtoA}) {
      const double p1 = evaluate_encoder(s.theta, ds, d, ks).at(1);
      ok = ok && std::abs(p1 - chance_level) <= 0.15;
      detail += (d == Direction::AtoB ? " " : "/") + fmt("%.3f", p1);
    }
  }
  detail += "; chance " + fmt("%.2f", chance_level) + " +- 0.15";
  return {ok, detail};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"order invariance", order_invariance},
      {"gradient correctness", gradients},
      {"reduction identities", reductions},
      {"oracle equivalence", oracles},
      {"schedule conformance", schedules},
      {"ablation direction", ablation},
      {"determinism", determinism},
      {"entropy bounds", entropy_bounds},
      {"chance baseline", chance},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    std::printf("%s %zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
    failures += o.pass ? 0 : 1;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
