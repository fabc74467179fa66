#include "ucdir/check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ucdir/gradcheck.hpp"
#include "ucdir/instances.hpp"
#include "ucdir/losses.hpp"
#include "ucdir/rng.hpp"

namespace ucdir {
namespace {

PropertyResult finish(std::string name, double worst, double tol, std::size_t trials, std::string detail = {}) {
  return {std::move(name), worst, tol, trials, worst < tol, std::move(detail)};
}

PropertyResult gradient_property(LossKind kind, const CheckOptions& opt) {
  double worst = 0.0;
  std::string detail;
  for (std::size_t t = 0; t < opt.grad_trials; ++t) {
    const LossInstance inst = random_loss_instance(derive_seed(opt.seed, "check.grad", t));
    const auto report = grad_check(
        [&](Tape& tape, std::span<const NodeId> params) { return build_loss(tape, inst, kind, params); },
        inst.theta.arrays(), 1e-5);
    if (report.failure) return finish("gradient " + std::string(to_string(kind)), INFINITY, 1e-4, t + 1,
                                      *report.failure);
    worst = std::max(worst, report.max_rel_error);
  }
  return finish("gradient " + std::string(to_string(kind)), worst, 1e-4, opt.grad_trials);
}

std::vector<std::size_t> random_permutation(std::size_t k, Rng& rng) {
  std::vector<std::size_t> p(k);
  std::iota(p.begin(), p.end(), std::size_t{0});
  std::shuffle(p.begin(), p.end(), rng);
  return p;
}

std::vector<double> random_softmax(std::size_t k, Rng& rng) {
  std::normal_distribution<double> n(0.0, 2.0);
  std::vector<double> logits(k);
  for (double& v : logits) v = n(rng);
  const auto p = ProbabilityVector::softmax(logits);
  return {p.values().begin(), p.values().end()};
}

double loss_value(const LossInstance& inst, LossKind kind, const ClusterModel& a, const ClusterModel& b) {
  LossInstance copy = inst;
  copy.clusters_a = a;
  copy.clusters_b = b;
  Tape tape;
  const auto nodes = place(tape, copy.theta, false);
  return tape.forward(build_loss(tape, copy, kind, nodes.ordered())).item();
}

}  // namespace

std::vector<PropertyResult> run_property_suite(const CheckOptions& opt) {
  std::vector<PropertyResult> out;
  for (LossKind k : {LossKind::IW, LossKind::CW, LossKind::DD, LossKind::SE, LossKind::Total}) {
    out.push_back(gradient_property(k, opt));
  }
  if (opt.grad_only) return out;

  Rng rng(derive_seed(opt.seed, "check.props"));

  // Joint permutation of probability vectors leaves the in-domain distance unchanged.
  double worst = 0.0;
  for (std::size_t t = 0; t < opt.trials; ++t) {
    const std::size_t k = std::uniform_int_distribution<std::size_t>(2, 8)(rng);
    const auto p = random_softmax(k, rng), q = random_softmax(k, rng);
    const auto perm = random_permutation(k, rng);
    std::vector<double> pp(k), qq(k);
    for (std::size_t u = 0; u < k; ++u) {
      pp[perm[u]] = p[u];
      qq[perm[u]] = q[u];
    }
    worst = std::max(worst, std::abs(in_domain_distance(p, q) - in_domain_distance(pp, qq)));
  }
  out.push_back(finish("order invariance: in_domain_distance", worst, 1e-12, opt.trials));

  // Permuting either domain's centroids leaves dd_loss unchanged.
  worst = 0.0;
  const std::size_t model_trials = std::max<std::size_t>(1, opt.trials / 10);
  for (std::size_t t = 0; t < model_trials; ++t) {
    const LossInstance inst = random_loss_instance(derive_seed(opt.seed, "check.perm", t));
    const double base = loss_value(inst, LossKind::DD, inst.clusters_a, inst.clusters_b);
    const auto pa = permute_centroids(inst.clusters_a, random_permutation(inst.clusters_a.k(), rng));
    const auto pb = permute_centroids(inst.clusters_b, random_permutation(inst.clusters_b.k(), rng));
    worst = std::max(worst, std::abs(base - loss_value(inst, LossKind::DD, pa, pb)));
  }
  out.push_back(finish("order invariance: dd_loss", worst, 1e-10, model_trials));

  // 0 <= H(p) <= ln K.
  worst = 0.0;
  const std::size_t entropy_trials = opt.trials * 10;
  for (std::size_t t = 0; t < entropy_trials; ++t) {
    const std::size_t k = std::uniform_int_distribution<std::size_t>(2, 16)(rng);
    const double h = entropy(random_softmax(k, rng));
    worst = std::max({worst, -h, h - std::log(static_cast<double>(k))});
  }
  out.push_back(finish("entropy bounds", std::max(worst, 0.0), 1e-12, entropy_trials));

  // Uniform vector attains ln K.
  worst = 0.0;
  for (std::size_t k = 2; k <= 16; ++k) {
    const std::vector<double> u(k, 1.0 / static_cast<double>(k));
    worst = std::max(worst, std::abs(entropy(u) - std::log(static_cast<double>(k))));
  }
  out.push_back(finish("entropy maximum at uniform", worst, 1e-12, 15));

  // Singleton clusters reduce the cluster-wise loss to the instance-wise loss.
  worst = 0.0;
  for (std::size_t t = 0; t < model_trials; ++t) {
    LossInstance inst = random_loss_instance(derive_seed(opt.seed, "check.singleton", t));
    for (ClusterModel* cm : {&inst.clusters_a, &inst.clusters_b}) {
      cm->centroids = inst.banks[cm->domain].features;
      std::iota(cm->assignments.begin(), cm->assignments.end(), std::size_t{0});
    }
    const double iw = loss_value(inst, LossKind::IW, inst.clusters_a, inst.clusters_b);
    const double cw = loss_value(inst, LossKind::CW, inst.clusters_a, inst.clusters_b);
    worst = std::max(worst, std::abs(iw - cw));
  }
  out.push_back(finish("singleton clusters: L_CW == L_IW", worst, 1e-12, model_trials));

  // Shared centroid sets zero the distance-of-distance loss.
  worst = 0.0;
  for (std::size_t t = 0; t < model_trials; ++t) {
    const LossInstance inst = random_loss_instance(derive_seed(opt.seed, "check.shared", t));
    ClusterModel b = permute_centroids(inst.clusters_a, random_permutation(inst.clusters_a.k(), rng));
    b.assignments = inst.clusters_b.assignments;
    worst = std::max(worst, std::abs(loss_value(inst, LossKind::DD, inst.clusters_a, b)));
  }
  out.push_back(finish("shared centroids: L_DD == 0", worst, 1e-10, model_trials));

  // K-means: every sample sits at its best centroid, inertia never increases.
  worst = 0.0;
  for (std::size_t t = 0; t < model_trials; ++t) {
    const DenseArray x = random_unit_rows(40, 4, rng);
    KMeansOptions ko;
    ko.k = 3;
    ko.seed = rng();
    const ClusterModel cm = kmeans(x, ko);
    for (std::size_t i = 0; i < x.rows(); ++i) {
      const double own = dot(x.row_span(i), cm.centroids.row_span(cm.assignments[i]));
      for (std::size_t u = 0; u < cm.k(); ++u) {
        worst = std::max(worst, dot(x.row_span(i), cm.centroids.row_span(u)) - own);
      }
    }
    for (std::size_t i = 1; i < cm.inertia_trace.size(); ++i) {
      worst = std::max(worst, cm.inertia_trace[i] - cm.inertia_trace[i - 1]);
    }
  }
  out.push_back(finish("kmeans nearest-centroid and monotone inertia", std::max(worst, 0.0), 1e-12,
                       model_trials));
  return out;
}

}  // namespace ucdir
