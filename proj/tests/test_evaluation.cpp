#include <doctest.h>

#include <numeric>

#include "oracles.hpp"
#include "ucdir/data.hpp"
#include "ucdir/error.hpp"
#include "ucdir/evaluation.hpp"
#include "ucdir/instances.hpp"
#include "ucdir/training.hpp"

using namespace ucdir;

namespace {

oracle::Mat rows(const DenseArray& a) {
  oracle::Mat m;
  for (std::size_t r = 0; r < a.rows(); ++r) m.emplace_back(a.row_span(r).begin(), a.row_span(r).end());
  return m;
}

std::vector<int> random_labels(std::size_t n, int classes, Rng& rng) {
  std::vector<int> out(n);
  std::uniform_int_distribution<int> u(0, classes - 1);
  for (int& v : out) v = u(rng);
  return out;
}

// Dataset whose domain B is a copy of domain A with fresh ids.
Dataset mirrored(std::size_t classes, std::size_t per_class, double noise) {
  GeneratorSpec s;
  s.num_classes = classes;
  s.per_class_per_domain = per_class;
  s.latent_dim = classes;
  s.d_in = 2 * classes;
  s.noise_sigma = noise;
  s.seed = 2;
  Dataset ds = generate(s);
  ds.samples_b = ds.samples_a;
  for (auto& x : ds.samples_b) {
    x.id += 1000;
    x.domain = Domain::B;
  }
  return ds;
}

}  // namespace

TEST_CASE("retrieve: single-class gallery gives P@k = 1") {
  Rng rng(1);
  const LabeledFeatures q{random_unit_rows(5, 3, rng), std::vector<int>(5, 2), {}};
  const LabeledFeatures g{random_unit_rows(12, 3, rng), std::vector<int>(12, 2), {}};
  const std::vector<std::size_t> ks{1, 5, 12};
  const RetrievalResult r = retrieve(q, g, ks);
  for (std::size_t k : ks) CHECK(r.at(k) == 1.0);
  CHECK_THROWS_AS(r.at(3), UsageError);
}

TEST_CASE("retrieve: exact duplicate ranks first") {
  Rng rng(2);
  const DenseArray g = random_unit_rows(10, 4, rng);
  DenseArray q(1, 4);
  std::copy(g.row_span(6).begin(), g.row_span(6).end(), q.row_span(0).begin());
  std::vector<int> gl(10, 0);
  gl[6] = 1;
  const std::vector<std::size_t> ks{1};
  const RetrievalResult r = retrieve({q, {1}, {}}, {g, gl, {}}, ks, true);
  CHECK(r.at(1) == 1.0);
  REQUIRE(r.per_query.size() == 1);
  CHECK(r.per_query[0].ranking.front().id == 6);
  CHECK(r.per_query[0].ranking.front().correct);
}

TEST_CASE("retrieve: matches exhaustive sort oracle") {
  for (std::uint64_t s = 0; s < 20; ++s) {
    Rng rng(100 + s);
    const std::size_t ng = 10 + s * 2;
    const DenseArray q = random_unit_rows(10, 4, rng), g = random_unit_rows(ng, 4, rng);
    const auto ql = random_labels(10, 3, rng), gl = random_labels(ng, 3, rng);
    std::vector<std::int64_t> ids(ng);
    std::iota(ids.begin(), ids.end(), std::int64_t{50});
    std::shuffle(ids.begin(), ids.end(), rng);
    const std::vector<std::size_t> ks{1, 5, 10};
    const RetrievalResult r = retrieve({q, ql, {}}, {g, gl, ids}, ks);
    const auto expect = oracle::precision_at(rows(q), ql, rows(g), gl, ids, ks);
    for (std::size_t i = 0; i < ks.size(); ++i) CHECK(std::abs(r.precision[i] - expect[i]) < 1e-12);
  }
}

TEST_CASE("retrieve: ties go to the lower gallery id") {
  DenseArray g(3, 2);
  g(0, 0) = g(1, 0) = g(2, 0) = 1.0;
  const RetrievalResult r =
      retrieve({DenseArray::row({1.0, 0.0}), {0}, {}}, {g, {1, 0, 1}, {9, 4, 7}}, std::vector<std::size_t>{1, 2}, true);
  CHECK(r.per_query[0].ranking[0].id == 4);
  CHECK(r.per_query[0].ranking[1].id == 7);
  CHECK(r.at(1) == 1.0);
  CHECK(r.at(2) == 0.5);
}

TEST_CASE("retrieve: relabeling classes leaves P@k unchanged") {
  Rng rng(7);
  const DenseArray q = random_unit_rows(8, 3, rng), g = random_unit_rows(20, 3, rng);
  auto ql = random_labels(8, 4, rng), gl = random_labels(20, 4, rng);
  const std::vector<std::size_t> ks{1, 5};
  const RetrievalResult a = retrieve({q, ql, {}}, {g, gl, {}}, ks);
  for (int& v : ql) v = (v + 2) % 4;
  for (int& v : gl) v = (v + 2) % 4;
  const RetrievalResult b = retrieve({q, ql, {}}, {g, gl, {}}, ks);
  CHECK(a.precision == b.precision);
}

TEST_CASE("retrieve: errors") {
  Rng rng(3);
  const LabeledFeatures q{random_unit_rows(2, 3, rng), {0, 1}, {}};
  const LabeledFeatures g{random_unit_rows(4, 3, rng), {0, 1, 0, 1}, {}};
  CHECK_THROWS_AS(retrieve(q, g, std::vector<std::size_t>{5}), UsageError);
  CHECK_THROWS_AS(retrieve({DenseArray(0, 3), {}, {}}, g, std::vector<std::size_t>{1}), UsageError);
  CHECK_THROWS_AS(retrieve({random_unit_rows(1, 2, rng), {0}, {}}, g, std::vector<std::size_t>{1}), StructuralError);
}

TEST_CASE("evaluate_encoder: mirrored domains retrieve perfectly and symmetrically") {
  const Dataset ds = mirrored(4, 5, 0.0);
  const EncoderParams theta = init_params(3, std::vector<std::size_t>{8, 6, 5});
  const std::vector<std::size_t> ks{1, 5};
  const auto ab = evaluate_encoder(theta, ds, Direction::AtoB, ks);
  const auto ba = evaluate_encoder(theta, ds, Direction::BtoA, ks);
  CHECK(ab.at(1) == 1.0);
  CHECK(ab.precision == ba.precision);

  const Dataset noisy = mirrored(4, 6, 0.2);
  CHECK(evaluate_encoder(theta, noisy, Direction::AtoB, ks).precision ==
        evaluate_encoder(theta, noisy, Direction::BtoA, ks).precision);

  const EncoderParams wrong = init_params(3, std::vector<std::size_t>{5, 5});
  CHECK_THROWS_AS(evaluate_encoder(wrong, ds, Direction::AtoB, ks), StructuralError);
}

TEST_CASE("evaluate_encoder: untrained encoder is near chance on the default spec") {
  const std::vector<std::size_t> ks{1};
  for (std::uint64_t seed = 0; seed < 2; ++seed) {
    GeneratorSpec spec;
    spec.seed = seed;
    const Dataset ds = generate(spec);
    TrainConfig cfg;
    cfg.seed = seed;
    const TrainState s = init_state(strip_labels(ds), cfg);
    const double p1 = evaluate_encoder(s.theta, ds, Direction::AtoB, ks).at(1);
    CHECK(std::abs(p1 - 1.0 / static_cast<double>(spec.num_classes)) <= 0.15);
  }
}

TEST_CASE("report json and direction names") {
  Rng rng(4);
  const RetrievalResult r = retrieve({random_unit_rows(2, 3, rng), {0, 1}, {}},
                                     {random_unit_rows(3, 3, rng), {0, 1, 1}, {}}, std::vector<std::size_t>{1, 2}, true);
  const auto j = report_json(r, true);
  CHECK(j.at("direction") == "A2B");
  CHECK(j.at("aggregate").contains("P@2"));
  CHECK(j.at("per_query").size() == 2);
  CHECK_FALSE(report_json(r, false).contains("per_query"));
  CHECK(parse_direction("B2A") == Direction::BtoA);
  CHECK_THROWS_AS(parse_direction("AB"), ConfigError);
}
