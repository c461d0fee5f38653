#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "qoeloop/errors.hpp"
#include "qoeloop/feedback.hpp"

using namespace qoeloop;

namespace {

QoEMetrics phi(double q, double su, double sw, int st, double rb) {
  return QoEMetrics::from_array({q, su, sw, static_cast<double>(st), rb});
}

QoEMetrics random_phi(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int st = static_cast<int>(rng() % 2);
  // Coarse values so ties on leading fields are common.
  auto coarse = [&](double lo, double hi) { return lo + (hi - lo) * std::floor(4 * u(rng)) / 3; };
  return phi(coarse(0.4, 4.5), coarse(0, 1), coarse(0, 1), st, st == 0 ? 0.0 : coarse(0, 0.5));
}

}  // namespace

TEST_CASE("two categories span MOS 5 to 1") {
  const auto ds = build_dataset(2, SessionConfig{}, 1);
  REQUIRE(ds.categories.size() == 2);
  CHECK(ds.categories[0].mos == 5.0);
  CHECK(ds.categories[1].mos == 1.0);
}

TEST_CASE("category invariants") {
  const auto ds = build_dataset(10, SessionConfig{}, 1);
  REQUIRE(ds.categories.size() == 10);
  for (std::size_t c = 0; c < 10; ++c) {
    const auto& cat = ds.categories[c];
    double total = 0.0;
    for (double p : cat.score_distribution) {
      CHECK(p >= 0.0);
      total += p;
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(cat.mean_score() - cat.mos) <= 1e-9);
    if (c > 0) CHECK(cat.mos < ds.categories[c - 1].mos);
  }
  CHECK(std::is_sorted(ds.boundaries.begin(), ds.boundaries.end(), ranks_before));
}

TEST_CASE("score distribution around 4.8") {
  const auto p = score_distribution_for(4.8);
  CHECK(p[4] >= 0.8 - 1e-12);
  CHECK(p[3] + p[4] == doctest::Approx(1.0));
  CHECK_THROWS_AS(score_distribution_for(0.5), ValidationError);
}

TEST_CASE("equal-population categories within each stall count") {
  MetricGrid g;
  g.max_stalls = 2;
  const auto reps = representatives(g);
  const auto ds = build_dataset(9, g, 1);
  CHECK(ds.representative_count == reps.size());
  std::vector<int> counts(9, 0);
  std::vector<std::set<int>> stalls(9);
  for (const auto& r : reps) {
    const auto c = classify_detailed(r, ds).index;
    ++counts[c];
    stalls[c].insert(r.stall_count);
  }
  for (int level = 0; level < 3; ++level) {
    const auto [lo, hi] = std::minmax_element(counts.begin() + 3 * level, counts.begin() + 3 * level + 3);
    CHECK(*hi - *lo <= 1);
  }
  for (int c = 0; c < 9; ++c) {
    CHECK(stalls[c].size() == 1);
    CHECK(*stalls[c].begin() == c / 3);
  }
}

TEST_CASE("fewer categories than stall counts") {
  MetricGrid g;
  g.max_stalls = 3;
  const auto ds = build_dataset(2, g, 1);
  CHECK(classify(phi(4.5, 0, 0, 0, 0), ds).rank == 1);
  CHECK(classify(phi(4.5, 0, 0, 1, 0.1), ds).rank == 2);
  CHECK(classify(phi(4.5, 0, 0, 3, 0.1), ds).rank == 2);
}

TEST_CASE("best and worst vectors") {
  const SessionConfig cfg;
  const auto ds = build_dataset(10, cfg, 1);
  CHECK(classify(phi(4.5, 0, 0, 0, 0), ds).rank == 1);
  CHECK(classify(phi(0.4, 1.0, 1.0, 1, 0.5), ds).rank == 10);
  // A single short stall still ranks strictly behind every stall-free session.
  CHECK(classify(phi(4.5, 0, 0, 1, 0.01), ds).rank > classify(phi(0.4, 1, 1, 0, 0), ds).rank);
}

TEST_CASE("a stall always ranks behind the same vector without one") {
  const auto ds = build_dataset(10, SessionConfig{}, 1);
  std::mt19937_64 rng(3);
  for (int i = 0; i < 1000; ++i) {
    QoEMetrics a = random_phi(rng);
    a.stall_count = 0;
    a.rebuffer_ratio = 0.0;
    QoEMetrics b = a;
    b.stall_count = 1;
    CHECK(classify(a, ds).rank < classify(b, ds).rank);
  }
}

TEST_CASE("classification is monotone in the priority order") {
  const auto ds = build_dataset(10, SessionConfig{}, 1);
  std::mt19937_64 rng(5);
  for (int i = 0; i < 5000; ++i) {
    const QoEMetrics a = random_phi(rng);
    const QoEMetrics b = random_phi(rng);
    if (ranks_before(a, b)) CHECK(classify(a, ds).mos >= classify(b, ds).mos);
    if (ranks_before(b, a)) CHECK(classify(b, ds).mos >= classify(a, ds).mos);
  }
}

TEST_CASE("switching alone moves at most one category") {
  const auto ds = build_dataset(10, SessionConfig{}, 1);
  std::mt19937_64 rng(9);
  for (int i = 0; i < 2000; ++i) {
    QoEMetrics a = random_phi(rng);
    QoEMetrics b = a;
    b.switch_ratio = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    const int d = classify(a, ds).rank - classify(b, ds).rank;
    CHECK(std::abs(d) <= 1);
  }
}

TEST_CASE("out-of-range metrics are clamped") {
  const auto ds = build_dataset(10, SessionConfig{}, 1);
  const auto c = classify_detailed(phi(0.1, 2.0, 1.0, 3, 2.0), ds);
  CHECK(c.clamped);
  CHECK(c.index == 9);
  CHECK_FALSE(classify_detailed(phi(2.0, 0.2, 0.1, 0, 0), ds).clamped);
}

TEST_CASE("sampled scores follow the category distribution") {
  const auto ds = build_dataset(10, SessionConfig{}, 1);
  const QoEMetrics x = phi(2.0, 0.3, 0.2, 0, 0);
  const auto& cat = classify(x, ds);
  std::mt19937_64 rng(1);
  double total = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const int s = sample_score(x, ds, rng);
    REQUIRE(s >= 1);
    REQUIRE(s <= 5);
    total += s;
  }
  CHECK(std::abs(total / n - cat.mos) <= 0.02);

  std::mt19937_64 r1(42), r2(42);
  for (int i = 0; i < 100; ++i) CHECK(sample_score(x, ds, r1) == sample_score(x, ds, r2));

  std::mt19937_64 r3(1);
  for (int i = 0; i < 100; ++i) CHECK(sample_score(phi(4.5, 0, 0, 0, 0), ds, r3) == 5);
}

TEST_CASE("ideal weights order a stall before everything else") {
  const WeightVector w = ideal_weights();
  CHECK(w.sign_valid());
  CHECK(qoe_score(phi(0.4, 1, 1, 0, 0), w) > qoe_score(phi(4.5, 0, 0, 1, 0), w));
  CHECK(qoe_score(phi(4.5, 1, 1, 0, 0), w) > qoe_score(phi(4.0, 0, 0, 0, 0), w));
}

TEST_CASE("dataset json is stable") {
  const auto a = to_json(build_dataset(5, SessionConfig{}, 7)).dump();
  const auto b = to_json(build_dataset(5, SessionConfig{}, 7)).dump();
  CHECK(a == b);
  CHECK_THROWS_AS(build_dataset(1, SessionConfig{}, 1), ValidationError);
}
