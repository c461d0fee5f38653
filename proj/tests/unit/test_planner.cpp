#include <doctest.h>

#include <algorithm>
#include <random>

#include "qoeloop/errors.hpp"
#include "qoeloop/planner.hpp"

using namespace qoeloop;

namespace {

ThroughputTrace constant(double rate, std::size_t slots) {
  ThroughputTrace t;
  t.values.assign(slots, rate);
  return t;
}

struct Instance {
  SessionConfig cfg;
  ThroughputTrace trace;
  WeightVector w;
  int p = 0;
};

Instance random_instance(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Instance in;
  in.cfg.num_segments = 2 + static_cast<int>(rng() % 6);
  const int L = 1 + static_cast<int>(rng() % 3);
  const std::vector<double> rungs{0.4, 1.0, 2.5};
  in.cfg.ladder.assign(rungs.begin(), rungs.begin() + L);
  in.cfg.prefetch_segments =
      1 + static_cast<int>(rng() % static_cast<unsigned>(in.cfg.num_segments - 1));
  in.p = static_cast<int>(rng() % 2);
  in.cfg.max_stalls = in.p;
  SyntheticTraceConfig tc;
  tc.num_slots = static_cast<std::size_t>(in.cfg.num_segments) * 3;
  tc.mean = 0.5 + 2.5 * u(rng);
  tc.correlation = 0.9 * u(rng);
  tc.volatility = 2.0 * u(rng);
  tc.seed = rng();
  in.trace = generate_trace(tc);
  in.w = WeightVector{{u(rng), -u(rng), -u(rng), -u(rng), -u(rng)}};
  return in;
}

bool ascending(const std::vector<int>& v) { return std::is_sorted(v.begin(), v.end()); }

}  // namespace

TEST_CASE("ascending enumeration") {
  SessionConfig cfg;
  cfg.num_segments = 6;
  cfg.ladder = {0.4, 1.0, 2.5};
  std::vector<std::vector<int>> seen;
  const auto n = enumerate_ascending_plans(cfg, CycleWindow{1, 4, 0.0, 0.0},
                                           [&](const std::vector<int>& v) { seen.push_back(v); });
  CHECK(n == count_ascending_plans(3, 4));
  CHECK(n == 15);
  CHECK(seen.size() == 15);
  CHECK(std::is_sorted(seen.begin(), seen.end()));
  for (const auto& v : seen) CHECK(ascending(v));
  CHECK(count_ascending_plans(5, 30) == 46376);
}

TEST_CASE("optimal equals the best ascending plan when no stall is allowed") {
  std::mt19937_64 rng(31);
  int checked = 0;
  for (int it = 0; it < 150; ++it) {
    Instance in = random_instance(rng);
    in.p = 0;
    in.cfg.max_stalls = 0;
    double best = -1e300;
    enumerate_ascending_plans(in.cfg, CycleWindow::whole_session(in.cfg),
                              [&](const std::vector<int>& v) {
                                const BitratePlan plan{v};
                                const auto t = simulate(plan, in.trace, in.cfg);
                                if (!t.complete() || t.stall_count > 0) return;
                                best = std::max(best,
                                                qoe_score(compute_metrics(t, plan, in.cfg), in.w));
                              });
    if (best == -1e300) {
      CHECK_THROWS_AS(optimal_plan(in.trace, in.cfg, in.w, 0), InfeasibleError);
      continue;
    }
    const auto r = optimal_plan(in.trace, in.cfg, in.w, 0);
    CHECK(ascending(r.plan.levels));
    CHECK(std::abs(r.qoe - best) <= 1e-9);
    ++checked;
  }
  CHECK(checked > 100);
}

TEST_CASE("planner ordering on random instances") {
  std::mt19937_64 rng(37);
  int checked = 0;
  for (int it = 0; it < 150; ++it) {
    const Instance in = random_instance(rng);
    PlanResult brute;
    try {
      brute = brute_force_plan(in.trace, in.cfg, in.w, in.p);
    } catch (const InfeasibleError&) {
      CHECK_THROWS_AS(optimal_plan(in.trace, in.cfg, in.w, in.p), InfeasibleError);
      continue;
    }
    ++checked;
    const auto opt = optimal_plan(in.trace, in.cfg, in.w, in.p);
    CHECK(brute.qoe >= opt.qoe - 1e-9);
    CHECK(opt.metrics.stall_count <= in.p);
    try {
      const auto cas = castle(in.trace, in.cfg, in.w, in.p);
      CHECK(opt.qoe >= cas.qoe - 1e-9);
      CHECK(cas.metrics.stall_count <= in.p);
      const auto zero =
          run_planner(PlannerKind::kMaestro, in.trace, in.cfg, in.w, in.p);
      const auto zero_eval = simulate(zero.plan, in.trace, in.cfg);
      if (zero_eval.stall_count <= in.p) CHECK(cas.qoe >= zero.qoe - 1e-9);
    } catch (const InfeasibleError&) {
      // The heuristics may miss feasible plans the exact search finds.
    }
  }
  CHECK(checked > 100);
}

TEST_CASE("a descending plan can beat every ascending one") {
  // Same instance as the reordering counterexample in the playback tests.
  SessionConfig cfg;
  cfg.num_segments = 2;
  cfg.prefetch_segments = 1;
  cfg.ladder = {0.4, 1.0, 2.5};
  cfg.max_stalls = 0;
  const auto tr = constant(1.0, 10);
  const WeightVector w{{1, 0, 0, 0, 0}};
  const auto brute = brute_force_plan(tr, cfg, w, 0);
  const auto opt = optimal_plan(tr, cfg, w, 0);
  CHECK(brute.plan.levels == std::vector<int>{2, 1});
  CHECK(brute.qoe == doctest::Approx(1.75));
  CHECK(opt.plan.levels == std::vector<int>{1, 1});
  CHECK(opt.qoe == doctest::Approx(1.0));
}

TEST_CASE("maestro returns stall-free ascending plans") {
  std::mt19937_64 rng(41);
  for (int it = 0; it < 200; ++it) {
    const Instance in = random_instance(rng);
    try {
      const auto r = maestro(in.trace, in.cfg, {in.w[0], in.w[1], in.w[2]},
                             CycleWindow::whole_session(in.cfg));
      CHECK(ascending(r.plan.levels));
      const auto t = simulate(r.plan, in.trace, in.cfg);
      CHECK(t.complete());
      CHECK(t.stall_count == 0);
    } catch (const InfeasibleError&) {
      const auto t = simulate(BitratePlan{std::vector<int>(
                                  static_cast<std::size_t>(in.cfg.num_segments), 0)},
                              in.trace, in.cfg);
      CHECK((!t.complete() || t.stall_count > 0));
    }
  }
}

TEST_CASE("maestro on a sawtooth stays below the ascending optimum") {
  SessionConfig cfg;
  cfg.num_segments = 8;
  cfg.prefetch_segments = 2;
  cfg.ladder = {0.4, 1.0, 2.5};
  ThroughputTrace tr;
  for (int k = 0; k < 24; ++k) tr.values.push_back(0.5 + 0.75 * (k % 4));
  const CycleWeights w3{1.0, -1.0, -0.5};
  const auto r = maestro(tr, cfg, w3, CycleWindow::whole_session(cfg));

  double best = -1e300;
  enumerate_ascending_plans(cfg, CycleWindow::whole_session(cfg), [&](const std::vector<int>& v) {
    const BitratePlan plan{v};
    const auto t = simulate(plan, tr, cfg);
    if (!t.complete() || t.stall_count > 0) return;
    const auto m = compute_metrics(t, plan, cfg);
    best = std::max(best, w3[0] * m.avg_quality + w3[1] * m.startup_ratio + w3[2] * m.switch_ratio);
  });
  CHECK(r.qoe <= best + 1e-9);
  MESSAGE("maestro gap on sawtooth: " << best - r.qoe);
}

TEST_CASE("an outage makes one enforced stall worthwhile") {
  // Without a stall the whole buffer must cover the outage, which forces the
  // lowest rung and a long startup.
  SessionConfig cfg;
  cfg.num_segments = 6;
  cfg.prefetch_segments = 2;
  cfg.ladder = {0.4, 1.0, 2.5};
  ThroughputTrace tr;
  tr.values = {1.75, 1.75, 1.75, 0, 0, 0, 0};
  tr.values.resize(27, 2.5);
  const WeightVector w{{1.0, -1.0, -0.1, -0.1, -1.0}};

  const auto brute = brute_force_plan(tr, cfg, w, 1);
  const auto opt = optimal_plan(tr, cfg, w, 1);
  const auto zero = optimal_plan(tr, cfg, w, 0);
  CHECK(brute.metrics.stall_count == 1);
  CHECK(opt.metrics.stall_count == 1);
  CHECK(opt.qoe == doctest::Approx(brute.qoe).epsilon(1e-12));
  CHECK(opt.qoe > zero.qoe);

  const auto cas = castle(tr, cfg, w, 1);
  CHECK(cas.metrics.stall_count == 1);
  CHECK(cas.qoe > zero.qoe);
  CHECK(cas.qoe <= opt.qoe + 1e-9);
}

TEST_CASE("castle never returns more stalls than allowed") {
  std::mt19937_64 rng(43);
  for (int it = 0; it < 100; ++it) {
    Instance in = random_instance(rng);
    in.cfg.num_segments = 10 + static_cast<int>(rng() % 10);
    in.cfg.prefetch_segments = 2;
    in.cfg.ladder = {0.4, 0.75, 1.0, 2.5, 4.5};
    SyntheticTraceConfig tc;
    tc.num_slots = 60;
    tc.mean = 2.0;
    tc.seed = rng();
    in.trace = generate_trace(tc);
    for (int p = 0; p <= 2; ++p) {
      try {
        const auto r = castle(in.trace, in.cfg, in.w, p);
        CHECK(r.metrics.stall_count <= p);
        CHECK(r.stall_positions.size() == static_cast<std::size_t>(r.metrics.stall_count));
      } catch (const InfeasibleError&) {
      }
    }
  }
}

TEST_CASE("zero weights tie everywhere and pick the smallest plan") {
  SessionConfig cfg;
  cfg.num_segments = 4;
  cfg.prefetch_segments = 1;
  cfg.ladder = {0.4, 1.0};
  const auto tr = constant(3.0, 20);
  const WeightVector zero{};
  CHECK(brute_force_plan(tr, cfg, zero, 0).plan.levels == std::vector<int>{0, 0, 0, 0});
  CHECK(optimal_plan(tr, cfg, zero, 0).plan.levels == std::vector<int>{0, 0, 0, 0});
}

TEST_CASE("positive scaling of the weights keeps the argmax") {
  std::mt19937_64 rng(47);
  for (int it = 0; it < 60; ++it) {
    const Instance in = random_instance(rng);
    WeightVector scaled = in.w;
    for (double& x : scaled.w) x *= 3.7;
    try {
      const auto a = optimal_plan(in.trace, in.cfg, in.w, in.p);
      const auto b = optimal_plan(in.trace, in.cfg, scaled, in.p);
      CHECK(a.plan == b.plan);
      CHECK(b.qoe == doctest::Approx(3.7 * a.qoe));
    } catch (const InfeasibleError&) {
    }
  }
}

TEST_CASE("refusal and infeasibility") {
  SessionConfig cfg;
  const WeightVector w{{1, -1, -1, -1, -1}};
  const auto tr = constant(3.0, 70);
  CHECK_THROWS_AS(brute_force_plan(tr, cfg, w, 1), RefusalError);
  CHECK_THROWS_AS(optimal_plan(tr, cfg, w, 1, SearchLimits{1000}), RefusalError);

  const auto tiny = constant(0.1, 5);
  CHECK_THROWS_AS(optimal_plan(tiny, cfg, w, 1), InfeasibleError);
  CHECK_THROWS_AS(castle(tiny, cfg, w, 1), InfeasibleError);
  CHECK_THROWS_AS(maestro(tiny, cfg, {1, -1, -1}, CycleWindow::whole_session(cfg)),
                  InfeasibleError);
  CHECK_THROWS_AS(optimal_plan(tr, cfg, w, -1), ValidationError);
  CHECK_THROWS_AS(parse_planner("greedy"), ValidationError);
}

TEST_CASE("default session with castle") {
  SessionConfig cfg;
  SyntheticTraceConfig tc;
  const auto tr = generate_trace(tc);
  const auto r = castle(tr, cfg, WeightVector{{1, -1, -0.5, -2, -3}}, 1);
  CHECK(r.plan.size() == 30);
  CHECK(r.metrics.stall_count <= 1);
  const auto j = to_json(r);
  CHECK(j["plan"].size() == 30);
  CHECK(j["plan"][0].get<int>() >= 1);
}
