#include <doctest.h>

#include <algorithm>
#include <random>

#include "qoeloop/errors.hpp"
#include "qoeloop/playback.hpp"

using namespace qoeloop;

namespace {

ThroughputTrace constant(double rate, std::size_t slots) {
  ThroughputTrace t;
  t.values.assign(slots, rate);
  return t;
}

BitratePlan uniform_plan(int segments, int level) {
  return BitratePlan{std::vector<int>(static_cast<std::size_t>(segments), level)};
}

}  // namespace

TEST_CASE("startup of the lowest rung at 1 Mb/s with a 5 s cache") {
  SessionConfig cfg;  // 30 x 1 s segments, ladder starts at 0.4 Mb/s
  const auto t = simulate(uniform_plan(30, 0), constant(1.0, 70), cfg);
  CHECK(t.complete());
  CHECK(std::abs(t.startup_delay() - 2.0) <= 1e-9);
  CHECK(t.stall_count == 0);
  CHECK(t.baw_durations.size() == 1);
}

TEST_CASE("rate-matched steady state") {
  SessionConfig cfg;
  cfg.num_segments = 10;
  cfg.prefetch_segments = 1;
  cfg.ladder = {1.0, 2.0};
  const auto t = simulate(uniform_plan(10, 1), constant(2.0, 20), cfg);
  CHECK(t.startup_delay() == doctest::Approx(1.0));
  CHECK(t.stall_count == 0);
  for (std::size_t k = 1; k < 9; ++k) CHECK(t.buffer_level[k] == doctest::Approx(1.0));
}

TEST_CASE("outage after prefetch gives one stall and an incomplete download") {
  SessionConfig cfg;
  cfg.num_segments = 10;
  cfg.prefetch_segments = 2;
  cfg.ladder = {1.0};
  ThroughputTrace tr;
  tr.values = {1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0};
  const auto t = simulate(uniform_plan(10, 0), tr, cfg);
  CHECK_FALSE(t.complete());
  CHECK(t.segments_remaining == 8);
  REQUIRE(t.stall_count == 1);
  CHECK(t.stall_times[0] == doctest::Approx(4.0));  // x0 segments of content after BaP start
  CHECK(t.stall_segments[0] == 2);
  CHECK_FALSE(t.download_complete_slot.has_value());
}

TEST_CASE("mid-session dip causes a rebuffering phase") {
  SessionConfig cfg;
  cfg.num_segments = 6;
  cfg.prefetch_segments = 1;
  cfg.ladder = {1.0};
  ThroughputTrace tr;
  tr.values = {1.0, 1.0, 0.25, 0.25, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0};
  const auto t = simulate(uniform_plan(6, 0), tr, cfg);
  REQUIRE(t.complete());
  CHECK(t.stall_count == 1);
  CHECK(t.baw_durations.size() == 2);
  CHECK(t.rebuffering_time() > 0.0);
  // Phases alternate and the buffer never goes negative.
  for (double b : t.buffer_level) CHECK(b >= 0.0);
  CHECK(t.bap_start_times.size() == t.baw_durations.size());
}

TEST_CASE("feasibility report") {
  SessionConfig cfg;
  const auto ok = check_feasibility(uniform_plan(30, 0), constant(5.0, 70), cfg, 0);
  CHECK(ok.feasible);
  CHECK(ok.stalls == 0);

  const auto short_horizon = check_feasibility(uniform_plan(30, 4), constant(0.5, 40), cfg, 1);
  CHECK_FALSE(short_horizon.feasible);
  CHECK(short_horizon.incomplete);

  // Alternating outages: two stalls against a budget of one.
  SessionConfig c2;
  c2.num_segments = 6;
  c2.prefetch_segments = 1;
  c2.ladder = {1.0};
  ThroughputTrace tr;
  tr.values = {1, 1, 0, 0, 1, 1, 0, 0, 1, 1, 1, 1, 1};
  const auto two = check_feasibility(uniform_plan(6, 0), tr, c2, 1);
  CHECK(two.stalls == 2);
  CHECK_FALSE(two.incomplete);
  CHECK_FALSE(two.feasible);
}

TEST_CASE("conservation of appended content") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int complete = 0;
  for (int it = 0; it < 500; ++it) {
    SessionConfig cfg;
    cfg.num_segments = 2 + static_cast<int>(rng() % 10);
    cfg.prefetch_segments = 1 + static_cast<int>(rng() % static_cast<unsigned>(cfg.num_segments - 1));
    cfg.frames_per_segment = 24 + static_cast<int>(rng() % 40);
    ThroughputTrace tr;
    tr.slot_duration = 0.5 + u(rng);
    for (int k = 0; k < 40; ++k) tr.values.push_back(u(rng) * 6.0);
    BitratePlan p;
    for (int s = 0; s < cfg.num_segments; ++s) p.levels.push_back(static_cast<int>(rng() % 5));
    const auto t = simulate(p, tr, cfg);
    if (!t.complete()) continue;
    ++complete;
    CHECK(std::abs(t.appended_content - cfg.video_length()) <= 1e-9);
    CHECK(t.segment_finish_times.size() == static_cast<std::size_t>(cfg.num_segments));
    CHECK(std::is_sorted(t.segment_finish_times.begin(), t.segment_finish_times.end()));
  }
  CHECK(complete > 100);
}

TEST_CASE("lowering one segment never lengthens startup") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int it = 0; it < 2000; ++it) {
    SessionConfig cfg;
    cfg.num_segments = 2 + static_cast<int>(rng() % 7);
    cfg.prefetch_segments = 1 + static_cast<int>(rng() % static_cast<unsigned>(cfg.num_segments - 1));
    cfg.ladder = {0.4, 1.0, 2.5};
    SyntheticTraceConfig tc;
    tc.num_slots = static_cast<std::size_t>(cfg.num_segments) * 3;
    tc.mean = 0.5 + 2.5 * u(rng);
    tc.volatility = 2.0 * u(rng);
    tc.seed = rng();
    const auto tr = generate_trace(tc);
    BitratePlan p;
    for (int s = 0; s < cfg.num_segments; ++s) p.levels.push_back(static_cast<int>(rng() % 3));
    const auto j = static_cast<std::size_t>(rng() % static_cast<unsigned>(cfg.num_segments));
    if (p.levels[j] == 0) continue;
    BitratePlan q = p;
    q.levels[j] -= 1;
    const auto a = simulate(p, tr, cfg);
    const auto b = simulate(q, tr, cfg);
    if (!a.complete()) continue;
    CHECK(b.complete());
    CHECK(b.startup_delay() <= a.startup_delay() + 1e-12);
  }
}

TEST_CASE("lowering one segment never adds stalls under constant throughput") {
  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int it = 0; it < 2000; ++it) {
    SessionConfig cfg;
    cfg.num_segments = 2 + static_cast<int>(rng() % 7);
    cfg.prefetch_segments = 1 + static_cast<int>(rng() % static_cast<unsigned>(cfg.num_segments - 1));
    cfg.ladder = {0.4, 1.0, 2.5};
    const auto tr = constant(0.3 + 2.5 * u(rng), static_cast<std::size_t>(cfg.num_segments) * 4);
    BitratePlan p;
    for (int s = 0; s < cfg.num_segments; ++s) p.levels.push_back(static_cast<int>(rng() % 3));
    const auto j = static_cast<std::size_t>(rng() % static_cast<unsigned>(cfg.num_segments));
    if (p.levels[j] == 0) continue;
    BitratePlan q = p;
    q.levels[j] -= 1;
    const auto a = simulate(p, tr, cfg);
    const auto b = simulate(q, tr, cfg);
    if (!a.complete()) continue;
    CHECK(b.stall_count <= a.stall_count);
  }
}

TEST_CASE("lowering a segment can add a stall when throughput varies") {
  // The cheaper first segment starts playback before a long outage.
  SessionConfig cfg;
  cfg.num_segments = 3;
  cfg.prefetch_segments = 2;
  cfg.ladder = {0.5, 1.0};
  ThroughputTrace tr;
  tr.values = {1, 0, 0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 1, 1};
  const auto high = simulate(BitratePlan{{1, 0, 0}}, tr, cfg);
  const auto low = simulate(BitratePlan{{0, 0, 0}}, tr, cfg);
  REQUIRE(high.complete());
  REQUIRE(low.complete());
  CHECK(high.startup_delay() == doctest::Approx(8.5));
  CHECK(low.startup_delay() == doctest::Approx(1.0));
  CHECK(high.stall_count == 0);
  CHECK(low.stall_count == 1);
}

TEST_CASE("ascending reordering of a stall-free plan can stall") {
  // 2.5 Mb/s first builds a 1 s cache slowly but then the cheap segment
  // refills fast; in ascending order playback starts early and drains
  // during the expensive download.
  SessionConfig cfg;
  cfg.num_segments = 2;
  cfg.prefetch_segments = 1;
  cfg.ladder = {0.4, 1.0, 2.5};
  const auto tr = constant(1.0, 10);
  const auto descending = simulate(BitratePlan{{2, 0}}, tr, cfg);
  const auto ascending = simulate(BitratePlan{{0, 2}}, tr, cfg);
  CHECK(descending.complete());
  CHECK(descending.stall_count == 0);
  CHECK(ascending.stall_count == 1);
}

TEST_CASE("engine snapshots branch independently") {
  SessionConfig cfg;
  cfg.num_segments = 4;
  cfg.prefetch_segments = 1;
  const auto tr = constant(2.0, 20);
  PlaybackEngine e(tr, cfg);
  REQUIRE(e.download_segment(1.0));
  PlaybackEngine copy = e;
  REQUIRE(copy.download_segment(4.5));
  CHECK(copy.time() > e.time());
  CHECK(e.segments_done() == 1);
  CHECK(copy.segments_done() == 2);
}

TEST_CASE("validation") {
  SessionConfig cfg;
  cfg.ladder = {1.0, 1.0};
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = SessionConfig{};
  cfg.prefetch_segments = 30;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = SessionConfig{};
  CHECK_THROWS_AS(simulate(uniform_plan(29, 0), constant(1.0, 70), cfg), ValidationError);
  CHECK_THROWS_AS(simulate(uniform_plan(30, 5), constant(1.0, 70), cfg), ValidationError);
}
