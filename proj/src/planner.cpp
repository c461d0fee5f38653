#include "qoeloop/planner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>

#include "qoeloop/errors.hpp"

namespace qoeloop {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Incumbent with deterministic tie-breaking: lexicographically smallest plan
// among plans whose QoE agrees within qoe_improves' tolerance.
struct Incumbent {
  double qoe = kNegInf;
  std::vector<int> levels;

  bool found() const noexcept { return qoe != kNegInf; }

  bool offer(double q, const std::vector<int>& candidate) {
    if (qoe_improves(q, qoe) || (!qoe_improves(qoe, q) && candidate < levels)) {
      qoe = q;
      levels = candidate;
      return true;
    }
    return false;
  }
};

double ladder_at(const SessionConfig& cfg, int level) {
  return cfg.ladder[static_cast<std::size_t>(level)];
}

PlanResult finalize(const std::vector<int>& levels, const ThroughputTrace& trace,
                    const SessionConfig& cfg, const WeightVector& w) {
  PlanResult r;
  r.plan.levels = levels;
  const PlaybackTimeline t = simulate(r.plan, trace, cfg);
  r.metrics = compute_metrics(t, r.plan, cfg);
  r.qoe = qoe_score(r.metrics, w);
  r.stall_positions = t.stall_segments;
  return r;
}

// ---------------------------------------------------------------------------
// Exhaustive search over piecewise-ascending plans
// ---------------------------------------------------------------------------

class BlockAscendingSearch {
 public:
  BlockAscendingSearch(const ThroughputTrace& trace, const SessionConfig& cfg,
                       const WeightVector& w, int max_stalls, std::uint64_t cap)
      : trace_(trace), cfg_(cfg), w_(w), max_stalls_(max_stalls), cap_(cap),
        levels_(static_cast<std::size_t>(cfg.num_segments), 0) {}

  Incumbent run() {
    descend(0, PlaybackEngine(trace_, cfg_), -1, 0);
    return best_;
  }

 private:
  void descend(int seg, const PlaybackEngine& engine, int prev, int descents) {
    if (seg == cfg_.num_segments) {
      PlaybackEngine done = engine;
      done.finish();
      const QoEMetrics m = metrics_from_totals(BitratePlan{levels_}, cfg_, done.startup_delay(),
                                               done.stalls(), done.rebuffering_time());
      best_.offer(qoe_score(m, w_), levels_);
      return;
    }
    for (int l = 0; l < cfg_.levels(); ++l) {
      // A drop in level opens a new block, i.e. a candidate enforced stall.
      const int d = descents + (prev >= 0 && l < prev ? 1 : 0);
      if (d > max_stalls_) continue;
      if (++evaluations_ > cap_)
        throw RefusalError("optimal search exceeded " + std::to_string(cap_) + " evaluations");
      PlaybackEngine next = engine;
      if (!next.download_segment(ladder_at(cfg_, l))) continue;
      if (next.stalls() > max_stalls_) continue;
      levels_[static_cast<std::size_t>(seg)] = l;
      descend(seg + 1, next, l, d);
    }
  }

  const ThroughputTrace& trace_;
  const SessionConfig& cfg_;
  const WeightVector& w_;
  int max_stalls_;
  std::uint64_t cap_;
  std::uint64_t evaluations_ = 0;
  std::vector<int> levels_;
  Incumbent best_;
};

// ---------------------------------------------------------------------------
// Single-cycle machinery shared by MAESTRO and CASTLE
// ---------------------------------------------------------------------------

struct CycleOutcome {
  bool feasible = false;  // completed without a stall
  double waited = 0.0;    // length of the cycle's BaW phase
  double end_time = 0.0;  // when the cycle's content finishes playing
};

CycleOutcome run_cycle(const ThroughputTrace& trace, const SessionConfig& cfg,
                       const std::vector<int>& levels, double start_time) {
  PlaybackEngine engine(trace, cfg, start_time);
  CycleOutcome out;
  for (int l : levels) {
    if (!engine.download_segment(ladder_at(cfg, l))) {
      out.end_time = trace.horizon();
      return out;
    }
  }
  engine.finish();
  out.feasible = engine.stalls() == 0;
  out.waited = engine.startup_delay();
  out.end_time = engine.playback_end();
  return out;
}

struct CycleChoice {
  bool feasible = false;
  std::vector<int> levels;
  double score = 0.0;
  double waited = 0.0;
  double end_time = 0.0;
};

// Contribution of a cycle to (phi1, phi2 or phi5, phi3) of the whole session,
// so cycles of different lengths are traded off on the session's scale.
CycleWeights::value_type cycle_score(const SessionConfig& cfg, const CycleWeights& weights,
                                     const std::vector<int>& levels, double waited) {
  double quality = 0.0;
  int switches = 0;
  for (std::size_t s = 0; s < levels.size(); ++s) {
    quality += ladder_at(cfg, levels[s]);
    if (s > 0 && levels[s] != levels[s - 1]) ++switches;
  }
  const double S = cfg.num_segments;
  const double row[3] = {quality / S, waited / cfg.video_length(),
                         S > 1 ? switches / (S - 1.0) : 0.0};
  return weights[0] * row[0] + weights[1] * row[1] + weights[2] * row[2];
}

CycleChoice maestro_cycle(const ThroughputTrace& trace, const SessionConfig& cfg,
                          const CycleWeights& weights, int length, double start_time) {
  const int n = length;
  const int prefetch = std::min(cfg.prefetch_segments, n);
  std::vector<int> b(static_cast<std::size_t>(n), 0);
  auto at = [&b](int s) -> int& { return b[static_cast<std::size_t>(s)]; };

  Incumbent best;
  CycleOutcome best_outcome;
  auto consider = [&](const CycleOutcome& outcome) {
    if (best.offer(cycle_score(cfg, weights, b, outcome.waited), b)) best_outcome = outcome;
  };

  for (int l1 = 0; l1 < cfg.levels(); ++l1) {
    const std::vector<int> previous = b;
    for (int s = prefetch; s < n; ++s) at(s) = l1;
    CycleOutcome outcome = run_cycle(trace, cfg, b, start_time);
    if (!outcome.feasible) {
      b = previous;
      continue;
    }
    // Prefetch segments: raise to l1 from the last one backward.
    for (int s = prefetch - 1; s >= 0; --s) {
      const int old = at(s);
      at(s) = l1;
      const CycleOutcome trial = run_cycle(trace, cfg, b, start_time);
      if (!trial.feasible) {
        at(s) = old;
        break;
      }
      outcome = trial;
    }
    consider(outcome);

    // Playback segments: grow each higher level backward from the window end.
    for (int l2 = l1 + 1; l2 < cfg.levels(); ++l2) {
      for (int s = n - 1; s >= prefetch; --s) {
        const int old = at(s);
        at(s) = l2;
        const CycleOutcome trial = run_cycle(trace, cfg, b, start_time);
        if (!trial.feasible) {
          at(s) = old;
          break;
        }
        outcome = trial;
      }
      consider(outcome);
    }
  }

  CycleChoice choice;
  if (!best.found()) return choice;
  choice.feasible = true;
  choice.levels = best.levels;
  choice.score = best.qoe;
  choice.waited = best_outcome.waited;
  choice.end_time = best_outcome.end_time;
  return choice;
}

struct Evaluation {
  bool feasible = false;
  double qoe = kNegInf;
};

Evaluation evaluate_plan(const std::vector<int>& levels, const ThroughputTrace& trace,
                         const SessionConfig& cfg, const WeightVector& w, int max_stalls) {
  PlaybackEngine engine(trace, cfg);
  for (int l : levels)
    if (!engine.download_segment(ladder_at(cfg, l))) return {};
  engine.finish();
  if (engine.stalls() > max_stalls) return {};
  const QoEMetrics m = metrics_from_totals(BitratePlan{levels}, cfg, engine.startup_delay(),
                                           engine.stalls(), engine.rebuffering_time());
  return {true, qoe_score(m, w)};
}

void validate_inputs(const ThroughputTrace& trace, const SessionConfig& cfg, int max_stalls) {
  cfg.validate();
  trace.validate();
  if (max_stalls < 0) throw ValidationError("max_stalls must be >= 0");
}

}  // namespace

bool qoe_improves(double candidate, double incumbent) noexcept {
  if (incumbent == kNegInf) return candidate > kNegInf;
  return candidate > incumbent + 1e-12 * std::max(1.0, std::abs(incumbent));
}

std::uint64_t count_ascending_plans(int levels, int length) {
  // C(L + n - 1, n), computed incrementally so intermediate values stay exact.
  std::uint64_t c = 1;
  for (int i = 1; i <= length; ++i)
    c = c * static_cast<std::uint64_t>(levels - 1 + i) / static_cast<std::uint64_t>(i);
  return c;
}

std::uint64_t enumerate_ascending_plans(const SessionConfig& cfg, const CycleWindow& window,
                                        const std::function<void(const std::vector<int>&)>& visit) {
  if (window.first_segment < 0 || window.last_segment < window.first_segment)
    throw ValidationError("invalid cycle window");
  const int n = window.length();
  const int L = cfg.levels();
  std::vector<int> seq(static_cast<std::size_t>(n), 0);
  std::uint64_t count = 0;
  auto rec = [&](auto&& self, int pos, int lo) -> void {
    if (pos == n) {
      ++count;
      visit(seq);
      return;
    }
    for (int l = lo; l < L; ++l) {
      seq[static_cast<std::size_t>(pos)] = l;
      self(self, pos + 1, l);
    }
  };
  rec(rec, 0, 0);
  return count;
}

PlanResult optimal_plan(const ThroughputTrace& trace, const SessionConfig& cfg,
                        const WeightVector& w, int max_stalls, SearchLimits limits) {
  validate_inputs(trace, cfg, max_stalls);
  BlockAscendingSearch search(trace, cfg, w, max_stalls, limits.max_evaluations);
  const Incumbent best = search.run();
  if (!best.found())
    throw InfeasibleError("no plan completes the video with at most " +
                          std::to_string(max_stalls) + " stalls");
  return finalize(best.levels, trace, cfg, w);
}

PlanResult maestro(const ThroughputTrace& trace, const SessionConfig& cfg,
                   const CycleWeights& weights, const CycleWindow& window) {
  validate_inputs(trace, cfg, 0);
  if (window.first_segment < 0 || window.last_segment >= cfg.num_segments ||
      window.last_segment < window.first_segment || window.start_time < 0.0)
    throw ValidationError("cycle window outside the session");
  if (window.initial_buffer != 0.0)
    throw ValidationError("cycle windows start with an empty buffer");

  const CycleChoice choice = maestro_cycle(trace, cfg, weights, window.length(),
                                           window.start_time);
  if (!choice.feasible) throw InfeasibleError("no stall-free ascending plan for the window");

  if (window.length() == cfg.num_segments && window.start_time == 0.0) {
    PlanResult r = finalize(choice.levels, trace, cfg, WeightVector{});
    r.qoe = choice.score;
    return r;
  }
  PlanResult r;
  r.plan.levels = choice.levels;
  SessionConfig local = cfg;
  local.num_segments = window.length();
  r.metrics = metrics_from_totals(r.plan, local, choice.waited, 0, 0.0);
  r.metrics.startup_ratio = choice.waited / cfg.video_length();
  r.qoe = choice.score;
  return r;
}

PlanResult castle(const ThroughputTrace& trace, const SessionConfig& cfg, const WeightVector& w,
                  int max_stalls) {
  validate_inputs(trace, cfg, max_stalls);
  const int S = cfg.num_segments;
  const int x0 = cfg.prefetch_segments;
  // The first cycle is scored on quality, startup and switching. After a stall
  // the wait is rebuffering and the switching term is dropped.
  const CycleWeights startup_weights{w[0], w[1], w[2]};
  const CycleWeights rebuffer_weights{w[0], w[4], 0.0};

  struct Cycle {
    int first;
    int last;
    std::vector<int> levels;  // empty while unplanned
  };
  std::vector<Cycle> cycles{{0, S - 1, {}}};

  Incumbent best;
  if (const CycleChoice zero = maestro_cycle(trace, cfg, startup_weights, S, 0.0); zero.feasible) {
    cycles[0].levels = zero.levels;
    const Evaluation e = evaluate_plan(zero.levels, trace, cfg, w, max_stalls);
    if (e.feasible) best.offer(e.qoe, zero.levels);
  }

  for (int added = 0; added < max_stalls; ++added) {
    // Idealized start of every cycle: each begins with an empty buffer when
    // the previous cycle's content has finished playing.
    std::vector<double> starts(cycles.size(), 0.0);
    for (std::size_t c = 1; c < cycles.size(); ++c)
      starts[c] = run_cycle(trace, cfg, cycles[c - 1].levels, starts[c - 1]).end_time;

    Incumbent round;
    std::optional<std::size_t> split_cycle;
    std::vector<int> split_pre, split_post;
    for (std::size_t c = 0; c < cycles.size(); ++c) {
      const Cycle& cyc = cycles[c];
      const CycleWeights& pre_weights = c == 0 ? startup_weights : rebuffer_weights;
      for (int k = cyc.first + x0; k <= cyc.last - x0; ++k) {
        const CycleChoice pre = maestro_cycle(trace, cfg, pre_weights, k - cyc.first, starts[c]);
        if (!pre.feasible) continue;
        const CycleChoice post =
            maestro_cycle(trace, cfg, rebuffer_weights, cyc.last - k + 1, pre.end_time);
        if (!post.feasible) continue;

        std::vector<int> composite;
        composite.reserve(static_cast<std::size_t>(S));
        for (std::size_t o = 0; o < cycles.size(); ++o) {
          if (o == c) {
            composite.insert(composite.end(), pre.levels.begin(), pre.levels.end());
            composite.insert(composite.end(), post.levels.begin(), post.levels.end());
          } else {
            composite.insert(composite.end(), cycles[o].levels.begin(), cycles[o].levels.end());
          }
        }
        if (composite.size() != static_cast<std::size_t>(S)) continue;
        const Evaluation e = evaluate_plan(composite, trace, cfg, w, max_stalls);
        if (e.feasible && round.offer(e.qoe, composite)) {
          split_cycle = c;
          split_pre = pre.levels;
          split_post = post.levels;
        }
      }
    }
    if (!round.found() || !qoe_improves(round.qoe, best.qoe)) break;

    best = round;
    const std::size_t c = *split_cycle;
    const Cycle old = cycles[c];
    const int k = old.first + static_cast<int>(split_pre.size());
    cycles[c] = Cycle{old.first, k - 1, split_pre};
    cycles.insert(cycles.begin() + static_cast<std::ptrdiff_t>(c) + 1,
                  Cycle{k, old.last, split_post});
  }

  if (!best.found())
    throw InfeasibleError("no stall placement yields a feasible plan");
  return finalize(best.levels, trace, cfg, w);
}

PlanResult brute_force_plan(const ThroughputTrace& trace, const SessionConfig& cfg,
                            const WeightVector& w, int max_stalls, SearchLimits limits) {
  validate_inputs(trace, cfg, max_stalls);
  const int S = cfg.num_segments;
  const auto L = static_cast<std::uint64_t>(cfg.levels());
  std::uint64_t total = 1;
  for (int s = 0; s < S; ++s) {
    if (total > limits.max_evaluations / L)
      throw RefusalError("brute force needs more than " + std::to_string(limits.max_evaluations) +
                         " evaluations");
    total *= L;
  }

  BitratePlan plan;
  plan.levels.assign(static_cast<std::size_t>(S), 0);
  Incumbent best;
  for (std::uint64_t i = 0; i < total; ++i) {
    if (i > 0) {
      // Odometer increment, last segment fastest: lexicographic order.
      for (int s = S - 1; s >= 0; --s) {
        auto& l = plan.levels[static_cast<std::size_t>(s)];
        if (++l < cfg.levels()) break;
        l = 0;
      }
    }
    const PlaybackTimeline t = simulate(plan, trace, cfg);
    if (!t.complete() || t.stall_count > max_stalls) continue;
    best.offer(qoe_score(compute_metrics(t, plan, cfg), w), plan.levels);
  }
  if (!best.found()) throw InfeasibleError("no plan satisfies the constraints");
  return finalize(best.levels, trace, cfg, w);
}

PlannerKind parse_planner(std::string_view name) {
  if (name == "optimal") return PlannerKind::kOptimal;
  if (name == "maestro") return PlannerKind::kMaestro;
  if (name == "castle") return PlannerKind::kCastle;
  if (name == "brute") return PlannerKind::kBruteForce;
  throw ValidationError("unknown planner '" + std::string(name) + "'");
}

const char* planner_name(PlannerKind kind) noexcept {
  switch (kind) {
    case PlannerKind::kOptimal: return "optimal";
    case PlannerKind::kMaestro: return "maestro";
    case PlannerKind::kCastle: return "castle";
    case PlannerKind::kBruteForce: return "brute";
  }
  return "?";
}

PlanResult run_planner(PlannerKind kind, const ThroughputTrace& trace, const SessionConfig& cfg,
                       const WeightVector& w, int max_stalls, SearchLimits limits) {
  switch (kind) {
    case PlannerKind::kOptimal: return optimal_plan(trace, cfg, w, max_stalls, limits);
    case PlannerKind::kCastle: return castle(trace, cfg, w, max_stalls);
    case PlannerKind::kBruteForce: return brute_force_plan(trace, cfg, w, max_stalls, limits);
    case PlannerKind::kMaestro: {
      PlanResult r = maestro(trace, cfg, {w[0], w[1], w[2]}, CycleWindow::whole_session(cfg));
      r.qoe = qoe_score(r.metrics, w);
      return r;
    }
  }
  throw ValidationError("unknown planner");
}

nlohmann::ordered_json to_json(const PlanResult& result) {
  nlohmann::ordered_json j;
  nlohmann::ordered_json levels = nlohmann::ordered_json::array();
  for (int l : result.plan.levels) levels.push_back(l + 1);
  j["plan"] = std::move(levels);
  j["metrics"] = to_json(result.metrics);
  j["qoe"] = result.qoe;
  nlohmann::ordered_json stalls = nlohmann::ordered_json::array();
  for (int s : result.stall_positions) stalls.push_back(s + 1);
  j["stall_positions"] = std::move(stalls);
  return j;
}

}  // namespace qoeloop
