#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "qoeloop/metrics.hpp"
#include "qoeloop/playback.hpp"
#include "qoeloop/trace.hpp"

namespace qoeloop {

/// A contiguous run of segments planned as one BaW-BaP cycle that starts
/// with an empty buffer at `start_time`. Segment indices are 0-based and
/// inclusive.
struct CycleWindow {
  int first_segment = 0;
  int last_segment = 0;
  double start_time = 0.0;
  double initial_buffer = 0.0;

  int length() const noexcept { return last_segment - first_segment + 1; }
  static CycleWindow whole_session(const SessionConfig& cfg) {
    return {0, cfg.num_segments - 1, 0.0, 0.0};
  }
};

struct PlanResult {
  BitratePlan plan;
  QoEMetrics metrics;
  double qoe = 0.0;
  std::vector<int> stall_positions;  // segments downloading when a stall hit
};

/// Weights over (quality, delay, switching) used for single-cycle scoring.
using CycleWeights = std::array<double, 3>;

struct SearchLimits {
  std::uint64_t max_evaluations = 10'000'000;
};

/// Calls `visit` for every non-decreasing sequence of ladder indices over the
/// window, in lexicographic order. Returns the number of sequences.
std::uint64_t enumerate_ascending_plans(const SessionConfig& cfg, const CycleWindow& window,
                                        const std::function<void(const std::vector<int>&)>& visit);

/// C(L + n - 1, n) for a window of n segments over L levels.
std::uint64_t count_ascending_plans(int levels, int length);

/// Exhaustive stall-enforcement search: every plan that is ascending on each
/// of at most p+1 consecutive blocks (block boundaries are the candidate
/// stall positions), scored by full simulation and kept when it completes
/// with at most p stalls. Throws InfeasibleError or RefusalError.
PlanResult optimal_plan(const ThroughputTrace& trace, const SessionConfig& cfg,
                        const WeightVector& w, int max_stalls, SearchLimits limits = {});

/// Single-cycle heuristic. Fixes a level for the prefetch segments, then grows
/// each higher level backward from the end of the window for as long as the
/// cycle stays stall-free, and keeps the best (l1, l2) candidate. Throws
/// InfeasibleError if even the all-lowest plan stalls in the window.
///
/// For a partial window, `plan` holds only the window's levels and the
/// metrics are those of the isolated cycle.
PlanResult maestro(const ThroughputTrace& trace, const SessionConfig& cfg,
                   const CycleWeights& weights, const CycleWindow& window);

/// Multi-cycle heuristic: starts from the zero-stall single-cycle plan and
/// greedily enforces one more stall at the best admissible position while
/// the full QoE strictly improves, up to `max_stalls`.
PlanResult castle(const ThroughputTrace& trace, const SessionConfig& cfg, const WeightVector& w,
                  int max_stalls);

/// Every plan in {1..L}^S, scored by simulate + compute_metrics. Test oracle.
PlanResult brute_force_plan(const ThroughputTrace& trace, const SessionConfig& cfg,
                            const WeightVector& w, int max_stalls, SearchLimits limits = {});

enum class PlannerKind { kOptimal, kMaestro, kCastle, kBruteForce };

PlannerKind parse_planner(std::string_view name);
const char* planner_name(PlannerKind kind) noexcept;

/// Dispatch helper. kMaestro plans the whole session with (w1, w2, w3).
PlanResult run_planner(PlannerKind kind, const ThroughputTrace& trace, const SessionConfig& cfg,
                       const WeightVector& w, int max_stalls, SearchLimits limits = {});

/// True when `candidate` beats `incumbent` by more than rounding noise.
bool qoe_improves(double candidate, double incumbent) noexcept;

nlohmann::ordered_json to_json(const PlanResult& result);

}  // namespace qoeloop
