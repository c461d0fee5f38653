#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "qoeloop/feedback.hpp"
#include "qoeloop/learner.hpp"
#include "qoeloop/planner.hpp"
#include "qoeloop/trace.hpp"

namespace qoeloop {

enum class MosMode {
  kSampled,        // mean of scores drawn from each category's distribution
  kDeterministic,  // mean of category MOS values
};

/// Learner settings for use inside the loop: one pass of at most 100 descent
/// steps per round at a fixed step size, so each mini-batch nudges the
/// weights instead of refitting them from scratch. The step size stays below
/// 2 / lambda_max for metric vectors within the default ladder's range.
LearnerConfig online_learner_config();

struct LoopConfig {
  SessionConfig session;
  int minibatch_size = 10;
  int max_rounds = 500;
  PlannerKind planner = PlannerKind::kCastle;
  LearnerConfig learner = online_learner_config();
  std::vector<ThroughputTrace> train_pool;
  std::vector<ThroughputTrace> eval_pool;
  double msv_threshold = 1e-3;
  int stable_rounds = 3;  // consecutive rounds at or below the threshold
  std::uint64_t seed = 1;
  std::optional<WeightVector> initial_weights;  // default: learner init rule
  int eval_every = 0;                           // 0 disables per-round pool MOS
  MosMode eval_mode = MosMode::kDeterministic;

  void validate() const;
};

struct RoundRecord {
  int round = 0;  // 1-based
  WeightVector weights;
  double msv = 0.0;
  double batch_mos = 0.0;  // mean score collected this round
  std::vector<TrainingSample> batch;
  int skipped = 0;  // infeasible draws replaced this round
  bool train_converged = false;
  double train_loss = 0.0;
  std::optional<double> eval_mos;
};

struct LoopTelemetry {
  WeightVector initial;
  std::vector<RoundRecord> rounds;
  bool converged = false;
  int skipped_total = 0;

  std::vector<WeightVector> w_history() const;
  std::vector<double> msv_series() const;
  std::vector<double> mos_series() const;
  const WeightVector& final_weights() const noexcept {
    return rounds.empty() ? initial : rounds.back().weights;
  }
};

/// (1/5) * sum_k (a_k - b_k)^2
double mean_square_variation(const WeightVector& a, const WeightVector& b) noexcept;

/// Optimize, deliver, score, retrain; repeated until the weights settle or
/// max_rounds is reached. Training warm-starts from the previous round.
LoopTelemetry run_closed_loop(const LoopConfig& cfg, const FeedbackDataset& ds);

struct MosEvaluation {
  double mos = 0.0;
  std::size_t evaluated = 0;
  std::size_t infeasible = 0;
};

/// Plans every trace of the pool with `w` and averages the resulting scores.
MosEvaluation evaluate_mos(const WeightVector& w, std::span<const ThroughputTrace> pool,
                           const FeedbackDataset& ds, const SessionConfig& session,
                           PlannerKind planner = PlannerKind::kCastle,
                           MosMode mode = MosMode::kDeterministic, std::uint64_t seed = 1);

/// Columns: round,msv,mos,w1..w5 (plus eval_mos when any round has one).
std::string telemetry_csv(const LoopTelemetry& t);
nlohmann::ordered_json to_json(const LoopTelemetry& t);

}  // namespace qoeloop
