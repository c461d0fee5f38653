#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "qoeloop/metrics.hpp"

namespace qoeloop {

/// One (delivered metrics, user score) pair.
struct TrainingSample {
  Vec5 phi{};
  double score = 0.0;

  TrainingSample() = default;
  TrainingSample(const Vec5& p, double s) : phi(p), score(s) {}
  TrainingSample(const QoEMetrics& m, double s) : phi(m.as_array()), score(s) {}
};

struct LearnerConfig {
  double epsilon = 1e-6;    // target batch loss
  double mu = 1e-6;         // minimum step-size bracket width
  int max_steps = 1000;     // descent steps per inner loop
  double alpha_min = 1e-4;
  double alpha_max = 0.5;
  double init_scale = 1e-3;  // half-width of the uniform initial weights
  int max_rounds = 200;      // outer bracket-adaptation rounds
  std::uint64_t seed = 1;
  bool project_signs = false;  // clamp the result to w1 >= 0, w2..w5 <= 0

  void validate() const;
};

struct TrainResult {
  WeightVector weights;
  bool converged = false;
  int steps = 0;   // accepted descent steps
  int rounds = 0;  // outer bracket rounds
  double final_loss = 0.0;
  double alpha_min = 0.0;  // bracket at exit
  double alpha_max = 0.0;
};

/// Linear activation w . phi.
double predict(const WeightVector& w, const Vec5& phi) noexcept;
inline double predict(const WeightVector& w, const QoEMetrics& phi) noexcept {
  return predict(w, phi.as_array());
}

/// Half squared error of one sample.
double sample_loss(const WeightVector& w, const TrainingSample& sample) noexcept;

/// Mean of the sample losses. Summation is sequential in batch order.
double batch_loss(const WeightVector& w, std::span<const TrainingSample> batch) noexcept;

/// Analytic gradient of batch_loss.
Vec5 gradient(const WeightVector& w, std::span<const TrainingSample> batch) noexcept;

/// Uniform in [-init_scale, init_scale]^5, seeded by cfg.seed.
WeightVector initial_weights(const LearnerConfig& cfg);

/// Nearest point with w1 >= 0 and w2..w5 <= 0.
WeightVector project_signs(const WeightVector& w) noexcept;

/// Mini-batch gradient descent with an adaptive step-size bracket.
///
/// Each round runs up to max_steps steps at the bracket midpoint. Reaching
/// epsilon ends training. A round that lowered the loss raises alpha_min; a
/// round that did not (or overflowed) is rolled back and lowers alpha_max.
/// Training stops once the bracket is narrower than mu. With project_signs the
/// returned weights are projected and final_loss is evaluated there.
TrainResult train(std::span<const TrainingSample> batch, const LearnerConfig& cfg,
                  std::optional<WeightVector> initial = std::nullopt);

/// Parses JSON lines of {"phi1".."phi5", "score"}. Blank lines are skipped.
std::vector<TrainingSample> parse_batch_jsonl(std::string_view text);

}  // namespace qoeloop
