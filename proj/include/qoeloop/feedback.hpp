#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <vector>

#include <json.hpp>

#include "qoeloop/metrics.hpp"
#include "qoeloop/playback.hpp"

namespace qoeloop {

// Synthetic user-feedback oracle.
//
// Representative metric vectors are laid out on a grid over the reachable
// ranges and sorted by a strict priority: fewer stalls, then less
// rebuffering, then higher average quality, then shorter startup, then fewer
// switches. Stall counts share the categories equally so that no category
// mixes two stall counts; within a stall count the sorted representatives are
// cut into equal-population categories. MOS falls linearly from 5 to 1 over
// the ranks. A delivered metric vector belongs to the last category whose
// first representative does not rank behind it.

struct MetricGrid {
  int max_stalls = 1;
  int rebuffer_points = 4;  // in (0, rebuffer_max] per stall count >= 1
  int quality_points = 10;
  int startup_points = 5;
  int switch_points = 4;
  double rebuffer_max = 0.5;
  double quality_min = 0.4;
  double quality_max = 4.5;
  double startup_max = 1.0;

  static MetricGrid for_session(const SessionConfig& cfg);
  void validate() const;
};

/// Strict weak order of the priority ranking: true when `a` is a better
/// experience than `b`.
bool ranks_before(const QoEMetrics& a, const QoEMetrics& b) noexcept;

struct QoECategory {
  int rank = 1;  // 1 = best
  double mos = 5.0;
  std::array<double, 5> score_distribution{};  // P(score = 1..5)

  double mean_score() const noexcept;
};

struct FeedbackDataset {
  MetricGrid grid;
  std::vector<QoECategory> categories;  // best first
  std::vector<QoEMetrics> boundaries;   // first representative of each category
  std::size_t representative_count = 0;
  std::uint64_t seed = 0;
};

struct Classification {
  std::size_t index = 0;  // into FeedbackDataset::categories
  bool clamped = false;   // some metric fell outside the modeled range
};

/// Builds the category table. The construction is fully deterministic; the
/// seed is recorded so experiment files name every random input.
FeedbackDataset build_dataset(int num_categories, const SessionConfig& cfg, std::uint64_t seed);
FeedbackDataset build_dataset(int num_categories, const MetricGrid& grid, std::uint64_t seed);

/// The grid's representative vectors in priority order.
std::vector<QoEMetrics> representatives(const MetricGrid& grid);

Classification classify_detailed(const QoEMetrics& phi, const FeedbackDataset& ds);
const QoECategory& classify(const QoEMetrics& phi, const FeedbackDataset& ds);

/// Draws a 1..5 score from the category of `phi`.
int sample_score(const QoEMetrics& phi, const FeedbackDataset& ds, std::mt19937_64& rng);

/// Two-point distribution on floor(mos), ceil(mos) with mean exactly `mos`.
std::array<double, 5> score_distribution_for(double mos);

/// Weights whose QoE order follows the dataset's priority order.
WeightVector ideal_weights();

nlohmann::ordered_json to_json(const FeedbackDataset& ds);

}  // namespace qoeloop
