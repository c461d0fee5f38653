#pragma once

#include <array>

#include <json.hpp>

#include "qoeloop/playback.hpp"

namespace qoeloop {

using Vec5 = std::array<double, 5>;

/// The five session-level QoE metrics.
struct QoEMetrics {
  double avg_quality = 0.0;     // phi1, Mb/s
  double startup_ratio = 0.0;   // phi2, startup delay / video length
  double switch_ratio = 0.0;    // phi3, switches / (S - 1)
  int stall_count = 0;          // phi4
  double rebuffer_ratio = 0.0;  // phi5, rebuffering time / video length

  Vec5 as_array() const noexcept {
    return {avg_quality, startup_ratio, switch_ratio, static_cast<double>(stall_count),
            rebuffer_ratio};
  }
  static QoEMetrics from_array(const Vec5& phi);

  bool operator==(const QoEMetrics&) const = default;
};

/// Weights of the linear QoE model, one per metric.
struct WeightVector {
  Vec5 w{};

  double& operator[](std::size_t i) noexcept { return w[i]; }
  double operator[](std::size_t i) const noexcept { return w[i]; }

  /// omega1 >= 0 and omega2..omega5 <= 0.
  bool sign_valid() const noexcept;
  bool operator==(const WeightVector&) const = default;
};

WeightVector project_to_sign_orthant(const WeightVector& w);

QoEMetrics compute_metrics(const PlaybackTimeline& timeline, const BitratePlan& plan,
                           const SessionConfig& cfg);

/// Metrics from already-aggregated timing quantities; shared by the planners
/// so search paths and full simulations score plans identically.
QoEMetrics metrics_from_totals(const BitratePlan& plan, const SessionConfig& cfg,
                               double startup_delay, int stalls, double rebuffering_time);

/// Sum of w_i * phi_i.
double qoe_score(const QoEMetrics& phi, const WeightVector& w) noexcept;

nlohmann::ordered_json to_json(const QoEMetrics& phi);
QoEMetrics metrics_from_json(const nlohmann::json& j);
nlohmann::ordered_json to_json(const WeightVector& w);

}  // namespace qoeloop
