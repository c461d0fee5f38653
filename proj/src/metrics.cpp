#include "qoeloop/metrics.hpp"

#include <cmath>

#include "qoeloop/errors.hpp"

namespace qoeloop {

QoEMetrics QoEMetrics::from_array(const Vec5& phi) {
  QoEMetrics m;
  m.avg_quality = phi[0];
  m.startup_ratio = phi[1];
  m.switch_ratio = phi[2];
  m.stall_count = static_cast<int>(std::lround(phi[3]));
  m.rebuffer_ratio = phi[4];
  return m;
}

bool WeightVector::sign_valid() const noexcept {
  if (!(w[0] >= 0.0)) return false;
  for (std::size_t i = 1; i < 5; ++i)
    if (!(w[i] <= 0.0)) return false;
  return true;
}

WeightVector project_to_sign_orthant(const WeightVector& w) {
  WeightVector p = w;
  p[0] = std::max(0.0, p[0]);
  for (std::size_t i = 1; i < 5; ++i) p[i] = std::min(0.0, p[i]);
  return p;
}

QoEMetrics metrics_from_totals(const BitratePlan& plan, const SessionConfig& cfg,
                               double startup_delay, int stalls, double rebuffering_time) {
  const auto S = plan.levels.size();
  double quality = 0.0;
  int switches = 0;
  for (std::size_t s = 0; s < S; ++s) {
    quality += cfg.ladder[static_cast<std::size_t>(plan.levels[s])];
    if (s > 0 && plan.levels[s] != plan.levels[s - 1]) ++switches;
  }
  const double T = cfg.video_length();
  QoEMetrics m;
  m.avg_quality = quality / static_cast<double>(S);
  m.startup_ratio = startup_delay / T;
  m.switch_ratio = S > 1 ? switches / static_cast<double>(S - 1) : 0.0;
  m.stall_count = stalls;
  m.rebuffer_ratio = rebuffering_time / T;
  return m;
}

QoEMetrics compute_metrics(const PlaybackTimeline& timeline, const BitratePlan& plan,
                           const SessionConfig& cfg) {
  if (plan.levels.size() != static_cast<std::size_t>(timeline.num_segments))
    throw ValidationError("plan and timeline describe different segment counts");
  plan.validate(cfg);
  if (!timeline.complete())
    throw ValidationError("metrics need a timeline whose download completed");
  return metrics_from_totals(plan, cfg, timeline.startup_delay(), timeline.stall_count,
                             timeline.rebuffering_time());
}

double qoe_score(const QoEMetrics& phi, const WeightVector& w) noexcept {
  const Vec5 v = phi.as_array();
  double q = 0.0;
  for (std::size_t i = 0; i < 5; ++i) q += w[i] * v[i];
  return q;
}

nlohmann::ordered_json to_json(const QoEMetrics& phi) {
  nlohmann::ordered_json j;
  j["phi1"] = phi.avg_quality;
  j["phi2"] = phi.startup_ratio;
  j["phi3"] = phi.switch_ratio;
  j["phi4"] = phi.stall_count;
  j["phi5"] = phi.rebuffer_ratio;
  return j;
}

QoEMetrics metrics_from_json(const nlohmann::json& j) {
  Vec5 v{};
  static constexpr const char* kKeys[] = {"phi1", "phi2", "phi3", "phi4", "phi5"};
  for (std::size_t i = 0; i < 5; ++i) {
    if (!j.contains(kKeys[i]) || !j[kKeys[i]].is_number())
      throw ValidationError(std::string("missing numeric field ") + kKeys[i]);
    v[i] = j[kKeys[i]].get<double>();
  }
  return QoEMetrics::from_array(v);
}

nlohmann::ordered_json to_json(const WeightVector& w) {
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  for (double x : w.w) j.push_back(x);
  return j;
}

}  // namespace qoeloop
