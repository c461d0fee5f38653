#include "qoeloop/feedback.hpp"

#include <algorithm>
#include <cmath>

#include "qoeloop/errors.hpp"

namespace qoeloop {
namespace {

// n evenly spaced values from `from` to `to` inclusive.
std::vector<double> axis(double from, double to, int n) {
  std::vector<double> v;
  for (int i = 0; i < n; ++i)
    v.push_back(n == 1 ? from : from + (to - from) * static_cast<double>(i) / (n - 1));
  return v;
}

bool outside(double v, double lo, double hi) {
  constexpr double kSlack = 1e-9;
  return v < lo - kSlack || v > hi + kSlack;
}

}  // namespace

MetricGrid MetricGrid::for_session(const SessionConfig& cfg) {
  MetricGrid g;
  g.max_stalls = std::max(1, cfg.max_stalls);
  g.quality_min = cfg.ladder.front();
  g.quality_max = cfg.ladder.back();
  if (!(g.quality_max > g.quality_min)) g.quality_max = g.quality_min + 1.0;
  return g;
}

void MetricGrid::validate() const {
  if (max_stalls < 0 || rebuffer_points < 1 || quality_points < 1 || startup_points < 1 ||
      switch_points < 1)
    throw ValidationError("metric grid needs at least one point per metric");
  if (!(rebuffer_max > 0.0 && startup_max > 0.0 && quality_max > quality_min))
    throw ValidationError("metric grid ranges must be non-empty");
}

bool ranks_before(const QoEMetrics& a, const QoEMetrics& b) noexcept {
  if (a.stall_count != b.stall_count) return a.stall_count < b.stall_count;
  if (a.rebuffer_ratio != b.rebuffer_ratio) return a.rebuffer_ratio < b.rebuffer_ratio;
  if (a.avg_quality != b.avg_quality) return a.avg_quality > b.avg_quality;
  if (a.startup_ratio != b.startup_ratio) return a.startup_ratio < b.startup_ratio;
  return a.switch_ratio < b.switch_ratio;
}

double QoECategory::mean_score() const noexcept {
  double m = 0.0;
  for (int s = 0; s < 5; ++s) m += (s + 1) * score_distribution[static_cast<std::size_t>(s)];
  return m;
}

std::array<double, 5> score_distribution_for(double mos) {
  if (!(mos >= 1.0 && mos <= 5.0)) throw ValidationError("MOS must lie in [1, 5]");
  std::array<double, 5> p{};
  const double lo = std::floor(mos);
  const double frac = mos - lo;
  const auto lo_idx = static_cast<std::size_t>(lo) - 1;
  if (frac == 0.0) {
    p[lo_idx] = 1.0;
  } else {
    p[lo_idx] = 1.0 - frac;
    p[lo_idx + 1] = frac;
  }
  return p;
}

FeedbackDataset build_dataset(int num_categories, const SessionConfig& cfg, std::uint64_t seed) {
  return build_dataset(num_categories, MetricGrid::for_session(cfg), seed);
}

std::vector<QoEMetrics> representatives(const MetricGrid& grid) {
  grid.validate();
  // A stall always costs some rebuffering, so the axis starts one step above 0.
  const auto rebuffer = axis(grid.rebuffer_max / grid.rebuffer_points, grid.rebuffer_max,
                             grid.rebuffer_points);
  const auto quality = axis(grid.quality_max, grid.quality_min, grid.quality_points);
  const auto startup = axis(0.0, grid.startup_max, grid.startup_points);
  const auto switching = axis(0.0, 1.0, grid.switch_points);

  std::vector<QoEMetrics> reps;
  for (int st = 0; st <= grid.max_stalls; ++st)
    for (std::size_t rb = 0; rb < (st == 0 ? 1 : rebuffer.size()); ++rb)
      for (double q : quality)
        for (double su : startup)
          for (double sw : switching) reps.push_back({q, su, sw, st, st == 0 ? 0.0 : rebuffer[rb]});
  std::sort(reps.begin(), reps.end(), ranks_before);
  return reps;
}

FeedbackDataset build_dataset(int num_categories, const MetricGrid& grid, std::uint64_t seed) {
  if (num_categories < 2) throw ValidationError("need at least two categories");
  const std::vector<QoEMetrics> reps = representatives(grid);
  if (reps.size() < static_cast<std::size_t>(num_categories))
    throw ValidationError("metric grid has fewer representatives than categories");

  FeedbackDataset ds;
  ds.grid = grid;
  ds.seed = seed;
  ds.representative_count = reps.size();
  const auto C = static_cast<std::size_t>(num_categories);
  // Each stall count gets C / levels categories, lower counts taking the
  // remainder. With fewer categories than levels the worst levels share the
  // last category.
  const auto levels = static_cast<std::size_t>(grid.max_stalls) + 1;
  std::size_t level_start = 0;
  for (std::size_t l = 0; l < levels; ++l) {
    std::size_t n = 0;
    while (level_start + n < reps.size() &&
           reps[level_start + n].stall_count == static_cast<int>(l))
      ++n;
    const std::size_t share = C / levels + (l < C % levels ? 1 : 0);
    if (share > n) throw ValidationError("metric grid has fewer representatives than categories");
    // The level opens with the best vector it can hold, so any vector with
    // this many stalls lands at or after it. Later cuts sit at ceil(j n / share).
    if (share > 0)
      ds.boundaries.push_back({grid.quality_max, 0.0, 0.0, static_cast<int>(l), 0.0});
    for (std::size_t j = 1; j < share; ++j)
      ds.boundaries.push_back(reps[level_start + (j * n + share - 1) / share]);
    level_start += n;
  }
  for (std::size_t c = 0; c < C; ++c) {
    QoECategory cat;
    cat.rank = static_cast<int>(c) + 1;
    cat.mos = 5.0 - 4.0 * static_cast<double>(c) / static_cast<double>(C - 1);
    cat.score_distribution = score_distribution_for(cat.mos);
    ds.categories.push_back(cat);
  }
  return ds;
}

Classification classify_detailed(const QoEMetrics& phi, const FeedbackDataset& ds) {
  if (ds.categories.empty()) throw ValidationError("dataset has no categories");
  const MetricGrid& g = ds.grid;
  Classification out;
  out.clamped = phi.stall_count < 0 || phi.stall_count > g.max_stalls ||
                outside(phi.rebuffer_ratio, 0.0, g.rebuffer_max) ||
                outside(phi.avg_quality, g.quality_min, g.quality_max) ||
                outside(phi.startup_ratio, 0.0, g.startup_max) ||
                outside(phi.switch_ratio, 0.0, 1.0);
  // Clamping each metric into the grid keeps the priority order intact.
  QoEMetrics x = phi;
  x.stall_count = std::clamp(x.stall_count, 0, g.max_stalls);
  x.rebuffer_ratio = std::clamp(x.rebuffer_ratio, 0.0, g.rebuffer_max);
  x.avg_quality = std::clamp(x.avg_quality, g.quality_min, g.quality_max);
  x.startup_ratio = std::clamp(x.startup_ratio, 0.0, g.startup_max);
  x.switch_ratio = std::clamp(x.switch_ratio, 0.0, 1.0);
  const auto it = std::upper_bound(ds.boundaries.begin(), ds.boundaries.end(), x, ranks_before);
  out.index = it == ds.boundaries.begin()
                  ? 0
                  : static_cast<std::size_t>(it - ds.boundaries.begin()) - 1;
  return out;
}

const QoECategory& classify(const QoEMetrics& phi, const FeedbackDataset& ds) {
  return ds.categories[classify_detailed(phi, ds).index];
}

int sample_score(const QoEMetrics& phi, const FeedbackDataset& ds, std::mt19937_64& rng) {
  const auto& p = classify(phi, ds).score_distribution;
  std::discrete_distribution<int> draw(p.begin(), p.end());
  return draw(rng) + 1;
}

WeightVector ideal_weights() {
  // Each weight dominates the full range of every lower-priority metric.
  return WeightVector{{1.0, -1e-3, -1e-5, -1e4, -1e2}};
}

nlohmann::ordered_json to_json(const FeedbackDataset& ds) {
  nlohmann::ordered_json j;
  j["seed"] = ds.seed;
  j["representatives"] = ds.representative_count;
  const auto& g = ds.grid;
  j["grid"] = {{"max_stalls", g.max_stalls},         {"rebuffer_points", g.rebuffer_points},
               {"quality_points", g.quality_points}, {"startup_points", g.startup_points},
               {"switch_points", g.switch_points},   {"rebuffer_max", g.rebuffer_max},
               {"quality_min", g.quality_min},       {"quality_max", g.quality_max},
               {"startup_max", g.startup_max}};
  auto cats = nlohmann::ordered_json::array();
  for (std::size_t c = 0; c < ds.categories.size(); ++c) {
    const auto& cat = ds.categories[c];
    nlohmann::ordered_json e;
    e["rank"] = cat.rank;
    e["mos"] = cat.mos;
    e["distribution"] = cat.score_distribution;
    e["first"] = to_json(ds.boundaries[c]);
    cats.push_back(std::move(e));
  }
  j["categories"] = std::move(cats);
  return j;
}

}  // namespace qoeloop
