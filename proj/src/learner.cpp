#include "qoeloop/learner.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include <json.hpp>

#include "qoeloop/errors.hpp"

namespace qoeloop {
namespace {

bool all_finite(const WeightVector& w) {
  return std::all_of(w.w.begin(), w.w.end(), [](double x) { return std::isfinite(x); });
}

double midpoint(double lo, double hi) { return lo + 0.5 * (hi - lo); }

}  // namespace

void LearnerConfig::validate() const {
  if (!(epsilon > 0.0)) throw ValidationError("epsilon must be > 0");
  if (!(mu > 0.0)) throw ValidationError("mu must be > 0");
  if (max_steps < 1) throw ValidationError("max_steps must be >= 1");
  if (!(alpha_min > 0.0 && alpha_min < alpha_max))
    throw ValidationError("step-size bracket must satisfy 0 < alpha_min < alpha_max");
  if (!(init_scale >= 0.0)) throw ValidationError("init_scale must be >= 0");
  if (max_rounds < 1) throw ValidationError("max_rounds must be >= 1");
}

double predict(const WeightVector& w, const Vec5& phi) noexcept {
  double h = 0.0;
  for (std::size_t i = 0; i < 5; ++i) h += w[i] * phi[i];
  return h;
}

double sample_loss(const WeightVector& w, const TrainingSample& sample) noexcept {
  const double e = predict(w, sample.phi) - sample.score;
  return 0.5 * e * e;
}

double batch_loss(const WeightVector& w, std::span<const TrainingSample> batch) noexcept {
  if (batch.empty()) return 0.0;
  double total = 0.0;
  for (const auto& s : batch) total += sample_loss(w, s);
  return total / static_cast<double>(batch.size());
}

Vec5 gradient(const WeightVector& w, std::span<const TrainingSample> batch) noexcept {
  Vec5 g{};
  if (batch.empty()) return g;
  for (const auto& s : batch) {
    const double e = predict(w, s.phi) - s.score;
    for (std::size_t k = 0; k < 5; ++k) g[k] += s.phi[k] * e;
  }
  const double m = static_cast<double>(batch.size());
  for (double& x : g) x /= m;
  return g;
}

WeightVector initial_weights(const LearnerConfig& cfg) {
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> u(-cfg.init_scale, cfg.init_scale);
  WeightVector w;
  for (double& x : w.w) x = cfg.init_scale > 0.0 ? u(rng) : 0.0;
  return w;
}

WeightVector project_signs(const WeightVector& w) noexcept {
  WeightVector p = w;
  p[0] = std::max(p[0], 0.0);
  for (std::size_t k = 1; k < 5; ++k) p[k] = std::min(p[k], 0.0);
  return p;
}

TrainResult train(std::span<const TrainingSample> batch, const LearnerConfig& cfg,
                  std::optional<WeightVector> initial) {
  cfg.validate();
  if (batch.empty()) throw ValidationError("training batch is empty");

  WeightVector w = initial ? *initial : initial_weights(cfg);
  if (!all_finite(w)) throw ValidationError("initial weights must be finite");

  double lo = cfg.alpha_min;
  double hi = cfg.alpha_max;
  double alpha = midpoint(lo, hi);
  double loss = batch_loss(w, batch);

  TrainResult result;
  while (true) {
    ++result.rounds;
    const WeightVector round_start = w;
    const double round_start_loss = loss;
    int round_steps = 0;
    bool overflow = false;

    while (loss > cfg.epsilon && round_steps < cfg.max_steps) {
      const Vec5 g = gradient(w, batch);
      for (std::size_t k = 0; k < 5; ++k) w[k] -= alpha * g[k];
      ++round_steps;
      loss = batch_loss(w, batch);
      if (!std::isfinite(loss) || !all_finite(w)) {
        overflow = true;
        break;
      }
    }

    if (!overflow && loss <= cfg.epsilon) {
      result.converged = true;
      result.steps += round_steps;
      break;
    }
    if (!overflow && loss < round_start_loss) {
      // Slow convergence: keep the progress, push the lower bound up.
      result.steps += round_steps;
      lo = std::min(lo * 2.0, hi * (1.0 - cfg.mu));
    } else {
      // Divergence: discard the round, pull the upper bound down.
      w = round_start;
      loss = round_start_loss;
      hi = std::max(hi / 2.0, lo * (1.0 + cfg.mu));
    }
    alpha = midpoint(lo, hi);
    if (hi - lo <= cfg.mu || result.rounds >= cfg.max_rounds) break;
  }

  if (cfg.project_signs && project_signs(w) != w) {
    w = project_signs(w);
    loss = batch_loss(w, batch);
    result.converged = loss <= cfg.epsilon;
  }
  result.weights = w;
  result.final_loss = loss;
  result.alpha_min = lo;
  result.alpha_max = hi;
  return result;
}

std::vector<TrainingSample> parse_batch_jsonl(std::string_view text) {
  std::vector<TrainingSample> batch;
  std::size_t record = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    ++record;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw FormatError(std::string("invalid JSON: ") + e.what(), record);
    }
    if (!j.is_object() || !j.contains("score") || !j["score"].is_number())
      throw FormatError("sample needs a numeric 'score'", record);
    Vec5 phi{};
    static constexpr const char* kKeys[] = {"phi1", "phi2", "phi3", "phi4", "phi5"};
    for (std::size_t i = 0; i < 5; ++i) {
      if (!j.contains(kKeys[i]) || !j[kKeys[i]].is_number())
        throw FormatError(std::string("sample needs a numeric '") + kKeys[i] + "'", record);
      phi[i] = j[kKeys[i]].get<double>();
    }
    batch.emplace_back(phi, j["score"].get<double>());
  }
  return batch;
}

}  // namespace qoeloop
