#include "qoeloop/loop.hpp"

#include <random>

#include "qoeloop/errors.hpp"

namespace qoeloop {

LearnerConfig online_learner_config() {
  LearnerConfig c;
  c.max_steps = 100;
  c.max_rounds = 1;
  c.alpha_max = 0.04;
  return c;
}

void LoopConfig::validate() const {
  session.validate();
  learner.validate();
  if (minibatch_size < 1) throw ValidationError("minibatch size must be >= 1");
  if (max_rounds < 1) throw ValidationError("max_rounds must be >= 1");
  if (stable_rounds < 1) throw ValidationError("stable_rounds must be >= 1");
  if (train_pool.empty()) throw ValidationError("training trace pool is empty");
  if (eval_every > 0 && eval_pool.empty()) throw ValidationError("evaluation pool is empty");
}

std::vector<WeightVector> LoopTelemetry::w_history() const {
  std::vector<WeightVector> h;
  h.reserve(rounds.size() + 1);
  h.push_back(initial);
  for (const auto& r : rounds) h.push_back(r.weights);
  return h;
}

std::vector<double> LoopTelemetry::msv_series() const {
  std::vector<double> v;
  for (const auto& r : rounds) v.push_back(r.msv);
  return v;
}

std::vector<double> LoopTelemetry::mos_series() const {
  std::vector<double> v;
  for (const auto& r : rounds) v.push_back(r.batch_mos);
  return v;
}

double mean_square_variation(const WeightVector& a, const WeightVector& b) noexcept {
  double s = 0.0;
  for (std::size_t k = 0; k < 5; ++k) {
    const double d = a[k] - b[k];
    s += d * d;
  }
  return s / 5.0;
}

LoopTelemetry run_closed_loop(const LoopConfig& cfg, const FeedbackDataset& ds) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);

  LoopTelemetry telemetry;
  WeightVector w = cfg.initial_weights ? *cfg.initial_weights : initial_weights(cfg.learner);
  telemetry.initial = w;

  const int max_attempts = 100 * cfg.minibatch_size + 100;
  int stable = 0;
  for (int round = 1; round <= cfg.max_rounds; ++round) {
    RoundRecord rec;
    rec.round = round;
    int attempts = 0;
    while (static_cast<int>(rec.batch.size()) < cfg.minibatch_size) {
      if (++attempts > max_attempts)
        throw InfeasibleError("training pool yields no feasible sessions under current weights");
      const ThroughputTrace& trace = sample_pool(cfg.train_pool, rng);
      PlanResult planned;
      try {
        planned = run_planner(cfg.planner, trace, cfg.session, w, cfg.session.max_stalls);
      } catch (const InfeasibleError&) {
        ++rec.skipped;
        continue;
      }
      const int score = sample_score(planned.metrics, ds, rng);
      rec.batch.emplace_back(planned.metrics, static_cast<double>(score));
    }

    double total = 0.0;
    for (const auto& s : rec.batch) total += s.score;
    rec.batch_mos = total / static_cast<double>(rec.batch.size());

    const TrainResult trained = train(rec.batch, cfg.learner, w);
    rec.msv = mean_square_variation(trained.weights, w);
    rec.train_converged = trained.converged;
    rec.train_loss = trained.final_loss;
    w = trained.weights;
    rec.weights = w;
    if (cfg.eval_every > 0 && round % cfg.eval_every == 0)
      rec.eval_mos = evaluate_mos(w, cfg.eval_pool, ds, cfg.session, cfg.planner, cfg.eval_mode,
                                  cfg.seed)
                         .mos;

    telemetry.skipped_total += rec.skipped;
    telemetry.rounds.push_back(std::move(rec));

    // A round whose only training pass was rolled back did not learn anything,
    // so its zero variation does not count as settling.
    const bool learned = trained.converged || trained.steps > 0;
    stable = learned && telemetry.rounds.back().msv <= cfg.msv_threshold ? stable + 1 : 0;
    if (stable >= cfg.stable_rounds) {
      telemetry.converged = true;
      break;
    }
  }
  return telemetry;
}

MosEvaluation evaluate_mos(const WeightVector& w, std::span<const ThroughputTrace> pool,
                           const FeedbackDataset& ds, const SessionConfig& session,
                           PlannerKind planner, MosMode mode, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  MosEvaluation out;
  double total = 0.0;
  for (const auto& trace : pool) {
    PlanResult planned;
    try {
      planned = run_planner(planner, trace, session, w, session.max_stalls);
    } catch (const InfeasibleError&) {
      ++out.infeasible;
      continue;
    }
    total += mode == MosMode::kDeterministic ? classify(planned.metrics, ds).mos
                                             : sample_score(planned.metrics, ds, rng);
    ++out.evaluated;
  }
  out.mos = out.evaluated > 0 ? total / static_cast<double>(out.evaluated) : 0.0;
  return out;
}

std::string telemetry_csv(const LoopTelemetry& t) {
  bool has_eval = false;
  for (const auto& r : t.rounds) has_eval = has_eval || r.eval_mos.has_value();

  std::string out = "round,msv,mos,w1,w2,w3,w4,w5";
  if (has_eval) out += ",eval_mos";
  out += '\n';
  auto row = [&](int round, double msv, double mos, const WeightVector& w,
                 std::optional<double> eval) {
    out += std::to_string(round) + ',' + format_double(msv) + ',' + format_double(mos);
    for (double x : w.w) out += ',' + format_double(x);
    if (has_eval) out += ',' + (eval ? format_double(*eval) : std::string());
    out += '\n';
  };
  for (const auto& r : t.rounds) row(r.round, r.msv, r.batch_mos, r.weights, r.eval_mos);
  return out;
}

nlohmann::ordered_json to_json(const LoopTelemetry& t) {
  nlohmann::ordered_json j;
  j["initial_weights"] = to_json(t.initial);
  j["converged"] = t.converged;
  j["skipped_total"] = t.skipped_total;
  auto rounds = nlohmann::ordered_json::array();
  for (const auto& r : t.rounds) {
    nlohmann::ordered_json e;
    e["round"] = r.round;
    e["msv"] = r.msv;
    e["mos"] = r.batch_mos;
    e["weights"] = to_json(r.weights);
    e["skipped"] = r.skipped;
    e["train_converged"] = r.train_converged;
    e["train_loss"] = r.train_loss;
    if (r.eval_mos) e["eval_mos"] = *r.eval_mos;
    auto batch = nlohmann::ordered_json::array();
    for (const auto& s : r.batch)
      batch.push_back({{"phi1", s.phi[0]}, {"phi2", s.phi[1]}, {"phi3", s.phi[2]},
                       {"phi4", s.phi[3]}, {"phi5", s.phi[4]}, {"score", s.score}});
    e["batch"] = std::move(batch);
    rounds.push_back(std::move(e));
  }
  j["rounds"] = std::move(rounds);
  return j;
}

}  // namespace qoeloop
