#include "cli.h"

#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "qoeloop/errors.hpp"
#include "qoeloop/export.hpp"
#include "qoeloop/feedback.hpp"
#include "qoeloop/learner.hpp"
#include "qoeloop/loop.hpp"
#include "qoeloop/metrics.hpp"
#include "qoeloop/planner.hpp"
#include "qoeloop/playback.hpp"
#include "qoeloop/trace.hpp"

namespace qoeloop::cli {
namespace {

using Json = nlohmann::ordered_json;

constexpr const char* kSeedEnv = "QOELOOP_SEED";

std::uint64_t default_seed() {
  const char* env = std::getenv(kSeedEnv);
  if (env == nullptr || *env == '\0') return 1;
  std::uint64_t v = 0;
  const char* end = env + std::char_traits<char>::length(env);
  auto [ptr, ec] = std::from_chars(env, end, v);
  if (ec != std::errc{} || ptr != end)
    throw ValidationError(std::string(kSeedEnv) + " must be an unsigned integer");
  return v;
}

struct Output {
  std::string emit;
  std::string path;
};

struct TraceSource {
  std::string path;
  std::string format;  // empty: infer from the extension
  double slot_duration = 1.0;
  SyntheticTraceConfig gen;
};

struct Options {
  Output output;
  std::optional<std::uint64_t> seed;
  TraceSource trace;
  SessionConfig session;
  std::vector<double> weights;
  LearnerConfig learner;

  // simulate
  std::string plan;
  // plan
  std::string algo = "castle";
  std::uint64_t max_evaluations = SearchLimits{}.max_evaluations;
  // learn
  std::string batch_path;
  // dataset / loop / eval
  int categories = 10;
  // loop
  LoopConfig loop;
  std::size_t train_pool = 200;
  std::size_t eval_pool = 1000;
  std::string planner = "castle";
  std::string eval_mode = "deterministic";
  std::vector<double> init_weights;
};

// The options struct is shared between subcommands, so each one applies its
// own default format once it has been selected.
void add_output(CLI::App* cmd, Options& o, const std::string& default_emit) {
  cmd->add_option("--emit", o.output.emit, "Output format (default: " + default_emit + ")")
      ->check(CLI::IsMember({"json", "csv"}));
  cmd->preparse_callback([&o, default_emit](std::size_t) { o.output.emit = default_emit; });
  cmd->add_option("--out", o.output.path, "Write to this file instead of stdout");
}

void add_seed(CLI::App* cmd, Options& o) {
  cmd->add_option("--seed", o.seed,
                  std::string("Master seed (default: $") + kSeedEnv + " or 1)");
}

void add_generator(CLI::App* cmd, SyntheticTraceConfig& g) {
  cmd->add_option("--gen-mean", g.mean, "Synthetic throughput mean (Mb/s)")->capture_default_str();
  cmd->add_option("--gen-corr", g.correlation, "Slot-to-slot correlation")->capture_default_str();
  cmd->add_option("--gen-vol", g.volatility, "Throughput standard deviation (Mb/s)")
      ->capture_default_str();
  cmd->add_option("--gen-floor", g.floor, "Lowest generated throughput (Mb/s)")
      ->capture_default_str();
  cmd->add_option("--slots", g.num_slots, "Slots per generated trace")->capture_default_str();
  cmd->add_option("--slot-duration", g.slot_duration, "Slot length (s)")->capture_default_str();
}

void add_trace(CLI::App* cmd, Options& o) {
  cmd->add_option("--trace", o.trace.path, "Throughput trace file (default: generate one)");
  cmd->add_option("--format", o.trace.format, "Trace file format")
      ->check(CLI::IsMember({"csv", "json"}));
  add_generator(cmd, o.trace.gen);
}

void add_session(CLI::App* cmd, SessionConfig& s) {
  cmd->add_option("--segments", s.num_segments, "Segments per video")->capture_default_str();
  cmd->add_option("--frames-per-segment", s.frames_per_segment)->capture_default_str();
  cmd->add_option("--frame-rate", s.frame_rate)->capture_default_str();
  cmd->add_option("--prefetch", s.prefetch_segments, "Playback cache in segments")
      ->capture_default_str();
  cmd->add_option("--ladder", s.ladder, "Bitrate ladder (Mb/s), comma separated")
      ->delimiter(',')
      ->capture_default_str();
  cmd->add_option("--max-stalls", s.max_stalls, "Stall budget p")->capture_default_str();
}

void add_learner(CLI::App* cmd, LearnerConfig& l) {
  cmd->add_option("--epsilon", l.epsilon, "Target batch loss")->capture_default_str();
  cmd->add_option("--mu", l.mu, "Step-size bracket tolerance")->capture_default_str();
  cmd->add_option("--max-steps", l.max_steps, "Descent steps per round")->capture_default_str();
  cmd->add_option("--alpha-min", l.alpha_min)->capture_default_str();
  cmd->add_option("--alpha-max", l.alpha_max)->capture_default_str();
  cmd->add_option("--init-scale", l.init_scale)->capture_default_str();
  cmd->add_option("--max-rounds", l.max_rounds, "Bracket rounds")->capture_default_str();
  cmd->add_flag("--project-signs", l.project_signs, "Clamp learned weights to the sign orthant");
}

void add_weights(CLI::App* cmd, std::vector<double>& w, const char* name, const char* help) {
  cmd->add_option(name, w, help)->delimiter(',')->expected(5);
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

WeightVector weights_or(const std::vector<double>& v, const WeightVector& fallback) {
  if (v.empty()) return fallback;
  if (v.size() != 5) throw ValidationError("weights need exactly five values");
  WeightVector w;
  for (std::size_t i = 0; i < 5; ++i) w[i] = v[i];
  return w;
}

Json session_json(const SessionConfig& s) {
  return Json{{"segments", s.num_segments},
              {"frames_per_segment", s.frames_per_segment},
              {"frame_rate", s.frame_rate},
              {"prefetch_segments", s.prefetch_segments},
              {"ladder", s.ladder},
              {"max_stalls", s.max_stalls}};
}

Json generator_json(const SyntheticTraceConfig& g) {
  return Json{{"slots", g.num_slots},   {"mean", g.mean},   {"correlation", g.correlation},
              {"volatility", g.volatility}, {"floor", g.floor}, {"slot_duration", g.slot_duration},
              {"seed", g.seed}};
}

Json learner_json(const LearnerConfig& l) {
  return Json{{"epsilon", l.epsilon},     {"mu", l.mu},
              {"max_steps", l.max_steps}, {"alpha_min", l.alpha_min},
              {"alpha_max", l.alpha_max}, {"init_scale", l.init_scale},
              {"max_rounds", l.max_rounds}, {"seed", l.seed},
              {"project_signs", l.project_signs}};
}

std::vector<int> parse_levels(const std::string& text) {
  std::vector<int> levels;
  std::stringstream ss(text);
  std::string item;
  std::size_t record = 0;
  while (std::getline(ss, item, ',')) {
    ++record;
    int v = 0;
    const char* b = item.data();
    const char* e = b + item.size();
    auto [ptr, ec] = std::from_chars(b, e, v);
    if (ec != std::errc{} || ptr != e || item.empty())
      throw FormatError("plan entries must be integers", record);
    levels.push_back(v - 1);
  }
  return levels;
}

// Resolves --trace or the generator. The generator seed is the master seed.
ThroughputTrace resolve_trace(Options& o, std::uint64_t seed, Json& config) {
  if (!o.trace.path.empty()) {
    std::string fmt = o.trace.format;
    if (fmt.empty()) {
      const auto dot = o.trace.path.rfind('.');
      fmt = dot != std::string::npos && o.trace.path.substr(dot) == ".json" ? "json" : "csv";
    }
    config["trace"] = Json{{"file", o.trace.path}, {"format", fmt}};
    ThroughputTrace t = fmt == "json"
                            ? parse_trace_json(slurp(o.trace.path), o.trace.path)
                            : parse_trace_csv(slurp(o.trace.path), o.trace.gen.slot_duration,
                                              o.trace.path);
    config["trace"]["slot_duration"] = t.slot_duration;
    config["trace"]["slots"] = t.size();
    return t;
  }
  o.trace.gen.seed = seed;
  config["trace"] = Json{{"generated", generator_json(o.trace.gen)}};
  return generate_trace(o.trace.gen);
}

void write(const Output& o, const std::string& text, std::ostream& out) {
  if (o.path.empty()) {
    out << text;
    return;
  }
  std::ofstream f(o.path, std::ios::binary | std::ios::trunc);
  if (!f) throw ValidationError("cannot write " + o.path);
  f << text;
  if (!f) throw ValidationError("failed writing " + o.path);
}

std::string csv_header(const Json& config) { return "# config: " + config.dump() + '\n'; }

std::string json_doc(Json config, Json body) {
  Json doc;
  doc["config"] = std::move(config);
  for (auto& [k, v] : body.items()) doc[k] = v;
  return doc.dump(2) + '\n';
}

std::vector<ThroughputTrace> make_pool(std::size_t n, SyntheticTraceConfig g, std::uint64_t seed) {
  g.seed = seed;
  return generate_pool(n, g);
}

// ---------------------------------------------------------------------------

std::string cmd_trace(Options& o, std::uint64_t seed) {
  Json config{{"command", "trace"}, {"seed", seed}};
  const ThroughputTrace t = resolve_trace(o, seed, config);
  if (o.output.emit == "csv") return csv_header(config) + format_trace_csv(t);
  return json_doc(config, Json{{"slot_duration", t.slot_duration}, {"values", t.values}});
}

std::string cmd_simulate(Options& o, std::uint64_t seed) {
  Json config{{"command", "simulate"}, {"seed", seed}};
  o.session.validate();
  const ThroughputTrace t = resolve_trace(o, seed, config);
  const BitratePlan plan{parse_levels(o.plan)};
  config["session"] = session_json(o.session);
  config["plan"] = o.plan;
  const PlaybackTimeline tl = simulate(plan, t, o.session);
  if (o.output.emit == "csv") return csv_header(config) + timeline_csv(tl, t.slot_duration);
  Json body{{"timeline", to_json(tl, t.slot_duration)}};
  body["metrics"] = tl.complete() ? to_json(compute_metrics(tl, plan, o.session)) : Json(nullptr);
  return json_doc(config, body);
}

std::string cmd_plan(Options& o, std::uint64_t seed) {
  Json config{{"command", "plan"}, {"seed", seed}};
  o.session.validate();
  const PlannerKind kind = parse_planner(o.algo);
  const WeightVector w = weights_or(o.weights, ideal_weights());
  const ThroughputTrace t = resolve_trace(o, seed, config);
  config["session"] = session_json(o.session);
  config["algo"] = planner_name(kind);
  config["weights"] = to_json(w);
  config["max_evaluations"] = o.max_evaluations;
  const PlanResult r =
      run_planner(kind, t, o.session, w, o.session.max_stalls, SearchLimits{o.max_evaluations});
  if (o.output.emit == "csv") {
    std::string s = csv_header(config) + "segment,level,bitrate\n";
    for (std::size_t i = 0; i < r.plan.size(); ++i) {
      const int l = r.plan.levels[i];
      s += std::to_string(i + 1) + ',' + std::to_string(l + 1) + ',' +
           format_double(o.session.ladder[static_cast<std::size_t>(l)]) + '\n';
    }
    return s;
  }
  return json_doc(config, Json{{"result", to_json(r)}});
}

std::string cmd_learn(Options& o, std::uint64_t seed) {
  o.learner.seed = seed;
  Json config{{"command", "learn"}, {"seed", seed}, {"batch", o.batch_path}};
  config["learner"] = learner_json(o.learner);
  const auto batch = parse_batch_jsonl(slurp(o.batch_path));
  std::optional<WeightVector> init;
  if (!o.init_weights.empty()) {
    init = weights_or(o.init_weights, {});
    config["initial_weights"] = to_json(*init);
  }
  const TrainResult r = train(batch, o.learner, init);
  if (o.output.emit == "csv") {
    std::string s = csv_header(config) + "w1,w2,w3,w4,w5,converged,steps,rounds,loss\n";
    for (double x : r.weights.w) s += format_double(x) + ',';
    s += std::string(r.converged ? "true" : "false") + ',' + std::to_string(r.steps) + ',' +
         std::to_string(r.rounds) + ',' + format_double(r.final_loss) + '\n';
    return s;
  }
  Json body{{"weights", to_json(r.weights)},
            {"converged", r.converged},
            {"steps", r.steps},
            {"rounds", r.rounds},
            {"loss", r.final_loss},
            {"alpha_min", r.alpha_min},
            {"alpha_max", r.alpha_max},
            {"samples", batch.size()}};
  return json_doc(config, body);
}

std::string cmd_dataset(Options& o, std::uint64_t seed) {
  o.session.validate();
  Json config{{"command", "dataset"}, {"seed", seed}, {"categories", o.categories}};
  config["session"] = session_json(o.session);
  const FeedbackDataset ds = build_dataset(o.categories, o.session, seed);
  if (o.output.emit == "csv") {
    std::string s = csv_header(config) + "rank,mos,p1,p2,p3,p4,p5,phi1,phi2,phi3,phi4,phi5\n";
    for (std::size_t c = 0; c < ds.categories.size(); ++c) {
      const auto& cat = ds.categories[c];
      s += std::to_string(cat.rank) + ',' + format_double(cat.mos);
      for (double p : cat.score_distribution) s += ',' + format_double(p);
      for (double v : ds.boundaries[c].as_array()) s += ',' + format_double(v);
      s += '\n';
    }
    return s;
  }
  return json_doc(config, Json{{"dataset", to_json(ds)}});
}

MosMode parse_mode(const std::string& s) {
  return s == "sampled" ? MosMode::kSampled : MosMode::kDeterministic;
}

std::string cmd_loop(Options& o, std::uint64_t seed) {
  LoopConfig cfg = o.loop;
  cfg.session = o.session;
  cfg.session.validate();
  cfg.planner = parse_planner(o.planner);
  cfg.learner.seed = derive_seed(seed, 3);
  cfg.seed = derive_seed(seed, 4);
  cfg.eval_mode = parse_mode(o.eval_mode);
  if (!o.init_weights.empty()) cfg.initial_weights = weights_or(o.init_weights, {});
  cfg.train_pool = make_pool(o.train_pool, o.trace.gen, derive_seed(seed, 1));
  if (cfg.eval_every > 0) cfg.eval_pool = make_pool(o.eval_pool, o.trace.gen, derive_seed(seed, 2));

  const FeedbackDataset ds = build_dataset(o.categories, cfg.session, seed);

  Json config{{"command", "loop"}, {"seed", seed}};
  config["session"] = session_json(cfg.session);
  config["learner"] = learner_json(cfg.learner);
  config["m"] = cfg.minibatch_size;
  config["rounds"] = cfg.max_rounds;
  config["planner"] = planner_name(cfg.planner);
  config["msv_threshold"] = cfg.msv_threshold;
  config["stable_rounds"] = cfg.stable_rounds;
  config["categories"] = o.categories;
  config["train_pool"] = Json{{"size", o.train_pool}, {"generator", generator_json(o.trace.gen)}};
  config["train_pool"]["generator"]["seed"] = derive_seed(seed, 1);
  config["eval_every"] = cfg.eval_every;
  if (cfg.eval_every > 0) {
    config["eval_pool"] = Json{{"size", o.eval_pool}, {"seed", derive_seed(seed, 2)}};
    config["eval_mode"] = o.eval_mode;
  }
  config["loop_seed"] = cfg.seed;
  if (cfg.initial_weights) config["initial_weights"] = to_json(*cfg.initial_weights);

  const LoopTelemetry tel = run_closed_loop(cfg, ds);
  if (o.output.emit == "csv") return csv_header(config) + telemetry_csv(tel);
  return json_doc(config, Json{{"telemetry", to_json(tel)}});
}

std::string cmd_eval(Options& o, std::uint64_t seed) {
  o.session.validate();
  const WeightVector w = weights_or(o.weights, ideal_weights());
  const PlannerKind kind = parse_planner(o.planner);
  const MosMode mode = parse_mode(o.eval_mode);
  const auto pool = make_pool(o.eval_pool, o.trace.gen, derive_seed(seed, 2));
  const FeedbackDataset ds = build_dataset(o.categories, o.session, seed);

  Json config{{"command", "eval"}, {"seed", seed}};
  config["session"] = session_json(o.session);
  config["weights"] = to_json(w);
  config["planner"] = planner_name(kind);
  config["mode"] = o.eval_mode;
  config["categories"] = o.categories;
  config["pool"] = Json{{"size", o.eval_pool}, {"generator", generator_json(o.trace.gen)}};
  config["pool"]["generator"]["seed"] = derive_seed(seed, 2);

  const MosEvaluation r = evaluate_mos(w, pool, ds, o.session, kind, mode, derive_seed(seed, 5));
  if (o.output.emit == "csv")
    return csv_header(config) + "mos,evaluated,infeasible\n" + format_double(r.mos) + ',' +
           std::to_string(r.evaluated) + ',' + std::to_string(r.infeasible) + '\n';
  return json_doc(config,
                  Json{{"mos", r.mos}, {"evaluated", r.evaluated}, {"infeasible", r.infeasible}});
}

void report(std::ostream& err, const char* category, const std::string& message,
            std::optional<std::size_t> record = std::nullopt) {
  Json j{{"error", category}, {"message", message}};
  if (record) j["record"] = *record;
  err << j.dump() << '\n';
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bitrate planning and closed-loop QoE weight learning"};
  app.name("qoeloop");
  app.require_subcommand(1);
  Options o;

  auto* trace = app.add_subcommand("trace", "Generate or convert a throughput trace");
  add_trace(trace, o);
  add_seed(trace, o);
  add_output(trace, o, "csv");

  auto* sim = app.add_subcommand("simulate", "Replay a bitrate plan against a trace");
  add_trace(sim, o);
  add_session(sim, o.session);
  sim->add_option("--plan", o.plan, "Ladder levels per segment, 1-based, comma separated")
      ->required();
  add_seed(sim, o);
  add_output(sim, o, "json");

  auto* plan = app.add_subcommand("plan", "Compute a bitrate plan");
  add_trace(plan, o);
  add_session(plan, o.session);
  plan->add_option("--algo", o.algo, "Planner")
      ->check(CLI::IsMember({"optimal", "maestro", "castle", "brute"}))
      ->capture_default_str();
  add_weights(plan, o.weights, "--weights", "w1..w5 (default: dataset-aligned weights)");
  plan->add_option("--max-evaluations", o.max_evaluations, "Search cap for exhaustive planners")
      ->capture_default_str();
  add_seed(plan, o);
  add_output(plan, o, "json");

  auto* learn = app.add_subcommand("learn", "Fit QoE weights to a batch of scores");
  learn->add_option("--batch", o.batch_path, "JSON lines of phi1..phi5, score")->required();
  add_learner(learn, o.learner);
  add_weights(learn, o.init_weights, "--init-weights", "Starting weights w1..w5");
  add_seed(learn, o);
  add_output(learn, o, "json");

  auto* dataset = app.add_subcommand("dataset", "Build the synthetic feedback dataset");
  add_session(dataset, o.session);
  dataset->add_option("--categories", o.categories, "Number of QoE categories")
      ->capture_default_str();
  add_seed(dataset, o);
  add_output(dataset, o, "json");

  auto* loop = app.add_subcommand("loop", "Run the closed optimize/score/learn loop");
  add_session(loop, o.session);
  add_generator(loop, o.trace.gen);
  add_learner(loop, o.loop.learner);
  loop->add_option("--m", o.loop.minibatch_size, "Scores per round")->capture_default_str();
  loop->add_option("--rounds", o.loop.max_rounds, "Maximum rounds")->capture_default_str();
  loop->add_option("--planner", o.planner)
      ->check(CLI::IsMember({"optimal", "maestro", "castle", "brute"}))
      ->capture_default_str();
  loop->add_option("--train-pool", o.train_pool, "Training traces")->capture_default_str();
  loop->add_option("--eval-pool", o.eval_pool, "Evaluation traces")->capture_default_str();
  loop->add_option("--eval-every", o.loop.eval_every, "Rounds between pool MOS evaluations")
      ->capture_default_str();
  loop->add_option("--eval-mode", o.eval_mode)
      ->check(CLI::IsMember({"deterministic", "sampled"}))
      ->capture_default_str();
  loop->add_option("--msv-threshold", o.loop.msv_threshold)->capture_default_str();
  loop->add_option("--stable-rounds", o.loop.stable_rounds)->capture_default_str();
  loop->add_option("--categories", o.categories)->capture_default_str();
  add_weights(loop, o.init_weights, "--init-weights", "Starting weights w1..w5");
  add_seed(loop, o);
  add_output(loop, o, "csv");

  auto* eval = app.add_subcommand("eval", "Mean opinion score of a weight vector over a pool");
  add_session(eval, o.session);
  add_generator(eval, o.trace.gen);
  add_weights(eval, o.weights, "--weights", "w1..w5 (default: dataset-aligned weights)");
  eval->add_option("--pool", o.eval_pool, "Evaluation traces")->capture_default_str();
  eval->add_option("--planner", o.planner)
      ->check(CLI::IsMember({"optimal", "maestro", "castle", "brute"}))
      ->capture_default_str();
  eval->add_option("--mode", o.eval_mode)
      ->check(CLI::IsMember({"deterministic", "sampled"}))
      ->capture_default_str();
  eval->add_option("--categories", o.categories)->capture_default_str();
  add_seed(eval, o);
  add_output(eval, o, "json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      app.exit(e, out, err);
      return kOk;
    }
    report(err, "usage", e.what());
    return kUsage;
  }

  try {
    const std::uint64_t seed = o.seed ? *o.seed : default_seed();
    std::string text;
    if (trace->parsed()) text = cmd_trace(o, seed);
    else if (sim->parsed()) text = cmd_simulate(o, seed);
    else if (plan->parsed()) text = cmd_plan(o, seed);
    else if (learn->parsed()) text = cmd_learn(o, seed);
    else if (dataset->parsed()) text = cmd_dataset(o, seed);
    else if (loop->parsed()) text = cmd_loop(o, seed);
    else text = cmd_eval(o, seed);
    write(o.output, text, out);
    return kOk;
  } catch (const InfeasibleError& e) {
    report(err, "infeasible", e.what());
    return kInfeasible;
  } catch (const RefusalError& e) {
    report(err, "refused", e.what());
    return kRefused;
  } catch (const FormatError& e) {
    report(err, "format", e.what(), e.record());
    return kInvalidInput;
  } catch (const ValidationError& e) {
    report(err, "validation", e.what());
    return kInvalidInput;
  } catch (const Error& e) {
    report(err, "error", e.what());
    return kInvalidInput;
  } catch (const std::exception& e) {
    report(err, "internal", e.what());
    return kInternal;
  }
}

}  // namespace qoeloop::cli
