#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "qoeloop/errors.hpp"
#include "qoeloop/feedback.hpp"
#include "qoeloop/learner.hpp"
#include "qoeloop/loop.hpp"
#include "qoeloop/metrics.hpp"
#include "qoeloop/planner.hpp"
#include "qoeloop/playback.hpp"
#include "qoeloop/trace.hpp"

namespace py = pybind11;
using namespace qoeloop;

namespace {

WeightVector to_weights(const std::array<double, 5>& w) { return WeightVector{w}; }

py::dict metrics_dict(const QoEMetrics& m) {
  py::dict d;
  d["avg_quality"] = m.avg_quality;
  d["startup_ratio"] = m.startup_ratio;
  d["switch_ratio"] = m.switch_ratio;
  d["stall_count"] = m.stall_count;
  d["rebuffer_ratio"] = m.rebuffer_ratio;
  return d;
}

QoEMetrics metrics_from(const std::array<double, 5>& phi) { return QoEMetrics::from_array(phi); }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Bitrate planning, playback simulation and QoE weight learning";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ValidationError>(m, "ValidationError", base.ptr());
  py::register_exception<FormatError>(m, "FormatError", base.ptr());
  py::register_exception<InfeasibleError>(m, "InfeasibleError", base.ptr());
  py::register_exception<RefusalError>(m, "RefusalError", base.ptr());

  py::class_<ThroughputTrace>(m, "ThroughputTrace")
      .def(py::init([](std::vector<double> values, double slot_duration, std::string id) {
             ThroughputTrace t{std::move(id), slot_duration, std::move(values)};
             t.validate();
             return t;
           }),
           py::arg("values"), py::arg("slot_duration") = 1.0, py::arg("id") = "")
      .def_readonly("id", &ThroughputTrace::id)
      .def_readonly("slot_duration", &ThroughputTrace::slot_duration)
      .def_readonly("values", &ThroughputTrace::values)
      .def("__len__", &ThroughputTrace::size)
      .def("horizon", &ThroughputTrace::horizon);

  m.def(
      "generate_trace",
      [](std::size_t slots, double mean, double correlation, double volatility, double floor,
         std::uint64_t seed) {
        SyntheticTraceConfig c;
        c.num_slots = slots;
        c.mean = mean;
        c.correlation = correlation;
        c.volatility = volatility;
        c.floor = floor;
        c.seed = seed;
        return generate_trace(c);
      },
      py::arg("slots") = 70, py::arg("mean") = 4.0, py::arg("correlation") = 0.8,
      py::arg("volatility") = 1.5, py::arg("floor") = 0.1, py::arg("seed") = 1);
  m.def("parse_trace_csv", &parse_trace_csv, py::arg("text"), py::arg("slot_duration") = 1.0,
        py::arg("id") = "");
  m.def("format_trace_csv", &format_trace_csv);

  py::class_<SessionConfig>(m, "SessionConfig")
      .def(py::init<>())
      .def_readwrite("num_segments", &SessionConfig::num_segments)
      .def_readwrite("frames_per_segment", &SessionConfig::frames_per_segment)
      .def_readwrite("frame_rate", &SessionConfig::frame_rate)
      .def_readwrite("prefetch_segments", &SessionConfig::prefetch_segments)
      .def_readwrite("ladder", &SessionConfig::ladder)
      .def_readwrite("max_stalls", &SessionConfig::max_stalls)
      .def("segment_duration", &SessionConfig::segment_duration)
      .def("validate", &SessionConfig::validate);

  // Levels are 0-based here, as in the C++ API.
  m.def(
      "simulate",
      [](const std::vector<int>& levels, const ThroughputTrace& trace, const SessionConfig& cfg) {
        const BitratePlan plan{levels};
        const PlaybackTimeline t = simulate(plan, trace, cfg);
        py::dict d;
        d["complete"] = t.complete();
        d["startup_delay"] = t.startup_delay();
        d["rebuffering_time"] = t.rebuffering_time();
        d["stall_count"] = t.stall_count;
        d["stall_segments"] = t.stall_segments;
        d["appended_content"] = t.appended_content;
        d["buffer_level"] = t.buffer_level;
        d["segment_finish_times"] = t.segment_finish_times;
        d["metrics"] = t.complete() ? py::object(metrics_dict(compute_metrics(t, plan, cfg)))
                                    : py::object(py::none());
        return d;
      },
      py::arg("levels"), py::arg("trace"), py::arg("cfg"));

  m.def(
      "qoe_score",
      [](const std::array<double, 5>& phi, const std::array<double, 5>& w) {
        return qoe_score(metrics_from(phi), to_weights(w));
      },
      py::arg("phi"), py::arg("weights"));

  m.def(
      "plan",
      [](const std::string& algo, const ThroughputTrace& trace, const SessionConfig& cfg,
         const std::array<double, 5>& w, std::optional<int> max_stalls,
         std::uint64_t max_evaluations) {
        const PlanResult r = run_planner(parse_planner(algo), trace, cfg, to_weights(w),
                                         max_stalls.value_or(cfg.max_stalls),
                                         SearchLimits{max_evaluations});
        py::dict d;
        d["levels"] = r.plan.levels;
        d["qoe"] = r.qoe;
        d["metrics"] = metrics_dict(r.metrics);
        d["stall_positions"] = r.stall_positions;
        return d;
      },
      py::arg("algo"), py::arg("trace"), py::arg("cfg"), py::arg("weights"),
      py::arg("max_stalls") = py::none(),
      py::arg("max_evaluations") = SearchLimits{}.max_evaluations);

  py::class_<LearnerConfig>(m, "LearnerConfig")
      .def(py::init<>())
      .def_readwrite("epsilon", &LearnerConfig::epsilon)
      .def_readwrite("mu", &LearnerConfig::mu)
      .def_readwrite("max_steps", &LearnerConfig::max_steps)
      .def_readwrite("alpha_min", &LearnerConfig::alpha_min)
      .def_readwrite("alpha_max", &LearnerConfig::alpha_max)
      .def_readwrite("init_scale", &LearnerConfig::init_scale)
      .def_readwrite("max_rounds", &LearnerConfig::max_rounds)
      .def_readwrite("seed", &LearnerConfig::seed)
      .def_readwrite("project_signs", &LearnerConfig::project_signs);

  m.def(
      "train",
      [](const std::vector<std::array<double, 5>>& phis, const std::vector<double>& scores,
         const LearnerConfig& cfg, std::optional<std::array<double, 5>> initial) {
        if (phis.size() != scores.size())
          throw ValidationError("phis and scores differ in length");
        std::vector<TrainingSample> batch;
        for (std::size_t i = 0; i < phis.size(); ++i) batch.emplace_back(phis[i], scores[i]);
        std::optional<WeightVector> init;
        if (initial) init = to_weights(*initial);
        const TrainResult r = train(batch, cfg, init);
        py::dict d;
        d["weights"] = r.weights.w;
        d["converged"] = r.converged;
        d["steps"] = r.steps;
        d["rounds"] = r.rounds;
        d["loss"] = r.final_loss;
        return d;
      },
      py::arg("phis"), py::arg("scores"), py::arg("cfg") = LearnerConfig{},
      py::arg("initial") = py::none());

  py::class_<FeedbackDataset>(m, "FeedbackDataset")
      .def_property_readonly("mos", [](const FeedbackDataset& ds) {
        std::vector<double> v;
        for (const auto& c : ds.categories) v.push_back(c.mos);
        return v;
      })
      .def_readonly("representative_count", &FeedbackDataset::representative_count);

  m.def(
      "build_dataset",
      [](int categories, const SessionConfig& cfg, std::uint64_t seed) {
        return build_dataset(categories, cfg, seed);
      },
      py::arg("categories") = 10, py::arg("cfg") = SessionConfig{}, py::arg("seed") = 1);
  m.def(
      "classify",
      [](const std::array<double, 5>& phi, const FeedbackDataset& ds) {
        const auto& c = classify(metrics_from(phi), ds);
        return py::make_tuple(c.rank, c.mos);
      },
      py::arg("phi"), py::arg("dataset"));
  m.def("ideal_weights", [] { return ideal_weights().w; });

  m.def(
      "mean_square_variation",
      [](const std::array<double, 5>& a, const std::array<double, 5>& b) {
        return mean_square_variation(to_weights(a), to_weights(b));
      },
      py::arg("a"), py::arg("b"));

  m.def(
      "run_loop",
      [](int m_size, int max_rounds, const std::vector<ThroughputTrace>& pool,
         const FeedbackDataset& ds, const SessionConfig& session, const LearnerConfig& learner,
         const std::string& planner, std::uint64_t seed) {
        LoopConfig cfg;
        cfg.session = session;
        cfg.minibatch_size = m_size;
        cfg.max_rounds = max_rounds;
        cfg.learner = learner;
        cfg.planner = parse_planner(planner);
        cfg.train_pool = pool;
        cfg.seed = seed;
        LoopTelemetry t;
        {
          py::gil_scoped_release release;
          t = run_closed_loop(cfg, ds);
        }
        py::dict d;
        d["converged"] = t.converged;
        d["msv"] = t.msv_series();
        d["mos"] = t.mos_series();
        std::vector<std::array<double, 5>> hist;
        for (const auto& w : t.w_history()) hist.push_back(w.w);
        d["weights"] = hist;
        return d;
      },
      py::arg("m"), py::arg("max_rounds"), py::arg("pool"), py::arg("dataset"),
      py::arg("session") = SessionConfig{}, py::arg("learner") = online_learner_config(),
      py::arg("planner") = "castle", py::arg("seed") = 1);
  m.def("online_learner_config", &online_learner_config);

  m.def(
      "evaluate_mos",
      [](const std::array<double, 5>& w, const std::vector<ThroughputTrace>& pool,
         const FeedbackDataset& ds, const SessionConfig& session, const std::string& planner,
         bool deterministic, std::uint64_t seed) {
        MosEvaluation r;
        {
          py::gil_scoped_release release;
          r = evaluate_mos(to_weights(w), pool, ds, session, parse_planner(planner),
                           deterministic ? MosMode::kDeterministic : MosMode::kSampled, seed);
        }
        return py::make_tuple(r.mos, r.evaluated, r.infeasible);
      },
      py::arg("weights"), py::arg("pool"), py::arg("dataset"),
      py::arg("session") = SessionConfig{}, py::arg("planner") = "castle",
      py::arg("deterministic") = true, py::arg("seed") = 1);
}
