#include "qoeloop/playback.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "qoeloop/errors.hpp"

namespace qoeloop {
namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}  // namespace

void SessionConfig::validate() const {
  if (num_segments < 1) throw ValidationError("num_segments must be >= 1");
  if (frames_per_segment < 1) throw ValidationError("frames_per_segment must be >= 1");
  if (!(frame_rate > 0.0)) throw ValidationError("frame_rate must be > 0");
  if (ladder.empty()) throw ValidationError("bitrate ladder is empty");
  for (std::size_t i = 0; i < ladder.size(); ++i) {
    if (!(ladder[i] > 0.0) || !std::isfinite(ladder[i]))
      throw ValidationError("ladder bitrates must be finite and > 0");
    if (i > 0 && !(ladder[i] > ladder[i - 1]))
      throw ValidationError("ladder must be strictly increasing");
  }
  if (prefetch_segments < 1 || prefetch_segments >= num_segments)
    throw ValidationError("prefetch_segments must satisfy 1 <= x0 < num_segments");
  if (max_stalls < 0) throw ValidationError("max_stalls must be >= 0");
}

void BitratePlan::validate(const SessionConfig& cfg) const {
  if (levels.size() != static_cast<std::size_t>(cfg.num_segments))
    throw ValidationError("plan has " + std::to_string(levels.size()) + " segments, expected " +
                          std::to_string(cfg.num_segments));
  for (int l : levels)
    if (l < 0 || l >= cfg.levels()) throw ValidationError("plan level outside the ladder");
}

const char* phase_name(Phase phase) noexcept { return phase == Phase::kBaW ? "BaW" : "BaP"; }

double PlaybackTimeline::rebuffering_time() const noexcept {
  double total = 0.0;
  for (std::size_t i = 1; i < baw_durations.size(); ++i) total += baw_durations[i];
  return total;
}

PlaybackEngine::PlaybackEngine(const ThroughputTrace& trace, const SessionConfig& cfg,
                               double start_time, bool record)
    : trace_(&trace),
      slot_duration_(trace.slot_duration),
      segment_duration_(cfg.segment_duration()),
      prefetch_(cfg.prefetch_seconds()),
      time_(start_time),
      slot_(static_cast<std::size_t>(std::floor(start_time / trace.slot_duration))),
      phase_start_(start_time),
      record_(record) {}

void PlaybackEngine::start_playback() {
  const double waited = time_ - phase_start_;
  if (bap_count_ == 0)
    startup_ = waited;
  else
    rebuffering_ += waited;
  ++bap_count_;
  phase_ = Phase::kBaP;
  phase_start_ = time_;
  if (record_) {
    baw_durations_.push_back(waited);
    bap_starts_.push_back(time_);
  }
}

void PlaybackEngine::stall() {
  buffer_ = 0.0;
  ++stalls_;
  phase_ = Phase::kBaW;
  phase_start_ = time_;
  if (record_) {
    stall_times_.push_back(time_);
    stall_segments_.push_back(segments_done_);
  }
}

void PlaybackEngine::record_slot_end() {
  if (!record_) return;
  buffer_samples_.push_back(buffer_);
  phase_samples_.push_back(phase_);
}

bool PlaybackEngine::download_segment(double bitrate) {
  if (exhausted_) return false;
  double remaining = segment_duration_ * bitrate;  // megabits left in this segment
  const auto& values = trace_->values;

  while (true) {
    if (slot_ >= values.size()) {
      exhausted_ = true;
      return false;
    }
    const double rate = values[slot_];
    const double fill = rate / bitrate;  // seconds of content per second
    const double slot_end = static_cast<double>(slot_ + 1) * slot_duration_;

    const double to_slot_end = slot_end - time_;
    const double to_done = rate > 0.0 ? remaining / rate : kInf;
    double to_threshold = kInf;
    double to_empty = kInf;
    if (phase_ == Phase::kBaW) {
      if (fill > 0.0) to_threshold = std::max(0.0, (prefetch_ - buffer_) / fill);
    } else if (fill < 1.0) {
      to_empty = buffer_ / (1.0 - fill);
    }
    const double step = std::min({to_slot_end, to_done, to_threshold, to_empty});

    const double gained = fill * step;
    appended_ += gained;
    buffer_ += gained;
    if (phase_ == Phase::kBaP) buffer_ = std::max(0.0, buffer_ - step);
    remaining -= rate * step;
    time_ += step;

    const bool done = step == to_done;
    if (phase_ == Phase::kBaW && step == to_threshold) {
      start_playback();
    } else if (phase_ == Phase::kBaP && step == to_empty && !done) {
      // An empty buffer coinciding with a segment boundary is resolved at
      // the start of the next segment, where its fill rate decides.
      stall();
    }
    if (step == to_slot_end) {
      time_ = slot_end;
      ++slot_;
      record_slot_end();
    }
    if (done) {
      ++segments_done_;
      if (record_) finish_times_.push_back(time_);
      return true;
    }
  }
}

void PlaybackEngine::finish() {
  if (finished_) return;
  finished_ = true;
  if (phase_ == Phase::kBaW) start_playback();
  playback_end_ = time_ + buffer_;
  if (!record_) return;
  for (std::size_t s = slot_; s < trace_->values.size(); ++s) {
    const double end = static_cast<double>(s + 1) * slot_duration_;
    buffer_samples_.push_back(std::max(0.0, playback_end_ - end));
    phase_samples_.push_back(Phase::kBaP);
    if (end >= playback_end_) break;
  }
}

void PlaybackEngine::export_timeline(PlaybackTimeline& out) const {
  out.buffer_level = buffer_samples_;
  out.phase = phase_samples_;
  out.bap_start_times = bap_starts_;
  out.baw_durations = baw_durations_;
  out.stall_times = stall_times_;
  out.stall_segments = stall_segments_;
  out.stall_count = stalls_;
  out.segment_finish_times = finish_times_;
  out.appended_content = appended_;
}

PlaybackTimeline simulate(const BitratePlan& plan, const ThroughputTrace& trace,
                          const SessionConfig& cfg) {
  cfg.validate();
  trace.validate();
  plan.validate(cfg);

  PlaybackEngine engine(trace, cfg, 0.0, true);
  for (int level : plan.levels) {
    if (!engine.download_segment(cfg.ladder[static_cast<std::size_t>(level)])) break;
  }
  const bool complete = engine.segments_done() == cfg.num_segments;
  if (complete) engine.finish();

  PlaybackTimeline timeline;
  timeline.num_segments = cfg.num_segments;
  engine.export_timeline(timeline);
  timeline.segments_remaining = cfg.num_segments - engine.segments_done();
  if (complete) {
    const double t = engine.time();
    timeline.download_complete_time = t;
    const double slots = std::ceil(t / trace.slot_duration);
    timeline.download_complete_slot = slots > 0.0 ? static_cast<std::size_t>(slots) - 1 : 0;
    timeline.playback_end_time = engine.playback_end();
  }
  return timeline;
}

FeasibilityReport check_feasibility(const BitratePlan& plan, const ThroughputTrace& trace,
                                    const SessionConfig& cfg, int max_stalls) {
  const PlaybackTimeline t = simulate(plan, trace, cfg);
  FeasibilityReport r;
  r.stalls = t.stall_count;
  r.incomplete = !t.complete();
  r.feasible = !r.incomplete && r.stalls <= max_stalls;
  return r;
}

}  // namespace qoeloop
