#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "qoeloop/trace.hpp"

namespace qoeloop {

/// Video and player parameters. Defaults reproduce the reference setting:
/// 30 one-second segments at 30 fps, a 5 s playback cache, a five-rung
/// ladder and at most one stall.
struct SessionConfig {
  int num_segments = 30;
  int frames_per_segment = 30;
  double frame_rate = 30.0;
  int prefetch_segments = 5;
  std::vector<double> ladder{0.4, 0.75, 1.0, 2.5, 4.5};  // Mb/s, strictly increasing
  int max_stalls = 1;

  double segment_duration() const noexcept { return frames_per_segment / frame_rate; }
  double video_length() const noexcept { return num_segments * segment_duration(); }
  double prefetch_seconds() const noexcept { return prefetch_segments * segment_duration(); }
  int levels() const noexcept { return static_cast<int>(ladder.size()); }

  void validate() const;
};

/// Ladder index per segment, 0-based (external files use 1-based indices).
struct BitratePlan {
  std::vector<int> levels;

  std::size_t size() const noexcept { return levels.size(); }
  void validate(const SessionConfig& cfg) const;
  bool operator==(const BitratePlan&) const = default;
  auto operator<=>(const BitratePlan&) const = default;
};

enum class Phase : std::uint8_t {
  kBaW,  // buffering, not playing (startup or rebuffering)
  kBaP,  // buffering and playing
};

const char* phase_name(Phase phase) noexcept;

/// Result of replaying a plan against a trace.
///
/// Times are absolute seconds from the start of the trace. Per-slot samples
/// are taken at slot ends and stop once playback has finished or the trace
/// runs out.
struct PlaybackTimeline {
  int num_segments = 0;
  std::vector<double> buffer_level;  // seconds of content, per slot end
  std::vector<Phase> phase;          // per slot end

  std::vector<double> bap_start_times;
  std::vector<double> baw_durations;  // [0] is the startup delay
  std::vector<double> stall_times;
  std::vector<int> stall_segments;  // segment downloading when the buffer emptied
  int stall_count = 0;

  std::vector<double> segment_finish_times;
  std::optional<std::size_t> download_complete_slot;
  std::optional<double> download_complete_time;
  std::optional<double> playback_end_time;
  int segments_remaining = 0;

  double appended_content = 0.0;  // seconds of content pushed into the buffer

  bool complete() const noexcept { return segments_remaining == 0; }
  double startup_delay() const noexcept { return baw_durations.empty() ? 0.0 : baw_durations[0]; }
  double rebuffering_time() const noexcept;
};

/// Fluid-download playback engine for one BaW-BaP sequence.
///
/// Segments are fetched strictly in order; while segment j downloads, content
/// enters the buffer at r(t)/b_j seconds per second. Playback drains one
/// second per second during BaP. Playback starts (or resumes after a stall)
/// once prefetch_seconds() of content are buffered, or when the last segment
/// arrives. Event times are exact within a slot.
///
/// The engine is a small value type: copying it snapshots the simulation, so
/// search code can branch on the next segment's bitrate without replaying
/// the prefix.
class PlaybackEngine {
 public:
  PlaybackEngine(const ThroughputTrace& trace, const SessionConfig& cfg, double start_time = 0.0,
                 bool record = false);

  /// Fetches the next segment at `bitrate`. Returns false if the trace ends
  /// before the segment is complete; the engine is then exhausted.
  bool download_segment(double bitrate);

  /// Marks the download finished: forces playback to start if still waiting
  /// and computes the playback end time.
  void finish();

  double time() const noexcept { return time_; }
  double buffer() const noexcept { return buffer_; }
  Phase phase() const noexcept { return phase_; }
  int stalls() const noexcept { return stalls_; }
  int segments_done() const noexcept { return segments_done_; }
  bool exhausted() const noexcept { return exhausted_; }
  double startup_delay() const noexcept { return startup_; }
  double rebuffering_time() const noexcept { return rebuffering_; }
  double appended() const noexcept { return appended_; }
  double playback_end() const noexcept { return playback_end_; }

  /// Moves recorded detail into `out`. Requires record = true.
  void export_timeline(PlaybackTimeline& out) const;

 private:
  void start_playback();
  void stall();
  void record_slot_end();

  const ThroughputTrace* trace_;
  double slot_duration_;
  double segment_duration_;
  double prefetch_;

  double time_;
  std::size_t slot_;
  double buffer_ = 0.0;
  Phase phase_ = Phase::kBaW;
  double phase_start_;
  int stalls_ = 0;
  int bap_count_ = 0;
  int segments_done_ = 0;
  bool exhausted_ = false;
  bool finished_ = false;
  double startup_ = 0.0;
  double rebuffering_ = 0.0;
  double appended_ = 0.0;
  double playback_end_ = 0.0;

  bool record_;
  std::vector<double> buffer_samples_;
  std::vector<Phase> phase_samples_;
  std::vector<double> bap_starts_;
  std::vector<double> baw_durations_;
  std::vector<double> stall_times_;
  std::vector<int> stall_segments_;
  std::vector<double> finish_times_;
};

/// Replays `plan` over `trace`. Never throws for capacity shortfalls: an
/// unfinished download is reported through segments_remaining.
PlaybackTimeline simulate(const BitratePlan& plan, const ThroughputTrace& trace,
                          const SessionConfig& cfg);

struct FeasibilityReport {
  bool feasible = false;
  int stalls = 0;
  bool incomplete = false;
};

FeasibilityReport check_feasibility(const BitratePlan& plan, const ThroughputTrace& trace,
                                    const SessionConfig& cfg, int max_stalls);

}  // namespace qoeloop
