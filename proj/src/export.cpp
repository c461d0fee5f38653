#include "qoeloop/export.hpp"

#include "qoeloop/trace.hpp"

namespace qoeloop {
namespace {

template <typename T>
nlohmann::ordered_json one_based(const std::vector<T>& v) {
  auto a = nlohmann::ordered_json::array();
  for (const auto& x : v) a.push_back(x + 1);
  return a;
}

}  // namespace

std::string timeline_csv(const PlaybackTimeline& t, double slot_duration) {
  std::string out = "slot,time,buffer,phase\n";
  for (std::size_t k = 0; k < t.buffer_level.size(); ++k) {
    out += std::to_string(k + 1) + ',' + format_double(static_cast<double>(k + 1) * slot_duration) +
           ',' + format_double(t.buffer_level[k]) + ',' + phase_name(t.phase[k]) + '\n';
  }
  return out;
}

nlohmann::ordered_json to_json(const PlaybackTimeline& t, double slot_duration) {
  nlohmann::ordered_json j;
  j["complete"] = t.complete();
  j["segments_remaining"] = t.segments_remaining;
  j["stall_count"] = t.stall_count;
  j["startup_delay"] = t.startup_delay();
  j["rebuffering_time"] = t.rebuffering_time();
  j["bap_start_times"] = t.bap_start_times;
  j["baw_durations"] = t.baw_durations;
  j["stall_times"] = t.stall_times;
  j["stall_segments"] = one_based(t.stall_segments);
  j["segment_finish_times"] = t.segment_finish_times;
  j["download_complete_slot"] =
      t.download_complete_slot ? nlohmann::ordered_json(*t.download_complete_slot + 1) : nullptr;
  j["download_complete_time"] =
      t.download_complete_time ? nlohmann::ordered_json(*t.download_complete_time) : nullptr;
  j["playback_end_time"] =
      t.playback_end_time ? nlohmann::ordered_json(*t.playback_end_time) : nullptr;
  j["appended_content"] = t.appended_content;
  j["slot_duration"] = slot_duration;
  j["buffer_level"] = t.buffer_level;
  auto phases = nlohmann::ordered_json::array();
  for (Phase p : t.phase) phases.push_back(phase_name(p));
  j["phase"] = std::move(phases);
  return j;
}

}  // namespace qoeloop
