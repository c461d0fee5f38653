#pragma once

#include <string>

#include <json.hpp>

#include "qoeloop/playback.hpp"

namespace qoeloop {

/// Per-slot table: slot,time,buffer,phase.
std::string timeline_csv(const PlaybackTimeline& t, double slot_duration);
nlohmann::ordered_json to_json(const PlaybackTimeline& t, double slot_duration);

}  // namespace qoeloop
