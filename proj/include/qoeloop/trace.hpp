#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace qoeloop {

/// Predicted throughput over the planning horizon, one sample per slot.
///
/// Values are in Mb/s and are treated as constant over their slot. The trace
/// is a value type; once validated it is never mutated by the library.
struct ThroughputTrace {
  std::string id;
  double slot_duration = 1.0;  // seconds
  std::vector<double> values;  // Mb/s

  std::size_t size() const noexcept { return values.size(); }
  double horizon() const noexcept { return slot_duration * static_cast<double>(values.size()); }

  /// Throws ValidationError unless slot_duration > 0, the trace is non-empty
  /// and every sample is finite and non-negative.
  void validate() const;

  bool operator==(const ThroughputTrace&) const = default;
};

enum class TraceFormat { kCsv, kJson };

TraceFormat parse_trace_format(std::string_view name);

// CSV: one decimal per line, one line per slot. Blank lines and lines
// starting with '#' are ignored.
ThroughputTrace parse_trace_csv(std::string_view text, double slot_duration = 1.0,
                                std::string id = {});
// JSON: {"slot_duration": s, "values": [...], "id": optional}
ThroughputTrace parse_trace_json(std::string_view text, std::string id = {});

ThroughputTrace load_trace(const std::filesystem::path& path, TraceFormat format,
                           double slot_duration = 1.0);

// Shortest round-trip decimal text, so load(save(t)) reproduces t exactly.
std::string format_trace_csv(const ThroughputTrace& trace);
std::string format_trace_json(const ThroughputTrace& trace);
void save_trace(const std::filesystem::path& path, const ThroughputTrace& trace,
                TraceFormat format);

/// AR(1) throughput around `mean` with stationary standard deviation
/// `volatility`, clipped below at `floor`.
struct SyntheticTraceConfig {
  std::size_t num_slots = 70;
  double mean = 4.0;
  double correlation = 0.8;
  double volatility = 1.5;
  double floor = 0.1;
  double slot_duration = 1.0;
  std::uint64_t seed = 1;

  void validate() const;
};

ThroughputTrace generate_trace(const SyntheticTraceConfig& cfg);

/// `count` independent traces; trace i uses a seed derived from (cfg.seed, i).
std::vector<ThroughputTrace> generate_pool(std::size_t count, const SyntheticTraceConfig& cfg);

/// Uniform draw of a pool index. Throws ValidationError on an empty pool.
std::size_t sample_index(std::size_t pool_size, std::mt19937_64& rng);
const ThroughputTrace& sample_pool(std::span<const ThroughputTrace> pool, std::mt19937_64& rng);
ThroughputTrace sample_pool(std::span<const ThroughputTrace> pool, std::uint64_t seed);

/// Independent sub-seed for stream `stream` of a master seed.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) noexcept;

// Shortest decimal representation that parses back to the same double.
std::string format_double(double value);

}  // namespace qoeloop
