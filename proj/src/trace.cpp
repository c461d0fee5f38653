#include "qoeloop/trace.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "qoeloop/errors.hpp"

namespace qoeloop {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

void ThroughputTrace::validate() const {
  if (!(slot_duration > 0.0) || !std::isfinite(slot_duration))
    throw ValidationError("slot_duration must be > 0");
  if (values.empty()) throw ValidationError("trace has no samples");
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i]) || values[i] < 0.0)
      throw ValidationError("throughput sample " + std::to_string(i + 1) +
                            " must be finite and non-negative");
  }
}

TraceFormat parse_trace_format(std::string_view name) {
  if (name == "csv") return TraceFormat::kCsv;
  if (name == "json") return TraceFormat::kJson;
  throw ValidationError("unknown trace format '" + std::string(name) + "'");
}

std::string format_double(double value) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  (void)ec;
  return std::string(buf, end);
}

ThroughputTrace parse_trace_csv(std::string_view text, double slot_duration, std::string id) {
  ThroughputTrace trace;
  trace.id = std::move(id);
  trace.slot_duration = slot_duration;

  std::size_t record = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    const auto line = trim(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (line.empty() || line.front() == '#') continue;
    ++record;

    double v = 0.0;
    const char* first = line.data();
    const char* last = line.data() + line.size();
    if (*first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || ptr != last)
      throw FormatError("cannot parse throughput '" + std::string(line) + "'", record);
    if (!std::isfinite(v) || v < 0.0)
      throw ValidationError("negative or non-finite throughput on record " +
                            std::to_string(record));
    trace.values.push_back(v);
  }
  trace.validate();
  return trace;
}

ThroughputTrace parse_trace_json(std::string_view text, std::string id) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("invalid JSON: ") + e.what(), e.byte);
  }
  if (!j.is_object() || !j.contains("values") || !j["values"].is_array())
    throw FormatError("expected an object with a 'values' array", 1);

  ThroughputTrace trace;
  trace.id = j.contains("id") && j["id"].is_string() ? j["id"].get<std::string>() : std::move(id);
  if (j.contains("slot_duration")) {
    if (!j["slot_duration"].is_number()) throw FormatError("slot_duration is not a number", 1);
    trace.slot_duration = j["slot_duration"].get<double>();
  }
  std::size_t record = 0;
  for (const auto& v : j["values"]) {
    ++record;
    if (!v.is_number()) throw FormatError("throughput is not a number", record);
    const double x = v.get<double>();
    if (x < 0.0)
      throw ValidationError("negative throughput on record " + std::to_string(record));
    trace.values.push_back(x);
  }
  trace.validate();
  return trace;
}

ThroughputTrace load_trace(const std::filesystem::path& path, TraceFormat format,
                           double slot_duration) {
  const std::string text = read_file(path);
  const std::string id = path.stem().string();
  return format == TraceFormat::kCsv ? parse_trace_csv(text, slot_duration, id)
                                     : parse_trace_json(text, id);
}

std::string format_trace_csv(const ThroughputTrace& trace) {
  std::string out;
  for (double v : trace.values) {
    out += format_double(v);
    out += '\n';
  }
  return out;
}

std::string format_trace_json(const ThroughputTrace& trace) {
  nlohmann::ordered_json j;
  j["id"] = trace.id;
  j["slot_duration"] = trace.slot_duration;
  j["values"] = trace.values;
  return j.dump() + "\n";
}

void save_trace(const std::filesystem::path& path, const ThroughputTrace& trace,
                TraceFormat format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << (format == TraceFormat::kCsv ? format_trace_csv(trace) : format_trace_json(trace));
}

void SyntheticTraceConfig::validate() const {
  if (num_slots == 0) throw ValidationError("num_slots must be >= 1");
  if (!(mean > 0.0)) throw ValidationError("mean must be > 0");
  if (!(correlation >= 0.0 && correlation < 1.0))
    throw ValidationError("correlation must lie in [0, 1)");
  if (!(volatility >= 0.0)) throw ValidationError("volatility must be >= 0");
  if (!(floor >= 0.0)) throw ValidationError("floor must be >= 0");
  if (!(slot_duration > 0.0)) throw ValidationError("slot_duration must be > 0");
}

ThroughputTrace generate_trace(const SyntheticTraceConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  ThroughputTrace trace;
  trace.id = "ar1-" + std::to_string(cfg.seed);
  trace.slot_duration = cfg.slot_duration;
  trace.values.reserve(cfg.num_slots);

  // Innovation scaled so the latent process has stationary std = volatility.
  const double innovation = cfg.volatility * std::sqrt(1.0 - cfg.correlation * cfg.correlation);
  double deviation = cfg.volatility * normal(rng);
  for (std::size_t k = 0; k < cfg.num_slots; ++k) {
    if (k > 0) deviation = cfg.correlation * deviation + innovation * normal(rng);
    if (cfg.volatility == 0.0) deviation = 0.0;
    trace.values.push_back(std::max(cfg.floor, cfg.mean + deviation));
  }
  return trace;
}

std::vector<ThroughputTrace> generate_pool(std::size_t count, const SyntheticTraceConfig& cfg) {
  cfg.validate();
  std::vector<ThroughputTrace> pool;
  pool.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    SyntheticTraceConfig c = cfg;
    c.seed = splitmix64(cfg.seed ^ splitmix64(i));
    pool.push_back(generate_trace(c));
    pool.back().id = "ar1-" + std::to_string(cfg.seed) + "-" + std::to_string(i);
  }
  return pool;
}

std::size_t sample_index(std::size_t pool_size, std::mt19937_64& rng) {
  if (pool_size == 0) throw ValidationError("cannot sample from an empty trace pool");
  std::uniform_int_distribution<std::size_t> pick(0, pool_size - 1);
  return pick(rng);
}

const ThroughputTrace& sample_pool(std::span<const ThroughputTrace> pool, std::mt19937_64& rng) {
  return pool[sample_index(pool.size(), rng)];
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) noexcept {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

ThroughputTrace sample_pool(std::span<const ThroughputTrace> pool, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return sample_pool(pool, rng);
}

}  // namespace qoeloop
