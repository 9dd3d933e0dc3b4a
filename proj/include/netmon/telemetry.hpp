#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace netmon {

enum class DbKind : std::uint8_t { interface = 0, flow = 1, optical = 2 };

const char* to_string(DbKind kind) noexcept;
// Accepts both the line tags (iface, flow, optical) and the long names.
std::optional<DbKind> parse_db_kind(std::string_view text) noexcept;

/// Cumulative interface counters as polled from a device.
struct TelemetrySample {
  std::int64_t timestamp = 0;
  std::string interface_id;
  std::uint64_t pkts_in = 0;
  std::uint64_t pkts_out = 0;
  std::uint64_t octets_in = 0;
  std::uint64_t octets_out = 0;
  std::uint64_t errs_in = 0;
  std::uint64_t errs_out = 0;
  std::uint64_t speed_bps = 0;
  std::string descr;

  bool operator==(const TelemetrySample&) const = default;
};

struct FlowRecord {
  std::int64_t start_ts = 0;
  std::int64_t end_ts = 0;
  std::string src_addr;
  std::string dst_addr;
  std::uint16_t src_port = 0;
  std::uint16_t dst_port = 0;
  std::uint8_t proto = 0;
  std::uint64_t bytes = 0;
  std::uint64_t packets = 0;

  bool operator==(const FlowRecord&) const = default;
};

struct OpticalSample {
  std::int64_t timestamp = 0;
  std::string port_id;
  double tx_power_dbm = 0.0;
  double rx_power_dbm = 0.0;

  bool operator==(const OpticalSample&) const = default;
};

using Record = std::variant<TelemetrySample, FlowRecord, OpticalSample>;

DbKind kind_of(const Record& record) noexcept;
// Entity key used for indexing: interface id, flow source address, or port id.
const std::string& entity_of(const Record& record) noexcept;
// Timestamp used for windowing; flows are placed at their start.
std::int64_t timestamp_of(const Record& record) noexcept;

/// Rates over one polling interval, stamped at the interval end.
struct RateSample {
  std::int64_t timestamp = 0;
  std::string interface_id;
  double pps_in = 0.0;
  double pps_out = 0.0;
  double bps_in = 0.0;
  double bps_out = 0.0;
  double eps_in = 0.0;
  double eps_out = 0.0;
  double interval_s = 0.0;
  bool reset = false;
};

inline constexpr std::size_t kRateMetricCount = 6;
// Names in RateSample field order.
std::span<const std::string_view> rate_metric_names() noexcept;
double rate_metric(const RateSample& rate, std::size_t index) noexcept;

struct MetricAggregate {
  double sum = 0.0;
  double mean = 0.0;
  double max = 0.0;
  double min = 0.0;
  std::uint64_t count = 0;
};

struct ConsolidatedBucket {
  std::int64_t bucket_start = 0;
  std::string entity_id;
  std::uint64_t count = 0;
  MetricAggregate metrics[kRateMetricCount];
};

struct Consolidation {
  std::int64_t window_s = 0; // effective window after budget doubling
  std::vector<ConsolidatedBucket> buckets;
};

// Parses one line; `line_no` only feeds diagnostics. Throws ParseError.
Record parse_record(std::string_view line, std::size_t line_no = 1);
// As above but also rejects records of another kind.
Record parse_record(std::string_view line, DbKind expected, std::size_t line_no = 1);
std::string format_record(const Record& record);

// Throws ParseError(invariant_violation) naming the first violated field.
void validate(const Record& record, std::size_t line_no = 1);

RateSample counters_to_rate(const TelemetrySample& prev, const TelemetrySample& curr);

// Buckets are ordered by entity id, then bucket start.
Consolidation consolidate(std::span<const RateSample> rates, std::int64_t window_s,
                          std::size_t budget);

inline std::int64_t align_down(std::int64_t ts, std::int64_t window_s) noexcept {
  const std::int64_t q = ts / window_s;
  return (ts % window_s < 0 ? q - 1 : q) * window_s;
}

} // namespace netmon
