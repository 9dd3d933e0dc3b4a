#include "netmon/telemetry.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <limits>
#include <map>
#include <unordered_map>

#include "netmon/error.hpp"

namespace netmon {

const char* to_string(DbKind kind) noexcept {
  switch (kind) {
  case DbKind::interface: return "interface";
  case DbKind::flow: return "flow";
  case DbKind::optical: return "optical";
  }
  return "unknown";
}

std::optional<DbKind> parse_db_kind(std::string_view text) noexcept {
  if (text == "iface" || text == "interface") return DbKind::interface;
  if (text == "flow") return DbKind::flow;
  if (text == "optical") return DbKind::optical;
  return std::nullopt;
}

DbKind kind_of(const Record& record) noexcept {
  return static_cast<DbKind>(record.index());
}

const std::string& entity_of(const Record& record) noexcept {
  struct Visitor {
    const std::string& operator()(const TelemetrySample& s) const { return s.interface_id; }
    const std::string& operator()(const FlowRecord& f) const { return f.src_addr; }
    const std::string& operator()(const OpticalSample& o) const { return o.port_id; }
  };
  return std::visit(Visitor{}, record);
}

std::int64_t timestamp_of(const Record& record) noexcept {
  struct Visitor {
    std::int64_t operator()(const TelemetrySample& s) const { return s.timestamp; }
    std::int64_t operator()(const FlowRecord& f) const { return f.start_ts; }
    std::int64_t operator()(const OpticalSample& o) const { return o.timestamp; }
  };
  return std::visit(Visitor{}, record);
}

namespace {

constexpr std::array<std::string_view, kRateMetricCount> kRateNames = {
    "pps_in", "pps_out", "bps_in", "bps_out", "eps_in", "eps_out"};

constexpr std::array<std::string_view, 10> kIfaceFields = {
    "ts", "if", "pkts_in", "pkts_out", "octets_in", "octets_out",
    "errs_in", "errs_out", "speed", "descr"};
constexpr std::array<std::string_view, 9> kFlowFields = {
    "start_ts", "end_ts", "src_addr", "dst_addr", "src_port",
    "dst_port", "proto", "bytes", "packets"};
constexpr std::array<std::string_view, 4> kOpticalFields = {
    "ts", "port", "tx_power_dbm", "rx_power_dbm"};

// Values cannot contain the separator, so free text is percent-escaped.
std::string escape(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  for (char c : raw) {
    switch (c) {
    case ' ': out += "%20"; break;
    case '%': out += "%25"; break;
    case '\t': out += "%09"; break;
    case '\n': out += "%0A"; break;
    case '\r': out += "%0D"; break;
    default: out += c;
    }
  }
  return out;
}

int hex_digit(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

class FieldReader {
public:
  FieldReader(std::string_view line, std::size_t line_no) : line_no_(line_no) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    std::size_t pos = 0;
    while (pos <= line.size()) {
      const std::size_t next = std::min(line.find(' ', pos), line.size());
      const std::string_view token = line.substr(pos, next - pos);
      if (token.empty()) fail(Errc::malformed_line, "<separator>", "empty token");
      const std::size_t eq = token.find('=');
      if (eq == std::string_view::npos || eq == 0)
        fail(Errc::malformed_line, std::string(token), "expected key=value");
      const std::string_view key = token.substr(0, eq);
      if (!fields_.emplace(key, token.substr(eq + 1)).second)
        fail(Errc::malformed_line, std::string(key), "duplicate field");
      pos = next + 1;
    }
  }

  [[noreturn]] void fail(Errc code, const std::string& field, const std::string& detail) const {
    throw ParseError(code, line_no_, field, detail);
  }

  std::string_view raw(std::string_view key) const {
    const auto it = fields_.find(key);
    if (it == fields_.end()) fail(Errc::malformed_line, std::string(key), "missing field");
    return it->second;
  }

  template <typename Allowed>
  void expect_exactly(const Allowed& allowed) const {
    for (const auto& [key, value] : fields_) {
      if (key == "kind") continue;
      if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
        fail(Errc::malformed_line, std::string(key), "unknown field");
    }
  }

  std::string text(std::string_view key) const {
    const std::string_view value = raw(key);
    std::string out;
    out.reserve(value.size());
    for (std::size_t i = 0; i < value.size(); ++i) {
      if (value[i] != '%') {
        out += value[i];
        continue;
      }
      const int hi = i + 1 < value.size() ? hex_digit(value[i + 1]) : -1;
      const int lo = i + 2 < value.size() ? hex_digit(value[i + 2]) : -1;
      if (hi < 0 || lo < 0) fail(Errc::malformed_line, std::string(key), "bad escape");
      out += static_cast<char>(hi * 16 + lo);
      i += 2;
    }
    return out;
  }

  template <typename Int>
  Int integer(std::string_view key) const {
    const std::string_view value = raw(key);
    Int out{};
    const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (value.empty() || ec != std::errc{} || ptr != value.data() + value.size())
      fail(Errc::malformed_line, std::string(key), "not an integer in range: '" + std::string(value) + "'");
    return out;
  }

  double real(std::string_view key) const {
    const std::string_view value = raw(key);
    double out = 0.0;
    const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (value.empty() || ec != std::errc{} || ptr != value.data() + value.size())
      fail(Errc::malformed_line, std::string(key), "not a real: '" + std::string(value) + "'");
    return out;
  }

private:
  std::size_t line_no_;
  std::map<std::string_view, std::string_view> fields_;
};

template <typename T>
void append_field(std::string& out, std::string_view key, const T& value) {
  out += ' ';
  out += key;
  out += '=';
  if constexpr (std::is_same_v<T, std::string>) {
    out += escape(value);
  } else {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), value);
    out.append(buf, res.ptr);
  }
}

} // namespace

std::span<const std::string_view> rate_metric_names() noexcept { return kRateNames; }

double rate_metric(const RateSample& rate, std::size_t index) noexcept {
  switch (index) {
  case 0: return rate.pps_in;
  case 1: return rate.pps_out;
  case 2: return rate.bps_in;
  case 3: return rate.bps_out;
  case 4: return rate.eps_in;
  case 5: return rate.eps_out;
  default: return 0.0;
  }
}

void validate(const Record& record, std::size_t line_no) {
  auto violation = [line_no](const char* field, const char* what) {
    throw ParseError(Errc::invariant_violation, line_no, field, what);
  };
  if (const auto* s = std::get_if<TelemetrySample>(&record)) {
    if (s->timestamp <= 0) violation("ts", "timestamp must be positive");
    if (s->interface_id.empty()) violation("if", "interface id must be nonempty");
  } else if (const auto* f = std::get_if<FlowRecord>(&record)) {
    if (f->start_ts <= 0) violation("start_ts", "timestamp must be positive");
    if (f->end_ts < f->start_ts) violation("end_ts", "end_ts precedes start_ts");
    if (f->src_addr.empty()) violation("src_addr", "address must be nonempty");
    if (f->dst_addr.empty()) violation("dst_addr", "address must be nonempty");
    if (f->bytes > 0 && f->packets == 0) violation("packets", "bytes without packets");
  } else if (const auto* o = std::get_if<OpticalSample>(&record)) {
    if (o->timestamp <= 0) violation("ts", "timestamp must be positive");
    if (o->port_id.empty()) violation("port", "port id must be nonempty");
    if (!std::isfinite(o->tx_power_dbm)) violation("tx_power_dbm", "power must be finite");
    if (!std::isfinite(o->rx_power_dbm)) violation("rx_power_dbm", "power must be finite");
  }
}

Record parse_record(std::string_view line, std::size_t line_no) {
  const FieldReader reader(line, line_no);
  const std::string_view tag = reader.raw("kind");
  const auto kind = parse_db_kind(tag);
  if (!kind || tag == "interface")
    reader.fail(Errc::malformed_line, "kind", "unknown record kind '" + std::string(tag) + "'");

  Record record;
  switch (*kind) {
  case DbKind::interface: {
    reader.expect_exactly(kIfaceFields);
    TelemetrySample s;
    s.timestamp = reader.integer<std::int64_t>("ts");
    s.interface_id = reader.text("if");
    s.pkts_in = reader.integer<std::uint64_t>("pkts_in");
    s.pkts_out = reader.integer<std::uint64_t>("pkts_out");
    s.octets_in = reader.integer<std::uint64_t>("octets_in");
    s.octets_out = reader.integer<std::uint64_t>("octets_out");
    s.errs_in = reader.integer<std::uint64_t>("errs_in");
    s.errs_out = reader.integer<std::uint64_t>("errs_out");
    s.speed_bps = reader.integer<std::uint64_t>("speed");
    s.descr = reader.text("descr");
    record = std::move(s);
    break;
  }
  case DbKind::flow: {
    reader.expect_exactly(kFlowFields);
    FlowRecord f;
    f.start_ts = reader.integer<std::int64_t>("start_ts");
    f.end_ts = reader.integer<std::int64_t>("end_ts");
    f.src_addr = reader.text("src_addr");
    f.dst_addr = reader.text("dst_addr");
    f.src_port = reader.integer<std::uint16_t>("src_port");
    f.dst_port = reader.integer<std::uint16_t>("dst_port");
    f.proto = reader.integer<std::uint8_t>("proto");
    f.bytes = reader.integer<std::uint64_t>("bytes");
    f.packets = reader.integer<std::uint64_t>("packets");
    record = std::move(f);
    break;
  }
  case DbKind::optical: {
    reader.expect_exactly(kOpticalFields);
    OpticalSample o;
    o.timestamp = reader.integer<std::int64_t>("ts");
    o.port_id = reader.text("port");
    o.tx_power_dbm = reader.real("tx_power_dbm");
    o.rx_power_dbm = reader.real("rx_power_dbm");
    record = std::move(o);
    break;
  }
  }
  validate(record, line_no);
  return record;
}

Record parse_record(std::string_view line, DbKind expected, std::size_t line_no) {
  Record record = parse_record(line, line_no);
  if (kind_of(record) != expected)
    throw ParseError(Errc::kind_mismatch, line_no, "kind",
                     std::string("expected ") + to_string(expected) + " record, got " +
                         to_string(kind_of(record)));
  return record;
}

std::string format_record(const Record& record) {
  std::string out;
  if (const auto* s = std::get_if<TelemetrySample>(&record)) {
    out = "kind=iface";
    append_field(out, "ts", s->timestamp);
    append_field(out, "if", s->interface_id);
    append_field(out, "pkts_in", s->pkts_in);
    append_field(out, "pkts_out", s->pkts_out);
    append_field(out, "octets_in", s->octets_in);
    append_field(out, "octets_out", s->octets_out);
    append_field(out, "errs_in", s->errs_in);
    append_field(out, "errs_out", s->errs_out);
    append_field(out, "speed", s->speed_bps);
    append_field(out, "descr", s->descr);
  } else if (const auto* f = std::get_if<FlowRecord>(&record)) {
    out = "kind=flow";
    append_field(out, "start_ts", f->start_ts);
    append_field(out, "end_ts", f->end_ts);
    append_field(out, "src_addr", f->src_addr);
    append_field(out, "dst_addr", f->dst_addr);
    append_field(out, "src_port", f->src_port);
    append_field(out, "dst_port", f->dst_port);
    append_field(out, "proto", static_cast<unsigned>(f->proto));
    append_field(out, "bytes", f->bytes);
    append_field(out, "packets", f->packets);
  } else if (const auto* o = std::get_if<OpticalSample>(&record)) {
    out = "kind=optical";
    append_field(out, "ts", o->timestamp);
    append_field(out, "port", o->port_id);
    append_field(out, "tx_power_dbm", o->tx_power_dbm);
    append_field(out, "rx_power_dbm", o->rx_power_dbm);
  }
  return out;
}

RateSample counters_to_rate(const TelemetrySample& prev, const TelemetrySample& curr) {
  if (prev.interface_id != curr.interface_id)
    throw Error(Errc::mismatched_entity,
                "'" + prev.interface_id + "' vs '" + curr.interface_id + "'");
  if (curr.timestamp <= prev.timestamp)
    throw Error(Errc::non_monotonic_time,
                std::to_string(prev.timestamp) + " -> " + std::to_string(curr.timestamp));

  RateSample rate;
  rate.timestamp = curr.timestamp;
  rate.interface_id = curr.interface_id;
  rate.interval_s = static_cast<double>(curr.timestamp - prev.timestamp);

  const std::array<std::pair<std::uint64_t, std::uint64_t>, 6> pairs = {{
      {prev.pkts_in, curr.pkts_in},
      {prev.pkts_out, curr.pkts_out},
      {prev.octets_in, curr.octets_in},
      {prev.octets_out, curr.octets_out},
      {prev.errs_in, curr.errs_in},
      {prev.errs_out, curr.errs_out},
  }};
  // A wrap and a device restart look the same at low polling rates.
  for (const auto& [before, after] : pairs) {
    if (after < before) {
      rate.reset = true;
      return rate;
    }
  }
  auto per_second = [&](std::size_t i) {
    return static_cast<double>(pairs[i].second - pairs[i].first) / rate.interval_s;
  };
  rate.pps_in = per_second(0);
  rate.pps_out = per_second(1);
  rate.bps_in = per_second(2) * 8.0;
  rate.bps_out = per_second(3) * 8.0;
  rate.eps_in = per_second(4);
  rate.eps_out = per_second(5);
  return rate;
}

Consolidation consolidate(std::span<const RateSample> rates, std::int64_t window_s,
                          std::size_t budget) {
  if (window_s <= 0) throw Error(Errc::validation, "window_s must be positive");

  std::unordered_map<std::string_view, std::int64_t> last_ts;
  for (const auto& r : rates) {
    auto [it, inserted] = last_ts.try_emplace(r.interface_id, r.timestamp);
    if (!inserted) {
      if (r.timestamp < it->second)
        throw Error(Errc::unsorted_input, "entity '" + r.interface_id + "' goes back to " +
                                               std::to_string(r.timestamp));
      it->second = r.timestamp;
    }
  }
  if (budget < last_ts.size())
    throw Error(Errc::budget_infeasible, "budget " + std::to_string(budget) + " < " +
                                             std::to_string(last_ts.size()) + " entities");

  std::int64_t window = window_s;
  auto count_buckets = [&](std::int64_t w) {
    std::size_t n = 0;
    std::unordered_map<std::string_view, std::int64_t> current;
    for (const auto& r : rates) {
      const std::int64_t start = align_down(r.timestamp, w);
      auto [it, inserted] = current.try_emplace(r.interface_id, start);
      if (inserted || it->second != start) {
        it->second = start;
        ++n;
      }
    }
    return n;
  };
  while (count_buckets(window) > budget) {
    if (window > std::numeric_limits<std::int64_t>::max() / 2)
      throw Error(Errc::budget_infeasible, "window overflow while fitting budget");
    window *= 2;
  }

  std::map<std::pair<std::string_view, std::int64_t>, ConsolidatedBucket> grouped;
  for (const auto& r : rates) {
    const std::int64_t start = align_down(r.timestamp, window);
    auto [it, inserted] = grouped.try_emplace({r.interface_id, start});
    ConsolidatedBucket& bucket = it->second;
    if (inserted) {
      bucket.bucket_start = start;
      bucket.entity_id = r.interface_id;
    }
    ++bucket.count;
    for (std::size_t m = 0; m < kRateMetricCount; ++m) {
      const double v = rate_metric(r, m);
      MetricAggregate& agg = bucket.metrics[m];
      if (agg.count == 0) {
        agg.min = agg.max = v;
      } else {
        agg.min = std::min(agg.min, v);
        agg.max = std::max(agg.max, v);
      }
      agg.sum += v;
      ++agg.count;
    }
  }

  Consolidation out;
  out.window_s = window;
  out.buckets.reserve(grouped.size());
  for (auto& [key, bucket] : grouped) {
    for (auto& agg : bucket.metrics) {
      agg.mean = agg.sum / static_cast<double>(agg.count);
      // Rounding can push the mean a hair outside [min, max] on constant data.
      agg.mean = std::clamp(agg.mean, agg.min, agg.max);
    }
    out.buckets.push_back(std::move(bucket));
  }
  return out;
}

} // namespace netmon
