#include "netmon/tsdb.hpp"

#include <zlib.h>

#include <algorithm>
#include <array>
#include <cstring>
#include <fstream>
#include <iterator>
#include <mutex>

#include "netmon/error.hpp"

namespace netmon {

namespace {

constexpr std::array<std::string_view, 13> kInterfaceMetrics = {
    "pps_in", "pps_out", "bps_in", "bps_out", "eps_in", "eps_out",
    "pkts_in", "pkts_out", "octets_in", "octets_out", "errs_in", "errs_out", "speed_bps"};
constexpr std::array<std::string_view, 4> kFlowMetrics = {"bytes", "packets", "duration_s", "bps"};
constexpr std::array<std::string_view, 2> kOpticalMetrics = {"tx_power_dbm", "rx_power_dbm"};

constexpr char kMagic[4] = {'N', 'W', 'T', 'S'};

int rate_index(std::string_view metric) {
  const auto names = rate_metric_names();
  const auto it = std::find(names.begin(), names.end(), metric);
  return it == names.end() ? -1 : static_cast<int>(it - names.begin());
}

double raw_value(const Record& record, std::string_view metric) {
  if (const auto* s = std::get_if<TelemetrySample>(&record)) {
    if (metric == "pkts_in") return static_cast<double>(s->pkts_in);
    if (metric == "pkts_out") return static_cast<double>(s->pkts_out);
    if (metric == "octets_in") return static_cast<double>(s->octets_in);
    if (metric == "octets_out") return static_cast<double>(s->octets_out);
    if (metric == "errs_in") return static_cast<double>(s->errs_in);
    if (metric == "errs_out") return static_cast<double>(s->errs_out);
    return static_cast<double>(s->speed_bps);
  }
  if (const auto* f = std::get_if<FlowRecord>(&record)) {
    const double duration = static_cast<double>(f->end_ts - f->start_ts);
    if (metric == "bytes") return static_cast<double>(f->bytes);
    if (metric == "packets") return static_cast<double>(f->packets);
    if (metric == "duration_s") return duration;
    return static_cast<double>(f->bytes) * 8.0 / std::max(1.0, duration);
  }
  const auto& o = std::get<OpticalSample>(record);
  return metric == "tx_power_dbm" ? o.tx_power_dbm : o.rx_power_dbm;
}

void put_u16(std::string& out, std::uint16_t v) {
  out += static_cast<char>(v & 0xff);
  out += static_cast<char>(v >> 8);
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out += static_cast<char>((v >> (8 * i)) & 0xff);
}

std::uint32_t get_u32(const std::string& in, std::size_t pos) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i)
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  return v;
}

std::uint32_t checksum(const char* data, std::size_t size) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed large bodies in chunks.
  while (size > 0) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(size, 1u << 30));
    crc = crc32(crc, reinterpret_cast<const Bytef*>(data), chunk);
    data += chunk;
    size -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

} // namespace

Store::Store(DbKind kind, std::string name) : kind_(kind), name_(std::move(name)) {}

std::span<const std::string_view> Store::metrics(DbKind kind) noexcept {
  switch (kind) {
  case DbKind::interface: return kInterfaceMetrics;
  case DbKind::flow: return kFlowMetrics;
  case DbKind::optical: return kOpticalMetrics;
  }
  return {};
}

bool Store::is_metric(DbKind kind, std::string_view metric) noexcept {
  const auto names = metrics(kind);
  return std::find(names.begin(), names.end(), metric) != names.end();
}

std::uint64_t Store::record_count() const {
  std::shared_lock lock(mutex_);
  return records_.size();
}

StoreHandle Store::handle() const {
  std::shared_lock lock(mutex_);
  return {kind_, name_, records_.size()};
}

void Store::append_locked(const Record& record) {
  if (kind_of(record) != kind_)
    throw Error(Errc::kind_mismatch, std::string("cannot append ") + to_string(kind_of(record)) +
                                         " record to " + to_string(kind_) + " store '" + name_ + "'");
  validate(record);
  const auto index = static_cast<std::uint32_t>(records_.size());
  const std::int64_t ts = timestamp_of(record);
  records_.push_back(record);
  auto& entries = by_entity_[entity_of(record)];
  // Fast path for in-order data; late records slot in after equal timestamps.
  if (entries.empty() || entries.back().ts <= ts) {
    entries.push_back({ts, index});
  } else {
    const auto pos = std::upper_bound(entries.begin(), entries.end(), ts,
                                      [](std::int64_t t, const Entry& e) { return t < e.ts; });
    entries.insert(pos, {ts, index});
  }
}

void Store::append(const Record& record) {
  std::unique_lock lock(mutex_);
  append_locked(record);
}

void Store::append(std::span<const Record> records) {
  // Validate first so a bad batch leaves the store untouched.
  for (const auto& r : records) {
    if (kind_of(r) != kind_)
      throw Error(Errc::kind_mismatch, std::string("cannot append ") + to_string(kind_of(r)) +
                                           " record to " + to_string(kind_) + " store '" + name_ + "'");
    validate(r);
  }
  std::unique_lock lock(mutex_);
  for (const auto& r : records) append_locked(r);
}

void Store::collect_entity(const std::vector<Entry>& entries, std::string_view metric,
                           std::int64_t t_start, std::int64_t t_end,
                           std::vector<std::pair<Point, std::uint32_t>>& out) const {
  auto first = std::lower_bound(entries.begin(), entries.end(), t_start,
                                [](const Entry& e, std::int64_t t) { return e.ts < t; });
  const int rate = kind_ == DbKind::interface ? rate_index(metric) : -1;
  if (rate < 0) {
    for (auto it = first; it != entries.end() && it->ts < t_end; ++it)
      out.push_back({{it->ts, raw_value(records_[it->index], metric), 1}, it->index});
    return;
  }
  // Rates need the sample preceding the window start.
  if (first == entries.begin()) {
    if (first == entries.end()) return;
    ++first;
  }
  for (auto it = first; it != entries.end() && it->ts < t_end; ++it) {
    const auto& prev = std::get<TelemetrySample>(records_[std::prev(it)->index]);
    const auto& curr = std::get<TelemetrySample>(records_[it->index]);
    if (curr.timestamp <= prev.timestamp) continue; // duplicate poll
    const RateSample r = counters_to_rate(prev, curr);
    if (r.reset) continue;
    out.push_back({{it->ts, rate_metric(r, static_cast<std::size_t>(rate)), 1}, it->index});
  }
}

Series Store::query_window(const WindowQuery& q) const {
  if (q.t_end <= q.t_start) throw Error(Errc::validation, "t_end must exceed t_start");
  if (q.step_s && *q.step_s <= 0) throw Error(Errc::validation, "step_s must be positive");
  if (!is_metric(kind_, q.metric))
    throw Error(Errc::unknown_metric, "'" + q.metric + "' is not a " + to_string(kind_) + " metric");

  std::shared_lock lock(mutex_);
  std::vector<std::pair<Point, std::uint32_t>> hits;
  if (q.entity_id) {
    const auto it = by_entity_.find(*q.entity_id);
    if (it == by_entity_.end())
      throw Error(Errc::unknown_entity, "'" + *q.entity_id + "' in store '" + name_ + "'");
    collect_entity(it->second, q.metric, q.t_start, q.t_end, hits);
  } else {
    for (const auto& [entity, entries] : by_entity_)
      collect_entity(entries, q.metric, q.t_start, q.t_end, hits);
    std::stable_sort(hits.begin(), hits.end(),
                     [](const auto& a, const auto& b) { return a.first.ts < b.first.ts; });
  }
  lock.unlock();

  Series out;
  if (!q.step_s) {
    out.reserve(hits.size());
    for (const auto& h : hits) out.push_back(h.first);
    return out;
  }
  const std::int64_t step = *q.step_s;
  double sum = 0.0;
  for (const auto& [p, seq] : hits) {
    const std::int64_t slot = q.t_start + (p.ts - q.t_start) / step * step;
    if (out.empty() || out.back().ts != slot) {
      if (!out.empty()) out.back().value = sum / out.back().count;
      out.push_back({slot, 0.0, 0});
      sum = 0.0;
    }
    sum += p.value;
    ++out.back().count;
  }
  if (!out.empty()) out.back().value = sum / out.back().count;
  return out;
}

std::vector<std::string> Store::list_entities() const {
  std::shared_lock lock(mutex_);
  std::vector<std::string> out;
  out.reserve(by_entity_.size());
  for (const auto& [entity, entries] : by_entity_) out.push_back(entity);
  return out;
}

bool Store::has_entity(std::string_view entity) const {
  std::shared_lock lock(mutex_);
  return by_entity_.find(entity) != by_entity_.end();
}

std::optional<TimeCoverage> Store::coverage() const {
  std::shared_lock lock(mutex_);
  if (by_entity_.empty()) return std::nullopt;
  TimeCoverage cov{by_entity_.begin()->second.front().ts, by_entity_.begin()->second.back().ts};
  for (const auto& [entity, entries] : by_entity_) {
    cov.first_ts = std::min(cov.first_ts, entries.front().ts);
    cov.last_ts = std::max(cov.last_ts, entries.back().ts);
  }
  return cov;
}

std::vector<Record> Store::records() const {
  std::shared_lock lock(mutex_);
  return records_;
}

void Store::persist(const std::filesystem::path& path) const {
  std::string body;
  {
    std::shared_lock lock(mutex_);
    for (const auto& r : records_) {
      const std::string line = format_record(r);
      put_u32(body, static_cast<std::uint32_t>(line.size()));
      body += line;
    }
  }
  std::string file(kMagic, sizeof(kMagic));
  put_u16(file, kStoreFormatVersion);
  file += static_cast<char>(static_cast<std::uint8_t>(kind_));
  file += body;
  put_u32(file, checksum(body.data(), body.size()));

  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::storage_io_failure, "cannot write " + tmp.string());
    out.write(file.data(), static_cast<std::streamsize>(file.size()));
    if (!out.flush()) throw Error(Errc::storage_io_failure, "short write to " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(Errc::storage_io_failure, "rename to " + path.string() + ": " + ec.message());
}

std::unique_ptr<Store> Store::open(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::storage_io_failure, "cannot open " + path.string());
  const std::string file((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  constexpr std::size_t kHeader = 4 + 2 + 1;
  if (file.size() < kHeader + 4 || std::memcmp(file.data(), kMagic, 4) != 0)
    throw Error(Errc::corrupt_file, path.string() + ": bad magic or truncated header");
  const auto version = static_cast<std::uint16_t>(static_cast<unsigned char>(file[4]) |
                                                  static_cast<unsigned char>(file[5]) << 8);
  if (version != kStoreFormatVersion)
    throw Error(Errc::version_mismatch, path.string() + ": format version " + std::to_string(version));
  const auto tag = static_cast<std::uint8_t>(file[6]);
  if (tag > static_cast<std::uint8_t>(DbKind::optical))
    throw Error(Errc::corrupt_file, path.string() + ": unknown kind tag");

  const std::size_t body_end = file.size() - 4;
  if (checksum(file.data() + kHeader, body_end - kHeader) != get_u32(file, body_end))
    throw Error(Errc::corrupt_file, path.string() + ": checksum mismatch");

  auto store = std::make_unique<Store>(static_cast<DbKind>(tag), path.stem().string());
  std::size_t pos = kHeader;
  std::size_t line_no = 0;
  while (pos < body_end) {
    if (pos + 4 > body_end) throw Error(Errc::corrupt_file, path.string() + ": truncated length");
    const std::uint32_t len = get_u32(file, pos);
    pos += 4;
    if (pos + len > body_end) throw Error(Errc::corrupt_file, path.string() + ": truncated record");
    ++line_no;
    try {
      store->append_locked(parse_record(std::string_view(file).substr(pos, len), store->kind_, line_no));
    } catch (const Error& e) {
      throw Error(Errc::corrupt_file, path.string() + ": " + e.what());
    }
    pos += len;
  }
  return store;
}

} // namespace netmon
