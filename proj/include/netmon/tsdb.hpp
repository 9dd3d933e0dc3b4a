#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "netmon/telemetry.hpp"

namespace netmon {

struct Point {
  std::int64_t ts = 0;
  double value = 0.0;
  std::uint32_t count = 1; // raw samples folded into this point

  bool operator==(const Point&) const = default;
};

using Series = std::vector<Point>;

struct WindowQuery {
  std::optional<std::string> entity_id;
  std::string metric;
  std::int64_t t_start = 0;
  std::int64_t t_end = 0;
  std::optional<std::int64_t> step_s;
};

struct StoreHandle {
  DbKind db_kind = DbKind::interface;
  std::string db_name;
  std::uint64_t record_count = 0;
};

struct TimeCoverage {
  std::int64_t first_ts = 0;
  std::int64_t last_ts = 0;
};

inline constexpr std::uint16_t kStoreFormatVersion = 1;

/// Append-only store for one database kind.
///
/// Records are kept in append order (the persistence order) plus a per-entity
/// index sorted by timestamp, so late records are accepted and simply slot
/// into place. Interface stores expose the raw counters and the per-interval
/// rates derived from consecutive samples; reset intervals are left out of
/// the rate series. Readers share a lock; appends take it exclusively.
class Store {
public:
  Store(DbKind kind, std::string name);

  Store(const Store&) = delete;
  Store& operator=(const Store&) = delete;

  static std::unique_ptr<Store> open(const std::filesystem::path& path);
  void persist(const std::filesystem::path& path) const;

  DbKind kind() const noexcept { return kind_; }
  const std::string& name() const noexcept { return name_; }
  std::uint64_t record_count() const;
  StoreHandle handle() const;

  void append(const Record& record);
  void append(std::span<const Record> records);

  Series query_window(const WindowQuery& q) const;
  std::vector<std::string> list_entities() const;
  bool has_entity(std::string_view entity) const;
  std::optional<TimeCoverage> coverage() const;
  // Snapshot of every record in append order.
  std::vector<Record> records() const;

  static std::span<const std::string_view> metrics(DbKind kind) noexcept;
  static bool is_metric(DbKind kind, std::string_view metric) noexcept;

private:
  struct Entry {
    std::int64_t ts;
    std::uint32_t index;
  };

  void append_locked(const Record& record);
  void collect_entity(const std::vector<Entry>& entries, std::string_view metric,
                      std::int64_t t_start, std::int64_t t_end,
                      std::vector<std::pair<Point, std::uint32_t>>& out) const;

  DbKind kind_;
  std::string name_;
  mutable std::shared_mutex mutex_;
  std::vector<Record> records_;
  std::map<std::string, std::vector<Entry>, std::less<>> by_entity_;
};

} // namespace netmon
