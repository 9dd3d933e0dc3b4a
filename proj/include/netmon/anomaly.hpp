#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "netmon/telemetry.hpp"
#include "netmon/tsdb.hpp"

namespace netmon {

/// Half-open time range [start, end).
struct Window {
  std::int64_t start = 0;
  std::int64_t end = 0;

  bool operator==(const Window&) const = default;
  std::int64_t length() const noexcept { return end - start; }
};

struct WindowStats {
  std::int64_t window_start = 0;
  std::int64_t window_end = 0;
  std::string entity_id;
  std::string metric;
  std::uint64_t count = 0;
  double mean = 0.0;
  double median = 0.0;
  double mad = 0.0;
  double max = 0.0;
  double min = 0.0;
};

enum class Severity { warn, critical };
enum class Direction { high, low };
// level_shift: robust z-score against the trailing baseline.
// error_spike: absolute errors/s threshold; score is observed / threshold.
enum class EventKind { level_shift, error_spike };

const char* to_string(Severity s) noexcept;
const char* to_string(Direction d) noexcept;
const char* to_string(EventKind k) noexcept;

struct AnomalyEvent {
  DbKind source = DbKind::interface;
  std::string entity_id;
  std::string metric;
  std::int64_t window_start = 0;
  std::int64_t window_end = 0;
  double observed = 0.0;
  double score = 0.0;
  Severity severity = Severity::warn;
  Direction direction = Direction::high;
  EventKind kind = EventKind::level_shift;

  bool operator==(const AnomalyEvent&) const = default;
};

struct DetectorConfig {
  std::int64_t window_s = 3600;
  int baseline_windows = 24;
  double z_warn = 3.5;
  double z_critical = 7.0;
  double mad_floor_rel = 1e-9; // floor = mad_floor_rel * max(1, |median|)
  double error_eps_threshold = 1.0;

  void validate() const; // throws Error(config)
  double mad_floor(double median) const noexcept;
};

enum class DetectionRule { level_shift, error_threshold };

struct MonitoredMetric {
  std::string_view metric;
  DetectionRule rule;
};

// Metrics the detector watches per database kind. Error rates only get the
// absolute threshold rule; traffic and optical power get the z-score rule.
std::span<const MonitoredMetric> monitored_metrics(DbKind kind) noexcept;

struct SeriesKey {
  DbKind source = DbKind::interface;
  std::string entity_id;
  std::string metric;
  DetectionRule rule = DetectionRule::level_shift;
};

double median_of(std::vector<double> values);
// Median absolute deviation around `center`.
double mad_of(std::span<const double> values, double center);

WindowStats window_stats(std::span<const Point> series, Window window,
                         std::string entity_id = {}, std::string metric = {});

double modified_zscore(double x, double median, double mad, double mad_floor) noexcept;

// Per-window means of consecutive windows of length window_s starting at
// `first_start`; empty windows yield nullopt.
std::vector<std::optional<double>> window_means(std::span<const Point> series,
                                                std::int64_t first_start, std::size_t count,
                                                std::int64_t window_s);

std::vector<AnomalyEvent> detect(std::span<const Point> series, const DetectorConfig& cfg,
                                 Window eval, const SeriesKey& key);

// Runs every monitored metric of one entity. Throws insufficient-baseline
// only when no z-score metric had enough history.
std::vector<AnomalyEvent> detect_entity(const Store& store, const std::string& entity,
                                        const DetectorConfig& cfg, Window eval);

struct Forecast {
  double predicted = 0.0;
  double uncertainty = 0.0;
  bool seasonal = false;
};

inline constexpr int kSeasonWindows = 24;
inline constexpr double kEwmaWeight = 0.3;

// Predicts the mean of [as_of, as_of + window_s) from the complete windows
// before as_of.
Forecast forecast_next(std::span<const Point> series, const DetectorConfig& cfg,
                       std::int64_t as_of);

// Runs detect_entity over every aligned window inside `range`, skipping
// windows that lack a baseline. Series are queried once per metric.
std::vector<AnomalyEvent> detect_entity_windows(const Store& store, const std::string& entity,
                                                const DetectorConfig& cfg, Window range);

// A window counts as complete once data reaches within this many seconds of its end.
inline constexpr std::int64_t kWindowCompletionSlack = 300;

// End of the newest complete window given the newest sample timestamp.
inline std::int64_t complete_until(std::int64_t last_ts, std::int64_t window_s,
                                   std::int64_t slack_s = kWindowCompletionSlack) noexcept {
  return align_down(last_ts + slack_s, window_s);
}

// Canonical ordering used for byte-identical event lists.
void sort_events(std::vector<AnomalyEvent>& events);

} // namespace netmon
