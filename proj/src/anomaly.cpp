#include "netmon/anomaly.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <tuple>

#include "netmon/error.hpp"
#include "netmon/kernels.hpp"

namespace netmon {

const char* to_string(Severity s) noexcept { return s == Severity::critical ? "critical" : "warn"; }
const char* to_string(Direction d) noexcept { return d == Direction::high ? "high" : "low"; }
const char* to_string(EventKind k) noexcept {
  return k == EventKind::error_spike ? "error_spike" : "level_shift";
}

void DetectorConfig::validate() const {
  if (window_s <= 0) throw Error(Errc::config, "window_s must be positive");
  if (baseline_windows < 3) throw Error(Errc::config, "baseline_windows must be >= 3");
  if (!(z_warn > 0.0)) throw Error(Errc::config, "z_warn must be positive");
  if (!(z_critical > z_warn)) throw Error(Errc::config, "z_critical must exceed z_warn");
  if (!(mad_floor_rel > 0.0)) throw Error(Errc::config, "mad_floor must be positive");
  if (!(error_eps_threshold > 0.0)) throw Error(Errc::config, "error_eps_threshold must be positive");
}

double DetectorConfig::mad_floor(double median) const noexcept {
  return mad_floor_rel * std::max(1.0, std::abs(median));
}

namespace {

constexpr std::array<MonitoredMetric, 6> kInterfaceRules = {{
    {"pps_in", DetectionRule::level_shift},
    {"pps_out", DetectionRule::level_shift},
    {"bps_in", DetectionRule::level_shift},
    {"bps_out", DetectionRule::level_shift},
    {"eps_in", DetectionRule::error_threshold},
    {"eps_out", DetectionRule::error_threshold},
}};
constexpr std::array<MonitoredMetric, 2> kFlowRules = {{
    {"bytes", DetectionRule::level_shift},
    {"packets", DetectionRule::level_shift},
}};
constexpr std::array<MonitoredMetric, 2> kOpticalRules = {{
    {"tx_power_dbm", DetectionRule::level_shift},
    {"rx_power_dbm", DetectionRule::level_shift},
}};

std::span<const Point> in_window(std::span<const Point> series, Window w) {
  const auto lo = std::lower_bound(series.begin(), series.end(), w.start,
                                   [](const Point& p, std::int64_t t) { return p.ts < t; });
  const auto hi = std::lower_bound(lo, series.end(), w.end,
                                   [](const Point& p, std::int64_t t) { return p.ts < t; });
  return {lo, hi};
}

std::optional<double> mean_in(std::span<const Point> series, Window w) {
  const auto pts = in_window(series, w);
  if (pts.empty()) return std::nullopt;
  double sum = 0.0;
  std::uint64_t n = 0;
  for (const auto& p : pts) {
    sum += p.value * p.count;
    n += p.count;
  }
  return sum / static_cast<double>(n);
}

} // namespace

std::span<const MonitoredMetric> monitored_metrics(DbKind kind) noexcept {
  switch (kind) {
  case DbKind::interface: return kInterfaceRules;
  case DbKind::flow: return kFlowRules;
  case DbKind::optical: return kOpticalRules;
  }
  return {};
}

double median_of(std::vector<double> values) {
  if (values.empty()) throw Error(Errc::empty_window, "median of empty set");
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
  const double upper = values[mid];
  if (values.size() % 2 == 1) return upper;
  const double lower = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
  return lower + (upper - lower) / 2.0;
}

double mad_of(std::span<const double> values, double center) {
  std::vector<double> dev(values.size());
  kernels::abs_deviation(values, center, dev);
  return median_of(std::move(dev));
}

WindowStats window_stats(std::span<const Point> series, Window window, std::string entity_id,
                         std::string metric) {
  const auto pts = in_window(series, window);
  std::vector<double> values;
  values.reserve(pts.size());
  for (const auto& p : pts) values.push_back(p.value);
  if (values.empty())
    throw Error(Errc::empty_window, "no samples in [" + std::to_string(window.start) + ", " +
                                        std::to_string(window.end) + ")");
  WindowStats s;
  s.window_start = window.start;
  s.window_end = window.end;
  s.entity_id = std::move(entity_id);
  s.metric = std::move(metric);
  s.count = values.size();
  s.mean = kernels::sum(values) / static_cast<double>(values.size());
  const auto mm = kernels::minmax(values);
  s.min = mm.min;
  s.max = mm.max;
  s.mean = std::clamp(s.mean, s.min, s.max);
  s.median = median_of(values);
  s.mad = mad_of(values, s.median);
  return s;
}

double modified_zscore(double x, double median, double mad, double mad_floor) noexcept {
  return kernels::kZScoreConstant * (x - median) / std::max(mad, mad_floor);
}

std::vector<std::optional<double>> window_means(std::span<const Point> series,
                                                std::int64_t first_start, std::size_t count,
                                                std::int64_t window_s) {
  std::vector<std::optional<double>> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    const std::int64_t start = first_start + static_cast<std::int64_t>(k) * window_s;
    out.push_back(mean_in(series, {start, start + window_s}));
  }
  return out;
}

std::vector<AnomalyEvent> detect(std::span<const Point> series, const DetectorConfig& cfg,
                                 Window eval, const SeriesKey& key) {
  if (eval.end <= eval.start) throw Error(Errc::validation, "empty evaluation window");
  std::vector<AnomalyEvent> events;

  auto make_event = [&](double observed) {
    AnomalyEvent e;
    e.source = key.source;
    e.entity_id = key.entity_id;
    e.metric = key.metric;
    e.window_start = eval.start;
    e.window_end = eval.end;
    e.observed = observed;
    return e;
  };

  if (key.rule == DetectionRule::error_threshold) {
    const auto observed = mean_in(series, eval);
    if (observed && *observed >= cfg.error_eps_threshold) {
      AnomalyEvent e = make_event(*observed);
      e.kind = EventKind::error_spike;
      e.score = *observed / cfg.error_eps_threshold;
      e.severity = Severity::critical;
      e.direction = Direction::high;
      events.push_back(std::move(e));
    }
    return events;
  }

  const auto windows = static_cast<std::size_t>(cfg.baseline_windows);
  const std::int64_t baseline_start = eval.start - cfg.baseline_windows * cfg.window_s;
  const auto means = window_means(series, baseline_start, windows, cfg.window_s);
  std::vector<double> baseline;
  baseline.reserve(windows);
  for (const auto& m : means)
    if (m) baseline.push_back(*m);
  if (baseline.size() < windows)
    throw Error(Errc::insufficient_baseline,
                key.entity_id + "/" + key.metric + ": " + std::to_string(baseline.size()) + " of " +
                    std::to_string(windows) + " baseline windows");

  const auto observed = mean_in(series, eval);
  if (!observed) return events;

  const double median = median_of(baseline);
  const double mad = mad_of(baseline, median);
  const double score = modified_zscore(*observed, median, mad, cfg.mad_floor(median));
  if (std::abs(score) >= cfg.z_warn) {
    AnomalyEvent e = make_event(*observed);
    e.kind = EventKind::level_shift;
    e.score = score;
    e.severity = std::abs(score) >= cfg.z_critical ? Severity::critical : Severity::warn;
    e.direction = score >= 0 ? Direction::high : Direction::low;
    events.push_back(std::move(e));
  }
  return events;
}

std::vector<AnomalyEvent> detect_entity(const Store& store, const std::string& entity,
                                        const DetectorConfig& cfg, Window eval) {
  std::vector<AnomalyEvent> events;
  bool any_baseline = false;
  bool any_level_rule = false;
  std::string last_shortfall;
  const std::int64_t history_start = eval.start - cfg.baseline_windows * cfg.window_s;
  for (const auto& rule : monitored_metrics(store.kind())) {
    WindowQuery q;
    q.entity_id = entity;
    q.metric = std::string(rule.metric);
    q.t_start = history_start;
    q.t_end = eval.end;
    const Series series = store.query_window(q);
    const SeriesKey key{store.kind(), entity, q.metric, rule.rule};
    if (rule.rule == DetectionRule::level_shift) any_level_rule = true;
    try {
      auto found = detect(series, cfg, eval, key);
      if (rule.rule == DetectionRule::level_shift) any_baseline = true;
      events.insert(events.end(), found.begin(), found.end());
    } catch (const Error& e) {
      if (e.code() != Errc::insufficient_baseline) throw;
      last_shortfall = e.what();
    }
  }
  if (any_level_rule && !any_baseline) throw Error(Errc::insufficient_baseline, last_shortfall);
  sort_events(events);
  return events;
}

std::vector<AnomalyEvent> detect_entity_windows(const Store& store, const std::string& entity,
                                                const DetectorConfig& cfg, Window range) {
  std::vector<AnomalyEvent> events;
  const std::int64_t w = cfg.window_s;
  const std::int64_t first = align_down(range.start + w - 1, w);
  if (first + w > range.end) return events;
  for (const auto& rule : monitored_metrics(store.kind())) {
    WindowQuery q;
    q.entity_id = entity;
    q.metric = std::string(rule.metric);
    q.t_start = first - cfg.baseline_windows * w;
    q.t_end = range.end;
    const Series series = store.query_window(q);
    const SeriesKey key{store.kind(), entity, q.metric, rule.rule};
    for (std::int64_t s = first; s + w <= range.end; s += w) {
      try {
        auto found = detect(series, cfg, {s, s + w}, key);
        events.insert(events.end(), found.begin(), found.end());
      } catch (const Error& e) {
        if (e.code() != Errc::insufficient_baseline) throw;
      }
    }
  }
  sort_events(events);
  return events;
}

Forecast forecast_next(std::span<const Point> series, const DetectorConfig& cfg,
                       std::int64_t as_of) {
  const std::int64_t w = cfg.window_s;
  const auto before = in_window(series, {std::numeric_limits<std::int64_t>::min(), as_of});
  if (before.empty()) throw Error(Errc::insufficient_history, "no samples before as_of");
  const std::int64_t span = as_of - before.front().ts;
  const auto n = static_cast<std::size_t>((span + w - 1) / w);
  const auto means = window_means(before, as_of - static_cast<std::int64_t>(n) * w, n, w);

  std::vector<double> present;
  for (const auto& m : means)
    if (m) present.push_back(*m);
  if (present.size() < 2)
    throw Error(Errc::insufficient_history, std::to_string(present.size()) + " complete windows");

  Forecast f;
  if (n >= static_cast<std::size_t>(kSeasonWindows) + 1 && means[n - kSeasonWindows]) {
    f.predicted = *means[n - kSeasonWindows];
    f.seasonal = true;
  } else {
    double level = present.front();
    for (std::size_t i = 1; i < present.size(); ++i)
      level = kEwmaWeight * present[i] + (1.0 - kEwmaWeight) * level;
    f.predicted = level;
  }
  const std::size_t tail = std::min(present.size(), static_cast<std::size_t>(cfg.baseline_windows));
  const std::span<const double> recent(present.data() + present.size() - tail, tail);
  f.uncertainty = mad_of(recent, median_of({recent.begin(), recent.end()}));
  return f;
}

void sort_events(std::vector<AnomalyEvent>& events) {
  std::sort(events.begin(), events.end(), [](const AnomalyEvent& a, const AnomalyEvent& b) {
    return std::tie(a.window_start, a.source, a.entity_id, a.metric, a.kind) <
           std::tie(b.window_start, b.source, b.entity_id, b.metric, b.kind);
  });
}

} // namespace netmon
