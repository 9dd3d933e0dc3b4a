#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "netmon/anomaly.hpp"
#include "netmon/report.hpp"
#include "netmon/tsdb.hpp"

namespace netmon {

// Newest complete window end for a store, or nullopt when it is empty.
std::optional<std::int64_t> store_as_of(const Store& store, const DetectorConfig& cfg);

inline constexpr std::string_view kForecastMetric = "bps_in";
inline constexpr int kSummaryLookbackWindows = 24;

/// One line of the interface overview: last-window rates, anomaly count
/// over the trailing day and the next-window forecast.
struct InterfaceRow {
  std::string entity;
  Window window;
  std::array<std::optional<double>, 6> rates; // rate_metric_names() order
  std::size_t anomalies = 0;
  std::optional<Forecast> forecast;
};

std::vector<InterfaceRow> summarize_interfaces(const Store& store, const DetectorConfig& cfg,
                                               std::int64_t as_of);
json to_json(const InterfaceRow& row);
std::string format_summary(std::span<const InterfaceRow> rows);

struct MetricSeries {
  std::string metric;
  Series points; // per-window means, ts = window start
};

struct InterfaceDiagnosis {
  std::string entity;
  Window window; // newest complete window
  std::vector<WindowStats> stats;
  std::vector<MetricSeries> series; // trailing windows
  std::vector<AnomalyEvent> events; // trailing windows
  std::optional<Forecast> forecast;
};

// Throws Error(unknown_entity).
InterfaceDiagnosis diagnose_interface(const Store& store, const DetectorConfig& cfg,
                                      const std::string& entity, std::int64_t as_of);
json to_json(const InterfaceDiagnosis& d);
std::string format_diagnosis(const InterfaceDiagnosis& d);

// Fixed two-decimal rendering used in human-readable text.
std::string fmt2(double v);

} // namespace netmon
