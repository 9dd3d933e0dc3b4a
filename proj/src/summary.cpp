#include "netmon/summary.hpp"

#include <cstdio>

#include "netmon/error.hpp"

namespace netmon {

namespace {

void require_interface(const Store& store) {
  if (store.kind() != DbKind::interface)
    throw Error(Errc::kind_mismatch, "store '" + store.name() + "' is not an interface store");
}

std::optional<double> window_mean(const Store& store, const std::string& entity,
                                  std::string_view metric, Window w) {
  WindowQuery q;
  q.entity_id = entity;
  q.metric = std::string(metric);
  q.t_start = w.start;
  q.t_end = w.end;
  q.step_s = w.length();
  const Series s = store.query_window(q);
  if (s.empty()) return std::nullopt;
  return s.front().value;
}

std::optional<Forecast> try_forecast(const Store& store, const DetectorConfig& cfg,
                                     const std::string& entity, std::int64_t as_of) {
  WindowQuery q;
  q.entity_id = entity;
  q.metric = std::string(kForecastMetric);
  q.t_start = as_of - static_cast<std::int64_t>(kSeasonWindows + cfg.baseline_windows) * cfg.window_s;
  q.t_end = as_of;
  try {
    return forecast_next(store.query_window(q), cfg, as_of);
  } catch (const Error& e) {
    if (e.code() != Errc::insufficient_history) throw;
    return std::nullopt;
  }
}

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json forecast_json(const std::optional<Forecast>& f) {
  if (!f) return nullptr;
  return {{"metric", kForecastMetric},
          {"predicted", f->predicted},
          {"uncertainty", f->uncertainty},
          {"method", f->seasonal ? "seasonal_naive" : "ewma"}};
}

std::string fmt_opt(const std::optional<double>& v) { return v ? fmt2(*v) : "n/a"; }

} // namespace

std::string fmt2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::optional<std::int64_t> store_as_of(const Store& store, const DetectorConfig& cfg) {
  const auto cov = store.coverage();
  if (!cov) return std::nullopt;
  return complete_until(cov->last_ts, cfg.window_s);
}

std::vector<InterfaceRow> summarize_interfaces(const Store& store, const DetectorConfig& cfg,
                                               std::int64_t as_of) {
  require_interface(store);
  const Window last{as_of - cfg.window_s, as_of};
  const Window lookback{as_of - kSummaryLookbackWindows * cfg.window_s, as_of};
  std::vector<InterfaceRow> rows;
  for (const auto& entity : store.list_entities()) {
    InterfaceRow row;
    row.entity = entity;
    row.window = last;
    const auto names = rate_metric_names();
    for (std::size_t i = 0; i < names.size(); ++i) row.rates[i] = window_mean(store, entity, names[i], last);
    row.anomalies = detect_entity_windows(store, entity, cfg, lookback).size();
    row.forecast = try_forecast(store, cfg, entity, as_of);
    rows.push_back(std::move(row));
  }
  return rows;
}

json to_json(const InterfaceRow& row) {
  json j = {{"entity", row.entity}, {"window", {{"start", row.window.start}, {"end", row.window.end}}}};
  const auto names = rate_metric_names();
  for (std::size_t i = 0; i < names.size(); ++i) j[std::string(names[i])] = opt(row.rates[i]);
  j["anomalies_24h"] = row.anomalies;
  j["forecast"] = forecast_json(row.forecast);
  return j;
}

std::string format_summary(std::span<const InterfaceRow> rows) {
  if (rows.empty()) return "No interfaces in scope.";
  std::string out = std::to_string(rows.size()) + " interfaces, window [" +
                    std::to_string(rows.front().window.start) + ", " +
                    std::to_string(rows.front().window.end) + "):";
  const auto names = rate_metric_names();
  for (const auto& row : rows) {
    out += "\n" + row.entity + ":";
    for (std::size_t i = 0; i < names.size(); ++i)
      out += " " + std::string(names[i]) + " " + fmt_opt(row.rates[i]);
    out += " anomalies_24h " + std::to_string(row.anomalies);
    out += " forecast_bps_in " + (row.forecast ? fmt2(row.forecast->predicted) : std::string("n/a"));
  }
  return out;
}

InterfaceDiagnosis diagnose_interface(const Store& store, const DetectorConfig& cfg,
                                      const std::string& entity, std::int64_t as_of) {
  require_interface(store);
  if (!store.has_entity(entity)) throw Error(Errc::unknown_entity, "unknown interface '" + entity + "'");
  InterfaceDiagnosis d;
  d.entity = entity;
  d.window = {as_of - cfg.window_s, as_of};
  const Window lookback{as_of - kSummaryLookbackWindows * cfg.window_s, as_of};
  for (const auto name : rate_metric_names()) {
    WindowQuery q;
    q.entity_id = entity;
    q.metric = std::string(name);
    q.t_start = lookback.start;
    q.t_end = lookback.end;
    const Series raw = store.query_window(q);
    try {
      d.stats.push_back(window_stats(raw, d.window, entity, q.metric));
    } catch (const Error& e) {
      if (e.code() != Errc::empty_window) throw;
    }
    q.step_s = cfg.window_s;
    d.series.push_back({q.metric, store.query_window(q)});
  }
  d.events = detect_entity_windows(store, entity, cfg, lookback);
  d.forecast = try_forecast(store, cfg, entity, as_of);
  return d;
}

json to_json(const InterfaceDiagnosis& d) {
  json stats = json::array();
  for (const auto& s : d.stats)
    stats.push_back({{"metric", s.metric}, {"count", s.count}, {"mean", s.mean}, {"median", s.median},
                     {"mad", s.mad}, {"min", s.min}, {"max", s.max}});
  json series = json::array();
  for (const auto& m : d.series) {
    json pts = json::array();
    for (const auto& p : m.points) pts.push_back({p.ts, p.value, p.count});
    series.push_back({{"metric", m.metric}, {"points", std::move(pts)}});
  }
  json events = json::array();
  for (const auto& e : d.events) events.push_back(to_json(e));
  return {{"entity", d.entity},
          {"window", {{"start", d.window.start}, {"end", d.window.end}}},
          {"stats", std::move(stats)},
          {"series", std::move(series)},
          {"events", std::move(events)},
          {"forecast", forecast_json(d.forecast)}};
}

std::string format_diagnosis(const InterfaceDiagnosis& d) {
  std::string out = d.entity + " in window [" + std::to_string(d.window.start) + ", " +
                    std::to_string(d.window.end) + "):";
  for (const auto& s : d.stats)
    out += "\n  " + s.metric + " mean " + fmt2(s.mean) + " median " + fmt2(s.median) + " min " +
           fmt2(s.min) + " max " + fmt2(s.max);
  if (d.events.empty()) {
    out += "\nNo anomalies in the last " + std::to_string(kSummaryLookbackWindows) + " windows.";
  } else {
    out += "\n" + std::to_string(d.events.size()) + " anomalies in the last " +
           std::to_string(kSummaryLookbackWindows) + " windows:";
    for (const auto& e : d.events)
      out += "\n  " + std::string(to_string(e.severity)) + " " + e.metric + " " + to_string(e.direction) +
             " at " + std::to_string(e.window_start) + " observed " + fmt2(e.observed) + " score " +
             fmt2(e.score);
  }
  if (d.forecast) out += "\nNext-window bps_in forecast " + fmt2(d.forecast->predicted);
  return out;
}

} // namespace netmon
