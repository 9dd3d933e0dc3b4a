// Built-in tools. Each one reads only through the ScopedStore in its context,
// so every access lands in the audit log under the calling agent.
#include <algorithm>

#include "netmon/agents.hpp"
#include "netmon/error.hpp"
#include "netmon/summary.hpp"

namespace netmon {

namespace {

constexpr std::size_t kMaxPoints = 2000;
constexpr std::int64_t kMaxDetectWindows = 24 * 7;

std::optional<std::string> opt_str(const json& args, const char* key) {
  if (!args.contains(key) || args[key].is_null()) return std::nullopt;
  if (!args[key].is_string()) throw Error(Errc::validation, std::string("argument '") + key + "' must be a string");
  return args[key].get<std::string>();
}

std::optional<std::int64_t> opt_int(const json& args, const char* key) {
  if (!args.contains(key) || args[key].is_null()) return std::nullopt;
  if (!args[key].is_number_integer())
    throw Error(Errc::validation, std::string("argument '") + key + "' must be an integer");
  return args[key].get<std::int64_t>();
}

std::string req_str(const json& args, const char* key) {
  auto v = opt_str(args, key);
  if (!v || v->empty()) throw Error(Errc::validation, std::string("missing argument '") + key + "'");
  return *v;
}

std::int64_t as_of_or_throw(const Store& s, const DetectorConfig& cfg) {
  const auto as_of = store_as_of(s, cfg);
  if (!as_of) throw Error(Errc::empty_window, "store '" + s.name() + "' holds no data");
  return *as_of;
}

// Explicit [t_start, t_end) or the trailing `windows` complete windows.
Window resolve_range(const json& args, const Store& s, const DetectorConfig& cfg, std::int64_t windows) {
  const auto t_start = opt_int(args, "t_start");
  const auto t_end = opt_int(args, "t_end");
  Window w;
  if (t_start && t_end) {
    w = {*t_start, *t_end};
  } else {
    const std::int64_t as_of = t_end ? *t_end : as_of_or_throw(s, cfg);
    w = {t_start ? *t_start : as_of - windows * cfg.window_s, as_of};
  }
  if (w.end <= w.start) throw Error(Errc::validation, "t_end must be after t_start");
  return w;
}

void require_entity(const Store& s, const std::string& entity) {
  if (!s.has_entity(entity)) throw Error(Errc::unknown_entity, "unknown entity '" + entity + "' in " + s.name());
}

void require_metric(const Store& s, const std::string& metric) {
  if (!Store::is_metric(s.kind(), metric))
    throw Error(Errc::unknown_metric, "unknown metric '" + metric + "' for " + to_string(s.kind()) + " stores");
}

std::string default_metric(DbKind kind) {
  switch (kind) {
  case DbKind::interface: return "bps_in";
  case DbKind::flow: return "bytes";
  case DbKind::optical: return "rx_power_dbm";
  }
  return "bps_in";
}

json window_json(Window w) { return {{"start", w.start}, {"end", w.end}}; }

std::string describe_event(const AnomalyEvent& e) {
  return std::string(to_string(e.severity)) + " " + e.metric + " " + to_string(e.direction) + " on " +
         e.entity_id + " at " + std::to_string(e.window_start) + ", observed " + fmt2(e.observed) +
         " score " + fmt2(e.score);
}

json schema(std::initializer_list<std::pair<const char*, const char*>> props,
            std::initializer_list<const char*> required = {}) {
  json p = json::object();
  for (const auto& [name, type] : props) p[name] = {{"type", type}};
  json j = {{"type", "object"}, {"properties", std::move(p)}};
  if (required.size()) j["required"] = std::vector<std::string>(required.begin(), required.end());
  return j;
}

json list_entities(const json&, const ToolContext& ctx) {
  const Store& s = ctx.store->read("list_entities");
  const auto entities = s.list_entities();
  return {{"store", s.name()}, {"kind", to_string(s.kind())}, {"count", entities.size()}, {"entities", entities}};
}

json query_window(const json& args, const ToolContext& ctx) {
  const Store& s = ctx.store->read("query_window");
  WindowQuery q;
  q.entity_id = opt_str(args, "entity");
  if (q.entity_id) require_entity(s, *q.entity_id);
  q.metric = opt_str(args, "metric").value_or(default_metric(s.kind()));
  require_metric(s, q.metric);
  const Window w = resolve_range(args, s, ctx.detector, ctx.detector.baseline_windows);
  q.t_start = w.start;
  q.t_end = w.end;
  q.step_s = opt_int(args, "step_s");
  const Series series = s.query_window(q);
  if (series.size() > kMaxPoints)
    throw Error(Errc::validation, std::to_string(series.size()) + " points exceed the limit of " +
                                      std::to_string(kMaxPoints) + "; pass step_s");
  json points = json::array();
  for (const auto& p : series) points.push_back({p.ts, p.value, p.count});
  return {{"entity", q.entity_id ? json(*q.entity_id) : json(nullptr)},
          {"metric", q.metric},
          {"window", window_json(w)},
          {"step_s", q.step_s ? json(*q.step_s) : json(nullptr)},
          {"count", series.size()},
          {"points", std::move(points)}};
}

json window_stats_tool(const json& args, const ToolContext& ctx) {
  const Store& s = ctx.store->read("window_stats");
  const std::string entity = req_str(args, "entity");
  require_entity(s, entity);
  const std::string metric = opt_str(args, "metric").value_or(default_metric(s.kind()));
  require_metric(s, metric);
  const Window w = resolve_range(args, s, ctx.detector, 1);
  const Series series = s.query_window({entity, metric, w.start, w.end, std::nullopt});
  const WindowStats st = window_stats(series, w, entity, metric);
  return {{"entity", entity},       {"metric", metric},         {"window", window_json(w)},
          {"count", st.count},      {"mean", st.mean},          {"median", st.median},
          {"mad", st.mad},          {"min", st.min},            {"max", st.max},
          {"text", entity + " " + metric + " over [" + std::to_string(w.start) + ", " +
                       std::to_string(w.end) + "): mean " + fmt2(st.mean) + ", median " +
                       fmt2(st.median) + ", min " + fmt2(st.min) + ", max " + fmt2(st.max)}};
}

json detect_anomalies(const json& args, const ToolContext& ctx) {
  const Store& s = ctx.store->read("detect_anomalies");
  const auto entity = opt_str(args, "entity");
  if (entity) require_entity(s, *entity);
  const Window range = resolve_range(args, s, ctx.detector, 1);
  if (range.length() / ctx.detector.window_s > kMaxDetectWindows)
    throw Error(Errc::validation, "range spans more than " + std::to_string(kMaxDetectWindows) + " windows");
  const auto entities = entity ? std::vector<std::string>{*entity} : s.list_entities();
  std::vector<AnomalyEvent> events;
  for (const auto& e : entities) {
    auto found = detect_entity_windows(s, e, ctx.detector, range);
    events.insert(events.end(), found.begin(), found.end());
  }
  sort_events(events);
  json list = json::array();
  for (const auto& e : events) list.push_back(to_json(e));
  std::string text;
  const std::string span = "[" + std::to_string(range.start) + ", " + std::to_string(range.end) + ")";
  if (events.empty()) {
    text = "No anomalies in " + span + " across " + std::to_string(entities.size()) + " entities.";
  } else {
    text = std::to_string(events.size()) + " anomalies in " + span + ":";
    for (const auto& e : events) text += "\n" + describe_event(e);
  }
  return {{"window", window_json(range)},
          {"entities_checked", entities.size()},
          {"count", events.size()},
          {"events", std::move(list)},
          {"text", std::move(text)}};
}

json forecast_tool(const json& args, const ToolContext& ctx) {
  const Store& s = ctx.store->read("forecast");
  const std::string entity = req_str(args, "entity");
  require_entity(s, entity);
  const std::string metric = opt_str(args, "metric").value_or(default_metric(s.kind()));
  require_metric(s, metric);
  const std::int64_t as_of = opt_int(args, "as_of").value_or(as_of_or_throw(s, ctx.detector));
  const std::int64_t w = ctx.detector.window_s;
  const auto lookback = static_cast<std::int64_t>(kSeasonWindows + ctx.detector.baseline_windows) * w;
  const Series series = s.query_window({entity, metric, as_of - lookback, as_of, std::nullopt});
  const Forecast f = forecast_next(series, ctx.detector, as_of);
  return {{"entity", entity},
          {"metric", metric},
          {"window", window_json({as_of, as_of + w})},
          {"predicted", f.predicted},
          {"uncertainty", f.uncertainty},
          {"method", f.seasonal ? "seasonal_naive" : "ewma"},
          {"text", entity + " " + metric + " forecast for [" + std::to_string(as_of) + ", " +
                       std::to_string(as_of + w) + "): " + fmt2(f.predicted) + " +/- " + fmt2(f.uncertainty)}};
}

json summarize_tool(const json&, const ToolContext& ctx) {
  const Store& s = ctx.store->read("summarize_interfaces");
  const auto as_of = store_as_of(s, ctx.detector);
  std::vector<InterfaceRow> rows;
  if (as_of) rows = summarize_interfaces(s, ctx.detector, *as_of);
  json list = json::array();
  for (const auto& r : rows) list.push_back(to_json(r));
  json window = as_of ? window_json({*as_of - ctx.detector.window_s, *as_of}) : json(nullptr);
  return {{"window", std::move(window)}, {"count", rows.size()}, {"rows", std::move(list)}, {"text", format_summary(rows)}};
}

json diagnose_tool(const json& args, const ToolContext& ctx) {
  const Store& s = ctx.store->read("diagnose_interface");
  const std::string entity = req_str(args, "entity");
  const auto d = diagnose_interface(s, ctx.detector, entity, as_of_or_throw(s, ctx.detector));
  json j = to_json(d);
  j["text"] = format_diagnosis(d);
  return j;
}

} // namespace

ToolRegistry ToolRegistry::with_defaults() {
  ToolRegistry r;
  r.add({{"list_entities", "List every entity id in this agent's database.", schema({})},
         std::nullopt, true, list_entities});
  r.add({{"query_window", "Metric series for a time range, optionally resampled to step_s buckets.",
          schema({{"entity", "string"}, {"metric", "string"}, {"t_start", "integer"}, {"t_end", "integer"},
                  {"step_s", "integer"}},
                 {"metric"})},
         std::nullopt, true, query_window});
  r.add({{"window_stats", "Count, mean, median, MAD, min and max of one metric in a window.",
          schema({{"entity", "string"}, {"metric", "string"}, {"t_start", "integer"}, {"t_end", "integer"}},
                 {"entity"})},
         std::nullopt, true, window_stats_tool});
  r.add({{"detect_anomalies", "Anomaly events per window; defaults to the newest complete window.",
          schema({{"entity", "string"}, {"t_start", "integer"}, {"t_end", "integer"}})},
         std::nullopt, true, detect_anomalies});
  r.add({{"forecast", "Predicted mean of the next window for one metric.",
          schema({{"entity", "string"}, {"metric", "string"}, {"as_of", "integer"}}, {"entity"})},
         std::nullopt, true, forecast_tool});
  r.add({{"summarize_interfaces", "Last-window rates, 24 h anomaly count and forecast for every interface.",
          schema({})},
         DbKind::interface, true, summarize_tool});
  r.add({{"diagnose_interface", "Statistics, trailing series, events and forecast for one interface.",
          schema({{"entity", "string"}}, {"entity"})},
         DbKind::interface, true, diagnose_tool});
  return r;
}

void ToolRegistry::add(ToolDef def) {
  if (def.schema.name.empty()) throw Error(Errc::config, "tool without a name");
  if (find(def.schema.name)) throw Error(Errc::config, "duplicate tool '" + def.schema.name + "'");
  tools_.push_back(std::move(def));
}

const ToolDef* ToolRegistry::find(std::string_view name) const {
  for (const auto& t : tools_)
    if (t.schema.name == name) return &t;
  return nullptr;
}

std::vector<ToolSchema> ToolRegistry::schemas(std::span<const std::string> names) const {
  std::vector<ToolSchema> out;
  for (const auto& n : names)
    if (const auto* t = find(n)) out.push_back(t->schema);
  return out;
}

std::vector<std::string> ToolRegistry::names_for(DbKind kind) const {
  std::vector<std::string> out;
  for (const auto& t : tools_)
    if (t.needs_store && (!t.only_for || *t.only_for == kind)) out.push_back(t.schema.name);
  return out;
}

} // namespace netmon
