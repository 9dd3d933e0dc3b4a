#include "netmon/report.hpp"

#include "netmon/error.hpp"

namespace netmon {

namespace {

// json's get<int64_t>() truncates floats; timestamps must be integers.
std::int64_t get_ts(const json& j, const char* key) {
  const json& v = j.at(key);
  if (!v.is_number_integer()) throw Error(Errc::malformed_payload, std::string(key) + " is not an integer");
  return v.get<std::int64_t>();
}

} // namespace

DbKind db_kind_from_string(const std::string& s) {
  const auto kind = parse_db_kind(s);
  if (!kind) throw Error(Errc::malformed_payload, "unknown db kind '" + s + "'");
  return *kind;
}

json to_json(const AnomalyEvent& e) {
  return {{"source", to_string(e.source)},   {"entity_id", e.entity_id},
          {"metric", e.metric},              {"window_start", e.window_start},
          {"window_end", e.window_end},      {"observed", e.observed},
          {"score", e.score},                {"severity", to_string(e.severity)},
          {"direction", to_string(e.direction)}, {"kind", to_string(e.kind)}};
}

AnomalyEvent event_from_json(const json& j) {
  try {
    AnomalyEvent e;
    e.source = db_kind_from_string(j.at("source").get<std::string>());
    e.entity_id = j.at("entity_id").get<std::string>();
    e.metric = j.at("metric").get<std::string>();
    e.window_start = get_ts(j, "window_start");
    e.window_end = get_ts(j, "window_end");
    e.observed = j.at("observed").get<double>();
    e.score = j.at("score").get<double>();
    const auto severity = j.at("severity").get<std::string>();
    if (severity != "warn" && severity != "critical") throw Error(Errc::malformed_payload, "severity");
    e.severity = severity == "critical" ? Severity::critical : Severity::warn;
    const auto direction = j.at("direction").get<std::string>();
    if (direction != "high" && direction != "low") throw Error(Errc::malformed_payload, "direction");
    e.direction = direction == "high" ? Direction::high : Direction::low;
    const auto kind = j.at("kind").get<std::string>();
    if (kind != "level_shift" && kind != "error_spike") throw Error(Errc::malformed_payload, "kind");
    e.kind = kind == "error_spike" ? EventKind::error_spike : EventKind::level_shift;
    return e;
  } catch (const json::exception& ex) {
    throw Error(Errc::malformed_payload, std::string("anomaly event: ") + ex.what());
  }
}

json to_json(const PatternReport& r) {
  json events = json::array();
  for (const auto& e : r.events) events.push_back(to_json(e));
  return {{"report_id", r.report_id},
          {"agent_id", r.agent_id},
          {"window", {{"start", r.window.start}, {"end", r.window.end}}},
          {"events", std::move(events)},
          {"summary", r.summary},
          {"correlation_keys", r.correlation_keys}};
}

PatternReport report_from_json(const json& j) {
  try {
    PatternReport r;
    r.report_id = j.at("report_id").get<std::string>();
    r.agent_id = j.at("agent_id").get<std::string>();
    r.window = {get_ts(j.at("window"), "start"), get_ts(j.at("window"), "end")};
    for (const auto& e : j.at("events")) r.events.push_back(event_from_json(e));
    r.summary = j.at("summary").get<std::string>();
    r.correlation_keys = j.at("correlation_keys").get<std::vector<std::string>>();
    return r;
  } catch (const json::exception& ex) {
    throw Error(Errc::malformed_payload, std::string("pattern report: ") + ex.what());
  }
}

} // namespace netmon
