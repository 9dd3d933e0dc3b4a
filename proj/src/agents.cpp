#include "netmon/agents.hpp"

#include <algorithm>
#include <cctype>
#include <ctime>
#include <future>
#include <regex>
#include <set>

#include <zlib.h>

#include "netmon/error.hpp"

namespace netmon {

namespace {

constexpr std::size_t kRecentReportCap = 256;

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::string digest_of(const std::string& text) {
  const auto crc = crc32(crc32(0L, Z_NULL, 0), reinterpret_cast<const Bytef*>(text.data()),
                         static_cast<uInt>(text.size()));
  char buf[16];
  std::snprintf(buf, sizeof buf, "%08lx", static_cast<unsigned long>(crc));
  return buf;
}

AgentPlan::Step make_step(std::string agent_id, std::string question) {
  AgentPlan::Step s;
  s.agent_id = std::move(agent_id);
  s.question = std::move(question);
  return s;
}

std::int64_t now_s() { return static_cast<std::int64_t>(std::time(nullptr)); }

} // namespace

// ---------------------------------------------------------------------------
// AuditLog / ScopedStore

AuditLog::AuditLog(const std::filesystem::path& path)
    : sink_(std::make_unique<std::ofstream>(path, std::ios::app)) {
  if (!*sink_) throw Error(Errc::storage_io_failure, "cannot open audit log " + path.string());
}

std::uint64_t AuditLog::append(json record) {
  std::lock_guard lock(mutex_);
  const auto seq = next_seq_++;
  record["seq"] = seq;
  if (sink_) {
    *sink_ << record.dump() << '\n';
    sink_->flush();
  }
  entries_.push_back(std::move(record));
  return seq;
}

std::vector<json> AuditLog::entries() const {
  std::lock_guard lock(mutex_);
  return entries_;
}

std::vector<json> AuditLog::entries_of_type(std::string_view type) const {
  std::lock_guard lock(mutex_);
  std::vector<json> out;
  for (const auto& e : entries_)
    if (e.value("type", "") == type) out.push_back(e);
  return out;
}

std::size_t AuditLog::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

ScopedStore::ScopedStore(std::string agent_id, std::shared_ptr<const Store> store, AuditLog& audit)
    : agent_id_(std::move(agent_id)), store_(std::move(store)), audit_(&audit) {
  if (!store_) throw Error(Errc::config, "scoped store without a store");
}

const Store& ScopedStore::read(std::string_view op) const {
  audit_->append({{"type", "store_read"}, {"agent", agent_id_}, {"store", store_->name()}, {"op", op}});
  return *store_;
}

// ---------------------------------------------------------------------------
// Messages and plans

const char* to_string(MessageKind k) noexcept {
  switch (k) {
  case MessageKind::report: return "report";
  case MessageKind::ask: return "ask";
  case MessageKind::answer: return "answer";
  case MessageKind::plan: return "plan";
  case MessageKind::result: return "result";
  }
  return "?";
}

std::optional<MessageKind> parse_message_kind(std::string_view s) noexcept {
  for (auto k : {MessageKind::report, MessageKind::ask, MessageKind::answer, MessageKind::plan, MessageKind::result})
    if (s == to_string(k)) return k;
  return std::nullopt;
}

json to_json(const AgentMessage& m) {
  return {{"msg_id", m.msg_id},   {"sender", m.sender}, {"recipient", m.recipient}, {"kind", to_string(m.kind)},
          {"payload", m.payload}, {"ts", m.ts},         {"reply_to", m.reply_to}};
}

const char* to_string(StepStatus s) noexcept {
  switch (s) {
  case StepStatus::pending: return "pending";
  case StepStatus::done: return "done";
  case StepStatus::failed: return "failed";
  }
  return "?";
}

bool AgentPlan::complete() const noexcept {
  return std::all_of(steps.begin(), steps.end(), [](const Step& s) { return s.status != StepStatus::pending; });
}

json to_json(const AgentPlan& plan) {
  json steps = json::array();
  for (const auto& s : plan.steps)
    steps.push_back({{"agent_id", s.agent_id}, {"question", s.question}, {"status", to_string(s.status)}});
  return {{"plan_id", plan.plan_id}, {"query", plan.query}, {"steps", std::move(steps)}};
}

json to_json(const TranscriptEntry& e) {
  return {{"step", e.step},
          {"agent_id", e.agent_id},
          {"tool", e.call.tool_name},
          {"call_id", e.call.call_id},
          {"arguments", e.call.arguments},
          {"store", e.store},
          {"ok", e.result.ok},
          {"denied", e.denied},
          {"digest", e.digest},
          {"result", e.result.ok ? e.result.value : json(e.result.error)}};
}

// ---------------------------------------------------------------------------
// Agent

bool should_escalate(std::span<const AnomalyEvent> events) {
  std::map<std::string, int> warns;
  for (const auto& e : events) {
    if (e.severity == Severity::critical) return true;
    if (++warns[e.entity_id] >= 3) return true;
  }
  return false;
}

Agent::Agent(AgentSpec spec, std::shared_ptr<const Store> store, const ToolRegistry& tools,
             ModelBackend& backend, DetectorConfig detector, const TopologyMap& topology, AuditLog& audit)
    : spec_(std::move(spec)), tools_(&tools), backend_(&backend), detector_(detector),
      topology_(&topology), audit_(&audit) {
  detector_.validate();
  if (spec_.agent_id.empty()) throw Error(Errc::config, "agent without an id");
  if (store) {
    if (store->name() != spec_.scope)
      throw Error(Errc::config, "agent " + spec_.agent_id + " scope '" + spec_.scope + "' does not name store '" +
                                    store->name() + "'");
    store_.emplace(spec_.agent_id, std::move(store), audit);
  } else if (!spec_.scope.empty()) {
    throw Error(Errc::config, "agent " + spec_.agent_id + " has a scope but no store");
  }
}

std::string Agent::scope_schema() const {
  if (!store_) return "Scope: none. You coordinate other agents and never read a database.";
  const Store& s = store_->read("schema");
  const auto entities = s.list_entities();
  std::string out = "Database '" + s.name() + "' (" + to_string(s.kind()) + " records).\nEntities: " +
                    std::to_string(entities.size());
  const std::size_t shown = std::min<std::size_t>(entities.size(), 12);
  for (std::size_t i = 0; i < shown; ++i) out += (i ? ", " : " (") + entities[i];
  if (shown) out += entities.size() > shown ? ", ...)" : ")";
  out += "\nMetrics:";
  for (const auto m : Store::metrics(s.kind())) out += " " + std::string(m);
  if (const auto cov = s.coverage())
    out += "\nTime coverage: [" + std::to_string(cov->first_ts) + ", " + std::to_string(cov->last_ts) + "]";
  else
    out += "\nTime coverage: empty";
  out += "\nWindow: " + std::to_string(detector_.window_s) + " s\nTools:";
  for (const auto& t : spec_.tool_whitelist) out += " " + t;
  return out;
}

ToolResult Agent::execute(const ToolCall& call, bool& denied) {
  ToolResult r{call.call_id, call.tool_name, true, nullptr, {}};
  denied = false;
  const auto& wl = spec_.tool_whitelist;
  const ToolDef* def = tools_->find(call.tool_name);
  const bool allowed = std::find(wl.begin(), wl.end(), call.tool_name) != wl.end();
  if (!def || !allowed || (def->needs_store && !store_) ||
      (def->only_for && store_ && *def->only_for != store_->kind())) {
    denied = true;
    r.ok = false;
    r.error = std::string(to_string(Errc::tool_denied)) + ": tool '" + call.tool_name + "' is not available to " +
              spec_.agent_id;
    return r;
  }
  try {
    if (!call.arguments.is_object()) throw Error(Errc::validation, "arguments must be an object");
    const ToolContext ctx{spec_, store_ ? &*store_ : nullptr, detector_, *topology_};
    r.value = def->handler(call.arguments, ctx);
  } catch (const Error& e) {
    r.ok = false;
    r.error = e.what();
  } catch (const json::exception& e) {
    r.ok = false;
    r.error = std::string("validation: ") + e.what();
  }
  return r;
}

QueryResult Agent::handle_query(std::string_view question, std::span<const ChatTurn> history, int step_budget) {
  const std::string q = trim(question);
  if (q.empty()) throw Error(Errc::validation, "empty question");
  if (step_budget < 1) throw Error(Errc::validation, "step budget must be positive");

  QueryResult out;
  out.turns = assemble_prompt(spec_.role_prompt, scope_schema(), history, q);
  const auto schemas = tools_->schemas(spec_.tool_whitelist);
  std::optional<std::size_t> last_ok; // index into out.transcript, which reallocates

  for (int step = 1; step <= step_budget; ++step) {
    out.steps = step;
    audit_->append({{"type", "model_call"}, {"agent", spec_.agent_id}, {"step", step}});
    ChatTurn reply = backend_->complete(out.turns, schemas);
    reply.validate();
    if (reply.role != Role::assistant) throw Error(Errc::malformed_response, "backend returned a non-assistant turn");
    out.turns.push_back(reply);
    if (reply.tool_calls.empty()) {
      out.answer = reply.content;
      return out;
    }
    for (const auto& call : reply.tool_calls) {
      TranscriptEntry entry;
      entry.step = step;
      entry.agent_id = spec_.agent_id;
      entry.call = call;
      entry.result = execute(call, entry.denied);
      if (!entry.denied && store_) entry.store = store_->scope();
      entry.digest = digest_of(serialize_tool_result(entry.result));
      audit_->append({{"type", entry.denied ? "tool_denied" : "tool_call"},
                      {"agent", spec_.agent_id},
                      {"tool", call.tool_name},
                      {"call_id", call.call_id},
                      {"arguments", call.arguments},
                      {"store", entry.store},
                      {"ok", entry.result.ok},
                      {"digest", entry.digest}});
      if (entry.result.ok && (call.tool_name == "detect_anomalies" || call.tool_name == "diagnose_interface")) {
        out.consulted_detector = true;
        out.findings += entry.result.value.value("events", json::array()).size();
      }
      out.turns.push_back(ChatTurn::tool(entry.result));
      out.transcript.push_back(std::move(entry));
      if (out.transcript.back().result.ok) last_ok = out.transcript.size() - 1;
    }
  }

  // Budget spent with the model still asking for tools: best effort from the
  // newest successful observation.
  out.partial = true;
  out.answer = "Partial answer: step budget of " + std::to_string(step_budget) + " exhausted after " +
               std::to_string(out.transcript.size()) + " tool calls.";
  if (last_ok) {
    const ToolResult& last = out.transcript[*last_ok].result;
    const auto& v = last.value;
    std::string detail = v.is_object() && v.contains("text") && v["text"].is_string() ? v["text"].get<std::string>()
                                                                                       : v.dump();
    if (detail.size() > 1500) detail = detail.substr(0, 1500) + "...";
    out.answer += " Last result from " + last.tool_name + ": " + detail;
  }
  audit_->append({{"type", "step_budget_exhausted"}, {"agent", spec_.agent_id}, {"budget", step_budget}});
  return out;
}

std::optional<PatternReport> Agent::tick(Window window) {
  if (!store_) return std::nullopt;
  const Store& s = store_->read("tick");
  const auto entities = s.list_entities();
  std::vector<AnomalyEvent> events;
  std::size_t skipped = 0;
  std::string shortfall;
  for (const auto& entity : entities) {
    try {
      auto found = detect_entity(s, entity, detector_, window);
      events.insert(events.end(), found.begin(), found.end());
    } catch (const Error& e) {
      if (e.code() != Errc::insufficient_baseline) throw;
      ++skipped;
      shortfall = e.what();
    }
  }
  if (!entities.empty() && skipped == entities.size()) throw Error(Errc::insufficient_baseline, shortfall);
  if (!should_escalate(events)) return std::nullopt;
  sort_events(events);

  PatternReport r;
  r.report_id = spec_.agent_id + "-" + std::to_string(window.start);
  r.agent_id = spec_.agent_id;
  r.window = window;
  std::set<std::string> keys;
  r.summary = spec_.agent_id + ": " + std::to_string(events.size()) + " events in [" + std::to_string(window.start) +
              ", " + std::to_string(window.end) + ")";
  for (const auto& e : events) {
    for (auto& k : topology_->correlation_keys(e.entity_id)) keys.insert(std::move(k));
    r.summary += "; " + std::string(to_string(e.severity)) + " " + e.metric + " " + to_string(e.direction) + " on " +
                 e.entity_id + " (score " + std::to_string(e.score) + ")";
  }
  if (r.summary.size() > kMaxSummaryChars) r.summary = r.summary.substr(0, kMaxSummaryChars - 3) + "...";
  r.events = std::move(events);
  r.correlation_keys.assign(keys.begin(), keys.end());
  return r;
}

// ---------------------------------------------------------------------------
// Isolation

namespace {

const std::set<std::string, std::less<>>& raw_field_names() {
  static const std::set<std::string, std::less<>> names = {
      "ts", "timestamp", "interface_id", "if",       "pkts_in",  "pkts_out", "octets_in",    "octets_out",
      "errs_in",   "errs_out",     "speed",    "speed_bps", "descr",   "start_ts",     "end_ts",
      "src_addr",  "dst_addr",     "src_port", "dst_port", "proto",    "bytes",        "packets",
      "port",      "port_id",      "tx_power_dbm", "rx_power_dbm"};
  return names;
}

const std::regex& raw_line_pattern() {
  static const std::regex re(R"(kind=(iface|flow|optical)\b)");
  return re;
}

// Finds anything shaped like a raw record: an object carrying two or more
// record field names, or text holding a telemetry line.
std::optional<std::string> find_raw(const json& j, const std::string& path) {
  if (j.is_string()) {
    if (std::regex_search(j.get_ref<const std::string&>(), raw_line_pattern()))
      return "raw telemetry line at " + path;
    return std::nullopt;
  }
  if (j.is_object()) {
    int hits = 0;
    for (const auto& [k, v] : j.items()) {
      if (raw_field_names().count(k)) ++hits;
      if (auto r = find_raw(v, path + "." + k)) return r;
    }
    if (hits >= 2) return "raw record object at " + path;
    return std::nullopt;
  }
  if (j.is_array()) {
    for (std::size_t i = 0; i < j.size(); ++i)
      if (auto r = find_raw(j[i], path + "[" + std::to_string(i) + "]")) return r;
  }
  return std::nullopt;
}

struct Field {
  const char* name;
  bool required;
};

// Exact key set: every required key present, nothing else.
std::optional<std::string> check_keys(const json& j, std::initializer_list<Field> fields, const std::string& what) {
  if (!j.is_object()) return what + " is not an object";
  for (const auto& f : fields)
    if (f.required && !j.contains(f.name)) return what + " lacks '" + f.name + "'";
  for (const auto& [k, v] : j.items()) {
    const bool known = std::any_of(fields.begin(), fields.end(), [&](const Field& f) { return k == f.name; });
    if (!known) return what + " has unexpected field '" + k + "'";
  }
  return std::nullopt;
}

std::optional<std::string> check_report(const json& p, const std::string& sender) {
  if (auto e = check_keys(p, {{"report_id", true}, {"agent_id", true}, {"window", true}, {"events", true},
                              {"summary", true}, {"correlation_keys", true}},
                          "report"))
    return e;
  if (auto e = check_keys(p["window"], {{"start", true}, {"end", true}}, "report window")) return e;
  if (!p["events"].is_array()) return "report events is not an array";
  for (const auto& ev : p["events"])
    if (auto e = check_keys(ev, {{"source", true}, {"entity_id", true}, {"metric", true}, {"window_start", true},
                                 {"window_end", true}, {"observed", true}, {"score", true}, {"severity", true},
                                 {"direction", true}, {"kind", true}},
                            "report event"))
      return e;
  try {
    const PatternReport r = report_from_json(p);
    if (r.agent_id != sender) return "report agent_id differs from sender";
    if (r.summary.size() > kMaxSummaryChars) return "report summary too long";
  } catch (const Error& e) {
    return std::string("report payload: ") + e.what();
  }
  return std::nullopt;
}

std::optional<std::string> check_ask(const json& p) {
  if (auto e = check_keys(p, {{"question", true}, {"history", false}}, "ask")) return e;
  if (!p["question"].is_string() || trim(p["question"].get<std::string>()).empty()) return "ask question is not text";
  if (p.contains("history")) {
    if (!p["history"].is_array()) return "ask history is not an array";
    for (const auto& t : p["history"]) {
      if (auto e = check_keys(t, {{"role", true}, {"content", true}}, "ask history turn")) return e;
      if (!t["role"].is_string() || !t["content"].is_string()) return "ask history turn is not text";
      const auto role = t["role"].get<std::string>();
      if (role != "user" && role != "assistant") return "ask history role '" + role + "'";
    }
  }
  return std::nullopt;
}

std::optional<std::string> check_answer(const json& p, const std::string& sender, const std::string& scope) {
  if (auto e = check_keys(p, {{"answer", true}, {"partial", true}, {"findings", true}, {"evidence", true}}, "answer"))
    return e;
  if (!p["answer"].is_string()) return "answer text is not a string";
  if (!p["partial"].is_boolean()) return "answer partial is not a boolean";
  if (!p["findings"].is_number_unsigned()) return "answer findings is not a count";
  if (!p["evidence"].is_array()) return "answer evidence is not an array";
  for (const auto& ev : p["evidence"]) {
    if (auto e = check_keys(ev, {{"step", true}, {"agent_id", true}, {"tool", true}, {"call_id", true},
                                 {"arguments", true}, {"store", true}, {"ok", true}, {"denied", true},
                                 {"digest", true}, {"result", true}},
                            "evidence"))
      return e;
    if (!ev["store"].is_string() || !ev["agent_id"].is_string() || !ev["tool"].is_string() ||
        !ev["call_id"].is_string() || !ev["digest"].is_string())
      return "evidence fields are not text";
    if (!ev["step"].is_number_integer() || ev["step"].get<std::int64_t>() < 1) return "evidence step is not a step number";
    if (!ev["ok"].is_boolean() || !ev["denied"].is_boolean()) return "evidence flags are not booleans";
    if (!ev["arguments"].is_object()) return "evidence arguments is not an object";
    if (ev["agent_id"].get<std::string>() != sender) return "evidence attributed to another agent";
    const auto store = ev["store"].get<std::string>();
    if (!store.empty() && store != scope) return "evidence reads store '" + store + "' outside scope '" + scope + "'";
  }
  return std::nullopt;
}

std::optional<std::string> check_plan(const json& p, const ScopeDirectory& scopes) {
  if (auto e = check_keys(p, {{"plan_id", true}, {"query", true}, {"steps", true}}, "plan")) return e;
  if (!p["plan_id"].is_string() || !p["query"].is_string()) return "plan fields are not text";
  if (!p["steps"].is_array()) return "plan steps is not an array";
  for (const auto& s : p["steps"]) {
    if (auto e = check_keys(s, {{"agent_id", true}, {"question", true}, {"status", true}}, "plan step")) return e;
    if (!s["agent_id"].is_string() || !s["question"].is_string() || !s["status"].is_string())
      return "plan step fields are not text";
    const auto status = s["status"].get<std::string>();
    if (status != "pending" && status != "done" && status != "failed") return "plan step status '" + status + "'";
    if (!scopes.scope_of.count(s["agent_id"].get<std::string>())) return "plan step targets an unknown agent";
  }
  return std::nullopt;
}

// Who may send what to whom: store agents report and answer, the
// coordinator asks, plans and publishes results.
std::optional<std::string> check_direction(MessageKind kind, bool from_coordinator, bool broadcast,
                                           bool to_coordinator) {
  switch (kind) {
  case MessageKind::report:
    if (from_coordinator) return "reports come from store agents";
    if (!broadcast && !to_coordinator) return "reports go to the coordinator or everyone";
    break;
  case MessageKind::ask:
    if (!from_coordinator) return "only the coordinator asks";
    if (broadcast || to_coordinator) return "asks go to one store agent";
    break;
  case MessageKind::answer:
    if (from_coordinator || !to_coordinator) return "answers go from a store agent to the coordinator";
    break;
  case MessageKind::plan:
  case MessageKind::result:
    if (!from_coordinator) return std::string(to_string(kind)) + " messages come from the coordinator";
    break;
  }
  return std::nullopt;
}

} // namespace

IsolationVerdict enforce_isolation(const AgentMessage& msg, const ScopeDirectory& scopes) {
  auto fail = [](std::string why) { return IsolationVerdict{false, std::move(why)}; };
  const auto sender = scopes.scope_of.find(msg.sender);
  if (sender == scopes.scope_of.end()) return fail("unknown sender '" + msg.sender + "'");
  if (msg.recipient != kBroadcast) {
    if (!scopes.scope_of.count(msg.recipient)) return fail("unknown recipient '" + msg.recipient + "'");
    if (msg.recipient == msg.sender) return fail("sender equals recipient");
  }
  const bool broadcast = msg.recipient == kBroadcast;
  const bool to_coordinator = !broadcast && scopes.scope_of.at(msg.recipient).empty();
  if (auto d = check_direction(msg.kind, sender->second.empty(), broadcast, to_coordinator)) return fail(*d);
  std::optional<std::string> problem;
  switch (msg.kind) {
  case MessageKind::report: problem = check_report(msg.payload, msg.sender); break;
  case MessageKind::ask: problem = check_ask(msg.payload); break;
  case MessageKind::answer: problem = check_answer(msg.payload, msg.sender, sender->second); break;
  case MessageKind::plan: problem = check_plan(msg.payload, scopes); break;
  case MessageKind::result:
    problem = check_keys(msg.payload, {{"text", true}}, "result");
    if (!problem && !msg.payload["text"].is_string()) problem = "result text is not a string";
    break;
  }
  if (problem) return fail(*problem);
  if (auto raw = find_raw(msg.payload, "payload")) return fail(*raw);
  return {};
}

MessageBus::MessageBus(const ScopeDirectory& scopes, AuditLog& audit) : scopes_(&scopes), audit_(&audit) {}

IsolationVerdict MessageBus::send(AgentMessage msg) {
  std::lock_guard lock(mutex_);
  msg.msg_id = next_id_++;
  const IsolationVerdict v = enforce_isolation(msg, *scopes_);
  json rec = {{"type", "message"},
              {"msg_id", msg.msg_id},
              {"sender", msg.sender},
              {"recipient", msg.recipient},
              {"kind", to_string(msg.kind)},
              {"verdict", v.pass ? "pass" : "violation"}};
  if (!v.pass) rec["reason"] = v.reason;
  audit_->append(std::move(rec));
  if (!v.pass) return v;
  if (msg.recipient == kBroadcast) {
    for (const auto& [id, scope] : scopes_->scope_of)
      if (id != msg.sender) inboxes_[id].push_back(msg);
  } else {
    inboxes_[msg.recipient].push_back(msg);
  }
  log_.push_back(std::move(msg));
  return v;
}

std::vector<AgentMessage> MessageBus::drain(const std::string& agent_id) {
  std::lock_guard lock(mutex_);
  auto& q = inboxes_[agent_id];
  std::vector<AgentMessage> out(std::make_move_iterator(q.begin()), std::make_move_iterator(q.end()));
  q.clear();
  return out;
}

std::vector<AgentMessage> MessageBus::history() const {
  std::lock_guard lock(mutex_);
  return log_;
}

// ---------------------------------------------------------------------------
// Runtime

namespace {

const char* const kCoordinatorId = "coordinator";

std::string default_role_prompt(DbKind kind, const std::string& scope) {
  return std::string("You are the ") + to_string(kind) + " monitoring agent. You may only read the '" + scope +
         "' database through your tools. Follow three stages: monitor the data, identify anomalous segments, "
         "then propose a solution. Quote figures exactly as the tools return them.";
}

const std::vector<std::string>& vocabulary(DbKind kind) {
  static const std::vector<std::string> iface = {
      "interface", "interfaces", "iface", "eth", "traffic", "pps", "bps", "packet", "packets", "octet", "octets",
      "throughput", "bandwidth", "error", "errors", "errs", "eps", "utilization", "utilisation", "speed", "link",
      "links", "rate", "rates", "flap", "flapping", "congestion", "drops"};
  static const std::vector<std::string> flow = {"flow",   "flows",    "conversation", "conversations", "talker",
                                                "talkers", "source",  "destination",  "address",       "addresses",
                                                "src",    "dst",      "protocol",     "volume",        "netflow"};
  static const std::vector<std::string> optical = {"optical", "optic", "optics", "fiber", "fibre", "light", "power",
                                                   "dbm", "rx", "tx", "transceiver", "sfp", "laser", "port",
                                                   "ports", "signal"};
  switch (kind) {
  case DbKind::interface: return iface;
  case DbKind::flow: return flow;
  case DbKind::optical: return optical;
  }
  return iface;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    const auto u = static_cast<unsigned char>(c);
    if (std::isalnum(u) || c == '-' || c == '_' || c == '.' || c == ':' || c == '/') {
      cur += static_cast<char>(std::tolower(u));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  for (auto& t : out)
    while (!t.empty() && (t.back() == '.' || t.back() == ':' || t.back() == '-')) t.pop_back();
  std::erase_if(out, [](const std::string& t) { return t.empty(); });
  return out;
}

} // namespace

AgentRuntime::AgentRuntime(ModelBackend& backend, TopologyMap topology, AuditLog& audit, ToolRegistry tools)
    : backend_(&backend), topology_(std::move(topology)), audit_(&audit), tools_(std::move(tools)),
      bus_(scopes_, audit) {
  coordinator_.agent_id = kCoordinatorId;
  coordinator_.tool_whitelist = {"ask_agent", "list_agents", "recent_reports"};
  coordinator_.role_prompt =
      "You are the coordinator. You never read databases. Split the operator's question into sub-questions for "
      "the agents that own the relevant databases.";
  scopes_.scope_of[coordinator_.agent_id] = "";
}

Agent& AgentRuntime::add_store_agent(std::shared_ptr<const Store> store, DetectorConfig detector,
                                     std::string role_prompt) {
  if (!store) throw Error(Errc::config, "null store");
  AgentSpec spec;
  spec.agent_id = store->name() + "-agent";
  spec.scope = store->name();
  spec.tool_whitelist = tools_.names_for(store->kind());
  spec.role_prompt = role_prompt.empty() ? default_role_prompt(store->kind(), store->name()) : std::move(role_prompt);
  return add_agent(std::move(spec), std::move(store), detector);
}

Agent& AgentRuntime::add_agent(AgentSpec spec, std::shared_ptr<const Store> store, DetectorConfig detector) {
  if (scopes_.scope_of.count(spec.agent_id)) throw Error(Errc::config, "duplicate agent id '" + spec.agent_id + "'");
  if (!store) throw Error(Errc::config, "agent " + spec.agent_id + " needs a store");
  for (const auto& t : spec.tool_whitelist) {
    const ToolDef* def = tools_.find(t);
    if (!def || (def->only_for && *def->only_for != store->kind()))
      throw Error(Errc::config, "tool '" + t + "' does not operate on " + spec.scope);
  }
  auto agent = std::make_unique<Agent>(std::move(spec), std::move(store), tools_, *backend_, detector, topology_, *audit_);
  scopes_.scope_of[agent->id()] = agent->spec().scope;
  agents_.push_back(std::move(agent));
  return *agents_.back();
}

Agent* AgentRuntime::find(std::string_view agent_id) {
  for (auto& a : agents_)
    if (a->id() == agent_id) return a.get();
  return nullptr;
}

std::vector<std::string> AgentRuntime::agent_ids() const {
  std::vector<std::string> ids;
  for (const auto& a : agents_) ids.push_back(a->id());
  return ids;
}

TickOutcome AgentRuntime::tick_all(Window window) {
  struct Slot {
    std::optional<PatternReport> report;
    std::string error;
  };
  std::vector<std::future<Slot>> futures;
  for (auto& a : agents_) {
    futures.push_back(std::async(std::launch::async, [this, agent = a.get(), window] {
      Slot slot;
      std::lock_guard lock(agent->inbox_mutex());
      bus_.drain(agent->id());
      try {
        slot.report = agent->tick(window);
      } catch (const std::exception& e) {
        slot.error = e.what();
      }
      return slot;
    }));
  }

  TickOutcome out;
  for (std::size_t i = 0; i < agents_.size(); ++i) {
    Slot slot = futures[i].get();
    const auto& id = agents_[i]->id();
    if (!slot.error.empty()) {
      out.errors[id] = slot.error;
      audit_->append({{"type", "tick_error"}, {"agent", id}, {"window", {window.start, window.end}}, {"error", slot.error}});
      continue;
    }
    if (!slot.report) continue;
    const auto v = bus_.send({0, id, std::string(kBroadcast), MessageKind::report, to_json(*slot.report), now_s(), 0});
    if (!v.pass) {
      out.errors[id] = "report dropped: " + v.reason;
      continue;
    }
    out.reports.push_back(std::move(*slot.report));
  }
  std::sort(out.reports.begin(), out.reports.end(),
            [](const PatternReport& a, const PatternReport& b) { return a.agent_id < b.agent_id; });

  // The coordinator learns about reports only from the bus.
  std::lock_guard lock(reports_mutex_);
  for (const auto& m : bus_.drain(coordinator_.agent_id))
    if (m.kind == MessageKind::report) recent_reports_.push_back(report_from_json(m.payload));
  if (recent_reports_.size() > kRecentReportCap)
    recent_reports_.erase(recent_reports_.begin(),
                          recent_reports_.begin() + static_cast<std::ptrdiff_t>(recent_reports_.size() - kRecentReportCap));
  return out;
}

std::vector<PatternReport> AgentRuntime::recent_reports() const {
  std::lock_guard lock(reports_mutex_);
  return recent_reports_;
}

QueryResult AgentRuntime::handle_query(std::string_view agent_id, std::string_view question,
                                       std::span<const ChatTurn> history, int step_budget) {
  Agent* a = find(agent_id);
  if (!a) throw Error(Errc::not_found, "unknown agent '" + std::string(agent_id) + "'");
  std::lock_guard lock(a->inbox_mutex());
  return a->handle_query(question, history, step_budget);
}

AgentPlan AgentRuntime::fallback_plan(std::string_view question) const {
  const auto tokens = tokenize(question);
  std::set<std::string> keys(tokens.begin(), tokens.end());
  std::set<DbKind> kinds_named;
  for (const auto& t : tokens) {
    for (auto& k : topology_.correlation_keys(t)) keys.insert(std::move(k));
    for (const auto& l : topology_.links()) {
      if (l.iface == t) kinds_named.insert(DbKind::interface);
      if (l.other == t && l.type == TopologyMap::LinkType::port) kinds_named.insert(DbKind::optical);
      if (l.other == t && l.type == TopologyMap::LinkType::addr) kinds_named.insert(DbKind::flow);
    }
  }
  std::set<std::string> keyed_agents;
  {
    std::lock_guard lock(reports_mutex_);
    for (const auto& r : recent_reports_)
      for (const auto& k : r.correlation_keys)
        if (keys.count(k)) keyed_agents.insert(r.agent_id);
  }

  AgentPlan plan;
  plan.query = std::string(question);
  plan.planner = "fallback";
  for (const auto& a : agents_) {
    const DbKind kind = a->store()->kind();
    bool hit = kinds_named.count(kind) || keyed_agents.count(a->id());
    for (const auto& t : tokens) {
      const auto& vocab = vocabulary(kind);
      if (std::find(vocab.begin(), vocab.end(), t) != vocab.end() || Store::is_metric(kind, t)) hit = true;
    }
    if (hit) plan.steps.push_back(make_step(a->id(), std::string(question)));
  }
  if (plan.steps.empty())
    for (const auto& a : agents_) plan.steps.push_back(make_step(a->id(), std::string(question)));
  return plan;
}

AgentPlan AgentRuntime::make_plan(std::string_view question) {
  if (agents_.empty()) throw Error(Errc::no_agents, "no scoped agents registered");
  std::string roster;
  for (const auto& a : agents_) {
    roster += "\n- " + a->id() + ": " + to_string(a->store()->kind()) + " database '" + a->spec().scope + "', metrics";
    for (const auto m : Store::metrics(a->store()->kind())) roster += " " + std::string(m);
  }
  const std::vector<ChatTurn> turns = {
      ChatTurn::system(coordinator_.role_prompt + "\nAgents:" + roster +
                       "\nReply with JSON only: {\"steps\":[{\"agent\":\"<agent id>\",\"question\":\"<text>\"}]}"),
      ChatTurn::user("plan: " + std::string(question))};

  AgentPlan plan;
  try {
    const ChatTurn reply = backend_->complete(turns, {});
    if (reply.tool_calls.empty()) {
      const json j = json::parse(reply.content);
      plan.query = std::string(question);
      plan.planner = "model";
      for (const auto& s : j.at("steps")) {
        const auto agent = s.at("agent").get<std::string>();
        auto sub = trim(s.at("question").get<std::string>());
        if (!find(agent) || sub.empty()) throw Error(Errc::malformed_response, "plan step for '" + agent + "'");
        plan.steps.push_back(make_step(agent, std::move(sub)));
      }
      if (plan.steps.empty()) throw Error(Errc::malformed_response, "empty plan");
    } else {
      throw Error(Errc::malformed_response, "planner asked for tools");
    }
  } catch (const std::exception& e) {
    audit_->append({{"type", "plan_fallback"}, {"reason", e.what()}});
    plan = fallback_plan(question);
  }
  plan.plan_id = "plan-" + std::to_string(next_plan_++);
  return plan;
}

void AgentRuntime::run_step(AgentPlan::Step& step, std::span<const ChatTurn> history, int step_budget,
                            std::vector<json>& evidence) {
  Agent* agent = find(step.agent_id);
  if (!agent) {
    step.status = StepStatus::failed;
    step.error = "unknown agent";
    return;
  }
  json hist = json::array();
  for (const auto& t : history)
    if ((t.role == Role::user || t.role == Role::assistant) && !t.content.empty())
      hist.push_back({{"role", to_string(t.role)}, {"content", t.content}});
  const auto ask = bus_.send({0, coordinator_.agent_id, agent->id(), MessageKind::ask,
                              {{"question", step.question}, {"history", hist}}, now_s(), 0});
  if (!ask.pass) {
    step.status = StepStatus::failed;
    step.error = "ask dropped: " + ask.reason;
    return;
  }

  std::lock_guard lock(agent->inbox_mutex());
  for (const auto& msg : bus_.drain(agent->id())) {
    if (msg.kind != MessageKind::ask) continue;
    std::vector<ChatTurn> ctx;
    for (const auto& t : msg.payload.value("history", json::array()))
      ctx.push_back(t["role"] == "user" ? ChatTurn::user(t["content"]) : ChatTurn::assistant(t["content"]));
    try {
      QueryResult r = agent->handle_query(msg.payload["question"].get<std::string>(), ctx, step_budget);
      json ev = json::array();
      for (const auto& e : r.transcript) ev.push_back(to_json(e));
      const auto sent = bus_.send({0, agent->id(), msg.sender, MessageKind::answer,
                                   {{"answer", r.answer}, {"partial", r.partial}, {"findings", r.findings},
                                    {"evidence", std::move(ev)}},
                                   now_s(), msg.msg_id});
      if (!sent.pass) {
        step.status = StepStatus::failed;
        step.error = "answer dropped: " + sent.reason;
      }
      step.consulted_detector = r.consulted_detector;
    } catch (const Error& e) {
      step.status = StepStatus::failed;
      step.error = e.what();
      audit_->append({{"type", "step_failed"}, {"agent", agent->id()}, {"error", e.what()}});
    }
  }
  if (step.status == StepStatus::failed) return;

  for (const auto& msg : bus_.drain(coordinator_.agent_id)) {
    if (msg.kind == MessageKind::report) {
      std::lock_guard rl(reports_mutex_);
      recent_reports_.push_back(report_from_json(msg.payload));
      continue;
    }
    if (msg.kind != MessageKind::answer || msg.sender != agent->id()) continue;
    step.answer = msg.payload["answer"].get<std::string>();
    step.partial = msg.payload["partial"].get<bool>();
    step.findings = msg.payload["findings"].get<std::size_t>();
    for (const auto& e : msg.payload["evidence"]) evidence.push_back(e);
    step.status = StepStatus::done;
  }
  if (step.status != StepStatus::done) {
    step.status = StepStatus::failed;
    step.error = "no answer received";
  }
}

CoordinationResult AgentRuntime::coordinate(std::string_view question, std::span<const ChatTurn> history,
                                            const AgentPlan* cached_plan, int step_budget) {
  if (agents_.empty()) throw Error(Errc::no_agents, "no scoped agents registered");
  const std::string q = trim(question);
  if (q.empty()) throw Error(Errc::validation, "empty question");

  CoordinationResult out;
  if (cached_plan) {
    out.plan.plan_id = "plan-" + std::to_string(next_plan_++);
    out.plan.query = q;
    out.plan.planner = "cache";
    for (const auto& s : cached_plan->steps) out.plan.steps.push_back(make_step(s.agent_id, s.question));
  } else {
    out.plan = make_plan(q);
  }
  bus_.send({0, coordinator_.agent_id, std::string(kBroadcast), MessageKind::plan, to_json(out.plan), now_s(), 0});

  int used = 0;
  for (auto& step : out.plan.steps) {
    if (used >= step_budget) {
      step.status = StepStatus::failed;
      step.error = std::string(to_string(Errc::step_budget_exhausted)) + ": coordinator budget of " +
                   std::to_string(step_budget) + " steps";
      continue;
    }
    ++used;
    run_step(step, history, step_budget, out.evidence);
  }

  std::vector<const AgentPlan::Step*> done;
  std::vector<const AgentPlan::Step*> failed;
  for (const auto& s : out.plan.steps) (s.status == StepStatus::done ? done : failed).push_back(&s);

  std::string text;
  const bool quiet = !done.empty() && failed.empty() &&
                     std::all_of(done.begin(), done.end(),
                                 [](const auto* s) { return s->consulted_detector && s->findings == 0; });
  if (quiet) text = "No anomalies detected in the queried window.";
  for (const auto* s : done) {
    if (!text.empty()) text += "\n";
    text += "[" + s->agent_id + "] " + s->answer;
    if (s->partial) out.partial = true;
  }
  if (!failed.empty()) {
    out.partial = true;
    if (!text.empty()) text += "\n";
    text += done.empty() ? "No agent could answer. Missing scopes:" : "Missing scopes:";
    for (std::size_t i = 0; i < failed.size(); ++i)
      text += std::string(i ? ";" : "") + " " + failed[i]->agent_id + " (" + failed[i]->error + ")";
  }
  out.answer = std::move(text);
  out.backend_unreachable =
      done.empty() && std::all_of(failed.begin(), failed.end(), [](const auto* s) {
        return s->error.rfind(to_string(Errc::backend_unreachable), 0) == 0;
      });
  bus_.send({0, coordinator_.agent_id, std::string(kBroadcast), MessageKind::result, {{"text", out.answer}}, now_s(), 0});
  return out;
}

} // namespace netmon
