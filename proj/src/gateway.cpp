#include "netmon/gateway.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include <httplib.h>

#include "netmon/error.hpp"
#include "netmon/kernels.hpp"
#include "netmon/summary.hpp"

#ifndef NETMON_VERSION
#define NETMON_VERSION "0.0.0"
#endif

namespace netmon {

namespace fs = std::filesystem;

namespace {

std::int64_t wall_now() {
  return std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch()).count();
}

std::string normalize_question(std::string_view q) {
  std::string out;
  bool space = false;
  for (char c : q) {
    const auto u = static_cast<unsigned char>(c);
    if (std::isspace(u)) {
      space = !out.empty();
      continue;
    }
    if (space) out += ' ';
    space = false;
    out += static_cast<char>(std::tolower(u));
  }
  return out;
}

fs::path resolve(const fs::path& base, const std::string& p) {
  if (p.empty()) return {};
  fs::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

DetectorConfig detector_from_json(const json& j, DetectorConfig d) {
  d.window_s = j.value("window_s", d.window_s);
  d.baseline_windows = j.value("baseline_windows", d.baseline_windows);
  d.z_warn = j.value("z_warn", d.z_warn);
  d.z_critical = j.value("z_critical", d.z_critical);
  d.mad_floor_rel = j.value("mad_floor_rel", d.mad_floor_rel);
  d.error_eps_threshold = j.value("error_eps_threshold", d.error_eps_threshold);
  return d;
}

json turn_json(const SessionTurn& t) {
  json j = to_json(t.turn);
  j["seq"] = t.seq;
  j["ts"] = t.ts;
  if (!t.evidence.is_null()) j["evidence"] = t.evidence;
  return j;
}

AgentPlan plan_from_json(const json& j) {
  AgentPlan p;
  p.plan_id = j.value("plan_id", "");
  p.query = j.value("query", "");
  for (const auto& s : j.at("steps")) {
    AgentPlan::Step step;
    step.agent_id = s.at("agent_id").get<std::string>();
    step.question = s.at("question").get<std::string>();
    p.steps.push_back(std::move(step));
  }
  return p;
}

bool parse_int(const std::string& s, std::int64_t& out) {
  try {
    std::size_t pos = 0;
    out = std::stoll(s, &pos);
    return pos == s.size();
  } catch (...) {
    return false;
  }
}

} // namespace

// ---------------------------------------------------------------------------
// ServiceConfig

DetectorConfig ServiceConfig::detector_for(DbKind kind) const {
  const auto it = detectors.find(kind);
  return it == detectors.end() ? DetectorConfig{} : it->second;
}

void ServiceConfig::set_listen(const std::string& addr) {
  const auto colon = addr.rfind(':');
  if (colon == std::string::npos) throw Error(Errc::config, "listen address must be host:port, got '" + addr + "'");
  std::int64_t port = 0;
  if (!parse_int(addr.substr(colon + 1), port) || port < 0 || port > 65535)
    throw Error(Errc::config, "bad listen port in '" + addr + "'");
  listen_host = addr.substr(0, colon);
  listen_port = static_cast<int>(port);
}

void ServiceConfig::validate() const {
  if (tick_interval_s < 60) throw Error(Errc::config, "tick interval must be at least 60 s");
  if (session_idle_s <= 0) throw Error(Errc::config, "session idle expiry must be positive");
  if (flush_interval_s <= 0) throw Error(Errc::config, "flush interval must be positive");
  if (step_budget < 1) throw Error(Errc::config, "step budget must be positive");
  for (const auto& [kind, path] : stores)
    if (!fs::exists(path)) throw Error(Errc::config, std::string(to_string(kind)) + " store " + path.string() + " does not exist");
  if (!topology_path.empty() && !fs::exists(topology_path))
    throw Error(Errc::config, "topology file " + topology_path.string() + " does not exist");
  if (!static_dir.empty() && !fs::is_directory(static_dir))
    throw Error(Errc::config, "static dir " + static_dir.string() + " does not exist");
  std::optional<std::int64_t> window;
  for (const auto& [kind, path] : stores) {
    const auto d = detector_for(kind);
    d.validate();
    if (window && *window != d.window_s) throw Error(Errc::config, "all detector windows must be equal");
    window = d.window_s;
  }
  backend.validate();
}

ServiceConfig ServiceConfig::from_json(const json& j, const fs::path& base) {
  try {
    ServiceConfig c;
    if (j.contains("listen")) c.set_listen(j.at("listen").get<std::string>());
    if (j.contains("stores"))
      for (const auto& [k, v] : j.at("stores").items()) c.stores[db_kind_from_string(k)] = resolve(base, v.get<std::string>());
    if (j.contains("detector")) {
      const auto& d = j.at("detector");
      const DetectorConfig common = detector_from_json(d, {});
      for (auto kind : {DbKind::interface, DbKind::flow, DbKind::optical}) {
        const auto per = d.value("per_kind", json::object());
        c.detectors[kind] = per.contains(to_string(kind)) ? detector_from_json(per.at(to_string(kind)), common) : common;
      }
    }
    if (j.contains("backend")) {
      const auto& b = j.at("backend");
      const auto kind = b.value("kind", "scripted");
      if (kind != "http" && kind != "scripted") throw Error(Errc::config, "backend kind must be http or scripted");
      c.backend.kind = kind == "http" ? BackendConfig::Kind::http : BackendConfig::Kind::scripted;
      c.backend.endpoint_url = b.value("endpoint_url", "");
      c.backend.model_name = b.value("model_name", c.backend.model_name);
      c.backend.temperature = b.value("temperature", c.backend.temperature);
      c.backend.max_tokens = b.value("max_tokens", c.backend.max_tokens);
      c.backend.timeout_s = b.value("timeout_s", c.backend.timeout_s);
      c.backend.script_path = resolve(base, b.value("script_path", ""));
    }
    c.topology_path = resolve(base, j.value("topology", ""));
    c.tick_interval_s = j.value("tick_interval_s", c.tick_interval_s);
    c.session_idle_s = j.value("session_idle_s", c.session_idle_s);
    c.flush_interval_s = j.value("flush_interval_s", c.flush_interval_s);
    c.session_log = resolve(base, j.value("session_log", ""));
    c.audit_log = resolve(base, j.value("audit_log", ""));
    c.static_dir = resolve(base, j.value("static_dir", ""));
    c.bearer_token = j.value("token", "");
    c.tick_loop = j.value("tick_loop", c.tick_loop);
    c.step_budget = j.value("step_budget", c.step_budget);
    return c;
  } catch (const json::exception& e) {
    throw Error(Errc::config, std::string("config: ") + e.what());
  }
}

ServiceConfig ServiceConfig::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::config, "cannot read config " + path.string());
  try {
    return from_json(json::parse(in), path.parent_path());
  } catch (const json::parse_error& e) {
    throw Error(Errc::config, "config " + path.string() + ": " + e.what());
  }
}

void ServiceConfig::apply_env(const std::function<std::optional<std::string>(const char*)>& getenv) {
  if (auto v = getenv("NETMON_LISTEN")) set_listen(*v);
  if (auto v = getenv("NETMON_TOKEN")) bearer_token = *v;
  if (auto v = getenv("NETMON_TOPOLOGY")) topology_path = *v;
  if (auto v = getenv("NETMON_STATIC_DIR")) static_dir = *v;
  if (auto v = getenv("NETMON_SESSION_LOG")) session_log = *v;
  if (auto v = getenv("NETMON_AUDIT_LOG")) audit_log = *v;
  if (auto v = getenv("NETMON_BACKEND_KIND")) {
    if (*v != "http" && *v != "scripted") throw Error(Errc::config, "NETMON_BACKEND_KIND must be http or scripted");
    backend.kind = *v == "http" ? BackendConfig::Kind::http : BackendConfig::Kind::scripted;
  }
  if (auto v = getenv("NETMON_BACKEND_URL")) backend.endpoint_url = *v;
  if (auto v = getenv("NETMON_MODEL")) backend.model_name = *v;
  if (auto v = getenv("NETMON_SCRIPT")) backend.script_path = *v;
  if (auto v = getenv("NETMON_TICK_INTERVAL")) {
    std::int64_t s = 0;
    if (!parse_int(*v, s)) throw Error(Errc::config, "NETMON_TICK_INTERVAL must be an integer");
    tick_interval_s = s;
  }
  for (auto kind : {DbKind::interface, DbKind::flow, DbKind::optical}) {
    const std::string var = std::string("NETMON_STORE_") + (kind == DbKind::interface ? "INTERFACE"
                                                            : kind == DbKind::flow    ? "FLOW"
                                                                                      : "OPTICAL");
    if (auto v = getenv(var.c_str())) stores[kind] = *v;
  }
}

// ---------------------------------------------------------------------------
// Gateway

Gateway::Gateway(ServiceConfig cfg, std::unique_ptr<ModelBackend> backend) : cfg_(std::move(cfg)) {
  cfg_.validate();
  audit_ = cfg_.audit_log.empty() ? std::make_unique<AuditLog>() : std::make_unique<AuditLog>(cfg_.audit_log);
  backend_ = backend ? std::move(backend) : make_backend(cfg_.backend);
  TopologyMap topo = cfg_.topology_path.empty() ? TopologyMap{} : TopologyMap::load(cfg_.topology_path);
  runtime_ = std::make_unique<AgentRuntime>(*backend_, std::move(topo), *audit_);
  for (const auto& [kind, path] : cfg_.stores) {
    std::shared_ptr<Store> store = Store::open(path);
    if (store->kind() != kind)
      throw Error(Errc::config, path.string() + " holds " + to_string(store->kind()) + " records, configured as " +
                                    to_string(kind));
    persisted_counts_[kind] = store->record_count();
    runtime_->add_store_agent(store, cfg_.detector_for(kind));
    stores_[kind] = std::move(store);
  }
  load_sessions();
}

Gateway::~Gateway() {
  stop();
  try {
    flush();
  } catch (const std::exception& e) {
    std::cerr << "netmon-gateway: final flush failed: " << e.what() << "\n";
  }
}

std::shared_ptr<Store> Gateway::store(DbKind kind) const {
  const auto it = stores_.find(kind);
  return it == stores_.end() ? nullptr : it->second;
}

void Gateway::flush() {
  std::lock_guard lock(flush_mutex_);
  for (const auto& [kind, store] : stores_) {
    const auto count = store->record_count();
    if (count == persisted_counts_[kind]) continue;
    store->persist(cfg_.stores.at(kind));
    persisted_counts_[kind] = count;
  }
}

// Sessions ------------------------------------------------------------------

void Gateway::log_session(const json& line) {
  if (cfg_.session_log.empty()) return;
  std::lock_guard lock(session_log_mutex_);
  std::ofstream out(cfg_.session_log, std::ios::app);
  out << line.dump() << '\n';
  if (!out) throw Error(Errc::storage_io_failure, "cannot append to session log " + cfg_.session_log.string());
}

void Gateway::load_sessions() {
  if (cfg_.session_log.empty() || !fs::exists(cfg_.session_log)) return;
  std::ifstream in(cfg_.session_log);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      const auto id = j.at("session_id").get<std::string>();
      if (j.value("event", "") == "created") {
        auto s = std::make_shared<Session>();
        s->session_id = id;
        s->created_ts = s->last_activity_ts = j.at("ts").get<std::int64_t>();
        sessions_[id] = std::move(s);
        continue;
      }
      const auto it = sessions_.find(id);
      if (it == sessions_.end()) continue;
      SessionTurn t;
      t.seq = j.at("seq").get<std::uint64_t>();
      t.ts = j.at("ts").get<std::int64_t>();
      t.turn = chat_turn_from_json(j.at("turn"));
      if (j.contains("evidence")) t.evidence = j.at("evidence");
      if (j.contains("plan_key")) it->second->plan_cache[j.at("plan_key")] = plan_from_json(j.at("plan"));
      it->second->last_activity_ts = t.ts;
      it->second->turns.push_back(std::move(t));
    } catch (const std::exception& e) {
      std::cerr << "netmon-gateway: session log line " << line_no << " skipped: " << e.what() << "\n";
    }
  }
  // Ids are s-<counter>-<random>; keep the counter moving past restored ones.
  next_session_ = sessions_.size() + 1;
  expire_sessions(wall_now());
}

void Gateway::expire_sessions(std::int64_t now) {
  std::lock_guard lock(sessions_mutex_);
  std::erase_if(sessions_, [&](const auto& kv) { return now - kv.second->last_activity_ts > cfg_.session_idle_s; });
}

ChatReply Gateway::chat(const json& request) {
  if (!request.is_object()) return {400, {{"error", "request body must be a JSON object"}}};
  const json msg = request.value("message", json());
  if (!msg.is_string() || normalize_question(msg.get<std::string>()).empty())
    return {400, {{"error", "message must be nonempty text"}}};
  const std::string message = msg.get<std::string>();
  const std::int64_t now = wall_now();

  std::shared_ptr<Session> session;
  bool created = false;
  {
    std::lock_guard lock(sessions_mutex_);
    const json sid = request.value("session_id", json());
    if (!sid.is_null()) {
      if (!sid.is_string()) return {400, {{"error", "session_id must be text"}}};
      const auto it = sessions_.find(sid.get<std::string>());
      if (it == sessions_.end() || now - it->second->last_activity_ts > cfg_.session_idle_s)
        return {404, {{"error", "unknown session " + sid.get<std::string>()}}};
      session = it->second;
    } else {
      static thread_local std::mt19937_64 rng{std::random_device{}()};
      char buf[32];
      std::snprintf(buf, sizeof buf, "%012llx", static_cast<unsigned long long>(rng() & 0xffffffffffffULL));
      session = std::make_shared<Session>();
      session->session_id = "s-" + std::to_string(next_session_++) + "-" + buf;
      session->created_ts = session->last_activity_ts = now;
      sessions_[session->session_id] = session;
      created = true;
    }
  }

  std::lock_guard busy(session->busy);
  auto append = [&](ChatTurn turn, json evidence = nullptr, const json& extra = nullptr) {
    SessionTurn t{session->turns.size() + 1, now, std::move(turn), std::move(evidence)};
    json line = {{"session_id", session->session_id}, {"seq", t.seq}, {"ts", t.ts}, {"turn", to_json(t.turn)}};
    if (!t.evidence.is_null()) line["evidence"] = t.evidence;
    if (extra.is_object())
      for (const auto& [k, v] : extra.items()) line[k] = v;
    log_session(line);
    session->turns.push_back(std::move(t));
    session->last_activity_ts = now;
  };
  if (created) {
    log_session({{"session_id", session->session_id}, {"event", "created"}, {"ts", now}});
    append(ChatTurn::system(runtime_->coordinator().role_prompt));
  }

  std::vector<ChatTurn> history;
  for (const auto& t : session->turns) history.push_back(t.turn);
  const std::string key = normalize_question(message);
  const auto cached = session->plan_cache.find(key);
  const bool cache_hit = cached != session->plan_cache.end();

  CoordinationResult res;
  try {
    res = runtime_->coordinate(message, history, cache_hit ? &cached->second : nullptr, cfg_.step_budget);
  } catch (const Error& e) {
    ChatTurn user = ChatTurn::user(message);
    user.unanswered = true;
    append(std::move(user));
    const int status = e.code() == Errc::validation ? 400 : 503;
    return {status, {{"session_id", session->session_id}, {"error", e.what()}}};
  }
  if (res.backend_unreachable) {
    ChatTurn user = ChatTurn::user(message);
    user.unanswered = true;
    append(std::move(user));
    return {503, {{"session_id", session->session_id}, {"error", res.answer}}};
  }

  append(ChatTurn::user(message));
  for (const auto& ev : res.evidence) {
    ToolResult r;
    r.call_id = ev.at("call_id").get<std::string>();
    r.tool_name = ev.at("tool").get<std::string>();
    r.ok = ev.at("ok").get<bool>();
    if (r.ok)
      r.value = ev.at("result");
    else
      r.error = ev.at("result").get<std::string>();
    append(ChatTurn::tool(r));
  }
  json plan = to_json(res.plan);
  plan["planner"] = res.plan.planner;
  json evidence = res.evidence;
  append(ChatTurn::assistant(res.answer), evidence, json{{"plan_key", key}, {"plan", plan}});
  if (!cache_hit) session->plan_cache[key] = res.plan;

  return {200,
          {{"session_id", session->session_id},
           {"answer", res.answer},
           {"partial", res.partial},
           {"plan", plan},
           {"plan_cache", cache_hit ? "hit" : "miss"},
           {"evidence", evidence}}};
}

std::optional<json> Gateway::session_view(const std::string& id) {
  std::shared_ptr<Session> s;
  {
    std::lock_guard lock(sessions_mutex_);
    const auto it = sessions_.find(id);
    if (it == sessions_.end()) return std::nullopt;
    s = it->second;
  }
  std::lock_guard busy(s->busy);
  json turns = json::array();
  for (const auto& t : s->turns) turns.push_back(turn_json(t));
  return json{{"session_id", s->session_id},
              {"created_ts", s->created_ts},
              {"last_activity_ts", s->last_activity_ts},
              {"turns", std::move(turns)}};
}

// Views -----------------------------------------------------------------------

json Gateway::interfaces() {
  const auto store = this->store(DbKind::interface);
  if (!store) return {{"window", nullptr}, {"rows", json::array()}};
  const auto cfg = cfg_.detector_for(DbKind::interface);
  const auto as_of = store_as_of(*store, cfg);
  if (!as_of) return {{"window", nullptr}, {"rows", json::array()}};
  json rows = json::array();
  for (const auto& r : summarize_interfaces(*store, cfg, *as_of)) rows.push_back(to_json(r));
  return {{"window", {{"start", *as_of - cfg.window_s}, {"end", *as_of}}}, {"rows", std::move(rows)}};
}

std::optional<json> Gateway::interface_view(const std::string& id) {
  const auto store = this->store(DbKind::interface);
  if (!store || !store->has_entity(id)) return std::nullopt;
  const auto cfg = cfg_.detector_for(DbKind::interface);
  json j = to_json(diagnose_interface(*store, cfg, id, *store_as_of(*store, cfg)));
  json ids = json::array();
  {
    std::lock_guard lock(incidents_mutex_);
    for (const auto& [iid, inc] : incidents_)
      if (inc.status != IncidentStatus::resolved && inc.touches(id)) ids.push_back(iid);
  }
  j["incidents"] = std::move(ids);
  return j;
}

json Gateway::incidents(std::optional<std::int64_t> since) {
  std::lock_guard lock(incidents_mutex_);
  std::vector<const Incident*> list;
  for (const auto& [id, inc] : incidents_)
    if (!since || inc.window.end > *since) list.push_back(&inc);
  std::sort(list.begin(), list.end(), [](const Incident* a, const Incident* b) {
    return std::tie(a->window.start, a->incident_id) < std::tie(b->window.start, b->incident_id);
  });
  json out = json::array();
  for (const auto* inc : list) out.push_back(to_json(*inc));
  return {{"incidents", std::move(out)}};
}

ChatReply Gateway::transition(const std::string& incident_id, IncidentStatus to) {
  std::lock_guard lock(incidents_mutex_);
  const auto it = incidents_.find(incident_id);
  if (it == incidents_.end()) return {404, {{"error", "unknown incident " + incident_id}}};
  Incident& inc = it->second;
  const bool ok = to == IncidentStatus::acknowledged ? inc.status == IncidentStatus::open
                                                     : inc.status != IncidentStatus::resolved;
  if (!ok)
    return {409,
            {{"error", std::string(to_string(Errc::invalid_transition)) + ": " + to_string(inc.status) + " -> " +
                           to_string(to)},
             {"status", to_string(inc.status)}}};
  inc.status = to;
  statuses_[incident_id] = to;
  audit_->append({{"type", "incident_transition"}, {"incident", incident_id}, {"status", to_string(to)}});
  return {200, to_json(inc)};
}

TickReport Gateway::tick(std::optional<std::int64_t> window_end) {
  std::lock_guard tick_lock(tick_mutex_);
  TickReport out;
  std::int64_t w = DetectorConfig{}.window_s;
  if (!stores_.empty()) w = cfg_.detector_for(stores_.begin()->first).window_s;
  std::optional<std::int64_t> end = window_end;
  if (!end)
    for (const auto& [kind, store] : stores_)
      if (const auto a = store_as_of(*store, cfg_.detector_for(kind))) end = std::max(end.value_or(*a), *a);
  if (!end) return out; // nothing ingested yet
  out.window = {align_down(*end, w) - w, align_down(*end, w)};

  TickOutcome t = runtime_->tick_all(out.window);
  out.reports = t.reports.size();
  out.errors = t.errors;

  std::lock_guard lock(incidents_mutex_);
  for (auto& r : t.reports) reports_[r.report_id] = std::move(r);
  std::vector<PatternReport> all;
  for (const auto& [id, r] : reports_) all.push_back(r);
  std::map<std::string, Incident> next;
  for (auto& inc : correlate(all, runtime_->topology())) {
    if (const auto s = statuses_.find(inc.incident_id); s != statuses_.end()) inc.status = s->second;
    if (!incidents_.count(inc.incident_id)) ++out.new_incidents;
    next[inc.incident_id] = std::move(inc);
  }
  incidents_ = std::move(next);
  audit_->append({{"type", "tick"},
                  {"window", {out.window.start, out.window.end}},
                  {"reports", out.reports},
                  {"new_incidents", out.new_incidents}});
  return out;
}

json Gateway::ingest(std::string_view text) {
  std::map<DbKind, std::vector<Record>> batches;
  json errors = json::array();
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty() || line.front() == '#') continue;
    try {
      Record r = parse_record(line, line_no);
      const DbKind kind = kind_of(r);
      if (!stores_.count(kind)) throw Error(Errc::kind_mismatch, std::string("no ") + to_string(kind) + " store configured");
      batches[kind].push_back(std::move(r));
    } catch (const Error& e) {
      errors.push_back({{"line", line_no}, {"error", e.what()}});
    }
  }
  json accepted = json::object();
  for (auto& [kind, records] : batches) {
    std::size_t ok = 0;
    auto& store = *stores_.at(kind);
    try {
      store.append(records);
      ok = records.size();
    } catch (const Error&) {
      // The batch had a bad record; fall back to one at a time so good lines still land.
      for (const auto& r : records) {
        try {
          store.append(r);
          ++ok;
        } catch (const Error& e) {
          errors.push_back({{"line", nullptr}, {"entity", entity_of(r)}, {"error", e.what()}});
        }
      }
    }
    accepted[to_string(kind)] = ok;
  }
  return {{"accepted", std::move(accepted)}, {"errors", std::move(errors)}};
}

json Gateway::health() {
  json stores = json::object();
  for (const auto& [kind, store] : stores_)
    stores[store->name()] = {{"kind", to_string(kind)}, {"records", store->record_count()}};
  const bool reachable = backend_->reachable();
  std::size_t open = 0;
  {
    std::lock_guard lock(incidents_mutex_);
    for (const auto& [id, inc] : incidents_) open += inc.status == IncidentStatus::open;
  }
  std::size_t sessions = 0;
  {
    std::lock_guard lock(sessions_mutex_);
    sessions = sessions_.size();
  }
  return {{"status", reachable ? "ok" : "degraded"},
          {"build", {{"version", NETMON_VERSION}, {"compiler", __VERSION__}, {"simd", std::string(to_string(kernels::active_isa()))}}},
          {"stores", std::move(stores)},
          {"agents", runtime_->agent_ids()},
          {"backend", {{"describe", backend_->describe()}, {"reachable", reachable}}},
          {"open_incidents", open},
          {"sessions", sessions}};
}

// HTTP ----------------------------------------------------------------------

void Gateway::install_routes() {
  auto& srv = *server_;
  auto send = [](httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  };

  srv.set_pre_routing_handler([this, send](const httplib::Request& req, httplib::Response& res) {
    if (cfg_.bearer_token.empty() || req.path.rfind("/api/", 0) != 0 || req.path == "/api/health")
      return httplib::Server::HandlerResponse::Unhandled;
    if (req.get_header_value("Authorization") == "Bearer " + cfg_.bearer_token)
      return httplib::Server::HandlerResponse::Unhandled;
    send(res, 401, {{"error", "missing or wrong bearer token"}});
    return httplib::Server::HandlerResponse::Handled;
  });

  srv.set_exception_handler([send](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    try {
      std::rethrow_exception(ep);
    } catch (const Error& e) {
      send(res, e.code() == Errc::validation ? 400 : 500, {{"error", e.what()}});
    } catch (const std::exception& e) {
      send(res, 500, {{"error", e.what()}});
    }
  });

  srv.Post("/api/chat", [this, send](const httplib::Request& req, httplib::Response& res) {
    json body;
    try {
      body = json::parse(req.body);
    } catch (const json::parse_error& e) {
      return send(res, 400, {{"error", std::string("invalid JSON: ") + e.what()}});
    }
    const auto reply = chat(body);
    send(res, reply.status, reply.body);
  });

  srv.Get(R"(/api/sessions/([^/]+))", [this, send](const httplib::Request& req, httplib::Response& res) {
    const auto view = session_view(req.matches[1]);
    if (!view) return send(res, 404, {{"error", "unknown session"}});
    send(res, 200, *view);
  });

  srv.Get("/api/interfaces", [this, send](const httplib::Request&, httplib::Response& res) {
    send(res, 200, interfaces());
  });

  srv.Get(R"(/api/interfaces/([^/]+))", [this, send](const httplib::Request& req, httplib::Response& res) {
    const auto view = interface_view(req.matches[1]);
    if (!view) return send(res, 404, {{"error", "unknown interface " + std::string(req.matches[1])}});
    send(res, 200, *view);
  });

  srv.Get("/api/incidents", [this, send](const httplib::Request& req, httplib::Response& res) {
    std::optional<std::int64_t> since;
    if (req.has_param("since")) {
      std::int64_t v = 0;
      if (!parse_int(req.get_param_value("since"), v)) return send(res, 400, {{"error", "since must be an integer"}});
      since = v;
    }
    send(res, 200, incidents(since));
  });

  srv.Post(R"(/api/incidents/([^/]+)/ack)", [this, send](const httplib::Request& req, httplib::Response& res) {
    const auto reply = transition(req.matches[1], IncidentStatus::acknowledged);
    send(res, reply.status, reply.body);
  });

  srv.Post(R"(/api/incidents/([^/]+)/resolve)", [this, send](const httplib::Request& req, httplib::Response& res) {
    const auto reply = transition(req.matches[1], IncidentStatus::resolved);
    send(res, reply.status, reply.body);
  });

  srv.Post("/api/tick", [this, send](const httplib::Request& req, httplib::Response& res) {
    std::optional<std::int64_t> end;
    if (!req.body.empty()) {
      try {
        const json j = json::parse(req.body);
        if (j.contains("window_end")) end = j.at("window_end").get<std::int64_t>();
      } catch (const json::exception& e) {
        return send(res, 400, {{"error", std::string("invalid tick body: ") + e.what()}});
      }
    }
    const auto t = tick(end);
    send(res, 200,
         {{"window", {{"start", t.window.start}, {"end", t.window.end}}},
          {"reports", t.reports},
          {"new_incidents", t.new_incidents},
          {"errors", t.errors}});
  });

  srv.Post("/api/ingest", [this, send](const httplib::Request& req, httplib::Response& res) {
    send(res, 200, ingest(req.body));
  });

  srv.Get("/api/health", [this, send](const httplib::Request&, httplib::Response& res) { send(res, 200, health()); });

  if (!cfg_.static_dir.empty()) srv.set_mount_point("/", cfg_.static_dir.string());
}

int Gateway::start() {
  if (running_) throw Error(Errc::config, "gateway already started");
  server_ = std::make_unique<httplib::Server>();
  install_routes();
  int port = cfg_.listen_port;
  if (port == 0) {
    port = server_->bind_to_any_port(cfg_.listen_host);
  } else if (!server_->bind_to_port(cfg_.listen_host, port)) {
    port = -1;
  }
  if (port < 0) throw Error(Errc::config, "cannot listen on " + cfg_.listen_host + ":" + std::to_string(cfg_.listen_port));
  running_ = true;
  server_thread_ = std::thread([this] { server_->listen_after_bind(); });
  {
    std::lock_guard lock(loop_mutex_);
    stopping_ = false;
  }
  loop_thread_ = std::thread([this] { background_loop(); });
  return port;
}

void Gateway::background_loop() {
  using clock = std::chrono::steady_clock;
  auto next_tick = clock::now() + std::chrono::seconds(cfg_.tick_interval_s);
  std::unique_lock lock(loop_mutex_);
  while (!stopping_) {
    loop_cv_.wait_for(lock, std::chrono::seconds(cfg_.flush_interval_s), [this] { return stopping_; });
    if (stopping_) break;
    lock.unlock();
    try {
      flush();
      expire_sessions(wall_now());
      if (cfg_.tick_loop && clock::now() >= next_tick) {
        next_tick += std::chrono::seconds(cfg_.tick_interval_s);
        const auto t = tick();
        for (const auto& [agent, err] : t.errors)
          std::cerr << "netmon-gateway: tick " << agent << ": " << err << "\n";
      }
    } catch (const std::exception& e) {
      std::cerr << "netmon-gateway: background: " << e.what() << "\n";
    }
    lock.lock();
  }
}

void Gateway::stop() {
  {
    std::lock_guard lock(loop_mutex_);
    stopping_ = true;
  }
  loop_cv_.notify_all();
  if (server_) server_->stop();
  if (server_thread_.joinable()) server_thread_.join();
  if (loop_thread_.joinable()) loop_thread_.join();
  running_ = false;
}

void Gateway::wait() {
  if (server_thread_.joinable()) server_thread_.join();
  if (loop_thread_.joinable()) loop_thread_.join();
}

} // namespace netmon
