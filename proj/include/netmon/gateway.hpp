#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "netmon/agents.hpp"
#include "netmon/correlator.hpp"
#include "netmon/llm.hpp"
#include "netmon/tsdb.hpp"

namespace httplib {
class Server;
}

namespace netmon {

struct ServiceConfig {
  std::string listen_host = "127.0.0.1";
  int listen_port = 8080;
  std::map<DbKind, std::filesystem::path> stores;
  std::map<DbKind, DetectorConfig> detectors; // missing kinds use the defaults
  BackendConfig backend;
  std::filesystem::path topology_path;
  std::int64_t tick_interval_s = 3600;
  std::int64_t session_idle_s = 86400;
  std::int64_t flush_interval_s = 5;
  std::filesystem::path session_log;
  std::filesystem::path audit_log;
  std::filesystem::path static_dir;
  std::string bearer_token;
  bool tick_loop = true;
  int step_budget = kDefaultStepBudget;

  DetectorConfig detector_for(DbKind kind) const;
  void validate() const; // throws Error(config)

  // Relative paths resolve against base_dir.
  static ServiceConfig from_json(const json& j, const std::filesystem::path& base_dir = {});
  static ServiceConfig load(const std::filesystem::path& path);
  // NETMON_* variables override file values.
  void apply_env(const std::function<std::optional<std::string>(const char*)>& getenv);
  void set_listen(const std::string& addr); // host:port
};

struct SessionTurn {
  std::uint64_t seq = 0;
  std::int64_t ts = 0;
  ChatTurn turn;
  json evidence; // assistant turns: tool evidence for the answer
};

struct Session {
  std::string session_id;
  std::int64_t created_ts = 0;
  std::int64_t last_activity_ts = 0;
  std::vector<SessionTurn> turns;
  std::map<std::string, AgentPlan> plan_cache; // normalized question -> plan
  std::mutex busy;                             // one active completion per session
};

struct ChatReply {
  int status = 200;
  json body;
};

struct TickReport {
  Window window;
  std::size_t reports = 0;
  std::size_t new_incidents = 0;
  std::map<std::string, std::string> errors;
};

/// Wires stores, agents, correlator, backend and sessions behind the HTTP API.
/// Every handler is also callable directly.
class Gateway {
public:
  explicit Gateway(ServiceConfig cfg, std::unique_ptr<ModelBackend> backend = nullptr);
  ~Gateway();

  Gateway(const Gateway&) = delete;
  Gateway& operator=(const Gateway&) = delete;

  // Binds and serves in background threads; returns the bound port.
  int start();
  void stop();
  // Blocks until stop() (signal handlers call stop()).
  void wait();

  ChatReply chat(const json& request);
  std::optional<json> session_view(const std::string& id);
  json interfaces();
  std::optional<json> interface_view(const std::string& id);
  json incidents(std::optional<std::int64_t> since);
  ChatReply transition(const std::string& incident_id, IncidentStatus to);
  TickReport tick(std::optional<std::int64_t> window_end = std::nullopt);
  json ingest(std::string_view text);
  json health();

  void flush();
  AgentRuntime& runtime() noexcept { return *runtime_; }
  AuditLog& audit() noexcept { return *audit_; }
  std::shared_ptr<Store> store(DbKind kind) const;
  const ServiceConfig& config() const noexcept { return cfg_; }

private:
  void load_sessions();
  void log_session(const json& line);
  void expire_sessions(std::int64_t now);
  void background_loop();
  void install_routes();

  ServiceConfig cfg_;
  std::unique_ptr<AuditLog> audit_;
  std::unique_ptr<ModelBackend> backend_;
  std::map<DbKind, std::shared_ptr<Store>> stores_;
  std::map<DbKind, std::uint64_t> persisted_counts_;
  std::mutex flush_mutex_;
  std::unique_ptr<AgentRuntime> runtime_;

  std::mutex sessions_mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::mutex session_log_mutex_;
  std::uint64_t next_session_ = 1;

  std::mutex incidents_mutex_;
  std::map<std::string, PatternReport> reports_;    // report_id -> newest version
  std::map<std::string, Incident> incidents_;       // incident_id -> incident
  std::map<std::string, IncidentStatus> statuses_;  // survives regrouping
  std::mutex tick_mutex_;

  std::unique_ptr<httplib::Server> server_;
  std::thread server_thread_;
  std::thread loop_thread_;
  std::mutex loop_mutex_;
  std::condition_variable loop_cv_;
  bool stopping_ = false;
  std::atomic<bool> running_{false};
};

} // namespace netmon
