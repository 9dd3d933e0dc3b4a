#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "netmon/anomaly.hpp"
#include "netmon/correlator.hpp"
#include "netmon/llm.hpp"
#include "netmon/report.hpp"
#include "netmon/tsdb.hpp"

namespace netmon {

inline constexpr int kDefaultStepBudget = 8;
// ---------------------------------------------------------------------------
// Audit trail

/// Append-only, line-delimited JSON audit records with a monotonic `seq`.
/// Thread-safe; optionally mirrored to a file.
class AuditLog {
public:
  AuditLog() = default;
  explicit AuditLog(const std::filesystem::path& path);

  std::uint64_t append(json record);
  std::vector<json> entries() const;
  std::vector<json> entries_of_type(std::string_view type) const;
  std::size_t size() const;

private:
  mutable std::mutex mutex_;
  std::vector<json> entries_;
  std::uint64_t next_seq_ = 1;
  std::unique_ptr<std::ofstream> sink_;
};

/// Read access to exactly one store on behalf of one agent; every access is
/// written to the audit log.
class ScopedStore {
public:
  ScopedStore(std::string agent_id, std::shared_ptr<const Store> store, AuditLog& audit);

  const Store& read(std::string_view op) const;
  const std::string& scope() const noexcept { return store_->name(); }
  DbKind kind() const noexcept { return store_->kind(); }

private:
  std::string agent_id_;
  std::shared_ptr<const Store> store_;
  AuditLog* audit_;
};

// ---------------------------------------------------------------------------
// Agents, messages, plans

struct AgentSpec {
  std::string agent_id;
  std::string scope; // store name; empty for the coordinator
  std::vector<std::string> tool_whitelist;
  std::string role_prompt;
};

enum class MessageKind { report, ask, answer, plan, result };
const char* to_string(MessageKind k) noexcept;
std::optional<MessageKind> parse_message_kind(std::string_view s) noexcept;

inline constexpr std::string_view kBroadcast = "*";

struct AgentMessage {
  std::uint64_t msg_id = 0;
  std::string sender;
  std::string recipient; // agent id or kBroadcast
  MessageKind kind = MessageKind::result;
  json payload;
  std::int64_t ts = 0;
  std::uint64_t reply_to = 0;
};

json to_json(const AgentMessage& m);

enum class StepStatus { pending, done, failed };
const char* to_string(StepStatus s) noexcept;

struct AgentPlan {
  struct Step {
    std::string agent_id;
    std::string question;
    StepStatus status = StepStatus::pending;
    std::string answer;
    std::string error;
    bool partial = false;
    std::size_t findings = 0;
    bool consulted_detector = false;
  };
  std::string plan_id;
  std::string query;
  std::vector<Step> steps;
  std::string planner; // model, fallback or cache

  bool complete() const noexcept;
};

json to_json(const AgentPlan& plan);

struct IsolationVerdict {
  bool pass = true;
  std::string reason;
};

// ---------------------------------------------------------------------------
// Tools

struct TranscriptEntry {
  int step = 0;
  std::string agent_id;
  std::string store; // scope read, empty when none
  ToolCall call;
  ToolResult result;
  bool denied = false;
  std::string digest; // crc32 of the serialized result
};

json to_json(const TranscriptEntry& e);

struct ToolContext {
  const AgentSpec& agent;
  const ScopedStore* store; // null for the coordinator
  const DetectorConfig& detector;
  const TopologyMap& topology;
};

using ToolHandler = std::function<json(const json& args, const ToolContext& ctx)>;

struct ToolDef {
  ToolSchema schema;
  std::optional<DbKind> only_for; // restrict to one database kind
  bool needs_store = true;
  ToolHandler handler;
};

class ToolRegistry {
public:
  void add(ToolDef def);
  const ToolDef* find(std::string_view name) const;
  std::vector<ToolSchema> schemas(std::span<const std::string> names) const;
  // Tools usable against a store of `kind`.
  std::vector<std::string> names_for(DbKind kind) const;

  static ToolRegistry with_defaults();

private:
  std::vector<ToolDef> tools_;
};

struct QueryResult {
  std::string answer;
  bool partial = false;
  int steps = 0;
  std::vector<TranscriptEntry> transcript;
  std::vector<ChatTurn> turns; // prompt plus everything the loop appended
  std::size_t findings = 0;    // anomaly events surfaced by detection tools
  bool consulted_detector = false;
};

class Agent {
public:
  Agent(AgentSpec spec, std::shared_ptr<const Store> store, const ToolRegistry& tools,
        ModelBackend& backend, DetectorConfig detector, const TopologyMap& topology, AuditLog& audit);

  const AgentSpec& spec() const noexcept { return spec_; }
  const std::string& id() const noexcept { return spec_.agent_id; }
  const ScopedStore* store() const noexcept { return store_ ? &*store_ : nullptr; }
  const DetectorConfig& detector() const noexcept { return detector_; }

  // Monitoring then identification over every entity in scope.
  std::optional<PatternReport> tick(Window window);
  // The tool-using reasoning loop.
  QueryResult handle_query(std::string_view question, std::span<const ChatTurn> history,
                           int step_budget = kDefaultStepBudget);

  std::string scope_schema() const;
  std::mutex& inbox_mutex() noexcept { return inbox_mutex_; }

private:
  ToolResult execute(const ToolCall& call, bool& denied);

  AgentSpec spec_;
  std::optional<ScopedStore> store_;
  const ToolRegistry* tools_;
  ModelBackend* backend_;
  DetectorConfig detector_;
  const TopologyMap* topology_;
  AuditLog* audit_;
  std::mutex inbox_mutex_;
};

// Escalation: any critical event, or at least three warn events on one entity.
bool should_escalate(std::span<const AnomalyEvent> events);

// ---------------------------------------------------------------------------
// Isolation

struct ScopeDirectory {
  std::map<std::string, std::string> scope_of; // agent id -> store name ("" for coordinator)
};

// Pure check: pass iff the payload matches the schema for its kind, carries
// nothing shaped like a raw telemetry record, and every store named in the
// attached evidence is the sender's own scope.
IsolationVerdict enforce_isolation(const AgentMessage& msg, const ScopeDirectory& scopes);

class MessageBus {
public:
  MessageBus(const ScopeDirectory& scopes, AuditLog& audit);

  // Assigns msg_id and delivers, or drops and audits a violation.
  IsolationVerdict send(AgentMessage msg);
  std::vector<AgentMessage> drain(const std::string& agent_id);
  std::vector<AgentMessage> history() const;

private:
  const ScopeDirectory* scopes_;
  AuditLog* audit_;
  mutable std::mutex mutex_;
  std::uint64_t next_id_ = 1;
  std::vector<AgentMessage> log_;
  std::map<std::string, std::deque<AgentMessage>> inboxes_;
};

// ---------------------------------------------------------------------------
// Runtime

struct TickOutcome {
  std::vector<PatternReport> reports;             // sorted by agent id
  std::map<std::string, std::string> errors;      // agent id -> message
};

struct CoordinationResult {
  std::string answer;
  bool partial = false;
  AgentPlan plan;
  std::vector<json> evidence; // answer-message evidence, in plan order
  bool backend_unreachable = false; // every step failed for lack of a model
};

class AgentRuntime {
public:
  AgentRuntime(ModelBackend& backend, TopologyMap topology, AuditLog& audit,
               ToolRegistry tools = ToolRegistry::with_defaults());

  // Registers the standard agent for a store: "<store>-agent".
  Agent& add_store_agent(std::shared_ptr<const Store> store, DetectorConfig detector,
                         std::string role_prompt = {});
  Agent& add_agent(AgentSpec spec, std::shared_ptr<const Store> store, DetectorConfig detector);

  Agent* find(std::string_view agent_id);
  std::vector<std::string> agent_ids() const;
  const AgentSpec& coordinator() const noexcept { return coordinator_; }

  TickOutcome tick_all(Window window);
  QueryResult handle_query(std::string_view agent_id, std::string_view question,
                           std::span<const ChatTurn> history, int step_budget = kDefaultStepBudget);
  CoordinationResult coordinate(std::string_view question, std::span<const ChatTurn> history,
                                const AgentPlan* cached_plan = nullptr,
                                int step_budget = kDefaultStepBudget);

  AgentPlan make_plan(std::string_view question);
  std::vector<PatternReport> recent_reports() const;

  MessageBus& bus() noexcept { return bus_; }
  const ScopeDirectory& scopes() const noexcept { return scopes_; }
  const TopologyMap& topology() const noexcept { return topology_; }
  AuditLog& audit() noexcept { return *audit_; }

private:
  AgentPlan fallback_plan(std::string_view question) const;
  void run_step(AgentPlan::Step& step, std::span<const ChatTurn> history, int step_budget,
                std::vector<json>& evidence);

  ModelBackend* backend_;
  TopologyMap topology_;
  AuditLog* audit_;
  ToolRegistry tools_;
  ScopeDirectory scopes_;
  MessageBus bus_;
  AgentSpec coordinator_;
  std::vector<std::unique_ptr<Agent>> agents_;
  mutable std::mutex reports_mutex_;
  std::vector<PatternReport> recent_reports_;
  std::uint64_t next_plan_ = 1;
};

} // namespace netmon
