#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace netmon {

using json = nlohmann::json;

enum class Role { system, user, assistant, tool };

const char* to_string(Role role) noexcept;
std::optional<Role> parse_role(std::string_view text) noexcept;

struct ToolCall {
  std::string call_id;
  std::string tool_name;
  json arguments = json::object();

  bool operator==(const ToolCall&) const = default;
};

/// Outcome of one tool execution as it travels back to the model.
struct ToolResult {
  std::string call_id;
  std::string tool_name;
  bool ok = true;
  json value;        // result payload when ok
  std::string error; // error code and message when !ok

  bool operator==(const ToolResult&) const = default;
};

struct ChatTurn {
  Role role = Role::user;
  std::string content;
  std::vector<ToolCall> tool_calls;        // assistant only
  std::optional<std::string> tool_result;  // tool only: serialized ToolResult
  bool unanswered = false;                 // user turn whose completion failed

  bool operator==(const ChatTurn&) const = default;

  void validate() const; // throws Error(validation)

  static ChatTurn system(std::string text) { return {Role::system, std::move(text), {}, {}, false}; }
  static ChatTurn user(std::string text) { return {Role::user, std::move(text), {}, {}, false}; }
  static ChatTurn assistant(std::string text) { return {Role::assistant, std::move(text), {}, {}, false}; }
  static ChatTurn tool(const ToolResult& result);
};

json to_json(const ChatTurn& turn);
ChatTurn chat_turn_from_json(const json& j);

struct ToolSchema {
  std::string name;
  std::string description;
  json parameters = json::object(); // JSON-schema object
};

struct BackendConfig {
  enum class Kind { http, scripted };
  Kind kind = Kind::scripted;
  std::string endpoint_url; // http: e.g. http://127.0.0.1:11434/v1/chat/completions
  std::string model_name = "llama3.2";
  double temperature = 0.0;
  int max_tokens = 1024;
  double timeout_s = 30.0;
  std::filesystem::path script_path; // scripted

  void validate() const; // throws Error(config)
};

class ModelBackend {
public:
  virtual ~ModelBackend() = default;
  // Returns one assistant turn with either final text or at least one tool call.
  virtual ChatTurn complete(std::span<const ChatTurn> history, std::span<const ToolSchema> tools) = 0;
  virtual bool reachable() = 0;
  virtual std::string describe() const = 0;
};

/// Deterministic stand-in for a model: ordered `pattern -> action` rules,
/// first match against the newest user or tool turn wins.
///
/// Script lines:
///   # comment
///   "how many interfaces" -> call:list_entities()
///   tool:list_entities -> say:There are {{result.count}} interfaces.
/// Patterns match case-insensitively as substrings. A tool turn is matched
/// as `tool:<name> <serialized result>`. `say:` text may reference
/// {{question}}, {{result}} and {{result.<dotted.path>}} from the newest
/// user and tool turns. Several calls may be chained with `;`.
class ScriptedBackend : public ModelBackend {
public:
  struct Action {
    enum class Kind { say, call };
    Kind kind = Kind::say;
    std::string text;             // say
    std::vector<ToolCall> calls;  // call (call ids assigned per completion)
  };
  struct Rule {
    std::string pattern; // lower-cased
    Action action;
  };

  static ScriptedBackend from_text(std::string_view script);
  static ScriptedBackend from_file(const std::filesystem::path& path);

  ChatTurn complete(std::span<const ChatTurn> history, std::span<const ToolSchema> tools) override;
  bool reachable() override { return true; }
  std::string describe() const override;

  const std::vector<Rule>& rules() const noexcept { return rules_; }

private:
  std::vector<Rule> rules_;
};

/// Chat-completions client for a model served on the same host.
class HttpBackend : public ModelBackend {
public:
  explicit HttpBackend(BackendConfig cfg);

  ChatTurn complete(std::span<const ChatTurn> history, std::span<const ToolSchema> tools) override;
  bool reachable() override;
  std::string describe() const override;

  json build_request(std::span<const ChatTurn> history, std::span<const ToolSchema> tools) const;
  static ChatTurn parse_response(std::string_view body);

private:
  BackendConfig cfg_;
  std::string base_;  // scheme://host:port
  std::string path_;  // request path
};

std::unique_ptr<ModelBackend> make_backend(const BackendConfig& cfg);

// Wire codec. Tool calls travel as the chat-completions `tool_calls` array:
// [{"id":..,"type":"function","function":{"name":..,"arguments":"<json text>"}}].
std::string serialize_tool_calls(std::span<const ToolCall> calls);
// Throws Error(malformed_payload) with the byte offset; never returns a partial list.
std::vector<ToolCall> parse_tool_calls(std::string_view payload);
std::vector<ToolCall> tool_calls_from_wire(const json& array);
json tool_calls_to_wire(std::span<const ToolCall> calls);

std::string serialize_tool_result(const ToolResult& result);
ToolResult parse_tool_result(std::string_view payload);

inline constexpr std::size_t kDefaultPromptBudget = 6000;

std::size_t turn_chars(const ChatTurn& turn);

// System turn (role prompt + scope schema), then as much of the history as
// fits (oldest dropped first), then the question. The system turn is only
// cut when the question alone leaves no room for it.
std::vector<ChatTurn> assemble_prompt(std::string_view role_prompt, std::string_view scope_schema,
                                      std::span<const ChatTurn> history, std::string_view question,
                                      std::size_t budget = kDefaultPromptBudget);

} // namespace netmon
