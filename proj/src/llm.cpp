#include "netmon/llm.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <regex>
#include <sstream>

#include <httplib.h>

#include "netmon/error.hpp"

namespace netmon {

const char* to_string(Role role) noexcept {
  switch (role) {
  case Role::system: return "system";
  case Role::user: return "user";
  case Role::assistant: return "assistant";
  case Role::tool: return "tool";
  }
  return "unknown";
}

std::optional<Role> parse_role(std::string_view text) noexcept {
  if (text == "system") return Role::system;
  if (text == "user") return Role::user;
  if (text == "assistant") return Role::assistant;
  if (text == "tool") return Role::tool;
  return std::nullopt;
}

void ChatTurn::validate() const {
  if (role == Role::tool && !tool_result) throw Error(Errc::validation, "tool turn without result");
  if (role == Role::assistant && content.empty() && tool_calls.empty())
    throw Error(Errc::validation, "assistant turn carries neither content nor tool calls");
  if (role != Role::assistant && !tool_calls.empty())
    throw Error(Errc::validation, "only assistant turns carry tool calls");
}

ChatTurn ChatTurn::tool(const ToolResult& result) {
  ChatTurn t;
  t.role = Role::tool;
  t.tool_result = serialize_tool_result(result);
  return t;
}

json to_json(const ChatTurn& turn) {
  json j = {{"role", to_string(turn.role)}, {"content", turn.content}};
  if (!turn.tool_calls.empty()) j["tool_calls"] = tool_calls_to_wire(turn.tool_calls);
  if (turn.tool_result) j["tool_result"] = *turn.tool_result;
  if (turn.unanswered) j["unanswered"] = true;
  return j;
}

ChatTurn chat_turn_from_json(const json& j) {
  ChatTurn t;
  const auto role = parse_role(j.at("role").get<std::string>());
  if (!role) throw Error(Errc::malformed_payload, "unknown role");
  t.role = *role;
  t.content = j.value("content", std::string());
  if (j.contains("tool_calls")) t.tool_calls = tool_calls_from_wire(j.at("tool_calls"));
  if (j.contains("tool_result")) t.tool_result = j.at("tool_result").get<std::string>();
  t.unanswered = j.value("unanswered", false);
  return t;
}

void BackendConfig::validate() const {
  if (kind == Kind::http) {
    if (endpoint_url.empty()) throw Error(Errc::config, "http backend needs endpoint_url");
    if (model_name.empty()) throw Error(Errc::config, "http backend needs model_name");
    if (!(timeout_s > 0.0)) throw Error(Errc::config, "timeout_s must be positive");
  } else if (script_path.empty()) {
    throw Error(Errc::config, "scripted backend needs script_path");
  }
  if (max_tokens <= 0) throw Error(Errc::config, "max_tokens must be positive");
}

// ---------------------------------------------------------------------------
// Wire codec

namespace {

[[noreturn]] void malformed(const std::string& what) { throw Error(Errc::malformed_payload, what); }

json parse_json(std::string_view text, const std::string& where) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    malformed(where + ": invalid JSON at byte " + std::to_string(e.byte) + " (" + e.what() + ")");
  }
}

} // namespace

json tool_calls_to_wire(std::span<const ToolCall> calls) {
  json array = json::array();
  for (const auto& c : calls) {
    array.push_back({{"id", c.call_id},
                     {"type", "function"},
                     {"function", {{"name", c.tool_name}, {"arguments", c.arguments.dump()}}}});
  }
  return array;
}

std::vector<ToolCall> tool_calls_from_wire(const json& array) {
  if (!array.is_array()) malformed("tool_calls must be an array");
  std::vector<ToolCall> out;
  out.reserve(array.size());
  for (std::size_t i = 0; i < array.size(); ++i) {
    const std::string where = "tool_calls[" + std::to_string(i) + "]";
    const json& item = array[i];
    if (!item.is_object()) malformed(where + " must be an object");
    if (!item.contains("id") || !item["id"].is_string()) malformed(where + ".id must be a string");
    if (item.contains("type") && item["type"] != "function") malformed(where + ".type must be 'function'");
    if (!item.contains("function") || !item["function"].is_object())
      malformed(where + ".function must be an object");
    const json& fn = item["function"];
    if (!fn.contains("name") || !fn["name"].is_string() || fn["name"].get_ref<const std::string&>().empty())
      malformed(where + ".function.name must be a nonempty string");
    ToolCall call;
    call.call_id = item["id"].get<std::string>();
    call.tool_name = fn["name"].get<std::string>();
    if (!fn.contains("arguments") || fn["arguments"].is_null()) {
      call.arguments = json::object();
    } else if (fn["arguments"].is_string()) {
      const auto& text = fn["arguments"].get_ref<const std::string&>();
      call.arguments = text.empty() ? json::object() : parse_json(text, where + ".function.arguments");
    } else {
      call.arguments = fn["arguments"];
    }
    if (!call.arguments.is_object()) malformed(where + ".function.arguments must be an object");
    out.push_back(std::move(call));
  }
  return out;
}

std::string serialize_tool_calls(std::span<const ToolCall> calls) { return tool_calls_to_wire(calls).dump(); }

std::vector<ToolCall> parse_tool_calls(std::string_view payload) {
  return tool_calls_from_wire(parse_json(payload, "tool_calls"));
}

std::string serialize_tool_result(const ToolResult& result) {
  json j = {{"call_id", result.call_id}, {"tool", result.tool_name}, {"ok", result.ok}};
  if (result.ok) {
    j["result"] = result.value;
  } else {
    j["error"] = result.error;
  }
  return j.dump();
}

ToolResult parse_tool_result(std::string_view payload) {
  const json j = parse_json(payload, "tool_result");
  if (!j.is_object()) malformed("tool_result must be an object");
  auto str = [&](const char* key) {
    if (!j.contains(key) || !j[key].is_string()) malformed(std::string("tool_result.") + key + " must be a string");
    return j[key].get<std::string>();
  };
  ToolResult r;
  r.call_id = str("call_id");
  r.tool_name = str("tool");
  if (!j.contains("ok") || !j["ok"].is_boolean()) malformed("tool_result.ok must be a boolean");
  r.ok = j["ok"].get<bool>();
  if (r.ok) {
    if (!j.contains("result")) malformed("tool_result.result missing");
    r.value = j["result"];
  } else {
    r.error = str("error");
  }
  return r;
}

// ---------------------------------------------------------------------------
// Prompt assembly

std::size_t turn_chars(const ChatTurn& turn) {
  std::size_t n = turn.content.size();
  if (turn.tool_result) n += turn.tool_result->size();
  for (const auto& c : turn.tool_calls) n += c.tool_name.size() + c.arguments.dump().size();
  return n;
}

std::vector<ChatTurn> assemble_prompt(std::string_view role_prompt, std::string_view scope_schema,
                                      std::span<const ChatTurn> history, std::string_view question,
                                      std::size_t budget) {
  std::string system(role_prompt);
  if (!scope_schema.empty()) {
    if (!system.empty()) system += "\n\n";
    system += scope_schema;
  }
  std::string q(question);
  if (q.size() > budget) q.resize(budget);
  const std::size_t room = budget - q.size();
  if (system.size() > room) system.resize(room);

  std::size_t remaining = room - system.size();
  std::size_t first_kept = history.size();
  while (first_kept > 0) {
    const std::size_t cost = turn_chars(history[first_kept - 1]);
    if (cost > remaining) break;
    remaining -= cost;
    --first_kept;
  }
  // A tool result without the assistant turn that requested it is noise.
  while (first_kept < history.size() && history[first_kept].role == Role::tool) ++first_kept;

  std::vector<ChatTurn> out;
  out.reserve(history.size() - first_kept + 2);
  out.push_back(ChatTurn::system(std::move(system)));
  for (std::size_t i = first_kept; i < history.size(); ++i) {
    if (history[i].role == Role::system) continue;
    out.push_back(history[i]);
  }
  out.push_back(ChatTurn::user(std::move(q)));
  return out;
}

// ---------------------------------------------------------------------------
// Scripted backend

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

// Index of the parenthesis closing the one at `open`, skipping JSON strings.
std::size_t matching_paren(std::string_view s, std::size_t open) {
  int depth = 0;
  bool in_string = false;
  for (std::size_t i = open; i < s.size(); ++i) {
    const char c = s[i];
    if (in_string) {
      if (c == '\\') ++i;
      else if (c == '"') in_string = false;
      continue;
    }
    if (c == '"') in_string = true;
    else if (c == '(') ++depth;
    else if (c == ')' && --depth == 0) return i;
  }
  return std::string_view::npos;
}

ScriptedBackend::Action parse_action(std::string_view text, std::size_t line_no) {
  auto fail = [line_no](const std::string& what) -> void {
    throw Error(Errc::config, "script line " + std::to_string(line_no) + ": " + what);
  };
  ScriptedBackend::Action action;
  if (text.rfind("say:", 0) == 0) {
    action.kind = ScriptedBackend::Action::Kind::say;
    action.text = std::string(trim(text.substr(4)));
    if (action.text.empty()) fail("say: needs text");
    return action;
  }
  if (text.rfind("call:", 0) != 0) fail("action must start with say: or call:");
  action.kind = ScriptedBackend::Action::Kind::call;
  std::string_view rest = text;
  while (!rest.empty()) {
    rest = trim(rest);
    if (rest.rfind("call:", 0) == 0) rest.remove_prefix(5);
    const std::size_t open = rest.find('(');
    if (open == std::string_view::npos) fail("call: needs (arguments)");
    const std::size_t close = matching_paren(rest, open);
    if (close == std::string_view::npos) fail("unbalanced parentheses");
    ToolCall call;
    call.tool_name = std::string(trim(rest.substr(0, open)));
    if (call.tool_name.empty()) fail("call: needs a tool name");
    const std::string_view args = trim(rest.substr(open + 1, close - open - 1));
    if (!args.empty()) {
      try {
        call.arguments = json::parse(args.begin(), args.end());
      } catch (const json::parse_error& e) {
        fail(std::string("arguments are not JSON: ") + e.what());
      }
      if (!call.arguments.is_object()) fail("arguments must be a JSON object");
    }
    action.calls.push_back(std::move(call));
    rest = trim(rest.substr(close + 1));
    if (!rest.empty()) {
      if (rest.front() != ';') fail("expected ';' between calls");
      rest.remove_prefix(1);
    }
  }
  return action;
}

const json* walk(const json& root, std::string_view path) {
  const json* node = &root;
  while (!path.empty()) {
    const std::size_t dot = path.find('.');
    const std::string key(path.substr(0, dot));
    path = dot == std::string_view::npos ? std::string_view{} : path.substr(dot + 1);
    if (node->is_object()) {
      const auto it = node->find(key);
      if (it == node->end()) return nullptr;
      node = &*it;
    } else if (node->is_array() && !key.empty() &&
               std::all_of(key.begin(), key.end(), [](unsigned char c) { return std::isdigit(c); })) {
      const std::size_t idx = std::stoul(key);
      if (idx >= node->size()) return nullptr;
      node = &(*node)[idx];
    } else {
      return nullptr;
    }
  }
  return node;
}

std::string render(std::string_view text, const json& result, std::string_view question) {
  std::string out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t open = text.find("{{", pos);
    if (open == std::string_view::npos) break;
    const std::size_t close = text.find("}}", open);
    if (close == std::string_view::npos) break;
    out.append(text.substr(pos, open - pos));
    const std::string_view name = trim(text.substr(open + 2, close - open - 2));
    if (name == "question") {
      out.append(question);
    } else if (name == "result" || name.rfind("result.", 0) == 0) {
      const json* node = name == "result" ? &result : walk(result, name.substr(7));
      if (!node) out += "<missing:" + std::string(name) + ">";
      else if (node->is_string()) out += node->get<std::string>();
      else out += node->dump();
    } else {
      out.append(text.substr(open, close + 2 - open));
    }
    pos = close + 2;
  }
  out.append(text.substr(pos));
  return out;
}

} // namespace

ScriptedBackend ScriptedBackend::from_text(std::string_view script) {
  static constexpr std::string_view kArrowUtf8 = "\xE2\x86\x92"; // →
  ScriptedBackend backend;
  std::size_t line_no = 0;
  std::istringstream in{std::string(script)};
  std::string raw;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = trim(raw);
    if (line.empty() || line.front() == '#') continue;

    std::string_view pattern;
    std::string_view remainder;
    if (line.front() == '"') {
      const std::size_t end = line.find('"', 1);
      if (end == std::string_view::npos)
        throw Error(Errc::config, "script line " + std::to_string(line_no) + ": unterminated pattern");
      pattern = line.substr(1, end - 1);
      remainder = trim(line.substr(end + 1));
    } else {
      const std::size_t a = std::min(line.find("->"), line.find(kArrowUtf8));
      if (a == std::string_view::npos)
        throw Error(Errc::config, "script line " + std::to_string(line_no) + ": missing arrow");
      pattern = trim(line.substr(0, a));
      remainder = line.substr(a);
    }
    if (remainder.rfind("->", 0) == 0) remainder.remove_prefix(2);
    else if (remainder.rfind(kArrowUtf8, 0) == 0) remainder.remove_prefix(kArrowUtf8.size());
    else throw Error(Errc::config, "script line " + std::to_string(line_no) + ": missing arrow");
    if (pattern.empty())
      throw Error(Errc::config, "script line " + std::to_string(line_no) + ": empty pattern");
    backend.rules_.push_back({lower(pattern), parse_action(trim(remainder), line_no)});
  }
  return backend;
}

ScriptedBackend ScriptedBackend::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::config, "cannot read script " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return from_text(text.str());
}

std::string ScriptedBackend::describe() const {
  return "scripted(" + std::to_string(rules_.size()) + " rules)";
}

ChatTurn ScriptedBackend::complete(std::span<const ChatTurn> history, std::span<const ToolSchema>) {
  if (history.empty() || history.front().role != Role::system)
    throw Error(Errc::validation, "history must start with a system turn");

  const ChatTurn* newest = nullptr;
  const ChatTurn* newest_user = nullptr;
  const ChatTurn* newest_tool = nullptr;
  for (auto it = history.rbegin(); it != history.rend(); ++it) {
    if (it->role == Role::user && !newest_user) newest_user = &*it;
    if (it->role == Role::tool && !newest_tool) newest_tool = &*it;
    if (!newest && (it->role == Role::user || it->role == Role::tool)) newest = &*it;
  }
  if (!newest) throw Error(Errc::no_script_match, "no user or tool turn to match");

  json result;
  std::string target;
  if (newest_tool) {
    const ToolResult r = parse_tool_result(*newest_tool->tool_result);
    result = r.ok ? r.value : json{{"error", r.error}};
  }
  if (newest->role == Role::tool) {
    const ToolResult r = parse_tool_result(*newest->tool_result);
    target = "tool:" + r.tool_name + " " + *newest->tool_result;
  } else {
    target = newest->content;
  }
  const std::string haystack = lower(target);

  for (const auto& rule : rules_) {
    if (haystack.find(rule.pattern) == std::string::npos) continue;
    ChatTurn turn;
    turn.role = Role::assistant;
    if (rule.action.kind == Action::Kind::say) {
      turn.content = render(rule.action.text, result, newest_user ? newest_user->content : "");
    } else {
      turn.tool_calls = rule.action.calls;
      for (std::size_t i = 0; i < turn.tool_calls.size(); ++i)
        turn.tool_calls[i].call_id = "call_" + std::to_string(history.size()) + "_" + std::to_string(i);
    }
    return turn;
  }
  throw Error(Errc::no_script_match, "no rule matches '" + target.substr(0, 120) + "'");
}

// ---------------------------------------------------------------------------
// HTTP backend

HttpBackend::HttpBackend(BackendConfig cfg) : cfg_(std::move(cfg)) {
  static const std::regex url(R"(^(http)://([^/:]+)(:[0-9]+)?(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(cfg_.endpoint_url, m, url))
    throw Error(Errc::config, "endpoint_url must be http://host[:port]/path, got '" + cfg_.endpoint_url + "'");
  base_ = m[1].str() + "://" + m[2].str() + m[3].str();
  path_ = m[4].matched ? m[4].str() : "/v1/chat/completions";
}

std::string HttpBackend::describe() const { return "http(" + cfg_.endpoint_url + ", " + cfg_.model_name + ")"; }

json HttpBackend::build_request(std::span<const ChatTurn> history, std::span<const ToolSchema> tools) const {
  json messages = json::array();
  for (const auto& turn : history) {
    json m = {{"role", to_string(turn.role)}};
    switch (turn.role) {
    case Role::assistant:
      m["content"] = turn.content.empty() ? json(nullptr) : json(turn.content);
      if (!turn.tool_calls.empty()) m["tool_calls"] = tool_calls_to_wire(turn.tool_calls);
      break;
    case Role::tool: {
      const ToolResult r = parse_tool_result(*turn.tool_result);
      m["tool_call_id"] = r.call_id;
      m["content"] = *turn.tool_result;
      break;
    }
    default:
      m["content"] = turn.content;
    }
    messages.push_back(std::move(m));
  }
  json body = {{"model", cfg_.model_name},
               {"messages", std::move(messages)},
               {"temperature", cfg_.temperature},
               {"max_tokens", cfg_.max_tokens},
               {"stream", false}};
  if (!tools.empty()) {
    json list = json::array();
    for (const auto& t : tools)
      list.push_back({{"type", "function"},
                      {"function", {{"name", t.name}, {"description", t.description}, {"parameters", t.parameters}}}});
    body["tools"] = std::move(list);
  }
  return body;
}

ChatTurn HttpBackend::parse_response(std::string_view body) {
  json j;
  try {
    j = json::parse(body.begin(), body.end());
  } catch (const json::parse_error& e) {
    throw Error(Errc::malformed_response, "invalid JSON at byte " + std::to_string(e.byte));
  }
  const json* message = walk(j, "choices.0.message");
  if (!message || !message->is_object()) throw Error(Errc::malformed_response, "missing choices[0].message");
  ChatTurn turn;
  turn.role = Role::assistant;
  if (message->contains("content") && (*message)["content"].is_string())
    turn.content = (*message)["content"].get<std::string>();
  if (message->contains("tool_calls") && !(*message)["tool_calls"].is_null()) {
    try {
      turn.tool_calls = tool_calls_from_wire((*message)["tool_calls"]);
    } catch (const Error& e) {
      throw Error(Errc::malformed_response, e.what());
    }
  }
  if (turn.content.empty() && turn.tool_calls.empty())
    throw Error(Errc::malformed_response, "assistant message has neither content nor tool calls");
  return turn;
}

namespace {

void apply_timeouts(httplib::Client& client, double timeout_s) {
  const auto secs = static_cast<time_t>(timeout_s);
  const auto usecs = static_cast<time_t>((timeout_s - static_cast<double>(secs)) * 1e6);
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);
}

} // namespace

ChatTurn HttpBackend::complete(std::span<const ChatTurn> history, std::span<const ToolSchema> tools) {
  httplib::Client client(base_);
  apply_timeouts(client, cfg_.timeout_s);
  const auto res = client.Post(path_, build_request(history, tools).dump(), "application/json");
  if (!res)
    throw Error(Errc::backend_unreachable, cfg_.endpoint_url + ": " + httplib::to_string(res.error()));
  if (res->status >= 500)
    throw Error(Errc::backend_unreachable, cfg_.endpoint_url + ": HTTP " + std::to_string(res->status));
  if (res->status != 200)
    throw Error(Errc::malformed_response, cfg_.endpoint_url + ": HTTP " + std::to_string(res->status));
  return parse_response(res->body);
}

bool HttpBackend::reachable() {
  httplib::Client client(base_);
  apply_timeouts(client, std::min(cfg_.timeout_s, 2.0));
  // Any HTTP answer counts; only transport failures mean unreachable.
  return static_cast<bool>(client.Get("/"));
}

std::unique_ptr<ModelBackend> make_backend(const BackendConfig& cfg) {
  cfg.validate();
  if (cfg.kind == BackendConfig::Kind::http) return std::make_unique<HttpBackend>(cfg);
  return std::make_unique<ScriptedBackend>(ScriptedBackend::from_file(cfg.script_path));
}

} // namespace netmon
