#include "netmon/ops.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "netmon/error.hpp"
#include "netmon/tsdb.hpp"

namespace netmon {

namespace fs = std::filesystem;

fs::path store_path(const fs::path& dir, DbKind kind) { return dir / (std::string(to_string(kind)) + ".nwts"); }

std::vector<Record> read_records(std::span<const fs::path> files, std::vector<std::string>& errors) {
  std::vector<Record> out;
  for (const auto& file : files) {
    std::ifstream in(file, std::ios::binary);
    if (!in) {
      errors.push_back(file.string() + ": cannot open");
      continue;
    }
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line.front() == '#') continue;
      try {
        out.push_back(parse_record(line, line_no));
      } catch (const Error& e) {
        errors.push_back(file.string() + ":" + std::to_string(line_no) + ": " + e.what());
      }
    }
  }
  return out;
}

IngestSummary ingest_files(std::span<const fs::path> files, const fs::path& store_dir) {
  fs::create_directories(store_dir);
  IngestSummary summary;
  std::map<DbKind, std::unique_ptr<Store>> stores;
  for (auto kind : {DbKind::interface, DbKind::flow, DbKind::optical}) {
    const auto path = store_path(store_dir, kind);
    stores[kind] = fs::exists(path) ? Store::open(path) : std::make_unique<Store>(kind, to_string(kind));
    summary.accepted[kind] = 0;
  }
  for (const auto& r : read_records(files, summary.errors)) {
    try {
      stores.at(kind_of(r))->append(r);
      ++summary.accepted[kind_of(r)];
    } catch (const Error& e) {
      summary.errors.push_back(to_string(kind_of(r)) + std::string(" ") + entity_of(r) + "@" +
                               std::to_string(timestamp_of(r)) + ": " + e.what());
    }
  }
  for (const auto& [kind, store] : stores) store->persist(store_path(store_dir, kind));
  return summary;
}

ReplayStats replay_records(std::span<const Record> input, const ReplayOptions& opt) {
  if (!(opt.speedup > 0.0)) throw Error(Errc::validation, "speedup must be positive");
  std::vector<const Record*> order;
  for (const auto& r : input) order.push_back(&r);
  std::stable_sort(order.begin(), order.end(),
                   [](const Record* a, const Record* b) { return timestamp_of(*a) < timestamp_of(*b); });

  httplib::Client client(opt.url);
  client.set_connection_timeout(5);
  client.set_read_timeout(60);
  httplib::Headers headers;
  if (!opt.token.empty()) headers.emplace("Authorization", "Bearer " + opt.token);

  ReplayStats stats;
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  const std::int64_t ts0 = order.empty() ? 0 : timestamp_of(*order.front());
  std::size_t i = 0;
  while (i < order.size()) {
    const double elapsed = std::chrono::duration<double>(clock::now() - t0).count();
    const double due = static_cast<double>(timestamp_of(*order[i]) - ts0) / opt.speedup;
    if (due > elapsed) {
      std::this_thread::sleep_for(std::chrono::duration<double>(std::min(due - elapsed, opt.batch_interval_s)));
      continue;
    }
    std::string body;
    const double horizon = elapsed + opt.batch_interval_s;
    std::size_t n = 0;
    while (i < order.size() && static_cast<double>(timestamp_of(*order[i]) - ts0) / opt.speedup <= horizon) {
      body += format_record(*order[i++]);
      body += '\n';
      ++n;
    }
    auto res = client.Post("/api/ingest", headers, body, "text/plain");
    if (!res) throw Error(Errc::gateway_unreachable, opt.url + ": " + httplib::to_string(res.error()));
    if (res->status != 200)
      throw Error(Errc::gateway_unreachable, opt.url + " answered " + std::to_string(res->status) + ": " + res->body);
    const auto reply = nlohmann::json::parse(res->body, nullptr, false);
    if (reply.is_object() && reply.contains("accepted"))
      for (const auto& [k, v] : reply["accepted"].items()) stats.accepted[k] += v.get<std::uint64_t>();
    stats.sent += n;
    ++stats.batches;
  }
  stats.elapsed_s = std::chrono::duration<double>(clock::now() - t0).count();
  return stats;
}

std::vector<AnomalyEvent> report_events(const fs::path& store_dir, Window range, const DetectorConfig& cfg) {
  std::vector<AnomalyEvent> out;
  for (auto kind : {DbKind::interface, DbKind::flow, DbKind::optical}) {
    const auto path = store_path(store_dir, kind);
    if (!fs::exists(path)) continue;
    const auto store = Store::open(path);
    for (const auto& entity : store->list_entities()) {
      auto found = detect_entity_windows(*store, entity, cfg, range);
      out.insert(out.end(), found.begin(), found.end());
    }
  }
  sort_events(out);
  return out;
}

std::string format_event(const AnomalyEvent& e) {
  char num[96];
  std::snprintf(num, sizeof num, " observed=%.6g score=%.6g ", e.observed, e.score);
  return "[" + std::to_string(e.window_start) + "," + std::to_string(e.window_end) + ") " + to_string(e.source) +
         " " + e.entity_id + " " + e.metric + num + to_string(e.severity) + " " + to_string(e.direction) + " " +
         to_string(e.kind);
}

} // namespace netmon
