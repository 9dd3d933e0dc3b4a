#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "netmon/anomaly.hpp"
#include "netmon/telemetry.hpp"

namespace netmon {

// <dir>/<kind>.nwts
std::filesystem::path store_path(const std::filesystem::path& dir, DbKind kind);

struct IngestSummary {
  std::map<DbKind, std::uint64_t> accepted;
  std::vector<std::string> errors; // "<file>:<line>: <message>"
};

// Appends every valid record to the per-kind stores under store_dir
// (creating them, all three, when missing) and persists them.
IngestSummary ingest_files(std::span<const std::filesystem::path> files, const std::filesystem::path& store_dir);

// Parses telemetry files; bad lines land in `errors`.
std::vector<Record> read_records(std::span<const std::filesystem::path> files, std::vector<std::string>& errors);

struct ReplayOptions {
  std::string url; // http://host:port
  double speedup = 1.0;
  std::string token;
  double batch_interval_s = 0.1;
};

struct ReplayStats {
  std::uint64_t sent = 0;
  std::uint64_t batches = 0;
  double elapsed_s = 0.0;
  std::map<std::string, std::uint64_t> accepted; // as reported by the gateway
};

// Streams records ordered by timestamp, keeping inter-record gaps divided by
// speedup. Throws Error(gateway_unreachable).
ReplayStats replay_records(std::span<const Record> records, const ReplayOptions& opt);

// Events for every entity of every store in the directory over the aligned
// windows inside `range`.
std::vector<AnomalyEvent> report_events(const std::filesystem::path& store_dir, Window range,
                                        const DetectorConfig& cfg = {});
std::string format_event(const AnomalyEvent& e);

} // namespace netmon
