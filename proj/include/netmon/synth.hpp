#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "netmon/correlator.hpp"
#include "netmon/telemetry.hpp"

namespace netmon {

enum class FaultKind { optical_degradation, error_storm, traffic_flood, interface_flap };

const char* to_string(FaultKind k) noexcept;
std::optional<FaultKind> parse_fault_kind(std::string_view s) noexcept;

/// Ground-truth fault superimposed on the clean signal.
/// magnitude units: optical_degradation dBm drop on rx power, error_storm
/// errors/s on errs_in, traffic_flood traffic multiplier, interface_flap unused (> 0).
struct FaultScenario {
  FaultKind kind = FaultKind::traffic_flood;
  std::string target;
  std::int64_t onset_ts = 0;
  std::int64_t duration_s = 0;
  double magnitude = 0.0;

  void validate() const; // throws Error(validation)
  std::int64_t end_ts() const noexcept { return onset_ts + duration_s; }
};

struct SynthConfig {
  int interfaces = 50;
  int days = 3;
  std::int64_t cadence_s = 60;
  std::int64_t optical_cadence_s = 300;
  std::int64_t flow_cadence_s = 300;
  std::uint64_t seed = 1;
  std::int64_t start_ts = 1711929600; // Monday 2024-04-01 00:00 UTC
  double diurnal_amplitude = 0.2;
  double traffic_noise = 0.05;       // relative, per sample
  double optical_noise_dbm = 0.05;   // per sample
  double optical_drift_dbm = 0.2;    // diurnal thermal drift amplitude
  double flow_sigma = 0.2;           // log-normal bytes spread
  double weekend_factor = 0.7;
  std::vector<FaultScenario> scenarios;

  std::int64_t end_ts() const noexcept { return start_ts + days * 86400; }
  int booths() const noexcept { return (interfaces + 1) / 2; }
  // Sized for roughly 21 interface samples per optical sample.
  int optical_ports() const noexcept;
  void validate() const; // throws Error(validation)
};

std::string interface_name(int booth, int index);
std::string booth_name(int booth);
std::string port_name(int booth);
std::string flow_source(int booth);

struct SynthOutput {
  std::vector<Record> interface; // sorted by timestamp, then entity
  std::vector<Record> flow;
  std::vector<Record> optical;
  TopologyMap topology;
  json manifest;
};

// Throws Error(scenario_target_missing) for targets outside the topology.
SynthOutput synth(const SynthConfig& cfg);

// Writes interface.txt, flow.txt, optical.txt, topology.txt, manifest.json.
void write_synth(const SynthOutput& out, const std::filesystem::path& dir);

// Twelve faults, three of each kind, on distinct targets after the first day.
std::vector<FaultScenario> standard_faults(const SynthConfig& cfg);
// `count` pairs: rx drop on a port plus an error storm on its mapped
// interface starting ten minutes later.
std::vector<FaultScenario> correlated_faults(const SynthConfig& cfg, int count);

json to_json(const FaultScenario& f);
FaultScenario fault_from_json(const json& j);

} // namespace netmon
