// netmon: synth | ingest | replay | report
#include <cstdlib>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "netmon/error.hpp"
#include "netmon/ops.hpp"
#include "netmon/synth.hpp"

namespace fs = std::filesystem;
using namespace netmon;

namespace {

// kind:target:onset_ts:duration_s:magnitude
FaultScenario parse_fault_flag(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
  if (parts.size() != 5) throw Error(Errc::validation, "fault must be kind:target:onset_ts:duration_s:magnitude");
  const auto kind = parse_fault_kind(parts[0]);
  if (!kind) throw Error(Errc::validation, "unknown fault kind '" + parts[0] + "'");
  FaultScenario f{*kind, parts[1], std::stoll(parts[2]), std::stoll(parts[3]), std::stod(parts[4])};
  f.validate();
  return f;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"netmon: synthetic datasets, ingest, replay and detection reports"};
  app.require_subcommand(1);

  SynthConfig synth_cfg;
  fs::path synth_out = "dataset";
  std::string suite = "standard";
  int correlated = 5;
  std::vector<std::string> fault_flags;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a seeded conference dataset with injected faults");
  synth_cmd->add_option("--out", synth_out, "Output directory")->capture_default_str();
  synth_cmd->add_option("--interfaces", synth_cfg.interfaces, "Interface count")->capture_default_str();
  synth_cmd->add_option("--days", synth_cfg.days, "Days of data")->capture_default_str();
  synth_cmd->add_option("--cadence", synth_cfg.cadence_s, "Interface polling cadence, seconds")->capture_default_str();
  synth_cmd->add_option("--optical-cadence", synth_cfg.optical_cadence_s, "Optical sampling cadence, seconds")
      ->capture_default_str();
  synth_cmd->add_option("--flow-cadence", synth_cfg.flow_cadence_s, "Flow export cadence, seconds")->capture_default_str();
  synth_cmd->add_option("--start", synth_cfg.start_ts, "First timestamp, epoch seconds")->capture_default_str();
  synth_cmd->add_option("--seed", synth_cfg.seed, "Random seed")->capture_default_str();
  synth_cmd->add_option("--faults", suite, "Fault suite")
      ->check(CLI::IsMember({"standard", "correlated", "none"}))
      ->capture_default_str();
  synth_cmd->add_option("--correlated", correlated, "Scenario count for --faults correlated")->capture_default_str();
  synth_cmd->add_option("--fault", fault_flags, "Extra fault kind:target:onset_ts:duration_s:magnitude");

  std::vector<fs::path> ingest_files_arg;
  fs::path store_dir = "stores";
  auto* ingest_cmd = app.add_subcommand("ingest", "Append telemetry files to the per-kind stores");
  ingest_cmd->add_option("files", ingest_files_arg, "Telemetry files")->required()->check(CLI::ExistingFile);
  ingest_cmd->add_option("--store-dir", store_dir, "Store directory")->capture_default_str();

  std::vector<fs::path> replay_files;
  ReplayOptions replay_opt;
  replay_opt.url = "http://127.0.0.1:8080";
  auto* replay_cmd = app.add_subcommand("replay", "Stream telemetry files into a running gateway");
  replay_cmd->add_option("files", replay_files, "Telemetry files")->required()->check(CLI::ExistingFile);
  replay_cmd->add_option("--url", replay_opt.url, "Gateway base URL")->capture_default_str();
  replay_cmd->add_option("--speedup", replay_opt.speedup, "Time compression factor")->capture_default_str();
  replay_cmd->add_option("--batch", replay_opt.batch_interval_s, "Batch interval, seconds")->capture_default_str();
  replay_cmd->add_option("--token", replay_opt.token, "Bearer token");

  fs::path report_dir = "stores";
  std::int64_t report_start = 0;
  std::int64_t report_end = 0;
  DetectorConfig report_cfg;
  auto* report_cmd = app.add_subcommand("report", "Print anomaly events for a time range");
  report_cmd->add_option("--store-dir", report_dir, "Store directory")->capture_default_str();
  report_cmd->add_option("--start", report_start, "Range start, epoch seconds")->required();
  report_cmd->add_option("--end", report_end, "Range end, epoch seconds")->required();
  report_cmd->add_option("--window", report_cfg.window_s, "Window length, seconds")->capture_default_str();
  report_cmd->add_option("--z-warn", report_cfg.z_warn, "Warn threshold")->capture_default_str();
  report_cmd->add_option("--z-critical", report_cfg.z_critical, "Critical threshold")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth_cmd) {
      if (suite == "standard") synth_cfg.scenarios = standard_faults(synth_cfg);
      if (suite == "correlated") synth_cfg.scenarios = correlated_faults(synth_cfg, correlated);
      for (const auto& f : fault_flags) synth_cfg.scenarios.push_back(parse_fault_flag(f));
      const auto out = synth(synth_cfg);
      write_synth(out, synth_out);
      std::cout << "interface " << out.interface.size() << "\nflow " << out.flow.size() << "\noptical "
                << out.optical.size() << "\nfaults " << synth_cfg.scenarios.size() << "\n";
      return 0;
    }
    if (*ingest_cmd) {
      const auto summary = ingest_files(ingest_files_arg, store_dir);
      for (const auto& [kind, n] : summary.accepted) std::cout << to_string(kind) << " " << n << "\n";
      for (const auto& e : summary.errors) std::cerr << e << "\n";
      if (!summary.errors.empty()) {
        std::cerr << to_string(Errc::partial_ingest) << ": " << summary.errors.size() << " bad lines\n";
        return 2;
      }
      return 0;
    }
    if (*replay_cmd) {
      std::vector<std::string> errors;
      const auto records = read_records(replay_files, errors);
      for (const auto& e : errors) std::cerr << e << "\n";
      const auto stats = replay_records(records, replay_opt);
      std::cout << "sent " << stats.sent << " records in " << stats.batches << " batches over " << stats.elapsed_s
                << " s\n";
      for (const auto& [kind, n] : stats.accepted) std::cout << kind << " " << n << "\n";
      return errors.empty() ? 0 : 2;
    }
    if (*report_cmd) {
      report_cfg.validate();
      const auto events = report_events(report_dir, {report_start, report_end}, report_cfg);
      for (const auto& e : events) std::cout << format_event(e) << "\n";
      std::cout << events.size() << " events\n";
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "netmon: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
