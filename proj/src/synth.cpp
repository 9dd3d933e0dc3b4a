#include "netmon/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>

#include "netmon/error.hpp"

namespace netmon {

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Independent stream per (purpose, entity) so faults never shift the noise.
std::mt19937_64 stream(std::uint64_t seed, std::uint64_t purpose, std::uint64_t index) {
  return std::mt19937_64(splitmix(seed ^ splitmix(purpose * 1000003ULL + index)));
}

double diurnal(std::int64_t ts) {
  const double phase = 2.0 * std::numbers::pi * static_cast<double>(((ts % 86400) + 86400) % 86400) / 86400.0;
  return std::sin(phase - std::numbers::pi / 2.0); // trough at midnight, peak at noon
}

double weekday_factor(const SynthConfig& cfg, std::int64_t ts) {
  const std::int64_t day = ts >= 0 ? ts / 86400 : (ts - 86399) / 86400;
  const auto dow = ((day + 3) % 7 + 7) % 7; // 0 = Monday
  return dow >= 5 ? cfg.weekend_factor : 1.0;
}

bool active(const FaultScenario& f, std::int64_t ts) { return ts >= f.onset_ts && ts < f.end_ts(); }

std::string pad2(int n) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%02d", n);
  return buf;
}

template <class Rec>
void sort_by_time(std::vector<Rec>& v) {
  std::stable_sort(v.begin(), v.end(), [](const Record& a, const Record& b) { return timestamp_of(a) < timestamp_of(b); });
}

std::uint64_t uniform_u64(std::mt19937_64& rng, std::uint64_t lo, std::uint64_t hi) {
  return std::uniform_int_distribution<std::uint64_t>(lo, hi)(rng);
}

} // namespace

const char* to_string(FaultKind k) noexcept {
  switch (k) {
  case FaultKind::optical_degradation: return "optical_degradation";
  case FaultKind::error_storm: return "error_storm";
  case FaultKind::traffic_flood: return "traffic_flood";
  case FaultKind::interface_flap: return "interface_flap";
  }
  return "?";
}

std::optional<FaultKind> parse_fault_kind(std::string_view s) noexcept {
  for (auto k : {FaultKind::optical_degradation, FaultKind::error_storm, FaultKind::traffic_flood,
                 FaultKind::interface_flap})
    if (s == to_string(k)) return k;
  return std::nullopt;
}

void FaultScenario::validate() const {
  if (target.empty()) throw Error(Errc::validation, "fault without a target");
  if (duration_s <= 0) throw Error(Errc::validation, "fault duration must be positive");
  if (!(magnitude > 0.0)) throw Error(Errc::validation, "fault magnitude must be positive");
}

int SynthConfig::optical_ports() const noexcept {
  const double per_port = static_cast<double>(optical_cadence_s) / static_cast<double>(cadence_s);
  const int p = static_cast<int>(std::lround(interfaces * per_port / 21.0));
  return std::clamp(p, 1, booths());
}

void SynthConfig::validate() const {
  if (interfaces < 1) throw Error(Errc::validation, "need at least one interface");
  if (days < 1) throw Error(Errc::validation, "need at least one day");
  if (cadence_s < 1 || optical_cadence_s < 1 || flow_cadence_s < 1) throw Error(Errc::validation, "cadence must be positive");
  if (86400 % cadence_s || 86400 % optical_cadence_s || 86400 % flow_cadence_s)
    throw Error(Errc::validation, "cadences must divide a day");
  for (const auto& f : scenarios) f.validate();
}

std::string booth_name(int booth) { return "booth" + pad2(booth); }
std::string interface_name(int booth, int index) { return booth_name(booth) + "-eth" + std::to_string(index); }
std::string port_name(int booth) { return "port-" + pad2(booth); }
std::string flow_source(int booth) { return "10.0." + std::to_string(booth) + ".10"; }

SynthOutput synth(const SynthConfig& cfg) {
  cfg.validate();
  SynthOutput out;
  const int booths = cfg.booths();
  const int ports = cfg.optical_ports();

  std::vector<std::string> iface_names;
  for (int i = 0; i < cfg.interfaces; ++i) iface_names.push_back(interface_name(i / 2 + 1, i % 2));
  for (int b = 1; b <= booths; ++b) {
    for (int idx = 0; idx < 2 && (b - 1) * 2 + idx < cfg.interfaces; ++idx)
      out.topology.add({interface_name(b, idx), TopologyMap::LinkType::booth, booth_name(b)});
    out.topology.add({interface_name(b, 0), TopologyMap::LinkType::addr, flow_source(b)});
    if (b <= ports) out.topology.add({interface_name(b, 0), TopologyMap::LinkType::port, port_name(b)});
  }

  for (const auto& f : cfg.scenarios) {
    const bool optical = f.kind == FaultKind::optical_degradation;
    bool found = false;
    if (optical) {
      for (int b = 1; b <= ports && !found; ++b) found = port_name(b) == f.target;
    } else {
      found = std::find(iface_names.begin(), iface_names.end(), f.target) != iface_names.end();
    }
    if (!found)
      throw Error(Errc::scenario_target_missing,
                  std::string(to_string(f.kind)) + " target '" + f.target + "' is not in the generated topology");
  }

  const std::int64_t end = cfg.end_ts();
  std::normal_distribution<double> gauss(0.0, 1.0);

  // Interfaces: cumulative counters from a diurnal rate model.
  for (int i = 0; i < cfg.interfaces; ++i) {
    const std::string& name = iface_names[static_cast<std::size_t>(i)];
    auto params = stream(cfg.seed, 1, static_cast<std::uint64_t>(i));
    auto noise = stream(cfg.seed, 2, static_cast<std::uint64_t>(i));
    gauss.reset();
    const double base_pps = std::exp(std::uniform_real_distribution<double>(std::log(500.0), std::log(20000.0))(params));
    const double out_ratio = std::uniform_real_distribution<double>(0.6, 1.4)(params);
    const double pkt_size = std::uniform_real_distribution<double>(400.0, 1200.0)(params);
    TelemetrySample s;
    s.interface_id = name;
    s.speed_bps = i % 2 == 0 ? 10'000'000'000ULL : 1'000'000'000ULL;
    s.descr = booth_name(i / 2 + 1) + " port " + std::to_string(i % 2);
    s.pkts_in = uniform_u64(params, 0, 1'000'000'000ULL);
    s.pkts_out = uniform_u64(params, 0, 1'000'000'000ULL);
    s.octets_in = s.pkts_in * 600;
    s.octets_out = s.pkts_out * 600;

    std::vector<const FaultScenario*> faults;
    for (const auto& f : cfg.scenarios)
      if (f.target == name) faults.push_back(&f);

    for (std::int64_t t = cfg.start_ts; t < end; t += cfg.cadence_s) {
      s.timestamp = t;
      if (t != cfg.start_ts) {
        const double level = base_pps * (1.0 + cfg.diurnal_amplitude * diurnal(t)) * weekday_factor(cfg, t);
        double in = level * std::max(0.0, 1.0 + cfg.traffic_noise * gauss(noise));
        double outr = level * out_ratio * std::max(0.0, 1.0 + cfg.traffic_noise * gauss(noise));
        double errs = 0.0;
        bool down = false;
        for (const auto* f : faults) {
          if (!active(*f, t)) continue;
          switch (f->kind) {
          case FaultKind::traffic_flood: in *= f->magnitude; outr *= f->magnitude; break;
          case FaultKind::error_storm: errs += f->magnitude; break;
          case FaultKind::interface_flap: down = true; break;
          case FaultKind::optical_degradation: break;
          }
        }
        if (down) {
          // Device restart: counters drop to zero and stay there while down.
          s.pkts_in = s.pkts_out = s.octets_in = s.octets_out = s.errs_in = s.errs_out = 0;
        } else {
          const auto dt = static_cast<double>(cfg.cadence_s);
          const auto p_in = static_cast<std::uint64_t>(std::llround(in * dt));
          const auto p_out = static_cast<std::uint64_t>(std::llround(outr * dt));
          s.pkts_in += p_in;
          s.pkts_out += p_out;
          s.octets_in += static_cast<std::uint64_t>(std::llround(static_cast<double>(p_in) * pkt_size));
          s.octets_out += static_cast<std::uint64_t>(std::llround(static_cast<double>(p_out) * pkt_size));
          s.errs_in += static_cast<std::uint64_t>(std::llround(errs * dt));
        }
      }
      out.interface.push_back(s);
    }
  }

  // Optical ports: stable power with a small thermal drift.
  for (int b = 1; b <= ports; ++b) {
    auto params = stream(cfg.seed, 3, static_cast<std::uint64_t>(b));
    auto noise = stream(cfg.seed, 4, static_cast<std::uint64_t>(b));
    gauss.reset();
    const double tx_base = std::uniform_real_distribution<double>(-3.0, 0.0)(params);
    const double rx_base = std::uniform_real_distribution<double>(-9.0, -4.0)(params);
    OpticalSample o;
    o.port_id = port_name(b);
    for (std::int64_t t = cfg.start_ts; t < end; t += cfg.optical_cadence_s) {
      const double drift = cfg.optical_drift_dbm * diurnal(t);
      o.timestamp = t;
      o.tx_power_dbm = tx_base + drift + cfg.optical_noise_dbm * gauss(noise);
      o.rx_power_dbm = rx_base + drift + cfg.optical_noise_dbm * gauss(noise);
      for (const auto& f : cfg.scenarios)
        if (f.kind == FaultKind::optical_degradation && f.target == o.port_id && active(f, t)) o.rx_power_dbm -= f.magnitude;
      out.optical.push_back(o);
    }
  }

  // Flows: one summarized conversation per booth per interval, log-normal bytes.
  static constexpr std::uint16_t kPorts[] = {443, 80, 53, 22};
  for (int b = 1; b <= booths; ++b) {
    auto params = stream(cfg.seed, 5, static_cast<std::uint64_t>(b));
    auto noise = stream(cfg.seed, 6, static_cast<std::uint64_t>(b));
    gauss.reset();
    const double base_bytes = std::exp(std::uniform_real_distribution<double>(std::log(2e6), std::log(5e8))(params));
    const double pkt_size = std::uniform_real_distribution<double>(500.0, 1400.0)(params);
    FlowRecord fr;
    fr.src_addr = flow_source(b);
    for (std::int64_t t = cfg.start_ts; t < end; t += cfg.flow_cadence_s) {
      const double z = gauss(noise);
      fr.start_ts = t;
      fr.end_ts = t + static_cast<std::int64_t>(uniform_u64(noise, 60, static_cast<std::uint64_t>(cfg.flow_cadence_s - 1)));
      fr.dst_addr = "198.51.100." + std::to_string(uniform_u64(noise, 1, 254));
      fr.src_port = static_cast<std::uint16_t>(uniform_u64(noise, 1024, 65535));
      fr.dst_port = kPorts[uniform_u64(noise, 0, 3)];
      fr.proto = fr.dst_port == 53 ? 17 : 6;
      const double level = base_bytes * (1.0 + cfg.diurnal_amplitude * diurnal(t)) * weekday_factor(cfg, t);
      fr.bytes = static_cast<std::uint64_t>(
          std::llround(level * std::exp(cfg.flow_sigma * z - cfg.flow_sigma * cfg.flow_sigma / 2.0)));
      fr.packets = std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::llround(static_cast<double>(fr.bytes) / pkt_size)));
      out.flow.push_back(fr);
    }
  }

  sort_by_time(out.interface);
  sort_by_time(out.optical);
  sort_by_time(out.flow);

  json faults = json::array();
  for (std::size_t i = 0; i < cfg.scenarios.size(); ++i) {
    json f = to_json(cfg.scenarios[i]);
    f["id"] = "fault-" + pad2(static_cast<int>(i + 1));
    faults.push_back(std::move(f));
  }
  out.manifest = {
      {"seed", cfg.seed},
      {"start_ts", cfg.start_ts},
      {"end_ts", end},
      {"days", cfg.days},
      {"cadence_s", cfg.cadence_s},
      {"optical_cadence_s", cfg.optical_cadence_s},
      {"flow_cadence_s", cfg.flow_cadence_s},
      {"interfaces", cfg.interfaces},
      {"booths", booths},
      {"optical_ports", ports},
      {"model",
       {{"diurnal", "1 + a*sin(2*pi*t/86400 - pi/2), times weekday factor"},
        {"diurnal_amplitude", cfg.diurnal_amplitude},
        {"weekend_factor", cfg.weekend_factor},
        {"traffic_noise", cfg.traffic_noise},
        {"optical_noise_dbm", cfg.optical_noise_dbm},
        {"optical_drift_dbm", cfg.optical_drift_dbm},
        {"flow_sigma", cfg.flow_sigma}}},
      {"counts", {{"interface", out.interface.size()}, {"flow", out.flow.size()}, {"optical", out.optical.size()}}},
      {"faults", std::move(faults)}};
  return out;
}

void write_synth(const SynthOutput& out, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto write_records = [&](const std::vector<Record>& records, const char* name) {
    std::ofstream f(dir / name, std::ios::binary | std::ios::trunc);
    for (const auto& r : records) f << format_record(r) << '\n';
    if (!f) throw Error(Errc::storage_io_failure, std::string("cannot write ") + (dir / name).string());
  };
  write_records(out.interface, "interface.txt");
  write_records(out.flow, "flow.txt");
  write_records(out.optical, "optical.txt");
  std::ofstream topo(dir / "topology.txt", std::ios::binary | std::ios::trunc);
  topo << out.topology.format();
  std::ofstream manifest(dir / "manifest.json", std::ios::binary | std::ios::trunc);
  manifest << out.manifest.dump(2) << '\n';
  if (!topo || !manifest) throw Error(Errc::storage_io_failure, "cannot write synth output in " + dir.string());
}

std::vector<FaultScenario> standard_faults(const SynthConfig& cfg) {
  const int ports = cfg.optical_ports();
  if (cfg.days < 2 || cfg.interfaces < 9 || ports < 3)
    throw Error(Errc::validation, "the standard fault suite needs 2+ days, 9+ interfaces and 3+ optical ports");
  auto rng = stream(cfg.seed, 7, 0);
  std::vector<std::string> ifaces;
  for (int i = 0; i < cfg.interfaces; ++i) ifaces.push_back(interface_name(i / 2 + 1, i % 2));
  std::vector<std::string> port_ids;
  for (int b = 1; b <= ports; ++b) port_ids.push_back(port_name(b));
  std::shuffle(ifaces.begin(), ifaces.end(), rng);
  std::shuffle(port_ids.begin(), port_ids.end(), rng);

  constexpr std::int64_t duration = 7200;
  const std::int64_t first = cfg.start_ts + 86400 + 3600;
  const std::int64_t last = cfg.end_ts() - duration - 3600;
  const auto slots = static_cast<std::uint64_t>((last - first) / cfg.cadence_s);

  std::vector<FaultScenario> out;
  std::size_t next_iface = 0;
  std::size_t next_port = 0;
  const FaultKind kinds[] = {FaultKind::optical_degradation, FaultKind::error_storm, FaultKind::traffic_flood,
                             FaultKind::interface_flap};
  for (int round = 0; round < 3; ++round) {
    for (const auto kind : kinds) {
      FaultScenario f;
      f.kind = kind;
      f.duration_s = duration;
      f.onset_ts = first + static_cast<std::int64_t>(uniform_u64(rng, 0, slots)) * cfg.cadence_s;
      switch (kind) {
      case FaultKind::optical_degradation: f.target = port_ids[next_port++]; f.magnitude = 10.0; break;
      case FaultKind::error_storm: f.target = ifaces[next_iface++]; f.magnitude = 5.0; break;
      case FaultKind::traffic_flood: f.target = ifaces[next_iface++]; f.magnitude = 3.0; break;
      case FaultKind::interface_flap: f.target = ifaces[next_iface++]; f.magnitude = 1.0; break;
      }
      out.push_back(std::move(f));
    }
  }
  return out;
}

std::vector<FaultScenario> correlated_faults(const SynthConfig& cfg, int count) {
  if (count < 1 || count > cfg.optical_ports())
    throw Error(Errc::validation, "correlated scenarios need one optical port each");
  if (cfg.days < 2) throw Error(Errc::validation, "correlated scenarios need 2+ days");
  constexpr std::int64_t duration = 7200;
  constexpr std::int64_t lag = 600;
  const std::int64_t first = cfg.start_ts + 86400 + 3600;
  const std::int64_t span = cfg.end_ts() - 3600 - duration - lag - first;
  const std::int64_t period = span / count;
  auto rng = stream(cfg.seed, 8, 0);
  std::vector<FaultScenario> out;
  for (int k = 0; k < count; ++k) {
    const int booth = k + 1;
    const std::int64_t jitter = static_cast<std::int64_t>(uniform_u64(rng, 0, 29)) * cfg.cadence_s;
    const std::int64_t onset = first + k * period + jitter;
    out.push_back({FaultKind::optical_degradation, port_name(booth), onset, duration, 10.0});
    out.push_back({FaultKind::error_storm, interface_name(booth, 0), onset + lag, duration, 5.0});
  }
  return out;
}

json to_json(const FaultScenario& f) {
  return {{"kind", to_string(f.kind)},
          {"target", f.target},
          {"onset_ts", f.onset_ts},
          {"duration_s", f.duration_s},
          {"end_ts", f.end_ts()},
          {"magnitude", f.magnitude}};
}

FaultScenario fault_from_json(const json& j) {
  try {
    FaultScenario f;
    const auto kind = parse_fault_kind(j.at("kind").get<std::string>());
    if (!kind) throw Error(Errc::validation, "unknown fault kind " + j.at("kind").dump());
    f.kind = *kind;
    f.target = j.at("target").get<std::string>();
    f.onset_ts = j.at("onset_ts").get<std::int64_t>();
    f.duration_s = j.at("duration_s").get<std::int64_t>();
    f.magnitude = j.at("magnitude").get<double>();
    f.validate();
    return f;
  } catch (const json::exception& e) {
    throw Error(Errc::validation, std::string("fault scenario: ") + e.what());
  }
}

} // namespace netmon
