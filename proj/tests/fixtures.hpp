#pragma once

// Synthetic-dataset fixtures shared by the agent, gateway and acceptance tests.

#include <map>
#include <memory>

#include "netmon/synth.hpp"
#include "netmon/tsdb.hpp"

namespace netmon::testing {

struct Stores {
  std::shared_ptr<Store> interface;
  std::shared_ptr<Store> flow;
  std::shared_ptr<Store> optical;

  std::shared_ptr<Store> of(DbKind k) const {
    return k == DbKind::interface ? interface : k == DbKind::flow ? flow : optical;
  }
};

inline Stores load_stores(const SynthOutput& out) {
  Stores s{std::make_shared<Store>(DbKind::interface, "interface"), std::make_shared<Store>(DbKind::flow, "flow"),
           std::make_shared<Store>(DbKind::optical, "optical")};
  s.interface->append(out.interface);
  s.flow->append(out.flow);
  s.optical->append(out.optical);
  return s;
}

// Four interfaces over two booths, one optical port (port-01 on
// booth01-eth0), two days. Faults land in the final hour when asked.
inline SynthConfig small_config(bool correlated_fault_at_end) {
  SynthConfig cfg;
  cfg.interfaces = 4;
  cfg.days = 2;
  cfg.seed = 7;
  if (correlated_fault_at_end) {
    const std::int64_t onset = cfg.end_ts() - 3600;
    cfg.scenarios.push_back({FaultKind::optical_degradation, "port-01", onset, 3600, 10.0});
    cfg.scenarios.push_back({FaultKind::error_storm, "booth01-eth0", onset + 600, 3000, 5.0});
  }
  return cfg;
}

} // namespace netmon::testing
