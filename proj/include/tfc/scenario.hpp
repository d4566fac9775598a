#pragma once

#include "tfc/controller.hpp"
#include "tfc/dynamics.hpp"
#include "tfc/network.hpp"
#include "tfc/signals.hpp"

#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace tfc {

/// Raised for malformed or inconsistent scenario input; the CLI maps it to
/// exit code 2.
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A fully validated experiment description: network, per-bus signals,
/// controller configuration, regions, and run settings. The initial state is
/// resolved at load time (either explicit or the equilibrium of p(0)).
struct Scenario {
  std::shared_ptr<NetworkModel> model;
  InjectionSignal signal;
  ControllerConfig config;
  std::vector<Region> regions;
  double t_end = 40.0;
  double log_step = 0.01;
  bool initial_equilibrium = true;
  State x0;
  Vec p0;
  std::string path;
};

/// Parses and validates a scenario file. Errors carry the file path and
/// line number; validation failures (connectivity, region decomposition,
/// ordering, initial-state membership) are named individually.
Scenario load_scenario(const std::string& path);

}  // namespace tfc
