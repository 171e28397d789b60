#pragma once

#include <string>

#include "bcm/controls.hpp"
#include "bcm/inversion.hpp"
#include "bcm/medium.hpp"
#include "bcm/rays.hpp"

namespace bcm {

/// Everything one run needs, collected from one INI-style file:
/// [scenario], [solver], [basis], [inversion], [pipeline] sections with
/// `key = value` lines and `#` comments.  Unknown sections or keys are
/// errors: a config either reproduces a run exactly or is rejected.
struct RunConfig {
  ScenarioSpec scenario;
  DiscretizationSpec disc;

  double cfl = 0.4;
  bool check_regular = true;
  RayTraceOptions ray;

  BasisSpec basis;

  ReconstructOptions inversion;  // n_threads is filled by the caller

  std::string mode = "inverse-data";  // or "pseudo-reconstruction"
  bool with_snapshots = false;        // simulate: also store u(.,T) per control
};

RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

/// Full echo of the effective settings, itself a valid config file.
/// Deterministic: equal configs print equal text.
std::string resolved_config_text(const RunConfig& cfg);

}  // namespace bcm
