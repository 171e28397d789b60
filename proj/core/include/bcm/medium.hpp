#pragma once

#include <cstdint>
#include <string>

#include "bcm/grid.hpp"

namespace bcm {

/// Built-in half-plane scenarios.  The acoustic medium is described by the
/// density rho(x); the propagation speed is c = rho^{-1/2}.  All scenarios
/// keep the active boundary segment sigma = [-L, L] x {0} on the line x2 = 0
/// and the medium in the lower half-plane x2 <= 0.
struct ScenarioSpec {
  enum class Kind {
    homogeneous,  // c == c0
    test1,        // Gaussian density bump below the segment midpoint
    test2,        // depth/lateral trend plus a dipole-like anomaly
    test3,        // same trend, stronger variation (max/min speed ~ 2.5)
    test4,        // anomaly rotated against the boundary, fast lateral change
    test5,        // smoothed high-density wedge in homogeneous background
    custom,       // speed loaded from a grid CSV file
  };

  Kind kind = Kind::homogeneous;

  double T = 1.0;       // observation half-horizon (data are used on [0, 2T])
  double L = 1.0;       // sigma = [-L, L]
  double c_star = 1.0;  // a priori upper bound, c(x) <= c_star

  // Gaussian factors g_k(s) = exp(-(s - center_k)^2 / (2 delta_k^2)).
  double a = 1.0;
  double xbar1 = 0.0;
  double xbar2 = -0.5;
  double delta1 = 0.5;
  double delta2 = 0.5;

  // test4: coordinates are rotated by phi about (0, rot_y0) before the
  // anomaly profile is evaluated.
  double phi = 0.0;
  double rot_y0 = -0.25;

  double c0 = 1.0;  // homogeneous speed

  // test5 wedge: triangle with apex (apex_x, apex_y) and base corners
  // (+-half_width, base_y); density rho_in inside, 1 outside, blended over
  // a band of total width smooth_w around the edge.
  double wedge_apex_x = 0.0;
  double wedge_apex_y = -0.3;
  double wedge_base_y = -0.9;
  double wedge_half_width = 0.35;
  double wedge_rho = 5.0;
  double wedge_smooth = -1.0;  // edge smoothing length; <= 0: two grid cells

  std::string custom_c_csv;  // kind == custom only

  std::string id() const;              // short scenario tag, e.g. "test2"
  std::string parameter_record() const;  // full parameter dump for manifests
};

/// Fills in per-kind default parameters (T, c_star, Gaussian geometry, ...).
ScenarioSpec scenario_defaults(ScenarioSpec::Kind kind);

/// Analytic density/speed of a scenario at a point (custom kind excluded).
double scenario_density(const ScenarioSpec& spec, double x, double y);
double scenario_speed(const ScenarioSpec& spec, double x, double y);

/// Grid sizing for a scenario.  h is the target spacing; it is snapped so
/// that L is an integer number of cells.  margin < 0 selects an automatic
/// pad (a small fraction of c_star*T, at least a few cells).
struct DiscretizationSpec {
  double h = 0.025;
  double margin = -1.0;
};

/// Speed field c(x) on a grid large enough that zero-Dirichlet outer walls
/// cannot influence boundary data on [0, 2T] or interior states up to T:
/// half-width >= L + 2 c_star T and depth >= c_star T, plus the margin.
struct MediumField {
  Grid2 grid;
  Field2 c;
  double c_star = 1.0;
  double T = 1.0;
  double L = 1.0;
  std::string provenance;

  double c_at(int i, int j) const { return c.at(i, j); }
  double c_interp(double x, double y) const { return c.interp(x, y); }
  double c_min() const;
  double c_max() const;
  /// FNV-1a hash of the sampled speed values plus grid layout; identifies
  /// the medium in dataset manifests.
  std::uint64_t content_hash() const;
};

MediumField make_scenario(const ScenarioSpec& spec, const DiscretizationSpec& disc);

}  // namespace bcm
