#pragma once

#include <utility>
#include <vector>

#include "bcm/controls.hpp"
#include "bcm/grid.hpp"
#include "bcm/medium.hpp"

namespace bcm {

/// Explicit second-order leapfrog state for u_tt = c²Δu with strong
/// Dirichlet injection on the top row (the boundary line x² = 0).
struct WaveState {
  Field2 u_prev, u_cur;
  double t = 0.0;
  double dt = 0.0;
  double cfl = 0.0;  // c_max·dt·√2/h, must stay ≤ 1
  int step = 0;
};

/// Normal-derivative samples u_ν(γ, t) on the measurement strip
/// [−L−c_*T, L+c_*T] × [0, horizon]; γ-major, time fastest.
struct TraceRecord {
  int control_id = -1;
  double horizon = 0.0;
  int i0 = 0;  // solver column index of the first strip node
  double gamma0 = 0.0;
  double dgamma = 0.0;
  int n_gamma = 0;
  double dt = 0.0;
  int n_t = 0;
  std::vector<double> v;

  double at(int ig, int it) const {
    return v[static_cast<std::size_t>(ig) * n_t + it];
  }
  double& at(int ig, int it) {
    return v[static_cast<std::size_t>(ig) * n_t + it];
  }
  double gamma(int ig) const { return gamma0 + ig * dgamma; }
};

struct SolveOptions {
  double horizon = 0.0;                 // integer multiple of the control dt
  std::vector<double> snapshot_times;   // each an integer multiple of dt
  bool record_energy = false;
};

struct SolveResult {
  TraceRecord trace;
  Field2 final_u;                        // u(·, horizon), always kept
  std::vector<Field2> snapshots;         // one per requested time, in order
  std::vector<std::pair<double, double>> energy;  // (t, E(t)) when recorded
};

/// Marches the IBVP with Dirichlet data f on the boundary strip (zero
/// outside its γ-range) and homogeneous data on the truncation sides.
/// The control grid must sit on the medium grid: same spacing, aligned
/// nodes, dt within the stability bound.
SolveResult solve_forward(const MediumField& medium, const ControlFunction& f,
                          const SolveOptions& opt);

/// One-sided second-order normal derivative at the top row, for columns
/// [i0, i0+n): (3u(i,top) − 4u(i,top−1) + u(i,top−2)) / (2h).
std::vector<double> normal_trace(const Field2& u, int i0, int n);

/// Energy ∫ (u_t²/c² + |∇u|²) dx of a state triple (previous, current,
/// next) spaced dt apart.
double field_energy(const Field2& up, const Field2& uc, const Field2& un,
                    double dt, const MediumField& medium);

/// ∫ y·w·c⁻² dx by trapezoid quadrature over the medium grid; the masked
/// overload multiplies by a 0/1 (or weight) field on the same grid.
double inner_product_H(const Field2& y, const Field2& w, const MediumField& medium);
double inner_product_H(const Field2& y, const Field2& w, const MediumField& medium,
                       const Field2& mask);

}  // namespace bcm
