#include <cmath>

#include "bcm/medium.hpp"
#include "bcm/wave.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace bcm;

namespace {

MediumField flat_medium(double h, double T = 1.0) {
  auto spec = scenario_defaults(ScenarioSpec::Kind::homogeneous);
  spec.T = T;
  DiscretizationSpec disc;
  disc.h = h;
  return make_scenario(spec, disc);
}

// C3-smooth test pulse on [0, W] and its derivative.
double pulse(double t, double W) {
  if (t <= 0 || t >= W) return 0.0;
  double s = std::sin(M_PI * t / W);
  return s * s * s * s;
}
double pulse_dot(double t, double W) {
  if (t <= 0 || t >= W) return 0.0;
  double s = std::sin(M_PI * t / W), c = std::cos(M_PI * t / W);
  return 4.0 * M_PI / W * s * s * s * c;
}

// Largest step meeting the CFL target that divides the horizon evenly.
double pick_dt(const MediumField& m, double horizon, double target = 0.4) {
  const double dt_max = target * m.grid.dx / (m.c_max() * std::sqrt(2.0));
  const int n = static_cast<int>(std::ceil(horizon / dt_max));
  return horizon / n;
}

// Control constant across the whole top row: the solve is exactly 1-D
// until corner artifacts arrive, which the domain sizing keeps away.
ControlFunction full_row_pulse(const MediumField& m, double dt, int n_t,
                               double W) {
  ControlFunction f;
  f.gamma0 = m.grid.x0;
  f.dgamma = m.grid.dx;
  f.n_gamma = m.grid.nx;
  f.dt = dt;
  f.n_t = n_t;
  f.v.resize(static_cast<std::size_t>(f.n_gamma) * n_t);
  for (int ig = 0; ig < f.n_gamma; ++ig)
    for (int it = 0; it < n_t; ++it) f.at(ig, it) = pulse(it * dt, W);
  return f;
}

// Smooth bump over columns [i0, i0+w) of the top row, zero elsewhere.
ControlFunction local_pulse(const MediumField& m, double dt, int n_t, double W,
                            int i0, int w) {
  ControlFunction f;
  f.gamma0 = m.grid.x(i0);
  f.dgamma = m.grid.dx;
  f.n_gamma = w;
  f.dt = dt;
  f.n_t = n_t;
  f.v.resize(static_cast<std::size_t>(w) * n_t);
  for (int ig = 0; ig < w; ++ig) {
    const double s = std::sin(M_PI * (ig + 0.5) / w);
    for (int it = 0; it < n_t; ++it) f.at(ig, it) = s * s * pulse(it * dt, W);
  }
  return f;
}

}  // namespace

TEST_CASE("plane pulse reproduces the exact 1-D trace on the center columns") {
  MediumField m = flat_medium(0.05);
  const double W = 0.5, horizon = 1.0;
  const double dt = pick_dt(m, horizon);
  const int steps = static_cast<int>(std::lround(horizon / dt));
  ControlFunction f = full_row_pulse(m, dt, steps + 1, W);

  SolveOptions opt;
  opt.horizon = horizon;
  SolveResult r = solve_forward(m, f, opt);

  // Columns within |x| <= 0.5 stay 1-D for the whole horizon.
  double num = 0.0, den = 0.0;
  for (int ig = 0; ig < r.trace.n_gamma; ++ig) {
    if (std::abs(r.trace.gamma(ig)) > 0.5) continue;
    for (int it = 0; it <= steps; ++it) {
      const double ex = pulse_dot(it * dt, W);  // c = 1
      const double dv = r.trace.at(ig, it) - ex;
      num += dv * dv;
      den += ex * ex;
    }
  }
  REQUIRE(den > 0);
  CHECK(std::sqrt(num / den) < 0.10);  // second-order scheme at h = 0.05
}

TEST_CASE("energy settles after the control shuts off") {
  MediumField m = flat_medium(0.05);
  const double W = 0.2, horizon = 1.0;
  const double dt = pick_dt(m, horizon);
  const int steps = static_cast<int>(std::lround(horizon / dt));
  ControlFunction f = local_pulse(m, dt, steps + 1, W, m.grid.nx / 2 - 10, 21);

  SolveOptions opt;
  opt.horizon = horizon;
  opt.record_energy = true;
  SolveResult r = solve_forward(m, f, opt);

  double elo = 0, ehi = 0, emean = 0;
  int n = 0;
  for (auto& [t, e] : r.energy) {
    if (t < W + 5 * dt) continue;  // let the boundary data die out fully
    if (n == 0) elo = ehi = e;
    elo = std::min(elo, e);
    ehi = std::max(ehi, e);
    emean += e;
    ++n;
  }
  REQUIRE(n > 10);
  emean /= n;
  CHECK(emean > 0);
  CHECK((ehi - elo) / emean <= 1e-4);
}

TEST_CASE("signals stay inside the discrete dependence cone") {
  MediumField m = flat_medium(0.05);
  const double horizon = 0.5;
  const double dt = pick_dt(m, horizon);
  const int steps = static_cast<int>(std::lround(horizon / dt));
  const int ic = m.grid.nx / 2;
  ControlFunction f = local_pulse(m, dt, steps + 1, 0.3, ic - 2, 5);

  SolveOptions opt;
  opt.horizon = horizon;
  SolveResult r = solve_forward(m, f, opt);

  // One grid cell per step bounds the discrete signal speed; a column
  // D cells from the control support is identically zero before step D-2.
  const int D = 30;
  const int col = (ic + 2 + D) - r.trace.i0;
  REQUIRE(col < r.trace.n_gamma);
  for (int it = 0; it < D - 2 && it <= steps; ++it)
    CHECK(r.trace.at(col, it) == 0.0);
}

TEST_CASE("the scheme is linear in the boundary data") {
  MediumField m = flat_medium(0.1);
  const double horizon = 0.6;
  const double dt = pick_dt(m, horizon);
  const int steps = static_cast<int>(std::lround(horizon / dt));
  const int ic = m.grid.nx / 2;

  ControlFunction f1 = local_pulse(m, dt, steps + 1, 0.3, ic - 8, 7);
  ControlFunction f2 = local_pulse(m, dt, steps + 1, 0.45, ic + 3, 9);

  // Common grid footprint for the sum.
  ControlFunction fs = f1;
  fs.gamma0 = m.grid.x(ic - 8);
  fs.n_gamma = 20;
  fs.v.assign(static_cast<std::size_t>(20) * fs.n_t, 0.0);
  for (int ig = 0; ig < f1.n_gamma; ++ig)
    for (int it = 0; it < fs.n_t; ++it) fs.at(ig, it) += f1.at(ig, it);
  for (int ig = 0; ig < f2.n_gamma; ++ig)
    for (int it = 0; it < fs.n_t; ++it) fs.at(ig + 11, it) += f2.at(ig, it);

  SolveOptions opt;
  opt.horizon = horizon;
  SolveResult r1 = solve_forward(m, f1, opt);
  SolveResult r2 = solve_forward(m, f2, opt);
  SolveResult rs = solve_forward(m, fs, opt);

  double worst = 0.0, scale = 0.0;
  for (std::size_t q = 0; q < rs.trace.v.size(); ++q) {
    worst = std::max(worst,
                     std::abs(rs.trace.v[q] - r1.trace.v[q] - r2.trace.v[q]));
    scale = std::max(scale, std::abs(rs.trace.v[q]));
  }
  REQUIRE(scale > 0);
  CHECK(worst <= 1e-11 * scale);
}

TEST_CASE("homogeneous solve commutes with lateral shifts") {
  MediumField m = flat_medium(0.1);
  const double horizon = 0.4;
  const double dt = pick_dt(m, horizon);
  const int steps = static_cast<int>(std::lround(horizon / dt));
  const int ic = m.grid.nx / 2;
  const int shift = 3;

  ControlFunction fa = local_pulse(m, dt, steps + 1, 0.3, ic - 3, 7);
  ControlFunction fb = fa;
  fb.gamma0 = m.grid.x(ic - 3 + shift);

  SolveOptions opt;
  opt.horizon = horizon;
  SolveResult ra = solve_forward(m, fa, opt);
  SolveResult rb = solve_forward(m, fb, opt);

  // Same arithmetic at shifted columns: traces agree bit for bit away
  // from the strip ends.
  for (int ig = 10; ig < ra.trace.n_gamma - 10 - shift; ++ig)
    for (int it = 0; it <= steps; ++it)
      CHECK(ra.trace.at(ig, it) == rb.trace.at(ig + shift, it));
}

TEST_CASE("normal_trace is exact for linear and quadratic depth profiles") {
  Grid2 g;
  g.nx = 5;
  g.ny = 6;
  g.dx = g.dy = 0.1;
  g.x0 = 0;
  g.y0 = -0.5;
  Field2 lin(g), quad(g);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      lin.at(i, j) = 2.0 + 3.0 * g.y(j);
      quad.at(i, j) = g.y(j) * g.y(j);
    }
  auto dl = normal_trace(lin, 1, 3);
  auto dq = normal_trace(quad, 1, 3);
  for (double v : dl) CHECK(v == doctest::Approx(3.0).epsilon(1e-12));
  for (double v : dq) CHECK(std::abs(v) < 1e-12);  // d(y^2)/dy = 0 at y = 0
}

TEST_CASE("snapshots are taken at exact steps and match the final state") {
  MediumField m = flat_medium(0.1);
  const double horizon = 0.4;
  const double dt = pick_dt(m, horizon);
  const int steps = static_cast<int>(std::lround(horizon / dt));
  ControlFunction f = local_pulse(m, dt, steps + 1, 0.3, m.grid.nx / 2, 5);

  SolveOptions opt;
  opt.horizon = horizon;
  opt.snapshot_times = {0.0, horizon};
  SolveResult r = solve_forward(m, f, opt);

  REQUIRE(r.snapshots.size() == 2);
  // t = 0: interior still quiescent, only the injected row is set.
  for (int j = 0; j < m.grid.ny - 1; ++j)
    for (int i = 0; i < m.grid.nx; ++i) CHECK(r.snapshots[0].at(i, j) == 0.0);
  // t = horizon: identical to the state the solver hands back.
  CHECK(r.snapshots[1].v == r.final_u.v);

  SolveOptions bad;
  bad.horizon = horizon;
  bad.snapshot_times = {0.37 * dt};
  CHECK_THROWS_AS(solve_forward(m, f, bad), std::invalid_argument);
}

TEST_CASE("stability and alignment violations are refused") {
  MediumField m = flat_medium(0.1);
  const double horizon = 0.2;
  const double dt = pick_dt(m, horizon);
  const int steps = static_cast<int>(std::lround(horizon / dt));
  ControlFunction f = local_pulse(m, dt, steps + 1, 0.1, m.grid.nx / 2, 5);

  SolveOptions opt;
  opt.horizon = horizon;

  ControlFunction unstable = f;
  unstable.dt = 2.0 * m.grid.dx;  // far past the CFL bound
  CHECK_THROWS_AS(solve_forward(m, unstable, opt), std::runtime_error);

  ControlFunction off = f;
  off.gamma0 += 0.3 * m.grid.dx;  // not a node
  CHECK_THROWS_AS(solve_forward(m, off, opt), std::invalid_argument);

  ControlFunction spaced = f;
  spaced.dgamma = 0.5 * m.grid.dx;
  CHECK_THROWS_AS(solve_forward(m, spaced, opt), std::invalid_argument);

  ControlFunction shorter = f;
  shorter.n_t = steps;  // one sample short of the horizon
  CHECK_THROWS_AS(solve_forward(m, shorter, opt), std::invalid_argument);

  SolveOptions ragged;
  ragged.horizon = horizon + 0.31 * dt;
  CHECK_THROWS_AS(solve_forward(m, f, ragged), std::invalid_argument);
}
