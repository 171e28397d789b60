#include "bcm/wave.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>

namespace bcm {

namespace {

int aligned_index(double x, double x0, double h, const char* what) {
  const double s = (x - x0) / h;
  const double r = std::round(s);
  if (std::abs(s - r) > 1e-6)
    throw std::invalid_argument(std::string(what) +
                                " does not sit on the solver grid");
  return static_cast<int>(r);
}

}  // namespace

std::vector<double> normal_trace(const Field2& u, int i0, int n) {
  const Grid2& g = u.grid;
  if (g.ny < 3) throw std::invalid_argument("normal_trace: grid too shallow");
  if (i0 < 0 || i0 + n > g.nx)
    throw std::invalid_argument("normal_trace: column range out of grid");
  const int jt = g.ny - 1;
  std::vector<double> out(static_cast<std::size_t>(n));
  const double inv2h = 1.0 / (2.0 * g.dy);
  for (int k = 0; k < n; ++k) {
    const int i = i0 + k;
    out[static_cast<std::size_t>(k)] =
        (3.0 * u.at(i, jt) - 4.0 * u.at(i, jt - 1) + u.at(i, jt - 2)) * inv2h;
  }
  return out;
}

double field_energy(const Field2& up, const Field2& uc, const Field2& un,
                    double dt, const MediumField& medium) {
  const Grid2& g = uc.grid;
  const double inv2dt = 1.0 / (2.0 * dt);
  const double inv2dx = 1.0 / (2.0 * g.dx);
  const double inv2dy = 1.0 / (2.0 * g.dy);
  double acc = 0.0;
  for (int j = 0; j < g.ny; ++j) {
    const double wj = trap_w(j, g.ny);
    for (int i = 0; i < g.nx; ++i) {
      const double ut = (un.at(i, j) - up.at(i, j)) * inv2dt;
      double ux, uy;
      if (i == 0)
        ux = (uc.at(1, j) - uc.at(0, j)) / g.dx;
      else if (i == g.nx - 1)
        ux = (uc.at(i, j) - uc.at(i - 1, j)) / g.dx;
      else
        ux = (uc.at(i + 1, j) - uc.at(i - 1, j)) * inv2dx;
      if (j == 0)
        uy = (uc.at(i, 1) - uc.at(i, 0)) / g.dy;
      else if (j == g.ny - 1)
        uy = (uc.at(i, j) - uc.at(i, j - 1)) / g.dy;
      else
        uy = (uc.at(i, j + 1) - uc.at(i, j - 1)) * inv2dy;
      const double c = medium.c.at(i, j);
      acc += wj * trap_w(i, g.nx) * (ut * ut / (c * c) + ux * ux + uy * uy);
    }
  }
  return acc * g.dx * g.dy;
}

double inner_product_H(const Field2& y, const Field2& w, const MediumField& medium) {
  const Grid2& g = medium.c.grid;
  if (!y.grid.same_layout(g) || !w.grid.same_layout(g))
    throw std::invalid_argument("inner_product_H: grid mismatch");
  double acc = 0.0;
  for (int j = 0; j < g.ny; ++j) {
    const double wj = trap_w(j, g.ny);
    for (int i = 0; i < g.nx; ++i) {
      const double c = medium.c.at(i, j);
      acc += wj * trap_w(i, g.nx) * y.at(i, j) * w.at(i, j) / (c * c);
    }
  }
  return acc * g.dx * g.dy;
}

double inner_product_H(const Field2& y, const Field2& w, const MediumField& medium,
                       const Field2& mask) {
  const Grid2& g = medium.c.grid;
  if (!y.grid.same_layout(g) || !w.grid.same_layout(g) || !mask.grid.same_layout(g))
    throw std::invalid_argument("inner_product_H: grid mismatch");
  double acc = 0.0;
  for (int j = 0; j < g.ny; ++j) {
    const double wj = trap_w(j, g.ny);
    for (int i = 0; i < g.nx; ++i) {
      const double m = mask.at(i, j);
      if (m == 0.0) continue;
      const double c = medium.c.at(i, j);
      acc += wj * trap_w(i, g.nx) * m * y.at(i, j) * w.at(i, j) / (c * c);
    }
  }
  return acc * g.dx * g.dy;
}

SolveResult solve_forward(const MediumField& medium, const ControlFunction& f,
                          const SolveOptions& opt) {
  const Grid2& g = medium.c.grid;
  if (g.nx < 3 || g.ny < 3)
    throw std::invalid_argument("solve_forward: grid too small");
  if (std::abs(g.dx - g.dy) > 1e-12 * g.dx)
    throw std::invalid_argument("solve_forward: cells must be square");
  const double h = g.dx;

  // Control samples must land on grid nodes and solver steps.
  if (std::abs(f.dgamma - h) > 1e-9 * h)
    throw std::invalid_argument("solve_forward: control spacing differs from grid");
  const int ci0 = aligned_index(f.gamma0, g.x0, h, "control strip origin");
  if (ci0 < 0 || ci0 + f.n_gamma > g.nx)
    throw std::invalid_argument("solve_forward: control strip leaves the grid");

  const double dt = f.dt;
  const double cfl = medium.c_max() * dt * std::sqrt(2.0) / h;
  if (cfl > 1.0 + 1e-12)
    throw std::runtime_error(
        "solve_forward: unstable step, c_max*dt*sqrt(2)/h = " +
        std::to_string(cfl) + " exceeds the bound 1");

  const double steps_f = opt.horizon / dt;
  const int steps = static_cast<int>(std::round(steps_f));
  if (steps < 1 || std::abs(steps_f - steps) > 1e-6)
    throw std::invalid_argument(
        "solve_forward: horizon is not a positive whole number of steps");
  if (f.n_t < steps + 1)
    throw std::invalid_argument("solve_forward: control shorter than horizon");

  // Snapshot bookkeeping: map each requested time to its step index.
  std::vector<int> snap_steps;
  snap_steps.reserve(opt.snapshot_times.size());
  for (double ts : opt.snapshot_times) {
    const double sf = ts / dt;
    const int s = static_cast<int>(std::round(sf));
    if (s < 0 || s > steps || std::abs(sf - s) > 1e-6)
      throw std::invalid_argument(
          "solve_forward: snapshot time is not a step inside the horizon");
    snap_steps.push_back(s);
  }

  // Measurement strip: grid columns with |x| ≤ L + c_*T.
  const double reach = medium.L + medium.c_star * medium.T;
  int si0 = 0;
  while (si0 < g.nx && g.x(si0) < -reach - 1e-9) ++si0;
  int si1 = g.nx - 1;
  while (si1 >= 0 && g.x(si1) > reach + 1e-9) --si1;
  if (si0 > si1) throw std::runtime_error("solve_forward: empty measurement strip");
  const int sn = si1 - si0 + 1;

  SolveResult res;
  res.trace.control_id = f.control_id;
  res.trace.horizon = opt.horizon;
  res.trace.i0 = si0;
  res.trace.gamma0 = g.x(si0);
  res.trace.dgamma = h;
  res.trace.n_gamma = sn;
  res.trace.dt = dt;
  res.trace.n_t = steps + 1;
  res.trace.v.assign(static_cast<std::size_t>(sn) * (steps + 1), 0.0);
  res.snapshots.assign(opt.snapshot_times.size(), Field2{});

  const int nx = g.nx, ny = g.ny;
  const int jt = ny - 1;
  Field2 up(g), uc(g), un(g);

  // (c·dt/h)² per node, hoisted out of the time loop.
  std::vector<double> coef(static_cast<std::size_t>(nx) * ny);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      const double c = medium.c.at(i, j);
      coef[static_cast<std::size_t>(j) * nx + i] = (c * dt / h) * (c * dt / h);
    }

  auto inject_boundary = [&](Field2& u, int step_idx) {
    for (int i = 0; i < nx; ++i) u.at(i, jt) = 0.0;
    for (int k = 0; k < f.n_gamma; ++k) u.at(ci0 + k, jt) = f.at(k, step_idx);
  };

  auto record_trace_row = [&](const Field2& u, int step_idx) {
    const std::vector<double> row = normal_trace(u, si0, sn);
    for (int k = 0; k < sn; ++k)
      res.trace.at(k, step_idx) = row[static_cast<std::size_t>(k)];
  };

  auto record_snapshot = [&](const Field2& u, int step_idx) {
    for (std::size_t q = 0; q < snap_steps.size(); ++q)
      if (snap_steps[q] == step_idx) res.snapshots[q] = u;
  };

  // Quiescent start: u ≡ 0 before the control switches on, so the step-0
  // state only carries the injected boundary value f(·, 0).
  inject_boundary(uc, 0);
  record_trace_row(uc, 0);
  record_snapshot(uc, 0);

  for (int n = 0; n < steps; ++n) {
    const double* S = uc.v.data();
    const double* P = up.v.data();
    double* N = un.v.data();
    for (int j = 1; j < ny - 1; ++j) {
      const std::size_t r = static_cast<std::size_t>(j) * nx;
      for (int i = 1; i < nx - 1; ++i) {
        const std::size_t q = r + i;
        const double lap =
            S[q + 1] + S[q - 1] + S[q + nx] + S[q - nx] - 4.0 * S[q];
        N[q] = 2.0 * S[q] - P[q] + coef[q] * lap;
      }
    }
    // Truncation sides and bottom stay clamped to zero.
    for (int j = 0; j < ny; ++j) {
      un.at(0, j) = 0.0;
      un.at(nx - 1, j) = 0.0;
    }
    for (int i = 0; i < nx; ++i) un.at(i, 0) = 0.0;
    inject_boundary(un, n + 1);

    if (opt.record_energy && n >= 1)
      res.energy.emplace_back(n * dt, field_energy(up, uc, un, dt, medium));

    record_trace_row(un, n + 1);
    record_snapshot(un, n + 1);

    std::swap(up.v, uc.v);
    std::swap(uc.v, un.v);
  }

  res.final_u = uc;
  return res;
}

}  // namespace bcm
