#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace bcm {

/// Uniform tensor grid on the rectangle [x0, x0+(nx-1)*dx] x [y0, y0+(ny-1)*dy].
/// Node (i,j) sits at (x0 + i*dx, y0 + j*dy).  By convention the half-plane
/// models put the boundary line x^2 = 0 on the top row, i.e. y0 + (ny-1)*dy == 0.
struct Grid2 {
  double x0 = 0.0;
  double y0 = 0.0;
  double dx = 1.0;
  double dy = 1.0;
  int nx = 0;
  int ny = 0;

  double x(int i) const { return x0 + i * dx; }
  double y(int j) const { return y0 + j * dy; }
  double x_max() const { return x0 + (nx - 1) * dx; }
  double y_max() const { return y0 + (ny - 1) * dy; }
  std::size_t size() const { return static_cast<std::size_t>(nx) * ny; }

  bool same_layout(const Grid2& o, double tol = 1e-12) const {
    return nx == o.nx && ny == o.ny && std::abs(x0 - o.x0) < tol &&
           std::abs(y0 - o.y0) < tol && std::abs(dx - o.dx) < tol &&
           std::abs(dy - o.dy) < tol;
  }

  /// Index of the grid node nearest to x, clamped into range.
  int nearest_i(double xq) const {
    int i = static_cast<int>(std::lround((xq - x0) / dx));
    return i < 0 ? 0 : (i >= nx ? nx - 1 : i);
  }
  int nearest_j(double yq) const {
    int j = static_cast<int>(std::lround((yq - y0) / dy));
    return j < 0 ? 0 : (j >= ny ? ny - 1 : j);
  }
};

/// Scalar field sampled on a Grid2, stored j-major (row = fixed j).
struct Field2 {
  Grid2 grid;
  std::vector<double> v;

  Field2() = default;
  explicit Field2(const Grid2& g, double fill = 0.0)
      : grid(g), v(g.size(), fill) {}

  double& at(int i, int j) { return v[static_cast<std::size_t>(j) * grid.nx + i]; }
  double at(int i, int j) const { return v[static_cast<std::size_t>(j) * grid.nx + i]; }

  /// Bilinear interpolation; clamps the query to the grid rectangle.
  double interp(double xq, double yq) const {
    const Grid2& g = grid;
    double fx = (xq - g.x0) / g.dx;
    double fy = (yq - g.y0) / g.dy;
    if (fx < 0) fx = 0;
    if (fy < 0) fy = 0;
    if (fx > g.nx - 1) fx = g.nx - 1;
    if (fy > g.ny - 1) fy = g.ny - 1;
    int i = static_cast<int>(fx);
    int j = static_cast<int>(fy);
    if (i > g.nx - 2) i = g.nx - 2;
    if (j > g.ny - 2) j = g.ny - 2;
    double ax = fx - i, ay = fy - j;
    double v00 = at(i, j), v10 = at(i + 1, j);
    double v01 = at(i, j + 1), v11 = at(i + 1, j + 1);
    return (1 - ax) * (1 - ay) * v00 + ax * (1 - ay) * v10 +
           (1 - ax) * ay * v01 + ax * ay * v11;
  }
};

/// Trapezoid weight for node index i on an n-point uniform 1-D grid.
inline double trap_w(int i, int n) { return (i == 0 || i == n - 1) ? 0.5 : 1.0; }

/// Trapezoid rule over the full grid rectangle of f (optionally times g).
inline double trap2(const Field2& f) {
  const Grid2& g = f.grid;
  double s = 0.0;
  for (int j = 0; j < g.ny; ++j) {
    double wj = trap_w(j, g.ny);
    for (int i = 0; i < g.nx; ++i) s += wj * trap_w(i, g.nx) * f.at(i, j);
  }
  return s * g.dx * g.dy;
}

}  // namespace bcm
