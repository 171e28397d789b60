#include "bcm/medium.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "bcm/io.hpp"

namespace bcm {

namespace {

double gauss(double s, double center, double delta) {
  double u = (s - center) / delta;
  return std::exp(-0.5 * u * u);
}

// d/ds of gauss(s, center, delta)
double dgauss(double s, double center, double delta) {
  return -(s - center) / (delta * delta) * gauss(s, center, delta);
}

double smoothstep01(double u) {
  if (u <= 0) return 0.0;
  if (u >= 1) return 1.0;
  return u * u * (3.0 - 2.0 * u);
}

// Signed distance to the triangle with vertices a, b, c (negative inside).
double tri_sdf(double px, double py, const double (&a)[2], const double (&b)[2],
               const double (&c)[2]) {
  const double* v[3] = {a, b, c};
  double d = std::numeric_limits<double>::infinity();
  int neg = 0, pos = 0;
  for (int k = 0; k < 3; ++k) {
    const double* p0 = v[k];
    const double* p1 = v[(k + 1) % 3];
    double ex = p1[0] - p0[0], ey = p1[1] - p0[1];
    double wx = px - p0[0], wy = py - p0[1];
    double t = (wx * ex + wy * ey) / (ex * ex + ey * ey);
    if (t < 0) t = 0;
    if (t > 1) t = 1;
    double qx = wx - t * ex, qy = wy - t * ey;
    d = std::min(d, std::sqrt(qx * qx + qy * qy));
    (ex * wy - ey * wx < 0 ? neg : pos) += 1;
  }
  bool inside = (neg == 3) || (pos == 3);  // same side of every edge
  return inside ? -d : d;
}

}  // namespace

std::string ScenarioSpec::id() const {
  switch (kind) {
    case Kind::homogeneous: return "homogeneous";
    case Kind::test1: return "test1";
    case Kind::test2: return "test2";
    case Kind::test3: return "test3";
    case Kind::test4: return "test4";
    case Kind::test5: return "test5";
    case Kind::custom: return "custom";
  }
  return "?";
}

std::string ScenarioSpec::parameter_record() const {
  std::ostringstream ss;
  ss.precision(17);
  ss << id() << " T=" << T << " L=" << L << " c_star=" << c_star;
  switch (kind) {
    case Kind::homogeneous:
      ss << " c0=" << c0;
      break;
    case Kind::test1:
    case Kind::test2:
    case Kind::test3:
      ss << " a=" << a << " xbar=(" << xbar1 << "," << xbar2 << ")"
         << " delta=(" << delta1 << "," << delta2 << ")";
      break;
    case Kind::test4:
      ss << " a=" << a << " xbar=(" << xbar1 << "," << xbar2 << ")"
         << " delta=(" << delta1 << "," << delta2 << ")"
         << " phi=" << phi << " rot_y0=" << rot_y0;
      break;
    case Kind::test5:
      ss << " apex=(" << wedge_apex_x << "," << wedge_apex_y << ")"
         << " base_y=" << wedge_base_y << " half_width=" << wedge_half_width
         << " rho=" << wedge_rho << " smooth=" << wedge_smooth;
      break;
    case Kind::custom:
      ss << " file=" << custom_c_csv;
      break;
  }
  return ss.str();
}

ScenarioSpec scenario_defaults(ScenarioSpec::Kind kind) {
  ScenarioSpec s;
  s.kind = kind;
  switch (kind) {
    case ScenarioSpec::Kind::homogeneous:
      s.T = 1.0;
      s.c0 = 1.0;
      s.c_star = 1.0;
      break;
    case ScenarioSpec::Kind::test1:
      s.T = 1.0;
      s.c_star = 1.0;
      s.a = 1.0;
      s.delta1 = 0.5;
      s.delta2 = 0.5;
      break;
    case ScenarioSpec::Kind::test2:
      s.T = 1.5;
      s.c_star = 1.25;
      s.a = 0.25;
      s.delta1 = 0.5;
      s.delta2 = 0.25;
      break;
    case ScenarioSpec::Kind::test3:
      s.T = 1.5;
      s.c_star = 1.75;
      s.a = 0.25;
      s.delta1 = 0.5;
      s.delta2 = 0.25;
      break;
    case ScenarioSpec::Kind::test4:
      s.T = 1.0;
      s.c_star = 1.4;
      s.a = 0.25;
      s.xbar1 = 0.0;
      s.xbar2 = 0.0;
      s.delta1 = 0.375;
      s.delta2 = 0.25;
      s.phi = M_PI / 12.0;
      s.rot_y0 = -0.25;
      break;
    case ScenarioSpec::Kind::test5:
      s.T = 1.0;
      s.c_star = 1.0;
      break;
    case ScenarioSpec::Kind::custom:
      break;
  }
  return s;
}

double scenario_density(const ScenarioSpec& s, double x, double y) {
  using K = ScenarioSpec::Kind;
  switch (s.kind) {
    case K::homogeneous:
      return 1.0 / (s.c0 * s.c0);
    case K::test1:
      return 1.0 + s.a * gauss(x, s.xbar1, s.delta1) * gauss(y, s.xbar2, s.delta2);
    case K::test2:
      return 1.0 - 0.5 * y + 0.0625 * x * x -
             s.a * gauss(x, s.xbar1, s.delta1) * dgauss(y, s.xbar2, s.delta2);
    case K::test3:
      return 1.0 - 0.5 * y + 0.0625 * x * x +
             s.a * gauss(x, s.xbar1, s.delta1) * (1.0 - y) *
                 dgauss(y, s.xbar2, s.delta2);
    case K::test4: {
      double cph = std::cos(s.phi), sph = std::sin(s.phi);
      double ys = y - s.rot_y0;
      double z1 = cph * x + sph * ys;
      double z2 = -sph * x + cph * ys;
      // d g1(z1)/dx = g1'(z1) * dz1/dx
      return 1.0 - s.a * gauss(z2, s.xbar2, s.delta2) *
                       dgauss(z1, s.xbar1, s.delta1) * cph;
    }
    case K::test5: {
      double apex[2] = {s.wedge_apex_x, s.wedge_apex_y};
      double bl[2] = {s.wedge_apex_x - s.wedge_half_width, s.wedge_base_y};
      double br[2] = {s.wedge_apex_x + s.wedge_half_width, s.wedge_base_y};
      double d = tri_sdf(x, y, apex, br, bl);
      double t;
      if (s.wedge_smooth > 0)
        t = smoothstep01((0.5 * s.wedge_smooth - d) / s.wedge_smooth);
      else  // unresolved smoothing length: sharp edge
        t = d < 0 ? 1.0 : (d > 0 ? 0.0 : 0.5);
      return 1.0 + (s.wedge_rho - 1.0) * t;
    }
    case K::custom:
      throw std::logic_error("custom scenario has no analytic density");
  }
  throw std::logic_error("unknown scenario kind");
}

double scenario_speed(const ScenarioSpec& s, double x, double y) {
  double rho = scenario_density(s, x, y);
  if (!(rho > 0))
    throw std::runtime_error("scenario density is not positive at sample point");
  return 1.0 / std::sqrt(rho);
}

double MediumField::c_min() const {
  double m = std::numeric_limits<double>::infinity();
  for (double v : c.v) m = std::min(m, v);
  return m;
}

double MediumField::c_max() const {
  double m = -std::numeric_limits<double>::infinity();
  for (double v : c.v) m = std::max(m, v);
  return m;
}

std::uint64_t MediumField::content_hash() const {
  std::uint64_t h = fnv1a64(c.v);
  std::ostringstream ss;
  ss.precision(17);
  ss << grid.nx << " " << grid.ny << " " << grid.x0 << " " << grid.y0 << " "
     << grid.dx << " " << grid.dy << " " << c_star << " " << T << " " << L;
  std::string meta = ss.str();
  return fnv1a64(meta.data(), meta.size(), h);
}

MediumField make_scenario(const ScenarioSpec& spec, const DiscretizationSpec& disc) {
  if (!(spec.T > 0) || !(spec.L > 0) || !(spec.c_star > 0))
    throw std::invalid_argument("scenario requires positive T, L, c_star");
  if (!(disc.h > 0)) throw std::invalid_argument("grid spacing must be positive");

  // Snap h so sigma endpoints +-L land on grid nodes.
  int n_per_L = std::max(1, static_cast<int>(std::lround(spec.L / disc.h)));
  double h = spec.L / n_per_L;

  double margin = disc.margin;
  if (margin < 0) margin = std::max(0.05 * spec.c_star * spec.T, 4 * h);

  double reach = spec.c_star * spec.T;
  int n_half = static_cast<int>(std::ceil((spec.L + 2 * reach + margin) / h - 1e-9));
  int n_depth = static_cast<int>(std::ceil((reach + margin) / h - 1e-9));

  Grid2 g;
  g.dx = g.dy = h;
  g.nx = 2 * n_half + 1;
  g.ny = n_depth + 1;
  g.x0 = -n_half * h;
  g.y0 = -n_depth * h;

  // Resolve the wedge smoothing length against the actual grid spacing.
  ScenarioSpec rs = spec;
  if (rs.kind == ScenarioSpec::Kind::test5 && rs.wedge_smooth <= 0)
    rs.wedge_smooth = 2 * h;

  MediumField m;
  m.grid = g;
  m.c_star = spec.c_star;
  m.T = spec.T;
  m.L = spec.L;
  m.provenance = rs.parameter_record();

  if (spec.kind == ScenarioSpec::Kind::custom) {
    if (spec.custom_c_csv.empty())
      throw std::invalid_argument("custom scenario needs a speed CSV path");
    Field2 loaded = load_field_csv(spec.custom_c_csv);
    // Resample onto the requested grid; the file must cover it.
    const Grid2& lg = loaded.grid;
    if (lg.x0 > g.x0 + 1e-9 || lg.x_max() < g.x_max() - 1e-9 ||
        lg.y0 > g.y0 + 1e-9 || lg.y_max() < g.y_max() - 1e-9)
      throw std::runtime_error(
          "custom speed grid does not cover the required rectangle");
    m.c = Field2(g);
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i)
        m.c.at(i, j) = loaded.interp(g.x(i), g.y(j));
  } else {
    m.c = Field2(g);
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i)
        m.c.at(i, j) = scenario_speed(rs, g.x(i), g.y(j));
  }

  for (double v : m.c.v) {
    if (!(v > 0)) throw std::runtime_error("speed field is not positive");
    if (v > spec.c_star * (1 + 1e-12))
      throw std::runtime_error("speed field exceeds the c_star bound");
  }
  return m;
}

}  // namespace bcm
