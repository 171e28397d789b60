#include "bcm/rays.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace bcm {

namespace {

struct RayState {
  double x, y, px, py;
};

struct MediumSampler {
  const Field2& c;
  Field2 dcdx, dcdy;

  explicit MediumSampler(const MediumField& m) : c(m.c) {
    const Grid2& g = m.grid;
    dcdx = Field2(g);
    dcdy = Field2(g);
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i) {
        if (i == 0)
          dcdx.at(i, j) = (c.at(1, j) - c.at(0, j)) / g.dx;
        else if (i == g.nx - 1)
          dcdx.at(i, j) = (c.at(i, j) - c.at(i - 1, j)) / g.dx;
        else
          dcdx.at(i, j) = (c.at(i + 1, j) - c.at(i - 1, j)) / (2 * g.dx);
        if (j == 0)
          dcdy.at(i, j) = (c.at(i, 1) - c.at(i, 0)) / g.dy;
        else if (j == g.ny - 1)
          dcdy.at(i, j) = (c.at(i, j) - c.at(i, j - 1)) / g.dy;
        else
          dcdy.at(i, j) = (c.at(i, j + 1) - c.at(i, j - 1)) / (2 * g.dy);
      }
  }

  RayState deriv(const RayState& s) const {
    double cv = c.interp(s.x, s.y);
    double gx = dcdx.interp(s.x, s.y);
    double gy = dcdy.interp(s.x, s.y);
    return {cv * cv * s.px, cv * cv * s.py, -gx / cv, -gy / cv};
  }

  /// Shortest speed-variation length scale c/|grad c| over the grid.
  double feature_length() const {
    double ell = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < c.v.size(); ++k) {
      double gmag = std::hypot(dcdx.v[k], dcdy.v[k]);
      if (gmag > 1e-14) ell = std::min(ell, c.v[k] / gmag);
    }
    return ell;
  }
};

RayState rk4_step(const MediumSampler& med, const RayState& s, double h) {
  auto add = [](const RayState& a, const RayState& b, double w) {
    return RayState{a.x + w * b.x, a.y + w * b.y, a.px + w * b.px, a.py + w * b.py};
  };
  RayState k1 = med.deriv(s);
  RayState k2 = med.deriv(add(s, k1, h / 2));
  RayState k3 = med.deriv(add(s, k2, h / 2));
  RayState k4 = med.deriv(add(s, k3, h));
  RayState out = s;
  out.x += h / 6 * (k1.x + 2 * k2.x + 2 * k3.x + k4.x);
  out.y += h / 6 * (k1.y + 2 * k2.y + 2 * k3.y + k4.y);
  out.px += h / 6 * (k1.px + 2 * k2.px + 2 * k3.px + k4.px);
  out.py += h / 6 * (k1.py + 2 * k2.py + 2 * k3.py + k4.py);
  return out;
}

}  // namespace

RayChart trace_rays(const MediumField& medium, const std::vector<double>& gammas,
                    double xi_max, const RayTraceOptions& opt) {
  if (gammas.size() < 3)
    throw std::invalid_argument("trace_rays needs at least 3 rays");
  if (!(xi_max > 0) || opt.n_xi < 2)
    throw std::invalid_argument("trace_rays needs xi_max > 0 and n_xi >= 2");

  MediumSampler med(medium);
  double dxi = xi_max / (opt.n_xi - 1);
  double ell = med.feature_length();
  if (dxi * medium.c_max() > opt.max_step_factor * ell)
    throw std::invalid_argument(
        "ray step too coarse for this medium; increase n_xi");

  RayChart ch;
  ch.n_g = static_cast<int>(gammas.size());
  ch.n_xi = opt.n_xi;
  ch.gamma = gammas;
  ch.xi.resize(opt.n_xi);
  for (int k = 0; k < opt.n_xi; ++k) ch.xi[k] = k * dxi;
  std::size_t n = ch.idx(ch.n_g - 1, ch.n_xi - 1) + 1;
  ch.x1.assign(n, 0.0);
  ch.x2.assign(n, 0.0);
  ch.J.assign(n, 0.0);
  ch.beta.assign(n, 0.0);
  ch.ok.assign(n, 0);

  const Grid2& g = medium.grid;
  // keep one cell of clearance so bilinear stencils stay meaningful
  double xlo = g.x0 + g.dx, xhi = g.x_max() - g.dx;
  double ylo = g.y0 + g.dy;

  std::vector<unsigned char> alive(ch.n_g, 1);
  for (int ig = 0; ig < ch.n_g; ++ig) {
    double gamma = gammas[ig];
    double c0 = med.c.interp(gamma, 0.0);
    RayState s{gamma, 0.0, 0.0, -1.0 / c0};
    for (int k = 0; k < ch.n_xi; ++k) {
      std::size_t id = ch.idx(ig, k);
      ch.x1[id] = s.x;
      ch.x2[id] = s.y;
      ch.ok[id] = alive[ig];
      if (k + 1 < ch.n_xi) {
        if (alive[ig]) {
          s = rk4_step(med, s, dxi);
          bool in = s.x > xlo && s.x < xhi && s.y > ylo && s.y < 1e-9;
          if (!in) alive[ig] = 0;
        }
        // dead rays keep their last position; ok stays 0 from here on
      }
    }
  }

  // Cross-ray derivative, fold detection, and amplitude weight.
  for (int ig = 0; ig < ch.n_g; ++ig) {
    int im = ig > 0 ? ig - 1 : ig;
    int ip = ig < ch.n_g - 1 ? ig + 1 : ig;
    double dg = gammas[ip] - gammas[im];
    bool lost = false;
    double kappa0 = 0.0;
    for (int k = 0; k < ch.n_xi; ++k) {
      std::size_t id = ch.idx(ig, k);
      double dx1 = (ch.x1[ch.idx(ip, k)] - ch.x1[ch.idx(im, k)]) / dg;
      double dx2 = (ch.x2[ch.idx(ip, k)] - ch.x2[ch.idx(im, k)]) / dg;
      ch.J[id] = std::hypot(dx1, dx2);
      double cv = med.c.interp(ch.x1[id], ch.x2[id]);
      double kappa = ch.J[id] / cv;
      if (k == 0) kappa0 = kappa;
      ch.beta[id] = std::sqrt(std::max(0.0, kappa0 * kappa));

      // neighbors must be regular for the difference stencil to mean anything
      if (!ch.ok[ch.idx(ip, k)] || !ch.ok[ch.idx(im, k)]) lost = true;
      // xi-tangent is known exactly from the ray ODE: dx/dxi = c^2 p, whose
      // magnitude is c; the family stays orientation-consistent while the
      // (gamma, xi) Jacobian determinant keeps its launch sign (negative,
      // since rays start downward with gamma increasing rightward).
      if (!lost) {
        double tx, ty;
        if (k + 1 < ch.n_xi) {
          tx = (ch.x1[ch.idx(ig, k + 1)] - ch.x1[id]) / dxi;
          ty = (ch.x2[ch.idx(ig, k + 1)] - ch.x2[id]) / dxi;
        } else {
          tx = (ch.x1[id] - ch.x1[ch.idx(ig, k - 1)]) / dxi;
          ty = (ch.x2[id] - ch.x2[ch.idx(ig, k - 1)]) / dxi;
        }
        double det = dx1 * ty - dx2 * tx;
        if (det > -opt.det_floor) lost = true;
      }
      if (lost) ch.ok[id] = 0;
    }
  }
  return ch;
}

RayChart trace_chart(const MediumField& medium, const RayTraceOptions& opt) {
  const Grid2& g = medium.grid;
  std::vector<double> gammas;
  for (int i = 0; i < g.nx; ++i) {
    double x = g.x(i);
    if (std::abs(x) <= medium.L + 1e-12) gammas.push_back(x);
  }
  return trace_rays(medium, gammas, medium.T, opt);
}

namespace {

// Marks grid nodes covered by the triangle (a, b, c).
void fill_tri(Field2& mask, const double (&a)[2], const double (&b)[2],
              const double (&c)[2]) {
  const Grid2& g = mask.grid;
  double xmin = std::min({a[0], b[0], c[0]}), xmax = std::max({a[0], b[0], c[0]});
  double ymin = std::min({a[1], b[1], c[1]}), ymax = std::max({a[1], b[1], c[1]});
  int i0 = std::max(0, static_cast<int>(std::floor((xmin - g.x0) / g.dx)));
  int i1 = std::min(g.nx - 1, static_cast<int>(std::ceil((xmax - g.x0) / g.dx)));
  int j0 = std::max(0, static_cast<int>(std::floor((ymin - g.y0) / g.dy)));
  int j1 = std::min(g.ny - 1, static_cast<int>(std::ceil((ymax - g.y0) / g.dy)));
  double d = (b[1] - c[1]) * (a[0] - c[0]) + (c[0] - b[0]) * (a[1] - c[1]);
  if (std::abs(d) < 1e-30) return;
  for (int j = j0; j <= j1; ++j)
    for (int i = i0; i <= i1; ++i) {
      double px = g.x(i), py = g.y(j);
      double w0 = ((b[1] - c[1]) * (px - c[0]) + (c[0] - b[0]) * (py - c[1])) / d;
      double w1 = ((c[1] - a[1]) * (px - c[0]) + (a[0] - c[0]) * (py - c[1])) / d;
      double w2 = 1.0 - w0 - w1;
      double eps = -1e-9;
      if (w0 >= eps && w1 >= eps && w2 >= eps) mask.at(i, j) = 1.0;
    }
}

}  // namespace

Field2 tube_mask(const RayChart& ch, const Grid2& grid) {
  Field2 mask(grid, 0.0);
  for (int ig = 0; ig + 1 < ch.n_g; ++ig)
    for (int k = 0; k + 1 < ch.n_xi; ++k) {
      std::size_t i00 = ch.idx(ig, k), i01 = ch.idx(ig, k + 1);
      std::size_t i10 = ch.idx(ig + 1, k), i11 = ch.idx(ig + 1, k + 1);
      if (!(ch.ok[i00] && ch.ok[i01] && ch.ok[i10] && ch.ok[i11])) continue;
      double p00[2] = {ch.x1[i00], ch.x2[i00]};
      double p01[2] = {ch.x1[i01], ch.x2[i01]};
      double p10[2] = {ch.x1[i10], ch.x2[i10]};
      double p11[2] = {ch.x1[i11], ch.x2[i11]};
      fill_tri(mask, p00, p10, p11);
      fill_tri(mask, p00, p11, p01);
    }
  return mask;
}

void save_chart_csv(const RayChart& ch, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  os.precision(std::numeric_limits<double>::max_digits10);
  os << "gamma,xi,x1,x2,J,beta,ok\n";
  for (int ig = 0; ig < ch.n_g; ++ig)
    for (int k = 0; k < ch.n_xi; ++k) {
      std::size_t id = ch.idx(ig, k);
      os << ch.gamma[ig] << ',' << ch.xi[k] << ',' << ch.x1[id] << ','
         << ch.x2[id] << ',' << ch.J[id] << ',' << ch.beta[id] << ','
         << int(ch.ok[id]) << "\n";
    }
  if (!os) throw std::runtime_error("write failed: " + path);
}

}  // namespace bcm
