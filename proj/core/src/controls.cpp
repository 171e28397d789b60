#include "bcm/controls.hpp"

#include "bcm/grid.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>

namespace bcm {

namespace {

// log(cosh(u)) without overflow
double lncosh(double u) {
  double a = std::abs(u);
  return a + std::log1p(std::exp(-2 * a)) - M_LN2;
}

}  // namespace

double theta_eval(double t, double Delta, double d) {
  double norm = (d / Delta) / (1.0 - std::exp(-Delta / d));
  double val = lncosh((2 * Delta - t) / (2 * d)) + lncosh(t / (2 * d)) -
               2 * lncosh((Delta - t) / (2 * d));
  return norm * val;
}

double spatial_basis_eval(int l, double gamma, double s) {
  double eta_r = 1.0 / (1.0 + std::exp((gamma - 1.0) / s));
  double eta_l = 1.0 / (1.0 + std::exp((-gamma - 1.0) / s));
  double freq = (l + 1) / 2;  // integer division: 0,1,1,2,2,...
  double phase = M_PI * (0.5 * l + freq * (gamma - 1.0));
  return eta_r * eta_l * std::cos(phase);
}

double tent_basis_eval(int l, double gamma, int n_gamma, double d_divisor) {
  double spacing = 2.0 / (n_gamma + 1);
  return theta_eval(gamma - (-1.0 + l * spacing), spacing, spacing / d_divisor);
}

double temporal_basis_eval(int m, double t, double Delta, double d, double delta) {
  return theta_eval(t - m * Delta - delta, Delta, d);
}

double ControlBasis::eval_spatial(int l, double gamma_phys) const {
  double gn = gamma_phys / L;
  if (std::abs(gamma_phys) > support_half_width) return 0.0;
  if (spec.family == SpatialFamily::trig_cutoff)
    return spatial_basis_eval(l, gn, spec.s);
  return tent_basis_eval(l, gn, spec.n_gamma, spec.d_divisor);
}

double ControlBasis::eval_temporal(int m, double t) const {
  return temporal_basis_eval(m, t, Delta, d, delta);
}

double ControlBasis::eval(int k, double gamma_phys, double t) const {
  return eval_spatial(spatial_index(k), gamma_phys) *
         eval_temporal(temporal_index(k), t);
}

std::vector<int> ControlBasis::delayed_family(int l_steps) const {
  if (l_steps < 0 || l_steps > spec.n_t)
    throw std::invalid_argument("delayed family index out of range");
  std::vector<int> ids;
  ids.reserve(static_cast<std::size_t>(spec.n_gamma) * l_steps);
  for (int m = spec.n_t - l_steps; m < spec.n_t; ++m)
    for (int l = 0; l < spec.n_gamma; ++l) ids.push_back(l + m * spec.n_gamma);
  return ids;
}

ControlBasis make_basis(const BasisSpec& spec, double T, double L) {
  // n_gamma == 0 is the empty family (no controls, still a valid object).
  if (spec.n_gamma < 0 || spec.n_t < 1)
    throw std::invalid_argument("basis needs n_gamma >= 0, n_t >= 1");
  if (!(T > 0) || !(L > 0)) throw std::invalid_argument("basis needs T, L > 0");
  if (!(spec.s > 0) || !(spec.d_divisor > 0) ||
      !(spec.eps_offset > 0 && spec.eps_offset < 1))
    throw std::invalid_argument("basis scales out of range");

  ControlBasis b;
  b.spec = spec;
  b.T = T;
  b.L = L;
  b.Delta = T / spec.n_t;
  b.d = b.Delta / spec.d_divisor;
  b.delta = 2.0 * b.d * std::log(1.0 / spec.eps_offset);
  b.support_half_width =
      spec.family == SpatialFamily::trig_cutoff ? (1.0 + 20.0 * spec.s) * L : L;

  // admissibility: controls vanish at t = 0 ...
  double at0 = theta_eval(-b.delta, b.Delta, b.d);
  if (!(std::abs(at0) < 1e-6))
    throw std::invalid_argument(
        "temporal offset too small: controls do not vanish at t=0");
  // ... and at the support-strip edge (trig cutoff tail bound e^{-20})
  if (spec.family == SpatialFamily::trig_cutoff) {
    double edge = std::abs(spatial_basis_eval(0, 1.0 + 20.0 * spec.s, spec.s));
    if (!(edge < 1e-8))
      throw std::invalid_argument("spatial cutoff does not vanish at strip edge");
  }
  return b;
}

double ControlFunction::max_abs() const {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

ControlFunction sample_control(const ControlBasis& basis, int k, double gamma0,
                               double dgamma, int n_gamma, double dt, int n_t) {
  if (k < 0 || k >= basis.n())
    throw std::invalid_argument("basis index out of range");
  ControlFunction f;
  f.control_id = k;
  f.gamma0 = gamma0;
  f.dgamma = dgamma;
  f.n_gamma = n_gamma;
  f.dt = dt;
  f.n_t = n_t;
  f.v.resize(static_cast<std::size_t>(n_gamma) * n_t);
  int l = basis.spatial_index(k), m = basis.temporal_index(k);
  for (int ig = 0; ig < n_gamma; ++ig) {
    double phi = basis.eval_spatial(l, gamma0 + ig * dgamma);
    for (int it = 0; it < n_t; ++it)
      f.at(ig, it) = phi * basis.eval_temporal(m, it * dt);
  }
  return f;
}

ControlFunction delayed_control(const ControlFunction& f, double xi, double T) {
  if (!(xi > 0 && xi <= T))
    throw std::invalid_argument("delay target must lie in (0, T]");
  double shift = (T - xi) / f.dt;
  long n_shift = std::lround(shift);
  if (std::abs(shift - n_shift) > 1e-9)
    throw std::invalid_argument("delay is not a whole number of time steps");
  ControlFunction out = f;
  out.xi_tag = xi;
  double tol = 1e-6 * f.max_abs();
  for (int ig = 0; ig < f.n_gamma; ++ig) {
    for (int it = f.n_t - 1; it >= 0; --it) {
      long src = it - n_shift;
      out.at(ig, it) = src >= 0 ? f.at(ig, static_cast<int>(src)) : 0.0;
    }
    // samples shifted beyond the horizon must be negligible
    for (int it = f.n_t - static_cast<int>(n_shift); it < f.n_t; ++it)
      if (it >= 0 && std::abs(f.at(ig, it)) > tol)
        throw std::invalid_argument(
            "delay pushes control support past the horizon");
  }
  return out;
}

ControlFunction odd_extend(const ControlFunction& f) {
  int M = f.n_t - 1;
  ControlFunction out;
  out.control_id = f.control_id;
  out.xi_tag = f.xi_tag;
  out.gamma0 = f.gamma0;
  out.dgamma = f.dgamma;
  out.n_gamma = f.n_gamma;
  out.dt = f.dt;
  out.n_t = 2 * M + 1;
  out.v.resize(static_cast<std::size_t>(f.n_gamma) * out.n_t);
  for (int ig = 0; ig < f.n_gamma; ++ig) {
    for (int it = 0; it < M; ++it) out.at(ig, it) = f.at(ig, it);
    out.at(ig, M) = 0.0;
    for (int it = 1; it <= M; ++it) out.at(ig, M + it) = -f.at(ig, M - it);
  }
  return out;
}

ControlFunction time_integrate(const ControlFunction& f) {
  ControlFunction out = f;
  for (int ig = 0; ig < f.n_gamma; ++ig) {
    double acc = 0.0;
    out.at(ig, 0) = 0.0;
    for (int it = 1; it < f.n_t; ++it) {
      acc += 0.5 * f.dt * (f.at(ig, it - 1) + f.at(ig, it));
      out.at(ig, it) = acc;
    }
  }
  return out;
}

ControlFunction fold_adjoint(const ControlFunction& g) {
  int M2 = g.n_t - 1;
  if (M2 % 2 != 0)
    throw std::invalid_argument("fold needs an even number of time steps");
  int M = M2 / 2;
  ControlFunction out;
  out.control_id = g.control_id;
  out.xi_tag = g.xi_tag;
  out.gamma0 = g.gamma0;
  out.dgamma = g.dgamma;
  out.n_gamma = g.n_gamma;
  out.dt = g.dt;
  out.n_t = M + 1;
  out.v.resize(static_cast<std::size_t>(g.n_gamma) * out.n_t);
  for (int ig = 0; ig < g.n_gamma; ++ig)
    for (int it = 0; it <= M; ++it)
      out.at(ig, it) = g.at(ig, it) - g.at(ig, M2 - it);
  return out;
}

double control_inner(const ControlFunction& a, const ControlFunction& b) {
  if (a.n_gamma != b.n_gamma || a.n_t != b.n_t ||
      std::abs(a.dt - b.dt) > 1e-15 || std::abs(a.gamma0 - b.gamma0) > 1e-12 ||
      std::abs(a.dgamma - b.dgamma) > 1e-15)
    throw std::invalid_argument("control grids disagree");
  double s = 0.0;
  for (int ig = 0; ig < a.n_gamma; ++ig) {
    double wg = (ig == 0 || ig == a.n_gamma - 1) ? 0.5 : 1.0;
    double row = 0.0;
    for (int it = 0; it < a.n_t; ++it) {
      double wt = (it == 0 || it == a.n_t - 1) ? 0.5 : 1.0;
      row += wt * a.at(ig, it) * b.at(ig, it);
    }
    s += wg * row;
  }
  return s * a.dgamma * a.dt;
}

double basis_min_singular_value(const ControlBasis& basis, int n_quad) {
  using Eigen::MatrixXd;
  int ng = basis.spec.n_gamma, nt = basis.spec.n_t;
  MatrixXd Gs = MatrixXd::Zero(ng, ng), Gt = MatrixXd::Zero(nt, nt);
  double W = basis.support_half_width;
  double dg = 2 * W / (n_quad - 1);
  std::vector<double> vals(ng);
  for (int q = 0; q < n_quad; ++q) {
    double gamma = -W + q * dg;
    double w = trap_w(q, n_quad) * dg;
    for (int l = 0; l < ng; ++l) vals[l] = basis.eval_spatial(l, gamma);
    for (int i = 0; i < ng; ++i)
      for (int j = 0; j <= i; ++j) Gs(i, j) += w * vals[i] * vals[j];
  }
  double dtq = basis.T / (n_quad - 1);
  std::vector<double> tvals(nt);
  for (int q = 0; q < n_quad; ++q) {
    double t = q * dtq;
    double w = trap_w(q, n_quad) * dtq;
    for (int m = 0; m < nt; ++m) tvals[m] = basis.eval_temporal(m, t);
    for (int i = 0; i < nt; ++i)
      for (int j = 0; j <= i; ++j) Gt(i, j) += w * tvals[i] * tvals[j];
  }
  Gs = Gs.selfadjointView<Eigen::Lower>();
  Gt = Gt.selfadjointView<Eigen::Lower>();
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(Gs), et(Gt);
  double ms = es.eigenvalues().minCoeff();
  double mt = et.eigenvalues().minCoeff();
  // Gram of the product basis is the Kronecker product: spectra multiply.
  return std::max(0.0, ms) * std::max(0.0, mt);
}

}  // namespace bcm
