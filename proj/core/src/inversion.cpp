#include "bcm/inversion.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "bcm/parallel.hpp"

namespace bcm {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

ControlBasis basis_from_manifest(const DatasetManifest& man) {
  return make_basis(man.basis, man.T, man.L);
}

int delay_steps(const DatasetManifest& man, double xi) {
  const double Delta = man.Delta();
  const double st = xi / Delta;
  const int l = static_cast<int>(std::round(st));
  if (l < 0 || l > man.basis.n_t || std::abs(st - l) > 1e-6)
    throw std::invalid_argument(
        "delay value is not a whole basis shift inside [0, T]");
  return l;
}

/// Strip-local column range [c0, c0+cn) of the control support, matching
/// the sampling rule used when the dataset was built.
void support_cols(const DatasetManifest& man, const ControlBasis& basis,
                  int& c0, int& cn) {
  const double h = man.grid.dx;
  const double shw = basis.support_half_width;
  int gi0 = 0;
  while (gi0 < man.grid.nx && man.grid.x(gi0) < -shw - 0.5 * h) ++gi0;
  int gi1 = man.grid.nx - 1;
  while (gi1 >= 0 && man.grid.x(gi1) > shw + 0.5 * h) --gi1;
  c0 = gi0 - man.strip_i0;
  cn = gi1 - gi0 + 1;
  if (c0 < 0 || c0 + cn > man.strip_n)
    throw std::runtime_error("control support leaves the measurement strip");
}

/// Strip-local column range of σ = [−L, L].
void sigma_cols(const DatasetManifest& man, int& c0, int& cn) {
  int gi0 = 0;
  while (gi0 < man.grid.nx && man.grid.x(gi0) < -man.L - 1e-9) ++gi0;
  int gi1 = man.grid.nx - 1;
  while (gi1 >= 0 && man.grid.x(gi1) > man.L + 1e-9) --gi1;
  c0 = gi0 - man.strip_i0;
  cn = gi1 - gi0 + 1;
  if (c0 < 0 || c0 + cn > man.strip_n)
    throw std::runtime_error("boundary interval leaves the measurement strip");
}

/// Temporal pairing matrix: column m holds S^Tψ_m sampled on the 2M+1
/// solver steps, times the trapezoid weight and dt.  The t = T sample is
/// zero (odd-extension midpoint convention, matching odd_extend).
Eigen::MatrixXd temporal_pair_matrix(const ControlBasis& basis, double dt, int M) {
  const int n2 = 2 * M + 1;
  Eigen::MatrixXd P(n2, basis.spec.n_t);
  for (int m = 0; m < basis.spec.n_t; ++m)
    for (int it = 0; it < n2; ++it) {
      double v;
      if (it < M)
        v = basis.eval_temporal(m, it * dt);
      else if (it == M)
        v = 0.0;
      else
        v = -basis.eval_temporal(m, (2 * M - it) * dt);
      P(it, m) = v * trap_w(it, n2) * dt;
    }
  return P;
}

/// Spatial pairing matrix: column l holds φ_l sampled on the support
/// columns, times the trapezoid weight and h.
Eigen::MatrixXd spatial_pair_matrix(const DatasetManifest& man,
                                    const ControlBasis& basis, int c0, int cn) {
  Eigen::MatrixXd P(cn, basis.spec.n_gamma);
  const double h = man.grid.dx;
  for (int l = 0; l < basis.spec.n_gamma; ++l)
    for (int ig = 0; ig < cn; ++ig) {
      const double gamma = man.strip_gamma0() + (c0 + ig) * h;
      P(ig, l) = basis.eval_spatial(l, gamma) * trap_w(ig, cn) * h;
    }
  return P;
}

/// Raw (unsymmetrized) pairing block over a family: entry (i, j) is
/// ½ ∫∫ trace[J S^T f_{family_i}] · S^T f_{family_j} over strip × [0, 2T].
Eigen::MatrixXd assemble_gram_raw(const TraceDataset& ds,
                                  const ControlBasis& basis,
                                  const std::vector<int>& family,
                                  int n_threads) {
  const DatasetManifest& man = ds.man;
  const int nf = static_cast<int>(family.size());
  Eigen::MatrixXd G(nf, nf);
  if (nf == 0) return G;

  const int M = man.steps_T;
  const int n2 = 2 * M + 1;
  int c0, cn;
  support_cols(man, basis, c0, cn);
  const Eigen::MatrixXd Pt = temporal_pair_matrix(basis, man.dt, M);
  const Eigen::MatrixXd Pg = spatial_pair_matrix(man, basis, c0, cn);

  parallel_for(nf, n_threads, [&](int r) {
    const TraceRecord& q = ds.resp_integrated[family[r]];
    if (q.n_t != n2 || q.n_gamma != man.strip_n)
      throw std::runtime_error("trace layout disagrees with the manifest");
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                   Eigen::RowMajor>>
        Q(q.v.data() + static_cast<std::size_t>(c0) * n2, cn, n2);
    // Z(l, m) = Σ_γ Σ_t φ_l(γ)·q(γ,t)·S^Tψ_m(t) with all quadrature weights
    const Eigen::MatrixXd Z = Pg.transpose() * (Q * Pt);
    for (int cidx = 0; cidx < nf; ++cidx) {
      const int j = family[cidx];
      G(r, cidx) = 0.5 * Z(basis.spatial_index(j), basis.temporal_index(j));
    }
  });
  return G;
}

void spectral_stats(const Eigen::MatrixXd& G, double& lmin, double& lmax,
                    double& cond) {
  if (G.rows() == 0) {
    lmin = lmax = 0.0;
    cond = 0.0;
    return;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G,
                                                    Eigen::EigenvaluesOnly);
  lmin = es.eigenvalues().minCoeff();
  lmax = es.eigenvalues().maxCoeff();
  cond = lmin > 0 ? lmax / lmin : std::numeric_limits<double>::infinity();
}

double frob_sym_defect(const Eigen::MatrixXd& raw) {
  if (raw.rows() == 0) return 0.0;
  const double nrm = raw.norm();
  if (nrm == 0) return 0.0;
  return (raw - raw.transpose()).norm() / nrm;
}

double boundary_a(HarmonicTag tag, double gamma) {
  switch (tag) {
    case HarmonicTag::unit: return 1.0;
    case HarmonicTag::x1: return gamma;
    case HarmonicTag::x2: return 0.0;
  }
  return 0.0;
}

double boundary_a_nu(HarmonicTag tag) {
  return tag == HarmonicTag::x2 ? 1.0 : 0.0;
}

double interior_a(HarmonicTag tag, double x, double y) {
  switch (tag) {
    case HarmonicTag::unit: return 1.0;
    case HarmonicTag::x1: return x;
    case HarmonicTag::x2: return y;
  }
  return 0.0;
}

Eigen::VectorXd assemble_rhs_raw(const TraceDataset& ds,
                                 const ControlBasis& basis,
                                 const std::vector<int>& family,
                                 HarmonicTag tag) {
  const DatasetManifest& man = ds.man;
  const int nf = static_cast<int>(family.size());
  Eigen::VectorXd b(nf);
  if (nf == 0) return b;

  const int M = man.steps_T;
  const double dt = man.dt;
  const double h = man.grid.dx;
  const double T = man.T;

  // Time weights (T−t)·w_t·dt on [0, T].
  Eigen::VectorXd wt(M + 1);
  for (int it = 0; it <= M; ++it)
    wt(it) = (T - it * dt) * trap_w(it, M + 1) * dt;

  // Boundary-value weights a(γ)·w_γ·h over the whole strip.
  Eigen::VectorXd wa(man.strip_n);
  for (int ig = 0; ig < man.strip_n; ++ig)
    wa(ig) = boundary_a(tag, man.strip_gamma0() + ig * h) *
             trap_w(ig, man.strip_n) * h;

  // Separable normal-derivative term: a_ν·[∫φ_l dγ]·[∫(T−t)ψ_m dt].
  const double anu = boundary_a_nu(tag);
  Eigen::VectorXd phi_int = Eigen::VectorXd::Zero(basis.spec.n_gamma);
  Eigen::VectorXd psi_int = Eigen::VectorXd::Zero(basis.spec.n_t);
  if (anu != 0.0) {
    int c0, cn;
    support_cols(man, basis, c0, cn);
    for (int l = 0; l < basis.spec.n_gamma; ++l) {
      double s = 0.0;
      for (int ig = 0; ig < cn; ++ig) {
        const double gamma = man.strip_gamma0() + (c0 + ig) * h;
        s += basis.eval_spatial(l, gamma) * trap_w(ig, cn) * h;
      }
      phi_int(l) = s;
    }
    for (int m = 0; m < basis.spec.n_t; ++m) {
      double s = 0.0;
      for (int it = 0; it <= M; ++it)
        s += basis.eval_temporal(m, it * dt) * wt(it);
      psi_int(m) = s;
    }
  }

  for (int r = 0; r < nf; ++r) {
    const int k = family[r];
    const TraceRecord& tr = ds.resp_direct[k];
    if (tr.n_t != M + 1 || tr.n_gamma != man.strip_n)
      throw std::runtime_error("trace layout disagrees with the manifest");
    double acc = 0.0;
    if (tag != HarmonicTag::x2) {  // a vanishes on the line for tag x2
      Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                     Eigen::RowMajor>>
          R(tr.v.data(), man.strip_n, M + 1);
      acc = wa.dot(R * wt);
    }
    if (anu != 0.0)
      acc -= anu * phi_int(basis.spatial_index(k)) *
             psi_int(basis.temporal_index(k));
    b(r) = acc;
  }
  return b;
}

/// Snapshot matrix weighted by √(w_quad·c⁻²): pairwise dot products then
/// give the interior inner products in one symmetric product.
Eigen::MatrixXd weighted_snapshots(const TraceDataset& ds,
                                   const MediumField& medium,
                                   const std::vector<int>& family) {
  const DatasetManifest& man = ds.man;
  if (!man.has_snapshots)
    throw std::invalid_argument("dataset carries no interior snapshots");
  if (medium.content_hash() != man.medium_hash)
    throw std::invalid_argument(
        "interior systems need the very medium the dataset was built from");
  const Grid2& g = medium.c.grid;
  if (!g.same_layout(man.grid))
    throw std::invalid_argument("medium grid differs from the dataset grid");

  Eigen::VectorXd sqw(static_cast<Eigen::Index>(g.size()));
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      const double c = medium.c.at(i, j);
      const double w =
          trap_w(i, g.nx) * trap_w(j, g.ny) * g.dx * g.dy / (c * c);
      sqw(static_cast<Eigen::Index>(j) * g.nx + i) = std::sqrt(w);
    }

  Eigen::MatrixXd U(static_cast<Eigen::Index>(g.size()), family.size());
  for (std::size_t r = 0; r < family.size(); ++r) {
    const Field2& snap = ds.snapshot_T[family[r]];
    if (!snap.grid.same_layout(g))
      throw std::runtime_error("snapshot grid differs from the dataset grid");
    U.col(r) = Eigen::Map<const Eigen::VectorXd>(
                   snap.v.data(), static_cast<Eigen::Index>(snap.v.size()))
                   .cwiseProduct(sqw);
  }
  return U;
}

struct Smoother {
  // Gaussian taps for one axis; identity when sigma <= 0.
  std::vector<double> w;  // 2K+1 taps
  int K = 0;

  Smoother(double sigma, double spacing) {
    if (sigma <= 0 || spacing <= 0) return;
    K = static_cast<int>(std::ceil(4.0 * sigma / spacing));
    w.assign(static_cast<std::size_t>(2 * K + 1), 0.0);
    double sum = 0.0;
    for (int j = -K; j <= K; ++j) {
      const double x = j * spacing / sigma;
      w[static_cast<std::size_t>(j + K)] = std::exp(-0.5 * x * x);
      sum += w[static_cast<std::size_t>(j + K)];
    }
    for (double& x : w) x /= sum;
  }

  // Out-of-range samples are extended antisymmetrically about the end
  // values, which keeps constants AND linear trends exact at the edges;
  // a plain (even) reflection would flatten a ramp and bias everything
  // within one kernel width of the boundary.
  template <class Vec>
  static double sample(const Vec& a, int i, int n) {
    if (n == 1) return a(0);
    if (i >= 0 && i < n) return a(i);
    if (i < 0) return 2.0 * a(0) - a(std::min(-i, n - 1));
    return 2.0 * a(n - 1) - a(std::max(2 * (n - 1) - i, 0));
  }
};

/// Smooths each column of A as a function of the row index (axis 0) or
/// each row as a function of the column index (axis 1).
void gaussian_smooth_axis(Eigen::MatrixXd& A, double sigma, double spacing,
                          int axis) {
  const Smoother sm(sigma, spacing);
  if (sm.K == 0) return;
  if (axis == 0) {
    const int n = static_cast<int>(A.rows());
    Eigen::VectorXd tmp(n);
    for (Eigen::Index c = 0; c < A.cols(); ++c) {
      auto col = A.col(c);
      for (int i = 0; i < n; ++i) {
        double s = 0.0;
        for (int j = -sm.K; j <= sm.K; ++j)
          s += sm.w[static_cast<std::size_t>(j + sm.K)] *
               Smoother::sample(col, i + j, n);
        tmp(i) = s;
      }
      A.col(c) = tmp;
    }
  } else {
    const int n = static_cast<int>(A.cols());
    Eigen::VectorXd tmp(n);
    for (Eigen::Index r = 0; r < A.rows(); ++r) {
      auto row = A.row(r);
      for (int i = 0; i < n; ++i) {
        double s = 0.0;
        for (int j = -sm.K; j <= sm.K; ++j)
          s += sm.w[static_cast<std::size_t>(j + sm.K)] *
               Smoother::sample(row, i + j, n);
        tmp(i) = s;
      }
      A.row(r) = tmp;
    }
  }
}

}  // namespace

const char* harmonic_name(HarmonicTag t) {
  switch (t) {
    case HarmonicTag::unit: return "unit";
    case HarmonicTag::x1: return "x1";
    case HarmonicTag::x2: return "x2";
  }
  return "?";
}

GramMatrix gram_matrix(const TraceDataset& ds, double xi, int n_threads) {
  const ControlBasis basis = basis_from_manifest(ds.man);
  const int l = delay_steps(ds.man, xi);
  GramMatrix out;
  out.xi = xi;
  out.family = basis.delayed_family(l);
  const Eigen::MatrixXd raw =
      assemble_gram_raw(ds, basis, out.family, n_threads);
  if (!raw.allFinite())
    throw std::runtime_error("pairing quadrature produced non-finite entries");
  out.sym_defect = frob_sym_defect(raw);
  out.G = 0.5 * (raw + raw.transpose());
  spectral_stats(out.G, out.lambda_min, out.lambda_max, out.cond);
  return out;
}

RhsVector rhs_vector(const TraceDataset& ds, double xi, HarmonicTag tag) {
  const ControlBasis basis = basis_from_manifest(ds.man);
  const int l = delay_steps(ds.man, xi);
  RhsVector out;
  out.xi = xi;
  out.tag = tag;
  out.family = basis.delayed_family(l);
  out.b = assemble_rhs_raw(ds, basis, out.family, tag);
  if (!out.b.allFinite())
    throw std::runtime_error("pairing quadrature produced non-finite entries");
  return out;
}

Eigen::MatrixXd interior_gram(const TraceDataset& ds, const MediumField& medium,
                              const std::vector<int>& family, int n_threads) {
  (void)n_threads;  // the symmetric product below is already the fast path
  const Eigen::MatrixXd U = weighted_snapshots(ds, medium, family);
  return U.transpose() * U;
}

Eigen::VectorXd interior_rhs(const TraceDataset& ds, const MediumField& medium,
                             const std::vector<int>& family, HarmonicTag tag) {
  const Eigen::MatrixXd U = weighted_snapshots(ds, medium, family);
  const Grid2& g = medium.c.grid;
  Eigen::VectorXd a(static_cast<Eigen::Index>(g.size()));
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      const double c = medium.c.at(i, j);
      const double w =
          trap_w(i, g.nx) * trap_w(j, g.ny) * g.dx * g.dy / (c * c);
      a(static_cast<Eigen::Index>(j) * g.nx + i) =
          std::sqrt(w) * interior_a(tag, g.x(i), g.y(j));
    }
  return U.transpose() * a;
}

TikhonovResult tikhonov_solve(const GramMatrix& G, const RhsVector& B,
                              const TikhonovOptions& opt) {
  if (G.G.rows() != B.b.size())
    throw std::invalid_argument("system and right-hand side sizes differ");
  TikhonovResult res;
  if (G.G.rows() == 0) {
    res.alpha = std::max(opt.alpha, 0.0);
    return res;
  }
  const double bnorm = B.b.norm();

  auto solve_at = [&](double alpha, Eigen::VectorXd& c) -> bool {
    Eigen::MatrixXd A = G.G;
    A.diagonal().array() += alpha;
    Eigen::LLT<Eigen::MatrixXd> llt(A);
    if (llt.info() != Eigen::Success) return false;
    c = llt.solve(B.b);
    return true;
  };
  auto residual_of = [&](const Eigen::VectorXd& c) {
    return bnorm > 0 ? (G.G * c - B.b).norm() / bnorm : 0.0;
  };

  double alpha = opt.alpha;
  Eigen::VectorXd c;
  if (opt.residual_target > 0) {
    // Residual grows with α; bisect log α for the loosest α under target.
    const double scale =
        std::max({G.lambda_max, G.G.diagonal().cwiseAbs().maxCoeff(), 1e-300});
    double lo = 1e-15 * scale, hi = 10.0 * scale;
    Eigen::VectorXd clo;
    if (!solve_at(lo, clo) || residual_of(clo) > opt.residual_target)
      throw std::runtime_error(
          "residual target unreachable; loosen it or drop regularization");
    for (int it = 0; it < 200; ++it) {
      const double mid = std::sqrt(lo * hi);
      Eigen::VectorXd cm;
      if (solve_at(mid, cm) && residual_of(cm) <= opt.residual_target) {
        lo = mid;
        clo = cm;
      } else {
        hi = mid;
      }
      if (hi / lo < 1.0 + 1e-6) break;
    }
    alpha = lo;
    c = clo;
  } else {
    if (alpha < 0) throw std::invalid_argument("negative regularization");
    if (!solve_at(alpha, c))
      throw std::runtime_error(
          "system factorization failed; increase the regularization alpha");
  }

  res.c = c;
  res.alpha = alpha;
  res.residual = residual_of(c);
  res.energy = c.dot(G.G * c);
  return res;
}

ControlFunction connecting_apply(const TraceDataset& ds, int k) {
  const DatasetManifest& man = ds.man;
  if (k < 0 || k >= man.n_controls)
    throw std::invalid_argument("control index out of range");
  const TraceRecord& q = ds.resp_integrated[k];
  const int M = man.steps_T;
  if (q.n_t != 2 * M + 1)
    throw std::runtime_error("trace layout disagrees with the manifest");
  int c0, cn;
  sigma_cols(man, c0, cn);

  ControlFunction out;
  out.control_id = k;
  out.gamma0 = man.strip_gamma0() + c0 * man.grid.dx;
  out.dgamma = man.grid.dx;
  out.n_gamma = cn;
  out.dt = man.dt;
  out.n_t = M + 1;
  out.v.assign(static_cast<std::size_t>(cn) * (M + 1), 0.0);
  for (int ig = 0; ig < cn; ++ig)
    for (int it = 0; it <= M; ++it)
      out.at(ig, it) = 0.5 * (q.at(c0 + ig, it) - q.at(c0 + ig, 2 * M - it));
  return out;
}

ImageField smooth_image(const ImageField& img, double sigma_gamma,
                        double sigma_t) {
  ImageField out = img;
  gaussian_smooth_axis(out.a, sigma_t, img.dxi, 0);       // along ξ rows
  gaussian_smooth_axis(out.a, sigma_gamma, img.dgamma, 1);  // along γ
  out.sigma_gamma = std::hypot(img.sigma_gamma, sigma_gamma);
  out.sigma_t = std::hypot(img.sigma_t, sigma_t);
  return out;
}

SemiGeodesicMap recover_map(const ImageField& img_unit, const ImageField& img_x1,
                            const ImageField& img_x2, const MapOptions& opt) {
  const auto layout_eq = [&](const ImageField& o) {
    return o.n_gamma == img_unit.n_gamma && o.n_rows == img_unit.n_rows &&
           std::abs(o.gamma0 - img_unit.gamma0) < 1e-12 &&
           std::abs(o.dgamma - img_unit.dgamma) < 1e-12 &&
           std::abs(o.dxi - img_unit.dxi) < 1e-12;
  };
  if (!layout_eq(img_x1) || !layout_eq(img_x2))
    throw std::invalid_argument("image grids disagree");

  std::vector<double> mag;
  mag.reserve(static_cast<std::size_t>(img_unit.a.size()));
  for (Eigen::Index i = 0; i < img_unit.a.size(); ++i)
    if (std::isfinite(img_unit.a.data()[i]))
      mag.push_back(std::abs(img_unit.a.data()[i]));
  double median = 0.0;
  if (!mag.empty()) {
    std::nth_element(mag.begin(), mag.begin() + mag.size() / 2, mag.end());
    median = mag[mag.size() / 2];
  }
  // A zero floor would let exact zeros through into the ratios.
  const double floor = std::max(opt.floor_rel * median, 1e-300);

  SemiGeodesicMap map;
  map.gamma0 = img_unit.gamma0;
  map.dgamma = img_unit.dgamma;
  map.n_gamma = img_unit.n_gamma;
  map.dxi = img_unit.dxi;
  map.xi0 = img_unit.xi0;
  map.n_rows = img_unit.n_rows;
  map.floor_used = floor;
  map.x1.setConstant(map.n_rows, map.n_gamma, kNaN);
  map.x2.setConstant(map.n_rows, map.n_gamma, kNaN);
  map.valid.setZero(map.n_rows, map.n_gamma);

  std::size_t invalid = 0;
  for (int l = 0; l < map.n_rows; ++l)
    for (int ig = 0; ig < map.n_gamma; ++ig) {
      const double p0 = img_unit.a(l, ig);
      if (std::isfinite(p0) && std::abs(p0) >= floor) {
        map.x1(l, ig) = img_x1.a(l, ig) / p0;
        map.x2(l, ig) = img_x2.a(l, ig) / p0;
        map.valid(l, ig) = 1;
      } else {
        ++invalid;
      }
    }
  const std::size_t total =
      static_cast<std::size_t>(map.n_rows) * map.n_gamma;
  if (total > 0 &&
      static_cast<double>(invalid) > opt.max_invalid_fraction * total)
    throw std::runtime_error(
        "unit image below its floor on too much of the grid");
  return map;
}

SpeedMap recover_speed(const SemiGeodesicMap& map, const Grid2& cart_grid,
                       const SpeedOptions& opt) {
  SpeedMap out;
  out.map = map;
  out.c_ray.setConstant(map.n_rows, map.n_gamma, kNaN);

  const double dxi = map.dxi;
  const int l_min = std::min(std::max(opt.jump_guard_rows, 0), map.n_rows);
  for (int ig = 0; ig < map.n_gamma; ++ig) {
    int l = l_min;
    while (l < map.n_rows) {
      if (!map.valid(l, ig)) {
        ++l;
        continue;
      }
      int e = l;
      while (e + 1 < map.n_rows && map.valid(e + 1, ig)) ++e;
      if (e > l) {  // runs of ≥ 2 rows support a one-sided stencil
        for (int r = l; r <= e; ++r) {
          int ra = r > l ? r - 1 : r;
          int rb = r < e ? r + 1 : r;
          const double d1 = (map.x1(rb, ig) - map.x1(ra, ig)) / ((rb - ra) * dxi);
          const double d2 = (map.x2(rb, ig) - map.x2(ra, ig)) / ((rb - ra) * dxi);
          out.c_ray(r, ig) = std::hypot(d1, d2);
        }
      }
      l = e + 1;
    }
  }

  // Deterministic Gaussian splat of (position, speed) samples onto the
  // Cartesian grid; cells far from every sample stay empty.
  out.c_cart = Field2(cart_grid, kNaN);
  out.cart_valid = Field2(cart_grid, 0.0);
  Field2 wsum(cart_grid, 0.0), csum(cart_grid, 0.0);
  const double h = cart_grid.dx;
  const double sig = 0.5 * opt.splat_radius_cells * h;
  const int reach = static_cast<int>(std::ceil(opt.splat_radius_cells)) + 1;

  for (int ig = 0; ig < map.n_gamma; ++ig)
    for (int l = 0; l < map.n_rows; ++l) {
      const double c = out.c_ray(l, ig);
      if (!std::isfinite(c)) continue;
      const double x = map.x1(l, ig), y = map.x2(l, ig);
      const int ic = cart_grid.nearest_i(x), jc = cart_grid.nearest_j(y);
      for (int j = std::max(0, jc - reach);
           j <= std::min(cart_grid.ny - 1, jc + reach); ++j)
        for (int i = std::max(0, ic - reach);
             i <= std::min(cart_grid.nx - 1, ic + reach); ++i) {
          const double dx = cart_grid.x(i) - x, dy = cart_grid.y(j) - y;
          const double w = std::exp(-0.5 * (dx * dx + dy * dy) / (sig * sig));
          wsum.at(i, j) += w;
          csum.at(i, j) += w * c;
        }
    }

  const double w_floor = std::exp(-2.0);
  bool any = false;
  for (int j = 0; j < cart_grid.ny; ++j)
    for (int i = 0; i < cart_grid.nx; ++i)
      if (wsum.at(i, j) >= w_floor) {
        out.c_cart.at(i, j) = csum.at(i, j) / wsum.at(i, j);
        out.cart_valid.at(i, j) = 1.0;
        any = true;
      }
  if (!any && map.n_rows * map.n_gamma > 0)
    throw std::runtime_error(
        "valid map runs too short along xi to differentiate anywhere");
  return out;
}

ReconstructionResult reconstruct(const TraceDataset& ds,
                                 const ReconstructOptions& opt,
                                 const MediumField* pseudo_medium) {
  const DatasetManifest& man = ds.man;
  const ControlBasis basis = basis_from_manifest(man);
  const int n_t = man.basis.n_t;
  const int n = basis.n();
  const int M = man.steps_T;
  const int n_sub = man.n_sub;
  const double Delta = man.Delta();

  if (opt.pseudo && pseudo_medium == nullptr)
    throw std::invalid_argument(
        "interior-snapshot mode needs the medium for the c^-2 weight");

  const std::vector<int> full = basis.delayed_family(n_t);

  // Full-family system matrix; every delayed family is a trailing
  // principal block of it (delayed controls are basis controls).
  Eigen::MatrixXd raw_full;
  if (opt.pseudo)
    raw_full = interior_gram(ds, *pseudo_medium, full, opt.n_threads);
  else
    raw_full = assemble_gram_raw(ds, basis, full, opt.n_threads);
  if (!raw_full.allFinite())
    throw std::runtime_error("pairing quadrature produced non-finite entries");
  const Eigen::MatrixXd G_full = 0.5 * (raw_full + raw_full.transpose());

  const HarmonicTag tags[3] = {HarmonicTag::unit, HarmonicTag::x1,
                               HarmonicTag::x2};
  Eigen::VectorXd b_full[3];
  for (int t = 0; t < 3; ++t)
    b_full[t] = opt.pseudo
                    ? interior_rhs(ds, *pseudo_medium, full, tags[t])
                    : assemble_rhs_raw(ds, basis, full, tags[t]);

  // Per-delay solves.  Family at l·Δ = trailing n_γ·l block.
  ReconstructionResult res;
  res.table.resize(static_cast<std::size_t>(n_t) + 1);
  std::vector<std::array<Eigen::VectorXd, 3>> coefs(
      static_cast<std::size_t>(n_t) + 1);
  for (int l = 0; l <= n_t; ++l) {
    const int nf = man.basis.n_gamma * l;
    const int off = n - nf;
    XiRow& row = res.table[static_cast<std::size_t>(l)];
    row.xi = l * Delta;
    row.order = nf;
    if (nf == 0) continue;

    GramMatrix Gm;
    Gm.xi = row.xi;
    Gm.family = basis.delayed_family(l);
    Gm.G = G_full.block(off, off, nf, nf);
    Gm.sym_defect = frob_sym_defect(raw_full.block(off, off, nf, nf));
    spectral_stats(Gm.G, Gm.lambda_min, Gm.lambda_max, Gm.cond);
    if (Gm.lambda_max > 0 && Gm.lambda_min < -opt.psd_tol * Gm.lambda_max)
      throw std::runtime_error(
          "system matrix lost positive semidefiniteness at delay " +
          std::to_string(row.xi));
    row.cond = Gm.cond;
    row.lambda_min = Gm.lambda_min;
    row.lambda_max = Gm.lambda_max;
    row.sym_defect = Gm.sym_defect;
    {
      Eigen::VectorXd dinv = Gm.G.diagonal().cwiseMax(0.0).cwiseSqrt();
      for (int i = 0; i < dinv.size(); ++i)
        dinv(i) = dinv(i) > 0 ? 1.0 / dinv(i) : 0.0;
      const Eigen::MatrixXd K = dinv.asDiagonal() * Gm.G * dinv.asDiagonal();
      double el, eu;
      spectral_stats(0.5 * (K + K.transpose()), el, eu, row.cond_eq);
    }

    for (int t = 0; t < 3; ++t) {
      RhsVector B;
      B.xi = row.xi;
      B.tag = tags[t];
      B.family = Gm.family;
      B.b = b_full[t].segment(off, nf);
      const TikhonovResult sol = tikhonov_solve(Gm, B, opt.tikhonov);
      row.residual[t] = sol.residual;
      row.energy[t] = sol.energy;
      row.proj_norm2[t] = sol.c.dot(B.b);
      row.alpha = std::max(row.alpha, sol.alpha);
      coefs[static_cast<std::size_t>(l)][t] = sol.c;
    }
    row.cond_solve = (row.lambda_max + row.alpha) /
                     (std::max(row.lambda_min, 0.0) + row.alpha);
  }

  // Folded responses on σ × [0, T], one row per control.
  int sc0, scn;
  sigma_cols(man, sc0, scn);
  const int P = scn * (M + 1);
  Eigen::MatrixXd theta(n, P);
  parallel_for(n, opt.n_threads, [&](int k) {
    const TraceRecord& q = ds.resp_integrated[k];
    for (int ig = 0; ig < scn; ++ig)
      for (int it = 0; it <= M; ++it)
        theta(k, ig * (M + 1) + it) =
            0.5 * (q.at(sc0 + ig, it) - q.at(sc0 + ig, 2 * M - it));
  });

  // Amplitude rows: difference of the full-family series and the
  // delayed-family series, smoothed, then averaged over the step window
  // just before t = T − ξ.
  const double T = man.T;
  const double ramp_start = (1.0 - opt.imaging.ramp_fraction) * T;
  for (int t = 0; t < 3; ++t) {
    ImageField& img = res.img[t];
    img.tag = tags[t];
    img.gamma0 = man.strip_gamma0() + sc0 * man.grid.dx;
    img.dgamma = man.grid.dx;
    img.n_gamma = scn;
    img.dxi = Delta;
    // The window mean is centered (Δ+dt)/2 below the jump time, so row l
    // probes that much beyond ξ = l·Δ; the label says where it looked.
    img.xi0 = 0.5 * (Delta + man.dt);
    img.n_rows = n_t;
    img.a.setZero(n_t, scn);
    img.sigma_gamma = opt.imaging.sigma_gamma;
    img.sigma_gamma_end = opt.imaging.sigma_gamma_end < 0
                              ? opt.imaging.sigma_gamma
                              : opt.imaging.sigma_gamma_end;
    img.sigma_t = opt.imaging.sigma_t;

    for (int l = 0; l < n_t; ++l) {
      Eigen::VectorXd w = Eigen::VectorXd::Zero(n);
      const Eigen::VectorXd& cT = coefs[static_cast<std::size_t>(n_t)][t];
      for (int k = 0; k < n; ++k) w(k) = cT(k);
      const int nf = man.basis.n_gamma * l;
      const int off = n - nf;
      if (nf > 0) {
        const Eigen::VectorXd& cl = coefs[static_cast<std::size_t>(l)][t];
        for (int r = 0; r < nf; ++r) w(off + r) -= cl(r);
      }

      Eigen::VectorXd D = theta.transpose() * w;
      Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                               Eigen::RowMajor>>
          Dm(D.data(), scn, M + 1);

      const double xi = l * Delta;
      double sg = opt.imaging.sigma_gamma;
      if (opt.imaging.sigma_gamma_end >= 0 && xi > ramp_start && T > ramp_start)
        sg += (opt.imaging.sigma_gamma_end - opt.imaging.sigma_gamma) *
              (xi - ramp_start) / (T - ramp_start);

      // Row-major map: rows are γ, columns are t.
      Eigen::MatrixXd Ds = Dm;
      gaussian_smooth_axis(Ds, sg, man.grid.dx, 0);      // along γ
      gaussian_smooth_axis(Ds, opt.imaging.sigma_t, man.dt, 1);  // along t

      const int it0 = M - (l + 1) * n_sub;
      double inv = 1.0 / n_sub;
      for (int ig = 0; ig < scn; ++ig) {
        double s = 0.0;
        for (int q = 0; q < n_sub; ++q) s += Ds(ig, it0 + q);
        img.a(l, ig) = s * inv;
      }
    }
  }

  res.map = recover_map(res.img[0], res.img[1], res.img[2], opt.map);
  res.speed = recover_speed(res.map, man.grid, opt.speed);
  return res;
}

Field2 speed_error_cartesian(const SpeedMap& speed, const MediumField& medium) {
  const Grid2& g = speed.c_cart.grid;
  Field2 err(g, kNaN);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      const double c = speed.c_cart.at(i, j);
      if (!std::isfinite(c)) continue;
      const double ct = medium.c.interp(g.x(i), g.y(j));
      err.at(i, j) = std::abs(c - ct) / ct;
    }
  return err;
}

Eigen::MatrixXd speed_error_ray(const SpeedMap& speed, const MediumField& medium) {
  const SemiGeodesicMap& map = speed.map;
  Eigen::MatrixXd err;
  err.setConstant(map.n_rows, map.n_gamma, kNaN);
  for (int l = 0; l < map.n_rows; ++l)
    for (int ig = 0; ig < map.n_gamma; ++ig) {
      const double c = speed.c_ray(l, ig);
      if (!std::isfinite(c)) continue;
      const double ct = medium.c.interp(map.x1(l, ig), map.x2(l, ig));
      err(l, ig) = std::abs(c - ct) / ct;
    }
  return err;
}

}  // namespace bcm
