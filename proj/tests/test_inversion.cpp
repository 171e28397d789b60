#include <algorithm>
#include <cmath>
#include <vector>

#include "bcm/dataset.hpp"
#include "bcm/inversion.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace bcm;

namespace {

MediumField tiny_medium(ScenarioSpec::Kind kind = ScenarioSpec::Kind::homogeneous,
                        double h = 0.1) {
  DiscretizationSpec disc;
  disc.h = h;
  return make_scenario(scenario_defaults(kind), disc);
}

struct TinyRun {
  MediumField medium;
  ControlBasis basis;
  TraceDataset ds;
};

TinyRun tiny_run(ScenarioSpec::Kind kind, int n_gamma, int n_t, double h,
                 bool snapshots) {
  TinyRun r{tiny_medium(kind, h), {}, {}};
  BasisSpec spec;
  spec.n_gamma = n_gamma;
  spec.n_t = n_t;
  r.basis = make_basis(spec, r.medium.T, r.medium.L);
  BuildOptions opt;
  opt.with_snapshots = snapshots;
  r.ds = build_dataset(r.medium, r.basis, default_xi_grid(r.basis), opt);
  return r;
}

// One shared dataset per configuration; building is the slow part.
const TinyRun& flat44() {
  static TinyRun r = tiny_run(ScenarioSpec::Kind::homogeneous, 4, 4, 0.1, true);
  return r;
}

ImageField linear_images(int n_rows, int n_gamma, int which) {
  ImageField img;
  img.gamma0 = -0.75;
  img.dgamma = 1.5 / (n_gamma - 1);
  img.n_gamma = n_gamma;
  img.dxi = 0.1;
  img.xi0 = 0.05;
  img.n_rows = n_rows;
  img.a.resize(n_rows, n_gamma);
  for (int l = 0; l < n_rows; ++l)
    for (int ig = 0; ig < n_gamma; ++ig) {
      const double g = img.gamma(ig), xi = img.xi(l);
      img.a(l, ig) = which == 0 ? 1.0 : (which == 1 ? g : -xi);
    }
  return img;
}

}  // namespace

TEST_CASE("delayed-family systems are principal blocks of the full one") {
  const TinyRun& r = flat44();
  const double Delta = r.basis.Delta;

  GramMatrix full = gram_matrix(r.ds, 4 * Delta);
  REQUIRE(full.G.rows() == 16);
  CHECK(full.sym_defect < 1e-10);
  // Numerically positive semidefinite.
  CHECK(full.lambda_min >= -1e-8 * full.lambda_max);

  GramMatrix part = gram_matrix(r.ds, 2 * Delta);
  REQUIRE(part.G.rows() == 8);
  const Eigen::MatrixXd block = full.G.bottomRightCorner(8, 8);
  CHECK((part.G - block).cwiseAbs().maxCoeff() == 0.0);  // same arithmetic

  RhsVector bful = rhs_vector(r.ds, 4 * Delta, HarmonicTag::unit);
  RhsVector bprt = rhs_vector(r.ds, 2 * Delta, HarmonicTag::unit);
  CHECK((bprt.b - bful.b.tail(8)).cwiseAbs().maxCoeff() == 0.0);

  CHECK_THROWS_AS(gram_matrix(r.ds, 0.3 * Delta), std::invalid_argument);
}

TEST_CASE("boundary-data systems match the interior oracle") {
  const TinyRun& r = flat44();
  const double T = r.medium.T;

  GramMatrix G = gram_matrix(r.ds, T);
  Eigen::MatrixXd Gi = interior_gram(r.ds, r.medium, G.family);
  const double gram_err = (G.G - Gi).norm() / Gi.norm();
  CHECK(gram_err < 0.10);  // coarse grid; acceptance tightens this to 2%

  for (auto tag : {HarmonicTag::unit, HarmonicTag::x1, HarmonicTag::x2}) {
    RhsVector b = rhs_vector(r.ds, T, tag);
    Eigen::VectorXd bi = interior_rhs(r.ds, r.medium, b.family, tag);
    const double scale = bi.norm();
    REQUIRE(scale > 0);
    CHECK((b.b - bi).norm() / scale < 0.10);
  }
}

TEST_CASE("the depth-weight entries reduce to a separable closed form") {
  // With the boundary pair (0, 1) the response drops out of the pairing:
  // the entries are minus the product of a spatial and a temporal moment
  // of the control itself, on exactly the grids the assembly used.
  const TinyRun& r = flat44();
  const DatasetManifest& man = r.ds.man;
  const ControlBasis& basis = r.basis;
  const double T = r.medium.T;

  RhsVector b = rhs_vector(r.ds, T, HarmonicTag::x2);

  const double h = man.grid.dx;
  const double shw = basis.support_half_width;
  int gi0 = 0;
  while (gi0 < man.grid.nx && man.grid.x(gi0) < -shw - 0.5 * h) ++gi0;
  int gi1 = man.grid.nx - 1;
  while (gi1 >= 0 && man.grid.x(gi1) > shw + 0.5 * h) --gi1;
  const int cn = gi1 - gi0 + 1;

  for (int row = 0; row < static_cast<int>(b.family.size()); ++row) {
    const int k = b.family[row];
    double phi = 0.0;
    for (int ig = 0; ig < cn; ++ig)
      phi += basis.eval_spatial(basis.spatial_index(k),
                                man.grid.x(gi0 + ig)) *
             trap_w(ig, cn) * h;
    double psi = 0.0;
    for (int it = 0; it <= man.steps_T; ++it) {
      const double t = it * man.dt;
      psi += (T - t) * basis.eval_temporal(basis.temporal_index(k), t) *
             trap_w(it, man.steps_T + 1) * man.dt;
    }
    CHECK(b.b(row) == doctest::Approx(-phi * psi).epsilon(1e-12));
  }
}

TEST_CASE("interior systems demand snapshots and the very same medium") {
  const TinyRun& r = flat44();
  std::vector<int> family{0, 1};

  MediumField other = tiny_medium(ScenarioSpec::Kind::test1, 0.1);
  CHECK_THROWS_AS(interior_gram(r.ds, other, family), std::invalid_argument);

  TinyRun bare = tiny_run(ScenarioSpec::Kind::homogeneous, 2, 2, 0.1, false);
  CHECK_THROWS_AS(interior_gram(bare.ds, bare.medium, family),
                  std::invalid_argument);
}

TEST_CASE("tikhonov solve: exact shrinkage on the identity system") {
  GramMatrix G;
  G.G = Eigen::MatrixXd::Identity(5, 5);
  G.family = {0, 1, 2, 3, 4};
  RhsVector B;
  B.b = Eigen::VectorXd::LinSpaced(5, 1.0, 5.0);
  B.family = G.family;

  TikhonovOptions opt;
  opt.alpha = 0.25;
  TikhonovResult res = tikhonov_solve(G, B, opt);
  for (int i = 0; i < 5; ++i)
    CHECK(res.c(i) == doctest::Approx(B.b(i) / 1.25).epsilon(1e-14));
  CHECK(res.residual == doctest::Approx(0.25 / 1.25).epsilon(1e-12));
  CHECK(res.energy == doctest::Approx(res.c.squaredNorm()).epsilon(1e-12));

  // Heavy damping pushes the solution toward zero.
  opt.alpha = 1e8;
  CHECK(tikhonov_solve(G, B, opt).c.norm() < 1e-6);
}

TEST_CASE("tikhonov residual search lands at or under the target") {
  GramMatrix G;
  Eigen::VectorXd diag(4);
  diag << 1.0, 0.1, 0.01, 0.001;
  G.G = diag.asDiagonal();
  G.family = {0, 1, 2, 3};
  RhsVector B;
  B.b = Eigen::VectorXd::Ones(4);
  B.family = G.family;

  TikhonovOptions opt;
  opt.alpha = 1.0;  // starting guess, far too stiff for the target
  opt.residual_target = 0.05;
  TikhonovResult res = tikhonov_solve(G, B, opt);
  CHECK(res.residual <= 0.05 + 1e-9);
  CHECK(res.alpha < 1.0);
  CHECK(res.alpha > 0.0);
}

TEST_CASE("image smoothing: identity at zero width, mass-preserving else") {
  ImageField img = linear_images(6, 9, 1);
  ImageField same = smooth_image(img, 0.0, 0.0);
  CHECK((same.a - img.a).cwiseAbs().maxCoeff() == 0.0);

  ImageField flat = linear_images(6, 9, 0);  // all ones
  ImageField sm = smooth_image(flat, 0.3, 0.2);
  CHECK((sm.a.array() - 1.0).abs().maxCoeff() < 1e-12);
  CHECK(sm.sigma_gamma == 0.3);
  CHECK(sm.sigma_t == 0.2);

  // Linear trends pass through untouched, even at the edges: the kernel
  // is symmetric and out-of-range samples extrapolate the boundary ramp.
  ImageField ramp = linear_images(6, 9, 1);
  ImageField rs = smooth_image(ramp, 2 * ramp.dgamma, ramp.dxi);
  CHECK((rs.a - ramp.a).cwiseAbs().maxCoeff() < 1e-12);

  // A centered spike spreads symmetrically along gamma.
  ImageField spike = linear_images(3, 9, 0);
  spike.a.setZero();
  spike.a(1, 4) = 1.0;
  ImageField ss = smooth_image(spike, 2 * spike.dgamma, 0.0);
  CHECK(ss.a(1, 3) == doctest::Approx(ss.a(1, 5)).epsilon(1e-12));
  CHECK(ss.a(1, 4) > ss.a(1, 3));

  // Repeated smoothing accumulates widths in quadrature.
  ImageField twice = smooth_image(ss, 2 * spike.dgamma, 0.0);
  CHECK(twice.sigma_gamma ==
        doctest::Approx(std::sqrt(2.0) * 2 * spike.dgamma).epsilon(1e-12));
}

TEST_CASE("amplitude ratios give the map back and respect the floor") {
  ImageField u = linear_images(6, 9, 0);
  ImageField x1 = linear_images(6, 9, 1);
  ImageField x2 = linear_images(6, 9, 2);
  u.a *= 0.7;  // common amplitude factor cancels in the ratio
  x1.a *= 0.7;
  x2.a *= 0.7;

  MapOptions opt;
  SemiGeodesicMap map = recover_map(u, x1, x2, opt);
  for (int l = 0; l < map.n_rows; ++l)
    for (int ig = 0; ig < map.n_gamma; ++ig) {
      REQUIRE(map.valid(l, ig) == 1);
      CHECK(map.x1(l, ig) == doctest::Approx(map.gamma(ig)).epsilon(1e-12));
      CHECK(map.x2(l, ig) == doctest::Approx(-map.xi(l)).epsilon(1e-12));
    }

  // Cells where the unit image collapses are marked, not divided through.
  u.a(3, 4) = 1e-8;
  SemiGeodesicMap holey = recover_map(u, x1, x2, opt);
  CHECK(holey.valid(3, 4) == 0);
  CHECK(std::isnan(holey.x1(3, 4)));

  // Too many collapsed cells abort the map.
  u.a.topRows(4).setZero();
  CHECK_THROWS_AS(recover_map(u, x1, x2, opt), std::runtime_error);
}

TEST_CASE("speed from the map: exact on straight rays, guard rows skipped") {
  ImageField u = linear_images(8, 9, 0);
  ImageField x1 = linear_images(8, 9, 1);
  ImageField x2 = linear_images(8, 9, 2);
  SemiGeodesicMap map = recover_map(u, x1, x2, {});

  Grid2 cart;
  cart.x0 = -1.0;
  cart.y0 = -1.0;
  cart.dx = cart.dy = 0.05;
  cart.nx = 41;
  cart.ny = 21;

  SpeedOptions sopt;
  sopt.jump_guard_rows = 2;
  SpeedMap sp = recover_speed(map, cart, sopt);
  for (int ig = 0; ig < map.n_gamma; ++ig) {
    CHECK(std::isnan(sp.c_ray(0, ig)));  // guarded rows carry no stencil
    CHECK(std::isnan(sp.c_ray(1, ig)));
    for (int l = 2; l < map.n_rows; ++l)
      CHECK(sp.c_ray(l, ig) == doctest::Approx(1.0).epsilon(1e-12));
  }

  // The resampled grid reads 1 where covered.
  int covered = 0;
  for (int j = 0; j < cart.ny; ++j)
    for (int i = 0; i < cart.nx; ++i)
      if (sp.cart_valid.at(i, j) == 1.0) {
        CHECK(sp.c_cart.at(i, j) == doctest::Approx(1.0).epsilon(1e-9));
        ++covered;
      }
  CHECK(covered > 50);

  // With no guard, the top rows are differentiated too.
  sopt.jump_guard_rows = 0;
  SpeedMap sp0 = recover_speed(map, cart, sopt);
  CHECK(sp0.c_ray(0, 4) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("full chain on the flat medium: map, speed, and diagnostics") {
  const TinyRun& r = flat44();
  ReconstructOptions opt;
  opt.tikhonov.alpha = 1e-8;
  opt.imaging.sigma_gamma = 0.125;
  opt.imaging.sigma_t = 0.5 * r.basis.Delta;
  ReconstructionResult res = reconstruct(r.ds, opt);

  REQUIRE(res.table.size() == 5);  // delays 0..n_t, the first one empty
  CHECK(res.table[0].order == 0);
  double prev[3] = {0, 0, 0};
  for (std::size_t q = 1; q < res.table.size(); ++q) {
    const XiRow& row = res.table[q];
    CHECK(row.order == static_cast<int>(4 * q));
    CHECK(row.cond >= 1.0);
    CHECK(row.cond_solve >= 1.0);
    for (int tg = 0; tg < 3; ++tg) {
      CHECK(row.energy[tg] >= -1e-10);
      // Projections grow with the family: earlier values stay below
      // later ones up to solver-level noise.
      CHECK(row.proj_norm2[tg] >= prev[tg] - 1e-6 * std::abs(prev[tg]));
      prev[tg] = row.proj_norm2[tg];
    }
  }

  // Interior of the recovered speed grid sits near 1.  The basis here is
  // deliberately coarse (4 x 4), so this is a smoke-level bound; the
  // acceptance run does the tight one at production resolution.
  const Field2& c = res.speed.c_cart;
  std::vector<double> vals;
  for (int j = 0; j < c.grid.ny; ++j)
    for (int i = 0; i < c.grid.nx; ++i) {
      if (std::abs(c.grid.x(i)) > 0.5) continue;
      const double y = c.grid.y(j);
      if (y > -0.3 || y < -0.9) continue;
      if (res.speed.cart_valid.at(i, j) == 1.0) vals.push_back(c.at(i, j));
    }
  REQUIRE(vals.size() > 10);
  std::nth_element(vals.begin(), vals.begin() + vals.size() / 2, vals.end());
  CHECK(vals[vals.size() / 2] == doctest::Approx(1.0).epsilon(0.2));

  // Graph-style and Cartesian error fields agree about where values live.
  Field2 err = speed_error_cartesian(res.speed, r.medium);
  int finite = 0;
  for (double v : err.v)
    if (std::isfinite(v)) ++finite;
  CHECK(finite > 100);

  Eigen::MatrixXd gerr = speed_error_ray(res.speed, r.medium);
  CHECK(gerr.rows() == res.map.n_rows);
}

TEST_CASE("pseudo mode runs the interior systems through the same chain") {
  const TinyRun& r = flat44();
  ReconstructOptions opt;
  opt.pseudo = true;
  opt.tikhonov.alpha = 1e-8;
  opt.imaging.sigma_gamma = 0.125;
  opt.imaging.sigma_t = 0.5 * r.basis.Delta;
  ReconstructionResult res = reconstruct(r.ds, opt, &r.medium);
  REQUIRE(res.table.size() >= 3);
  for (const XiRow& row : res.table)
    for (int tg = 0; tg < 3; ++tg) CHECK(std::isfinite(row.residual[tg]));

  // Pseudo mode without the medium is a contract violation.
  CHECK_THROWS_AS(reconstruct(r.ds, opt, nullptr), std::invalid_argument);
}
