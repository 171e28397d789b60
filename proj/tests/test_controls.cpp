#include <cmath>

#include "bcm/controls.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace bcm;
using bcmtest::wobble;

TEST_CASE("temporal pulse: support, near-triangle shape, admissible start") {
  const double Delta = 0.0625;
  const double d = Delta / 64;

  CHECK(theta_eval(-0.01, Delta, d) == doctest::Approx(0.0).epsilon(1e-12));
  // As d -> 0 the pulse approaches the unit triangle on [0, 2Delta].
  CHECK(theta_eval(Delta, Delta, d) == doctest::Approx(1.0).epsilon(1e-2));
  CHECK(theta_eval(0.5 * Delta, Delta, d) == doctest::Approx(0.5).epsilon(1e-2));
  // Exponentially small past the support.
  CHECK(std::abs(theta_eval(2 * Delta + 20 * d, Delta, d)) < 1e-8);

  // The shifted basis pulse is admissible: essentially zero at t = 0.
  BasisSpec spec;
  spec.n_t = 16;
  spec.n_gamma = 4;
  ControlBasis basis = make_basis(spec, 1.0, 1.0);
  for (int m = 0; m < spec.n_t; ++m)
    CHECK(std::abs(basis.eval_temporal(m, 0.0)) < 1e-6);
}

TEST_CASE("spatial profiles vanish at the strip edge, both families") {
  BasisSpec spec;
  spec.n_gamma = 8;
  spec.n_t = 4;

  for (auto fam : {SpatialFamily::trig_cutoff, SpatialFamily::tent}) {
    spec.family = fam;
    ControlBasis basis = make_basis(spec, 1.0, 1.0);
    const double edge = basis.support_half_width;
    for (int l = 0; l < spec.n_gamma; ++l) {
      CHECK(std::abs(basis.eval_spatial(l, edge)) < 1e-8);
      CHECK(std::abs(basis.eval_spatial(l, -edge)) < 1e-8);
      // And a value of honest size somewhere inside.
      double peak = 0.0;
      for (int q = -50; q <= 50; ++q)
        peak = std::max(peak, std::abs(basis.eval_spatial(l, q * edge / 50)));
      CHECK(peak > 0.3);
    }
  }
}

TEST_CASE("basis indexing splits into spatial and temporal factors") {
  BasisSpec spec;
  spec.n_gamma = 5;
  spec.n_t = 3;
  ControlBasis basis = make_basis(spec, 1.0, 1.0);
  CHECK(basis.n() == 15);
  for (int k = 0; k < basis.n(); ++k) {
    const int l = basis.spatial_index(k);
    const int m = basis.temporal_index(k);
    CHECK(l + m * spec.n_gamma == k);
    CHECK(basis.eval(k, 0.37, 0.52) ==
          doctest::Approx(basis.eval_spatial(l, 0.37) *
                          basis.eval_temporal(m, 0.52))
              .epsilon(1e-14));
  }
}

TEST_CASE("delayed families are trailing temporal slices of the basis") {
  BasisSpec spec;
  spec.n_gamma = 4;
  spec.n_t = 8;
  ControlBasis basis = make_basis(spec, 1.0, 1.0);

  CHECK(basis.delayed_family(0).empty());
  for (int l = 1; l <= spec.n_t; ++l) {
    auto fam = basis.delayed_family(l);
    REQUIRE(static_cast<int>(fam.size()) == spec.n_gamma * l);
    for (int k : fam) CHECK(basis.temporal_index(k) >= spec.n_t - l);
    // Ordered and distinct so delayed systems are principal blocks.
    for (std::size_t i = 1; i < fam.size(); ++i) CHECK(fam[i] > fam[i - 1]);
  }
  CHECK_THROWS_AS(basis.delayed_family(spec.n_t + 1), std::invalid_argument);
}

namespace {

ControlFunction noise_control(int n_gamma, int n_t, double dt) {
  ControlFunction f;
  f.gamma0 = -1.0;
  f.dgamma = 2.0 / (n_gamma - 1);
  f.n_gamma = n_gamma;
  f.dt = dt;
  f.n_t = n_t;
  f.v.resize(static_cast<std::size_t>(n_gamma) * n_t);
  for (std::size_t i = 0; i < f.v.size(); ++i) f.v[i] = wobble(i);
  return f;
}

}  // namespace

TEST_CASE("odd extension and fold are exact adjoints on aligned grids") {
  const int n_t = 33;  // samples on [0, T]; doubled grid has 65
  const double T = 1.0;
  const double dt = T / (n_t - 1);

  ControlFunction f = noise_control(5, n_t, dt);
  for (int ig = 0; ig < f.n_gamma; ++ig) f.at(ig, n_t - 1) = 0.0;  // f(T) = 0

  ControlFunction Sf = odd_extend(f);
  REQUIRE(Sf.n_t == 2 * n_t - 1);
  ControlFunction g = noise_control(5, Sf.n_t, dt);

  // <S f, g> on [0, 2T] equals <f, fold g> on [0, T].
  const double lhs = control_inner(Sf, g);
  const double rhs = control_inner(f, fold_adjoint(g));
  CHECK(std::abs(lhs - rhs) <= 1e-12 * std::max(1.0, std::abs(lhs)));

  // fold(S f) = 2 f for data vanishing at t = T.
  ControlFunction ff = fold_adjoint(Sf);
  double worst = 0.0;
  for (int ig = 0; ig < f.n_gamma; ++ig)
    for (int it = 0; it < n_t; ++it)
      worst = std::max(worst, std::abs(ff.at(ig, it) - 2.0 * f.at(ig, it)));
  CHECK(worst <= 1e-12);
}

TEST_CASE("fold refuses grids without a midpoint sample") {
  ControlFunction g = noise_control(3, 10, 0.1);  // even count: no t = T node
  CHECK_THROWS_AS(fold_adjoint(g), std::invalid_argument);
}

TEST_CASE("time integration reproduces linear ramps exactly") {
  const int n_t = 21;
  ControlFunction f = noise_control(2, n_t, 0.05);
  for (int it = 0; it < n_t; ++it) {
    f.at(0, it) = 1.0;         // integral: t
    f.at(1, it) = it * 0.05;   // integral: t^2/2, exact for trapezoid
  }
  ControlFunction F = time_integrate(f);
  CHECK(F.at(0, n_t - 1) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(F.at(1, n_t - 1) == doctest::Approx(0.5).epsilon(1e-13));
  CHECK(F.at(0, 0) == 0.0);
}

TEST_CASE("delayed control is a grid-aligned time shift") {
  BasisSpec spec;
  spec.n_gamma = 4;
  spec.n_t = 8;
  const double T = 1.0;
  ControlBasis basis = make_basis(spec, T, 1.0);
  const double dt = basis.Delta / 4;
  const int n_t = static_cast<int>(std::lround(T / dt)) + 1;

  ControlFunction f = sample_control(basis, 1, -1.0, 0.125, 17, dt, n_t);
  // Shift by T - xi = 4 steps; the shifted pulse support still fits [0, T].
  const double xi = T - 4 * basis.Delta;
  ControlFunction fd = delayed_control(f, xi, T);
  const int shift = static_cast<int>(std::lround((T - xi) / dt));
  for (int ig = 0; ig < f.n_gamma; ++ig) {
    for (int it = 0; it < shift; ++it) CHECK(fd.at(ig, it) == 0.0);
    for (int it = shift; it < n_t; ++it)
      CHECK(fd.at(ig, it) == f.at(ig, it - shift));
  }

  CHECK_THROWS_AS(delayed_control(f, 0.37 * basis.Delta, T),
                  std::invalid_argument);
}

TEST_CASE("a control delayed by whole shifts is again a basis control") {
  // The dataset layout leans on this: delayed families need no new solves.
  BasisSpec spec;
  spec.n_gamma = 3;
  spec.n_t = 8;
  const double T = 1.0;
  ControlBasis basis = make_basis(spec, T, 1.0);
  const double dt = basis.Delta / 8;
  const int n_t = static_cast<int>(std::lround(T / dt)) + 1;

  const int l = 1, m = 2, steps = 3;
  ControlFunction fm = sample_control(basis, l + m * spec.n_gamma, -1.0, 0.25,
                                      9, dt, n_t);
  ControlFunction fm3 = sample_control(basis, l + (m + steps) * spec.n_gamma,
                                       -1.0, 0.25, 9, dt, n_t);
  ControlFunction shifted = delayed_control(fm, T - steps * basis.Delta, T);
  double worst = 0.0;
  for (int ig = 0; ig < fm.n_gamma; ++ig)
    for (int it = 0; it < n_t; ++it)
      worst = std::max(worst, std::abs(shifted.at(ig, it) - fm3.at(ig, it)));
  CHECK(worst <= 1e-13);
}

TEST_CASE("basis Gram is far from singular at working sizes") {
  BasisSpec spec;
  spec.n_gamma = 8;
  spec.n_t = 8;
  for (auto fam : {SpatialFamily::trig_cutoff, SpatialFamily::tent}) {
    spec.family = fam;
    ControlBasis basis = make_basis(spec, 1.0, 1.0);
    CHECK(basis_min_singular_value(basis, 801) > 1e-6);
  }
}

TEST_CASE("bad basis parameters are refused") {
  BasisSpec spec;
  spec.n_t = 0;
  CHECK_THROWS_AS(make_basis(spec, 1.0, 1.0), std::invalid_argument);
  spec.n_t = 8;
  CHECK_THROWS_AS(make_basis(spec, -1.0, 1.0), std::invalid_argument);
  spec.s = 0.0;
  CHECK_THROWS_AS(make_basis(spec, 1.0, 1.0), std::invalid_argument);
}
