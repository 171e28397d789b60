#include <cmath>

#include "bcm/io.hpp"
#include "bcm/medium.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace bcm;
using bcmtest::TempDir;

TEST_CASE("per-kind defaults carry the published experiment geometry") {
  auto d1 = scenario_defaults(ScenarioSpec::Kind::test1);
  CHECK(d1.T == 1.0);
  CHECK(d1.c_star == 1.0);
  CHECK(d1.a == 1.0);
  CHECK(d1.xbar2 == -0.5);

  auto d2 = scenario_defaults(ScenarioSpec::Kind::test2);
  CHECK(d2.T == 1.5);
  CHECK(d2.c_star == 1.25);

  auto d4 = scenario_defaults(ScenarioSpec::Kind::test4);
  CHECK(d4.T == 1.0);
  CHECK(d4.c_star == 1.4);
  CHECK(d4.phi != 0.0);

  auto d5 = scenario_defaults(ScenarioSpec::Kind::test5);
  CHECK(d5.wedge_rho == 5.0);
  CHECK(d5.wedge_apex_y == -0.3);
}

TEST_CASE("density spot values: bump peak doubles the background") {
  auto spec = scenario_defaults(ScenarioSpec::Kind::test1);
  // rho = 1 + a·g1(x)·g2(y) peaks at the Gaussian center with value 1 + a.
  CHECK(scenario_density(spec, spec.xbar1, spec.xbar2) ==
        doctest::Approx(1.0 + spec.a).epsilon(1e-12));
  CHECK(scenario_speed(spec, spec.xbar1, spec.xbar2) ==
        doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
  // Far from the bump the background is homogeneous unit speed.
  CHECK(scenario_speed(spec, 3.5, -0.1) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("homogeneous scenario is exactly c0 everywhere") {
  auto spec = scenario_defaults(ScenarioSpec::Kind::homogeneous);
  spec.c0 = 0.75;
  spec.c_star = 0.75;
  CHECK(scenario_speed(spec, 0.3, -0.8) == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(scenario_density(spec, -1.0, -0.2) ==
        doctest::Approx(1.0 / (0.75 * 0.75)).epsilon(1e-14));
}

TEST_CASE("wedge density: interior plateau, background, and smoothed edge") {
  auto spec = scenario_defaults(ScenarioSpec::Kind::test5);
  spec.wedge_smooth = 0.05;  // fixed, so values are grid-free
  // Deep inside the triangle.
  CHECK(scenario_density(spec, 0.0, -0.6) == doctest::Approx(5.0).epsilon(1e-9));
  // Well outside.
  CHECK(scenario_density(spec, 0.8, -0.6) == doctest::Approx(1.0).epsilon(1e-9));
  // On the boundary edge the blend sits between the two plateaus.
  const double mid = scenario_density(spec, 0.0, -0.3);
  CHECK(mid > 1.5);
  CHECK(mid < 4.5);
}

TEST_CASE("make_scenario sizes the grid for zero-influence walls") {
  auto spec = scenario_defaults(ScenarioSpec::Kind::test1);
  DiscretizationSpec disc;
  disc.h = 0.05;
  MediumField m = make_scenario(spec, disc);

  const double reach = spec.c_star * spec.T;
  CHECK(m.grid.y_max() == doctest::Approx(0.0));  // boundary line on top row
  CHECK(-m.grid.y0 >= reach);                      // depth covers the cone
  CHECK(m.grid.x_max() >= spec.L + 2 * reach);     // walls outside influence
  CHECK(m.grid.x0 == -m.grid.x_max());             // symmetric
  // h snapped so sigma endpoints are nodes.
  const double cells_per_L = spec.L / m.grid.dx;
  CHECK(cells_per_L == doctest::Approx(std::round(cells_per_L)).epsilon(1e-12));
}

TEST_CASE("wedge smoothing length defaults to two grid cells") {
  auto spec = scenario_defaults(ScenarioSpec::Kind::test5);
  REQUIRE(spec.wedge_smooth <= 0);  // the auto marker
  DiscretizationSpec disc;
  disc.h = 0.05;
  MediumField m = make_scenario(spec, disc);
  // The resolved value is recorded in the provenance string.
  CHECK(m.provenance.find("smooth=0.1") != std::string::npos);
}

TEST_CASE("content hash is reproducible and separates media") {
  DiscretizationSpec disc;
  disc.h = 0.1;
  auto h1 = make_scenario(scenario_defaults(ScenarioSpec::Kind::test1), disc)
                .content_hash();
  auto h1b = make_scenario(scenario_defaults(ScenarioSpec::Kind::test1), disc)
                 .content_hash();
  auto h2 = make_scenario(scenario_defaults(ScenarioSpec::Kind::test2), disc)
                .content_hash();
  CHECK(h1 == h1b);
  CHECK(h1 != h2);

  auto spec = scenario_defaults(ScenarioSpec::Kind::test1);
  spec.a = 1.0 + 1e-9;  // tiny parameter change must change the hash
  CHECK(make_scenario(spec, disc).content_hash() != h1);
}

TEST_CASE("speed bound violations and bad parameters are refused") {
  auto spec = scenario_defaults(ScenarioSpec::Kind::homogeneous);
  DiscretizationSpec disc;
  disc.h = 0.1;

  spec.c0 = 1.5;  // exceeds c_star = 1
  CHECK_THROWS_WITH_AS(make_scenario(spec, disc),
                       doctest::Contains("c_star"), std::runtime_error);

  spec = scenario_defaults(ScenarioSpec::Kind::test1);
  spec.T = -1.0;
  CHECK_THROWS_AS(make_scenario(spec, disc), std::invalid_argument);

  spec = scenario_defaults(ScenarioSpec::Kind::test1);
  disc.h = 0.0;
  CHECK_THROWS_AS(make_scenario(spec, disc), std::invalid_argument);
}

TEST_CASE("custom scenario loads a speed grid and refuses short coverage") {
  TempDir td("medium_custom");

  // A grid generously covering the required rectangle, constant speed 0.9.
  Grid2 g;
  g.x0 = -6;
  g.y0 = -4;
  g.dx = g.dy = 0.5;
  g.nx = 25;
  g.ny = 9;
  Field2 f(g, 0.9);
  save_field_csv(f, td.file("c.csv"));

  ScenarioSpec spec = scenario_defaults(ScenarioSpec::Kind::custom);
  spec.T = 1.0;
  spec.L = 1.0;
  spec.c_star = 1.0;
  spec.custom_c_csv = td.file("c.csv");
  DiscretizationSpec disc;
  disc.h = 0.1;
  MediumField m = make_scenario(spec, disc);
  CHECK(m.c_min() == doctest::Approx(0.9).epsilon(1e-12));
  CHECK(m.c_max() == doctest::Approx(0.9).epsilon(1e-12));

  // A file whose rectangle stops short of the needed half-width.
  Grid2 small = g;
  small.nx = 9;
  small.x0 = -2;
  Field2 fs(small, 0.9);
  save_field_csv(fs, td.file("small.csv"));
  spec.custom_c_csv = td.file("small.csv");
  CHECK_THROWS_WITH_AS(make_scenario(spec, disc), doctest::Contains("cover"),
                       std::runtime_error);
}
