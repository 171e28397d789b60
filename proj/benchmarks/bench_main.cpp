// Micro-benchmarks for the hot paths: the leapfrog solver, dataset-wide
// Gram assembly, ray tracing and image smoothing.  Each fixture is built
// once and reused across iterations.

#include <benchmark/benchmark.h>

#include <memory>

#include "bcm/dataset.hpp"
#include "bcm/inversion.hpp"
#include "bcm/rays.hpp"

namespace {

const bcm::MediumField& test1_medium() {
  static bcm::MediumField m = [] {
    bcm::ScenarioSpec s = bcm::scenario_defaults(bcm::ScenarioSpec::Kind::test1);
    bcm::DiscretizationSpec d;
    d.h = 0.025;
    return bcm::make_scenario(s, d);
  }();
  return m;
}

const bcm::TraceDataset& small_dataset() {
  static bcm::TraceDataset ds = [] {
    bcm::ScenarioSpec s = bcm::scenario_defaults(bcm::ScenarioSpec::Kind::homogeneous);
    bcm::DiscretizationSpec d;
    d.h = 0.05;
    bcm::MediumField m = bcm::make_scenario(s, d);
    bcm::BasisSpec bs;
    bs.n_gamma = 8;
    bs.n_t = 8;
    bcm::ControlBasis basis = bcm::make_basis(bs, m.T, m.L);
    bcm::BuildOptions opt;
    return bcm::build_dataset(m, basis, bcm::default_xi_grid(basis), opt);
  }();
  return ds;
}

void BM_forward_solve(benchmark::State& state) {
  const bcm::MediumField& m = test1_medium();
  bcm::BasisSpec bs;
  bs.n_gamma = 8;
  bs.n_t = 8;
  bcm::ControlBasis basis = bcm::make_basis(bs, m.T, m.L);
  bcm::TimeStepping ts = bcm::choose_time_step(m, bs.n_t, 0.4);
  int strip_n = m.grid.nx;
  bcm::ControlFunction f = bcm::sample_control(
      basis, 0, m.grid.x0, m.grid.dx, strip_n, ts.dt, ts.steps_T + 1);
  for (auto _ : state) {
    bcm::SolveOptions so;
    so.horizon = m.T;
    benchmark::DoNotOptimize(bcm::solve_forward(m, f, so));
  }
}
BENCHMARK(BM_forward_solve)->Unit(benchmark::kMillisecond);

void BM_gram_assembly(benchmark::State& state) {
  const bcm::TraceDataset& ds = small_dataset();
  for (auto _ : state)
    benchmark::DoNotOptimize(bcm::gram_matrix(ds, 0.0, 1));
  state.SetLabel(std::to_string(ds.man.n_controls) + " controls");
}
BENCHMARK(BM_gram_assembly)->Unit(benchmark::kMillisecond);

void BM_ray_chart(benchmark::State& state) {
  const bcm::MediumField& m = test1_medium();
  for (auto _ : state) benchmark::DoNotOptimize(bcm::trace_chart(m));
}
BENCHMARK(BM_ray_chart)->Unit(benchmark::kMillisecond);

void BM_smooth_image(benchmark::State& state) {
  bcm::ImageField img;
  img.gamma0 = -1.0;
  img.dgamma = 0.025;
  img.n_gamma = 81;
  img.dxi = 1.0 / 16;
  img.n_rows = 17;
  img.a = Eigen::MatrixXd::Random(img.n_rows, img.n_gamma);
  for (auto _ : state)
    benchmark::DoNotOptimize(bcm::smooth_image(img, 0.1875, 0.0625));
}
BENCHMARK(BM_smooth_image)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
