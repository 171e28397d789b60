#include "bcm/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "bcm/io.hpp"
#include "bcm/parallel.hpp"

namespace bcm {

namespace {

std::string fmt_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

const char* family_name(SpatialFamily f) {
  return f == SpatialFamily::trig_cutoff ? "trig-cutoff" : "tent";
}

SpatialFamily family_from_name(const std::string& s) {
  if (s == "trig-cutoff") return SpatialFamily::trig_cutoff;
  if (s == "tent") return SpatialFamily::tent;
  throw std::runtime_error("dataset: unknown basis family '" + s + "'");
}

}  // namespace

TimeStepping choose_time_step(const MediumField& medium, int n_t,
                              double cfl_target) {
  if (n_t < 1) throw std::invalid_argument("choose_time_step: n_t >= 1");
  if (!(cfl_target > 0 && cfl_target <= 0.7))
    throw std::invalid_argument("choose_time_step: cfl target in (0, 0.7]");
  const double h = medium.c.grid.dx;
  const double Delta = medium.T / n_t;
  const double dt_raw = cfl_target * h / medium.c_star;
  TimeStepping ts;
  ts.n_sub = static_cast<int>(std::ceil(Delta / dt_raw - 1e-12));
  if (ts.n_sub < 1) ts.n_sub = 1;
  ts.dt = Delta / ts.n_sub;
  ts.steps_T = ts.n_sub * n_t;
  return ts;
}

std::vector<double> default_xi_grid(const ControlBasis& basis) {
  std::vector<double> xi(static_cast<std::size_t>(basis.spec.n_t) + 1);
  for (int l = 0; l <= basis.spec.n_t; ++l) xi[l] = l * basis.Delta;
  return xi;
}

TraceDataset build_dataset(const MediumField& medium, const ControlBasis& basis,
                           const std::vector<double>& xi_grid,
                           const BuildOptions& opt) {
  const Grid2& g = medium.c.grid;
  const double h = g.dx;
  const double tol = 1e-9;

  if (std::abs(basis.T - medium.T) > tol || std::abs(basis.L - medium.L) > tol)
    throw std::invalid_argument("build_dataset: basis horizon/interval differ "
                                "from the medium's");

  // The whole control support must sit inside the measurement strip, i.e.
  // the cutoff tails must not outrun the causal reach.
  if (basis.support_half_width > medium.L + medium.c_star * medium.T + tol)
    throw std::invalid_argument(
        "build_dataset: control support exceeds the measurement strip");

  // Delay grid must be whole multiples of Δ inside [0, T].
  for (double x : xi_grid) {
    const double st = x / basis.Delta;
    if (x < -tol || x > medium.T + tol || std::abs(st - std::round(st)) > 1e-6)
      throw std::invalid_argument(
          "build_dataset: delay grid entry is not a whole shift in [0, T]");
  }

  if (opt.check_regular && basis.n() > 0) {
    const RayChart chart = trace_chart(medium, opt.ray);
    for (int ig = 0; ig < chart.n_g; ++ig)
      for (int k = 0; k < chart.n_xi; ++k)
        if (!chart.ok[chart.idx(ig, k)]) {
          std::ostringstream msg;
          msg << "build_dataset: medium is not regular; ray fold near gamma="
              << chart.gamma[ig] << ", xi=" << chart.xi[k];
          throw std::runtime_error(msg.str());
        }
  }

  const TimeStepping ts = choose_time_step(medium, basis.spec.n_t, opt.cfl_target);
  const int M = ts.steps_T;

  // Control strip: all grid columns within the support half-width (the
  // basis evaluates to exactly zero beyond it, so a half-cell of slack
  // only adds zero samples).
  const double shw = basis.support_half_width;
  int ci0 = 0;
  while (ci0 < g.nx && g.x(ci0) < -shw - 0.5 * h) ++ci0;
  int ci1 = g.nx - 1;
  while (ci1 >= 0 && g.x(ci1) > shw + 0.5 * h) --ci1;
  if (basis.n() > 0 && ci0 > ci1)
    throw std::invalid_argument("build_dataset: grid misses the control strip");
  const int cn = ci1 - ci0 + 1;

  TraceDataset ds;
  ds.man.scenario_id = medium.provenance;
  ds.man.medium_hash = medium.content_hash();
  ds.man.c_star = medium.c_star;
  ds.man.T = medium.T;
  ds.man.L = medium.L;
  ds.man.grid = g;
  ds.man.basis = basis.spec;
  ds.man.dt = ts.dt;
  ds.man.n_sub = ts.n_sub;
  ds.man.steps_T = ts.steps_T;
  ds.man.has_snapshots = opt.with_snapshots;
  ds.man.n_controls = basis.n();
  ds.man.xi = xi_grid;

  const int n = basis.n();
  ds.resp_integrated.resize(n);
  ds.resp_direct.resize(n);
  if (opt.with_snapshots) ds.snapshot_T.resize(n);

  parallel_for(n, opt.n_threads, [&](int k) {
    try {
      ControlFunction f = sample_control(basis, k, g.x(ci0), h, cn, ts.dt, M + 1);
      ControlFunction drive = time_integrate(odd_extend(f));

      SolveOptions o2;
      o2.horizon = 2.0 * medium.T;
      SolveResult r2 = solve_forward(medium, drive, o2);
      ds.resp_integrated[k] = std::move(r2.trace);

      SolveOptions o1;
      o1.horizon = medium.T;
      SolveResult r1 = solve_forward(medium, f, o1);
      ds.resp_direct[k] = std::move(r1.trace);
      if (opt.with_snapshots) ds.snapshot_T[k] = std::move(r1.final_u);
    } catch (const std::exception& e) {
      throw std::runtime_error("build_dataset: solve failed for control " +
                               std::to_string(k) + ": " + e.what());
    }
  });

  if (n > 0) {
    ds.man.strip_i0 = ds.resp_integrated[0].i0;
    ds.man.strip_n = ds.resp_integrated[0].n_gamma;
  } else {
    // Empty family: record the strip the solver would have used.
    const double reach = medium.L + medium.c_star * medium.T;
    int si0 = 0;
    while (si0 < g.nx && g.x(si0) < -reach - tol) ++si0;
    int si1 = g.nx - 1;
    while (si1 >= 0 && g.x(si1) > reach + tol) --si1;
    ds.man.strip_i0 = si0;
    ds.man.strip_n = si1 - si0 + 1;
  }
  return ds;
}

std::string manifest_text(const DatasetManifest& man) {
  std::ostringstream os;
  char hashbuf[20];
  std::snprintf(hashbuf, sizeof hashbuf, "%016llx",
                static_cast<unsigned long long>(man.medium_hash));
  os << "bcm2d-dataset-version = " << man.version << "\n"
     << "scenario = " << man.scenario_id << "\n"
     << "medium_hash = " << hashbuf << "\n"
     << "c_star = " << fmt_double(man.c_star) << "\n"
     << "T = " << fmt_double(man.T) << "\n"
     << "L = " << fmt_double(man.L) << "\n"
     << "grid_x0 = " << fmt_double(man.grid.x0) << "\n"
     << "grid_y0 = " << fmt_double(man.grid.y0) << "\n"
     << "grid_dx = " << fmt_double(man.grid.dx) << "\n"
     << "grid_dy = " << fmt_double(man.grid.dy) << "\n"
     << "grid_nx = " << man.grid.nx << "\n"
     << "grid_ny = " << man.grid.ny << "\n"
     << "basis_family = " << family_name(man.basis.family) << "\n"
     << "basis_n_gamma = " << man.basis.n_gamma << "\n"
     << "basis_n_t = " << man.basis.n_t << "\n"
     << "basis_s = " << fmt_double(man.basis.s) << "\n"
     << "basis_d_divisor = " << fmt_double(man.basis.d_divisor) << "\n"
     << "basis_eps_offset = " << fmt_double(man.basis.eps_offset) << "\n"
     << "dt = " << fmt_double(man.dt) << "\n"
     << "n_sub = " << man.n_sub << "\n"
     << "steps_T = " << man.steps_T << "\n"
     << "strip_i0 = " << man.strip_i0 << "\n"
     << "strip_n = " << man.strip_n << "\n"
     << "snapshots = " << (man.has_snapshots ? 1 : 0) << "\n"
     << "n_controls = " << man.n_controls << "\n";
  os << "xi =";
  for (double x : man.xi) os << ' ' << fmt_double(x);
  os << "\n";
  return os.str();
}

namespace {

DatasetManifest parse_manifest(std::istream& is) {
  std::map<std::string, std::string> kv;
  std::string line;
  bool ended = false;
  while (std::getline(is, line)) {
    if (line == "end-header") {
      ended = true;
      break;
    }
    const std::size_t sep = line.find(" = ");
    if (sep == std::string::npos)
      throw std::runtime_error("dataset: malformed header line '" + line + "'");
    kv[line.substr(0, sep)] = line.substr(sep + 3);
  }
  if (!ended) throw std::runtime_error("dataset: header not terminated");

  auto need = [&](const char* key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end())
      throw std::runtime_error(std::string("dataset: missing header key '") +
                               key + "'");
    return it->second;
  };
  auto to_int = [&](const char* key) { return std::stoi(need(key)); };
  auto to_dbl = [&](const char* key) { return std::strtod(need(key).c_str(), nullptr); };

  DatasetManifest man;
  man.version = to_int("bcm2d-dataset-version");
  if (man.version != 1)
    throw std::runtime_error("dataset: unsupported version " +
                             std::to_string(man.version));
  man.scenario_id = need("scenario");
  man.medium_hash = std::stoull(need("medium_hash"), nullptr, 16);
  man.c_star = to_dbl("c_star");
  man.T = to_dbl("T");
  man.L = to_dbl("L");
  man.grid.x0 = to_dbl("grid_x0");
  man.grid.y0 = to_dbl("grid_y0");
  man.grid.dx = to_dbl("grid_dx");
  man.grid.dy = to_dbl("grid_dy");
  man.grid.nx = to_int("grid_nx");
  man.grid.ny = to_int("grid_ny");
  man.basis.family = family_from_name(need("basis_family"));
  man.basis.n_gamma = to_int("basis_n_gamma");
  man.basis.n_t = to_int("basis_n_t");
  man.basis.s = to_dbl("basis_s");
  man.basis.d_divisor = to_dbl("basis_d_divisor");
  man.basis.eps_offset = to_dbl("basis_eps_offset");
  man.dt = to_dbl("dt");
  man.n_sub = to_int("n_sub");
  man.steps_T = to_int("steps_T");
  man.strip_i0 = to_int("strip_i0");
  man.strip_n = to_int("strip_n");
  man.has_snapshots = to_int("snapshots") != 0;
  man.n_controls = to_int("n_controls");
  {
    std::istringstream xs(need("xi"));
    double x;
    while (xs >> x) man.xi.push_back(x);
  }
  return man;
}

TraceRecord make_record(const DatasetManifest& man, int control_id,
                        double horizon, int n_t, std::vector<double> v) {
  TraceRecord r;
  r.control_id = control_id;
  r.horizon = horizon;
  r.i0 = man.strip_i0;
  r.gamma0 = man.strip_gamma0();
  r.dgamma = man.grid.dx;
  r.n_gamma = man.strip_n;
  r.dt = man.dt;
  r.n_t = n_t;
  if (v.size() != static_cast<std::size_t>(man.strip_n) * n_t)
    throw std::runtime_error("dataset: trace block has the wrong size");
  r.v = std::move(v);
  return r;
}

}  // namespace

void save_dataset(const TraceDataset& ds, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("dataset: cannot open '" + path + "' for write");
  os << manifest_text(ds.man) << "end-header\n";
  for (int k = 0; k < ds.man.n_controls; ++k) {
    write_block(os, ds.resp_integrated[k].v);
    write_block(os, ds.resp_direct[k].v);
  }
  if (ds.man.has_snapshots)
    for (int k = 0; k < ds.man.n_controls; ++k) write_block(os, ds.snapshot_T[k].v);
  if (!os) throw std::runtime_error("dataset: write failed for '" + path + "'");
}

TraceDataset load_dataset(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("dataset: cannot open '" + path + "'");
  TraceDataset ds;
  ds.man = parse_manifest(is);
  const DatasetManifest& man = ds.man;

  const int M = man.steps_T;
  ds.resp_integrated.reserve(man.n_controls);
  ds.resp_direct.reserve(man.n_controls);
  for (int k = 0; k < man.n_controls; ++k) {
    ds.resp_integrated.push_back(make_record(
        man, k, 2.0 * man.T, 2 * M + 1,
        read_block(is, "trace of integrated control " + std::to_string(k))));
    ds.resp_direct.push_back(make_record(
        man, k, man.T, M + 1,
        read_block(is, "trace of control " + std::to_string(k))));
  }
  if (man.has_snapshots) {
    ds.snapshot_T.reserve(man.n_controls);
    for (int k = 0; k < man.n_controls; ++k) {
      Field2 f(man.grid);
      std::vector<double> v =
          read_block(is, "snapshot of control " + std::to_string(k));
      if (v.size() != man.grid.size())
        throw std::runtime_error("dataset: snapshot block has the wrong size");
      f.v = std::move(v);
      ds.snapshot_T.push_back(std::move(f));
    }
  }
  // Nothing may trail the last block.
  char probe;
  if (is.read(&probe, 1))
    throw std::runtime_error("dataset: trailing bytes after the last block");
  return ds;
}

bool dataset_equal(const TraceDataset& a, const TraceDataset& b) {
  if (manifest_text(a.man) != manifest_text(b.man)) return false;
  auto rec_eq = [](const TraceRecord& x, const TraceRecord& y) {
    return x.control_id == y.control_id && x.horizon == y.horizon &&
           x.i0 == y.i0 && x.gamma0 == y.gamma0 && x.dgamma == y.dgamma &&
           x.n_gamma == y.n_gamma && x.dt == y.dt && x.n_t == y.n_t && x.v == y.v;
  };
  if (a.resp_integrated.size() != b.resp_integrated.size() ||
      a.resp_direct.size() != b.resp_direct.size() ||
      a.snapshot_T.size() != b.snapshot_T.size())
    return false;
  for (std::size_t k = 0; k < a.resp_integrated.size(); ++k)
    if (!rec_eq(a.resp_integrated[k], b.resp_integrated[k])) return false;
  for (std::size_t k = 0; k < a.resp_direct.size(); ++k)
    if (!rec_eq(a.resp_direct[k], b.resp_direct[k])) return false;
  for (std::size_t k = 0; k < a.snapshot_T.size(); ++k)
    if (a.snapshot_T[k].v != b.snapshot_T[k].v) return false;
  return true;
}

}  // namespace bcm
