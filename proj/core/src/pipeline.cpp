#include "bcm/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <vector>

#include "bcm/io.hpp"
#include "bcm/rays.hpp"

namespace bcm {

namespace {

std::string fmtg(double v, const char* spec = "%.17g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::string basename_of(const std::string& path) {
  return std::filesystem::path(path).filename().string();
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory " + dir + ": " + ec.message());
}

std::string join(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

// (gamma, xi) matrix -> Field2 with x = gamma, y = xi (row l at y = xi0+l*dxi).
Field2 rows_to_field(const Eigen::MatrixXd& a, double gamma0, double dgamma,
                     double dxi, double xi0) {
  Grid2 g;
  g.x0 = gamma0;
  g.y0 = xi0;
  g.dx = dgamma;
  g.dy = dxi;
  g.nx = static_cast<int>(a.cols());
  g.ny = static_cast<int>(a.rows());
  Field2 f(g);
  for (int l = 0; l < g.ny; ++l)
    for (int ig = 0; ig < g.nx; ++ig) f.at(ig, l) = a(l, ig);
  return f;
}

Field2 image_to_field(const ImageField& img) {
  return rows_to_field(img.a, img.gamma0, img.dgamma, img.dxi, img.xi0);
}

// Map component with invalid cells blanked to NaN.
Field2 map_to_field(const SemiGeodesicMap& m, const Eigen::MatrixXd& comp) {
  Eigen::MatrixXd a = comp;
  for (int l = 0; l < m.n_rows; ++l)
    for (int ig = 0; ig < m.n_gamma; ++ig)
      if (!m.valid(l, ig)) a(l, ig) = std::numeric_limits<double>::quiet_NaN();
  return rows_to_field(a, m.gamma0, m.dgamma, m.dxi, m.xi0);
}

Field2 record_to_field(const TraceRecord& rec) {
  Grid2 g;
  g.x0 = rec.gamma0;
  g.y0 = 0.0;
  g.dx = rec.dgamma;
  g.dy = rec.dt;
  g.nx = rec.n_gamma;
  g.ny = rec.n_t;
  Field2 f(g);
  for (int it = 0; it < rec.n_t; ++it)
    for (int ig = 0; ig < rec.n_gamma; ++ig) f.at(ig, it) = rec.at(ig, it);
  return f;
}

void save_csv_pgm(const Field2& f, const std::string& dir,
                  const std::string& stem) {
  save_field_csv(f, join(dir, stem + ".csv"));
  save_field_pgm(f, join(dir, stem + ".pgm"));
}

std::string diagnostics_csv(const std::vector<XiRow>& table) {
  std::string s =
      "xi,order,cond,lambda_min,lambda_max,cond_solve,cond_eq,sym_defect,alpha,"
      "residual_unit,residual_x1,residual_x2,"
      "energy_unit,energy_x1,energy_x2,"
      "proj_unit,proj_x1,proj_x2\n";
  for (const XiRow& r : table) {
    s += fmtg(r.xi) + "," + std::to_string(r.order) + "," + fmtg(r.cond) + "," +
         fmtg(r.lambda_min) + "," + fmtg(r.lambda_max) + "," +
         fmtg(r.cond_solve) + "," + fmtg(r.cond_eq) + "," +
         fmtg(r.sym_defect) + "," + fmtg(r.alpha);
    for (double v : r.residual) s += "," + fmtg(v);
    for (double v : r.energy) s += "," + fmtg(v);
    for (double v : r.proj_norm2) s += "," + fmtg(v);
    s += "\n";
  }
  return s;
}

std::string family_label(const BasisSpec& b) {
  return (b.family == SpatialFamily::trig_cutoff ? std::string("trig-cutoff")
                                                 : std::string("tent")) +
         " " + std::to_string(b.n_gamma) + " x " + std::to_string(b.n_t);
}

std::string report_text(const RunConfig& cfg, const std::string& dataset_path,
                        const DatasetManifest& man,
                        const ReconstructionResult& res) {
  std::ostringstream os;
  os << "reconstruction report\n";
  os << "scenario    = " << man.scenario_id << "\n";
  os << "mode        = " << cfg.mode << "\n";
  os << "dataset     = " << basename_of(dataset_path) << "\n";
  os << "controls    = " << man.n_controls << " (" << family_label(man.basis)
     << ")\n";
  os << "grid        = " << man.grid.nx << " x " << man.grid.ny
     << ", h = " << fmtg(man.grid.dx, "%.10g") << "\n";
  os << "T = " << fmtg(man.T, "%.10g") << ", L = " << fmtg(man.L, "%.10g")
     << ", c_star = " << fmtg(man.c_star, "%.10g") << "\n";
  const TikhonovOptions& tk = cfg.inversion.tikhonov;
  if (tk.residual_target > 0)
    os << "alpha       = residual-matched, target "
       << fmtg(tk.residual_target, "%.10g") << "\n";
  else
    os << "alpha       = " << fmtg(tk.alpha, "%.10g") << " (fixed)\n";
  const ImageField& iu = res.img[0];
  os << "smoothing   = sigma_gamma " << fmtg(iu.sigma_gamma, "%.10g") << " -> "
     << fmtg(iu.sigma_gamma_end, "%.10g") << ", sigma_t "
     << fmtg(iu.sigma_t, "%.10g") << "\n";
  os << "image floor = " << fmtg(res.map.floor_used, "%.10g") << "\n";

  long n_cells = static_cast<long>(res.map.n_rows) * res.map.n_gamma;
  long n_valid = 0;
  for (int l = 0; l < res.map.n_rows; ++l)
    for (int ig = 0; ig < res.map.n_gamma; ++ig)
      if (res.map.valid(l, ig)) ++n_valid;
  os << "map valid   = " << n_valid << " of " << n_cells << " cells\n";

  double cmin = std::numeric_limits<double>::infinity(), cmax = 0.0;
  long n_cart = 0;
  for (double v : res.speed.c_cart.v)
    if (std::isfinite(v)) {
      cmin = std::min(cmin, v);
      cmax = std::max(cmax, v);
      ++n_cart;
    }
  if (n_cart > 0)
    os << "speed       = [" << fmtg(cmin, "%.10g") << ", "
       << fmtg(cmax, "%.10g") << "] over " << n_cart << " cartesian cells\n";
  else
    os << "speed       = no cartesian coverage\n";

  os << "\nper-delay systems\n";
  os << "xi,order,cond,cond_solve,alpha,residual_unit,residual_x1,residual_x2,"
        "proj_unit,proj_x1,proj_x2\n";
  for (const XiRow& r : res.table) {
    os << fmtg(r.xi, "%.10g") << "," << r.order << "," << fmtg(r.cond, "%.10g")
       << "," << fmtg(r.cond_solve, "%.10g") << "," << fmtg(r.alpha, "%.10g");
    for (double v : r.residual) os << "," << fmtg(v, "%.10g");
    for (double v : r.proj_norm2) os << "," << fmtg(v, "%.10g");
    os << "\n";
  }
  return os.str();
}

[[noreturn]] void rethrow_config(const std::exception& e, const char* stage) {
  throw ConfigError(std::string(stage) + ": " + e.what());
}

bool close(double a, double b) {
  return std::abs(a - b) <= 1e-12 * std::max({1.0, std::abs(a), std::abs(b)});
}

}  // namespace

SimulateOutcome run_simulate(const RunConfig& cfg, const std::string& out_dir,
                             int n_threads) {
  ensure_dir(out_dir);

  MediumField medium;
  ControlBasis basis;
  try {
    medium = make_scenario(cfg.scenario, cfg.disc);
    basis = make_basis(cfg.basis, cfg.scenario.T, cfg.scenario.L);
  } catch (const std::invalid_argument& e) {
    rethrow_config(e, "simulate");
  } catch (const std::exception& e) {
    throw SolverError(std::string("simulate: ") + e.what());
  }

  BuildOptions bopt;
  bopt.cfl_target = cfg.cfl;
  bopt.with_snapshots = cfg.with_snapshots;
  bopt.n_threads = std::max(1, n_threads);
  bopt.check_regular = cfg.check_regular;
  bopt.ray = cfg.ray;

  TraceDataset ds;
  try {
    ds = build_dataset(medium, basis, default_xi_grid(basis), bopt);
  } catch (const std::invalid_argument& e) {
    rethrow_config(e, "simulate");
  } catch (const std::exception& e) {
    throw SolverError(std::string("simulate: ") + e.what());
  }

  SimulateOutcome out;
  out.dataset_path = join(out_dir, "dataset.bcmds");
  out.manifest = ds.man;
  save_dataset(ds, out.dataset_path);

  save_csv_pgm(medium.c, out_dir, "truth_c");

  save_chart_csv(trace_chart(medium, cfg.ray), join(out_dir, "chart.csv"));

  write_text_file(join(out_dir, "resolved_config.txt"),
                  resolved_config_text(cfg));
  write_text_file(join(out_dir, "manifest.txt"), manifest_text(ds.man));
  return out;
}

ReconstructOutcome run_reconstruct(const RunConfig& cfg,
                                   const std::string& dataset_path,
                                   const std::string& out_dir, int n_threads) {
  if (cfg.mode != "inverse-data" && cfg.mode != "pseudo-reconstruction")
    throw ConfigError("unknown mode '" + cfg.mode +
                      "' (expected inverse-data or pseudo-reconstruction)");
  ensure_dir(out_dir);

  TraceDataset ds;
  try {
    ds = load_dataset(dataset_path);
  } catch (const std::exception& e) {
    rethrow_config(e, "reconstruct");
  }
  const DatasetManifest& man = ds.man;

  // The dataset must be the one the config describes: mixing horizons or
  // bases silently corrupts every downstream quantity, so refuse loudly.
  if (!close(man.T, cfg.scenario.T))
    throw ConfigError("dataset was recorded with T = " + fmtg(man.T, "%.10g") +
                      " but the config asks for T = " +
                      fmtg(cfg.scenario.T, "%.10g") +
                      "; rebuild the dataset or fix the config");
  if (!close(man.L, cfg.scenario.L) || !close(man.c_star, cfg.scenario.c_star))
    throw ConfigError("dataset geometry (L, c_star) does not match the config");
  const BasisSpec& mb = man.basis;
  const BasisSpec& cb = cfg.basis;
  if (mb.family != cb.family || mb.n_gamma != cb.n_gamma || mb.n_t != cb.n_t ||
      !close(mb.s, cb.s) || !close(mb.d_divisor, cb.d_divisor) ||
      !close(mb.eps_offset, cb.eps_offset))
    throw ConfigError("dataset control basis does not match the config");

  ReconstructOptions opt = cfg.inversion;
  opt.pseudo = (cfg.mode == "pseudo-reconstruction");
  opt.n_threads = std::max(1, n_threads);

  ReconstructOutcome out;
  out.manifest = man;
  if (opt.pseudo) {
    if (!man.has_snapshots)
      throw ConfigError(
          "pseudo-reconstruction needs a dataset built with snapshots");
    MediumField medium;
    try {
      medium = make_scenario(cfg.scenario, cfg.disc);
    } catch (const std::exception& e) {
      rethrow_config(e, "reconstruct");
    }
    if (medium.content_hash() != man.medium_hash)
      throw ConfigError(
          "the config does not rebuild the medium this dataset was recorded "
          "on (hash mismatch); pseudo mode needs the matching medium");
    try {
      out.result = reconstruct(ds, opt, &medium);
    } catch (const std::invalid_argument& e) {
      rethrow_config(e, "reconstruct");
    } catch (const std::exception& e) {
      throw InversionError(std::string("reconstruct: ") + e.what());
    }
  } else {
    // Inverse-data mode: no medium object exists in this branch, the
    // dataset file is the only input.
    try {
      out.result = reconstruct(ds, opt, nullptr);
    } catch (const std::invalid_argument& e) {
      rethrow_config(e, "reconstruct");
    } catch (const std::exception& e) {
      throw InversionError(std::string("reconstruct: ") + e.what());
    }
  }
  const ReconstructionResult& res = out.result;

  write_text_file(join(out_dir, "resolved_config.txt"),
                  resolved_config_text(cfg));
  save_csv_pgm(image_to_field(res.img[0]), out_dir, "image_unit");
  save_csv_pgm(image_to_field(res.img[1]), out_dir, "image_x1");
  save_csv_pgm(image_to_field(res.img[2]), out_dir, "image_x2");
  save_field_csv(map_to_field(res.map, res.map.x1), join(out_dir, "map_x1.csv"));
  save_field_csv(map_to_field(res.map, res.map.x2), join(out_dir, "map_x2.csv"));
  {
    Eigen::MatrixXd v = res.map.valid.cast<double>();
    save_field_csv(rows_to_field(v, res.map.gamma0, res.map.dgamma, res.map.dxi,
                                 res.map.xi0),
                   join(out_dir, "map_valid.csv"));
  }
  save_field_csv(rows_to_field(res.speed.c_ray, res.map.gamma0, res.map.dgamma,
                               res.map.dxi, res.map.xi0),
                 join(out_dir, "speed_ray.csv"));
  save_csv_pgm(res.speed.c_cart, out_dir, "speed_cartesian");
  save_field_csv(res.speed.cart_valid, join(out_dir, "cart_valid.csv"));
  write_text_file(join(out_dir, "condition_numbers.csv"),
                  diagnostics_csv(res.table));
  write_text_file(join(out_dir, "report.txt"),
                  report_text(cfg, dataset_path, man, res));
  return out;
}

ValidateOutcome run_validate(const ValidateRequest& req,
                             const std::string& out_dir) {
  ensure_dir(out_dir);
  Field2 rec, tru;
  try {
    rec = load_field_csv(req.recovered_csv);
    tru = load_field_csv(req.truth_csv);
  } catch (const std::exception& e) {
    rethrow_config(e, "validate");
  }
  if (!rec.grid.same_layout(tru.grid))
    throw ConfigError("validate: recovered and truth grids have different "
                      "layouts; resample first");
  Field2 mask;
  bool have_mask = !req.mask_csv.empty();
  if (have_mask) {
    try {
      mask = load_field_csv(req.mask_csv);
    } catch (const std::exception& e) {
      rethrow_config(e, "validate");
    }
    if (!mask.grid.same_layout(rec.grid))
      throw ConfigError("validate: mask grid layout differs from the fields");
  }
  if (!(req.threshold > 0) || !(req.min_fraction >= 0) ||
      req.min_fraction > 1.0)
    throw ConfigError("validate: threshold must be > 0 and min fraction in "
                      "[0, 1]");

  Field2 err(rec.grid, std::numeric_limits<double>::quiet_NaN());
  ValidateOutcome out;
  std::vector<double> errs;
  long n_under = 0;
  for (std::size_t q = 0; q < rec.v.size(); ++q) {
    bool in_mask = have_mask ? (std::isfinite(mask.v[q]) && mask.v[q] != 0.0)
                             : std::isfinite(rec.v[q]);
    if (!in_mask) continue;
    ++out.n_mask;
    double t = tru.v[q];
    if (!std::isfinite(rec.v[q]) || !std::isfinite(t) || !(t > 0)) {
      ++out.n_missing;  // counts against the pass fraction
      continue;
    }
    double e = std::abs(rec.v[q] - t) / t;
    err.v[q] = 100.0 * e;
    errs.push_back(e);
    if (e <= req.threshold + 1e-15) ++n_under;
  }
  if (out.n_mask == 0) throw ConfigError("validate: the mask selects no cells");

  std::sort(errs.begin(), errs.end());
  auto quant = [&](double p) {
    if (errs.empty()) return std::numeric_limits<double>::quiet_NaN();
    double pos = p * (errs.size() - 1);
    std::size_t i = static_cast<std::size_t>(pos);
    double frac = pos - i;
    double lo = errs[i];
    double hi = errs[std::min(i + 1, errs.size() - 1)];
    return 100.0 * (lo * (1 - frac) + hi * frac);
  };
  out.q25 = quant(0.25);
  out.q50 = quant(0.50);
  out.q75 = quant(0.75);
  out.q90 = quant(0.90);
  out.max_error = errs.empty() ? std::numeric_limits<double>::quiet_NaN()
                               : 100.0 * errs.back();
  out.fraction_under = static_cast<double>(n_under) / out.n_mask;
  out.passed = out.fraction_under + 1e-12 >= req.min_fraction;

  save_field_csv(err, join(out_dir, "error_percent.csv"));
  save_field_pgm(err, join(out_dir, "error_percent.pgm"));

  std::ostringstream os;
  os << "validation report\n";
  os << "recovered = " << basename_of(req.recovered_csv) << "\n";
  os << "truth     = " << basename_of(req.truth_csv) << "\n";
  os << "mask      = "
     << (have_mask ? basename_of(req.mask_csv)
                   : std::string("(recovered coverage)"))
     << "\n";
  os << "cells     = " << out.n_mask << " in mask, " << out.n_missing
     << " without a usable value\n";
  os << "error %   : q25 = " << fmtg(out.q25, "%.6g")
     << ", median = " << fmtg(out.q50, "%.6g")
     << ", q75 = " << fmtg(out.q75, "%.6g")
     << ", q90 = " << fmtg(out.q90, "%.6g")
     << ", max = " << fmtg(out.max_error, "%.6g") << "\n";
  os << "at or under " << fmtg(100.0 * req.threshold, "%.6g")
     << " % : " << fmtg(100.0 * out.fraction_under, "%.6g") << " % of mask "
     << "(required " << fmtg(100.0 * req.min_fraction, "%.6g") << " %)\n";
  os << "result    = " << (out.passed ? "PASS" : "FAIL") << "\n";
  write_text_file(join(out_dir, "validate_stats.txt"), os.str());
  return out;
}

void run_export(const std::string& dataset_path, const std::string& out_dir,
                int control) {
  TraceDataset ds;
  try {
    ds = load_dataset(dataset_path);
  } catch (const std::exception& e) {
    rethrow_config(e, "export");
  }
  ensure_dir(out_dir);
  write_text_file(join(out_dir, "manifest.txt"), manifest_text(ds.man));
  if (control >= ds.man.n_controls)
    throw ConfigError("export: control index " + std::to_string(control) +
                      " out of range (dataset has " +
                      std::to_string(ds.man.n_controls) + ")");
  int k0 = control < 0 ? 0 : control;
  int k1 = control < 0 ? ds.man.n_controls : control + 1;
  for (int k = k0; k < k1; ++k) {
    char tag[16];
    std::snprintf(tag, sizeof tag, "%04d", k);
    save_csv_pgm(record_to_field(ds.resp_integrated[k]), out_dir,
                 std::string("response_integrated_") + tag);
    save_csv_pgm(record_to_field(ds.resp_direct[k]), out_dir,
                 std::string("response_direct_") + tag);
    if (ds.man.has_snapshots)
      save_csv_pgm(ds.snapshot_T[k], out_dir, std::string("snapshot_") + tag);
  }
}

std::string run_inspect(const std::string& dataset_path) {
  std::ifstream is(dataset_path, std::ios::binary);
  if (!is) throw ConfigError("inspect: cannot open " + dataset_path);
  std::string text, line;
  while (std::getline(is, line)) {
    if (line == "end-header") return text;
    text += line;
    text += '\n';
  }
  throw ConfigError("inspect: " + dataset_path +
                    " has no dataset header terminator");
}

}  // namespace bcm
