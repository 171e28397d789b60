#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bcm/controls.hpp"
#include "bcm/medium.hpp"
#include "bcm/rays.hpp"
#include "bcm/wave.hpp"

namespace bcm {

/// Everything a reconstruction run may know about how the traces were
/// produced.  Deliberately carries no medium values beyond the scalar
/// bounds: the content hash only *identifies* the medium.
struct DatasetManifest {
  int version = 1;
  std::string scenario_id;  // label for reports; no physics inside
  std::uint64_t medium_hash = 0;
  double c_star = 0.0;
  double T = 0.0;
  double L = 0.0;
  Grid2 grid;        // solver grid geometry
  BasisSpec basis;
  double dt = 0.0;   // solver time step
  int n_sub = 0;     // solver steps per temporal shift Δ = T/n_t
  int steps_T = 0;   // dt·steps_T == T
  int strip_i0 = 0;  // measurement-strip columns [strip_i0, strip_i0+strip_n)
  int strip_n = 0;
  bool has_snapshots = false;
  int n_controls = 0;
  std::vector<double> xi;  // delay grid, whole multiples of Δ in [0, T]

  double strip_gamma0() const { return grid.x0 + strip_i0 * grid.dx; }
  double Delta() const { return dt * n_sub; }
};

/// Boundary measurements for one control basis: per control k the normal
/// trace of the response to J S^T f_k over [0, 2T] and to f_k over [0, T],
/// both on the measurement strip.  Delayed families need no extra traces:
/// a control delayed by a whole number of Δ-shifts IS another basis
/// control, so per-delay data are index subsets of these.
struct TraceDataset {
  DatasetManifest man;
  std::vector<TraceRecord> resp_integrated;  // J S^T f_k driven, horizon 2T
  std::vector<TraceRecord> resp_direct;      // f_k driven, horizon T
  std::vector<Field2> snapshot_T;            // u^{f_k}(·,T); only with snapshots
};

struct BuildOptions {
  double cfl_target = 0.4;   // fraction of the stable step, via c_star
  bool with_snapshots = false;
  int n_threads = 1;
  bool check_regular = true;  // refuse media whose ray chart folds
  RayTraceOptions ray;        // settings for that pre-check
};

struct TimeStepping {
  double dt = 0.0;
  int n_sub = 0;    // dt·n_sub == Δ
  int steps_T = 0;  // dt·steps_T == T
};

/// Picks dt = Δ/n_sub with n_sub the smallest count meeting the CFL target,
/// so control shifts and solver steps stay aligned.
TimeStepping choose_time_step(const MediumField& medium, int n_t, double cfl_target);

/// The full delay grid {l·Δ : l = 0..n_t}.
std::vector<double> default_xi_grid(const ControlBasis& basis);

/// Runs the 2·N forward solves and packs traces (plus final snapshots when
/// requested).  Deterministic: results land in preassigned slots whatever
/// the thread count.
TraceDataset build_dataset(const MediumField& medium, const ControlBasis& basis,
                           const std::vector<double>& xi_grid,
                           const BuildOptions& opt);

/// Human-readable manifest block, also used verbatim as the file header.
std::string manifest_text(const DatasetManifest& man);

void save_dataset(const TraceDataset& ds, const std::string& path);
TraceDataset load_dataset(const std::string& path);

/// Field-by-field exact comparison (for round-trip and determinism tests).
bool dataset_equal(const TraceDataset& a, const TraceDataset& b);

}  // namespace bcm
