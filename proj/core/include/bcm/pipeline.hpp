#pragma once

#include <stdexcept>
#include <string>

#include "bcm/config.hpp"
#include "bcm/dataset.hpp"
#include "bcm/inversion.hpp"

namespace bcm {

/// Stage failures carry the exit-code taxonomy of the command driver:
/// bad or inconsistent configuration (2), forward-solver/scenario trouble
/// (3), inversion trouble (4).  Validation threshold misses are reported
/// in ValidateOutcome, not thrown.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct SolverError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct InversionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SimulateOutcome {
  std::string dataset_path;
  DatasetManifest manifest;
};

/// Builds the medium and the dataset from the config and writes into
/// out_dir: the dataset container, the resolved config, the true speed
/// grid (CSV+PGM), the ray chart, and the manifest text.
SimulateOutcome run_simulate(const RunConfig& cfg, const std::string& out_dir,
                             int n_threads);

struct ReconstructOutcome {
  DatasetManifest manifest;
  ReconstructionResult result;
};

/// Loads the dataset, checks it against the config, reconstructs, and
/// writes images, map, speed grids, the per-delay diagnostics table and
/// the run report into out_dir.  In inverse-data mode no medium object
/// exists anywhere in this call; pseudo mode rebuilds it from the config
/// for the interior systems and verifies the manifest hash.
ReconstructOutcome run_reconstruct(const RunConfig& cfg,
                                   const std::string& dataset_path,
                                   const std::string& out_dir, int n_threads);

struct ValidateOutcome {
  bool passed = false;
  double fraction_under = 0.0;  // share of mask cells at or under threshold
  int n_mask = 0;               // mask cells considered
  int n_missing = 0;            // mask cells without a recovered value
  double q25 = 0.0, q50 = 0.0, q75 = 0.0, q90 = 0.0;  // error quantiles (%)
  double max_error = 0.0;                             // over mask (%)
};

struct ValidateRequest {
  std::string recovered_csv;
  std::string truth_csv;
  std::string mask_csv;      // optional; default: cells with a recovered value
  double threshold = 0.10;   // relative error bound
  double min_fraction = 0.80;  // required share of mask cells under it
};

/// Compares two speed grids on the same layout; writes the percent error
/// map and a statistics file into out_dir.
ValidateOutcome run_validate(const ValidateRequest& req,
                             const std::string& out_dir);

/// Dumps every stored 2-D field of a dataset (traces, snapshots) as
/// CSV and PGM into out_dir; control < 0 exports all of them.
void run_export(const std::string& dataset_path, const std::string& out_dir,
                int control);

/// Manifest text of a dataset file (the `inspect` command).
std::string run_inspect(const std::string& dataset_path);

}  // namespace bcm
