// Command-line front end.  All real work lives in bcm/pipeline.hpp so the
// acceptance tests can drive the very same code paths without spawning
// processes.  Exit codes: 0 ok, 2 bad configuration or inputs, 3 forward
// solver failure, 4 inversion failure, 5 validation under threshold.

#include <filesystem>
#include <iostream>
#include <stdexcept>
#include <string>

#include "CLI11.hpp"
#include "bcm/config.hpp"
#include "bcm/io.hpp"
#include "bcm/pipeline.hpp"

int main(int argc, char** argv) {
  CLI::App app{
      "bcm2d: recovers the sound speed of a half-plane medium from "
      "time-domain measurements on a boundary segment"};
  app.require_subcommand(1);

  std::string config_path, dataset_path, out_dir = "out", mode_override;
  int threads = 1;
  long seed = 0;

  auto add_out = [&](CLI::App* sub) {
    sub->add_option("--out", out_dir, "output directory (default: out)");
    sub->add_option("--threads", threads,
                    "worker threads; results are identical for any count");
    sub->add_option("--seed", seed,
                    "accepted for interface stability; no stage draws "
                    "random numbers");
  };

  CLI::App* sim = app.add_subcommand(
      "simulate", "build the medium and record its boundary dataset");
  sim->add_option("--config", config_path, "run configuration file")
      ->required()
      ->check(CLI::ExistingFile);
  bool force_snapshots = false;
  sim->add_flag("--snapshots", force_snapshots,
                "also store final-time interior snapshots");
  add_out(sim);

  CLI::App* rec = app.add_subcommand(
      "reconstruct", "recover images, depth map and speed from a dataset");
  rec->add_option("--config", config_path, "run configuration file")
      ->required()
      ->check(CLI::ExistingFile);
  rec->add_option("--dataset", dataset_path, "dataset container")
      ->required()
      ->check(CLI::ExistingFile);
  rec->add_option("--mode", mode_override,
                  "inverse-data | pseudo-reconstruction (overrides the "
                  "config)");
  add_out(rec);

  CLI::App* val = app.add_subcommand(
      "validate", "compare a recovered speed grid against a reference");
  bcm::ValidateRequest vreq;
  val->add_option("--recovered", vreq.recovered_csv, "recovered speed CSV")
      ->required()
      ->check(CLI::ExistingFile);
  val->add_option("--truth", vreq.truth_csv, "reference speed CSV")
      ->required()
      ->check(CLI::ExistingFile);
  val->add_option("--mask", vreq.mask_csv,
                  "0/1 CSV restricting the comparison (default: wherever "
                  "the recovery carries a value)")
      ->check(CLI::ExistingFile);
  val->add_option("--threshold", vreq.threshold,
                  "relative error bound (default 0.10)");
  val->add_option("--min-fraction", vreq.min_fraction,
                  "required fraction of mask cells at or under the bound "
                  "(default 0.80)");
  add_out(val);

  CLI::App* exp = app.add_subcommand(
      "export", "dump stored traces and snapshots as CSV and PGM");
  exp->add_option("--dataset", dataset_path, "dataset container")
      ->required()
      ->check(CLI::ExistingFile);
  int control = -1;
  exp->add_option("--control", control,
                  "single control index (default: all of them)");
  add_out(exp);

  CLI::App* ins = app.add_subcommand("inspect", "print a dataset manifest");
  ins->add_option("--dataset", dataset_path, "dataset container")
      ->required()
      ->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*sim) {
      bcm::RunConfig cfg = bcm::load_config(config_path);
      if (force_snapshots) cfg.with_snapshots = true;
      bcm::SimulateOutcome out = bcm::run_simulate(cfg, out_dir, threads);
      std::cout << bcm::manifest_text(out.manifest);
      std::cout << "dataset = " << out.dataset_path << "\n";
    } else if (*rec) {
      bcm::RunConfig cfg = bcm::load_config(config_path);
      if (!mode_override.empty()) cfg.mode = mode_override;
      bcm::run_reconstruct(cfg, dataset_path, out_dir, threads);
      std::cout << bcm::read_text_file(
          (std::filesystem::path(out_dir) / "report.txt").string());
    } else if (*val) {
      bcm::ValidateOutcome out = bcm::run_validate(vreq, out_dir);
      std::cout << bcm::read_text_file(
          (std::filesystem::path(out_dir) / "validate_stats.txt").string());
      if (!out.passed) return 5;
    } else if (*exp) {
      bcm::run_export(dataset_path, out_dir, control);
      std::cout << "exported to " << out_dir << "\n";
    } else if (*ins) {
      std::cout << bcm::run_inspect(dataset_path);
    }
  } catch (const bcm::ConfigError& e) {
    std::cerr << "bcm2d: config error: " << e.what() << "\n";
    return 2;
  } catch (const bcm::SolverError& e) {
    std::cerr << "bcm2d: solver error: " << e.what() << "\n";
    return 3;
  } catch (const bcm::InversionError& e) {
    std::cerr << "bcm2d: inversion error: " << e.what() << "\n";
    return 4;
  } catch (const std::invalid_argument& e) {
    std::cerr << "bcm2d: config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "bcm2d: error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
