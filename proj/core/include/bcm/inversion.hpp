#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "bcm/dataset.hpp"
#include "bcm/medium.hpp"

namespace bcm {

/// The three harmonic weights used on the boundary line: a ≡ 1, a = x¹,
/// a = x².  On the line x² = 0 with outward normal (0, 1) their boundary
/// data (a, ∂a/∂ν) are (1, 0), (γ, 0) and (0, 1).
enum class HarmonicTag { unit, x1, x2 };
const char* harmonic_name(HarmonicTag t);

struct GramMatrix {
  double xi = 0.0;
  std::vector<int> family;  // dataset control indices forming the delayed family
  Eigen::MatrixXd G;        // symmetrized
  double sym_defect = 0.0;  // ‖G_raw − G_rawᵀ‖_F / ‖G_raw‖_F
  double cond = 0.0;        // eigenvalue ratio; +inf when singular
  double lambda_min = 0.0;
  double lambda_max = 0.0;
};

struct RhsVector {
  double xi = 0.0;
  HarmonicTag tag = HarmonicTag::unit;
  std::vector<int> family;
  Eigen::VectorXd b;
};

struct TikhonovOptions {
  double alpha = 0.0;
  double residual_target = -1.0;  // > 0: search α to meet ‖Gc−b‖/‖b‖ ≤ target
};

struct TikhonovResult {
  Eigen::VectorXd c;
  double alpha = 0.0;
  double residual = 0.0;  // ‖Gc − b‖ / ‖b‖ (0 when b = 0)
  double energy = 0.0;    // ⟨c, Gc⟩, nonnegative for PSD G
};

/// Boundary-data assembly (all from traces; no medium handle anywhere).
/// The delayed family at ξ = l·Δ is delayed_family(l) of the basis; its
/// matrix is a principal block of the full-family one, which these
/// functions compute entry-for-entry identically.
GramMatrix gram_matrix(const TraceDataset& ds, double xi, int n_threads = 1);
RhsVector rhs_vector(const TraceDataset& ds, double xi, HarmonicTag tag);

/// Interior-oracle assembly from the snapshot block (pseudo-reconstruction
/// mode and brute-force cross-checks).  Needs the medium for the c⁻²
/// weight; the manifest hash must match.
Eigen::MatrixXd interior_gram(const TraceDataset& ds, const MediumField& medium,
                              const std::vector<int>& family, int n_threads = 1);
Eigen::VectorXd interior_rhs(const TraceDataset& ds, const MediumField& medium,
                             const std::vector<int>& family, HarmonicTag tag);

/// Solves (G + αI)c = b by Cholesky; reports residual against the
/// unshifted matrix.  With residual_target set, bisects log α to the
/// loosest α meeting the target.
TikhonovResult tikhonov_solve(const GramMatrix& G, const RhsVector& B,
                              const TikhonovOptions& opt);

/// ½·fold of the [0,2T] trace of control k, restricted to the γ-columns
/// inside [−L, L]: the response side of every pairing on σ × [0, T].
ControlFunction connecting_apply(const TraceDataset& ds, int k);

/// Amplitude samples on the (γ, ξ) grid: rows are delay values, columns
/// the boundary nodes inside [−L, L].
struct ImageField {
  HarmonicTag tag = HarmonicTag::unit;
  double gamma0 = 0.0;
  double dgamma = 0.0;
  int n_gamma = 0;
  double dxi = 0.0;  // row spacing Δ
  double xi0 = 0.0;  // depth of row 0: the evaluation window has its center
                     // half a step below the jump, and rows are labeled by
                     // the depth they actually probe
  int n_rows = 0;
  Eigen::MatrixXd a;  // (n_rows × n_gamma)
  // smoothing actually applied when the field was built
  double sigma_gamma = 0.0;
  double sigma_gamma_end = 0.0;
  double sigma_t = 0.0;

  double gamma(int ig) const { return gamma0 + ig * dgamma; }
  double xi(int l) const { return xi0 + l * dxi; }
};

/// Separable Gaussian convolution along both axes of the image grid with
/// reflective edges and discretely unit-mass kernels.  σ are in physical
/// units (γ and ξ respectively); zero widths are exact identities.
ImageField smooth_image(const ImageField& img, double sigma_gamma, double sigma_t);

struct ImagingOptions {
  double sigma_gamma = 0.0;      // series smoothing along γ
  double sigma_gamma_end = -1.0; // ramp endpoint near ξ = T (<0: no ramp)
  double ramp_fraction = 0.2;    // trailing fraction of [0, T] that ramps
  double sigma_t = 0.0;          // series smoothing along t
};

struct MapOptions {
  double floor_rel = 1e-2;            // cutoff = floor_rel · median |unit image|
  double max_invalid_fraction = 0.5;  // error beyond this
};

struct SpeedOptions {
  double splat_radius_cells = 2.0;  // Gaussian splat reach, in grid cells
  // Rows whose evaluation window ends within this many delay steps of the
  // series endpoint ring like a truncated Fourier sum near its jump; keep them
  // out of the derivative stencils (the map itself still reports them).
  int jump_guard_rows = 2;
};

struct ReconstructOptions {
  bool pseudo = false;           // interior-snapshot systems instead of trace ones
  TikhonovOptions tikhonov;
  ImagingOptions imaging;
  MapOptions map;
  SpeedOptions speed;
  double psd_tol = 1e-8;         // λ_min ≥ −psd_tol·λ_max required
  int n_threads = 1;
};

/// One row of the run report: the linear-system diagnostics at one delay.
struct XiRow {
  double xi = 0.0;
  int order = 0;
  double cond = 0.0;
  double lambda_min = 0.0;
  double lambda_max = 0.0;
  double cond_solve = 0.0;  // (λ_max+α)/(λ_min+α): conditioning of the solved system
  double cond_eq = 0.0;     // after symmetric diagonal equilibration D⁻½GD⁻½
  double sym_defect = 0.0;
  double alpha = 0.0;
  // per harmonic tag (unit, x1, x2):
  double residual[3] = {0, 0, 0};
  double energy[3] = {0, 0, 0};    // ⟨c, Gc⟩
  double proj_norm2[3] = {0, 0, 0};  // ⟨c, b⟩, monotone in ξ
};

struct SemiGeodesicMap {
  double gamma0 = 0.0, dgamma = 0.0;
  int n_gamma = 0;
  double dxi = 0.0;
  double xi0 = 0.0;  // depth of row 0, inherited from the images
  int n_rows = 0;
  Eigen::MatrixXd x1, x2;             // recovered positions (n_rows × n_gamma)
  Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> valid;
  double floor_used = 0.0;            // the |unit-image| cutoff applied

  double gamma(int ig) const { return gamma0 + ig * dgamma; }
  double xi(int l) const { return xi0 + l * dxi; }
};

SemiGeodesicMap recover_map(const ImageField& img_unit, const ImageField& img_x1,
                            const ImageField& img_x2, const MapOptions& opt);

struct SpeedMap {
  SemiGeodesicMap map;
  Eigen::MatrixXd c_ray;  // ‖∂x/∂ξ‖ on the (γ, ξ) grid; NaN where invalid
  Field2 c_cart;          // scattered-to-grid resampling; NaN outside coverage
  Field2 cart_valid;      // 1 where c_cart carries a value
};

/// Differentiates the map along ξ (central inside each contiguous valid
/// run, one-sided at its ends) and resamples the speed onto a Cartesian
/// grid by deterministic Gaussian splatting.
SpeedMap recover_speed(const SemiGeodesicMap& map, const Grid2& cart_grid,
                       const SpeedOptions& opt);

struct ReconstructionResult {
  ImageField img[3];      // indexed by HarmonicTag order: unit, x1, x2
  SemiGeodesicMap map;
  SpeedMap speed;
  std::vector<XiRow> table;
};

/// The full chain: per-delay systems → amplitude images → map → speed.
/// In pseudo mode the per-delay systems come from interior snapshots
/// (diagnostic; needs the matching medium), everything downstream is
/// shared.  The Cartesian resampling grid is the manifest grid.
ReconstructionResult reconstruct(const TraceDataset& ds,
                                 const ReconstructOptions& opt,
                                 const MediumField* pseudo_medium = nullptr);

/// Relative-error field |c_rec − c_true| / c_true on the Cartesian grid,
/// NaN where the speed map carries no value.
Field2 speed_error_cartesian(const SpeedMap& speed, const MediumField& medium);

/// Graph-style relative error on the ray grid: compares c_ray(γ,ξ) with
/// the true speed at the *recovered* position.  NaN where invalid.
Eigen::MatrixXd speed_error_ray(const SpeedMap& speed, const MediumField& medium);

}  // namespace bcm
