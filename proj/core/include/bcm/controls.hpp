#pragma once

#include <string>
#include <vector>

namespace bcm {

/// Spatial families for boundary controls f_k(γ,t) = φ_l(γ)·ψ_m(t),
/// k = l + m·N_γ.  Spatial profiles are defined in normalized coordinates
/// (the segment [-L, L] maps affinely to [-1, 1]); the temporal part is a
/// train of smooth tent pulses of width 2Δ, Δ = T/N_t.
enum class SpatialFamily { trig_cutoff, tent };

struct BasisSpec {
  SpatialFamily family = SpatialFamily::trig_cutoff;
  int n_gamma = 16;
  int n_t = 16;
  double s = 1.0 / 32;      // cutoff scale of the trig family (normalized)
  double d_divisor = 64.0;  // temporal smoothing d = Δ/d_divisor; tent spatial
                            // smoothing uses the same divisor on its spacing
  double eps_offset = 1e-4; // temporal offset δ = 2d·ln(1/eps_offset)
};

/// Smooth tent pulse of support [0, 2Δ] peaking near t = Δ (exponentially
/// small tails outside).  As d → 0 it approaches the unit triangle.
double theta_eval(double t, double Delta, double d);

/// Cutoff-trigonometric spatial profile on normalized γ:
/// η(γ-1)·η(-γ-1)·cos[π(l/2 + ⌊(l+1)/2⌋(γ-1))], η(γ) = 1/(1+exp(γ/s)).
double spatial_basis_eval(int l, double gamma, double s);

/// Tent spatial profile l of n_gamma on normalized γ: shifted theta pulses
/// with spacing Δ_s = 2/(n_gamma+1), smoothing Δ_s/d_divisor; all supports
/// lie inside [-1, 1].
double tent_basis_eval(int l, double gamma, int n_gamma, double d_divisor);

/// ψ_m(t) = θ(t − mΔ − δ).
double temporal_basis_eval(int m, double t, double Delta, double d, double delta);

struct ControlBasis {
  BasisSpec spec;
  double T = 1.0;
  double L = 1.0;
  double Delta = 0.0;  // T / n_t
  double d = 0.0;      // Delta / d_divisor
  double delta = 0.0;  // temporal offset
  double support_half_width = 0.0;  // physical half-width of spatial support

  int n() const { return spec.n_gamma * spec.n_t; }
  int spatial_index(int k) const { return k % spec.n_gamma; }
  int temporal_index(int k) const { return k / spec.n_gamma; }

  double eval_spatial(int l, double gamma_phys) const;
  double eval_temporal(int m, double t) const;
  double eval(int k, double gamma_phys, double t) const;

  /// Basis indices forming the delayed family at ξ = l_steps·Δ: temporal
  /// index m ≥ n_t − l_steps (their supports fit [T−ξ, T]).  Size
  /// n_gamma·l_steps; empty for l_steps = 0.
  std::vector<int> delayed_family(int l_steps) const;
};

/// Validates the spec and precomputes derived scales.  Asserts the
/// admissibility bounds: every ψ_m vanishes at t = 0 below 1e-6 and spatial
/// profiles vanish at the support-strip edge below 1e-8.
ControlBasis make_basis(const BasisSpec& spec, double T, double L);

/// Control samples on a (γ, t) grid: γ-major, time index fastest.
/// The γ grid is the solver's boundary strip; dt matches the solver step.
struct ControlFunction {
  int control_id = -1;   // basis index, or -1 for ad hoc data
  double xi_tag = -1.0;  // delay tag ξ when shifted; < 0 when undelayed
  double gamma0 = 0.0;
  double dgamma = 0.0;
  int n_gamma = 0;
  double dt = 0.0;
  int n_t = 0;  // samples per node; horizon = (n_t-1)·dt
  std::vector<double> v;

  double horizon() const { return dt * (n_t - 1); }
  double at(int ig, int it) const {
    return v[static_cast<std::size_t>(ig) * n_t + it];
  }
  double& at(int ig, int it) {
    return v[static_cast<std::size_t>(ig) * n_t + it];
  }
  double gamma(int ig) const { return gamma0 + ig * dgamma; }
  double max_abs() const;
};

/// Samples basis control k on the given grid; t runs over n_t samples from 0.
ControlFunction sample_control(const ControlBasis& basis, int k, double gamma0,
                               double dgamma, int n_gamma, double dt, int n_t);

/// f(γ, t − (T−ξ)), zero-padded at the front, truncated at the horizon.
/// (T−ξ)/dt must be an integer (grid alignment); samples carrying more than
/// 1e-6 of the control's peak must not be pushed past the horizon.
ControlFunction delayed_control(const ControlFunction& f, double xi, double T);

/// S^T: extends samples on [0,T] to [0,2T] by oddness about t = T.  The t=T
/// sample is set to 0 (midpoint of the one-sided limits), which makes the
/// adjoint identities below exact on aligned grids.
ControlFunction odd_extend(const ControlFunction& f);

/// J: cumulative trapezoid integral in t on the same grid.
ControlFunction time_integrate(const ControlFunction& f);

/// (S^T)*: folds samples on [0,2T] back to [0,T]: g(t) − g(2T−t).
/// Satisfies ⟨S^T f, g⟩_[0,2T] = ⟨f, fold_adjoint(g)⟩_[0,T] exactly and
/// fold_adjoint(S^T f) = 2f for f vanishing at t = T.
ControlFunction fold_adjoint(const ControlFunction& g);

/// Trapezoid inner product over the common (γ,t) grid (grids must agree).
double control_inner(const ControlFunction& a, const ControlFunction& b);

/// Smallest singular value of the N×N Gram of basis controls in
/// L₂(strip×[0,T]), computed from the separable 1-D Grams on fine
/// quadrature grids.  Records grid-scale linear independence.
double basis_min_singular_value(const ControlBasis& basis, int n_quad = 2001);

}  // namespace bcm
