#pragma once

#include <string>
#include <vector>

#include "bcm/medium.hpp"

namespace bcm {

/// Fan of rays shot from the boundary points (gamma, 0) straight down into
/// the medium, parameterized by travel time xi.  Columns are samples along
/// one ray; the chart also carries the geometric spreading J = |dx/dgamma|
/// across neighboring rays and the amplitude weight
/// beta = sqrt(kappa(gamma,0) * kappa(gamma,xi)), kappa = J/c.
struct RayChart {
  std::vector<double> gamma;  // n_g launch points on the boundary line
  std::vector<double> xi;     // n_xi travel-time samples, xi[0] == 0
  int n_g = 0;
  int n_xi = 0;

  // n_g * n_xi arrays, gamma-major: index(ig, k) = ig * n_xi + k
  std::vector<double> x1, x2, J, beta;
  std::vector<unsigned char> ok;  // 1 while the ray stays regular

  std::size_t idx(int ig, int k) const {
    return static_cast<std::size_t>(ig) * n_xi + k;
  }
};

struct RayTraceOptions {
  int n_xi = 257;            // samples along each ray (one RK4 step apart)
  double det_floor = 1e-3;   // fold detector: family is regular while the
                             // (gamma, xi) -> x Jacobian determinant stays
                             // below -det_floor
  double max_step_factor = 0.5;  // RK4 step must not exceed this fraction of
                                 // the medium's speed-variation length scale
};

/// Traces one ray per entry of gammas up to travel time xi_max.
/// Throws std::invalid_argument when the RK4 step is too coarse for the
/// medium; caustics and escaping rays are flagged via ok, not errors.
RayChart trace_rays(const MediumField& medium, const std::vector<double>& gammas,
                    double xi_max, const RayTraceOptions& opt = {});

/// Convenience: rays from every boundary node of the medium grid with
/// |x| <= L, traced to xi_max = T.
RayChart trace_chart(const MediumField& medium, const RayTraceOptions& opt = {});

/// 0/1 mask on `grid` of the region swept by the regular part of the chart.
Field2 tube_mask(const RayChart& chart, const Grid2& grid);

/// Flat CSV with one row per (gamma, xi) sample:
/// gamma,xi,x1,x2,J,beta,ok
void save_chart_csv(const RayChart& chart, const std::string& path);

}  // namespace bcm
