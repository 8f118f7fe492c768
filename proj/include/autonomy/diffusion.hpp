#pragma once

// Screened diffusion of the heterodyne Kraus-operator density on a square
// grid: dD/dt = (kappa(t)/4) (d_xx + d_yy) D with x = Re zeta, y = Im zeta.

#include <functional>

#include "autonomy/heterodyne.hpp"

namespace autonomy {

struct DiffusionGrid {
  double spacing = 0.05;
  double extent = 5.0;
};

struct DiffusionSettings {
  /// Variance E|zeta|^2 of the narrow Gaussian standing in for the point mass.
  double initial_variance = 1e-3;
  /// Leading steps taken as pairs of backward-Euler half steps to damp the
  /// unresolved initial spike.
  int startup_steps = 2;
};

using GridObserver = std::function<void(long step, const GridField& field)>;

/// Alternating-direction Crank-Nicolson with a compact fourth-order
/// Laplacian and mirror (zero-flux) walls; the trapezoid mass is conserved
/// exactly. The initial Gaussian width is tuned so its discrete variance is
/// exactly initial_variance. Requires extent >= 5; throws ExtentError when
/// more than 1e-6 of the mass sits against the wall.
GaussianKOD evolve_kod_diffusion(double horizon, double kappa, const DiffusionGrid& grid, long steps,
                                 const DiffusionSettings& settings = {}, const GridObserver& observer = {});

/// Max-norm distance from the grid to (1/s) e^{-|zeta|^2/s}.
double grid_max_error(const GridField& field, double variance);

}  // namespace autonomy
