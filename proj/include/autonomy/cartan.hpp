#pragma once

// Polar (Cartan) form of the heterodyne Kraus operators, the trace identity
// it implies, and the covariance-cooling law of the two amplitudes.

#include <cstddef>

#include "autonomy/fock.hpp"
#include "autonomy/photodetector.hpp"
#include "autonomy/records.hpp"

namespace autonomy {

/// e^{-N r} e^{a zeta*} = e^{scalar_log} D_beta e^{-N r} D_alpha^dag with
/// sigma_r = 1 - e^{-2r}, alpha = zeta / sigma_r, beta = e^{-r} alpha.
struct CartanCoordinates {
  Complex alpha;
  Complex beta;
  double scalar_log = 0.0;
  double r = 0.0;
  double sigma_r = 0.0;
};

/// Requires r > 0.
CartanCoordinates cartan_transform(Complex zeta, double r);

/// Spectral norm on the `sub` block of the two sides of the polar form.
///
/// The left side is built in dimension d, where it is exact. The right side
/// uses exact displacement matrix elements and sums the inner index far
/// enough that e^{-k r} has killed the e^{scalar_log} prefactor, so large
/// amplitudes at small r are represented faithfully.
double cartan_identity_defect(Complex zeta, double r, int d, int sub);

/// |Tr e^{-N kappa T} - 1/Sigma(T)| in dimension d.
double trace_identity_defect(double horizon, double kappa, int d);

/// Exact size of the discarded tail e^{-d kappa T} / (1 - e^{-kappa T}).
double trace_tail_bound(double horizon, double kappa, int d);

/// <alpha| e^{-N kappa T} |alpha> with a truncated coherent state.
double groundstate_integrand(Complex alpha, double horizon, double kappa, int d);

struct GroundstateQuadrature {
  double value = 0.0;
  double deviation = 0.0;  // |value - 1/Sigma|
  double truncation_leak = 0.0;
};

/// Gauss-Hermite integral of the groundstate integrand against d^2 alpha / pi,
/// with nodes scaled to the e^{-Sigma |alpha|^2} envelope. Throws ExtentError
/// if the nodes carrying weight reach amplitudes the truncation cannot hold
/// (estimated leak above 1e-8).
GroundstateQuadrature groundstate_completeness(double horizon, double kappa, int d, int order = 32);

struct CoolingEstimate {
  double alpha_sq = 0.0;  // mean |alpha|^2, expected 1/Sigma
  double beta_sq = 0.0;   // mean |beta|^2, expected 1/(e^{kappa T} - 1)
  std::size_t samples = 0;
};

/// Draws zeta ~ D_T and maps it through cartan_transform with r = kappa T / 2.
CoolingEstimate covariance_cooling(double horizon, double kappa, std::size_t samples, SeededStream& rng);

/// Spectral norm on the safe subblock of Sigma^2 E_T(Sigma alpha) - Sigma D_alpha e^{-N kappa T} D_alpha^dag.
double left_invariance_defect(Complex alpha, double horizon, const InstrumentParams& p);

}  // namespace autonomy
