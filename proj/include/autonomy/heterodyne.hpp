#pragma once

// Heterodyne detection as a continual instrument: Wiener-increment Kraus
// operators, the record functional, the Gaussian Kraus-operator
// distribution, POVM elements, Born densities and trajectory samplers.

#include <functional>
#include <optional>
#include <vector>

#include "autonomy/fock.hpp"
#include "autonomy/photodetector.hpp"
#include "autonomy/records.hpp"

namespace autonomy {

/// Complex Wiener increments on the grid t_j = j dt, j = 0..steps-1.
struct HeterodyneRecord {
  std::vector<Complex> increments;
  double dt = 0.0;
  double horizon = 0.0;
};

/// Square lattice on [-extent, extent]^2 holding a density against d^2 zeta / pi.
/// values(i, j) sits at x = coord(i), y = coord(j).
struct GridField {
  double spacing = 0.0;
  double extent = 0.0;
  int nodes = 0;
  std::vector<double> values;

  double coord(int i) const { return -extent + spacing * i; }
  double& at(int i, int j) { return values[static_cast<std::size_t>(i) * nodes + j]; }
  double at(int i, int j) const { return values[static_cast<std::size_t>(i) * nodes + j]; }
  /// Trapezoid integral against d^2 zeta / pi.
  double mass() const;
};

/// Complex Gaussian over zeta with E|zeta|^2 = sigma. At T = 0 the law is a
/// point mass at the origin and `delta` is set.
struct GaussianKOD {
  double sigma = 0.0;
  bool delta = false;
  std::optional<GridField> grid;

  /// (1/sigma) e^{-|zeta|^2/sigma}. Throws DomainError for the point mass.
  double density(Complex zeta) const;
};

/// E[dw] = 0, E|dw|^2 = dt, E[dw^2] = 0.
Complex wiener_increment(SeededStream& rng, double dt);

/// L(dw) = exp(-N kappa dt/2 + a sqrt(kappa) dw*), exponentiated as a whole.
FockOperator kraus_increment(Complex dw, const InstrumentParams& p);

/// zeta = sum_j sqrt(kappa) dw_j e^{-kappa t_j / 2}
Complex record_functional(const HeterodyneRecord& rec, double kappa);

/// nu = sum_j sqrt(kappa) dw_j e^{-kappa (T - t_j) / 2}, the end-weighted contrast.
Complex ou_functional(const HeterodyneRecord& rec, double kappa);

/// Sigma(T) = 1 - e^{-kappa T}
double effective_covariance(double horizon, double kappa);

GaussianKOD kod_gaussian(double horizon, double kappa);

/// K_T(zeta) = e^{-N kappa T / 2} e^{a zeta*}
FockOperator kraus_class_het(Complex zeta, double horizon, const InstrumentParams& p);

/// E_T(zeta) = D_T(zeta) K^dag K, a density against d^2 zeta / pi.
FockOperator povm_element_het(Complex zeta, double horizon, const InstrumentParams& p);

/// Defect of the Gauss-Hermite (order x order) integral of E_T(zeta) from the
/// identity on the `sub` block.
double povm_completeness_het(double horizon, const InstrumentParams& p, int order, int sub);

/// Spectral norm of E_T(zeta) - |zeta><zeta| on the safe subblock.
double het_projector_convergence(Complex zeta, double horizon, const InstrumentParams& p);

/// P(zeta | rho) = D_T(zeta) Tr(K^dag K rho)
double born_pdf(const DensityOperator& rho, Complex zeta, double horizon, const InstrumentParams& p);
double born_pdf(const StateVector& psi, Complex zeta, double horizon, const InstrumentParams& p);

/// ||K_T(zeta) psi||^2 for an unnormalized amplitude vector, in O(d^2).
double kraus_weight_het(Complex zeta, const Vector& psi, double horizon, const InstrumentParams& p);

/// Tr(K_T(zeta)^dag K_T(zeta) rho)
double ostensible_weight_het(Complex zeta, const DensityOperator& rho, double horizon, const InstrumentParams& p);

/// Called after every step with the number of steps applied so far and the
/// normalized state.
using StateObserver = std::function<void(long step, const Vector& psi)>;

/// Sequential diffusive simulation (true statistics). Each step draws
/// dw = sqrt(kappa) <a> dt + CN(dt) and applies L(dw), renormalized.
class HeterodyneSampler {
 public:
  HeterodyneSampler(const DensityOperator& rho, const InstrumentParams& p);

  HeterodyneRecord sample(SeededStream& rng, const StateObserver& observer = {}) const;

 private:
  InstrumentParams params_;
  PureMixture mixture_;
  std::vector<double> decay_;
  double shrink_ = 1.0;
};

HeterodyneRecord sample_het_trajectory(const DensityOperator& rho, const InstrumentParams& p, SeededStream& rng);

/// zeta drawn from D_T. Requires T > 0.
Complex sample_het_ostensible(double horizon, double kappa, SeededStream& rng);

}  // namespace autonomy
