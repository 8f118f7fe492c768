#pragma once

// Direct photodetection as a continual instrument: step Kraus operators,
// reduction of a jump record to standard order, the Poisson Kraus-operator
// distribution (closed form and evolved), POVM elements, Born statistics
// and trajectory samplers.

#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <vector>

#include "autonomy/fock.hpp"
#include "autonomy/records.hpp"

namespace autonomy {

/// Observation rate, time step, horizon and truncation shared by both
/// instruments. Time is measured in units of 1/kappa by default.
struct InstrumentParams {
  double kappa = 1.0;
  double dt = 1e-3;
  double horizon = std::numbers::ln2;
  int dim = kDefaultDim;

  /// Number of grid steps covering [0, horizon): round(horizon / dt).
  long steps() const;
  /// Grid step actually used, horizon / steps(), so the grid ends exactly at
  /// the horizon. Equals dt when horizon is a multiple of dt.
  double step() const;
  /// Throws DomainError / InvalidDimension when out of range.
  void validate() const;
};

/// Jump times on the step grid (left endpoints), strictly increasing in [0, horizon).
struct PhotoRecord {
  std::vector<double> jump_times;
  double horizon = 0.0;

  int count() const { return static_cast<int>(jump_times.size()); }
};

struct RecordReduction {
  int count = 0;
  double weight = 1.0;
};

/// Poisson distribution over jump counts with mean lambda. `weights`, when
/// present, holds a numerically evolved counterpart over n = 0..n_max.
struct PoissonKOD {
  double lambda = 0.0;
  std::vector<double> weights;

  /// Closed form e^{-lambda} lambda^n / n!.
  double probability(int n) const;
  /// Closed form over n = 0..n_max.
  std::vector<double> pmf(int n_max) const;
};

/// K_1 = a sqrt(kappa dt), with dt the grid step.
FockOperator kraus_jump(const InstrumentParams& p);
/// K_0 = e^{-N kappa dt / 2}.
FockOperator kraus_no_jump(const InstrumentParams& p);

/// Jump count and weight (kappa dt)^n e^{-kappa (T_1 + ... + T_n)}: the
/// record's operation equals weight * O(e^{-N kappa T / 2} a^n).
RecordReduction reduce_record(const PhotoRecord& rec, const InstrumentParams& p);

/// lambda(T) = 1 - e^{-kappa T}
double effective_mean(double horizon, double kappa);

/// Screened rate kappa e^{-kappa t}.
inline double screened_rate(double t, double kappa) { return kappa * std::exp(-kappa * t); }

PoissonKOD kod_poisson(double horizon, double kappa);

using PoissonObserver = std::function<void(long step, double t, const std::vector<double>& weights)>;

/// Integrates dD(n)/dt = kappa(t) (D(n-1) - D(n)) from D_0 = delta_{n,0}
/// with classical RK4. The top level n_max only receives (reflecting).
/// Requires steps >= 100 and n_max >= 30; throws TruncationError when the
/// top level ends with more than 1e-8 of the mass.
PoissonKOD evolve_kod_poisson(double horizon, double kappa, int n_max, long steps,
                              const PoissonObserver& observer = {});

/// a^n as a matrix.
FockOperator lowering_power(int d, int n);

/// K_T(n) = e^{lambda/2} e^{-N kappa T / 2} a^n.
FockOperator kraus_class(int n, double horizon, const InstrumentParams& p);

/// E_T(n) = D_T(n) K_T(n)^dag K_T(n).
FockOperator povm_element(int n, double horizon, const InstrumentParams& p);

/// Spectral norm of E_T(n) - |n><n| on the safe subblock.
double projector_convergence(int n, double horizon, const InstrumentParams& p);

/// Defect of sum_{n <= n_max} E_T(n) from the identity on the `sub` block.
double povm_completeness(double horizon, const InstrumentParams& p, int n_max, int sub);

/// P(n | rho) = D_T(n) Tr(K_T(n)^dag K_T(n) rho) for n = 0..dim-1.
std::vector<double> born_pmf(const DensityOperator& rho, double horizon, const InstrumentParams& p);

/// Importance weight Tr(K_T(n)^dag K_T(n) rho) pairing the ostensible
/// Poisson law with the Born rule. Zero for n >= dim.
double ostensible_weight(int n, const DensityOperator& rho, double horizon, const InstrumentParams& p);

/// Eigen-decomposition of rho into pure components. Sampling a component
/// with its probability and then a record from that pure state reproduces
/// the record law of rho exactly.
struct PureMixture {
  std::vector<double> probabilities;
  std::vector<Vector> states;

  /// Picks a component with one uniform draw.
  const Vector& draw(SeededStream& rng) const;
};

PureMixture decompose(const DensityOperator& rho);

/// Sequential jump simulation (true statistics). At each grid step a jump
/// occurs with probability Tr(K_1^dag K_1 rho_t); the state is updated by
/// the selected Kraus operator and renormalized. Throws NumericError if the
/// state norm collapses below 1e-14.
class PhotodetectorSampler {
 public:
  PhotodetectorSampler(const DensityOperator& rho, const InstrumentParams& p);

  PhotoRecord sample(SeededStream& rng) const;

 private:
  InstrumentParams params_;
  PureMixture mixture_;
  std::vector<double> no_jump_diag_;
};

PhotoRecord sample_trajectory(const DensityOperator& rho, const InstrumentParams& p, SeededStream& rng);

/// Jump count drawn from the state-independent law D_T(n).
int sample_ostensible(double horizon, double kappa, SeededStream& rng);

}  // namespace autonomy
