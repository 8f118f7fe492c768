#include "autonomy/cartan.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <boost/math/special_functions/gamma.hpp>

#include "autonomy/errors.hpp"
#include "autonomy/heterodyne.hpp"
#include "autonomy/quadrature.hpp"

namespace autonomy {

CartanCoordinates cartan_transform(Complex zeta, double r) {
  if (!(r > 0.0) || !std::isfinite(r)) throw DomainError("cartan_transform: r must be positive");
  CartanCoordinates c;
  c.r = r;
  c.sigma_r = -std::expm1(-2.0 * r);
  c.alpha = zeta / c.sigma_r;
  c.beta = std::exp(-r) * c.alpha;
  c.scalar_log = std::norm(zeta) / (2.0 * c.sigma_r);
  return c;
}

double cartan_identity_defect(Complex zeta, double r, int d, int sub) {
  if (sub < 1 || sub > d) throw InvalidDimension("cartan_identity_defect: bad subblock");
  const CartanCoordinates c = cartan_transform(zeta, r);
  const Matrix lhs = (number_exp(d, r) * exp_lowering(d, std::conj(zeta))).matrix().topLeftCorner(sub, sub);

  const int inner = std::max(d, static_cast<int>(std::ceil((c.scalar_log + 40.0) / r)));
  // <m|D_beta|k> = conj(<k|D_{-beta}|m>); tall blocks keep the Laguerre degree low.
  const Matrix left = displacement_block(-c.beta, inner, sub).adjoint();
  const Matrix right = displacement_block(-c.alpha, inner, sub);
  Eigen::VectorXd diag(inner);
  for (int k = 0; k < inner; ++k) diag(k) = std::exp(c.scalar_log - k * r);
  const Matrix rhs = left * diag.asDiagonal() * right;
  return spectral_norm(lhs - rhs);
}

double trace_identity_defect(double horizon, double kappa, int d) {
  if (!(horizon > 0.0)) throw DomainError("trace_identity_defect: horizon must be positive");
  const FockOperator decay = number_exp(d, kappa * horizon);
  double trace = 0.0;
  for (int n = d - 1; n >= 0; --n) trace += decay(n, n).real();
  return std::abs(trace - 1.0 / effective_covariance(horizon, kappa));
}

double trace_tail_bound(double horizon, double kappa, int d) {
  return std::exp(-d * kappa * horizon) / effective_covariance(horizon, kappa);
}

double groundstate_integrand(Complex alpha, double horizon, double kappa, int d) {
  const StateVector psi = coherent_state(d, alpha);
  return psi.overlap(number_exp(d, kappa * horizon) * psi).real();
}

GroundstateQuadrature groundstate_completeness(double horizon, double kappa, int d, int order) {
  const double sigma = effective_covariance(horizon, kappa);
  if (!(sigma > 0.0)) throw DomainError("groundstate_completeness: horizon must be positive");
  const QuadratureRule rule = gauss_hermite(order);
  const double scale = 1.0 / std::sqrt(sigma);
  const double damping = std::exp(-kappa * horizon);

  GroundstateQuadrature out;
  for (int i = 0; i < order; ++i) {
    for (int j = 0; j < order; ++j) {
      const double u = rule.nodes[i];
      const double v = rule.nodes[j];
      const double w = rule.weights[i] * rule.weights[j] / (std::numbers::pi * sigma);
      const Complex alpha(scale * u, scale * v);
      out.value += w * groundstate_integrand(alpha, horizon, kappa, d) * std::exp(u * u + v * v);
      // Missing part of the integrand relative to its envelope: P(Poisson(mu) >= d).
      const double mu = std::norm(alpha) * damping;
      out.truncation_leak += w * boost::math::gamma_p(static_cast<double>(d), mu);
    }
  }
  if (out.truncation_leak > 1e-8) {
    throw ExtentError("groundstate_completeness: quadrature nodes exceed the truncation (leak " +
                      std::to_string(out.truncation_leak) + ")");
  }
  out.deviation = std::abs(out.value - 1.0 / sigma);
  return out;
}

CoolingEstimate covariance_cooling(double horizon, double kappa, std::size_t samples, SeededStream& rng) {
  if (!(horizon > 0.0)) throw DomainError("covariance_cooling: horizon must be positive");
  if (samples == 0) throw DataError("covariance_cooling: no samples requested");
  const double r = 0.5 * kappa * horizon;
  CoolingEstimate est;
  est.samples = samples;
  for (std::size_t s = 0; s < samples; ++s) {
    const CartanCoordinates c = cartan_transform(sample_het_ostensible(horizon, kappa, rng), r);
    est.alpha_sq += std::norm(c.alpha);
    est.beta_sq += std::norm(c.beta);
  }
  est.alpha_sq /= static_cast<double>(samples);
  est.beta_sq /= static_cast<double>(samples);
  return est;
}

double left_invariance_defect(Complex alpha, double horizon, const InstrumentParams& p) {
  const double sigma = effective_covariance(horizon, p.kappa);
  const int sub = safe_subblock(p.dim);
  const Matrix lhs = (sigma * sigma) * povm_element_het(sigma * alpha, horizon, p).matrix().topLeftCorner(sub, sub);

  const double rate = p.kappa * horizon;
  const int inner = std::max(p.dim, static_cast<int>(std::ceil(40.0 / rate)) + sub);
  const Matrix block = displacement_block(alpha, sub, inner);
  Eigen::VectorXd diag(inner);
  for (int k = 0; k < inner; ++k) diag(k) = std::exp(-k * rate);
  const Matrix rhs = sigma * (block * diag.asDiagonal() * block.adjoint());
  return spectral_norm(lhs - rhs);
}

}  // namespace autonomy
