#include "autonomy/heterodyne.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "autonomy/errors.hpp"
#include "autonomy/quadrature.hpp"

namespace autonomy {

double GridField::mass() const {
  double total = 0.0;
  for (int i = 0; i < nodes; ++i) {
    const double wi = (i == 0 || i == nodes - 1) ? 0.5 : 1.0;
    for (int j = 0; j < nodes; ++j) {
      const double wj = (j == 0 || j == nodes - 1) ? 0.5 : 1.0;
      total += wi * wj * at(i, j);
    }
  }
  return total * spacing * spacing / std::numbers::pi;
}

double GaussianKOD::density(Complex zeta) const {
  if (delta || !(sigma > 0.0)) throw DomainError("GaussianKOD: point mass has no density");
  return std::exp(-std::norm(zeta) / sigma) / sigma;
}

Complex wiener_increment(SeededStream& rng, double dt) {
  if (!(dt > 0.0)) throw DomainError("wiener_increment: dt must be positive");
  return rng.complex_normal(dt);
}

FockOperator kraus_increment(Complex dw, const InstrumentParams& p) {
  const double step = p.step();
  const FockOperator gen = Complex(-0.5 * p.kappa * step) * number_operator(p.dim) +
                           Complex(std::sqrt(p.kappa)) * std::conj(dw) * make_lowering(p.dim);
  return matrix_exp(gen);
}

namespace {

void check_record(const HeterodyneRecord& rec) {
  if (!(rec.dt > 0.0)) throw InvalidRecord("heterodyne record: dt must be positive");
  const long expected = std::lround(rec.horizon / rec.dt);
  if (static_cast<long>(rec.increments.size()) != expected) {
    throw InvalidRecord("heterodyne record: length " + std::to_string(rec.increments.size()) + " != T/dt = " +
                        std::to_string(expected));
  }
  for (const auto& dw : rec.increments) {
    if (!std::isfinite(dw.real()) || !std::isfinite(dw.imag())) throw InvalidRecord("non-finite increment");
  }
}

}  // namespace

Complex record_functional(const HeterodyneRecord& rec, double kappa) {
  check_record(rec);
  const double sk = std::sqrt(kappa);
  Complex zeta{};
  for (std::size_t j = 0; j < rec.increments.size(); ++j) {
    zeta += sk * rec.increments[j] * std::exp(-0.5 * kappa * static_cast<double>(j) * rec.dt);
  }
  return zeta;
}

Complex ou_functional(const HeterodyneRecord& rec, double kappa) {
  check_record(rec);
  const double sk = std::sqrt(kappa);
  Complex nu{};
  for (std::size_t j = 0; j < rec.increments.size(); ++j) {
    const double t = static_cast<double>(j) * rec.dt;
    nu += sk * rec.increments[j] * std::exp(-0.5 * kappa * (rec.horizon - t));
  }
  return nu;
}

double effective_covariance(double horizon, double kappa) {
  if (!(horizon >= 0.0)) throw DomainError("effective_covariance: negative horizon");
  return -std::expm1(-kappa * horizon);
}

GaussianKOD kod_gaussian(double horizon, double kappa) {
  GaussianKOD kod;
  kod.sigma = effective_covariance(horizon, kappa);
  kod.delta = !(kod.sigma > 0.0);
  return kod;
}

FockOperator kraus_class_het(Complex zeta, double horizon, const InstrumentParams& p) {
  return number_exp(p.dim, 0.5 * p.kappa * horizon) * exp_lowering(p.dim, std::conj(zeta));
}

FockOperator povm_element_het(Complex zeta, double horizon, const InstrumentParams& p) {
  const FockOperator k = kraus_class_het(zeta, horizon, p);
  return Complex(kod_gaussian(horizon, p.kappa).density(zeta)) * (k.adjoint() * k);
}

double povm_completeness_het(double horizon, const InstrumentParams& p, int order, int sub) {
  const double sigma = effective_covariance(horizon, p.kappa);
  if (!(sigma > 0.0)) throw DomainError("povm_completeness_het: horizon must be positive");
  const QuadratureRule rule = gauss_hermite(order);
  const double scale = std::sqrt(sigma);
  // zeta = sqrt(Sigma)(u + iv): D_T d^2zeta/pi = e^{-u^2-v^2} du dv / pi.
  Matrix total = Matrix::Zero(p.dim, p.dim);
  for (int i = 0; i < order; ++i) {
    for (int j = 0; j < order; ++j) {
      const Complex zeta(scale * rule.nodes[i], scale * rule.nodes[j]);
      const FockOperator k = kraus_class_het(zeta, horizon, p);
      total += (rule.weights[i] * rule.weights[j] / std::numbers::pi) * (k.adjoint() * k).matrix();
    }
  }
  return subblock_norm_diff(FockOperator(std::move(total)), FockOperator::identity(p.dim), sub);
}

double het_projector_convergence(Complex zeta, double horizon, const InstrumentParams& p) {
  const Vector v = coherent_state(p.dim, zeta).amplitudes();
  const FockOperator proj(v * v.adjoint());
  return subblock_norm_diff(povm_element_het(zeta, horizon, p), proj, safe_subblock(p.dim));
}

double ostensible_weight_het(Complex zeta, const DensityOperator& rho, double horizon, const InstrumentParams& p) {
  const FockOperator k = kraus_class_het(zeta, horizon, p);
  return rho.expectation(k.adjoint() * k);
}

double born_pdf(const DensityOperator& rho, Complex zeta, double horizon, const InstrumentParams& p) {
  if (rho.dim() != p.dim) throw InvalidDimension("born_pdf: state and instrument dimensions differ");
  return kod_gaussian(horizon, p.kappa).density(zeta) * ostensible_weight_het(zeta, rho, horizon, p);
}

double born_pdf(const StateVector& psi, Complex zeta, double horizon, const InstrumentParams& p) {
  if (psi.dim() != p.dim) throw InvalidDimension("born_pdf: state and instrument dimensions differ");
  return kod_gaussian(horizon, p.kappa).density(zeta) * kraus_weight_het(zeta, psi.amplitudes(), horizon, p);
}

double kraus_weight_het(Complex zeta, const Vector& psi, double horizon, const InstrumentParams& p) {
  const Vector out = apply_exp_lowering(std::conj(zeta), psi);
  const double r = p.kappa * horizon;
  double w = 0.0;
  for (int n = 0; n < out.size(); ++n) w += std::exp(-r * n) * std::norm(out(n));
  return w;
}

HeterodyneSampler::HeterodyneSampler(const DensityOperator& rho, const InstrumentParams& p)
    : params_(p), mixture_(decompose(rho)) {
  params_.validate();
  if (rho.dim() != p.dim) throw InvalidDimension("sampler: state and instrument dimensions differ");
  const double r = 0.5 * params_.kappa * params_.step();
  decay_.resize(static_cast<std::size_t>(p.dim));
  for (int n = 0; n < p.dim; ++n) decay_[n] = std::exp(-r * n);
  // exp(-N r + a c) = e^{-N r} e^{a c (1 - e^{-r}) / r}
  shrink_ = r > 0.0 ? -std::expm1(-r) / r : 1.0;
}

HeterodyneRecord HeterodyneSampler::sample(SeededStream& rng, const StateObserver& observer) const {
  const int d = params_.dim;
  Vector psi = mixture_.draw(rng);
  const long steps = params_.steps();
  const double step = params_.step();
  const double sk = std::sqrt(params_.kappa);

  std::vector<double> sqrt_n(static_cast<std::size_t>(d));
  for (int n = 0; n < d; ++n) sqrt_n[n] = std::sqrt(static_cast<double>(n));

  HeterodyneRecord rec;
  rec.dt = step;
  rec.horizon = params_.horizon;
  rec.increments.reserve(static_cast<std::size_t>(steps));

  Vector next(d);
  for (long j = 0; j < steps; ++j) {
    Complex mean_a{};
    for (int n = 1; n < d; ++n) mean_a += sqrt_n[n] * std::conj(psi(n - 1)) * psi(n);
    const Complex dw = sk * mean_a * step + rng.complex_normal(step);
    rec.increments.push_back(dw);

    next = apply_exp_lowering(sk * std::conj(dw) * shrink_, psi);
    for (int n = 0; n < d; ++n) next(n) *= decay_[n];
    const double norm = next.norm();
    if (!(norm >= 1e-14)) throw NumericError("sample_het_trajectory: state norm collapsed");
    psi = next / norm;
    if (observer) observer(j + 1, psi);
  }
  return rec;
}

HeterodyneRecord sample_het_trajectory(const DensityOperator& rho, const InstrumentParams& p, SeededStream& rng) {
  return HeterodyneSampler(rho, p).sample(rng);
}

Complex sample_het_ostensible(double horizon, double kappa, SeededStream& rng) {
  if (!(horizon > 0.0)) throw DomainError("sample_het_ostensible: horizon must be positive");
  return rng.complex_normal(effective_covariance(horizon, kappa));
}

}  // namespace autonomy
