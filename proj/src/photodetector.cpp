#include "autonomy/photodetector.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>

#include "autonomy/errors.hpp"

namespace autonomy {

long InstrumentParams::steps() const {
  if (!(dt > 0.0)) return 0;
  return std::lround(horizon / dt);
}

double InstrumentParams::step() const {
  const long s = steps();
  return s > 0 ? horizon / static_cast<double>(s) : dt;
}

void InstrumentParams::validate() const {
  if (!(kappa >= 0.0) || !std::isfinite(kappa)) throw DomainError("kappa must be finite and >= 0");
  if (!(dt > 0.0) || !std::isfinite(dt)) throw DomainError("dt must be finite and > 0");
  if (!(horizon >= 0.0) || !std::isfinite(horizon)) throw DomainError("horizon must be finite and >= 0");
  if (kappa * dt > 0.01) throw DomainError("kappa*dt must not exceed 0.01");
  if (dim < 2) throw InvalidDimension("dim must be >= 2");
}

double PoissonKOD::probability(int n) const {
  if (n < 0) return 0.0;
  if (lambda == 0.0) return n == 0 ? 1.0 : 0.0;
  return std::exp(-lambda + n * std::log(lambda) - std::lgamma(n + 1.0));
}

std::vector<double> PoissonKOD::pmf(int n_max) const {
  std::vector<double> p(static_cast<std::size_t>(n_max) + 1);
  for (int n = 0; n <= n_max; ++n) p[n] = probability(n);
  return p;
}

FockOperator kraus_jump(const InstrumentParams& p) {
  const double g = p.kappa * p.step();
  if (!(g >= 0.0)) throw DomainError("kraus_jump: kappa*dt must be >= 0");
  return Complex(std::sqrt(g)) * make_lowering(p.dim);
}

FockOperator kraus_no_jump(const InstrumentParams& p) { return number_exp(p.dim, 0.5 * p.kappa * p.step()); }

RecordReduction reduce_record(const PhotoRecord& rec, const InstrumentParams& p) {
  const double horizon = rec.horizon;
  if (std::abs(horizon - p.horizon) > 1e-12 * std::max(1.0, p.horizon)) {
    throw InvalidRecord("record horizon differs from instrument horizon");
  }
  const double step = p.step();
  RecordReduction out;
  double sum_times = 0.0;
  double previous = -1.0;
  for (double t : rec.jump_times) {
    if (!(t >= 0.0) || !(t < horizon)) throw InvalidRecord("jump time outside [0, T): " + std::to_string(t));
    if (!(t > previous)) throw InvalidRecord("jump times must be strictly increasing");
    const double index = t / step;
    if (std::abs(index - std::round(index)) > 1e-6) throw InvalidRecord("jump time off the step grid");
    previous = t;
    sum_times += t;
  }
  out.count = rec.count();
  out.weight = std::pow(p.kappa * step, out.count) * std::exp(-p.kappa * sum_times);
  return out;
}

double effective_mean(double horizon, double kappa) {
  if (!(horizon >= 0.0)) throw DomainError("effective_mean: negative horizon");
  return -std::expm1(-kappa * horizon);
}

PoissonKOD kod_poisson(double horizon, double kappa) { return PoissonKOD{effective_mean(horizon, kappa), {}}; }

PoissonKOD evolve_kod_poisson(double horizon, double kappa, int n_max, long steps, const PoissonObserver& observer) {
  if (steps < 100) throw DomainError("evolve_kod_poisson: steps must be >= 100");
  if (n_max < 30) throw InvalidDimension("evolve_kod_poisson: n_max must be >= 30");
  if (!(horizon >= 0.0)) throw DomainError("evolve_kod_poisson: negative horizon");

  const std::size_t len = static_cast<std::size_t>(n_max) + 1;
  std::vector<double> d(len, 0.0);
  d[0] = 1.0;
  const double h = horizon / static_cast<double>(steps);

  auto rhs = [&](double t, const std::vector<double>& x, std::vector<double>& out) {
    const double rate = screened_rate(t, kappa);
    out[0] = -rate * x[0];
    for (std::size_t n = 1; n + 1 < len; ++n) out[n] = rate * (x[n - 1] - x[n]);
    out[len - 1] = rate * x[len - 2];
  };

  std::vector<double> k1(len), k2(len), k3(len), k4(len), tmp(len);
  if (observer) observer(0, 0.0, d);
  for (long s = 0; s < steps; ++s) {
    const double t = static_cast<double>(s) * h;
    rhs(t, d, k1);
    for (std::size_t n = 0; n < len; ++n) tmp[n] = d[n] + 0.5 * h * k1[n];
    rhs(t + 0.5 * h, tmp, k2);
    for (std::size_t n = 0; n < len; ++n) tmp[n] = d[n] + 0.5 * h * k2[n];
    rhs(t + 0.5 * h, tmp, k3);
    for (std::size_t n = 0; n < len; ++n) tmp[n] = d[n] + h * k3[n];
    rhs(t + h, tmp, k4);
    for (std::size_t n = 0; n < len; ++n) d[n] += h / 6.0 * (k1[n] + 2.0 * k2[n] + 2.0 * k3[n] + k4[n]);
    if (observer) observer(s + 1, static_cast<double>(s + 1) * h, d);
  }
  if (d.back() > 1e-8) {
    throw TruncationError("evolve_kod_poisson: mass at n_max is " + std::to_string(d.back()));
  }
  return PoissonKOD{effective_mean(horizon, kappa), std::move(d)};
}

FockOperator lowering_power(int d, int n) {
  if (d < 2) throw InvalidDimension("lowering_power: d must be >= 2");
  if (n < 0) throw DomainError("lowering_power: negative power");
  Matrix m = Matrix::Zero(d, d);
  for (int col = n; col < d; ++col) {
    const double v = std::exp(0.5 * (std::lgamma(col + 1.0) - std::lgamma(col - n + 1.0)));
    m(col - n, col) = v;
  }
  return FockOperator(std::move(m));
}

FockOperator kraus_class(int n, double horizon, const InstrumentParams& p) {
  if (n < 0 || n >= p.dim) throw InvalidDimension("kraus_class: n must lie in [0, dim)");
  const double lambda = effective_mean(horizon, p.kappa);
  return Complex(std::exp(0.5 * lambda)) * (number_exp(p.dim, 0.5 * p.kappa * horizon) * lowering_power(p.dim, n));
}

FockOperator povm_element(int n, double horizon, const InstrumentParams& p) {
  const FockOperator k = kraus_class(n, horizon, p);
  return Complex(kod_poisson(horizon, p.kappa).probability(n)) * (k.adjoint() * k);
}

double projector_convergence(int n, double horizon, const InstrumentParams& p) {
  const int sub = safe_subblock(p.dim);
  if (n < 0 || n >= sub) throw InvalidDimension("projector_convergence: n must lie in the safe subblock");
  Matrix proj = Matrix::Zero(p.dim, p.dim);
  proj(n, n) = 1.0;
  return subblock_norm_diff(povm_element(n, horizon, p), FockOperator(std::move(proj)), sub);
}

double povm_completeness(double horizon, const InstrumentParams& p, int n_max, int sub) {
  FockOperator total = FockOperator::zero(p.dim);
  for (int n = 0; n <= std::min(n_max, p.dim - 1); ++n) total = total + povm_element(n, horizon, p);
  return subblock_norm_diff(total, FockOperator::identity(p.dim), sub);
}

double ostensible_weight(int n, const DensityOperator& rho, double horizon, const InstrumentParams& p) {
  if (n < 0) throw DomainError("ostensible_weight: negative count");
  if (n >= p.dim) return 0.0;
  const FockOperator k = kraus_class(n, horizon, p);
  return rho.expectation(k.adjoint() * k);
}

std::vector<double> born_pmf(const DensityOperator& rho, double horizon, const InstrumentParams& p) {
  if (rho.dim() != p.dim) throw InvalidDimension("born_pmf: state and instrument dimensions differ");
  const PoissonKOD kod = kod_poisson(horizon, p.kappa);
  std::vector<double> pmf(static_cast<std::size_t>(p.dim));
  for (int n = 0; n < p.dim; ++n) {
    const double v = kod.probability(n) * ostensible_weight(n, rho, horizon, p);
    if (v < -1e-10) throw NumericError("born_pmf: negative probability at n=" + std::to_string(n));
    pmf[n] = v;
  }
  return pmf;
}

const Vector& PureMixture::draw(SeededStream& rng) const {
  const double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t i = 0; i < states.size(); ++i) {
    acc += probabilities[i];
    if (u < acc) return states[i];
  }
  return states.back();
}

PureMixture decompose(const DensityOperator& rho) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(rho.matrix());
  if (solver.info() != Eigen::Success) throw NumericError("decompose: eigensolver failed");
  PureMixture mix;
  double total = 0.0;
  for (int i = static_cast<int>(solver.eigenvalues().size()) - 1; i >= 0; --i) {
    const double w = solver.eigenvalues()(i);
    if (w <= 1e-14) continue;
    mix.probabilities.push_back(w);
    mix.states.push_back(solver.eigenvectors().col(i));
    total += w;
  }
  if (mix.states.empty()) throw NumericError("decompose: state has no positive weight");
  for (double& w : mix.probabilities) w /= total;
  return mix;
}

PhotodetectorSampler::PhotodetectorSampler(const DensityOperator& rho, const InstrumentParams& p)
    : params_(p), mixture_(decompose(rho)) {
  params_.validate();
  if (rho.dim() != p.dim) throw InvalidDimension("sampler: state and instrument dimensions differ");
  const double step = params_.step();
  no_jump_diag_.resize(static_cast<std::size_t>(p.dim));
  for (int n = 0; n < p.dim; ++n) no_jump_diag_[n] = std::exp(-0.5 * n * params_.kappa * step);
}

PhotoRecord PhotodetectorSampler::sample(SeededStream& rng) const {
  Vector psi = mixture_.draw(rng);
  const long steps = params_.steps();
  const double step = params_.step();
  const double jump_scale = params_.kappa * step;

  int top = params_.dim - 1;
  while (top > 0 && psi(top) == Complex(0.0)) --top;

  PhotoRecord rec;
  rec.horizon = params_.horizon;
  for (long j = 0; j < steps; ++j) {
    double mean_n = 0.0;
    for (int n = 1; n <= top; ++n) mean_n += n * std::norm(psi(n));
    const double p_jump = jump_scale * mean_n;
    if (rng.uniform() < p_jump) {
      for (int n = 1; n <= top; ++n) psi(n - 1) = std::sqrt(static_cast<double>(n)) * psi(n);
      psi(top) = 0.0;
      if (top > 0) --top;
      rec.jump_times.push_back(static_cast<double>(j) * step);
    } else {
      for (int n = 1; n <= top; ++n) psi(n) *= no_jump_diag_[n];
    }
    const double norm = psi.head(top + 1).norm();
    if (!(norm >= 1e-14)) throw NumericError("sample_trajectory: state norm collapsed");
    psi.head(top + 1) /= norm;
  }
  return rec;
}

PhotoRecord sample_trajectory(const DensityOperator& rho, const InstrumentParams& p, SeededStream& rng) {
  return PhotodetectorSampler(rho, p).sample(rng);
}

int sample_ostensible(double horizon, double kappa, SeededStream& rng) {
  const double lambda = effective_mean(horizon, kappa);
  if (lambda == 0.0) return 0;
  const double u = rng.uniform();
  double term = std::exp(-lambda);
  double acc = term;
  int n = 0;
  while (u >= acc && n < 1000) {
    ++n;
    term *= lambda / n;
    acc += term;
  }
  return n;
}

}  // namespace autonomy
