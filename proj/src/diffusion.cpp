#include "autonomy/diffusion.hpp"

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include <boost/math/tools/roots.hpp>

#include "autonomy/errors.hpp"

namespace autonomy {
namespace {

double trapezoid_weight(int i, int n) { return (i == 0 || i == n - 1) ? 0.5 : 1.0; }

/// Sampled 1D Gaussian e^{-x^2/s}, normalized to unit trapezoid mass.
std::vector<double> sampled_gaussian(double s, double h, double extent, int n) {
  std::vector<double> u(static_cast<std::size_t>(n));
  double mass = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = -extent + h * i;
    u[i] = std::exp(-x * x / s);
    mass += trapezoid_weight(i, n) * u[i];
  }
  for (double& v : u) v /= mass * h;
  return u;
}

double discrete_variance(const std::vector<double>& u, double h, double extent) {
  const int n = static_cast<int>(u.size());
  double m2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = -extent + h * i;
    m2 += trapezoid_weight(i, n) * u[i] * x * x;
  }
  return m2 * h;
}

/// Width parameter s whose sampled profile has discrete variance `target`.
double matched_width(double target, double h, double extent, int n) {
  auto f = [&](double s) { return discrete_variance(sampled_gaussian(s, h, extent, n), h, extent) - target; };
  double lo = 1e-8;
  double hi = std::max(4.0 * target, 1e-3);
  // A flat profile has variance extent^2 / 3; wider targets cannot be held.
  if (!(target < extent * extent / 3.0)) throw ExtentError("initial variance does not fit on the grid");
  while (f(hi) < 0.0) hi *= 2.0;
  boost::math::tools::eps_tolerance<double> tol(50);
  std::uintmax_t iters = 200;
  const auto [a, b] = boost::math::tools::toms748_solve(f, lo, hi, tol, iters);
  return 0.5 * (a + b);
}

/// (B - mu A) x = (B + mu A) y along one line, with B = I + delta^2/12 and
/// A = delta^2 (mirror ghost nodes at both ends). Thomas algorithm.
class LineSolver {
 public:
  LineSolver(int n) : n_(n), c_(n), rhs_(n) {}

  /// mu_impl, mu_expl are tau c / h^2 scaled parts of the implicit and explicit halves.
  void set(double mu_impl) {
    diag_ = 5.0 / 6.0 + 2.0 * mu_impl;
    off_ = 1.0 / 12.0 - mu_impl;
  }

  template <class Get, class Put>
  void solve(double mu_expl, Get get, Put put) {
    const double ed = 5.0 / 6.0 - 2.0 * mu_expl;
    const double eo = 1.0 / 12.0 + mu_expl;
    for (int i = 0; i < n_; ++i) {
      const double left = i > 0 ? get(i - 1) : get(1);
      const double right = i + 1 < n_ ? get(i + 1) : get(n_ - 2);
      rhs_[i] = ed * get(i) + eo * (left + right);
    }
    // Row 0 couples to x1 with 2*off_, row n-1 to x_{n-2} with 2*off_.
    double denom = diag_;
    c_[0] = 2.0 * off_ / denom;
    rhs_[0] /= denom;
    for (int i = 1; i < n_; ++i) {
      const double lower = (i == n_ - 1) ? 2.0 * off_ : off_;
      denom = diag_ - lower * c_[i - 1];
      c_[i] = off_ / denom;
      rhs_[i] = (rhs_[i] - lower * rhs_[i - 1]) / denom;
    }
    for (int i = n_ - 2; i >= 0; --i) rhs_[i] -= c_[i] * rhs_[i + 1];
    for (int i = 0; i < n_; ++i) put(i, rhs_[i]);
  }

 private:
  int n_;
  double diag_ = 1.0;
  double off_ = 0.0;
  std::vector<double> c_;
  std::vector<double> rhs_;
};

/// One factored step: along x then along y with (B - mu_i A)^{-1}(B + mu_e A).
void sweep(GridField& f, LineSolver& solver, double mu_impl, double mu_expl) {
  const int n = f.nodes;
  solver.set(mu_impl);
  for (int j = 0; j < n; ++j) {
    solver.solve(
        mu_expl, [&](int i) { return f.at(i, j); }, [&](int i, double v) { f.at(i, j) = v; });
  }
  for (int i = 0; i < n; ++i) {
    solver.solve(
        mu_expl, [&](int j) { return f.at(i, j); }, [&](int j, double v) { f.at(i, j) = v; });
  }
}

double wall_mass(const GridField& f) {
  const int n = f.nodes;
  double edge = 0.0;
  for (int k = 0; k < n; ++k) {
    edge += std::abs(f.at(0, k)) + std::abs(f.at(n - 1, k)) + std::abs(f.at(k, 0)) + std::abs(f.at(k, n - 1));
  }
  return edge * f.spacing * f.spacing / std::numbers::pi;
}

}  // namespace

GaussianKOD evolve_kod_diffusion(double horizon, double kappa, const DiffusionGrid& grid, long steps,
                                 const DiffusionSettings& settings, const GridObserver& observer) {
  if (!(horizon >= 0.0)) throw DomainError("evolve_kod_diffusion: negative horizon");
  if (!(kappa >= 0.0)) throw DomainError("evolve_kod_diffusion: negative kappa");
  if (!(grid.spacing > 0.0)) throw DomainError("evolve_kod_diffusion: spacing must be positive");
  if (grid.extent < 5.0) throw ExtentError("evolve_kod_diffusion: extent must be >= 5");
  if (steps < 1) throw DomainError("evolve_kod_diffusion: steps must be >= 1");
  if (!(settings.initial_variance > 0.0)) throw DomainError("evolve_kod_diffusion: initial variance must be > 0");

  const double h = grid.spacing;
  const int n = static_cast<int>(std::lround(2.0 * grid.extent / h)) + 1;
  GridField field;
  field.spacing = h;
  field.extent = grid.extent;
  field.nodes = n;
  field.values.assign(static_cast<std::size_t>(n) * n, 0.0);

  // Per axis the variance is half of E|zeta|^2.
  const double s = matched_width(0.5 * settings.initial_variance, h, grid.extent, n);
  const std::vector<double> u = sampled_gaussian(s, h, grid.extent, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) field.at(i, j) = std::numbers::pi * u[i] * u[j];
  }

  LineSolver solver(n);
  const double tau = horizon / static_cast<double>(steps);
  const double mass0 = field.mass();
  if (observer) observer(0, field);
  for (long k = 0; k < steps; ++k) {
    const double t = static_cast<double>(k) * tau;
    if (k < settings.startup_steps) {
      for (int half = 0; half < 2; ++half) {
        const double c = 0.25 * screened_rate(t + 0.25 * tau + 0.5 * half * tau, kappa);
        sweep(field, solver, 0.5 * tau * c / (h * h), 0.0);
      }
    } else {
      const double c = 0.25 * screened_rate(t + 0.5 * tau, kappa);
      const double mu = 0.5 * tau * c / (h * h);
      sweep(field, solver, mu, mu);
    }
    if (observer) observer(k + 1, field);
  }

  const double leak = wall_mass(field);
  if (leak > 1e-6 * mass0) {
    throw ExtentError("evolve_kod_diffusion: mass against the wall " + std::to_string(leak));
  }
  GaussianKOD kod = kod_gaussian(horizon, kappa);
  kod.grid = std::move(field);
  return kod;
}

double grid_max_error(const GridField& field, double variance) {
  double worst = 0.0;
  for (int i = 0; i < field.nodes; ++i) {
    for (int j = 0; j < field.nodes; ++j) {
      const double x = field.coord(i);
      const double y = field.coord(j);
      const double exact = std::exp(-(x * x + y * y) / variance) / variance;
      worst = std::max(worst, std::abs(field.at(i, j) - exact));
    }
  }
  return worst;
}

}  // namespace autonomy
