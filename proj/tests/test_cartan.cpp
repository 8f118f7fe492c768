#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>

#include "autonomy/cartan.hpp"
#include "autonomy/errors.hpp"
#include "autonomy/heterodyne.hpp"
#include "oracles.hpp"

using namespace autonomy;

namespace {

constexpr double kLn2 = std::numbers::ln2;

oracle::Matrix decay(int d, double r) {
  oracle::Matrix m = oracle::Matrix::Zero(d, d);
  for (int n = 0; n < d; ++n) m(n, n) = std::exp(-r * n);
  return m;
}

// exp(alpha a^dag - alpha* a) by scaling and squaring of the power series.
oracle::Matrix dense_displacement(int d, Complex alpha) {
  const oracle::Matrix a = oracle::lowering(d);
  const oracle::Matrix gen = alpha * a.adjoint() - std::conj(alpha) * a;
  const int halvings = 8;
  oracle::Matrix m = oracle::series_exp(gen / std::pow(2.0, halvings));
  for (int k = 0; k < halvings; ++k) m = m * m;
  return m;
}

// e^{-N r} e^{a zeta*}
oracle::Matrix polar_left(int d, Complex zeta, double r) {
  return decay(d, r) * oracle::series_exp(std::conj(zeta) * oracle::lowering(d));
}

}  // namespace

TEST_CASE("polar coordinates") {
  const CartanCoordinates zero = cartan_transform(0.0, 0.5);
  CHECK(zero.alpha == Complex(0.0));
  CHECK(zero.beta == Complex(0.0));
  CHECK(zero.scalar_log == 0.0);

  const CartanCoordinates c = cartan_transform(1.0, kLn2);
  CHECK(std::abs(c.sigma_r - 0.75) < 1e-15);
  CHECK(std::abs(c.alpha - 4.0 / 3.0) < 1e-15);
  CHECK(std::abs(c.beta - 2.0 / 3.0) < 1e-15);
  CHECK(std::abs(c.scalar_log - 2.0 / 3.0) < 1e-15);

  const Complex zeta(0.3, -1.1);
  const CartanCoordinates far = cartan_transform(zeta, 40.0);
  CHECK(std::abs(far.alpha - zeta) < 1e-15);
  CHECK(std::abs(far.beta) < 1e-15);

  CHECK_THROWS_AS(cartan_transform(1.0, 0.0), DomainError);
  CHECK_THROWS_AS(cartan_transform(1.0, -0.1), DomainError);
}

TEST_CASE("polar form against dense exponentials") {
  const int big = 120, sub = 20;
  for (auto [zeta, r] : {std::pair{Complex(1.0, 0.5), 0.7}, std::pair{Complex(-0.4, 0.9), 1.5},
                         std::pair{Complex(0.2, 0.0), 0.3}}) {
    const CartanCoordinates c = cartan_transform(zeta, r);
    CHECK(std::abs(c.scalar_log - std::norm(zeta) / (2.0 * (1.0 - std::exp(-2.0 * r)))) < 1e-14);
    const oracle::Matrix left = polar_left(big, zeta, r);
    const oracle::Matrix right =
        std::exp(c.scalar_log) * dense_displacement(big, c.beta) * decay(big, r) * dense_displacement(big, c.alpha).adjoint();
    CHECK(oracle::spectral((left - right).topLeftCorner(sub, sub)) < 1e-9);
    CHECK(cartan_identity_defect(zeta, r, 40, sub) < 1e-9);
  }
}

TEST_CASE("polar identity defect") {
  CHECK(cartan_identity_defect(0.0, 0.7, 40, 20) < 1e-14);
  const double base = cartan_identity_defect(Complex(1.0, 0.5), 0.7, 40, 20);
  CHECK(base < 1e-9);
  SeededStream rng(1, 0);
  for (int k = 0; k < 20; ++k) {
    const double theta = 2.0 * std::numbers::pi * rng.uniform();
    const double rotated = cartan_identity_defect(std::polar(1.0, theta) * Complex(1.0, 0.5), 0.7, 40, 20);
    CHECK(std::abs(rotated - base) < 1e-10);
  }
  double worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    const double rad = 2.0 * std::sqrt(rng.uniform());
    const Complex zeta = std::polar(rad, 2.0 * std::numbers::pi * rng.uniform());
    const double r = 0.1 + 2.9 * rng.uniform();
    worst = std::max(worst, cartan_identity_defect(zeta, r, 40, 20));
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("trace identity") {
  constexpr double eps = std::numeric_limits<double>::epsilon();
  const double tail = trace_tail_bound(kLn2, 1.0, 50);
  CHECK(std::abs(tail / std::pow(2.0, -49) - 1.0) < 1e-14);
  CHECK(trace_identity_defect(kLn2, 1.0, 50) <= tail + 8.0 * eps * 2.0);

  // kappa T = 1, d = 40: the tail sits below double resolution of 1/Sigma.
  const double sigma = 1.0 - std::exp(-1.0);
  CHECK(trace_identity_defect(1.0, 1.0, 40) <= trace_tail_bound(1.0, 1.0, 40) + 8.0 * eps / sigma);

  // Where the tail is resolvable it is the whole defect.
  for (int d : {20, 30, 40}) {
    const double defect = trace_identity_defect(0.1, 1.0, d);
    CHECK(std::abs(defect / trace_tail_bound(0.1, 1.0, d) - 1.0) < 1e-10);
    CHECK(trace_identity_defect(0.1, 1.0, d + 10) <= defect * std::exp(-1.0) * (1.0 + 1e-10));
  }
}

TEST_CASE("groundstate completeness") {
  CHECK(std::abs(groundstate_integrand(0.0, kLn2, 1.0, 40) - 1.0) < 1e-15);
  SeededStream rng(2, 0);
  for (int k = 0; k < 50; ++k) {
    const Complex alpha = std::polar(2.0 * rng.uniform(), 2.0 * std::numbers::pi * rng.uniform());
    CHECK(std::abs(groundstate_integrand(alpha, kLn2, 1.0, 40) - std::exp(-0.5 * std::norm(alpha))) < 1e-10);
  }
  const GroundstateQuadrature q = groundstate_completeness(kLn2, 1.0, 40);
  CHECK(std::abs(q.value - 2.0) < 1e-6);
  CHECK(q.deviation < 1e-6);
  CHECK(q.truncation_leak <= 1e-8);
  CHECK(groundstate_completeness(1.0, 1.0, 40).deviation < 1e-6);
  CHECK_THROWS_AS(groundstate_completeness(kLn2, 1.0, 4), ExtentError);
}

TEST_CASE("covariance cooling") {
  SeededStream rng(3, 0);
  const CoolingEstimate est = covariance_cooling(kLn2, 1.0, 100000, rng);
  CHECK(est.samples == 100000);
  CHECK(std::abs(est.alpha_sq / 2.0 - 1.0) < 0.03);
  CHECK(std::abs(est.beta_sq - 1.0) < 0.03);
  CHECK(std::abs(est.beta_sq - 0.5 * est.alpha_sq) < 1e-12 * est.alpha_sq);

  for (double kt : {0.5, 2.0, 4.0}) {
    const CoolingEstimate e = covariance_cooling(kt, 1.0, 100000, rng);
    CHECK(std::abs(e.beta_sq * std::expm1(kt) - 1.0) < 0.03);
  }
  CHECK(covariance_cooling(20.0, 1.0, 10000, rng).beta_sq < 1e-6);
}

TEST_CASE("left invariance") {
  InstrumentParams p;
  p.horizon = 1.0;
  const double kt = 1.0;
  const double sigma = 1.0 - std::exp(-kt);
  const int big = 120, sub = safe_subblock(40);
  for (Complex alpha : {Complex(0.0), Complex(0.6, -0.3), Complex(-1.2, 0.8)}) {
    // Sigma^2 E_T(Sigma alpha) written out from the Kraus class.
    const Complex zeta = sigma * alpha;
    const oracle::Matrix k = polar_left(big, zeta, kt / 2);
    const oracle::Matrix lhs = sigma * std::exp(-std::norm(zeta) / sigma) * (k.adjoint() * k);
    const oracle::Matrix d = dense_displacement(big, alpha);
    const oracle::Matrix rhs = sigma * d * decay(big, kt) * d.adjoint();
    CHECK(oracle::spectral((lhs - rhs).topLeftCorner(sub, sub)) < 1e-8);
    CHECK(left_invariance_defect(alpha, 1.0, p) < 1e-8);
  }
  SeededStream rng(4, 0);
  for (int n = 0; n < 20; ++n) {
    const Complex alpha = std::polar(1.5 * rng.uniform(), 2.0 * std::numbers::pi * rng.uniform());
    CHECK(left_invariance_defect(alpha, 1.0, p) < 1e-8);
  }
}
