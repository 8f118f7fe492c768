#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "autonomy/errors.hpp"
#include "autonomy/fock.hpp"
#include "oracles.hpp"

using namespace autonomy;

TEST_CASE("lowering operator entries") {
  const FockOperator a2 = make_lowering(2);
  CHECK(a2(0, 1) == Complex(1.0));
  CHECK(a2(0, 0) == Complex(0.0));
  CHECK(a2(1, 0) == Complex(0.0));
  CHECK(a2(1, 1) == Complex(0.0));

  const FockOperator a = make_lowering(12);
  CHECK((a.matrix() - oracle::lowering(12)).norm() == 0.0);
  const StateVector out = a * StateVector::number(12, 0);
  CHECK(out.norm() == 0.0);
  CHECK_THROWS_AS(make_lowering(1), InvalidDimension);
}

TEST_CASE("commutator exposes the truncation") {
  for (int d : {2, 3, 8, 17, 40}) {
    const Matrix a = oracle::lowering(d);
    const Matrix comm = a * a.adjoint() - a.adjoint() * a;
    Matrix expect = Matrix::Identity(d, d);
    expect(d - 1, d - 1) = -(d - 1.0);
    CHECK((comm - expect).cwiseAbs().maxCoeff() < 1e-12);
    const FockOperator la = make_lowering(d);
    CHECK(((la * la.adjoint() - la.adjoint() * la).matrix() - expect).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("number exponential") {
  CHECK((number_exp(7, 0.0).matrix() - Matrix::Identity(7, 7)).norm() == 0.0);
  const FockOperator e = number_exp(3, std::numbers::ln2);
  CHECK(std::abs(e(0, 0) - 1.0) < 1e-15);
  CHECK(std::abs(e(1, 1) - 0.5) < 1e-15);
  CHECK(std::abs(e(2, 2) - 0.25) < 1e-15);
  double partial = 0.0;
  for (int n = 0; n < 50; ++n) partial += std::pow(0.5, n);
  CHECK(std::abs(number_exp(50, std::numbers::ln2).trace().real() - partial) < 1e-12);
  CHECK(std::abs(partial - (2.0 - std::pow(2.0, -49))) < 1e-15);
  CHECK_THROWS_AS(number_exp(5, -0.1), DomainError);
  CHECK_THROWS_AS(number_exp(5, std::nan("")), DomainError);
}

TEST_CASE("number exponential is a diagonal semigroup") {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  for (int k = 0; k < 50; ++k) {
    const double r1 = u(gen), r2 = u(gen);
    const int d = 2 + static_cast<int>(gen() % 40);
    const Matrix lhs = (number_exp(d, r1) * number_exp(d, r2)).matrix();
    const Matrix rhs = number_exp(d, r1 + r2).matrix();
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 4e-16);
  }
}

TEST_CASE("exp of the lowering operator") {
  CHECK((exp_lowering(9, 0.0).matrix() - Matrix::Identity(9, 9)).norm() == 0.0);
  const FockOperator e2 = exp_lowering(2, 0.3);
  CHECK(std::abs(e2(0, 1) - 0.3) < 1e-16);
  CHECK(std::abs(e2(0, 0) - 1.0) < 1e-16);
  CHECK(std::abs(e2(1, 0)) == 0.0);

  const Complex c(0.4, -0.2);
  const Matrix series = oracle::series_exp(oracle::lowering(30) * c);
  CHECK((exp_lowering(30, c).matrix() - series).cwiseAbs().maxCoeff() < 1e-12);

  // Eigenrelation e^{ac}|alpha> = e^{c alpha}|alpha> on the first 20 amplitudes.
  const Complex alpha = 0.5;
  const StateVector psi = coherent_state(40, alpha);
  const StateVector out = exp_lowering(40, 0.4) * psi;
  const Complex factor = std::exp(0.4 * alpha);
  for (int n = 0; n < 20; ++n) CHECK(std::abs(out[n] - factor * psi[n]) < 1e-10);
}

TEST_CASE("exp of the lowering operator is an abelian group") {
  std::mt19937_64 gen(5);
  std::normal_distribution<double> g(0.0, 0.6);
  for (int k = 0; k < 40; ++k) {
    const Complex c1(g(gen), g(gen)), c2(g(gen), g(gen));
    const Matrix lhs = (exp_lowering(40, c1) * exp_lowering(40, c2)).matrix();
    const Matrix rhs = exp_lowering(40, c1 + c2).matrix();
    CHECK(oracle::spectral(lhs - rhs) < 1e-12 * std::max(1.0, oracle::spectral(rhs)));
  }
}

TEST_CASE("amplitude renormalization identities hold exactly under truncation") {
  std::mt19937_64 gen(2024);
  std::uniform_real_distribution<double> ur(0.0, 4.0);
  std::uniform_real_distribution<double> uc(-0.7, 0.7);
  for (int d : {2, 5, 40}) {
    const FockOperator a = make_lowering(d);
    for (int k = 0; k < 30; ++k) {
      const double r = ur(gen);
      const Complex c(uc(gen), uc(gen));
      const FockOperator e = number_exp(d, r);
      CHECK(oracle::spectral((a * e).matrix() - std::exp(-r) * (e * a).matrix()) < 1e-14);
      CHECK(subblock_norm_diff(exp_lowering(d, c) * e, e * exp_lowering(d, c * std::exp(-r)), d) < 1e-12);
    }
  }
}

TEST_CASE("displacement and coherent states") {
  CHECK((displacement(20, 0.0).matrix() - Matrix::Identity(20, 20)).norm() < 1e-15);
  const Complex alpha = 1.0;
  const StateVector out = displacement(40, alpha) * StateVector::number(40, 0);
  const Eigen::VectorXcd ref = oracle::coherent(40, alpha);
  CHECK((out.amplitudes() - ref).cwiseAbs().maxCoeff() < 1e-10);

  const FockOperator dop = displacement(40, alpha);
  CHECK(subblock_norm_diff(dop.adjoint() * dop, FockOperator::identity(40), 20) < 1e-8);

  CHECK((coherent_state(10, 0.0).amplitudes() - StateVector::number(10, 0).amplitudes()).norm() == 0.0);
  CHECK(std::abs(coherent_state(40, 1.0).norm() - 1.0) < 1e-12);

  const Complex a(0.5, 0.0), b(0.0, 0.5);
  const Complex expect = std::exp(-0.5 * std::norm(a) - 0.5 * std::norm(b) + std::conj(a) * b);
  CHECK(std::abs(coherent_state(40, a).overlap(coherent_state(40, b)) - expect) < 1e-10);
}

TEST_CASE("displacement routes agree") {
  std::mt19937_64 gen(9);
  std::uniform_real_distribution<double> u(-0.9, 0.9);
  for (int k = 0; k < 20; ++k) {
    const Complex alpha(u(gen), u(gen));
    const Matrix block = displacement_block(alpha, 20, 20);
    const Matrix dense = displacement(40, alpha).matrix().topLeftCorner(20, 20);
    CHECK((block - dense).cwiseAbs().maxCoeff() < 1e-12);
    // Oracle: exponential of the anti-Hermitian generator in a roomy space.
    const int big = 90;
    const Matrix a = oracle::lowering(big);
    const Matrix gen_m = a.adjoint() * alpha - a * std::conj(alpha);
    const Matrix ref = oracle::series_exp(gen_m, 200).topLeftCorner(20, 20);
    CHECK((block - ref).cwiseAbs().maxCoeff() < 1e-11);
  }
  // Large amplitudes stay unitary in the block route.
  const Complex big_alpha(3.0, -2.0);
  const Matrix tall = displacement_block(big_alpha, 160, 10);
  CHECK((tall.adjoint() * tall - Matrix::Identity(10, 10)).cwiseAbs().maxCoeff() < 1e-11);
}

TEST_CASE("matrix exponential") {
  CHECK((matrix_exp(FockOperator::zero(6)).matrix() - Matrix::Identity(6, 6)).norm() < 1e-15);
  Matrix diag = Matrix::Zero(4, 4);
  diag.diagonal() << Complex(0.5, 0.0), Complex(-1.0, 0.3), Complex(2.0, 0.0), Complex(0.0, -1.0);
  const Matrix e = matrix_exp(FockOperator(diag)).matrix();
  for (int i = 0; i < 4; ++i) CHECK(std::abs(e(i, i) - std::exp(diag(i, i))) < 1e-13 * std::abs(std::exp(diag(i, i))));

  const FockOperator gen = Complex(-0.7) * number_operator(30);
  CHECK((matrix_exp(gen).matrix() - number_exp(30, 0.7).matrix()).cwiseAbs().maxCoeff() < 1e-12);

  Matrix huge = Matrix::Zero(3, 3);
  huge(0, 0) = 1e4;
  CHECK_THROWS_AS(matrix_exp(FockOperator(huge)), NumericError);
}

TEST_CASE("subblock comparison") {
  const FockOperator a = FockOperator::identity(5);
  CHECK(subblock_norm_diff(a, a, 5) == 0.0);
  CHECK(std::abs(subblock_norm_diff(a, FockOperator::zero(5), 3) - 1.0) < 1e-15);
  Matrix x = Matrix::Zero(3, 3), y = Matrix::Zero(3, 3);
  x.diagonal() << 1.0, 2.0, 3.0;
  y.diagonal() << 1.0, 2.0, 0.0;
  CHECK(subblock_norm_diff(FockOperator(x), FockOperator(y), 2) == 0.0);
  CHECK_THROWS_AS(subblock_norm_diff(a, a, 6), InvalidDimension);
  CHECK(safe_subblock(40) == 25);
}

TEST_CASE("density operator validation") {
  const DensityOperator rho = DensityOperator::pure(coherent_state(30, Complex(0.3, 0.1)).normalized());
  CHECK(std::abs(rho.trace() - 1.0) < 1e-12);
  Matrix bad = Matrix::Zero(3, 3);
  bad(0, 0) = 1.0;
  bad(0, 1) = 0.5;
  CHECK_THROWS(DensityOperator(bad));
  Matrix neg = Matrix::Zero(2, 2);
  neg(0, 0) = 1.5;
  neg(1, 1) = -0.5;
  CHECK_THROWS(DensityOperator(neg));
}
