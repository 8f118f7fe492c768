#include "autonomy/fock.hpp"

#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <boost/math/special_functions/laguerre.hpp>
#include <unsupported/Eigen/MatrixFunctions>

#include "autonomy/errors.hpp"

namespace autonomy {

namespace {

void require_dim(int d, int minimum = 1) {
  if (d < minimum) {
    throw InvalidDimension("dimension " + std::to_string(d) + " < " + std::to_string(minimum));
  }
}

}  // namespace

FockOperator::FockOperator(Matrix entries) : entries_(std::move(entries)) {
  if (entries_.rows() != entries_.cols() || entries_.rows() < 1) {
    throw InvalidDimension("operator matrix must be square and non-empty");
  }
}

FockOperator FockOperator::identity(int dim) {
  require_dim(dim);
  return FockOperator(Matrix::Identity(dim, dim));
}

FockOperator FockOperator::zero(int dim) {
  require_dim(dim);
  return FockOperator(Matrix::Zero(dim, dim));
}

FockOperator FockOperator::adjoint() const { return FockOperator(entries_.adjoint()); }

FockOperator operator*(const FockOperator& a, const FockOperator& b) {
  if (a.dim() != b.dim()) throw InvalidDimension("operator dimensions differ");
  return FockOperator(a.entries_ * b.entries_);
}

FockOperator operator+(const FockOperator& a, const FockOperator& b) {
  if (a.dim() != b.dim()) throw InvalidDimension("operator dimensions differ");
  return FockOperator(a.entries_ + b.entries_);
}

FockOperator operator-(const FockOperator& a, const FockOperator& b) {
  if (a.dim() != b.dim()) throw InvalidDimension("operator dimensions differ");
  return FockOperator(a.entries_ - b.entries_);
}

FockOperator operator*(Complex s, const FockOperator& a) { return FockOperator(s * a.entries_); }

StateVector::StateVector(Vector amplitudes) : amplitudes_(std::move(amplitudes)) {
  if (amplitudes_.size() < 1) throw InvalidDimension("state vector must be non-empty");
}

StateVector StateVector::number(int dim, int n) {
  require_dim(dim);
  if (n < 0 || n >= dim) throw InvalidDimension("number state |" + std::to_string(n) + "> outside truncation");
  Vector v = Vector::Zero(dim);
  v(n) = 1.0;
  return StateVector(std::move(v));
}

StateVector StateVector::normalized() const {
  const double nrm = norm();
  if (!(nrm > 0.0)) throw NumericError("cannot normalize a zero state");
  return StateVector(amplitudes_ / nrm);
}

Complex StateVector::overlap(const StateVector& other) const {
  if (dim() != other.dim()) throw InvalidDimension("state dimensions differ");
  return amplitudes_.dot(other.amplitudes_);
}

StateVector operator*(const FockOperator& op, const StateVector& psi) {
  if (op.dim() != psi.dim()) throw InvalidDimension("operator and state dimensions differ");
  return StateVector(op.matrix() * psi.amplitudes());
}

DensityOperator::DensityOperator(Matrix entries, double trace_tolerance) : entries_(std::move(entries)) {
  if (entries_.rows() != entries_.cols() || entries_.rows() < 1) {
    throw InvalidDimension("density matrix must be square and non-empty");
  }
  const double asym = (entries_ - entries_.adjoint()).cwiseAbs().maxCoeff();
  if (asym > 1e-12) throw DomainError("density matrix is not Hermitian (defect " + std::to_string(asym) + ")");
  const Complex tr = entries_.trace();
  if (std::abs(tr - 1.0) > trace_tolerance) {
    throw DomainError("density matrix trace " + std::to_string(tr.real()) + " is not 1");
  }
  const Matrix herm = 0.5 * (entries_ + entries_.adjoint());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(herm, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() < -1e-10) throw DomainError("density matrix has a negative eigenvalue");
}

DensityOperator DensityOperator::pure(const StateVector& psi) {
  return DensityOperator(psi.amplitudes() * psi.amplitudes().adjoint());
}

double DensityOperator::expectation(const FockOperator& a) const {
  if (a.dim() != dim()) throw InvalidDimension("operator and state dimensions differ");
  return (a.matrix() * entries_).trace().real();
}

FockOperator make_lowering(int d) {
  require_dim(d, 2);
  Matrix a = Matrix::Zero(d, d);
  for (int n = 1; n < d; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
  return FockOperator(std::move(a));
}

FockOperator make_raising(int d) { return make_lowering(d).adjoint(); }

FockOperator number_operator(int d) {
  require_dim(d);
  Matrix n = Matrix::Zero(d, d);
  for (int k = 0; k < d; ++k) n(k, k) = static_cast<double>(k);
  return FockOperator(std::move(n));
}

FockOperator number_exp(int d, double r) {
  require_dim(d);
  if (!std::isfinite(r)) throw DomainError("number_exp: rate must be finite");
  if (r < 0.0) throw DomainError("number_exp: negative rate (the instrument only contracts)");
  Matrix m = Matrix::Zero(d, d);
  for (int n = 0; n < d; ++n) m(n, n) = std::exp(-r * n);
  return FockOperator(std::move(m));
}

FockOperator exp_lowering(int d, Complex c) {
  require_dim(d);
  // (e^{ac})_{m,m+j} = c^j/j! sqrt((m+j)!/m!), built row by row.
  Matrix m = Matrix::Zero(d, d);
  for (int row = 0; row < d; ++row) {
    Complex entry = 1.0;
    m(row, row) = entry;
    for (int j = 1; row + j < d; ++j) {
      entry *= c * std::sqrt(static_cast<double>(row + j)) / static_cast<double>(j);
      m(row, row + j) = entry;
    }
  }
  return FockOperator(std::move(m));
}

Vector apply_exp_lowering(Complex c, const Vector& v) {
  const int d = static_cast<int>(v.size());
  Vector out = v;
  Vector term = v;
  Eigen::VectorXd root(d);
  for (int n = 0; n < d; ++n) root(n) = std::sqrt(static_cast<double>(n + 1));
  for (int k = 1; k < d; ++k) {
    const Complex f = c / static_cast<double>(k);
    const int len = d - k;
    for (int n = 0; n < len; ++n) term(n) = f * root(n) * term(n + 1);
    out.head(len) += term.head(len);
    const double t = term.head(len).squaredNorm();
    if (t == 0.0 || t < 1e-36 * out.squaredNorm()) break;
  }
  return out;
}

FockOperator exp_raising(int d, Complex c) { return exp_lowering(d, std::conj(c)).adjoint(); }

FockOperator displacement(int d, Complex alpha) {
  const double scale = std::exp(-0.5 * std::norm(alpha));
  return Complex(scale) * (exp_raising(d, alpha) * exp_lowering(d, -std::conj(alpha)));
}

Matrix displacement_block(Complex alpha, int rows, int cols) {
  require_dim(rows);
  require_dim(cols);
  Matrix block = Matrix::Zero(rows, cols);
  const double x = std::norm(alpha);
  if (x == 0.0) {
    for (int k = 0; k < std::min(rows, cols); ++k) block(k, k) = 1.0;
    return block;
  }
  const double log_mag = std::log(std::abs(alpha));
  const double phase = std::arg(alpha);
  // <k|D|n> = sqrt(n!/k!) alpha^{k-n} e^{-x/2} L_n^{(k-n)}(x)          k >= n
  //         = sqrt(k!/n!) (-alpha*)^{n-k} e^{-x/2} L_k^{(n-k)}(x)      k <  n
  for (int n = 0; n < cols; ++n) {
    for (int k = 0; k < rows; ++k) {
      const int lo = std::min(k, n);
      const int hi = std::max(k, n);
      const int gap = hi - lo;
      const double lm = 0.5 * (std::lgamma(lo + 1.0) - std::lgamma(hi + 1.0)) + gap * log_mag - 0.5 * x;
      const double poly = boost::math::laguerre(static_cast<unsigned>(lo), static_cast<unsigned>(gap), x);
      const double arg = k >= n ? gap * phase : gap * (M_PI - phase);
      block(k, n) = std::polar(std::exp(lm) * poly, arg);
    }
  }
  return block;
}

StateVector coherent_state(int d, Complex alpha) {
  require_dim(d);
  Vector v(d);
  Complex amp = std::exp(-0.5 * std::norm(alpha));
  v(0) = amp;
  for (int n = 1; n < d; ++n) {
    amp *= alpha / std::sqrt(static_cast<double>(n));
    v(n) = amp;
  }
  return StateVector(std::move(v));
}

FockOperator matrix_exp(const FockOperator& a) {
  if (!a.matrix().allFinite()) throw NumericError("matrix_exp: non-finite input");
  Matrix e = a.matrix().exp();
  if (!e.allFinite()) throw NumericError("matrix_exp: overflow");
  return FockOperator(std::move(e));
}

double spectral_norm(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues()(0);
}

double subblock_norm_diff(const FockOperator& a, const FockOperator& b, int sub) {
  if (sub < 1 || sub > a.dim() || sub > b.dim()) {
    throw InvalidDimension("subblock " + std::to_string(sub) + " exceeds operator dimension");
  }
  return spectral_norm(a.matrix().topLeftCorner(sub, sub) - b.matrix().topLeftCorner(sub, sub));
}

}  // namespace autonomy
