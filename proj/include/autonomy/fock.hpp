#pragma once

// Truncated Fock-space operators, states and the handful of closed-form
// exponentials the instruments are built from. Everything is dense and
// double precision; the number basis |0>,...,|d-1> is the only basis.

#include <complex>
#include <Eigen/Dense>

namespace autonomy {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

inline constexpr int kDefaultDim = 40;
inline constexpr int kDefaultBuffer = 15;

/// Dense operator on the truncated number basis of dimension d.
class FockOperator {
 public:
  explicit FockOperator(Matrix entries);

  static FockOperator identity(int dim);
  static FockOperator zero(int dim);

  int dim() const { return static_cast<int>(entries_.rows()); }
  const Matrix& matrix() const { return entries_; }
  Complex operator()(int row, int col) const { return entries_(row, col); }

  FockOperator adjoint() const;
  Complex trace() const { return entries_.trace(); }

  friend FockOperator operator*(const FockOperator& a, const FockOperator& b);
  friend FockOperator operator+(const FockOperator& a, const FockOperator& b);
  friend FockOperator operator-(const FockOperator& a, const FockOperator& b);
  friend FockOperator operator*(Complex s, const FockOperator& a);

 private:
  Matrix entries_;
};

/// Probability amplitudes in the number basis.
class StateVector {
 public:
  explicit StateVector(Vector amplitudes);

  static StateVector number(int dim, int n);

  int dim() const { return static_cast<int>(amplitudes_.size()); }
  const Vector& amplitudes() const { return amplitudes_; }
  Complex operator[](int n) const { return amplitudes_(n); }
  double norm() const { return amplitudes_.norm(); }
  StateVector normalized() const;

  /// <this|other>
  Complex overlap(const StateVector& other) const;

 private:
  Vector amplitudes_;
};

StateVector operator*(const FockOperator& op, const StateVector& psi);

/// Density operator. Construction validates hermiticity (1e-12 max-entry),
/// unit trace (within `trace_tolerance`) and eigenvalues >= -1e-10.
class DensityOperator {
 public:
  explicit DensityOperator(Matrix entries, double trace_tolerance = 1e-8);

  static DensityOperator pure(const StateVector& psi);

  int dim() const { return static_cast<int>(entries_.rows()); }
  const Matrix& matrix() const { return entries_; }
  Complex trace() const { return entries_.trace(); }

  /// Re Tr(A rho)
  double expectation(const FockOperator& a) const;

 private:
  Matrix entries_;
};

/// (a)_{n-1,n} = sqrt(n). Requires d >= 2.
FockOperator make_lowering(int d);
FockOperator make_raising(int d);
FockOperator number_operator(int d);

/// diag(e^{-n r}), r >= 0.
FockOperator number_exp(int d, double r);

/// e^{a c}: the nilpotent series, exact in the truncated space.
FockOperator exp_lowering(int d, Complex c);

/// e^{a c} v by its series, without forming the matrix. Stops once a term
/// falls below 1e-18 of the running sum.
Vector apply_exp_lowering(Complex c, const Vector& v);

/// e^{a^dag c}, the lower-triangular counterpart of exp_lowering.
FockOperator exp_raising(int d, Complex c);

/// D_alpha = e^{-|alpha|^2/2} e^{a^dag alpha} e^{-a alpha*}.
///
/// Lower times upper triangular, so every entry is the exact infinite-space
/// matrix element up to rounding. The rounding grows like e^{|alpha|^2};
/// use displacement_block for |alpha| beyond about 1.5.
FockOperator displacement(int d, Complex alpha);

/// Exact matrix elements <k|D_alpha|n> for k < rows, n < cols, from the
/// associated-Laguerre closed form evaluated in log-magnitude. Stable for
/// large |alpha| and for rows far beyond |alpha|^2.
Matrix displacement_block(Complex alpha, int rows, int cols);

/// e^{-|alpha|^2/2} alpha^n / sqrt(n!)
StateVector coherent_state(int d, Complex alpha);

/// General exponential, scaling-and-squaring. Throws NumericError on overflow.
FockOperator matrix_exp(const FockOperator& a);

/// Spectral norm of an arbitrary (possibly rectangular) matrix.
double spectral_norm(const Matrix& m);

/// Spectral norm of the top-left sub x sub block of a - b.
double subblock_norm_diff(const FockOperator& a, const FockOperator& b, int sub);

/// d - n_buffer, the truncation-safe block size used for comparisons.
inline int safe_subblock(int d, int buffer = kDefaultBuffer) { return d - buffer; }

}  // namespace autonomy
