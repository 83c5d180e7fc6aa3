#pragma once

// Truncated Fock-space linear algebra. Bob's mode lives on span{|0>, ..., |N_c>};
// joint operators are ordered A (x) B with A the key register.

#include <complex>

#include <Eigen/Dense>

namespace cvqkd {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RVector = Eigen::VectorXd;
using RMatrix = Eigen::MatrixXd;

/// Amplitudes <n|psi> for n = 0..N_c.
class FockVector {
 public:
  explicit FockVector(CVector amplitudes);

  int dim() const { return static_cast<int>(amps_.size()); }
  int n_cutoff() const { return dim() - 1; }
  Complex operator[](int n) const { return amps_(n); }
  const CVector& amplitudes() const { return amps_; }
  double squared_norm() const { return amps_.squaredNorm(); }

 private:
  CVector amps_;
};

/// Dense Hermitian matrix. Every constructor symmetrizes its input.
class HermitianOperator {
 public:
  HermitianOperator() = default;
  explicit HermitianOperator(const CMatrix& m);

  static HermitianOperator identity(int dim);
  static HermitianOperator zero(int dim);
  static HermitianOperator diagonal(const RVector& d);
  static HermitianOperator projector(const CVector& v);

  int dim() const { return static_cast<int>(m_.rows()); }
  const CMatrix& matrix() const { return m_; }
  Complex operator()(int i, int j) const { return m_(i, j); }

  double trace() const { return m_.diagonal().real().sum(); }
  /// Re Tr[this * other]; the Hilbert-Schmidt inner product on Hermitian matrices.
  double inner(const HermitianOperator& other) const;
  double expectation(const CVector& v) const;
  double frobenius_norm() const { return m_.norm(); }

  HermitianOperator operator+(const HermitianOperator& o) const;
  HermitianOperator operator-(const HermitianOperator& o) const;
  HermitianOperator operator*(double s) const;
  HermitianOperator& operator+=(const HermitianOperator& o);
  HermitianOperator& operator-=(const HermitianOperator& o);

 private:
  CMatrix m_;
};

inline HermitianOperator operator*(double s, const HermitianOperator& h) { return h * s; }

/// Eigenvalues sorted in descending order with matching unitary columns.
struct EigenDecomposition {
  RVector values;
  CMatrix vectors;

  CMatrix reconstruct() const;
};

EigenDecomposition hermitian_eig(const HermitianOperator& m);
EigenDecomposition hermitian_eig(const CMatrix& m);
double min_eigenvalue(const CMatrix& m);

inline constexpr double kDefaultLogFloor = 1e-14;

/// V diag(log2 max(lambda, floor)) V^dagger.
HermitianOperator matrix_log_clipped(const HermitianOperator& m, double floor = kDefaultLogFloor);

/// Square root of the PSD part; eigenvalues below zero are clipped to zero.
HermitianOperator matrix_sqrt_psd(const HermitianOperator& m);

FockVector coherent_state_fock(Complex alpha, int n_cutoff);

struct QuadratureOperators {
  CMatrix annihilation;
  HermitianOperator q;
  HermitianOperator p;
  HermitianOperator n;  // (q^2 + p^2 - 1) / 2
  HermitianOperator d;  // q^2 - p^2
};

/// q = (a + a^dagger)/sqrt(2), p = i(a^dagger - a)/sqrt(2), so <alpha|q|alpha> = sqrt(2) Re(alpha).
QuadratureOperators ladder_and_quadratures(int n_cutoff);

CMatrix kron(const CMatrix& a, const CMatrix& b);
HermitianOperator kron(const HermitianOperator& a, const HermitianOperator& b);

/// Tr_B of an operator on A (x) B.
HermitianOperator partial_trace_b(const HermitianOperator& m, int dim_a, int dim_b);
/// Tr_A of an operator on A (x) B.
HermitianOperator partial_trace_a(const HermitianOperator& m, int dim_a, int dim_b);

}  // namespace cvqkd
