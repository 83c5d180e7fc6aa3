#include "cvqkd/fock.hpp"

#include <cmath>
#include <string>

#include "cvqkd/errors.hpp"

namespace cvqkd {

namespace {

CMatrix symmetrize(const CMatrix& m) {
  if (m.rows() != m.cols()) {
    throw PreconditionError("HermitianOperator: matrix is " + std::to_string(m.rows()) + "x" +
                            std::to_string(m.cols()) + ", expected square");
  }
  CMatrix h = 0.5 * (m + m.adjoint());
  for (Eigen::Index i = 0; i < h.rows(); ++i) h(i, i) = Complex(h(i, i).real(), 0.0);
  return h;
}

}  // namespace

FockVector::FockVector(CVector amplitudes) : amps_(std::move(amplitudes)) {
  if (amps_.size() < 1) throw PreconditionError("FockVector: dimension must be >= 1");
}

HermitianOperator::HermitianOperator(const CMatrix& m) : m_(symmetrize(m)) {}

HermitianOperator HermitianOperator::identity(int dim) {
  return HermitianOperator(CMatrix::Identity(dim, dim));
}

HermitianOperator HermitianOperator::zero(int dim) {
  return HermitianOperator(CMatrix::Zero(dim, dim));
}

HermitianOperator HermitianOperator::diagonal(const RVector& d) {
  return HermitianOperator(CMatrix(d.cast<Complex>().asDiagonal()));
}

HermitianOperator HermitianOperator::projector(const CVector& v) {
  return HermitianOperator(CMatrix(v * v.adjoint()));
}

double HermitianOperator::inner(const HermitianOperator& other) const {
  if (other.dim() != dim()) throw PreconditionError("HermitianOperator::inner: dimension mismatch");
  // Tr[A B] = sum_ij A_ij B_ji = sum_ij A_ij conj(B_ij) for Hermitian B.
  return (m_.array() * other.m_.array().conjugate()).real().sum();
}

double HermitianOperator::expectation(const CVector& v) const {
  return (v.adjoint() * m_ * v)(0, 0).real();
}

HermitianOperator HermitianOperator::operator+(const HermitianOperator& o) const {
  HermitianOperator r = *this;
  r += o;
  return r;
}

HermitianOperator HermitianOperator::operator-(const HermitianOperator& o) const {
  HermitianOperator r = *this;
  r -= o;
  return r;
}

HermitianOperator HermitianOperator::operator*(double s) const {
  HermitianOperator r;
  r.m_ = m_ * s;
  return r;
}

HermitianOperator& HermitianOperator::operator+=(const HermitianOperator& o) {
  if (o.dim() != dim()) throw PreconditionError("HermitianOperator: dimension mismatch in +");
  m_ += o.m_;
  return *this;
}

HermitianOperator& HermitianOperator::operator-=(const HermitianOperator& o) {
  if (o.dim() != dim()) throw PreconditionError("HermitianOperator: dimension mismatch in -");
  m_ -= o.m_;
  return *this;
}

CMatrix EigenDecomposition::reconstruct() const {
  return vectors * values.cast<Complex>().asDiagonal() * vectors.adjoint();
}

EigenDecomposition hermitian_eig(const CMatrix& m) {
  if (m.rows() != m.cols()) throw PreconditionError("hermitian_eig: matrix must be square");
  Eigen::SelfAdjointEigenSolver<CMatrix> solver(m);
  if (solver.info() != Eigen::Success) {
    // Eigen's QL iteration gives up after 30 sweeps per dimension.
    throw NumericalError("hermitian_eig: QL iteration did not converge within " +
                         std::to_string(30 * m.rows()) + " iterations (dim " +
                         std::to_string(m.rows()) + ")");
  }
  EigenDecomposition out;
  out.values = solver.eigenvalues().reverse();
  out.vectors = solver.eigenvectors().rowwise().reverse();
  return out;
}

EigenDecomposition hermitian_eig(const HermitianOperator& m) { return hermitian_eig(m.matrix()); }

double min_eigenvalue(const CMatrix& m) {
  Eigen::SelfAdjointEigenSolver<CMatrix> solver(m, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw NumericalError("min_eigenvalue: eigensolver failed");
  return solver.eigenvalues()(0);
}

HermitianOperator matrix_log_clipped(const HermitianOperator& m, double floor) {
  if (!(floor > 0.0)) throw PreconditionError("matrix_log_clipped: floor must be positive");
  const auto eig = hermitian_eig(m);
  RVector logs = eig.values.unaryExpr([floor](double v) { return std::log2(std::max(v, floor)); });
  return HermitianOperator(CMatrix(eig.vectors * logs.cast<Complex>().asDiagonal() *
                                   eig.vectors.adjoint()));
}

HermitianOperator matrix_sqrt_psd(const HermitianOperator& m) {
  const auto eig = hermitian_eig(m);
  RVector roots = eig.values.unaryExpr([](double v) { return std::sqrt(std::max(v, 0.0)); });
  return HermitianOperator(CMatrix(eig.vectors * roots.cast<Complex>().asDiagonal() *
                                   eig.vectors.adjoint()));
}

FockVector coherent_state_fock(Complex alpha, int n_cutoff) {
  if (n_cutoff < 0) throw PreconditionError("coherent_state_fock: n_cutoff must be >= 0");
  CVector c(n_cutoff + 1);
  c(0) = std::exp(-0.5 * std::norm(alpha));
  for (int n = 0; n < n_cutoff; ++n) c(n + 1) = c(n) * alpha / std::sqrt(static_cast<double>(n + 1));
  return FockVector(std::move(c));
}

QuadratureOperators ladder_and_quadratures(int n_cutoff) {
  if (n_cutoff < 1) throw PreconditionError("ladder_and_quadratures: n_cutoff must be >= 1");
  const int dim = n_cutoff + 1;
  CMatrix a = CMatrix::Zero(dim, dim);
  for (int n = 1; n < dim; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
  const CMatrix ad = a.adjoint();
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  const CMatrix q = (a + ad) * inv_sqrt2;
  const CMatrix p = Complex(0.0, 1.0) * (ad - a) * inv_sqrt2;
  const CMatrix q2 = q * q;
  const CMatrix p2 = p * p;
  const CMatrix id = CMatrix::Identity(dim, dim);
  return QuadratureOperators{a, HermitianOperator(q), HermitianOperator(p),
                             HermitianOperator(CMatrix(0.5 * (q2 + p2 - id))),
                             HermitianOperator(CMatrix(q2 - p2))};
}

CMatrix kron(const CMatrix& a, const CMatrix& b) {
  CMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

HermitianOperator kron(const HermitianOperator& a, const HermitianOperator& b) {
  return HermitianOperator(kron(a.matrix(), b.matrix()));
}

namespace {

void check_joint(const HermitianOperator& m, int dim_a, int dim_b, const char* who) {
  if (dim_a < 1 || dim_b < 1 || m.dim() != dim_a * dim_b) {
    throw PreconditionError(std::string(who) + ": operator of dimension " + std::to_string(m.dim()) +
                            " is not on a " + std::to_string(dim_a) + "x" + std::to_string(dim_b) +
                            " joint space");
  }
}

}  // namespace

HermitianOperator partial_trace_b(const HermitianOperator& m, int dim_a, int dim_b) {
  check_joint(m, dim_a, dim_b, "partial_trace_b");
  CMatrix out(dim_a, dim_a);
  for (int i = 0; i < dim_a; ++i)
    for (int j = 0; j < dim_a; ++j) out(i, j) = m.matrix().block(i * dim_b, j * dim_b, dim_b, dim_b).trace();
  return HermitianOperator(out);
}

HermitianOperator partial_trace_a(const HermitianOperator& m, int dim_a, int dim_b) {
  check_joint(m, dim_a, dim_b, "partial_trace_a");
  CMatrix out = CMatrix::Zero(dim_b, dim_b);
  for (int i = 0; i < dim_a; ++i) out += m.matrix().block(i * dim_b, i * dim_b, dim_b, dim_b);
  return HermitianOperator(out);
}

}  // namespace cvqkd
