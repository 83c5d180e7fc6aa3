#pragma once

#include <vector>

#include "cvqkd/fock.hpp"

namespace cvqkd {

/// Hermitian matrix stored as its full list of nonzero entries (both triangles).
/// Constraint operators are Kronecker products with a one- or two-entry factor on the
/// key register, so they are very sparse on the joint space.
class SparseHermitian {
 public:
  struct Entry {
    int row;
    int col;
    Complex value;
  };

  SparseHermitian() = default;
  /// Drops entries with |value| <= drop_tol after symmetrizing.
  explicit SparseHermitian(const HermitianOperator& dense, double drop_tol = 0.0);

  /// (A (x) B) with A and B dense; zero products are dropped.
  static SparseHermitian kron(const CMatrix& a, const CMatrix& b);

  int dim() const { return dim_; }
  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t nonzeros() const { return entries_.size(); }

  HermitianOperator to_dense() const;
  /// Re Tr[this * m].
  double inner(const CMatrix& m) const;
  double inner(const HermitianOperator& m) const { return inner(m.matrix()); }
  double inner(const SparseHermitian& other) const;
  double frobenius_norm() const;
  /// m += s * this.
  void add_to(CMatrix& m, double s) const;
  SparseHermitian scaled(double s) const;

 private:
  int dim_ = 0;
  std::vector<Entry> entries_;
};

}  // namespace cvqkd
