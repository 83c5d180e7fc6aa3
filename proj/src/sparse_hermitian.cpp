#include <cmath>
#include <map>
#include <utility>

#include "cvqkd/sparse.hpp"

namespace cvqkd {

SparseHermitian::SparseHermitian(const HermitianOperator& dense, double drop_tol) : dim_(dense.dim()) {
  const CMatrix& m = dense.matrix();
  for (int j = 0; j < dim_; ++j)
    for (int i = 0; i < dim_; ++i)
      if (std::abs(m(i, j)) > drop_tol) entries_.push_back({i, j, m(i, j)});
}

SparseHermitian SparseHermitian::kron(const CMatrix& a, const CMatrix& b) {
  const CMatrix full = cvqkd::kron(a, b);
  return SparseHermitian(HermitianOperator(full), 0.0);
}

HermitianOperator SparseHermitian::to_dense() const {
  CMatrix m = CMatrix::Zero(dim_, dim_);
  for (const auto& e : entries_) m(e.row, e.col) += e.value;
  return HermitianOperator(m);
}

double SparseHermitian::inner(const CMatrix& m) const {
  // Tr[A M] = sum_ij A_ij M_ji
  double acc = 0.0;
  for (const auto& e : entries_) acc += (e.value * m(e.col, e.row)).real();
  return acc;
}

double SparseHermitian::inner(const SparseHermitian& other) const {
  std::map<std::pair<int, int>, Complex> lookup;
  for (const auto& e : other.entries_) lookup[{e.row, e.col}] += e.value;
  double acc = 0.0;
  for (const auto& e : entries_) {
    auto it = lookup.find({e.col, e.row});
    if (it != lookup.end()) acc += (e.value * it->second).real();
  }
  return acc;
}

double SparseHermitian::frobenius_norm() const {
  double acc = 0.0;
  for (const auto& e : entries_) acc += std::norm(e.value);
  return std::sqrt(acc);
}

void SparseHermitian::add_to(CMatrix& m, double s) const {
  for (const auto& e : entries_) m(e.row, e.col) += s * e.value;
}

SparseHermitian SparseHermitian::scaled(double s) const {
  SparseHermitian out = *this;
  for (auto& e : out.entries_) e.value *= s;
  return out;
}

}  // namespace cvqkd
