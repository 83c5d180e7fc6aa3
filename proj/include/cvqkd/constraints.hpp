#pragma once

#include <string>
#include <vector>

#include "cvqkd/sparse.hpp"

namespace cvqkd {

/// One linear constraint Tr[op * rho] = value.
struct ConstraintRow {
  SparseHermitian op;
  double value = 0.0;
  std::string label;
};

/// The feasible set { rho >= 0 : Tr[Gamma_i rho] = gamma_i for all i }.
struct ConstraintSet {
  int dim = 0;
  std::vector<ConstraintRow> rows;
  /// Coefficients c with sum_i c_i Gamma_i = identity, or empty when no such combination is
  /// known. Used to shift dual points back into the PSD cone.
  std::vector<double> identity_combination;

  std::size_t size() const { return rows.size(); }
  RVector residuals(const HermitianOperator& rho) const;
  double max_residual(const HermitianOperator& rho) const;
  RVector values() const;
};

}  // namespace cvqkd
