#include "cvqkd/constraints.hpp"

#include "cvqkd/errors.hpp"

namespace cvqkd {

RVector ConstraintSet::residuals(const HermitianOperator& rho) const {
  if (rho.dim() != dim) throw PreconditionError("ConstraintSet::residuals: dimension mismatch");
  RVector r(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) r(i) = rows[i].op.inner(rho) - rows[i].value;
  return r;
}

double ConstraintSet::max_residual(const HermitianOperator& rho) const {
  return rows.empty() ? 0.0 : residuals(rho).cwiseAbs().maxCoeff();
}

RVector ConstraintSet::values() const {
  RVector v(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) v(i) = rows[i].value;
  return v;
}

}  // namespace cvqkd
