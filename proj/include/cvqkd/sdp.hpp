#pragma once

// Dense primal-dual interior-point solver for linear conic problems over one Hermitian PSD
// block and one nonnegative orthant:
//
//   minimize   Re Tr[C X] + c_lp . x
//   subject to Re Tr[A_i X] + a_i . x = b_i,   X >= 0,  x >= 0
//
// with dual  maximize b . y  s.t.  C - sum_i y_i A_i = S >= 0,  c_lp - sum_i y_i a_i = s >= 0.

#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cvqkd/constraints.hpp"
#include "cvqkd/fock.hpp"
#include "cvqkd/sparse.hpp"

namespace cvqkd {

enum class SolveStatus { optimal, inaccurate, primal_infeasible, dual_infeasible, failed };
const char* to_string(SolveStatus s);

/// Arithmetic used inside the interior-point iterations. The real embedding maps a Hermitian
/// H to [[Re H, -Im H], [Im H, Re H]] / 2 and is the reference; the native complex path does
/// the same iterations at a quarter of the cost.
enum class Representation { complex_native, real_embedding };

struct SdpOptions {
  double feasibility_tol = 1e-8;  // max_i |Tr[A_i X] + a_i.x - b_i| / max(1, ||row_i||)
  double gap_tol = 1e-7;          // |pobj - dobj| / (1 + |pobj| + |dobj|)
  double dual_feasibility_tol = 1e-8;  // ||C - A*(y) - S||_F / (1 + ||C||_F)
  int max_iterations = 200;
  double step_fraction = 0.99;
  Representation representation = Representation::complex_native;
  /// When nonempty every solve writes its problem to <dump_dir>/sdp_<k>.txt.
  std::string dump_dir;
};

struct SdpRow {
  SparseHermitian psd;
  std::vector<std::pair<int, double>> lp;
  double rhs = 0.0;
};

struct LinearSDP {
  int psd_dim = 0;
  HermitianOperator cost;
  int lp_dim = 0;
  RVector lp_cost;
  std::vector<SdpRow> rows;
  /// Optional starting point for the PSD block; must be positive definite.
  std::optional<HermitianOperator> initial_primal;

  void validate() const;
};

struct SDPSolution {
  SolveStatus status = SolveStatus::failed;
  HermitianOperator primal;
  RVector lp_primal;
  RVector dual;  // one multiplier per row; rows dropped as dependent carry 0
  HermitianOperator dual_slack;
  RVector lp_dual_slack;
  double primal_value = 0.0;
  double dual_value = 0.0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double relative_gap = 0.0;
  double min_primal_eigenvalue = 0.0;
  int iterations = 0;
  std::vector<int> dropped_rows;
};

SDPSolution solve(const LinearSDP& problem, const SdpOptions& options = {});

/// Indices of rows that are linear combinations of earlier rows (pivoted Cholesky on the
/// row Gram matrix).
std::vector<int> dependent_rows(const LinearSDP& problem, double rel_tol = 1e-10);

/// Plain-text dump, one self-describing file per problem.
void write_problem(const LinearSDP& problem, std::ostream& out);
LinearSDP read_problem(std::istream& in);

// ---------------------------------------------------------------------------
// The three problem shapes used by the key-rate engine.

struct FeasibilityResult {
  HermitianOperator rho;
  double t = 0.0;
  double max_residual = 0.0;
  SDPSolution solution;
};

/// minimize t  s.t.  |Tr[Gamma_i rho] - gamma_i| <= t,  rho >= 0.
FeasibilityResult solve_feasibility(const ConstraintSet& constraints, const SdpOptions& options = {},
                                    const std::optional<HermitianOperator>& warm_start = {});

struct FwSubproblemResult {
  HermitianOperator delta;
  double linearized_value = 0.0;  // Re Tr[delta * gradient]
  SDPSolution solution;
};

/// argmin_delta Re Tr[delta * gradient]  s.t.  rho_k + delta in the feasible set.
FwSubproblemResult solve_fw_subproblem(const HermitianOperator& gradient,
                                       const ConstraintSet& constraints,
                                       const HermitianOperator& rho_k,
                                       const SdpOptions& options = {});

struct DualCertificate {
  SolveStatus status = SolveStatus::failed;
  bool valid = false;
  RVector y;
  RVector z;
  /// gamma . y - eps' * sum_i z_i, or -infinity when no certificate could be produced.
  double value = 0.0;
  double min_slack_eigenvalue = 0.0;  // of gradient - sum_i y_i Gamma_i, after repair
  double repair_shift = 0.0;          // identity shift applied through identity_combination
};

/// maximize gamma . y - eps' sum z  s.t.  -z <= y <= z,  sum_i y_i Gamma_i <= gradient.
DualCertificate solve_step2_dual(const HermitianOperator& gradient, const ConstraintSet& constraints,
                                 double eps_prime, const SdpOptions& options = {});

}  // namespace cvqkd
