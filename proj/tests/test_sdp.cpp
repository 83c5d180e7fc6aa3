#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"

#include "cvqkd/errors.hpp"
#include "cvqkd/protocol.hpp"
#include "cvqkd/sdp.hpp"
#include "test_support.hpp"

using namespace cvqkd;

namespace {

// min Tr[C X] s.t. Tr[A_i X] = b_i, Tr X = 1, with b_i taken from a random density matrix.
LinearSDP random_problem(int n, int m, std::mt19937_64& rng) {
  LinearSDP p;
  p.psd_dim = n;
  p.cost = testing::random_hermitian(n, rng);
  p.lp_dim = 0;
  p.lp_cost = RVector::Zero(0);
  const HermitianOperator x0 = testing::random_density(n, rng);
  p.rows.push_back({SparseHermitian(HermitianOperator::identity(n)), {}, 1.0});
  for (int i = 0; i < m; ++i) {
    const HermitianOperator a = testing::random_hermitian(n, rng);
    p.rows.push_back({SparseHermitian(a), {}, a.inner(x0)});
  }
  return p;
}

double dual_objective_check(const LinearSDP& p, const SDPSolution& s) {
  // Independent re-evaluation of b.y with S = C - sum y_i A_i.
  CMatrix slack = p.cost.matrix();
  double by = 0.0;
  for (std::size_t i = 0; i < p.rows.size(); ++i) {
    p.rows[i].psd.add_to(slack, -s.dual(i));
    by += p.rows[i].rhs * s.dual(i);
  }
  CHECK(min_eigenvalue(HermitianOperator(slack).matrix()) > -1e-6);
  return by;
}

}  // namespace

TEST_CASE("spectraplex minimum equals the smallest eigenvalue") {
  std::mt19937_64 rng(2);
  for (int n : {2, 5, 9}) {
    LinearSDP p;
    p.psd_dim = n;
    p.cost = testing::random_hermitian(n, rng);
    p.lp_cost = RVector::Zero(0);
    p.rows.push_back({SparseHermitian(HermitianOperator::identity(n)), {}, 1.0});
    const SDPSolution s = solve(p);
    REQUIRE(s.status == SolveStatus::optimal);
    const double lmin = hermitian_eig(p.cost).values(n - 1);
    CHECK(s.primal_value == doctest::Approx(lmin).epsilon(1e-6));
    CHECK(s.dual_value == doctest::Approx(lmin).epsilon(1e-6));
  }
}

TEST_CASE("complex-native and real-embedded solves agree") {
  std::mt19937_64 rng(17);
  for (int k = 0; k < 6; ++k) {
    const LinearSDP p = random_problem(4 + k, 3 + k, rng);
    SdpOptions tight;
    tight.gap_tol = 1e-10;
    tight.feasibility_tol = 1e-10;
    tight.dual_feasibility_tol = 1e-10;
    SdpOptions real = tight;
    real.representation = Representation::real_embedding;
    const SDPSolution a = solve(p, tight);
    const SDPSolution b = solve(p, real);
    REQUIRE(a.status == SolveStatus::optimal);
    REQUIRE(b.status == SolveStatus::optimal);
    CHECK(std::abs(a.primal_value - b.primal_value) < 1e-8 * (1.0 + std::abs(a.primal_value)));
    CHECK((a.primal.matrix() - b.primal.matrix()).norm() < 1e-4);
  }
}

TEST_CASE("weak duality and residual reporting") {
  std::mt19937_64 rng(23);
  for (int k = 0; k < 5; ++k) {
    const LinearSDP p = random_problem(6, 5, rng);
    const SDPSolution s = solve(p);
    REQUIRE(s.status == SolveStatus::optimal);
    CHECK(s.primal_residual <= 1e-8);
    CHECK(s.relative_gap <= 1e-7);
    CHECK(s.min_primal_eigenvalue > -1e-10);
    const double by = dual_objective_check(p, s);
    CHECK(by == doctest::Approx(s.dual_value).epsilon(1e-12));
    CHECK(by <= s.primal_value + 1e-7 * (1.0 + std::abs(s.primal_value)));
  }
}

TEST_CASE("row scaling does not change the optimum") {
  std::mt19937_64 rng(31);
  LinearSDP p = random_problem(5, 4, rng);
  const SDPSolution base = solve(p);
  for (auto& r : p.rows) {
    r.psd = r.psd.scaled(1e5);
    r.rhs *= 1e5;
  }
  p.rows[2].psd = p.rows[2].psd.scaled(1e-8);
  p.rows[2].rhs *= 1e-8;
  const SDPSolution scaled = solve(p);
  REQUIRE(scaled.status == SolveStatus::optimal);
  CHECK(scaled.primal_value == doctest::Approx(base.primal_value).epsilon(1e-7));
}

TEST_CASE("dependent rows are dropped, inconsistent ones detected") {
  std::mt19937_64 rng(41);
  LinearSDP p = random_problem(5, 3, rng);
  SdpRow dup = p.rows[1];
  dup.psd = dup.psd.scaled(2.0);
  dup.rhs *= 2.0;
  p.rows.push_back(dup);
  CHECK(dependent_rows(p) == std::vector<int>{4});
  const SDPSolution s = solve(p);
  CHECK(s.status == SolveStatus::optimal);
  CHECK(s.dropped_rows == std::vector<int>{4});
  CHECK(s.dual(4) == 0.0);

  p.rows.back().rhs += 1.0;
  CHECK(solve(p).status == SolveStatus::primal_infeasible);
}

TEST_CASE("infeasible problem is not reported optimal") {
  LinearSDP p;
  p.psd_dim = 2;
  p.cost = HermitianOperator::identity(2);
  p.lp_cost = RVector::Zero(0);
  p.rows.push_back({SparseHermitian(HermitianOperator::identity(2)), {}, 1.0});
  RVector d(2);
  d << 1.0, 0.0;
  p.rows.push_back({SparseHermitian(HermitianOperator::diagonal(d)), {}, 2.0});
  const SDPSolution s = solve(p);
  CHECK(s.status != SolveStatus::optimal);
  CHECK(s.primal_residual > 1e-3);
}

TEST_CASE("linear-programming block") {
  // min x0 + 2 x1 + Tr[X] s.t. x0 + x1 + Tr[X] = 1, x0 - x1 = 0.2 -> x0 = 0.6, x1 = 0.4 or X.
  LinearSDP p;
  p.psd_dim = 2;
  p.cost = 3.0 * HermitianOperator::identity(2);
  p.lp_dim = 2;
  p.lp_cost = RVector(2);
  p.lp_cost << 1.0, 2.0;
  p.rows.push_back({SparseHermitian(HermitianOperator::identity(2)), {{0, 1.0}, {1, 1.0}}, 1.0});
  p.rows.push_back({SparseHermitian(), {{0, 1.0}, {1, -1.0}}, 0.2});
  const SDPSolution s = solve(p);
  REQUIRE(s.status == SolveStatus::optimal);
  CHECK(s.primal_value == doctest::Approx(1.4).epsilon(1e-7));
  CHECK(s.lp_primal(0) == doctest::Approx(0.6).epsilon(1e-6));
}

TEST_CASE("dump round trip") {
  std::mt19937_64 rng(5);
  const LinearSDP p = random_problem(4, 3, rng);
  std::stringstream ss;
  write_problem(p, ss);
  const LinearSDP q = read_problem(ss);
  CHECK(q.rows.size() == p.rows.size());
  CHECK(solve(q).primal_value == doctest::Approx(solve(p).primal_value).epsilon(1e-12));

  const auto dir = std::filesystem::temp_directory_path() / "cvqkd_dump_test";
  std::filesystem::remove_all(dir);
  SdpOptions opt;
  opt.dump_dir = dir.string();
  solve(p, opt);
  int files = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    std::ifstream in(e.path());
    CHECK(read_problem(in).psd_dim == 4);
    ++files;
  }
  CHECK(files == 1);
  std::filesystem::remove_all(dir);

  std::stringstream bad("cvqkd-sdp 2\n");
  CHECK_THROWS_AS(read_problem(bad), PreconditionError);
}

TEST_CASE("feasibility, subproblem and certificate shapes on a small protocol") {
  ProtocolConfig cfg;
  cfg.num_states = 4;
  cfg.n_cutoff = 4;
  cfg.distance_km = 20;
  const ConstraintSet cs = build_constraint_set(cfg);
  const FeasibilityResult feas = solve_feasibility(cs);
  CHECK(feas.t < 1e-8);
  CHECK(feas.max_residual < 1e-8);
  const FeasibilityResult warm = solve_feasibility(cs, {}, gaussian_warm_start(cfg));
  CHECK(warm.max_residual < 1e-8);

  std::mt19937_64 rng(3);
  const HermitianOperator grad = testing::random_hermitian(cs.dim, rng);
  const FwSubproblemResult sub = solve_fw_subproblem(grad, cs, feas.rho);
  REQUIRE(sub.solution.status == SolveStatus::optimal);
  CHECK(sub.linearized_value <= 1e-7);
  CHECK(cs.max_residual(feas.rho + sub.delta) < 1e-8);

  // Independent route: the same SDP in the real embedding at tightened tolerances.
  SdpOptions tight;
  tight.representation = Representation::real_embedding;
  tight.gap_tol = 1e-10;
  tight.feasibility_tol = 1e-10;
  tight.dual_feasibility_tol = 1e-10;
  const FwSubproblemResult ref = solve_fw_subproblem(grad, cs, feas.rho, tight);
  CHECK(sub.linearized_value == doctest::Approx(ref.linearized_value).epsilon(1e-6));

  // Dual certificate: weak duality against the primal minimum, slack PSD.
  const DualCertificate cert = solve_step2_dual(grad, cs, 0.0);
  REQUIRE(cert.valid);
  CHECK(cert.min_slack_eigenvalue >= -1e-9);
  const double primal_min = grad.inner(feas.rho + sub.delta);
  CHECK(cert.value <= primal_min + 1e-9);
  CHECK(cert.value >= primal_min - 1e-5 * (1.0 + std::abs(primal_min)));
  const DualCertificate loose = solve_step2_dual(grad, cs, 1e-4);
  REQUIRE(loose.valid);
  CHECK(loose.value <= cert.value + 1e-9);
  CHECK((loose.z - loose.y.cwiseAbs()).norm() == 0.0);
}
