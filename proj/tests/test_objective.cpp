#include <cmath>
#include <random>

#include "doctest.h"

#include "cvqkd/errors.hpp"
#include "cvqkd/objective.hpp"
#include "cvqkd/oracle.hpp"
#include "cvqkd/sdp.hpp"
#include "test_support.hpp"

using namespace cvqkd;

namespace {

ProtocolConfig tiny(double delta_r = 0.0) {
  ProtocolConfig cfg;
  cfg.n_cutoff = 4;
  cfg.delta_r = delta_r;
  cfg.distance_km = 30;
  return cfg;
}

}  // namespace

TEST_CASE("fast objective agrees with the dense reference") {
  std::mt19937_64 rng(21);
  for (double eps : {1e-3, 1e-8, 1e-11}) {
    for (double dr : {0.0, 0.4}) {
      const ObjectiveContext ctx(tiny(dr), eps);
      const HermitianOperator rho = testing::random_density(40, rng);
      const double fast = ctx.objective_value(rho);
      const double dense = ctx.objective_value_dense(rho);
      CHECK(fast == doctest::Approx(dense).epsilon(1e-9));
      const HermitianOperator gf = ctx.objective_gradient(rho);
      const HermitianOperator gd = ctx.objective_gradient_dense(rho);
      CHECK((gf.matrix() - gd.matrix()).norm() < 1e-7 * (1.0 + gd.frobenius_norm()));
      const ObjectiveEvaluation both = ctx.evaluate(rho);
      CHECK(both.value == fast);
      CHECK((both.gradient.matrix() - gf.matrix()).norm() == 0.0);
    }
  }
}

TEST_CASE("fast objective handles rank-deficient states") {
  const ObjectiveContext ctx(tiny(), 1e-6);
  std::mt19937_64 rng(4);
  const CVector v = testing::random_complex(40, 1, rng).col(0).normalized();
  const HermitianOperator rho = HermitianOperator::projector(v);
  CHECK(ctx.objective_value(rho) == doctest::Approx(ctx.objective_value_dense(rho)).epsilon(1e-9));
  const HermitianOperator gd = ctx.objective_gradient_dense(rho);
  CHECK((ctx.objective_gradient(rho).matrix() - gd.matrix()).norm() < 1e-6 * (1.0 + gd.frobenius_norm()));
}

TEST_CASE("objective is nonnegative and its gradient Hermitian") {
  std::mt19937_64 rng(8);
  const ObjectiveContext ctx(tiny(0.2));
  for (int k = 0; k < 5; ++k) {
    const HermitianOperator rho = testing::random_density(40, rng);
    CHECK(ctx.objective_value(rho) >= -1e-12);
    const CMatrix g = ctx.objective_gradient(rho).matrix();
    CHECK((g - g.adjoint()).norm() < 1e-10);
  }
  CHECK_THROWS_AS(ObjectiveContext(tiny(), 0.0), PreconditionError);
  CHECK_THROWS_AS(ObjectiveContext(tiny(), 1.0), PreconditionError);
}

TEST_CASE("directional derivatives match central differences") {
  ProtocolConfig cfg = tiny();
  cfg.n_cutoff = 6;
  cfg.xi = 0.01;
  const ObjectiveContext ctx(cfg);
  const ConstraintSet cs = build_constraint_set(cfg);
  const InitialState init = initial_state(cfg, cs);
  std::mt19937_64 rng(99);
  const HermitianOperator grad = ctx.objective_gradient(init.rho);
  for (int k = 0; k < 5; ++k) {
    const HermitianOperator cost = testing::random_hermitian(cs.dim, rng);
    const FwSubproblemResult vertex = solve_fw_subproblem(cost, cs, init.rho);
    const HermitianOperator dir = vertex.delta;
    const double t = 1e-5;
    const double fd = (ctx.objective_value(init.rho + t * dir) - ctx.objective_value(init.rho - t * dir)) / (2 * t);
    const double an = grad.inner(dir);
    CHECK(std::abs(fd - an) <= 1e-4 * std::abs(an));
  }
}

TEST_CASE("conditional probabilities and p_pass") {
  ProtocolConfig cfg;
  cfg.n_cutoff = 14;
  cfg.eta_override = 1.0;
  cfg.xi = 0.0;
  const ObjectiveContext ctx(cfg);
  const HermitianOperator rho = source_replacement_state(cfg);
  const RMatrix p = ctx.conditional_probabilities(rho);
  for (int l = 0; l < 8; ++l) {
    CHECK(p.row(l).sum() == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(p(l, l) == doctest::Approx(p(0, 0)).epsilon(1e-10));
  }
  CHECK(std::abs(p(0, 0) - wedge_probability(0, 0, cfg)) < 1e-6);
  CHECK(ctx.p_pass(rho) == doctest::Approx(1.0).epsilon(1e-10));

  double last = 1.0 + 1e-12;
  for (double dr : {0.0, 0.3, 0.6, 0.9, 1.2}) {
    ProtocolConfig c = cfg;
    c.delta_r = dr;
    const ObjectiveContext cx(c);
    const double pp = cx.p_pass(rho);
    const double via_probs = p_pass_from_probabilities(cx.conditional_probabilities(rho), c.probabilities());
    CHECK(pp == doctest::Approx(via_probs).epsilon(1e-8));
    CHECK(pp < last);
    last = pp;
  }
}

TEST_CASE("error-correction leak") {
  const std::vector<double> uniform(8, 0.125);
  const RMatrix independent = RMatrix::Constant(8, 8, 0.125);
  CHECK(delta_EC(independent, uniform, 1.0) == doctest::Approx(3.0).epsilon(1e-14));
  const RMatrix perfect = RMatrix::Identity(8, 8);
  CHECK(delta_EC(perfect, uniform, 0.95) == doctest::Approx(0.15).epsilon(1e-13));

  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  RMatrix cond(8, 8);
  for (int l = 0; l < 8; ++l) {
    for (int k = 0; k < 8; ++k) cond(l, k) = u(rng);
    cond.row(l) *= 0.8 / cond.row(l).sum();  // 20 percent discarded
  }
  // beta = 1 gives H(Z|X) on the passed joint distribution.
  RMatrix joint = cond / 8.0;
  joint /= joint.sum();
  double hzx = 0.0;
  for (int l = 0; l < 8; ++l)
    for (int k = 0; k < 8; ++k) hzx -= joint(l, k) * std::log2(joint(l, k) / joint.row(l).sum());
  CHECK(delta_EC(cond, uniform, 1.0) == doctest::Approx(hzx).epsilon(1e-12));

  double prev = delta_EC(cond, uniform, 0.5);
  for (double b : {0.6, 0.8, 0.9, 0.95, 1.0}) {
    const double d = delta_EC(cond, uniform, b);
    CHECK(d <= prev + 1e-15);
    prev = d;
  }
  CHECK_THROWS_AS(delta_EC(RMatrix::Zero(8, 8), uniform, 0.9), NumericalError);
}

TEST_CASE("Shannon entropy") {
  RVector p(4);
  p << 0.5, 0.25, 0.25, 0.0;
  CHECK(shannon_entropy(p) == doctest::Approx(1.5));
}
