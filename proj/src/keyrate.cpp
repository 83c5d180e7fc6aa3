#include "cvqkd/keyrate.hpp"

#include <cmath>
#include <deque>
#include <iostream>
#include <limits>
#include <numbers>

#include "cvqkd/errors.hpp"

namespace cvqkd {

const char* to_string(FwStatus s) {
  switch (s) {
    case FwStatus::converged: return "converged";
    case FwStatus::early_exit: return "early_exit";
    case FwStatus::max_iterations: return "max_iterations";
    case FwStatus::partial: return "partial";
    case FwStatus::stalled: return "stalled";
  }
  return "unknown";
}

const char* to_string(RunStatus s) {
  switch (s) {
    case RunStatus::certified: return "certified";
    case RunStatus::partial: return "partial";
    case RunStatus::stalled: return "stalled";
    case RunStatus::no_certificate: return "no-certificate";
  }
  return "unknown";
}

double line_search_bisection(const std::function<double(double)>& g) {
  const double g0 = g(0.0);
  if (!(g0 < 0.0)) throw PreconditionError("line_search_bisection: not a descent direction (g(0) >= 0)");
  if (g(1.0) < 0.0) return 1.0 - 1e-9;
  double lo = 0.0;
  double hi = 1.0;
  while (hi - lo > 1e-6) {
    const double mid = 0.5 * (lo + hi);
    if (g(mid) < 0.0) lo = mid;
    else hi = mid;
  }
  return 0.5 * (lo + hi);
}

FwResult frank_wolfe(const FwProblem& problem, const HermitianOperator& rho0, const FwOptions& options) {
  FwResult out;
  out.rho = rho0;
  out.value = problem.value(rho0);
  std::deque<double> history{out.value};

  for (int k = 0;; ++k) {
    if (k >= options.max_iterations) {
      out.status = FwStatus::max_iterations;
      break;
    }
    const HermitianOperator grad = problem.gradient(out.rho);
    HermitianOperator delta;
    try {
      delta = problem.direction(grad, out.rho);
    } catch (const std::exception& e) {
      out.status = FwStatus::partial;
      out.message = e.what();
      break;
    }
    const double stop_value = grad.inner(delta);
    if (stop_value > -options.threshold) {
      out.trace.push_back({k, out.value, stop_value, 0.0});
      out.status = FwStatus::converged;
      break;
    }
    auto directional = [&](double lambda) {
      return problem.gradient(out.rho + lambda * delta).inner(delta);
    };
    double lambda = line_search_bisection(directional);
    HermitianOperator next = out.rho + lambda * delta;
    double f_next = problem.value(next);
    const double slack = 1e-9 * std::max(1.0, std::abs(out.value));
    if (f_next > out.value + slack) {
      lambda *= 0.5;
      next = out.rho + lambda * delta;
      f_next = problem.value(next);
      if (f_next > out.value + slack) {
        out.trace.push_back({k, out.value, stop_value, 0.0});
        out.status = FwStatus::stalled;
        out.message = "objective increased along the line-search step";
        break;
      }
    }
    out.rho = next;
    out.value = f_next;
    ++out.iterations;
    out.trace.push_back({k, f_next, stop_value, lambda});

    history.push_back(f_next);
    if (static_cast<int>(history.size()) > options.early_exit_window + 1) history.pop_front();
    if (static_cast<int>(history.size()) == options.early_exit_window + 1) {
      const double change = std::abs(history.front() - history.back());
      if (change <= options.early_exit_rel * std::max(std::abs(history.back()), 1e-300)) {
        out.status = FwStatus::early_exit;
        break;
      }
    }
  }
  return out;
}

FwResult frank_wolfe(const ObjectiveContext& ctx, const ConstraintSet& constraints, const HermitianOperator& rho0,
                     const EngineOptions& options) {
  FwProblem problem;
  problem.value = [&ctx](const HermitianOperator& r) { return ctx.objective_value(r); };
  problem.gradient = [&ctx](const HermitianOperator& r) { return ctx.objective_gradient(r); };
  problem.direction = [&](const HermitianOperator& grad, const HermitianOperator& rho) {
    FwSubproblemResult sub = solve_fw_subproblem(grad, constraints, rho, options.sdp);
    const SolveStatus st = sub.solution.status;
    if (st != SolveStatus::optimal && st != SolveStatus::inaccurate)
      throw NumericalError(std::string("Frank-Wolfe subproblem: ") + to_string(st));
    return sub.delta;
  };
  FwOptions fw;
  fw.threshold = ctx.config().fw_threshold;
  fw.max_iterations = ctx.config().fw_max_iters;
  return frank_wolfe(problem, rho0, fw);
}

double zeta_epsilon(double epsilon, int dim_g) {
  const double dm1 = dim_g - 1.0;
  return 2.0 * epsilon * dm1 * std::log2(dim_g / (epsilon * dm1));
}

Step2Result step2_lower_bound(const ObjectiveContext& ctx, const ConstraintSet& constraints,
                              const HermitianOperator& rho_star, const EngineOptions& options) {
  Step2Result out;
  const int d = ctx.dim_g();
  out.epsilon = ctx.config().epsilon();
  const double eps_max = 1.0 / (std::numbers::e * (d - 1));
  if (!(out.epsilon > 0.0 && out.epsilon <= eps_max))
    throw PreconditionError("step2: epsilon outside (0, 1/(e (dim_G - 1))]");

  // Clip to the PSD cone first so that eps' also covers the clipping.
  const EigenDecomposition e = hermitian_eig(rho_star);
  const RVector vals = e.values.cwiseMax(0.0);
  const HermitianOperator sigma(CMatrix(e.vectors * vals.cast<Complex>().asDiagonal() * e.vectors.adjoint()));
  out.epsilon_prime = options.eps_prime_factor * constraints.max_residual(sigma);

  const ObjectiveContext cert_ctx = ctx.with_epsilon(out.epsilon);
  const ObjectiveEvaluation ev = cert_ctx.evaluate(sigma);
  out.f_eps = ev.value;
  out.linear_term = ev.gradient.inner(sigma);
  out.certificate = solve_step2_dual(ev.gradient, constraints, out.epsilon_prime, options.sdp);
  out.zeta = zeta_epsilon(out.epsilon, d);
  out.certified = out.certificate.valid;
  if (out.certified) {
    out.beta = out.f_eps - out.linear_term + out.certificate.value;
    out.lower = out.beta - out.zeta;
  } else {
    out.beta = out.lower = std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

namespace {

template <class F>
auto stage(const char* name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

}  // namespace

KeyRateResult compute_key_rate(const ProtocolConfig& cfg, const EngineOptions& options) {
  cfg.validate();
  KeyRateResult res;
  res.eta = cfg.eta();

  const ObjectiveContext ctx = stage("operators", [&] { return ObjectiveContext(cfg); });
  const ConstraintSet constraints = stage("constraints", [&] { return build_constraint_set(cfg); });
  const InitialState init = stage("initial_state", [&] { return initial_state(cfg, constraints, options.sdp); });
  res.initial_residual = init.max_residual;

  const FwResult fw = stage("frank_wolfe", [&] { return frank_wolfe(ctx, constraints, init.rho, options); });
  res.step1_value = fw.value;
  res.iterations = fw.iterations;
  res.fw_trace = fw.trace;
  res.fw_status = fw.status;
  res.rho_star = fw.rho;
  if (fw.status == FwStatus::partial)
    std::clog << "[keyrate] Frank-Wolfe stopped early: " << fw.message << "\n";

  const Step2Result s2 = stage("step2", [&] { return step2_lower_bound(ctx, constraints, fw.rho, options); });
  res.zeta_eps = s2.zeta;
  res.epsilon_prime = s2.epsilon_prime;
  res.step2_lower = s2.lower;

  stage("postprocessing", [&] {
    res.conditional = ctx.conditional_probabilities(fw.rho);
    const auto probs = cfg.probabilities();
    res.p_pass = p_pass_from_probabilities(res.conditional, probs);
    res.delta_EC = delta_EC(res.conditional, probs, cfg.beta);
    return 0;
  });

  if (!s2.certified) {
    res.status = RunStatus::no_certificate;
    res.rate = std::numeric_limits<double>::quiet_NaN();
    return res;
  }
  res.rate = res.step2_lower - res.p_pass * res.delta_EC;
  res.nonpositive = !(res.rate > 0.0);
  switch (fw.status) {
    case FwStatus::partial: res.status = RunStatus::partial; break;
    case FwStatus::stalled: res.status = RunStatus::stalled; break;
    default: res.status = RunStatus::certified; break;
  }
  return res;
}

}  // namespace cvqkd
