#pragma once

// Two-step key-rate engine: modified Frank-Wolfe minimization of the perturbed objective
// (step 1) followed by a dual certificate that turns the step-1 point into a lower bound
// (step 2).

#include <functional>
#include <string>
#include <vector>

#include "cvqkd/constraints.hpp"
#include "cvqkd/objective.hpp"
#include "cvqkd/protocol.hpp"
#include "cvqkd/sdp.hpp"

namespace cvqkd {

enum class FwStatus { converged, early_exit, max_iterations, partial, stalled };
const char* to_string(FwStatus s);

struct FwTraceEntry {
  int iteration = 0;
  double f = 0.0;
  double stop_value = 0.0;  // Re Tr[delta * grad f(rho_k)]
  double lambda = 0.0;
};

struct FwOptions {
  double threshold = 1e-7;
  int max_iterations = 200;
  double early_exit_rel = 1e-9;
  int early_exit_window = 5;
};

/// Objective, gradient and linear minimization oracle for a generic Frank-Wolfe run.
struct FwProblem {
  std::function<double(const HermitianOperator&)> value;
  std::function<HermitianOperator(const HermitianOperator&)> gradient;
  /// Returns delta = argmin_{s feasible} Re Tr[grad s] - rho.
  std::function<HermitianOperator(const HermitianOperator& grad, const HermitianOperator& rho)> direction;
};

struct FwResult {
  HermitianOperator rho;
  double value = 0.0;
  int iterations = 0;  // accepted updates
  FwStatus status = FwStatus::max_iterations;
  std::string message;
  std::vector<FwTraceEntry> trace;
};

FwResult frank_wolfe(const FwProblem& problem, const HermitianOperator& rho0, const FwOptions& options = {});

/// Bisection on the directional derivative g over [0, 1]. Requires g(0) < 0.
/// Returns 1 - 1e-9 when g(1) < 0, otherwise the midpoint of the final interval of width 1e-6.
double line_search_bisection(const std::function<double(double)>& g);

struct EngineOptions {
  SdpOptions sdp;
  double eps_prime_factor = 10.0;
};

FwResult frank_wolfe(const ObjectiveContext& ctx, const ConstraintSet& constraints,
                     const HermitianOperator& rho0, const EngineOptions& options = {});

struct Step2Result {
  bool certified = false;
  double lower = 0.0;        // beta - zeta
  double beta = 0.0;
  double zeta = 0.0;
  double epsilon = 0.0;
  double epsilon_prime = 0.0;
  double f_eps = 0.0;        // f_eps(sigma)
  double linear_term = 0.0;  // Re Tr[sigma grad f_eps(sigma)]
  DualCertificate certificate;
};

/// zeta = 2 eps (d - 1) log2(d / (eps (d - 1))).
double zeta_epsilon(double epsilon, int dim_g);

Step2Result step2_lower_bound(const ObjectiveContext& ctx, const ConstraintSet& constraints,
                              const HermitianOperator& rho_star, const EngineOptions& options = {});

enum class RunStatus { certified, partial, stalled, no_certificate };
const char* to_string(RunStatus s);

struct KeyRateResult {
  double step1_value = 0.0;
  double step2_lower = 0.0;
  double zeta_eps = 0.0;
  double epsilon_prime = 0.0;
  double p_pass = 0.0;
  double delta_EC = 0.0;
  double rate = 0.0;
  int iterations = 0;
  std::vector<FwTraceEntry> fw_trace;
  RunStatus status = RunStatus::certified;
  FwStatus fw_status = FwStatus::converged;
  bool nonpositive = false;
  double eta = 0.0;
  double initial_residual = 0.0;
  RMatrix conditional;  // P(z|x) at rho*
  HermitianOperator rho_star;
};

/// Full pipeline. Stage failures surface as StageError naming the stage; invalid configs as
/// ConfigError.
KeyRateResult compute_key_rate(const ProtocolConfig& cfg, const EngineOptions& options = {});

}  // namespace cvqkd
