#pragma once

// Perturbed relative-entropy objective f(rho) = D(G_eps(rho) || Z(G_eps(rho))) in bits,
// its gradient, and the classical quantities P(z|x), p_pass and the error-correction leak.

#include <memory>
#include <vector>

#include "cvqkd/fock.hpp"
#include "cvqkd/protocol.hpp"

namespace cvqkd {

struct ObjectiveEvaluation {
  double value = 0.0;
  HermitianOperator gradient;
};

/// Immutable; all member functions are re-entrant.
class ObjectiveContext {
 public:
  /// Uses cfg.perturbation as the perturbation.
  explicit ObjectiveContext(const ProtocolConfig& cfg);
  ObjectiveContext(const ProtocolConfig& cfg, double epsilon);

  /// Same maps, different perturbation (the step-2 certificate uses a larger one).
  ObjectiveContext with_epsilon(double epsilon) const;

  const ProtocolConfig& config() const { return cfg_; }
  const RegionOperatorSet& regions() const { return *regions_; }
  const PostprocessingMaps& maps() const { return *maps_; }
  double epsilon() const { return epsilon_; }
  int dim_g() const { return maps_->dim_g(); }

  double objective_value(const HermitianOperator& rho) const;
  /// df = Re Tr[gradient * drho].
  HermitianOperator objective_gradient(const HermitianOperator& rho) const;
  ObjectiveEvaluation evaluate(const HermitianOperator& rho) const;

  /// Reference implementations that materialize G(rho) on the full dim_G space.
  double objective_value_dense(const HermitianOperator& rho) const;
  HermitianOperator objective_gradient_dense(const HermitianOperator& rho) const;

  /// P(z = k | x = l) as a num_states x num_states matrix indexed (l, k).
  RMatrix conditional_probabilities(const HermitianOperator& rho) const;
  /// Tr[G(rho)].
  double p_pass(const HermitianOperator& rho) const;

 private:
  ObjectiveEvaluation eval(const HermitianOperator& rho, bool want_value, bool want_gradient) const;

  ProtocolConfig cfg_;
  std::shared_ptr<const RegionOperatorSet> regions_;
  std::shared_ptr<const PostprocessingMaps> maps_;
  double epsilon_;
};

/// Shannon entropy in bits with 0 log 0 = 0.
double shannon_entropy(const RVector& p);

/// sum_l p_l sum_k P(k|l).
double p_pass_from_probabilities(const RMatrix& cond, const std::vector<double>& probs);

/// (1 - beta) H(Z) + beta H(Z|X) on the joint p_x P(z|x) renormalized over passed outcomes.
double delta_EC(const RMatrix& cond, const std::vector<double>& probs, double beta);

}  // namespace cvqkd
