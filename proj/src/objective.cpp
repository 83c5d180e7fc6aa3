#include "cvqkd/objective.hpp"

#include <cmath>
#include <numbers>

#include "cvqkd/errors.hpp"

namespace cvqkd {

namespace {

double xlog2x(double v) { return v > 0.0 ? v * std::log2(v) : 0.0; }

void check_perturbation(double eps) {
  if (!(eps > 0.0 && eps < 1.0)) throw PreconditionError("ObjectiveContext: perturbation must lie in (0, 1)");
}

// Eigenvalues below -1e-9 mean the caller handed over something that is not a state.
void check_psd(const EigenDecomposition& e, const char* where) {
  if (e.values.size() && e.values(e.values.size() - 1) < -1e-9 * std::max(1.0, e.values(0)))
    throw PreconditionError(std::string(where) + ": argument is not positive semidefinite");
}

}  // namespace

ObjectiveContext::ObjectiveContext(const ProtocolConfig& cfg) : ObjectiveContext(cfg, cfg.perturbation) {}

ObjectiveContext::ObjectiveContext(const ProtocolConfig& cfg, double epsilon)
    : cfg_(cfg), epsilon_(epsilon) {
  check_perturbation(epsilon);
  auto regions = std::make_shared<RegionOperatorSet>(build_region_operators(cfg));
  maps_ = std::make_shared<PostprocessingMaps>(cfg, *regions);
  regions_ = std::move(regions);
}

ObjectiveContext ObjectiveContext::with_epsilon(double epsilon) const {
  check_perturbation(epsilon);
  ObjectiveContext out = *this;
  out.epsilon_ = epsilon;
  return out;
}

ObjectiveEvaluation ObjectiveContext::eval(const HermitianOperator& rho, bool want_value,
                                           bool want_gradient) const {
  const PostprocessingMaps& m = *maps_;
  const int n = m.dim_ab();
  const int d = m.dim_g();
  if (rho.dim() != n) throw PreconditionError("objective: state dimension mismatch");
  const double eps = epsilon_;
  const double floor = eps / d;
  const double log_floor = std::log2(floor);

  const EigenDecomposition re = hermitian_eig(rho);
  check_psd(re, "objective");
  const RVector root = re.values.cwiseMax(0.0).cwiseSqrt();
  const CMatrix sqrt_rho = re.vectors * root.cast<Complex>().asDiagonal() * re.vectors.adjoint();

  // Nonzero spectrum of G(rho) = K rho K^dagger equals that of rho^1/2 K^dagger K rho^1/2.
  const CMatrix rsum_root = m.kraus_gram() * sqrt_rho;
  const EigenDecomposition me = hermitian_eig(CMatrix(sqrt_rho * rsum_root));
  const RVector s2 = me.values.cwiseMax(0.0);

  ObjectiveEvaluation out;
  std::vector<EigenDecomposition> blocks;
  blocks.reserve(m.num_states());
  for (int z = 0; z < m.num_states(); ++z) {
    const CMatrix& k = m.kraus_block(z);
    CMatrix sz = (1.0 - eps) * (k * rho.matrix() * k);
    sz.diagonal().array() += floor;
    blocks.push_back(hermitian_eig(sz));
  }

  if (want_value) {
    double v = 0.0;
    for (Eigen::Index i = 0; i < s2.size(); ++i) v += xlog2x((1.0 - eps) * s2(i) + floor);
    v += (d - n) * xlog2x(floor);
    for (const auto& b : blocks)
      for (Eigen::Index j = 0; j < b.values.size(); ++j) v -= xlog2x(std::max(b.values(j), floor));
    out.value = v;
  }

  if (want_gradient) {
    // h(s^2) = (log2 mu - log2 floor) / s^2 with mu = (1 - eps) s^2 + floor.
    RVector h(s2.size());
    const double ratio = (1.0 - eps) / floor;
    for (Eigen::Index i = 0; i < s2.size(); ++i) {
      h(i) = s2(i) > 0.0 ? std::log1p(ratio * s2(i)) / (std::numbers::ln2 * s2(i))
                         : ratio / std::numbers::ln2;
    }
    const CMatrix b = rsum_root * me.vectors;  // Rsum rho^1/2 W
    CMatrix t = b * h.cast<Complex>().asDiagonal() * b.adjoint();
    t += log_floor * m.kraus_gram();
    for (int z = 0; z < m.num_states(); ++z) {
      const auto& e = blocks[z];
      RVector logs(e.values.size());
      for (Eigen::Index j = 0; j < logs.size(); ++j) logs(j) = std::log2(std::max(e.values(j), floor));
      const CMatrix kv = m.kraus_block(z) * e.vectors;
      t -= kv * logs.cast<Complex>().asDiagonal() * kv.adjoint();
    }
    out.gradient = HermitianOperator(CMatrix((1.0 - eps) * t));
  }
  return out;
}

double ObjectiveContext::objective_value(const HermitianOperator& rho) const {
  return eval(rho, true, false).value;
}

HermitianOperator ObjectiveContext::objective_gradient(const HermitianOperator& rho) const {
  return eval(rho, false, true).gradient;
}

ObjectiveEvaluation ObjectiveContext::evaluate(const HermitianOperator& rho) const { return eval(rho, true, true); }

double ObjectiveContext::objective_value_dense(const HermitianOperator& rho) const {
  const int d = dim_g();
  const HermitianOperator sigma = (1.0 - epsilon_) * maps_->apply_G(rho) + (epsilon_ / d) * HermitianOperator::identity(d);
  const HermitianOperator zsigma = maps_->apply_Z(sigma);
  const double tiny = 1e-300;
  return sigma.inner(matrix_log_clipped(sigma, tiny)) - sigma.inner(matrix_log_clipped(zsigma, tiny));
}

HermitianOperator ObjectiveContext::objective_gradient_dense(const HermitianOperator& rho) const {
  const int d = dim_g();
  const HermitianOperator sigma = (1.0 - epsilon_) * maps_->apply_G(rho) + (epsilon_ / d) * HermitianOperator::identity(d);
  const HermitianOperator zsigma = maps_->apply_Z(sigma);
  const double tiny = 1e-300;
  const HermitianOperator diff = matrix_log_clipped(sigma, tiny) - matrix_log_clipped(zsigma, tiny);
  return (1.0 - epsilon_) * maps_->adjoint_G(diff);
}

RMatrix ObjectiveContext::conditional_probabilities(const HermitianOperator& rho) const {
  const int N = cfg_.num_states;
  const int db = cfg_.dim_b();
  if (rho.dim() != cfg_.dim_ab()) throw PreconditionError("conditional_probabilities: dimension mismatch");
  const auto probs = cfg_.probabilities();
  RMatrix out(N, N);
  for (int l = 0; l < N; ++l) {
    if (!(probs[l] > 0.0)) throw PreconditionError("conditional_probabilities: p_l must be positive");
    const HermitianOperator block(CMatrix(rho.matrix().block(l * db, l * db, db, db) / probs[l]));
    for (int k = 0; k < N; ++k) out(l, k) = std::clamp(block.inner(regions_->ops[k]), 0.0, 1.0);
  }
  return out;
}

double ObjectiveContext::p_pass(const HermitianOperator& rho) const { return maps_->trace_G(rho); }

double shannon_entropy(const RVector& p) {
  double h = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) h -= xlog2x(p(i));
  return h;
}

double p_pass_from_probabilities(const RMatrix& cond, const std::vector<double>& probs) {
  if (static_cast<std::size_t>(cond.rows()) != probs.size())
    throw PreconditionError("p_pass: probability vector size mismatch");
  double total = 0.0;
  for (Eigen::Index l = 0; l < cond.rows(); ++l) total += probs[l] * cond.row(l).sum();
  return total;
}

double delta_EC(const RMatrix& cond, const std::vector<double>& probs, double beta) {
  const double pp = p_pass_from_probabilities(cond, probs);
  if (!(pp > 0.0)) throw NumericalError("delta_EC: p_pass = 0, the rate is undefined");
  RMatrix joint(cond.rows(), cond.cols());
  for (Eigen::Index l = 0; l < cond.rows(); ++l) joint.row(l) = probs[l] * cond.row(l) / pp;
  const RVector pz = joint.colwise().sum().transpose();
  const RVector px = joint.rowwise().sum();
  const RVector flat = joint.reshaped();
  const double h_z = shannon_entropy(pz);
  const double h_z_given_x = shannon_entropy(flat) - shannon_entropy(px);
  return (1.0 - beta) * h_z + beta * h_z_given_x;
}

}  // namespace cvqkd
