#include "cvqkd/protocol.hpp"

#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "cvqkd/errors.hpp"

namespace cvqkd {

using std::numbers::pi;

double ProtocolConfig::eta() const {
  return eta_override ? *eta_override : std::pow(10.0, -0.02 * distance_km);
}

std::vector<double> ProtocolConfig::probabilities() const {
  if (probs.empty()) return std::vector<double>(static_cast<std::size_t>(num_states), 1.0 / num_states);
  return probs;
}

double ProtocolConfig::epsilon() const {
  return theorem_epsilon ? *theorem_epsilon : std::max(perturbation * dim_g(), 1e-10);
}

void ProtocolConfig::validate() const {
  auto finite = [](double v) { return std::isfinite(v); };
  if (num_states != 8 && num_states != 4) throw ConfigError("num_states", "must be 8 or 4");
  if (!finite(alpha) || alpha <= 0.0) throw ConfigError("alpha", "must be a positive real");
  if (!probs.empty()) {
    if (static_cast<int>(probs.size()) != num_states)
      throw ConfigError("probs", "must have num_states entries");
    for (double p : probs)
      if (!finite(p) || p <= 0.0) throw ConfigError("probs", "entries must be positive");
    const double total = std::accumulate(probs.begin(), probs.end(), 0.0);
    if (std::abs(total - 1.0) > 1e-12) throw ConfigError("probs", "must sum to 1");
  }
  if (!finite(distance_km) || distance_km < 0.0) throw ConfigError("distance_km", "must be >= 0");
  const double e = eta();
  if (!finite(e) || e <= 0.0 || e > 1.0) throw ConfigError("eta", "must lie in (0, 1]");
  if (!finite(xi) || xi < 0.0) throw ConfigError("xi", "must be >= 0");
  if (!finite(beta) || beta <= 0.0 || beta > 1.0) throw ConfigError("beta", "must lie in (0, 1]");
  if (!finite(delta_r) || delta_r < 0.0) throw ConfigError("delta_r", "must be >= 0");
  if (!finite(delta_a) || delta_a < 0.0 || delta_a >= pi / num_states)
    throw ConfigError("delta_a", "must lie in [0, pi/num_states)");
  if (n_cutoff < 4) throw ConfigError("n_cutoff", "must be >= 4");
  if (!finite(fw_threshold) || fw_threshold <= 0.0) throw ConfigError("fw_threshold", "must be positive");
  if (fw_max_iters < 0) throw ConfigError("fw_max_iters", "must be >= 0");
  if (!finite(perturbation) || perturbation <= 0.0 || perturbation >= 1.0)
    throw ConfigError("perturbation", "must lie in (0, 1)");
  const double eps = epsilon();
  const double eps_max = 1.0 / (std::numbers::e * (dim_g() - 1));
  if (!finite(eps) || eps <= 0.0 || eps > eps_max)
    throw ConfigError("theorem_epsilon", "must lie in (0, 1/(e (dim_G - 1))] = (0, " +
                                             std::to_string(eps_max) + "]");
}

Complex symbol_amplitude(int x, const ProtocolConfig& cfg) {
  return std::polar(cfg.alpha, 2.0 * pi * x / cfg.num_states);
}

double upper_incomplete_gamma(int twice_s, double x) {
  if (twice_s < 1) throw PreconditionError("upper_incomplete_gamma: s must be >= 1/2");
  if (x < 0.0) throw PreconditionError("upper_incomplete_gamma: x must be >= 0");
  const double ex = std::exp(-x);
  double s;
  double g;
  if (twice_s % 2 == 1) {
    s = 0.5;
    g = std::sqrt(pi) * std::erfc(std::sqrt(x));
  } else {
    s = 1.0;
    g = ex;
  }
  // Gamma(s + 1, x) = s Gamma(s, x) + x^s e^{-x}
  while (2.0 * s < twice_s - 0.5) {
    g = s * g + std::pow(x, s) * ex;
    s += 1.0;
  }
  return g;
}

namespace {

double factorial(int n) { return std::tgamma(n + 1.0); }

}  // namespace

Complex region_operator_element(int z, int n, int m, const ProtocolConfig& cfg) {
  const int N = cfg.num_states;
  if (z < 0 || z >= N) throw PreconditionError("region_operator_element: symbol out of range");
  if (n < 0 || m < 0 || n > cfg.n_cutoff || m > cfg.n_cutoff)
    throw PreconditionError("region_operator_element: Fock index out of range");
  const double half_width = pi / N - cfg.delta_a;
  const double step = 2.0 * pi / N;
  const double r2 = cfg.delta_r * cfg.delta_r;
  const Complex prefactor = std::polar(1.0 / pi, -(m - n) * z * step);
  if (n == m) return prefactor * (upper_incomplete_gamma(2 * n + 2, r2) / factorial(n) * half_width);
  const double radial = upper_incomplete_gamma(n + m + 2, r2) /
                        ((m - n) * std::sqrt(factorial(n)) * std::sqrt(factorial(m)));
  return prefactor * (radial * std::sin(half_width * (m - n)));
}

HermitianOperator RegionOperatorSet::sum() const {
  HermitianOperator total = HermitianOperator::zero(ops.front().dim());
  for (const auto& r : ops) total += r;
  return total;
}

RegionOperatorSet build_region_operators(const ProtocolConfig& cfg) {
  const int dim = cfg.dim_b();
  RegionOperatorSet set;
  for (int z = 0; z < cfg.num_states; ++z) {
    CMatrix r(dim, dim);
    for (int n = 0; n < dim; ++n)
      for (int m = 0; m < dim; ++m) r(n, m) = region_operator_element(z, n, m, cfg);
    set.ops.emplace_back(r);
  }
  return set;
}

HermitianOperator gram_matrix(const ProtocolConfig& cfg) {
  const int N = cfg.num_states;
  const auto p = cfg.probabilities();
  const double a2 = cfg.alpha * cfg.alpha;
  CMatrix g(N, N);
  for (int x = 0; x < N; ++x)
    for (int y = 0; y < N; ++y) {
      const Complex phase = std::polar(1.0, 2.0 * pi * (x - y) / N);
      g(x, y) = std::sqrt(p[x] * p[y]) * std::exp(a2 * (phase - 1.0));
    }
  return HermitianOperator(g);
}

ChannelMoments channel_expectations(int x, const ProtocolConfig& cfg) {
  const double eta = cfg.eta();
  const Complex ax = symbol_amplitude(x, cfg);
  ChannelMoments out;
  out.q = std::sqrt(2.0 * eta) * ax.real();
  out.p = std::sqrt(2.0 * eta) * ax.imag();
  out.n = eta * std::norm(ax) + eta * cfg.xi / 2.0;
  out.d = eta * (ax * ax + std::conj(ax) * std::conj(ax)).real();
  return out;
}

namespace {

CMatrix unit(int dim, int i, int j, Complex v = 1.0) {
  CMatrix e = CMatrix::Zero(dim, dim);
  e(i, j) = v;
  return e;
}

}  // namespace

ConstraintSet measurement_constraints(const ProtocolConfig& cfg) {
  const int N = cfg.num_states;
  const auto p = cfg.probabilities();
  const auto ops = ladder_and_quadratures(cfg.n_cutoff);
  ConstraintSet cs;
  cs.dim = cfg.dim_ab();
  const char* names[4] = {"q", "p", "n", "d"};
  for (int x = 0; x < N; ++x) {
    const ChannelMoments mom = channel_expectations(x, cfg);
    const double values[4] = {mom.q, mom.p, mom.n, mom.d};
    const HermitianOperator* op[4] = {&ops.q, &ops.p, &ops.n, &ops.d};
    const CMatrix proj = unit(N, x, x);
    for (int k = 0; k < 4; ++k) {
      cs.rows.push_back({SparseHermitian::kron(proj, op[k]->matrix()), p[x] * values[k],
                         "meas[" + std::to_string(x) + "]." + names[k]});
    }
  }
  return cs;
}

ConstraintSet tomography_constraints(const ProtocolConfig& cfg) {
  const int N = cfg.num_states;
  const auto p = cfg.probabilities();
  const HermitianOperator g = gram_matrix(cfg);
  const CMatrix id_b = CMatrix::Identity(cfg.dim_b(), cfg.dim_b());
  const Complex i_unit(0.0, 1.0);
  ConstraintSet cs;
  cs.dim = cfg.dim_ab();
  for (int x = 0; x < N; ++x) {
    cs.rows.push_back({SparseHermitian::kron(unit(N, x, x), id_b), p[x], "tomo[" + std::to_string(x) + "]"});
    cs.identity_combination.push_back(1.0);
  }
  for (int x = 0; x < N; ++x) {
    for (int y = x + 1; y < N; ++y) {
      const std::string tag = std::to_string(x) + "," + std::to_string(y);
      const CMatrix re_part = unit(N, x, y) + unit(N, y, x);
      const CMatrix im_part = unit(N, x, y, i_unit) + unit(N, y, x, -i_unit);
      // Tr[(|x><y| + |y><x|) rho_A] = 2 Re G_xy and Tr[(i|x><y| - i|y><x|) rho_A] = 2 Im G_xy.
      cs.rows.push_back({SparseHermitian::kron(re_part, id_b), 2.0 * g(x, y).real(), "tomo_re[" + tag + "]"});
      cs.rows.push_back({SparseHermitian::kron(im_part, id_b), 2.0 * g(x, y).imag(), "tomo_im[" + tag + "]"});
      cs.identity_combination.push_back(0.0);
      cs.identity_combination.push_back(0.0);
    }
  }
  return cs;
}

ConstraintSet build_constraint_set(const ProtocolConfig& cfg) {
  ConstraintSet cs = measurement_constraints(cfg);
  cs.identity_combination.assign(cs.rows.size(), 0.0);
  ConstraintSet tomo = tomography_constraints(cfg);
  for (auto& r : tomo.rows) cs.rows.push_back(std::move(r));
  cs.identity_combination.insert(cs.identity_combination.end(), tomo.identity_combination.begin(),
                                 tomo.identity_combination.end());
  return cs;
}

PostprocessingMaps::PostprocessingMaps(const ProtocolConfig& cfg, const RegionOperatorSet& regions)
    : num_states_(cfg.num_states), dim_a_(cfg.dim_a()), dim_b_(cfg.dim_b()) {
  if (static_cast<int>(regions.ops.size()) != num_states_)
    throw PreconditionError("PostprocessingMaps: expected one region operator per symbol");
  const CMatrix id_a = CMatrix::Identity(dim_a_, dim_a_);
  kraus_gram_ = CMatrix::Zero(dim_ab(), dim_ab());
  for (int z = 0; z < num_states_; ++z) {
    const auto eig = hermitian_eig(regions.ops[z]);
    if (eig.values.minCoeff() < -1e-8) {
      throw NumericalError("PostprocessingMaps: region operator R_" + std::to_string(z) +
                           " has eigenvalue " + std::to_string(eig.values.minCoeff()) + " < -1e-8");
    }
    sqrt_regions_.push_back(matrix_sqrt_psd(regions.ops[z]));
    kraus_blocks_.push_back(kron(id_a, sqrt_regions_.back().matrix()));
    kraus_gram_ += kron(id_a, regions.ops[z].matrix());
  }
}

HermitianOperator PostprocessingMaps::apply_G(const HermitianOperator& rho) const {
  const int n = dim_ab();
  if (rho.dim() != n) throw PreconditionError("apply_G: dimension mismatch");
  CMatrix out(dim_g(), dim_g());
  for (int z = 0; z < num_states_; ++z)
    for (int w = 0; w < num_states_; ++w)
      out.block(z * n, w * n, n, n) = kraus_blocks_[z] * rho.matrix() * kraus_blocks_[w];
  return HermitianOperator(out);
}

HermitianOperator PostprocessingMaps::apply_Z(const HermitianOperator& sigma) const {
  const int n = dim_ab();
  if (sigma.dim() != dim_g()) throw PreconditionError("apply_Z: dimension mismatch");
  CMatrix out = CMatrix::Zero(dim_g(), dim_g());
  for (int z = 0; z < num_states_; ++z) out.block(z * n, z * n, n, n) = sigma.matrix().block(z * n, z * n, n, n);
  return HermitianOperator(out);
}

HermitianOperator PostprocessingMaps::adjoint_G(const HermitianOperator& x) const {
  const int n = dim_ab();
  if (x.dim() != dim_g()) throw PreconditionError("adjoint_G: dimension mismatch");
  CMatrix out = CMatrix::Zero(n, n);
  for (int z = 0; z < num_states_; ++z)
    for (int w = 0; w < num_states_; ++w)
      out += kraus_blocks_[z] * x.matrix().block(z * n, w * n, n, n) * kraus_blocks_[w];
  return HermitianOperator(out);
}

double PostprocessingMaps::trace_G(const HermitianOperator& rho) const {
  return HermitianOperator(kraus_gram_).inner(rho);
}

PostprocessingMaps kraus_G_and_pinching_Z(const ProtocolConfig& cfg, const RegionOperatorSet& regions) {
  return PostprocessingMaps(cfg, regions);
}

HermitianOperator source_replacement_state(const ProtocolConfig& cfg) {
  const int N = cfg.num_states;
  const auto p = cfg.probabilities();
  CVector psi = CVector::Zero(cfg.dim_ab());
  for (int x = 0; x < N; ++x) {
    const FockVector c = coherent_state_fock(symbol_amplitude(x, cfg), cfg.n_cutoff);
    psi.segment(x * cfg.dim_b(), cfg.dim_b()) = std::sqrt(p[x]) * c.amplitudes();
  }
  psi.normalize();
  return HermitianOperator::projector(psi);
}

namespace {

CMatrix displacement(Complex beta, const QuadratureOperators& ops) {
  const CMatrix& a = ops.annihilation;
  // D = exp(beta a^dag - beta* a) = exp(i H) with H = -i (beta a^dag - beta* a) Hermitian.
  const CMatrix h = Complex(0.0, -1.0) * (beta * a.adjoint() - std::conj(beta) * a);
  const auto eig = hermitian_eig(HermitianOperator(h));
  CVector phases(eig.values.size());
  for (Eigen::Index k = 0; k < eig.values.size(); ++k) phases(k) = std::polar(1.0, eig.values(k));
  return eig.vectors * phases.asDiagonal() * eig.vectors.adjoint();
}

}  // namespace

HermitianOperator gaussian_warm_start(const ProtocolConfig& cfg) {
  const int N = cfg.num_states;
  const int db = cfg.dim_b();
  const auto p = cfg.probabilities();
  const double eta = cfg.eta();
  const double nbar = eta * cfg.xi / 2.0;
  const auto ops = ladder_and_quadratures(cfg.n_cutoff);

  RVector thermal(db);
  for (int k = 0; k < db; ++k) thermal(k) = std::pow(nbar, k) / std::pow(nbar + 1.0, k + 1);
  thermal /= thermal.sum();

  std::vector<CVector> bob;
  std::vector<CMatrix> diag_blocks;
  for (int x = 0; x < N; ++x) {
    const Complex b = std::sqrt(eta) * symbol_amplitude(x, cfg);
    CVector c = coherent_state_fock(b, cfg.n_cutoff).amplitudes();
    c.normalize();
    bob.push_back(c);
    const CMatrix d = displacement(b, ops);
    CMatrix tau = d * thermal.cast<Complex>().asDiagonal() * d.adjoint();
    tau /= tau.trace().real();
    diag_blocks.push_back(tau);
  }
  const double e2 = (1.0 - eta) * cfg.alpha * cfg.alpha;
  CMatrix rho = CMatrix::Zero(cfg.dim_ab(), cfg.dim_ab());
  for (int x = 0; x < N; ++x) {
    for (int y = 0; y < N; ++y) {
      if (x == y) {
        rho.block(x * db, x * db, db, db) = p[x] * diag_blocks[x];
        continue;
      }
      const Complex eve_overlap = std::exp(e2 * (std::polar(1.0, 2.0 * pi * (x - y) / N) - 1.0));
      rho.block(x * db, y * db, db, db) = std::sqrt(p[x] * p[y]) * eve_overlap * bob[x] * bob[y].adjoint();
    }
  }
  // Clip to the PSD cone and renormalize.
  const auto eig = hermitian_eig(HermitianOperator(rho));
  RVector vals = eig.values.cwiseMax(0.0);
  vals /= vals.sum();
  return HermitianOperator(CMatrix(eig.vectors * vals.cast<Complex>().asDiagonal() * eig.vectors.adjoint()));
}

InitialState initial_state(const ProtocolConfig& cfg, const ConstraintSet& constraints,
                           const SdpOptions& options) {
  if (constraints.dim != cfg.dim_ab()) throw PreconditionError("initial_state: constraint set dimension mismatch");
  const HermitianOperator warm = gaussian_warm_start(cfg);
  FeasibilityResult feas = solve_feasibility(constraints, options, warm);
  if (!(feas.t <= 1e-6)) {
    throw StageError("initial_state", "feasibility optimum t = " + std::to_string(feas.t) +
                                          " exceeds 1e-6 (cutoff too small for alpha/xi?)");
  }
  InitialState out;
  out.rho = feas.rho;
  out.t = feas.t;
  out.max_residual = feas.max_residual;
  return out;
}

}  // namespace cvqkd
