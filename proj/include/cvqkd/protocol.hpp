#pragma once

// Phase-shift-keying protocol model: configuration, key-map region operators, the
// source-replacement constraints and the postprocessing maps G and Z.

#include <optional>
#include <string>
#include <vector>

#include "cvqkd/constraints.hpp"
#include "cvqkd/fock.hpp"
#include "cvqkd/sdp.hpp"

namespace cvqkd {

struct ProtocolConfig {
  int num_states = 8;           // 8 (8PSK) or 4 (QPSK)
  double alpha = 0.9;           // |alpha|
  std::vector<double> probs;    // empty means uniform
  double distance_km = 0.0;
  std::optional<double> eta_override;
  double xi = 0.01;             // excess noise, shot-noise units
  double beta = 0.95;           // reconciliation efficiency
  double delta_r = 0.0;         // radial postselection
  double delta_a = 0.0;         // angular postselection (wedge shrinks by delta_a per side)
  int n_cutoff = 14;
  double fw_threshold = 1e-7;
  int fw_max_iters = 200;
  double perturbation = 1e-11;  // epsilon~ of the perturbed map
  /// Perturbation used for the step-2 certificate; when unset, max(perturbation * dim_G, 1e-10).
  std::optional<double> theorem_epsilon;

  /// 10^(-0.02 L) unless overridden.
  double eta() const;
  std::vector<double> probabilities() const;
  int dim_a() const { return num_states; }
  int dim_b() const { return n_cutoff + 1; }
  int dim_ab() const { return dim_a() * dim_b(); }
  /// Dimension of the image of G: key register (x) A (x) B.
  int dim_g() const { return num_states * dim_ab(); }
  double epsilon() const;

  /// Throws ConfigError naming the first invalid field.
  void validate() const;
};

/// alpha_x = |alpha| exp(2 pi i x / num_states).
Complex symbol_amplitude(int x, const ProtocolConfig& cfg);

/// Upper incomplete gamma Gamma(s, x) for s = twice_s / 2 (twice_s >= 1) by upward recurrence.
double upper_incomplete_gamma(int twice_s, double x);

Complex region_operator_element(int z, int n, int m, const ProtocolConfig& cfg);

struct RegionOperatorSet {
  std::vector<HermitianOperator> ops;

  HermitianOperator sum() const;
};

RegionOperatorSet build_region_operators(const ProtocolConfig& cfg);

/// G_xy = sqrt(p_x p_y) <psi_y|psi_x>, exact coherent overlaps.
HermitianOperator gram_matrix(const ProtocolConfig& cfg);

struct ChannelMoments {
  double q = 0.0;
  double p = 0.0;
  double n = 0.0;
  double d = 0.0;
};

/// Expected first and second moments for a phase-invariant Gaussian channel.
ChannelMoments channel_expectations(int x, const ProtocolConfig& cfg);

/// 4 * num_states rows |x><x| (x) {q, p, n, d}, x-major.
ConstraintSet measurement_constraints(const ProtocolConfig& cfg);
/// num_states^2 rows expanding Tr_B[rho] = G: diagonals, then pairs x<y (real, imaginary).
ConstraintSet tomography_constraints(const ProtocolConfig& cfg);
/// Measurement rows followed by tomography rows.
ConstraintSet build_constraint_set(const ProtocolConfig& cfg);

/// K = sum_z |z>_R (x) 1_A (x) sqrt(R_z) and the pinching Z over the key register.
class PostprocessingMaps {
 public:
  PostprocessingMaps(const ProtocolConfig& cfg, const RegionOperatorSet& regions);

  int num_states() const { return num_states_; }
  int dim_a() const { return dim_a_; }
  int dim_b() const { return dim_b_; }
  int dim_ab() const { return dim_a_ * dim_b_; }
  int dim_g() const { return num_states_ * dim_ab(); }

  /// sqrt(R_z) on B.
  const HermitianOperator& sqrt_region(int z) const { return sqrt_regions_[z]; }
  /// 1_A (x) sqrt(R_z).
  const CMatrix& kraus_block(int z) const { return kraus_blocks_[z]; }
  /// 1_A (x) sum_z R_z = K^dagger K.
  const CMatrix& kraus_gram() const { return kraus_gram_; }

  /// Dense G(rho) on the dim_g space. Intended for small instances and tests.
  HermitianOperator apply_G(const HermitianOperator& rho) const;
  HermitianOperator apply_Z(const HermitianOperator& sigma) const;
  /// G^dagger(X) = K^dagger X K.
  HermitianOperator adjoint_G(const HermitianOperator& x) const;
  double trace_G(const HermitianOperator& rho) const;

 private:
  int num_states_;
  int dim_a_;
  int dim_b_;
  std::vector<HermitianOperator> sqrt_regions_;
  std::vector<CMatrix> kraus_blocks_;
  CMatrix kraus_gram_;
};

PostprocessingMaps kraus_G_and_pinching_Z(const ProtocolConfig& cfg, const RegionOperatorSet& regions);

/// Pure source-replacement state sum_x sqrt(p_x)|x>|psi_x> for eta = 1, xi = 0 with the
/// coherent states truncated and the result renormalized.
HermitianOperator source_replacement_state(const ProtocolConfig& cfg);

/// Gaussian-channel guess: displaced thermal diagonal blocks and damped coherent cross terms.
HermitianOperator gaussian_warm_start(const ProtocolConfig& cfg);

struct InitialState {
  HermitianOperator rho;
  double t = 0.0;             // feasibility optimum
  double max_residual = 0.0;  // over all constraint rows
};

/// Feasible starting point rho_0 obtained by projecting the warm start onto the constraint set.
InitialState initial_state(const ProtocolConfig& cfg, const ConstraintSet& constraints,
                           const SdpOptions& options = {});

}  // namespace cvqkd
