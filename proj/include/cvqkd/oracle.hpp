#pragma once

// Independent reference values: heterodyne wedge probabilities and region operators by
// direct 2-D quadrature, and the loss-only key rate under a beam-splitter attack with exact
// coherent-state overlaps (no Fock truncation anywhere).

#include "cvqkd/fock.hpp"
#include "cvqkd/protocol.hpp"

namespace cvqkd {

/// P(z | x) = (1/pi) int_{A_z} exp(-|gamma - sqrt(eta) alpha_x|^2) d^2 gamma; excess noise ignored.
double wedge_probability(int x, int z, const ProtocolConfig& cfg);

/// Probability that symbol x is discarded (radial disc plus angular gaps), integrated directly.
double discard_probability(int x, const ProtocolConfig& cfg);

struct LossOnlyResult {
  double mutual_info = 0.0;  // I(X:Z) on passed signals, bits
  double holevo = 0.0;       // chi(Z:E) on passed signals, bits
  double p_pass = 0.0;
  double rate = 0.0;         // p_pass (beta I - chi)
  RMatrix conditional;       // P(z|x), indexed (x, z)
};

/// Requires uniform symbol probabilities; xi is treated as 0.
LossOnlyResult lossonly_key_rate(const ProtocolConfig& cfg);

/// von Neumann entropy (bits) of sum_x q_x |e_x><e_x| for coherent e_x = amplitude * phase_x.
double coherent_mixture_entropy(const RVector& q, double amplitude, int num_states);

struct AlphaOptimum {
  double alpha = 0.0;
  LossOnlyResult result;
};

/// Maximizes the loss-only rate over |alpha| in [lo, hi].
AlphaOptimum optimal_alpha(const ProtocolConfig& cfg, double lo = 0.7, double hi = 1.7);

/// Entrywise quadrature of (1/pi) int_{A_z} <n|gamma><gamma|m> d^2 gamma for n, m <= n_cutoff_small.
HermitianOperator numeric_region_operator(int z, const ProtocolConfig& cfg, int n_cutoff_small);

}  // namespace cvqkd
