#include "cvqkd/oracle.hpp"

#include <cmath>
#include <numbers>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/minima.hpp>

#include "cvqkd/errors.hpp"
#include "cvqkd/objective.hpp"

namespace cvqkd {

using std::numbers::pi;

namespace {

constexpr double kAbsTol = 1e-9;
constexpr double kRelTol = 1e-12;
constexpr unsigned kMaxDepth = 18;

template <class F>
double integrate(F f, double a, double b, const char* what) {
  using boost::math::quadrature::gauss_kronrod;
  double err = 0.0;
  double l1 = 0.0;
  const double v = gauss_kronrod<double, 31>::integrate(f, a, b, kMaxDepth, kRelTol, &err, &l1);
  if (!(err <= 0.1 * kAbsTol + kRelTol * l1))
    throw NumericalError(std::string(what) + ": quadrature did not converge (error estimate " +
                         std::to_string(err) + ")");
  return v;
}

// (1/pi) int over r in [r0, r1], theta in [t0, t1] of exp(-|r e^{i theta} - b|^2) r.
double gaussian_sector(Complex b, double r0, double r1, double t0, double t1) {
  const double bb = std::abs(b);
  const double phi = std::arg(b);
  auto radial = [&](double theta) {
    const double c = bb * std::cos(theta - phi);
    auto integrand = [&](double r) { return std::exp(-(r * r + bb * bb - 2.0 * r * c)) * r; };
    return integrate(integrand, r0, r1, "wedge radial");
  };
  return integrate(radial, t0, t1, "wedge angular") / pi;
}

double radial_limit(Complex b) { return std::abs(b) + 8.0; }

void require_loss_only_inputs(const ProtocolConfig& cfg, int x) {
  if (x < 0 || x >= cfg.num_states) throw PreconditionError("oracle: symbol out of range");
}

}  // namespace

double wedge_probability(int x, int z, const ProtocolConfig& cfg) {
  require_loss_only_inputs(cfg, x);
  require_loss_only_inputs(cfg, z);
  const Complex b = std::sqrt(cfg.eta()) * symbol_amplitude(x, cfg);
  const double center = 2.0 * pi * z / cfg.num_states;
  const double half = pi / cfg.num_states - cfg.delta_a;
  return gaussian_sector(b, cfg.delta_r, std::max(cfg.delta_r, radial_limit(b)), center - half, center + half);
}

double discard_probability(int x, const ProtocolConfig& cfg) {
  require_loss_only_inputs(cfg, x);
  const Complex b = std::sqrt(cfg.eta()) * symbol_amplitude(x, cfg);
  const double bb = std::abs(b);
  // Disc r < delta_r after the angular integral: 2 int_0^dr exp(-r^2 - |b|^2) I_0(2 r |b|) r dr.
  double total = 0.0;
  if (cfg.delta_r > 0.0) {
    auto disc = [&](double r) {
      const double arg = 2.0 * r * bb;
      // exp(-(r - b)^2) * (e^{-2rb} I_0(2rb)) keeps the product finite for large arguments.
      return 2.0 * std::exp(-(r - bb) * (r - bb)) * std::cyl_bessel_i(0.0, arg) * std::exp(-arg) * r;
    };
    total += integrate(disc, 0.0, cfg.delta_r, "discard disc");
  }
  if (cfg.delta_a > 0.0) {
    const double step = 2.0 * pi / cfg.num_states;
    for (int z = 0; z < cfg.num_states; ++z) {
      const double gap_center = step * z + step / 2.0;
      total += gaussian_sector(b, cfg.delta_r, std::max(cfg.delta_r, radial_limit(b)), gap_center - cfg.delta_a,
                               gap_center + cfg.delta_a);
    }
  }
  return total;
}

double coherent_mixture_entropy(const RVector& q, double amplitude, int num_states) {
  const int n = static_cast<int>(q.size());
  const double a2 = amplitude * amplitude;
  CMatrix m(n, n);
  for (int x = 0; x < n; ++x)
    for (int y = 0; y < n; ++y) {
      const Complex overlap = std::exp(a2 * (std::polar(1.0, 2.0 * pi * (x - y) / num_states) - 1.0));
      m(x, y) = std::sqrt(std::max(q(x), 0.0) * std::max(q(y), 0.0)) * overlap;
    }
  const RVector ev = hermitian_eig(m).values.cwiseMax(0.0);
  return shannon_entropy(ev);
}

LossOnlyResult lossonly_key_rate(const ProtocolConfig& cfg) {
  cfg.validate();
  const int N = cfg.num_states;
  const auto probs = cfg.probabilities();
  for (double p : probs)
    if (std::abs(p - 1.0 / N) > 1e-12) throw PreconditionError("lossonly_key_rate: requires uniform symbols");

  LossOnlyResult out;
  out.conditional.resize(N, N);
  // Rotation covariance: P(z|x) depends only on (z - x) mod N.
  RVector base(N);
  for (int k = 0; k < N; ++k) base(k) = wedge_probability(0, k, cfg);
  for (int x = 0; x < N; ++x)
    for (int z = 0; z < N; ++z) out.conditional(x, z) = base((z - x + N) % N);

  out.p_pass = p_pass_from_probabilities(out.conditional, probs);
  if (!(out.p_pass > 0.0)) throw NumericalError("lossonly_key_rate: p_pass = 0");
  RMatrix joint(N, N);
  for (int x = 0; x < N; ++x) joint.row(x) = probs[x] * out.conditional.row(x) / out.p_pass;
  const RVector px = joint.rowwise().sum();
  const RVector pz = joint.colwise().sum().transpose();
  out.mutual_info = shannon_entropy(px) + shannon_entropy(pz) - shannon_entropy(RVector(joint.reshaped()));

  const double eve = std::sqrt(1.0 - cfg.eta()) * cfg.alpha;
  double conditional_entropy = 0.0;
  for (int z = 0; z < N; ++z) {
    if (!(pz(z) > 0.0)) continue;
    const RVector q = joint.col(z) / pz(z);
    conditional_entropy += pz(z) * coherent_mixture_entropy(q, eve, N);
  }
  out.holevo = coherent_mixture_entropy(px, eve, N) - conditional_entropy;
  out.rate = out.p_pass * (cfg.beta * out.mutual_info - out.holevo);
  return out;
}

AlphaOptimum optimal_alpha(const ProtocolConfig& cfg, double lo, double hi) {
  if (!(lo > 0.0 && hi > lo)) throw PreconditionError("optimal_alpha: need 0 < lo < hi");
  auto negative_rate = [&](double a) {
    ProtocolConfig c = cfg;
    c.alpha = a;
    return -lossonly_key_rate(c).rate;
  };
  const auto [a, v] = boost::math::tools::brent_find_minima(negative_rate, lo, hi, 30);
  (void)v;
  AlphaOptimum out;
  out.alpha = a;
  ProtocolConfig c = cfg;
  c.alpha = a;
  out.result = lossonly_key_rate(c);
  return out;
}

HermitianOperator numeric_region_operator(int z, const ProtocolConfig& cfg, int n_cutoff_small) {
  if (n_cutoff_small < 0 || n_cutoff_small > 8)
    throw PreconditionError("numeric_region_operator: n_cutoff_small must lie in [0, 8]");
  require_loss_only_inputs(cfg, z);
  const int dim = n_cutoff_small + 1;
  const double center = 2.0 * pi * z / cfg.num_states;
  const double half = pi / cfg.num_states - cfg.delta_a;
  const double r1 = std::max(cfg.delta_r, 12.0);
  CMatrix out(dim, dim);
  for (int n = 0; n < dim; ++n) {
    for (int m = n; m < dim; ++m) {
      const double norm = 1.0 / std::sqrt(std::tgamma(n + 1.0) * std::tgamma(m + 1.0));
      // <n|gamma><gamma|m> = exp(-r^2) r^(n+m) e^{i (n - m) theta} / sqrt(n! m!)
      auto part = [&](bool imaginary) {
        auto angular = [&](double theta) {
          auto radial = [&](double r) { return std::exp(-r * r) * std::pow(r, n + m + 1); };
          const double phase = (n - m) * theta;
          const double weight = imaginary ? std::sin(phase) : std::cos(phase);
          if (weight == 0.0) return 0.0;
          return weight * integrate(radial, cfg.delta_r, r1, "region radial");
        };
        return integrate(angular, center - half, center + half, "region angular") * norm / pi;
      };
      out(n, m) = Complex(part(false), part(true));
      out(m, n) = std::conj(out(n, m));
    }
  }
  return HermitianOperator(out);
}

}  // namespace cvqkd
