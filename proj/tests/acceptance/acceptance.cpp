// Acceptance gate. Prints one PASS/FAIL line per criterion and exits nonzero if any fail.
// Engine runs use the desk-scale cutoff N_c = 10 and a Frank-Wolfe cap of 30 iterations.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cvqkd/batch.hpp"
#include "cvqkd/keyrate.hpp"
#include "cvqkd/objective.hpp"
#include "cvqkd/oracle.hpp"
#include "cvqkd/protocol.hpp"
#include "cvqkd/sdp.hpp"

using namespace cvqkd;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

constexpr int kFwIters = 30;

int failures = 0;

void report(const std::string& id, bool pass, const std::string& detail, Clock::time_point start) {
  const double secs = std::chrono::duration<double>(Clock::now() - start).count();
  std::printf("[%s] %s: %s (%.0f s)\n", pass ? "PASS" : "FAIL", id.c_str(), detail.c_str(), secs);
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string fmt(double v) { return format_number(v); }

ProtocolConfig desk(double L, double alpha, double xi, double beta, double delta_r) {
  ProtocolConfig cfg;
  cfg.distance_km = L;
  cfg.alpha = alpha;
  cfg.xi = xi;
  cfg.beta = beta;
  cfg.delta_r = delta_r;
  cfg.n_cutoff = 10;
  cfg.fw_max_iters = kFwIters;
  return cfg;
}

// Rate of a finished run re-evaluated for another reconciliation efficiency; beta only enters
// through the leak term, so the optimization itself is shared.
double rate_at_beta(const PointResult& p, double beta) {
  const KeyRateResult& r = p.result;
  return r.step2_lower - r.p_pass * delta_EC(r.conditional, p.cfg.probabilities(), beta);
}

struct Curve {
  std::vector<double> delta_r;
  std::vector<double> rate;
  std::vector<double> p_pass;
  bool ok = true;
};

Curve curve(const std::vector<PointResult>& rows, double beta) {
  Curve c;
  for (const auto& p : rows) {
    c.ok = c.ok && p.ok && p.result.status != RunStatus::no_certificate;
    c.delta_r.push_back(p.cfg.delta_r);
    c.rate.push_back(p.ok ? rate_at_beta(p, beta) : std::nan(""));
    c.p_pass.push_back(p.ok ? p.result.p_pass : std::nan(""));
  }
  return c;
}

std::size_t argmax(const std::vector<double>& v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

std::vector<PointResult> delta_r_sweep(double L, double alpha, double xi) {
  std::vector<ProtocolConfig> grid;
  for (double dr : axis_range(0.0, 1.0, 0.05)) grid.push_back(desk(L, alpha, xi, 0.9, dr));
  return run_points(grid, 0);
}

std::vector<std::vector<PointResult>*> all_runs;

// ---------------------------------------------------------------------------

void ac1_region_operators() {
  const auto start = Clock::now();
  double worst = 0.0;
  double identity_err = 0.0;
  for (double dr : {0.0, 0.5}) {
    ProtocolConfig cfg;
    cfg.n_cutoff = 6;
    cfg.delta_r = dr;
    const RegionOperatorSet closed = build_region_operators(cfg);
    for (int z = 0; z < 8; ++z) {
      const HermitianOperator numeric = numeric_region_operator(z, cfg, 6);
      worst = std::max(worst, (numeric.matrix() - closed.ops[z].matrix()).cwiseAbs().maxCoeff());
    }
    if (dr == 0.0) identity_err = (closed.sum().matrix() - CMatrix::Identity(7, 7)).cwiseAbs().maxCoeff();
  }
  const double secs = std::chrono::duration<double>(Clock::now() - start).count();
  report("AC1 region operators", worst < 1e-6 && identity_err < 1e-10 && secs < 60,
         "max |closed - quadrature| = " + fmt(worst) + ", max |sum R_z - I| = " + fmt(identity_err), start);
}

void ac2_gradient() {
  const auto start = Clock::now();
  ProtocolConfig cfg = desk(50, 0.9, 0.01, 0.95, 0.0);
  cfg.n_cutoff = 8;
  const ObjectiveContext ctx(cfg);
  const ConstraintSet cs = build_constraint_set(cfg);
  const InitialState init = initial_state(cfg, cs);
  const HermitianOperator grad = ctx.objective_gradient(init.rho);
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> g(0.0, 1.0);
  double worst = 0.0;
  for (int k = 0; k < 20; ++k) {
    CMatrix c(cs.dim, cs.dim);
    for (int i = 0; i < cs.dim; ++i)
      for (int j = 0; j < cs.dim; ++j) c(i, j) = Complex(g(rng), g(rng));
    const HermitianOperator dir = solve_fw_subproblem(HermitianOperator(c), cs, init.rho).delta;
    const double t = 1e-5;
    const double fd = (ctx.objective_value(init.rho + t * dir) - ctx.objective_value(init.rho - t * dir)) / (2 * t);
    const double an = grad.inner(dir);
    worst = std::max(worst, std::abs(fd - an) / std::abs(an));
  }
  const double secs = std::chrono::duration<double>(Clock::now() - start).count();
  report("AC2 gradient check", worst < 1e-4 && secs < 300,
         "20 feasible directions, worst relative error " + fmt(worst), start);
}

void ac3_loss_only() {
  const auto start = Clock::now();
  ValidateSpec spec;
  spec.base = desk(0, 0.9, 1e-5, 0.95, 0.0);
  spec.distances_km = {20, 40, 60};
  spec.tolerance = 0.05;
  const auto rows = run_validate(spec);
  bool pass = true;
  std::ostringstream detail;
  for (const auto& r : rows) {
    pass = pass && r.pass && r.step2 <= r.step1;
    detail << "L=" << fmt(r.distance_km) << " alpha=" << fmt(r.alpha) << " oracle=" << fmt(r.oracle_rate)
           << " rate=" << fmt(r.rate) << " rel=" << fmt(r.rel_diff) << "; ";
  }
  report("AC3 loss-only validation", pass, detail.str(), start);
}

// Table-style p_pass readings on a delta_r curve.
struct PassReadings {
  double at_max = 0.0;
  double at_break_even = 0.0;
  std::size_t imax = 0;
};

PassReadings readings(const Curve& c) {
  PassReadings r;
  r.imax = argmax(c.rate);
  r.at_max = c.p_pass[r.imax];
  std::size_t last = 0;
  for (std::size_t i = 0; i < c.rate.size(); ++i)
    if (c.rate[i] >= c.rate[0]) last = i;
  r.at_break_even = c.p_pass[last];
  return r;
}

std::vector<PointResult> sweep50;

void ac4_table() {
  const auto start = Clock::now();
  sweep50 = delta_r_sweep(50, 0.9, 0.01);
  const Curve c = curve(sweep50, 0.90);
  const PassReadings r = readings(c);
  const bool primary = c.ok && std::abs(r.at_max - 0.75) <= 0.05 && std::abs(r.at_break_even - 0.50) <= 0.05;
  std::string detail = "p_pass at max rate = " + fmt(r.at_max) + " (delta_r = " + fmt(c.delta_r[r.imax]) +
                       "), p_pass at break-even = " + fmt(r.at_break_even);
  if (primary) {
    report("AC4 postselection table", true, detail, start);
    return;
  }
  // Fallback: interior maximum with p_pass < 1 that moves to smaller p_pass at higher noise.
  const auto noisy_rows = delta_r_sweep(50, 0.9, 0.02);
  const Curve n = curve(noisy_rows, 0.90);
  const PassReadings rn = readings(n);
  const bool interior = r.imax > 0 && r.imax + 1 < c.rate.size() && r.at_max < 1.0;
  const bool shifted = rn.at_max < r.at_max;
  detail += "; fallback: xi=0.02 p_pass at max = " + fmt(rn.at_max) + ", interior=" + (interior ? "yes" : "no") +
            ", shifted left=" + (shifted ? "yes" : "no");
  report("AC4 postselection table", c.ok && n.ok && interior && shifted, detail, start);
}

std::vector<PointResult> sweep100;

void ac5_gain() {
  const auto start = Clock::now();
  sweep100 = delta_r_sweep(100, 0.8, 0.01);
  bool pass = true;
  std::ostringstream detail;
  for (const auto* rows : {&sweep50, &sweep100}) {
    const Curve c = curve(*rows, 0.95);
    const std::size_t imax = argmax(c.rate);
    const double gain = (c.rate[imax] - c.rate[0]) / std::abs(c.rate[0]);
    pass = pass && c.ok && c.rate[0] > 0.0 && gain > 0.0 && gain <= 0.20;
    detail << "L=" << fmt(rows->front().cfg.distance_km) << ": R(0)=" << fmt(c.rate[0]) << " R(" << fmt(c.delta_r[imax])
           << ")=" << fmt(c.rate[imax]) << " gain=" << fmt(100 * gain) << "%; ";
  }
  report("AC5 postselection gain", pass, detail.str(), start);
}

void ac6_soundness() {
  const auto start = Clock::now();
  std::ostringstream detail;
  bool pass = true;

  // Weak duality on every solve of a full pipeline: feasibility, each FW subproblem, certificate.
  ProtocolConfig cfg = desk(50, 0.9, 0.01, 0.95, 0.3);
  cfg.n_cutoff = 8;
  const ObjectiveContext ctx(cfg);
  const ConstraintSet cs = build_constraint_set(cfg);
  const InitialState init = initial_state(cfg, cs);
  int solves = 0;
  bool duality = true;
  auto check_solution = [&](const SDPSolution& s) {
    ++solves;
    duality = duality && s.dual_value <= s.primal_value + 1e-6 * (1.0 + std::abs(s.primal_value)) &&
              s.dual_slack.dim() > 0 && min_eigenvalue(s.dual_slack.matrix()) > -1e-8;
  };
  check_solution(solve_feasibility(cs, {}, gaussian_warm_start(cfg)).solution);
  HermitianOperator rho = init.rho;
  FwProblem problem;
  problem.value = [&](const HermitianOperator& r) { return ctx.objective_value(r); };
  problem.gradient = [&](const HermitianOperator& r) { return ctx.objective_gradient(r); };
  problem.direction = [&](const HermitianOperator& grad, const HermitianOperator& r) {
    FwSubproblemResult sub = solve_fw_subproblem(grad, cs, r);
    check_solution(sub.solution);
    return sub.delta;
  };
  FwOptions fwo;
  fwo.max_iterations = 10;
  const FwResult fw = frank_wolfe(problem, rho, fwo);
  const Step2Result s2 = step2_lower_bound(ctx, cs, fw.rho);
  duality = duality && s2.certified && s2.certificate.min_slack_eigenvalue >= -1e-9;
  pass = pass && duality;
  detail << "weak duality on " << solves << " solves + certificate: " << (duality ? "ok" : "violated") << "; ";

  // Properties over every engine run made by this binary.
  bool monotone = true, bounds = true, identity = true, ppass = true;
  int runs = 0;
  for (const auto* rows : all_runs) {
    for (const auto& p : *rows) {
      if (!p.ok) continue;
      ++runs;
      const KeyRateResult& r = p.result;
      for (std::size_t k = 1; k < r.fw_trace.size(); ++k)
        monotone = monotone && r.fw_trace[k].f <= r.fw_trace[k - 1].f + 1e-9;
      bounds = bounds && r.step2_lower <= r.step1_value;
      identity = identity && r.rate == r.step2_lower - r.p_pass * r.delta_EC;
      const ObjectiveContext c(p.cfg);
      ppass = ppass && std::abs(c.p_pass(r.rho_star) - r.p_pass) <= 1e-8;
    }
  }
  pass = pass && monotone && bounds && identity && ppass;
  detail << runs << " runs: FW monotone=" << monotone << " step2<=step1=" << bounds << " rate identity=" << identity
         << " p_pass agreement=" << ppass << "; ";

  // Rate nonincreasing in excess noise.
  std::vector<ProtocolConfig> noise;
  for (double xi : {0.005, 0.02}) noise.push_back(desk(50, 0.9, xi, 0.95, 0.0));
  const auto noise_rows = run_points(noise, 0);
  const double r005 = rate_at_beta(noise_rows[0], 0.95);
  const double r01 = rate_at_beta(sweep50.front(), 0.95);
  const double r02 = rate_at_beta(noise_rows[1], 0.95);
  const bool mono_xi = noise_rows[0].ok && noise_rows[1].ok && r005 >= r01 && r01 >= r02;
  pass = pass && mono_xi;
  detail << "R(xi=0.005,0.01,0.02) = " << fmt(r005) << ", " << fmt(r01) << ", " << fmt(r02);
  const double secs = std::chrono::duration<double>(Clock::now() - start).count();
  report("AC6 certificate soundness", pass && secs < 600, detail.str(), start);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void ac7_determinism() {
  const auto start = Clock::now();
  const fs::path dir = fs::temp_directory_path() / "cvqkd_acceptance_ac7";
  fs::remove_all(dir);
  fs::create_directories(dir);
  nlohmann::json spec = {
      {"base", {{"n_cutoff", 6}, {"fw_max_iters", 10}, {"alpha", 0.8}, {"xi", 0.01}}},
      {"axes", {{{"name", "L"}, {"values", {20, 50}}}, {{"name", "delta_r"}, {"values", {0.0, 0.4}}}}}};
  std::ofstream(dir / "spec.json") << spec.dump(2);
  bool ok = true;
  for (const char* run : {"a", "b"}) {
    const std::string cmd = std::string(CVQKD_CLI_PATH) + " sweep --config " + (dir / "spec.json").string() +
                            " --out " + (dir / (std::string(run) + ".csv")).string() + " > /dev/null 2>&1";
    const int raw = std::system(cmd.c_str());
    ok = ok && WIFEXITED(raw) && WEXITSTATUS(raw) == 0;
  }
  const std::string a = slurp(dir / "a.csv");
  const bool same = ok && !a.empty() && a == slurp(dir / "b.csv");
  report("AC7 determinism", same, same ? "two sweep runs produced byte-identical CSVs" : "CSV outputs differ", start);
}

void spot_qpsk() {
  const auto start = Clock::now();
  const double r8 = rate_at_beta(sweep50.front(), 0.95);
  std::vector<ProtocolConfig> q;
  for (double a : {0.6, 0.75, 0.9}) {
    ProtocolConfig cfg = desk(50, a, 0.01, 0.95, 0.0);
    cfg.num_states = 4;
    q.push_back(cfg);
  }
  static std::vector<PointResult> rows;
  rows = run_points(q, 0);
  all_runs.push_back(&rows);
  double r4 = -INFINITY;
  double best_alpha = 0.0;
  for (const auto& p : rows)
    if (p.ok && p.result.rate > r4) {
      r4 = p.result.rate;
      best_alpha = p.cfg.alpha;
    }
  const double rel = r4 > 0.0 ? (r8 - r4) / r4 : INFINITY;
  report("8PSK vs QPSK spot check", r8 > 0.0 && rel > 0.20,
         "R_8PSK(alpha=0.9) = " + fmt(r8) + ", best R_QPSK = " + fmt(r4) + " (alpha=" + fmt(best_alpha) +
             "), relative difference " + fmt(100 * rel) + "%",
         start);
}

}  // namespace

int main() {
  std::ios::sync_with_stdio(true);
  ac1_region_operators();
  ac2_gradient();
  ac3_loss_only();
  ac4_table();
  all_runs.push_back(&sweep50);
  ac5_gain();
  all_runs.push_back(&sweep100);
  spot_qpsk();
  ac6_soundness();
  ac7_determinism();
  std::printf("%d criterion(s) failed\n", failures);
  return failures == 0 ? 0 : 1;
}
