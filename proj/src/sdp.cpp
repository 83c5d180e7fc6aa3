#include "cvqkd/sdp.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <sstream>
#include <type_traits>

#include "cvqkd/errors.hpp"

namespace cvqkd {

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::inaccurate: return "inaccurate";
    case SolveStatus::primal_infeasible: return "primal_infeasible";
    case SolveStatus::dual_infeasible: return "dual_infeasible";
    case SolveStatus::failed: return "failed";
  }
  return "unknown";
}

void LinearSDP::validate() const {
  if (psd_dim < 1) throw PreconditionError("LinearSDP: psd_dim must be >= 1");
  if (cost.dim() != psd_dim) throw PreconditionError("LinearSDP: cost dimension mismatch");
  if (lp_dim < 0 || lp_cost.size() != lp_dim) throw PreconditionError("LinearSDP: lp_cost size mismatch");
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (r.psd.dim() != 0 && r.psd.dim() != psd_dim)
      throw PreconditionError("LinearSDP: row " + std::to_string(i) + " has wrong PSD dimension");
    for (const auto& [k, v] : r.lp) {
      (void)v;
      if (k < 0 || k >= lp_dim)
        throw PreconditionError("LinearSDP: row " + std::to_string(i) + " references LP variable " +
                                std::to_string(k));
    }
  }
  if (initial_primal && initial_primal->dim() != psd_dim)
    throw PreconditionError("LinearSDP: initial_primal dimension mismatch");
}

namespace {

inline double re(double v) { return v; }
inline double re(const Complex& v) { return v.real(); }

double row_gram(const SdpRow& a, const SdpRow& b) {
  double acc = (a.psd.dim() && b.psd.dim()) ? a.psd.inner(b.psd) : 0.0;
  for (const auto& [ka, va] : a.lp)
    for (const auto& [kb, vb] : b.lp)
      if (ka == kb) acc += va * vb;
  return acc;
}

double row_norm(const SdpRow& r) { return std::sqrt(std::max(row_gram(r, r), 0.0)); }

// Internal problem in the arithmetic chosen for the iterations. Rows are already scaled to
// unit norm; `scale` maps them back (original row = scale * internal row).
template <class Scalar>
struct Conic {
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  struct Entry {
    int row;
    int col;
    Scalar value;
  };

  int n = 0;
  Mat C;
  std::vector<std::vector<Entry>> A;
  int nl = 0;
  RVector cl;
  std::vector<std::vector<std::pair<int, double>>> lp_cols;  // per LP variable: (row, coef)
  RVector b;
  RVector scale;
  std::optional<Mat> X0;

  int m() const { return static_cast<int>(A.size()); }
};

Conic<Complex> to_complex_conic(const LinearSDP& p, const std::vector<int>& active, const RVector& scale) {
  Conic<Complex> c;
  c.n = p.psd_dim;
  c.C = p.cost.matrix();
  c.nl = p.lp_dim;
  c.cl = p.lp_cost;
  c.lp_cols.resize(c.nl);
  c.b.resize(static_cast<Eigen::Index>(active.size()));
  c.scale = scale;
  c.A.resize(active.size());
  for (std::size_t i = 0; i < active.size(); ++i) {
    const SdpRow& row = p.rows[active[i]];
    const double s = 1.0 / scale(i);
    for (const auto& e : row.psd.entries()) c.A[i].push_back({e.row, e.col, e.value * s});
    for (const auto& [k, v] : row.lp) c.lp_cols[k].push_back({static_cast<int>(i), v * s});
    c.b(i) = row.rhs * s;
  }
  if (p.initial_primal) c.X0 = p.initial_primal->matrix();
  return c;
}

RMatrix embed(const CMatrix& h) {
  const Eigen::Index n = h.rows();
  RMatrix out(2 * n, 2 * n);
  out.topLeftCorner(n, n) = h.real();
  out.topRightCorner(n, n) = -h.imag();
  out.bottomLeftCorner(n, n) = h.imag();
  out.bottomRightCorner(n, n) = h.real();
  return out;
}

CMatrix unembed(const RMatrix& m, double factor) {
  const Eigen::Index n = m.rows() / 2;
  CMatrix out(n, n);
  out.real() = factor * (m.topLeftCorner(n, n) + m.bottomRightCorner(n, n));
  out.imag() = factor * (m.bottomLeftCorner(n, n) - m.topRightCorner(n, n));
  return out;
}

Conic<double> to_real_conic(const Conic<Complex>& c) {
  Conic<double> r;
  r.n = 2 * c.n;
  r.C = 0.5 * embed(c.C);
  r.nl = c.nl;
  r.cl = c.cl;
  r.lp_cols = c.lp_cols;
  r.b = c.b;
  r.scale = c.scale;
  r.A.resize(c.A.size());
  const int n = c.n;
  for (std::size_t i = 0; i < c.A.size(); ++i) {
    for (const auto& e : c.A[i]) {
      const double a = 0.5 * e.value.real();
      const double b = 0.5 * e.value.imag();
      if (a != 0.0) {
        r.A[i].push_back({e.row, e.col, a});
        r.A[i].push_back({e.row + n, e.col + n, a});
      }
      if (b != 0.0) {
        r.A[i].push_back({e.row, e.col + n, -b});
        r.A[i].push_back({e.row + n, e.col, b});
      }
    }
  }
  if (c.X0) r.X0 = embed(*c.X0);
  return r;
}

template <class Scalar>
struct Iterate {
  using Mat = typename Conic<Scalar>::Mat;
  Mat X, S;
  RVector x, s, y;
};

template <class Scalar>
struct IpmOutcome {
  Iterate<Scalar> it;
  SolveStatus status = SolveStatus::failed;
  int iterations = 0;
};

template <class Scalar>
class InteriorPoint {
 public:
  using Mat = typename Conic<Scalar>::Mat;

  InteriorPoint(const Conic<Scalar>& p, const SdpOptions& o) : P(p), opt(o) {}

  IpmOutcome<Scalar> run();

 private:
  const Conic<Scalar>& P;
  const SdpOptions& opt;

  RVector apply(const Mat& X, const RVector& x) const {
    RVector out = RVector::Zero(P.m());
    for (int i = 0; i < P.m(); ++i) {
      double acc = 0.0;
      for (const auto& e : P.A[i]) acc += re(e.value * X(e.col, e.row));
      out(i) = acc;
    }
    for (int k = 0; k < P.nl; ++k)
      for (const auto& [i, v] : P.lp_cols[k]) out(i) += v * x(k);
    return out;
  }

  void adjoint(const RVector& y, Mat& Y, RVector& yl) const {
    Y.setZero(P.n, P.n);
    for (int i = 0; i < P.m(); ++i)
      for (const auto& e : P.A[i]) Y(e.row, e.col) += y(i) * e.value;
    yl.setZero(P.nl);
    for (int k = 0; k < P.nl; ++k)
      for (const auto& [i, v] : P.lp_cols[k]) yl(k) += v * y(i);
  }

  RMatrix schur(const Mat& X, const Mat& Sinv, const RVector& xs_ratio) const {
    const int m = P.m();
    RMatrix M = RMatrix::Zero(m, m);
    for (int i = 0; i < m; ++i) {
      for (int j = i; j < m; ++j) {
        Scalar acc(0);
        for (const auto& ei : P.A[i])
          for (const auto& ej : P.A[j]) acc += ei.value * X(ei.col, ej.row) * ej.value * Sinv(ej.col, ei.row);
        M(i, j) = re(acc);
      }
    }
    for (int k = 0; k < P.nl; ++k)
      for (const auto& [i, vi] : P.lp_cols[k])
        for (const auto& [j, vj] : P.lp_cols[k])
          if (i <= j) M(i, j) += vi * vj * xs_ratio(k);
    M.template triangularView<Eigen::StrictlyLower>() = M.transpose();
    return M;
  }

  static Mat herm(const Mat& m) { return 0.5 * (m + m.adjoint()); }

  static double inner(const Mat& a, const Mat& b) {
    return re((a.array() * b.array().conjugate()).sum());
  }

  // Largest alpha with X + alpha dX >= 0 (infinity if unbounded).
  static double max_step(const Mat& X, const Mat& dX) {
    Eigen::LLT<Mat> llt(X);
    if (llt.info() != Eigen::Success) return 0.0;
    Mat t = llt.matrixL().solve(dX);
    Mat u = llt.matrixL().solve(t.adjoint());
    Eigen::SelfAdjointEigenSolver<Mat> es(herm(u), Eigen::EigenvaluesOnly);
    const double lmin = es.eigenvalues()(0);
    return lmin >= 0.0 ? std::numeric_limits<double>::infinity() : -1.0 / lmin;
  }

  static double max_step(const RVector& x, const RVector& dx) {
    double a = std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < x.size(); ++k)
      if (dx(k) < 0.0) a = std::min(a, -x(k) / dx(k));
    return a;
  }
};

template <class Scalar>
IpmOutcome<Scalar> InteriorPoint<Scalar>::run() {
  const int n = P.n;
  const int nl = P.nl;
  const int m = P.m();
  const double cnorm = P.C.norm() + P.cl.norm();

  Iterate<Scalar> it;
  double zeta = std::max(10.0, std::sqrt(static_cast<double>(n)));
  for (int i = 0; i < m; ++i) zeta = std::max(zeta, n * (1.0 + std::abs(P.b(i))));
  const double eta = std::max({10.0, std::sqrt(static_cast<double>(n)), 1.0 + cnorm});
  if (P.X0) {
    Mat w = herm(*P.X0);
    Eigen::SelfAdjointEigenSolver<Mat> es(w, Eigen::EigenvaluesOnly);
    const double lmin = es.eigenvalues()(0);
    const double avg = std::max(std::abs(re(w.trace())) / n, 1e-12);
    it.X = w + (std::max(0.0, -lmin) + 0.1 * avg) * Mat::Identity(n, n);
    it.S = eta * Mat::Identity(n, n);
  } else {
    it.X = zeta * Mat::Identity(n, n);
    it.S = eta * Mat::Identity(n, n);
  }
  it.x = RVector::Constant(nl, zeta);
  it.s = RVector::Constant(nl, eta);
  it.y = RVector::Zero(m);

  IpmOutcome<Scalar> best;
  best.it = it;
  double best_merit = std::numeric_limits<double>::infinity();
  int stalled = 0;

  Mat Y, Rd, Sinv;
  RVector yl;
  for (int iter = 0; iter <= opt.max_iterations; ++iter) {
    const RVector rp = P.b - apply(it.X, it.x);
    adjoint(it.y, Y, yl);
    Rd = P.C - Y - it.S;
    const RVector rdl = P.cl - yl - it.s;
    const double pobj = inner(P.C, it.X) + P.cl.dot(it.x);
    const double dobj = P.b.dot(it.y);
    const double gap = inner(it.X, it.S) + it.x.dot(it.s);
    const double mu = gap / (n + nl);

    double pinf = 0.0;
    // Rows with a large norm are judged relative to that norm.
    for (int i = 0; i < m; ++i) pinf = std::max(pinf, std::abs(rp(i)) * std::min(P.scale(i), 1.0));
    const double dinf = std::sqrt(Rd.squaredNorm() + rdl.squaredNorm()) / (1.0 + cnorm);
    const double denom = 1.0 + std::abs(pobj) + std::abs(dobj);
    const double relgap = std::max(std::abs(pobj - dobj), std::abs(gap)) / denom;

    const double merit = std::max({pinf / opt.feasibility_tol, dinf / opt.dual_feasibility_tol,
                                   relgap / opt.gap_tol});
    if (merit < best_merit) {
      best_merit = merit;
      best.it = it;
      best.iterations = iter;
    }
    if (merit <= 1.0) {
      best.status = SolveStatus::optimal;
      return best;
    }
    if (iter == opt.max_iterations) break;

    // Divergence certificates.
    if (it.y.norm() > 1e12 && dobj > 1e10 && dinf < 1e-4) {
      best.status = SolveStatus::primal_infeasible;
      best.it = it;
      best.iterations = iter;
      return best;
    }
    if (it.X.norm() + it.x.norm() > 1e12 && pobj < -1e10 && pinf < 1e-4) {
      best.status = SolveStatus::dual_infeasible;
      best.it = it;
      best.iterations = iter;
      return best;
    }

    Eigen::LLT<Mat> sllt(it.S);
    if (sllt.info() != Eigen::Success) break;
    Sinv = sllt.solve(Mat::Identity(n, n));
    Sinv = herm(Sinv);
    const RVector sinv_l = it.s.cwiseInverse();
    const RVector xs_ratio = it.x.cwiseProduct(sinv_l);

    RMatrix M = schur(it.X, Sinv, xs_ratio);
    Eigen::LLT<RMatrix> mllt(M);
    if (mllt.info() != Eigen::Success) {
      const double reg = 1e-14 * std::max(1.0, M.diagonal().maxCoeff());
      M.diagonal().array() += reg;
      mllt.compute(M);
      if (mllt.info() != Eigen::Success) break;
    }

    const Mat XRdSinv = it.X * Rd * Sinv;
    const RVector xrdl = xs_ratio.cwiseProduct(rdl);

    // Direction for centering target tau and corrector terms.
    auto direction = [&](double tau, const Mat* corr, const RVector* corr_l, Mat& dX, RVector& dx,
                         RVector& dy, Mat& dS, RVector& ds) {
      Mat G = tau * Sinv - it.X - XRdSinv;
      if (corr) G -= *corr;
      RVector g = tau * sinv_l - it.x - xrdl;
      if (corr_l) g -= *corr_l;
      const RVector rhs = rp - apply(herm(G), g);
      dy = mllt.solve(rhs);
      Mat Ady;
      RVector adyl;
      adjoint(dy, Ady, adyl);
      dS = Rd - Ady;
      ds = rdl - adyl;
      Mat T = tau * Sinv - it.X - it.X * dS * Sinv;
      if (corr) T -= *corr;
      dX = herm(T);
      dx = tau * sinv_l - it.x - xs_ratio.cwiseProduct(ds);
      if (corr_l) dx -= *corr_l;
    };

    Mat dX, dS;
    RVector dx, dy, ds;
    direction(0.0, nullptr, nullptr, dX, dx, dy, dS, ds);
    const double ap_aff = std::min({1.0, max_step(it.X, dX), max_step(it.x, dx)});
    const double ad_aff = std::min({1.0, max_step(it.S, dS), max_step(it.s, ds)});
    const double gap_aff = inner(it.X + ap_aff * dX, it.S + ad_aff * dS) +
                           (it.x + ap_aff * dx).dot(it.s + ad_aff * ds);
    double sigma = std::pow(std::max(gap_aff, 0.0) / gap, 3);
    sigma = std::clamp(sigma, 0.0, 1.0);

    const Mat corr = dX * dS * Sinv;
    const RVector corr_l = dx.cwiseProduct(ds).cwiseProduct(sinv_l);
    direction(sigma * mu, &corr, &corr_l, dX, dx, dy, dS, ds);

    const double frac = std::min(opt.step_fraction, 0.9 + 0.09 * std::min(ap_aff, ad_aff));
    const double ap = std::min(1.0, frac * std::min(max_step(it.X, dX), max_step(it.x, dx)));
    const double ad = std::min(1.0, frac * std::min(max_step(it.S, dS), max_step(it.s, ds)));

    it.X = herm(it.X + ap * dX);
    it.x += ap * dx;
    it.S = herm(it.S + ad * dS);
    it.s += ad * ds;
    it.y += ad * dy;

    stalled = (ap < 1e-8 && ad < 1e-8) ? stalled + 1 : 0;
    if (stalled >= 3) break;
  }
  best.status = SolveStatus::inaccurate;
  return best;
}

std::atomic<long> g_dump_counter{0};

void maybe_dump(const LinearSDP& problem, const SdpOptions& options) {
  if (options.dump_dir.empty()) return;
  std::filesystem::create_directories(options.dump_dir);
  const long k = g_dump_counter.fetch_add(1);
  std::ofstream out(std::filesystem::path(options.dump_dir) / ("sdp_" + std::to_string(k) + ".txt"));
  write_problem(problem, out);
}

template <class Scalar>
IpmOutcome<Scalar> run_ipm(const Conic<Scalar>& c, const SdpOptions& options) {
  return InteriorPoint<Scalar>(c, options).run();
}

}  // namespace

std::vector<int> dependent_rows(const LinearSDP& problem, double rel_tol) {
  const int m = static_cast<int>(problem.rows.size());
  std::vector<int> dropped;
  if (m == 0) return dropped;
  RMatrix Q(m, m);
  RVector norms(m);
  for (int i = 0; i < m; ++i) norms(i) = std::max(row_norm(problem.rows[i]), 1e-300);
  for (int i = 0; i < m; ++i)
    for (int j = i; j < m; ++j) Q(i, j) = Q(j, i) = row_gram(problem.rows[i], problem.rows[j]) / (norms(i) * norms(j));
  // Sequential Cholesky in row order: a row is dependent when its pivot (squared distance to
  // the span of the accepted rows) is tiny.
  std::vector<int> kept;
  RMatrix L = RMatrix::Zero(m, m);
  for (int i = 0; i < m; ++i) {
    const int r = static_cast<int>(kept.size());
    RVector li(r);
    for (int a = 0; a < r; ++a) {
      double v = Q(i, kept[a]);
      for (int b = 0; b < a; ++b) v -= L(a, b) * li(b);
      li(a) = v / L(a, a);
    }
    const double pivot = Q(i, i) - li.squaredNorm();
    if (row_norm(problem.rows[i]) == 0.0 || pivot <= rel_tol) {
      dropped.push_back(i);
      continue;
    }
    for (int b = 0; b < r; ++b) L(r, b) = li(b);
    L(r, r) = std::sqrt(pivot);
    kept.push_back(i);
  }
  return dropped;
}

SDPSolution solve(const LinearSDP& problem, const SdpOptions& options) {
  problem.validate();
  maybe_dump(problem, options);

  SDPSolution sol;
  sol.dropped_rows = dependent_rows(problem);
  if (!sol.dropped_rows.empty()) {
    std::clog << "[sdp] warning: dropping " << sol.dropped_rows.size()
              << " linearly dependent constraint row(s)\n";
  }
  std::vector<int> active;
  {
    std::size_t d = 0;
    for (int i = 0; i < static_cast<int>(problem.rows.size()); ++i) {
      if (d < sol.dropped_rows.size() && sol.dropped_rows[d] == i) {
        ++d;
        continue;
      }
      active.push_back(i);
    }
  }
  RVector scale(static_cast<Eigen::Index>(active.size()));
  for (std::size_t i = 0; i < active.size(); ++i) scale(i) = row_norm(problem.rows[active[i]]);

  const Conic<Complex> cc = to_complex_conic(problem, active, scale);
  CMatrix X, S;
  RVector x, s, y_scaled;
  if (options.representation == Representation::complex_native) {
    auto out = run_ipm(cc, options);
    sol.status = out.status;
    sol.iterations = out.iterations;
    X = out.it.X;
    S = out.it.S;
    x = out.it.x;
    s = out.it.s;
    y_scaled = out.it.y;
  } else {
    const Conic<double> rc = to_real_conic(cc);
    auto out = run_ipm(rc, options);
    sol.status = out.status;
    sol.iterations = out.iterations;
    X = unembed(out.it.X, 0.5);
    S = unembed(out.it.S, 1.0);
    x = out.it.x;
    s = out.it.s;
    y_scaled = out.it.y;
  }

  sol.primal = HermitianOperator(X);
  sol.dual_slack = HermitianOperator(S);
  sol.lp_primal = x;
  sol.lp_dual_slack = s;
  sol.dual = RVector::Zero(static_cast<Eigen::Index>(problem.rows.size()));
  for (std::size_t i = 0; i < active.size(); ++i) sol.dual(active[i]) = y_scaled(i) / scale(i);

  // Residuals and objective values in the caller's units over all rows.
  sol.primal_value = problem.cost.inner(sol.primal) + problem.lp_cost.dot(x);
  sol.dual_value = 0.0;
  CMatrix rd = problem.cost.matrix() - S;
  RVector rdl = problem.lp_cost - s;
  double pres = 0.0;
  for (std::size_t i = 0; i < problem.rows.size(); ++i) {
    const SdpRow& row = problem.rows[i];
    double lhs = row.psd.dim() ? row.psd.inner(X) : 0.0;
    for (const auto& [k, v] : row.lp) {
      lhs += v * x(k);
      rdl(k) -= v * sol.dual(i);
    }
    pres = std::max(pres, std::abs(lhs - row.rhs));
    sol.dual_value += row.rhs * sol.dual(i);
    if (row.psd.dim()) row.psd.add_to(rd, -sol.dual(i));
  }
  sol.primal_residual = pres;
  // A dropped row with a different right-hand side makes the system inconsistent.
  for (int i : sol.dropped_rows) {
    const SdpRow& row = problem.rows[i];
    double lhs = row.psd.dim() ? row.psd.inner(X) : 0.0;
    for (const auto& [k, v] : row.lp) lhs += v * x(k);
    if (std::abs(lhs - row.rhs) > 1e-6 * (1.0 + std::abs(row.rhs))) sol.status = SolveStatus::primal_infeasible;
  }
  sol.dual_residual = std::sqrt(rd.squaredNorm() + rdl.squaredNorm()) /
                      (1.0 + problem.cost.frobenius_norm() + problem.lp_cost.norm());
  sol.relative_gap = std::abs(sol.primal_value - sol.dual_value) /
                     (1.0 + std::abs(sol.primal_value) + std::abs(sol.dual_value));
  sol.min_primal_eigenvalue = min_eigenvalue(X);
  return sol;
}

// ---------------------------------------------------------------------------
// Dump format:
//   cvqkd-sdp 1
//   psd_dim <n> lp_dim <k> rows <m>
//   cost <nnz>            followed by nnz lines "i j re im"
//   lp_cost               followed by k values
//   row <rhs> <psd_nnz> <lp_nnz>   followed by psd triplets then "k coef" lines

void write_problem(const LinearSDP& p, std::ostream& out) {
  out << std::setprecision(17);
  out << "cvqkd-sdp 1\n";
  out << "psd_dim " << p.psd_dim << " lp_dim " << p.lp_dim << " rows " << p.rows.size() << "\n";
  const SparseHermitian cost(p.cost);
  out << "cost " << cost.nonzeros() << "\n";
  for (const auto& e : cost.entries()) out << e.row << ' ' << e.col << ' ' << e.value.real() << ' ' << e.value.imag() << "\n";
  out << "lp_cost\n";
  for (int k = 0; k < p.lp_dim; ++k) out << p.lp_cost(k) << "\n";
  for (const auto& r : p.rows) {
    out << "row " << r.rhs << ' ' << r.psd.nonzeros() << ' ' << r.lp.size() << "\n";
    for (const auto& e : r.psd.entries()) out << e.row << ' ' << e.col << ' ' << e.value.real() << ' ' << e.value.imag() << "\n";
    for (const auto& [k, v] : r.lp) out << k << ' ' << v << "\n";
  }
}

LinearSDP read_problem(std::istream& in) {
  auto expect = [&in](const std::string& word) {
    std::string w;
    if (!(in >> w) || w != word) throw PreconditionError("read_problem: expected '" + word + "'");
  };
  expect("cvqkd-sdp");
  int version = 0;
  in >> version;
  if (version != 1) throw PreconditionError("read_problem: unsupported version");
  LinearSDP p;
  std::size_t m = 0;
  expect("psd_dim");
  in >> p.psd_dim;
  expect("lp_dim");
  in >> p.lp_dim;
  expect("rows");
  in >> m;
  auto read_sparse = [&in](int dim, std::size_t nnz) {
    CMatrix mat = CMatrix::Zero(dim, dim);
    for (std::size_t k = 0; k < nnz; ++k) {
      int i = 0, j = 0;
      double a = 0, b = 0;
      in >> i >> j >> a >> b;
      mat(i, j) = Complex(a, b);
    }
    return mat;
  };
  expect("cost");
  std::size_t nnz = 0;
  in >> nnz;
  p.cost = HermitianOperator(read_sparse(p.psd_dim, nnz));
  expect("lp_cost");
  p.lp_cost.resize(p.lp_dim);
  for (int k = 0; k < p.lp_dim; ++k) in >> p.lp_cost(k);
  for (std::size_t r = 0; r < m; ++r) {
    expect("row");
    SdpRow row;
    std::size_t pnnz = 0, lnnz = 0;
    in >> row.rhs >> pnnz >> lnnz;
    row.psd = SparseHermitian(HermitianOperator(read_sparse(p.psd_dim, pnnz)));
    for (std::size_t k = 0; k < lnnz; ++k) {
      int idx = 0;
      double v = 0;
      in >> idx >> v;
      row.lp.push_back({idx, v});
    }
    p.rows.push_back(std::move(row));
  }
  if (!in) throw PreconditionError("read_problem: truncated input");
  return p;
}

// ---------------------------------------------------------------------------

FeasibilityResult solve_feasibility(const ConstraintSet& cs, const SdpOptions& options,
                                    const std::optional<HermitianOperator>& warm_start) {
  const int m = static_cast<int>(cs.size());
  LinearSDP p;
  p.psd_dim = cs.dim;
  p.cost = HermitianOperator::zero(cs.dim);
  // LP variables: t, then u_0..u_{m-1}, then w_0..w_{m-1}.
  p.lp_dim = 1 + 2 * m;
  p.lp_cost = RVector::Zero(p.lp_dim);
  p.lp_cost(0) = 1.0;
  for (int i = 0; i < m; ++i) {
    const auto& c = cs.rows[i];
    p.rows.push_back({c.op, {{0, 1.0}, {1 + i, -1.0}}, c.value});       // Tr + t - u = gamma
    p.rows.push_back({c.op, {{0, -1.0}, {1 + m + i, 1.0}}, c.value});   // Tr - t + w = gamma
  }
  if (warm_start) p.initial_primal = *warm_start;
  SdpOptions opt = options;
  // t is an absolute residual, so the gap test has to be absolute as well.
  opt.gap_tol = std::min(opt.gap_tol, 1e-10);

  FeasibilityResult out;
  out.solution = solve(p, opt);
  if (warm_start && out.solution.status != SolveStatus::optimal) {
    p.initial_primal.reset();
    out.solution = solve(p, opt);
  }
  out.rho = out.solution.primal;
  out.t = out.solution.lp_primal.size() ? out.solution.lp_primal(0) : 0.0;
  out.max_residual = cs.max_residual(out.rho);
  return out;
}

FwSubproblemResult solve_fw_subproblem(const HermitianOperator& gradient, const ConstraintSet& cs,
                                       const HermitianOperator& rho_k, const SdpOptions& options) {
  if (gradient.dim() != cs.dim || rho_k.dim() != cs.dim)
    throw PreconditionError("solve_fw_subproblem: dimension mismatch");
  LinearSDP p;
  p.psd_dim = cs.dim;
  p.cost = gradient;
  p.lp_dim = 0;
  p.lp_cost = RVector::Zero(0);
  for (const auto& c : cs.rows) p.rows.push_back({c.op, {}, c.value});
  FwSubproblemResult out;
  out.solution = solve(p, options);
  out.delta = out.solution.primal - rho_k;
  out.linearized_value = gradient.inner(out.delta);
  return out;
}

DualCertificate solve_step2_dual(const HermitianOperator& gradient, const ConstraintSet& cs,
                                 double eps_prime, const SdpOptions& options) {
  if (gradient.dim() != cs.dim) throw PreconditionError("solve_step2_dual: dimension mismatch");
  if (!(eps_prime >= 0.0)) throw PreconditionError("solve_step2_dual: eps' must be >= 0");
  const int m = static_cast<int>(cs.size());

  // Primal of the certificate: min Tr[grad rho] s.t. |Tr[Gamma_i rho] - gamma_i| <= eps'.
  // With u = eps' * u~ the box rows read Tr[Gamma rho] - eps' u~ = gamma - eps', u~ + w~ = 2.
  LinearSDP p;
  p.psd_dim = cs.dim;
  p.cost = gradient;
  if (eps_prime > 0.0) {
    p.lp_dim = 2 * m;
    p.lp_cost = RVector::Zero(p.lp_dim);
    for (int i = 0; i < m; ++i) p.rows.push_back({cs.rows[i].op, {{i, -eps_prime}}, cs.rows[i].value - eps_prime});
    for (int i = 0; i < m; ++i) p.rows.push_back({SparseHermitian(), {{i, 1.0}, {m + i, 1.0}}, 2.0});
  } else {
    p.lp_dim = 0;
    p.lp_cost = RVector::Zero(0);
    for (const auto& c : cs.rows) p.rows.push_back({c.op, {}, c.value});
  }
  const SDPSolution sol = solve(p, options);

  DualCertificate cert;
  cert.status = sol.status;
  cert.y = sol.dual.head(m);

  auto slack_min = [&](const RVector& y) {
    CMatrix slack = gradient.matrix();
    for (int i = 0; i < m; ++i) cs.rows[i].op.add_to(slack, -y(i));
    return min_eigenvalue(HermitianOperator(slack).matrix());
  };

  if (!cert.y.allFinite() || sol.status == SolveStatus::failed ||
      sol.status == SolveStatus::primal_infeasible || sol.status == SolveStatus::dual_infeasible) {
    cert.valid = false;
    cert.value = -std::numeric_limits<double>::infinity();
    return cert;
  }

  double lmin = slack_min(cert.y);
  if (lmin < 0.0 && cs.identity_combination.size() == static_cast<std::size_t>(m)) {
    // sum_i c_i Gamma_i = I, so moving y along c lowers sum y Gamma by a multiple of I.
    const double shift = lmin - 1e-12 * (1.0 + gradient.frobenius_norm());
    for (int i = 0; i < m; ++i) cert.y(i) += shift * cs.identity_combination[i];
    cert.repair_shift = shift;
    lmin = slack_min(cert.y);
  }
  cert.min_slack_eigenvalue = lmin;
  cert.z = cert.y.cwiseAbs();
  double value = 0.0;
  for (int i = 0; i < m; ++i) value += cs.rows[i].value * cert.y(i);
  value -= eps_prime * cert.z.sum();
  cert.valid = lmin >= -1e-9;
  cert.value = cert.valid ? value : -std::numeric_limits<double>::infinity();
  return cert;
}

}  // namespace cvqkd
