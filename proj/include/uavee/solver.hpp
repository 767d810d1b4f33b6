#pragma once

#include <chrono>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>

#include "uavee/convex_program.hpp"
#include "uavee/errors.hpp"

// Primal-dual interior-point method for smooth convex programs
//
//   minimize f0(x)  s.t.  A x = b,  f_i(x) <= 0.
//
// Newton steps on the barrier-perturbed KKT conditions, with the inequality
// multipliers eliminated, factor the quasi-definite system
//
//   [ H_pd + dI    A^T ] [dx]   = - [ grad f0 + sum_i grad f_i mu / (-f_i) ]
//   [ A           -dI  ] [nu]      [ A x - b                              ]
//
// with H_pd = hess f0 + sum_i lambda_i hess f_i + sum_i lambda_i/(-f_i) grad f_i grad f_i^T.
// The barrier parameter mu is held until the perturbed KKT error drops below a
// multiple of it, then reduced superlinearly. Steps backtrack on the barrier
// merit f0 - mu sum log(-f_i) + rho |A x - b|_1, which keeps every iterate
// strictly feasible. Equalities may start infeasible; inequalities need a
// strictly feasible start.

namespace uavee {

struct SolverOptions {
  double tolerance = 1e-8;   // on stationarity, primal residual and surrogate gap
  int max_iterations = 200;
  double initial_barrier = 0.1;   // mu_0, relative to max(1, |f0(x_0)|)
  double centering = 10.0;        // mu shrinks once the KKT error is below centering * mu
  double barrier_decrease = 0.2;  // mu <- min(barrier_decrease * mu, mu^barrier_exponent)
  double barrier_exponent = 1.5;
  double dual_band = 1e10;        // lambda_i stays within this factor of mu / (-f_i)
  double step_fraction = 0.99;
  double ls_alpha = 0.01;
  double ls_beta = 0.5;
  double regularization = 1e-9;
  double max_regularization = 1e-3;
  int refinement_steps = 3;
  // Degenerate faces (many weakly active bounds) can stall stationarity just
  // above `tolerance` at the smallest barrier. Stop as `acceptable` once it
  // has stayed below this for `acceptable_iterations` iterations there, with
  // the primal residual and gap at full tolerance. 0 disables.
  double acceptable_stationarity = 1e-6;
  int acceptable_iterations = 15;
  bool dense = false;        // dense LU instead of sparse LDL^T
  bool record_trace = false;
};

enum class SolveStatus { optimal, acceptable, max_iter, numerical_failure };

inline const char* status_name(SolveStatus s) {
  switch (s) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::acceptable: return "acceptable";
    case SolveStatus::max_iter: return "max_iter";
    default: return "numerical_failure";
  }
}

/// Infinity norms of the KKT conditions.
struct KktResiduals {
  double stationarity = 0.0;     // |grad f0 + sum lambda_i grad f_i + A^T nu|
  double primal = 0.0;           // max(|A x - b|, max_i f_i^+)
  double dual = 0.0;             // max_i (-lambda_i)^+
  double complementarity = 0.0;  // max_i |lambda_i f_i|

  double max() const { return std::max({stationarity, primal, dual, complementarity}); }
};

struct TraceRow {
  int iteration = 0;
  double barrier = 0.0;  // 1 / t
  double gap = 0.0;
  double stationarity = 0.0;
  double primal = 0.0;
  double step = 0.0;
  double merit_before = 0.0;
  double merit_after = 0.0;
  double regularization = 0.0;
};

struct Solution {
  VectorXd x;
  VectorXd lambda;  // inequality multipliers
  VectorXd nu;      // equality multipliers
  double objective = 0.0;
  KktResiduals residuals;
  int iterations = 0;
  SolveStatus status = SolveStatus::numerical_failure;
  std::string message;
  std::vector<TraceRow> trace;
};

namespace detail {

// Inequality evaluated on its own support: value, gradient and dense Hessian.
struct LocalFunction {
  std::vector<int> support;
  double value = 0.0;
  std::vector<double> grad;
  std::vector<double> hess;  // row-major support x support

  explicit LocalFunction(const SmoothFunction& f) : support(f.support()) {
    grad.resize(support.size());
    hess.resize(support.size() * support.size());
  }

  int slot(int var) const {
    for (std::size_t k = 0; k < support.size(); ++k)
      if (support[k] == var) return static_cast<int>(k);
    return -1;
  }

  void evaluate(const SmoothFunction& f, const VectorXd& x, bool with_hessian) {
    const std::size_t k = support.size();
    std::fill(grad.begin(), grad.end(), 0.0);
    if (with_hessian) std::fill(hess.begin(), hess.end(), 0.0);
    value = f.constant;
    for (const auto& [i, c] : f.linear) {
      value += c * x[i];
      grad[slot(i)] += c;
    }
    for (const auto& t : f.terms) {
      const auto d = term_derivs(t, x);
      value += d.value;
      int pos[terms::kMaxTermVars];
      for (int a = 0; a < d.size; ++a) pos[a] = slot(d.idx[a]);
      for (int a = 0; a < d.size; ++a) {
        grad[pos[a]] += d.grad[a];
        if (with_hessian)
          for (int b = 0; b < d.size; ++b) hess[pos[a] * k + pos[b]] += d.hess[a][b];
      }
    }
  }
};

class KktSystem {
 public:
  KktSystem(int n, int p, bool dense) : n_(n), p_(p), dense_(dense) {}

  // Factors the equilibrated K = [H + dI, A^T; A, -dI]; returns false on
  // failure. The symmetric Ruiz scaling is recomputed per call so the static
  // regularization acts relative to O(1) entries.
  bool factor(const std::vector<Triplet>& h_entries, const SparseMatrix& A, double reg) {
    reg_ = reg;
    std::vector<Triplet> t;
    t.reserve(h_entries.size() + 2 * A.nonZeros() + n_ + p_);
    t.insert(t.end(), h_entries.begin(), h_entries.end());
    for (int k = 0; k < A.outerSize(); ++k)
      for (SparseMatrix::InnerIterator it(A, k); it; ++it) {
        t.emplace_back(n_ + it.row(), it.col(), it.value());
        t.emplace_back(it.col(), n_ + it.row(), it.value());
      }
    // Explicit zero diagonal keeps the sparsity pattern fixed across calls.
    for (int i = 0; i < n_ + p_; ++i) t.emplace_back(i, i, 0.0);
    K_.resize(n_ + p_, n_ + p_);
    K_.setFromTriplets(t.begin(), t.end());
    equilibrate();
    Kreg_ = K_;
    for (int i = 0; i < n_ + p_; ++i) Kreg_.coeffRef(i, i) += i < n_ ? reg : -reg;
    if (dense_) {
      lu_.compute(Eigen::MatrixXd(Kreg_));
      return std::isfinite(lu_.matrixLU().diagonal().cwiseAbs().minCoeff()) &&
             lu_.matrixLU().diagonal().cwiseAbs().minCoeff() > 0.0;
    }
    if (!analyzed_) {
      ldlt_.analyzePattern(Kreg_);
      analyzed_ = true;
    }
    ldlt_.factorize(Kreg_);
    if (ldlt_.info() != Eigen::Success) return false;
    const auto& D = ldlt_.vectorD();
    return D.allFinite() && D.cwiseAbs().minCoeff() > 0.0;
  }

  // Solves the unregularized system, using the regularized factors as a
  // preconditioner for a few steps of iterative refinement.
  VectorXd solve(const VectorXd& rhs, int refinement_steps) const {
    const VectorXd r = scale_.cwiseProduct(rhs);
    VectorXd y = apply_inverse(r);
    for (int k = 0; k < refinement_steps; ++k) {
      const VectorXd res = r - K_ * y;
      if (res.lpNorm<Eigen::Infinity>() <= 1e-15 * std::max(1.0, r.lpNorm<Eigen::Infinity>())) break;
      y += apply_inverse(res);
    }
    return scale_.cwiseProduct(y);
  }

 private:
  void equilibrate() {
    const int dim = n_ + p_;
    scale_ = VectorXd::Ones(dim);
    VectorXd colmax(dim);
    for (int pass = 0; pass < 10; ++pass) {
      colmax.setZero();
      for (int k = 0; k < K_.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(K_, k); it; ++it)
          colmax[k] = std::max(colmax[k], std::abs(it.value()));
      bool done = true;
      for (int i = 0; i < dim; ++i) {
        colmax[i] = colmax[i] > 0.0 ? 1.0 / std::sqrt(colmax[i]) : 1.0;
        if (std::abs(colmax[i] - 1.0) > 1e-2) done = false;
      }
      for (int k = 0; k < K_.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(K_, k); it; ++it) it.valueRef() *= colmax[it.row()] * colmax[k];
      scale_ = scale_.cwiseProduct(colmax);
      if (done) break;
    }
  }

  VectorXd apply_inverse(const VectorXd& rhs) const {
    if (dense_) return lu_.solve(rhs);
    return ldlt_.solve(rhs);
  }

  int n_, p_;
  bool dense_;
  bool analyzed_ = false;
  double reg_ = 0.0;
  SparseMatrix K_;     // equilibrated, unregularized
  SparseMatrix Kreg_;  // equilibrated, regularized
  VectorXd scale_;
  Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt_;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
};

}  // namespace detail

/// KKT residual norms of (x, lambda, nu) for `program`.
inline KktResiduals kkt_residuals(const ConvexProgram& program, const VectorXd& x,
                                  const VectorXd& lambda, const VectorXd& nu) {
  if (x.size() != program.num_vars || lambda.size() != program.num_inequalities() ||
      nu.size() != program.num_equalities())
    throw std::invalid_argument("kkt_residuals: dimension mismatch");
  KktResiduals r;
  VectorXd g = VectorXd::Zero(program.num_vars);
  program.objective.add_gradient(x, 1.0, g);
  if (program.num_equalities() > 0) {
    g += program.A.transpose() * nu;
    r.primal = (program.A * x - program.b).lpNorm<Eigen::Infinity>();
  }
  for (int i = 0; i < program.num_inequalities(); ++i) {
    const auto& f = program.inequalities[i];
    const double fi = f.value(x);
    f.add_gradient(x, lambda[i], g);
    r.primal = std::max(r.primal, std::max(0.0, fi));
    r.dual = std::max(r.dual, std::max(0.0, -lambda[i]));
    r.complementarity = std::max(r.complementarity, std::abs(lambda[i] * fi));
  }
  r.stationarity = g.lpNorm<Eigen::Infinity>();
  return r;
}

/// Logarithmic barrier -sum_i log(-f_i(x)) with its gradient and Hessian.
/// Returns +inf outside the strict interior.
struct BarrierEval {
  double value = 0.0;
  VectorXd gradient;
  Eigen::MatrixXd hessian;
};

inline BarrierEval log_barrier(const ConvexProgram& program, const VectorXd& x) {
  BarrierEval out;
  out.gradient = VectorXd::Zero(program.num_vars);
  out.hessian = Eigen::MatrixXd::Zero(program.num_vars, program.num_vars);
  for (const auto& f : program.inequalities) {
    if (!f.in_domain(x)) {
      out.value = std::numeric_limits<double>::infinity();
      return out;
    }
    detail::LocalFunction lf(f);
    lf.evaluate(f, x, true);
    if (!(lf.value < 0.0)) {
      out.value = std::numeric_limits<double>::infinity();
      return out;
    }
    const double s = -lf.value;
    out.value -= std::log(s);
    const std::size_t k = lf.support.size();
    for (std::size_t a = 0; a < k; ++a) {
      out.gradient[lf.support[a]] += lf.grad[a] / s;
      for (std::size_t b = 0; b < k; ++b)
        out.hessian(lf.support[a], lf.support[b]) += lf.hess[a * k + b] / s + lf.grad[a] * lf.grad[b] / (s * s);
    }
  }
  return out;
}

/// Solves `program` from `warm_start` (or the program's initial point). The
/// start must strictly satisfy every inequality; equalities may be violated.
inline Solution solve(const ConvexProgram& program, const std::optional<VectorXd>& warm_start = std::nullopt,
                      const SolverOptions& opts = {}) {
  const int n = program.num_vars;
  const int p = program.num_equalities();
  const int m = program.num_inequalities();
  if (opts.tolerance <= 0.0 || opts.max_iterations < 1)
    throw std::invalid_argument("solve: tolerance must be > 0 and max_iterations >= 1");
  if (p > 0 && (program.A.cols() != n || program.b.size() != p))
    throw std::invalid_argument("solve: equality dimensions do not match the variable count");

  Solution sol;
  if (warm_start) {
    sol.x = *warm_start;
  } else if (program.initial_point) {
    sol.x = *program.initial_point;
  } else {
    sol.x = VectorXd::Zero(n);
  }
  if (sol.x.size() != n) throw std::invalid_argument("solve: start point has the wrong dimension");
  if (!program.strictly_feasible(sol.x))
    throw std::invalid_argument("solve: start point must strictly satisfy every inequality");

  VectorXd& x = sol.x;
  VectorXd& nu = sol.nu;
  VectorXd& lambda = sol.lambda;
  nu = VectorXd::Zero(p);
  lambda = VectorXd::Zero(m);

  std::vector<detail::LocalFunction> locals;
  locals.reserve(m);
  for (const auto& f : program.inequalities) locals.emplace_back(f);
  auto eval_all = [&](const VectorXd& at, bool hessian) {
    for (int i = 0; i < m; ++i) locals[i].evaluate(program.inequalities[i], at, hessian);
  };

  // Barrier merit f0 - mu sum log(-f_i) + rho |A x - b|_1; +inf outside the
  // strict interior or a term's domain.
  // `eq` is A at - b, passed in so trial points can form it as r + a A dx
  // without cancellation against large coordinates.
  auto merit = [&](const VectorXd& at, const VectorXd& eq, double mu, double rho) {
    if (!program.objective.in_domain(at)) return std::numeric_limits<double>::infinity();
    double v = program.objective.value(at);
    for (const auto& f : program.inequalities) {
      if (!f.in_domain(at)) return std::numeric_limits<double>::infinity();
      const double fi = f.value(at);
      if (!(fi < 0.0)) return std::numeric_limits<double>::infinity();
      v -= mu * std::log(-fi);
    }
    if (p > 0) v += rho * eq.lpNorm<1>();
    return v;
  };

  eval_all(x, false);
  const double scale = std::max(1.0, std::abs(program.objective.value(x)));
  double mu = m > 0 ? opts.initial_barrier * scale : 0.0;
  for (int i = 0; i < m; ++i) lambda[i] = mu / -locals[i].value;

  // Stationarity, primal infeasibility and complementarity error against mu.
  struct Errors {
    double stationarity, primal, centrality;
  };
  auto errors = [&](double target) {
    VectorXd g = VectorXd::Zero(n);
    program.objective.add_gradient(x, 1.0, g);
    Errors e{0.0, 0.0, 0.0};
    if (p > 0) {
      g += program.A.transpose() * nu;
      e.primal = (program.A * x - program.b).lpNorm<Eigen::Infinity>();
    }
    for (int i = 0; i < m; ++i) {
      const auto& lf = locals[i];
      for (std::size_t a = 0; a < lf.support.size(); ++a) g[lf.support[a]] += lambda[i] * lf.grad[a];
      e.centrality = std::max(e.centrality, std::abs(-lambda[i] * lf.value - target));
    }
    e.stationarity = g.lpNorm<Eigen::Infinity>();
    return e;
  };

  detail::KktSystem kkt(n, p, opts.dense);
  Eigen::SimplicialLDLT<SparseMatrix> normal;
  bool normal_ready = false;
  int stalled = 0;
  std::vector<Triplet> h;
  double reg = opts.regularization;
  double rho = 1.0;
  const double mu_min = opts.tolerance / (10.0 * std::max(1, m));
  sol.status = SolveStatus::max_iter;
  sol.message = "iteration limit reached";

  for (int iter = 0; iter < opts.max_iterations; ++iter) {
    eval_all(x, true);
    Errors err = errors(mu);
    double gap = 0.0;
    for (int i = 0; i < m; ++i) gap += -locals[i].value * lambda[i];
    sol.iterations = iter;
    // On flat optimal faces the equality multipliers lag far behind the
    // primal iterate; once everything else has converged, refit them.
    if (p > 0 && err.stationarity > opts.tolerance && err.primal <= opts.tolerance && gap <= opts.tolerance) {
      if (!normal_ready) {
        normal.compute(program.A * program.A.transpose());
        normal_ready = true;
      }
      if (normal.info() == Eigen::Success) {
        VectorXd g = VectorXd::Zero(n);
        program.objective.add_gradient(x, 1.0, g);
        for (int i = 0; i < m; ++i) {
          const auto& lf = locals[i];
          for (std::size_t a = 0; a < lf.support.size(); ++a) g[lf.support[a]] += lambda[i] * lf.grad[a];
        }
        const VectorXd fit = normal.solve(-(program.A * g));
        const double st = (g + program.A.transpose() * fit).lpNorm<Eigen::Infinity>();
        if (fit.allFinite() && st < err.stationarity) {
          nu = fit;
          err.stationarity = st;
        }
      }
    }
    if (err.stationarity <= opts.tolerance && err.primal <= opts.tolerance && gap <= opts.tolerance) {
      sol.status = SolveStatus::optimal;
      sol.message.clear();
      break;
    }
    const bool near = (m == 0 || mu <= mu_min) && err.primal <= opts.tolerance && gap <= opts.tolerance &&
                      err.stationarity <= opts.acceptable_stationarity;
    stalled = near ? stalled + 1 : 0;
    if (opts.acceptable_iterations > 0 && stalled >= opts.acceptable_iterations) {
      sol.status = SolveStatus::acceptable;
      sol.message = "stationarity " + std::to_string(err.stationarity) + " above tolerance after " +
                    std::to_string(stalled) + " iterations at the final barrier";
      break;
    }

    // Hessian of the Lagrangian plus the eliminated-dual rank-one terms. It
    // does not depend on mu, so one factorization serves every mu tried below.
    h.clear();
    program.objective.add_hessian(x, 1.0, h);
    for (int i = 0; i < m; ++i) {
      const auto& lf = locals[i];
      const std::size_t k = lf.support.size();
      const double w = lambda[i] / -lf.value;
      // Curvature of a constraint is weighted by at least its central
      // multiplier: near a point where the constraint gradient vanishes an
      // undersized lambda would hide the barrier's second-order growth.
      const double c = std::max(lambda[i], mu / -lf.value);
      for (std::size_t a = 0; a < k; ++a)
        for (std::size_t b = 0; b < k; ++b)
          h.emplace_back(lf.support[a], lf.support[b], c * lf.hess[a * k + b] + w * lf.grad[a] * lf.grad[b]);
    }
    bool factored = false;
    while (!factored) {
      factored = kkt.factor(h, program.A, reg);
      if (!factored) {
        reg *= 10.0;
        if (reg > opts.max_regularization) break;
      }
    }
    if (!factored) {
      sol.status = SolveStatus::numerical_failure;
      sol.message = "KKT factorization failed at regularization " + std::to_string(reg);
      break;
    }

    VectorXd eq_res;
    if (p > 0) eq_res = program.A * x - program.b;
    VectorXd g0 = VectorXd::Zero(n);
    program.objective.add_gradient(x, 1.0, g0);

    VectorXd rhs = VectorXd::Zero(n + p);
    rhs.head(n) = -g0;
    for (int i = 0; i < m; ++i) {
      const auto& lf = locals[i];
      const double s = -lf.value;
      for (std::size_t a = 0; a < lf.support.size(); ++a) rhs[lf.support[a]] -= mu / s * lf.grad[a];
    }
    if (p > 0) rhs.tail(p) = -eq_res;
    VectorXd step = kkt.solve(rhs, opts.refinement_steps);
    // Nearly flat directions (affine objectives) can leave the refined solve
    // pointing uphill. Then regularize harder and keep the regularized
    // direction, which is a descent direction by construction.
    auto uphill = [&](const VectorXd& st) {
      return st.allFinite() && -rhs.head(n).dot(st.head(n)) > 0.0;
    };
    while (uphill(step) && reg * 10.0 <= opts.max_regularization) {
      reg *= 10.0;
      if (!kkt.factor(h, program.A, reg)) continue;
      step = kkt.solve(rhs, 0);
    }
    if (!step.allFinite()) {
      sol.status = SolveStatus::numerical_failure;
      sol.message = "non-finite Newton direction";
      break;
    }
    // Rounding in the solve can leave A dx + (A x - b) larger than the
    // residual itself once that is tiny, so the penalty would grow along dx.
    // A correction solve with the same factorization restores it.
    if (p > 0) {
      VectorXd eq_rhs = VectorXd::Zero(n + p);
      for (int pass = 0; pass < 2; ++pass) {
        const VectorXd lin = program.A * step.head(n) + eq_res;
        if (lin.lpNorm<1>() <= 0.1 * eq_res.lpNorm<1>()) break;
        eq_rhs.tail(p) = -lin;
        const VectorXd corr = kkt.solve(eq_rhs, opts.refinement_steps);
        if (!corr.allFinite()) break;
        step += corr;
      }
    }
    const VectorXd dx = step.head(n);
    const VectorXd nu_plus = step.tail(p);  // the system is solved for nu itself
    double slope = -rhs.head(n).dot(dx);    // derivative of f0 - mu sum log(-f_i) along dx

    // Tighten the barrier once the current one is solved: centred multipliers,
    // (nearly) satisfied equalities and a small predicted merit decrease. The
    // multipliers shrink with mu so the next Hessian is not stiffened by
    // stale values; no step is taken on this iteration.
    const double bar = opts.centering * mu;
    if (m > 0 && mu > mu_min && err.primal <= bar && err.centrality <= bar && -slope <= bar) {
      const double next = std::max(mu_min, std::min(opts.barrier_decrease * mu, std::pow(mu, opts.barrier_exponent)));
      lambda *= next / mu;
      mu = next;
      if (opts.record_trace)
        sol.trace.push_back({iter, mu, gap, err.stationarity, err.primal, 0.0, 0.0, 0.0, reg});
      continue;
    }

    VectorXd dlambda(m);
    for (int i = 0; i < m; ++i) {
      const auto& lf = locals[i];
      const double s = -lf.value;
      double gdx = 0.0;
      for (std::size_t a = 0; a < lf.support.size(); ++a) gdx += lf.grad[a] * dx[lf.support[a]];
      dlambda[i] = lambda[i] / s * gdx - lambda[i] + mu / s;
    }
    // Directional derivative of the l1 penalty along dx, from the actual A dx
    // rather than the linearization A dx = -(A x - b) the solve aims for.
    VectorXd Adx;
    if (p > 0) {
      Adx = program.A * dx;
      rho = std::max(rho, 2.0 * nu_plus.lpNorm<Eigen::Infinity>() + 1.0);
      double pen = 0.0;
      for (int r = 0; r < p; ++r)
        pen += eq_res[r] > 0.0 ? Adx[r] : eq_res[r] < 0.0 ? -Adx[r] : std::abs(Adx[r]);
      slope += rho * pen;
    }

    // Backtrack on the barrier merit; the barrier keeps iterates interior.
    // The change is summed piece by piece (linear part along dx, each convex
    // term, log ratios of the slacks): differencing two totals loses every
    // decrease below the rounding error of the large cancelling constants.
    auto merit_change = [&](const VectorXd& xt, double a) {
      constexpr double inf = std::numeric_limits<double>::infinity();
      const auto& obj = program.objective;
      if (!obj.in_domain(xt)) return inf;
      double d = 0.0;
      for (const auto& [i, c] : obj.linear) d += c * a * dx[i];
      for (const auto& t : obj.terms) d += term_value(t, xt) - term_value(t, x);
      for (int i = 0; i < m; ++i) {
        const auto& f = program.inequalities[i];
        if (!f.in_domain(xt)) return inf;
        const double fi = f.value(xt);
        if (!(fi < 0.0)) return inf;
        d -= mu * std::log(fi / locals[i].value);
      }
      if (p > 0) d += rho * ((eq_res + a * Adx).lpNorm<1>() - eq_res.lpNorm<1>());
      return d;
    };
    const double merit0 = merit(x, eq_res, mu, rho);
    double a = 1.0;
    VectorXd xn;
    bool accepted = false;
    double change = 0.0;
    while (a > 1e-14) {
      xn = x + a * dx;
      change = merit_change(xn, a);
      if (change <= opts.ls_alpha * a * std::min(slope, 0.0)) {
        accepted = true;
        break;
      }
      a *= opts.ls_beta;
    }
    const double merit1 = merit0 + (accepted ? change : 0.0);
    if (opts.record_trace)
      sol.trace.push_back({iter, mu, gap, err.stationarity, err.primal, accepted ? a : 0.0, merit0, merit1, reg});
    if (!accepted) {
      sol.status = SolveStatus::numerical_failure;
      sol.message = "line search failed (step below 1e-14)";
      eval_all(x, false);
      break;
    }
    // Multipliers take the longest step that keeps them positive.
    double ad = 1.0;
    for (int i = 0; i < m; ++i)
      if (dlambda[i] < 0.0) ad = std::min(ad, opts.step_fraction * -lambda[i] / dlambda[i]);
    x = xn;
    lambda += ad * dlambda;
    if (p > 0) nu += a * (nu_plus - nu);
    // Keep each multiplier within a wide band around its central value.
    eval_all(x, false);
    for (int i = 0; i < m; ++i) {
      const double central = mu / -locals[i].value;
      lambda[i] = std::clamp(lambda[i], central / opts.dual_band, central * opts.dual_band);
    }
    reg = std::max(opts.regularization, reg * 0.1);
    sol.iterations = iter + 1;
  }

  sol.objective = program.objective.value(x);
  sol.residuals = kkt_residuals(program, x, lambda, nu);
  return sol;
}

}  // namespace uavee
