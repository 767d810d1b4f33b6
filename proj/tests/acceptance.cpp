// Acceptance checks, one per criterion. `acceptance 4` runs criterion 4;
// no argument runs all of them. Each prints one PASS/FAIL line and the exit
// status is nonzero if any selected check failed.

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

#include "uavee/experiment.hpp"
#include "kinematic_programs.hpp"
#include "oracles/brute_force_ee.hpp"

using namespace uavee;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Clock {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

struct Rng {
  std::mt19937_64 gen;
  explicit Rng(std::uint64_t seed) : gen(seed) {}
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(gen); }
  double log_uniform(double lo, double hi) { return std::exp(uniform(std::log(lo), std::log(hi))); }
};

// 1. Tangent bounds under-estimate and touch at the expansion point.
Outcome surrogate_soundness() {
  Clock clock;
  Rng rng(1);
  constexpr int kPoints = 10000;
  int under = 0, tight = 0;
  double worst_tight = 0.0;
  auto rel = [](double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); };
  for (int k = 0; k < kPoints; ++k) {
    const double B = 1e5;
    const double Lf = rng.log_uniform(1e-3, 1e3), If = rng.log_uniform(1e-3, 1e3);
    const double L = rng.log_uniform(1e-3, 1e3), I = rng.log_uniform(1e-3, 1e3);
    const RateBound rb = rate_bound_coeffs(Lf, If, B);
    const double rate = slack_rate(L, I, B);

    const Vec2 vf(rng.uniform(-100, 100), rng.uniform(-100, 100)), v(rng.uniform(-100, 100), rng.uniform(-100, 100));
    const AffineBound V = speed_sq_bound(vf);

    const Vec2 qf(rng.uniform(-1000, 1000), rng.uniform(0, 1000)), q(rng.uniform(-1000, 1000), rng.uniform(0, 1000));
    const GroundNode jam{rng.uniform(-500, 500), rng.uniform(0, 1000)};
    const AffineBound D = dist_sq_bound(qf, jam.xy(), 100.0);
    const double dist = squared_distance_3d(q, 100.0, jam);

    // One rounding unit of slack on each comparison.
    const double u = 1e-14;
    under += rb(L, I) <= rate * (1 + u) && V(v) <= v.squaredNorm() * (1 + u) + u && D(q) <= dist * (1 + u);
    const double e = std::max({rel(rb(Lf, If), slack_rate(Lf, If, B)), rel(V(vf), vf.squaredNorm()),
                               rel(D(qf), squared_distance_3d(qf, 100.0, jam))});
    worst_tight = std::max(worst_tight, e);
    tight += e <= 1e-12;
  }
  const double secs = clock.seconds();
  Outcome o;
  o.pass = under == kPoints && tight == kPoints && secs < 5.0;
  o.detail = std::to_string(under) + "/" + std::to_string(kPoints) + " under-estimates, worst tightness " +
             fmt("%.2e", worst_tight) + ", " + fmt("%.2f s", secs);
  return o;
}

// Finite-difference helpers for criterion 2.
VectorXd gradient_of(const SmoothFunction& f, const VectorXd& x) {
  VectorXd g = VectorXd::Zero(x.size());
  f.add_gradient(x, 1.0, g);
  return g;
}

// Hessian restricted to `support`, indexed by position in it.
Eigen::MatrixXd hessian_of(const SmoothFunction& f, const VectorXd& x, const std::vector<int>& support) {
  std::vector<Triplet> t;
  f.add_hessian(x, 1.0, t);
  std::vector<int> pos(x.size(), -1);
  for (std::size_t k = 0; k < support.size(); ++k) pos[support[k]] = static_cast<int>(k);
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(support.size(), support.size());
  for (const auto& e : t) H(pos[e.row()], pos[e.col()]) += e.value();
  return H;
}

// Worst relative gradient and Hessian errors of f at x, differencing only
// along the variables f depends on.
std::pair<double, double> fd_errors(const SmoothFunction& f, const std::vector<int>& support, const VectorXd& x) {
  const VectorXd g = gradient_of(f, x);
  const Eigen::MatrixXd H = hessian_of(f, x, support);
  double gscale = 1e-300, gerr = 0.0, hscale = 1e-300, herr = 0.0;
  for (std::size_t a = 0; a < support.size(); ++a) {
    const int i = support[a];
    const double h = 1e-6 * std::max(1.0, std::abs(x[i]));
    VectorXd xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    const double fd = (f.value(xp) - f.value(xm)) / (2.0 * h);
    gscale = std::max(gscale, std::abs(fd));
    gerr = std::max(gerr, std::abs(g[i] - fd));
    const VectorXd dg = (gradient_of(f, xp) - gradient_of(f, xm)) / (2.0 * h);
    for (std::size_t b = 0; b < support.size(); ++b) {
      hscale = std::max(hscale, std::abs(dg[support[b]]));
      herr = std::max(herr, std::abs(H(b, a) - dg[support[b]]));
    }
  }
  return {gerr / gscale, herr / hscale};
}

// 2. Analytic derivatives of every subproblem function and of the barrier.
Outcome gradient_checks() {
  Clock clock;
  constexpr int kPoints = 1000;
  Rng rng(2);
  // Case 4 geometry over ten slots: every constraint kind, three jammers, and
  // the energy objective with a positive lambda.
  Scenario s = case_scenario(4);
  s.uav.start = {-100.0, 300.0};
  s.uav.end = {100.0, 300.0};
  s.horizon = Horizon::from_duration(5.0, 0.5);
  validate(s);
  const Trajectory t = line_init(s);
  const Subproblem sp = build_subproblem(t, tight_slacks(t, s), 1500.0, s, Mode::max_ee);
  const auto& prog = sp.program;
  SolverOptions early;
  early.max_iterations = 15;
  const VectorXd x0 = *prog.initial_point;
  const VectorXd x1 = solve(prog, std::nullopt, early).x;
  if (!prog.strictly_feasible(x1)) return {false, "early iterate is not interior"};

  std::vector<const SmoothFunction*> fs{&prog.objective};
  for (const auto& f : prog.inequalities) fs.push_back(&f);
  std::vector<std::vector<int>> supports;
  for (const auto* f : fs) supports.push_back(f->support());

  double eg = 0.0, eh = 0.0;
  int interior = 0;
  for (int k = 0; k < kPoints; ++k) {
    const VectorXd x = x0 + rng.uniform(0.02, 1.0) * (x1 - x0);
    interior += prog.strictly_feasible(x);
    for (std::size_t i = 0; i < fs.size(); ++i) {
      const auto [g, h] = fd_errors(*fs[i], supports[i], x);
      eg = std::max(eg, g);
      eh = std::max(eh, h);
    }
  }

  // Barrier -sum log(-f_i) of a program holding one constraint of each
  // nonlinear kind.
  ConvexProgram p;
  p.num_vars = 6;
  p.A.resize(0, 6);
  p.b.resize(0);
  {
    SmoothFunction f;
    f.constant = -1.0;
    f.add_term(terms::SquaredNorm{0, 1, 0.0, 0.0, 1e-4});
    p.inequalities.push_back(f);
    SmoothFunction g;
    g.add_term(terms::SquaredNorm{2, -1, 0.0, 0.0, 1.0 / 900.0});
    g.constant = 1.0;
    g.add_linear(0, -2.0 * 30.0 / 900.0);
    p.inequalities.push_back(g);
    SmoothFunction j;
    j.add_term(terms::LogSumReciprocal{}.add(3, 7943.0).add(4, 7943.0));
    j.add_term(terms::NegLog{5, 1.0, 1.0});
    p.inequalities.push_back(j);
  }
  double bg = 0.0, bh = 0.0;
  int barrier_points = 0;
  while (barrier_points < kPoints) {
    const VectorXd x{{rng.uniform(25, 60), rng.uniform(-20, 20), rng.uniform(1, 30), rng.log_uniform(0.5, 100),
                      rng.log_uniform(0.5, 100), rng.log_uniform(10, 4e4)}};
    if (!p.strictly_feasible(x)) continue;
    ++barrier_points;
    const auto b = log_barrier(p, x);
    VectorXd fg(6);
    Eigen::MatrixXd fh(6, 6);
    for (int i = 0; i < 6; ++i) {
      const double h = 1e-7 * std::max(1.0, std::abs(x[i]));
      VectorXd xp = x, xm = x;
      xp[i] += h;
      xm[i] -= h;
      const auto bp = log_barrier(p, xp), bm = log_barrier(p, xm);
      fg[i] = (bp.value - bm.value) / (2.0 * h);
      fh.col(i) = (bp.gradient - bm.gradient) / (2.0 * h);
    }
    bg = std::max(bg, (b.gradient - fg).cwiseAbs().maxCoeff() / fg.cwiseAbs().maxCoeff());
    bh = std::max(bh, (b.hessian - fh).cwiseAbs().maxCoeff() / fh.cwiseAbs().maxCoeff());
  }
  const double secs = clock.seconds();
  Outcome o;
  o.pass = interior == kPoints && std::max({eg, eh, bg, bh}) < 1e-6 && secs < 30.0;
  o.detail = std::to_string(fs.size()) + " functions at " + std::to_string(interior) + " interior points: grad " +
             fmt("%.1e", eg) + ", Hessian " + fmt("%.1e", eh) + "; barrier grad " + fmt("%.1e", bg) + ", Hessian " +
             fmt("%.1e", bh) + ", " + fmt("%.1f s", secs);
  return o;
}

// 3. Analytic optima of three small programs; sparse and dense paths agree.
Outcome solver_correctness() {
  double worst = 0.0;
  bool ok = true;
  {
    // minimize x^2 + y^2 s.t. x + y = 2: (1, 1)
    ConvexProgram p;
    p.num_vars = 2;
    p.objective.add_term(terms::SquaredNorm{0, 1, 0.0, 0.0, 1.0});
    p.A = Eigen::MatrixXd{{1.0, 1.0}}.sparseView();
    p.b = VectorXd{{2.0}};
    const auto sol = solve(p, VectorXd{{-4.0, 7.0}});
    ok &= sol.status == SolveStatus::optimal;
    worst = std::max(worst, (sol.x - Vec2(1.0, 1.0)).cwiseAbs().maxCoeff());
  }
  {
    // minimize x^2 s.t. x >= 1: x = 1
    ConvexProgram p;
    p.num_vars = 1;
    p.objective.add_term(terms::SquaredNorm{0, -1, 0.0, 0.0, 1.0});
    SmoothFunction g;
    g.constant = 1.0;
    g.add_linear(0, -1.0);
    p.inequalities.push_back(g);
    p.A.resize(0, 1);
    p.b.resize(0);
    const auto sol = solve(p, VectorXd{{3.0}});
    ok &= sol.status == SolveStatus::optimal;
    worst = std::max(worst, std::abs(sol.x[0] - 1.0));
  }
  double s_found = 0.0;
  const EnergyParams e;
  const double s_star = std::pow(e.c2 / (3.0 * e.c1), 0.25);
  {
    // Level-flight power c1 |(s, w)|^3 + c2 / s with w = 0 and v_min <= s <= v_max.
    ConvexProgram p;
    p.num_vars = 2;
    p.objective.add_term(terms::NormCubed{0, 1, e.c1});
    p.objective.add_term(terms::Reciprocal{0, e.c2});
    SmoothFunction lo, hi;
    lo.constant = 3.0;
    lo.add_linear(0, -1.0);
    hi.constant = -100.0;
    hi.add_linear(0, 1.0);
    p.inequalities = {lo, hi};
    p.A = Eigen::MatrixXd{{0.0, 1.0}}.sparseView();
    p.b = VectorXd{{0.0}};
    const auto sol = solve(p, VectorXd{{60.0, 0.5}});
    ok &= sol.status == SolveStatus::optimal;
    s_found = sol.x[0];
    worst = std::max(worst, std::abs(s_found - s_star));
  }
  std::mt19937_64 rng(99);
  double gap = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const auto kp = testing_support::random_kinematic_program(rng);
    SolverOptions dense;
    dense.dense = true;
    const auto a = solve(kp.program);
    const auto b = solve(kp.program, std::nullopt, dense);
    ok &= kp.N <= 40 && a.status == SolveStatus::optimal && b.status == SolveStatus::optimal;
    gap = std::max(gap, (a.x - b.x).lpNorm<Eigen::Infinity>() / std::max(1.0, a.x.lpNorm<Eigen::Infinity>()));
  }
  Outcome o;
  o.pass = ok && worst <= 1e-6 && gap <= 1e-8;
  o.detail = "worst optimum error " + fmt("%.1e", worst) + " (s* = " + fmt("%.6f", s_found) +
             " m/s), sparse/dense gap on 50 kinematic programs " + fmt("%.1e", gap);
  return o;
}

// 4. Algorithm behaviour on case 1 at T = 60 s.
Outcome algorithm_behaviour() {
  Clock clock;
  const Scenario s = case_scenario(1, 60.0);
  const AlgoOptions opts = AlgoOptions::from_scenario(s, Mode::max_ee);
  const RunReport r = optimize(s, line_init(s), opts);
  bool monotone = true, lambdas = true;
  double prev = r.initial_ee;
  for (const auto& o : r.outer) {
    monotone &= o.exact_ee >= prev - 1e-6 * std::abs(prev);
    prev = o.exact_ee;
    for (std::size_t j = 1; j < o.lambdas.size(); ++j) lambdas &= o.lambdas[j] >= o.lambdas[j - 1];
  }
  const auto res = kinematic_residuals(r.trajectory, s.uav, s.horizon);
  const double secs = clock.seconds();
  Outcome o;
  o.pass = monotone && lambdas && std::abs(r.final_F) <= opts.inner_threshold && res.within(1e-6) &&
           r.final_kkt.max() <= r.kkt_tolerance && secs < 300.0;
  o.detail = std::string("EE ") + (monotone ? "monotone" : "NOT monotone") + ", lambda " +
             (lambdas ? "non-decreasing" : "DECREASED") + ", |F| " + fmt("%.3g", std::abs(r.final_F)) +
             ", residual " + fmt("%.1e", res.max_residual()) + ", KKT " + fmt("%.1e", r.final_kkt.max()) + ", " +
             std::to_string(r.outer.size()) + " outer, " + fmt("%.1f s", secs);
  return o;
}

// 5. Against exhaustive search on a four-slot instance.
Outcome brute_force() {
  constexpr double kFrozen = 1456.07404303;  // grid optimum recorded before the optimizer existed
  const oracle::TinyInstance p;
  const oracle::GridResult grid = oracle::grid_search(p, 35, 65, -15, 15);
  Scenario s = case_scenario(1);
  s.source = {p.sx, p.sy};
  s.jammers = {Jammer{{p.jx, p.jy}, p.Pm}};
  s.uav.start = {p.x0, p.y0};
  s.uav.end = {p.x1, p.y1};
  s.horizon = Horizon::from_duration(2.0, p.dt);
  validate(s);
  const RunReport r = optimize(s, line_init(s), Mode::max_ee);
  const bool feasible = kinematic_residuals(r.trajectory, s.uav, s.horizon).within(1e-6);
  Outcome o;
  o.pass = feasible && std::abs(grid.best_ee - kFrozen) <= 1e-6 * kFrozen && r.metrics.ee >= 0.95 * grid.best_ee;
  o.detail = "optimizer " + fmt("%.4f", r.metrics.ee) + " bits/J vs grid " + fmt("%.4f", grid.best_ee) + " (" +
             std::to_string(grid.feasible) + " feasible points), ratio " + fmt("%.4f", r.metrics.ee / grid.best_ee);
  return o;
}

// 6. Ordering of the three algorithms on the four cases at T = 60 s.
Outcome ordering() {
  bool ok = true;
  std::ostringstream d;
  for (int c = 1; c <= 4; ++c) {
    const Scenario s = case_scenario(c, 60.0);
    const Trajectory init = line_init(s);
    const double ee = optimize(s, init, Mode::max_ee).metrics.ee;
    const double thr = optimize(s, init, Mode::max_throughput).metrics.ee;
    const double nj = optimize(s, init, Mode::max_ee_nojam).metrics.ee;
    ok &= ee > thr && ee > nj;
    d << (c > 1 ? "; " : "") << "case " << c << ": " << fmt("%.3f", ee / 1e3) << " / " << fmt("%.3f", thr / 1e3)
      << " / " << fmt("%.3f", nj / 1e3);
  }
  return {ok, "kbits/J max-ee / max-throughput / max-ee-nojam: " + d.str()};
}

// 7. Full case 1 against the published values.
Outcome reproduction() {
  Clock clock;
  const Scenario s = case_scenario(1);
  const Trajectory init = line_init(s);
  const RunReport ee = optimize(s, init, Mode::max_ee);
  const RunReport thr = optimize(s, init, Mode::max_throughput);
  const double a = ee.metrics.ee / 1e3, b = thr.metrics.ee / 1e3;
  const double secs = clock.seconds();
  Outcome o;
  o.pass = std::abs(a - 5.98) <= 0.2 * 5.98 && std::abs(b - 1.59) <= 0.2 * 1.59 && secs <= 1800.0;
  o.detail = "max-ee " + fmt("%.3f", a) + " kbits/J (" + fmt("%+.1f%%", 100.0 * (a / 5.98 - 1.0)) +
             " vs 5.98), max-throughput " + fmt("%.3f", b) + " kbits/J (" + fmt("%+.1f%%", 100.0 * (b / 1.59 - 1.0)) +
             " vs 1.59), sum throughput " + fmt("%.0f", thr.metrics.sum_throughput / 1e3) + " kbits, " +
             fmt("%.0f s", secs);
  return o;
}

// 8. Speed band of the full case-1 EE trajectory.
Outcome speed_band() {
  const Scenario s = case_scenario(1);
  const RunReport r = optimize(s, line_init(s), Mode::max_ee);
  int inside = 0;
  for (const auto& v : r.trajectory.v) inside += v.norm() >= 20.0 && v.norm() <= 40.0;
  const double frac = static_cast<double>(inside) / r.trajectory.size();
  return {frac >= 0.7, fmt("%.1f%%", 100.0 * frac) + " of " + std::to_string(r.trajectory.size()) +
                           " slot speeds in [20, 40] m/s, average " + fmt("%.1f m/s", r.metrics.average_speed)};
}

// 9. Mean EE over random jammer sets falls with M; the jamming-blind
// baseline loses the largest share.
Outcome trends() {
  Clock clock;
  const SweepSpec spec = SweepSpec::defaults(SweepVariable::M, false);
  const std::vector<Mode> modes{Mode::max_ee, Mode::max_throughput, Mode::max_ee_nojam};
  const SweepResult r = run_sweep(spec, case_scenario(1), modes);
  bool decreasing = true;
  int failed = 0;
  for (const auto& row : r.summary) failed += row.failed;
  std::ostringstream d;
  double drop[3];
  for (int k = 0; k < 3; ++k) {
    d << (k ? "; " : "") << mode_name(modes[k]) << ":";
    for (std::size_t i = 0; i < spec.values.size(); ++i) {
      const double m = r.mean_ee(spec.values[i], modes[k]);
      d << ' ' << fmt("%.3f", m / 1e3);
      if (i > 0) decreasing &= m < r.mean_ee(spec.values[i - 1], modes[k]);
    }
    drop[k] = 1.0 - r.mean_ee(spec.values.back(), modes[k]) / r.mean_ee(spec.values.front(), modes[k]);
  }
  const bool fastest = drop[2] > drop[0] && drop[2] > drop[1];
  Outcome o;
  o.pass = decreasing && fastest && failed == 0;
  o.detail = "mean kbits/J over M=1..4, " + d.str() + "; relative loss M=1 to 4: " + fmt("%.1f%%", 100 * drop[0]) +
             " / " + fmt("%.1f%%", 100 * drop[1]) + " / " + fmt("%.1f%%", 100 * drop[2]) + ", " +
             std::to_string(failed) + " failed runs, " + fmt("%.0f s", clock.seconds());
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> checks{
      {"surrogate soundness", surrogate_soundness}, {"derivative checks", gradient_checks},
      {"solver correctness", solver_correctness},   {"algorithm behaviour", algorithm_behaviour},
      {"brute-force cross-check", brute_force},     {"qualitative ordering", ordering},
      {"quantitative reproduction", reproduction},  {"speed band", speed_band},
      {"trend checks", trends}};
  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) selected.push_back(std::stoi(argv[i]));
  if (selected.empty())
    for (int i = 1; i <= static_cast<int>(checks.size()); ++i) selected.push_back(i);

  bool all = true;
  for (int id : selected) {
    if (id < 1 || id > static_cast<int>(checks.size())) {
      std::cerr << "no criterion " << id << '\n';
      return 2;
    }
    Outcome o;
    try {
      o = checks[id - 1].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    std::cout << "criterion " << id << " (" << checks[id - 1].first << "): " << (o.pass ? "PASS" : "FAIL") << ": "
              << o.detail << std::endl;
    all &= o.pass;
  }
  return all ? 0 : 1;
}
