#pragma once

#include <chrono>
#include <cmath>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "uavee/sca.hpp"
#include "uavee/solver.hpp"

// Outer SCA loop with an inner Dinkelbach loop, plus the two baselines.

namespace uavee {

struct AlgoOptions {
  Mode mode = Mode::max_ee;
  double outer_threshold = 1e-3;
  double inner_threshold = 10.0;
  double inner_relative_threshold = 0.0;  // |F| / numerator; 0 disables
  int max_outer = 50;
  int max_inner = 30;
  SolverOptions solver;
  SubproblemOptions subproblem;
  double monotone_tolerance = 1e-6;  // relative slack on the exact-EE and lambda sequences

  static AlgoOptions from_scenario(const Scenario& s, Mode mode) {
    AlgoOptions o;
    o.mode = mode;
    o.outer_threshold = s.solver.outer_threshold;
    o.inner_threshold = s.solver.inner_threshold;
    o.inner_relative_threshold = s.solver.inner_relative_threshold;
    o.max_outer = s.solver.max_outer;
    o.max_inner = s.solver.max_inner;
    o.solver.tolerance = s.solver.kkt_tolerance;
    o.solver.max_iterations = s.solver.max_newton;
    o.subproblem.altitude_in_distance_bound = s.solver.altitude_in_distance_bound;
    return o;
  }
};

/// One subproblem solve. Exact quantities are for the trajectory the solve
/// returned, scored on the scenario being optimized (jammer-free for the
/// no-jamming baseline).
struct IterationRecord {
  int outer = 0;
  int inner = 0;
  double lambda = 0.0;
  double F = 0.0;              // numerator - lambda * denominator at the solution
  double surrogate_obj = 0.0;  // same as F except in max-throughput mode
  double surrogate_num = 0.0;
  double surrogate_den = 0.0;
  double exact_rate_sum = 0.0;
  double exact_throughput_bits = 0.0;
  double exact_energy = 0.0;
  double exact_ee = 0.0;
  int solver_iters = 0;
  bool reduced_accuracy = false;  // solver stopped as `acceptable`
  double wall_ms = 0.0;
  KktResiduals kkt;
};

struct OuterRecord {
  int outer = 0;
  std::vector<double> lambdas;
  std::vector<double> F;
  double exact_ee = 0.0;      // after this outer iteration
  double exact_rate_sum = 0.0;
  double surrogate_num = 0.0;  // at the accepted solution
  bool inner_converged = true;
  int solver_iters = 0;
};

/// The columns of the comparison table.
struct Metrics {
  double average_speed = 0.0;   // m/s
  double sum_throughput = 0.0;  // sum_n R[n], bits/s summed over slots
  double energy = 0.0;          // J
  double ee = 0.0;              // sum_throughput / energy
};

struct RunReport {
  Mode mode = Mode::max_ee;
  double initial_ee = 0.0;
  std::vector<IterationRecord> log;
  std::vector<OuterRecord> outer;
  Trajectory trajectory;
  SlackSet slacks;
  Metrics metrics;
  KktResiduals final_kkt;
  double final_F = 0.0;
  double kkt_tolerance = 0.0;
  std::string termination;
  double wall_ms = 0.0;

  int reduced_accuracy_solves() const {
    int n = 0;
    for (const auto& r : log) n += r.reduced_accuracy;
    return n;
  }
};

struct LambdaState {
  double lambda = 0.0;
  double F = std::numeric_limits<double>::infinity();
};

struct InnerResult {
  Trajectory trajectory;
  LambdaState state;
  bool converged = false;
  std::vector<IterationRecord> log;
  KktResiduals last_kkt;
  double surrogate_num = 0.0;
};

namespace detail {

inline double elapsed_ms(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

inline const Scenario& working_scenario(const Scenario& s, Mode mode, Scenario& storage) {
  if (mode != Mode::max_ee_nojam) return s;
  storage = without_jammers(s);
  return storage;
}

inline Solution solve_or_throw(const Subproblem& sp, const SolverOptions& opts, const std::string& where) {
  Solution sol = solve(sp.program, std::nullopt, opts);
  if (sol.status != SolveStatus::optimal && sol.status != SolveStatus::acceptable)
    throw SolverError(where + ": solver " + status_name(sol.status) + " after " + std::to_string(sol.iterations) +
                      " iterations (" + sol.message + ")");
  return sol;
}

inline void fill_exact(IterationRecord& r, const Trajectory& t, const Scenario& s) {
  r.exact_rate_sum = sum_throughput(t, s);
  r.exact_throughput_bits = delivered_bits(t, s);
  r.exact_energy = trajectory_energy(t, s.energy, s.horizon.dt);
  r.exact_ee = r.exact_rate_sum / r.exact_energy;
}

}  // namespace detail

/// Dinkelbach iterations at a fixed expansion point. `s` is the scenario being
/// optimized (already stripped of jammers for the no-jamming baseline). The
/// first lambda is the surrogate ratio at the expansion point.
inline InnerResult dinkelbach_inner(const Trajectory& tf, const SlackSet& kf, const Scenario& s,
                                    const AlgoOptions& opts, int outer_index = 0) {
  if (opts.mode == Mode::max_throughput)
    throw std::invalid_argument("dinkelbach_inner: max-throughput mode has no fractional objective");
  // Jammers were already removed by the caller; build as plain max-ee.
  Subproblem sp = build_subproblem(tf, kf, 0.0, s, Mode::max_ee, opts.subproblem);
  InnerResult out;
  out.state.lambda = surrogate_ratio(sp, sp.expansion);
  double prev_lambda = out.state.lambda;
  for (int j = 0; j < opts.max_inner; ++j) {
    set_lambda(sp, out.state.lambda);
    const auto t0 = std::chrono::steady_clock::now();
    const Solution sol = detail::solve_or_throw(
        sp, opts.solver, "outer " + std::to_string(outer_index) + " inner " + std::to_string(j));
    IterationRecord rec;
    rec.outer = outer_index;
    rec.inner = j;
    rec.lambda = out.state.lambda;
    rec.surrogate_num = sp.numerator.value(sol.x);
    rec.surrogate_den = sp.denominator.value(sol.x);
    rec.F = rec.surrogate_num - out.state.lambda * rec.surrogate_den;
    rec.surrogate_obj = rec.F;
    rec.solver_iters = sol.iterations;
    rec.reduced_accuracy = sol.status == SolveStatus::acceptable;
    rec.kkt = sol.residuals;
    out.trajectory = sp.trajectory(sol.x);
    detail::fill_exact(rec, out.trajectory, s);
    rec.wall_ms = detail::elapsed_ms(t0);
    out.log.push_back(rec);
    out.last_kkt = sol.residuals;
    out.surrogate_num = rec.surrogate_num;
    out.state.F = rec.F;

    const double next = rec.surrogate_num / rec.surrogate_den;
    if (next < prev_lambda - opts.monotone_tolerance * std::abs(prev_lambda))
      throw InvariantViolation("Dinkelbach lambda decreased from " + std::to_string(prev_lambda) + " to " +
                               std::to_string(next) + " (outer " + std::to_string(outer_index) + ")");
    const bool small_abs = std::abs(rec.F) <= opts.inner_threshold;
    const bool small_rel = opts.inner_relative_threshold > 0.0 &&
                           std::abs(rec.F) <= opts.inner_relative_threshold * std::abs(rec.surrogate_num);
    if (small_abs || small_rel) {
      out.converged = true;
      return out;
    }
    prev_lambda = next;
    out.state.lambda = next;
  }
  return out;
}

/// Per-slot average speed and the exact metrics on the true scenario.
inline Metrics evaluate_final(const Trajectory& t, const Scenario& s) {
  Metrics m;
  double speed = 0.0;
  for (const auto& v : t.v) speed += v.norm();
  m.average_speed = t.size() > 0 ? speed / t.size() : 0.0;
  m.sum_throughput = sum_throughput(t, s);
  m.energy = trajectory_energy(t, s.energy, s.horizon.dt);
  m.ee = m.sum_throughput / m.energy;
  return m;
}

inline Metrics evaluate_final(const RunReport& r, const Scenario& s) { return evaluate_final(r.trajectory, s); }

/// Runs the selected optimizer from `init`. Metrics are always scored on `s`
/// with its jammers, whatever the mode optimized.
inline RunReport optimize(const Scenario& s, const Trajectory& init, const AlgoOptions& opts) {
  const auto t_start = std::chrono::steady_clock::now();
  Scenario storage;
  const Scenario& ws = detail::working_scenario(s, opts.mode, storage);
  const auto feas = kinematic_residuals(init, ws.uav, ws.horizon);
  if (init.size() != ws.horizon.N || !feas.within(1e-6))
    throw InfeasibleError("initial trajectory is not feasible (max residual " + std::to_string(feas.max_residual()) +
                          ")");

  RunReport rep;
  rep.mode = opts.mode;
  rep.kkt_tolerance = opts.solver.tolerance;
  Trajectory t = init;
  SlackSet k = tight_slacks(t, ws, opts.subproblem);
  // Objective tracked by the outer stop rule: exact EE, or the exact rate sum
  // for max-throughput.
  auto score = [&](const Trajectory& tr) {
    return opts.mode == Mode::max_throughput ? sum_throughput(tr, ws) : energy_efficiency(tr, ws);
  };
  double current = score(t);
  rep.initial_ee = energy_efficiency(t, ws);
  // With the printed distance bound the surrogate is not tight at its own
  // expansion point, so the exact objective may dip; only the bound check stays.
  const bool check_monotone = opts.subproblem.altitude_in_distance_bound;
  rep.termination = "max_outer";

  for (int i = 0; i < opts.max_outer; ++i) {
    OuterRecord orec;
    orec.outer = i;
    Trajectory next;
    if (opts.mode == Mode::max_throughput) {
      Subproblem sp = build_subproblem(t, k, 0.0, ws, Mode::max_throughput, opts.subproblem);
      const auto t0 = std::chrono::steady_clock::now();
      const Solution sol = detail::solve_or_throw(sp, opts.solver, "outer " + std::to_string(i));
      IterationRecord rec;
      rec.outer = i;
      rec.surrogate_num = sp.numerator.value(sol.x);
      rec.surrogate_obj = rec.surrogate_num;
      rec.solver_iters = sol.iterations;
      rec.reduced_accuracy = sol.status == SolveStatus::acceptable;
      rec.kkt = sol.residuals;
      next = sp.trajectory(sol.x);
      detail::fill_exact(rec, next, ws);
      rec.wall_ms = detail::elapsed_ms(t0);
      rep.log.push_back(rec);
      rep.final_kkt = sol.residuals;
      rep.final_F = 0.0;
      orec.surrogate_num = rec.surrogate_num;
      orec.solver_iters = sol.iterations;
    } else {
      InnerResult inner = dinkelbach_inner(t, k, ws, opts, i);
      next = inner.trajectory;
      orec.inner_converged = inner.converged;
      for (const auto& r : inner.log) {
        orec.lambdas.push_back(r.lambda);
        orec.F.push_back(r.F);
        orec.solver_iters += r.solver_iters;
        rep.log.push_back(r);
      }
      orec.surrogate_num = inner.surrogate_num;
      rep.final_kkt = inner.last_kkt;
      rep.final_F = inner.state.F;
    }

    orec.exact_rate_sum = sum_throughput(next, ws);
    orec.exact_ee = energy_efficiency(next, ws);
    const double bound_slack = 1e-6 * std::abs(orec.exact_rate_sum);
    if (ws.energy.mass == 0.0 && orec.surrogate_num > orec.exact_rate_sum + bound_slack)
      throw InvariantViolation("surrogate rate sum " + std::to_string(orec.surrogate_num) +
                               " exceeds the exact value " + std::to_string(orec.exact_rate_sum) + " at outer " +
                               std::to_string(i));
    const double updated = score(next);
    if (check_monotone && updated < current - opts.monotone_tolerance * std::abs(current))
      throw InvariantViolation("exact objective decreased from " + std::to_string(current) + " to " +
                               std::to_string(updated) + " at outer " + std::to_string(i));
    rep.outer.push_back(orec);
    const double increase = (updated - current) / std::abs(current);
    t = next;
    current = updated;
    k = tight_slacks(t, ws, opts.subproblem);
    if (increase < opts.outer_threshold) {
      rep.termination = "converged";
      break;
    }
  }

  rep.trajectory = t;
  rep.slacks = slack_init(t, s);
  rep.metrics = evaluate_final(t, s);
  rep.wall_ms = detail::elapsed_ms(t_start);
  return rep;
}

inline RunReport optimize(const Scenario& s, const Trajectory& init, Mode mode) {
  return optimize(s, init, AlgoOptions::from_scenario(s, mode));
}

/// Convergence log, one row per subproblem solve.
inline void write_convergence_csv(std::ostream& os, const RunReport& r) {
  os << "outer_iter,inner_iter,lambda,F_lambda,surrogate_obj,exact_throughput_bits,exact_energy_J,exact_EE,"
        "solver_iters,wall_ms\n";
  os.precision(12);
  for (const auto& e : r.log)
    os << e.outer << ',' << e.inner << ',' << e.lambda << ',' << e.F << ',' << e.surrogate_obj << ','
       << e.exact_throughput_bits << ',' << e.exact_energy << ',' << e.exact_ee << ',' << e.solver_iters << ','
       << e.wall_ms << '\n';
}

}  // namespace uavee
