#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "uavee/convex_program.hpp"
#include "uavee/physics.hpp"
#include "uavee/trajectory_init.hpp"

// Convex subproblem of the fractional EE program around a feasible point:
// first-order surrogates of the non-convex pieces, slack constraints, and the
// Dinkelbach objective  sum_n R^l[n] - lambda * E~.

namespace uavee {

enum class Mode { max_ee, max_throughput, max_ee_nojam };

inline const char* mode_name(Mode m) {
  switch (m) {
    case Mode::max_ee: return "max-ee";
    case Mode::max_throughput: return "max-throughput";
    default: return "max-ee-nojam";
  }
}

inline Mode parse_mode(const std::string& s) {
  if (s == "max-ee" || s == "max_ee") return Mode::max_ee;
  if (s == "max-throughput" || s == "max_throughput") return Mode::max_throughput;
  if (s == "max-ee-nojam" || s == "max_ee_nojam") return Mode::max_ee_nojam;
  throw std::invalid_argument("unknown mode '" + s + "'");
}

/// Tangent-plane lower bound of B log2(1 + 1/(L I)) at (L_f, I_f):
///   constant + coeff_L (L - L_f) + coeff_I (I - I_f).
struct RateBound {
  double L_f = 1.0;
  double I_f = 1.0;
  double constant = 0.0;
  double coeff_L = 0.0;
  double coeff_I = 0.0;

  double operator()(double L, double I) const { return constant + coeff_L * (L - L_f) + coeff_I * (I - I_f); }
};

/// Rate as a function of the slack pair, B log2(1 + 1/(L I)).
inline double slack_rate(double L, double I, double bandwidth) {
  return bandwidth * std::log1p(1.0 / (L * I)) * std::numbers::log2e;
}

inline RateBound rate_bound_coeffs(double L_f, double I_f, double bandwidth) {
  if (!(L_f > 0.0) || !(I_f > 0.0)) throw std::invalid_argument("rate bound: expansion point must be positive");
  const double log2e = std::numbers::log2e;
  RateBound r;
  r.L_f = L_f;
  r.I_f = I_f;
  r.constant = slack_rate(L_f, I_f, bandwidth);
  r.coeff_L = -bandwidth * log2e / (L_f + L_f * L_f * I_f);
  r.coeff_I = -bandwidth * log2e / (I_f + I_f * I_f * L_f);
  return r;
}

/// constant + gradient . x for a 2-D variable x.
struct AffineBound {
  double constant = 0.0;
  Vec2 gradient = Vec2::Zero();

  double operator()(const Vec2& x) const { return constant + gradient.dot(x); }
};

/// Tangent of |v|^2 at v_f: 2 v_f . v - |v_f|^2. Never exceeds |v|^2.
inline AffineBound speed_sq_bound(const Vec2& v_f) { return {-v_f.squaredNorm(), 2.0 * v_f}; }

/// Tangent of |q - q_m|^2 + H^2 at q_f. With `include_altitude` false the H^2
/// constant is dropped, which still under-estimates but is looser.
inline AffineBound dist_sq_bound(const Vec2& q_f, const Vec2& jammer_xy, double altitude,
                                 bool include_altitude = true) {
  AffineBound b;
  b.gradient = 2.0 * (q_f - jammer_xy);
  b.constant = jammer_xy.squaredNorm() - q_f.squaredNorm() + (include_altitude ? altitude * altitude : 0.0);
  return b;
}

/// Index map of the subproblem variables. Per-slot 2-D quantities are stored
/// as consecutive (x, y) pairs inside their block.
struct VariableLayout {
  int N = 0;
  int M = 0;
  bool has_tau = true;
  int q0 = 0, v0 = 0, a0 = 0, tau0 = -1, ell0 = 0, iota0 = 0, d0 = 0, size = 0;

  VariableLayout() = default;
  VariableLayout(int slots, int jammers, bool with_tau) : N(slots), M(jammers), has_tau(with_tau) {
    q0 = 0;
    v0 = 2 * N;
    a0 = 4 * N;
    int next = 6 * N;
    if (has_tau) {
      tau0 = next;
      next += N;
    }
    ell0 = next;
    iota0 = next + N;
    d0 = next + 2 * N;
    size = d0 + M * N;
  }

  int qx(int n) const { return q0 + 2 * n; }
  int qy(int n) const { return q0 + 2 * n + 1; }
  int vx(int n) const { return v0 + 2 * n; }
  int vy(int n) const { return v0 + 2 * n + 1; }
  int ax(int n) const { return a0 + 2 * n; }
  int ay(int n) const { return a0 + 2 * n + 1; }
  int tau(int n) const { return tau0 + n; }
  int ell(int n) const { return ell0 + n; }
  int iota(int n) const { return iota0 + n; }
  int d(int m, int n) const { return d0 + m * N + n; }
};

struct SubproblemOptions {
  bool altitude_in_distance_bound = true;
  double distance_floor = 1e-6;  // m^2, keeps 1/d smooth
  double pull_in = 1e-6;         // relative margin moving the start off active bounds
};

/// One convex subproblem plus the bookkeeping needed to map between the
/// solver's scaled variables and physical quantities.
///
/// Scaled slacks: ell = L P_s beta0 / S, iota = I / sigma^2, dhat = d / S with
/// S = H^2, so every slack is O(1) for the geometries of interest.
struct Subproblem {
  ConvexProgram program;
  VariableLayout layout;
  Mode mode = Mode::max_ee;
  double lambda = 0.0;
  double objective_scale = 1.0;
  double length_scale = 1.0;  // S
  double gain_scale = 1.0;    // P_s beta0
  double noise = 1.0;         // sigma^2
  SmoothFunction numerator;   // sum_n R^l[n]
  SmoothFunction denominator; // E~ in joules (empty in max-throughput mode)
  std::vector<RateBound> rate_bounds;
  VectorXd expansion;         // the expansion point itself (constraints tight)

  VectorXd pack(const Trajectory& t, const SlackSet& k) const {
    const auto& L = layout;
    VectorXd x = VectorXd::Zero(L.size);
    for (int n = 0; n < L.N; ++n) {
      x[L.qx(n)] = t.q[n].x();
      x[L.qy(n)] = t.q[n].y();
      x[L.vx(n)] = t.v[n].x();
      x[L.vy(n)] = t.v[n].y();
      x[L.ax(n)] = t.a[n].x();
      x[L.ay(n)] = t.a[n].y();
      if (L.has_tau) x[L.tau(n)] = k.tau[n];
      x[L.ell(n)] = k.L[n] * gain_scale / length_scale;
      x[L.iota(n)] = k.I[n] / noise;
      for (int m = 0; m < L.M; ++m) x[L.d(m, n)] = k.d[m][n] / length_scale;
    }
    return x;
  }

  Trajectory trajectory(const VectorXd& x) const {
    const auto& L = layout;
    Trajectory t(L.N);
    for (int n = 0; n < L.N; ++n) {
      t.q[n] = {x[L.qx(n)], x[L.qy(n)]};
      t.v[n] = {x[L.vx(n)], x[L.vy(n)]};
      t.a[n] = {x[L.ax(n)], x[L.ay(n)]};
    }
    return t;
  }

  SlackSet slacks(const VectorXd& x) const {
    const auto& L = layout;
    SlackSet k;
    k.tau.resize(L.N);
    k.L.resize(L.N);
    k.I.resize(L.N);
    k.d.assign(L.M, std::vector<double>(L.N));
    for (int n = 0; n < L.N; ++n) {
      k.tau[n] = L.has_tau ? x[L.tau(n)] : x.segment<2>(L.vx(n)).norm();
      k.L[n] = x[L.ell(n)] * length_scale / gain_scale;
      k.I[n] = x[L.iota(n)] * noise;
      for (int m = 0; m < L.M; ++m) k.d[m][n] = x[L.d(m, n)] * length_scale;
    }
    return k;
  }

  /// Unscaled subproblem objective: numerator - lambda * denominator (the
  /// numerator alone in max-throughput mode).
  double objective_value(const VectorXd& x) const {
    if (mode == Mode::max_throughput) return numerator.value(x);
    return numerator.value(x) - lambda * denominator.value(x);
  }
};

/// Rewrites the objective for a new lambda; constraints and surrogates stay
/// frozen at the expansion point.
inline void set_lambda(Subproblem& sp, double lambda) {
  sp.lambda = lambda;
  auto& obj = sp.program.objective;
  obj = SmoothFunction{};
  obj.accumulate(sp.numerator, -1.0 / sp.objective_scale);
  if (sp.mode != Mode::max_throughput) obj.accumulate(sp.denominator, lambda / sp.objective_scale);
}

/// Slack values that make the subproblem constraints tight at `t`. Identical
/// to slack_init except when the altitude term is dropped from the distance
/// bound, in which case d and I follow the horizontal distance.
inline SlackSet tight_slacks(const Trajectory& t, const Scenario& s, const SubproblemOptions& opts = {}) {
  SlackSet k = slack_init(t, s);
  if (!opts.altitude_in_distance_bound) {
    const double H = s.uav.altitude;
    for (int n = 0; n < t.size(); ++n) {
      double interference = s.channel.noise_power_w;
      for (int m = 0; m < s.num_jammers(); ++m) {
        const double dl = dist_sq_bound(t.q[n], s.jammers[m].node.xy(), H, false)(t.q[n]);
        k.d[m][n] = dl;
        interference += s.jammers[m].power_w * s.channel.beta0 / std::max(dl, opts.distance_floor);
      }
      k.I[n] = interference;
    }
  }
  return k;
}

/// Assembles the Dinkelbach subproblem at the expansion point (traj, slacks).
/// In max-ee-nojam mode the jammers of `s` are ignored, so `slacks` must have
/// been computed without them. Throws InfeasibleError if the expansion point
/// is not strictly inside the speed and acceleration bounds.
inline Subproblem build_subproblem(const Trajectory& traj, const SlackSet& slacks, double lambda,
                                   const Scenario& scenario, Mode mode, const SubproblemOptions& opts = {}) {
  const Scenario s = mode == Mode::max_ee_nojam ? without_jammers(scenario) : scenario;
  const int N = s.horizon.N;
  const int M = s.num_jammers();
  const double dt = s.horizon.dt;
  const double H = s.uav.altitude;
  const auto& u = s.uav;
  const auto& ch = s.channel;
  const auto& en = s.energy;
  const bool with_energy = mode != Mode::max_throughput;

  if (traj.size() != N || !traj.consistent()) throw std::invalid_argument("build_subproblem: trajectory size mismatch");
  if (static_cast<int>(slacks.L.size()) != N || static_cast<int>(slacks.I.size()) != N ||
      static_cast<int>(slacks.d.size()) != M)
    throw std::invalid_argument("build_subproblem: slack set does not match the scenario");
  const auto feas = kinematic_residuals(traj, u, s.horizon);
  if (!feas.within(1e-6))
    throw InfeasibleError("expansion point violates the kinematic constraints (max residual " +
                          std::to_string(feas.max_residual()) + ")");

  Subproblem sp;
  sp.mode = mode;
  sp.lambda = lambda;
  sp.layout = VariableLayout(N, M, with_energy);
  sp.length_scale = H * H;
  sp.gain_scale = ch.source_power_w * ch.beta0;
  sp.noise = ch.noise_power_w;
  const auto& L = sp.layout;
  const double S = sp.length_scale;
  auto& prog = sp.program;
  prog.num_vars = L.size;

  // Variable names for dumps.
  prog.variable_names.resize(L.size);
  for (int n = 0; n < N; ++n) {
    const std::string sl = "[" + std::to_string(n + 1) + "]";
    prog.variable_names[L.qx(n)] = "qx" + sl;
    prog.variable_names[L.qy(n)] = "qy" + sl;
    prog.variable_names[L.vx(n)] = "vx" + sl;
    prog.variable_names[L.vy(n)] = "vy" + sl;
    prog.variable_names[L.ax(n)] = "ax" + sl;
    prog.variable_names[L.ay(n)] = "ay" + sl;
    if (L.has_tau) prog.variable_names[L.tau(n)] = "tau" + sl;
    prog.variable_names[L.ell(n)] = "L*Ps*beta0/H^2" + sl;
    prog.variable_names[L.iota(n)] = "I/sigma^2" + sl;
    for (int m = 0; m < M; ++m) prog.variable_names[L.d(m, n)] = "d" + std::to_string(m + 1) + "/H^2" + sl;
  }

  // Kinematic equalities, one row per component.
  {
    std::vector<Triplet> t;
    std::vector<double> rhs;
    int row = 0;
    const double h2 = 0.5 * dt * dt;
    for (int c = 0; c < 2; ++c) {
      auto q = [&](int n) { return c == 0 ? L.qx(n) : L.qy(n); };
      auto v = [&](int n) { return c == 0 ? L.vx(n) : L.vy(n); };
      auto a = [&](int n) { return c == 0 ? L.ax(n) : L.ay(n); };
      // q[1] = start + v[1] dt + a[1] dt^2/2
      t.emplace_back(row, q(0), 1.0);
      t.emplace_back(row, v(0), -dt);
      t.emplace_back(row, a(0), -h2);
      rhs.push_back(u.start[c]);
      ++row;
      for (int n = 1; n < N; ++n) {
        t.emplace_back(row, q(n), 1.0);
        t.emplace_back(row, q(n - 1), -1.0);
        t.emplace_back(row, v(n), -dt);
        t.emplace_back(row, a(n), -h2);
        rhs.push_back(0.0);
        ++row;
        t.emplace_back(row, v(n), 1.0);
        t.emplace_back(row, v(n - 1), -1.0);
        t.emplace_back(row, a(n), -dt);
        rhs.push_back(0.0);
        ++row;
      }
      t.emplace_back(row, q(N - 1), 1.0);
      rhs.push_back(u.end[c]);
      ++row;
    }
    prog.A.resize(row, L.size);
    prog.A.setFromTriplets(t.begin(), t.end());
    prog.b = Eigen::Map<const VectorXd>(rhs.data(), row);
  }

  // Inequalities, slot by slot.
  const double vmin2 = u.v_min * u.v_min;
  const double eps = opts.distance_floor / S;
  auto add = [&prog](SmoothFunction f, std::string label) {
    prog.inequalities.push_back(std::move(f));
    prog.inequality_labels.push_back(std::move(label));
  };
  for (int n = 0; n < N; ++n) {
    const std::string sl = "[" + std::to_string(n + 1) + "]";
    const Vec2 vf = traj.v[n];
    const double vf2 = vf.squaredNorm();
    {
      SmoothFunction f;
      f.constant = -1.0;
      f.add_term(terms::SquaredNorm{L.ax(n), L.ay(n), 0.0, 0.0, 1.0 / (u.a_max * u.a_max)});
      add(std::move(f), "max_acceleration" + sl);
    }
    {
      SmoothFunction f;
      f.constant = -1.0;
      f.add_term(terms::SquaredNorm{L.vx(n), L.vy(n), 0.0, 0.0, 1.0 / (u.v_max * u.v_max)});
      add(std::move(f), "max_speed" + sl);
    }
    {
      // v_min^2 <= 2 vf.v - |vf|^2
      const AffineBound Vl = speed_sq_bound(vf);
      SmoothFunction f;
      f.constant = (vmin2 - Vl.constant) / vmin2;
      f.add_linear(L.vx(n), -Vl.gradient.x() / vmin2).add_linear(L.vy(n), -Vl.gradient.y() / vmin2);
      add(std::move(f), "min_speed_linearized" + sl);
    }
    if (with_energy) {
      SmoothFunction lo;
      lo.constant = 1.0;
      lo.add_linear(L.tau(n), -1.0 / u.v_min);
      add(std::move(lo), "tau_lower" + sl);
      // tau^2 <= 2 vf.v - |vf|^2
      const AffineBound Vl = speed_sq_bound(vf);
      const double scale = std::max(vf2, vmin2);
      SmoothFunction f;
      f.constant = -Vl.constant / scale;
      f.add_term(terms::SquaredNorm{L.tau(n), -1, 0.0, 0.0, 1.0 / scale});
      f.add_linear(L.vx(n), -Vl.gradient.x() / scale).add_linear(L.vy(n), -Vl.gradient.y() / scale);
      add(std::move(f), "tau_upper" + sl);
    }
    {
      // |q - q_s|^2 + H^2 <= L P_s beta0
      SmoothFunction f;
      f.constant = H * H / S;
      f.add_term(terms::SquaredNorm{L.qx(n), L.qy(n), s.source.x, s.source.y, 1.0 / S});
      f.add_linear(L.ell(n), -1.0);
      add(std::move(f), "source_gain" + sl);
    }
    {
      // sum_m P_m beta0 / d_m + sigma^2 <= I, written as
      // log(sum_m c_m / dhat_m) - log(iota - 1) <= 0 so Newton steps cope with
      // the multiplicative changes of iota and dhat near a jammer.
      SmoothFunction f;
      if (M == 0) {
        f.constant = 1.0;
        f.add_linear(L.iota(n), -1.0);
      } else if (M <= terms::kMaxTermVars) {
        terms::LogSumReciprocal lse;
        for (int m = 0; m < M; ++m) lse.add(L.d(m, n), s.jammers[m].power_w * ch.beta0 / (ch.noise_power_w * S));
        f.add_term(lse);
        f.add_term(terms::NegLog{L.iota(n), 1.0, 1.0});
      } else {
        f.constant = 1.0;
        for (int m = 0; m < M; ++m)
          f.add_term(terms::Reciprocal{L.d(m, n), s.jammers[m].power_w * ch.beta0 / (ch.noise_power_w * S)});
        f.add_linear(L.iota(n), -1.0);
      }
      add(std::move(f), "interference" + sl);
    }
    for (int m = 0; m < M; ++m) {
      const std::string tag = std::to_string(m + 1) + sl;
      SmoothFunction lo;
      lo.constant = eps;
      lo.add_linear(L.d(m, n), -1.0);
      add(std::move(lo), "distance_floor" + tag);
      // d_m <= tangent of |q - q_m|^2 (+ H^2)
      const AffineBound ql = dist_sq_bound(traj.q[n], s.jammers[m].node.xy(), H, opts.altitude_in_distance_bound);
      SmoothFunction f;
      f.constant = -ql.constant / S;
      f.add_linear(L.d(m, n), 1.0);
      f.add_linear(L.qx(n), -ql.gradient.x() / S).add_linear(L.qy(n), -ql.gradient.y() / S);
      add(std::move(f), "jammer_distance" + tag);
    }
  }

  // Numerator: sum_n R^l[n], affine in (L, I).
  sp.rate_bounds.resize(N);
  for (int n = 0; n < N; ++n) {
    const RateBound rb = rate_bound_coeffs(slacks.L[n], slacks.I[n], ch.bandwidth_hz);
    sp.rate_bounds[n] = rb;
    sp.numerator.constant += rb.constant - rb.coeff_L * rb.L_f - rb.coeff_I * rb.I_f;
    sp.numerator.add_linear(L.ell(n), rb.coeff_L * S / sp.gain_scale);
    sp.numerator.add_linear(L.iota(n), rb.coeff_I * ch.noise_power_w);
  }

  // Denominator: dt sum_n [c1 |v|^3 + c2 (1 + |a|^2/g^2) / tau] + kinetic term.
  if (with_energy) {
    for (int n = 0; n < N; ++n) {
      sp.denominator.add_term(terms::NormCubed{L.vx(n), L.vy(n), dt * en.c1});
      sp.denominator.add_term(terms::QuadOverLinear{L.ax(n), L.ay(n), L.tau(n), en.gravity, dt * en.c2});
    }
    if (en.mass > 0.0) {
      // +J/2 |v[N]|^2 stays convex; -J/2 |v[1]|^2 is replaced by its tangent,
      // which over-estimates the energy.
      sp.denominator.add_term(terms::SquaredNorm{L.vx(N - 1), L.vy(N - 1), 0.0, 0.0, 0.5 * en.mass});
      const Vec2 v1 = traj.v[0];
      sp.denominator.constant += 0.5 * en.mass * v1.squaredNorm();
      sp.denominator.add_linear(L.vx(0), -en.mass * v1.x()).add_linear(L.vy(0), -en.mass * v1.y());
    }
  }

  // Strictly interior start: the expansion point with every slack pulled off
  // its bound by a relative margin. Velocities and accelerations sitting on a
  // limit (a previous solve ends there) are scaled inward as well; that
  // breaks the dynamics by ~pull, which the solver repairs in its first steps.
  sp.expansion = sp.pack(traj, slacks);
  VectorXd x0 = sp.expansion;
  const double pull = opts.pull_in;
  for (int n = 0; n < N; ++n) {
    const double speed = traj.v[n].norm();
    const double accel = traj.a[n].norm();
    if (!(speed > u.v_min) || !(speed < u.v_max) || !(accel < u.a_max))
      throw InfeasibleError("expansion point not strictly inside the speed/acceleration bounds at slot " +
                            std::to_string(n + 1));
    const double v_hi = u.v_max * (1.0 - pull), v_lo = u.v_min * (1.0 + pull);
    const double v_scale = speed > v_hi ? v_hi / speed : speed < v_lo ? v_lo / speed : 1.0;
    const Vec2 v0 = v_scale * traj.v[n];
    x0[L.vx(n)] = v0.x();
    x0[L.vy(n)] = v0.y();
    if (accel > u.a_max * (1.0 - pull)) {
      x0[L.ax(n)] *= u.a_max * (1.0 - pull) / accel;
      x0[L.ay(n)] *= u.a_max * (1.0 - pull) / accel;
    }
    if (L.has_tau) {
      const double top = std::sqrt(speed_sq_bound(traj.v[n])(v0));
      x0[L.tau(n)] = top - std::min(pull * top, 0.5 * (top - u.v_min));
    }
    x0[L.ell(n)] = (squared_distance_3d(traj.q[n], H, s.source) / S) * (1.0 + pull);
    double interference = 1.0;
    for (int m = 0; m < M; ++m) {
      const AffineBound ql = dist_sq_bound(traj.q[n], s.jammers[m].node.xy(), H, opts.altitude_in_distance_bound);
      const double dhat = ql(traj.q[n]) / S * (1.0 - pull);
      if (!(dhat > eps * (1.0 + pull)))
        throw InfeasibleError("distance bound collapses below its floor at slot " + std::to_string(n + 1) +
                              " (UAV directly above jammer " + std::to_string(m + 1) + ")");
      x0[L.d(m, n)] = dhat;
      interference += s.jammers[m].power_w * ch.beta0 / (ch.noise_power_w * S) / dhat;
    }
    x0[L.iota(n)] = interference * (1.0 + pull);
  }
  prog.initial_point = x0;

  const double num0 = std::abs(sp.numerator.value(sp.expansion));
  sp.objective_scale = num0 > 0.0 ? num0 : 1.0;
  set_lambda(sp, lambda);
  return sp;
}

/// Surrogate numerator and denominator at the expansion point; their ratio
/// initialises lambda.
inline double surrogate_ratio(const Subproblem& sp, const VectorXd& x) {
  return sp.numerator.value(x) / sp.denominator.value(x);
}

}  // namespace uavee
