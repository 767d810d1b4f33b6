#pragma once

#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

#include "uavee/physics.hpp"

namespace uavee {

/// Auxiliary variables of the convex reformulation, one entry per slot.
/// d[m][n] is the squared 3-D distance bound to jammer m.
struct SlackSet {
  std::vector<double> tau;  // speed lower bound, m/s
  std::vector<double> L;    // inverse received source power, 1/W
  std::vector<double> I;    // interference-plus-noise upper bound, W
  std::vector<std::vector<double>> d;  // m^2
};

namespace detail {

// Constant-speed velocity profile whose heading swings from +alpha to -alpha
// (measured from `along` toward `side`) around slot `center`, turning at a
// fixed rate per slot.
struct TentProfile {
  double speed;
  Vec2 along;
  Vec2 side;
  double turn_rate;  // rad per slot
  int slots;
  double dt;

  double turn_slots(double alpha) const { return 2.0 * alpha / turn_rate; }

  double heading(double alpha, double center, int n) const {
    const double half = 0.5 * turn_slots(alpha);
    if (n <= center - half) return alpha;
    if (n >= center + half) return -alpha;
    return alpha - turn_rate * (n - (center - half));
  }

  std::vector<Vec2> velocities(double alpha, double center) const {
    std::vector<Vec2> v(slots);
    for (int n = 0; n < slots; ++n) {
      const double th = heading(alpha, center, n);
      v[n] = speed * (std::cos(th) * along + std::sin(th) * side);
    }
    return v;
  }

  // Displacement q[N] - start with a[1] = 0 and a[n] = (v[n] - v[n-1]) / dt.
  // The position recursion uses the end-of-slot velocity, so each step is
  // v[n] dt + (v[n] - v[n-1]) dt / 2.
  Vec2 displacement(const std::vector<Vec2>& v) const {
    Vec2 d = dt * v[0];
    for (int n = 1; n < slots; ++n) d += dt * (1.5 * v[n] - 0.5 * v[n - 1]);
    return d;
  }
};

inline double bisect(const std::function<double(double)>& f, double lo, double hi) {
  double flo = f(lo);
  for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(hi)); ++it) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if ((fm > 0.0) == (flo > 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

inline Vec2 detour_direction(const Scenario& s, const Vec2& along, bool degenerate) {
  const Vec2 to_source = s.source.xy() - s.uav.start;
  Vec2 side;
  if (degenerate) {
    // Start and end coincide: bulge straight out, toward the source if it is
    // not right at the start point.
    side = Vec2(0.0, 1.0);
    if (s.solver.detour == DetourSide::negative_y) side = Vec2(0.0, -1.0);
    if (s.solver.detour == DetourSide::toward_source && to_source.norm() > 1e-9)
      side = to_source.normalized();
    return side;
  }
  side = Vec2(-along.y(), along.x());
  switch (s.solver.detour) {
    case DetourSide::positive_y:
      if (side.y() < 0.0 || (side.y() == 0.0 && side.x() < 0.0)) side = -side;
      break;
    case DetourSide::negative_y:
      if (side.y() > 0.0 || (side.y() == 0.0 && side.x() > 0.0)) side = -side;
      break;
    case DetourSide::toward_source: {
      const double offset = side.dot(to_source);
      if (offset < 0.0 || (std::abs(offset) < 1e-9 && side.y() < 0.0)) side = -side;
      break;
    }
  }
  return side;
}

}  // namespace detail

/// Feasible initial trajectory. Flies the straight line at constant velocity
/// when that is fast enough; otherwise flies at 1.1 v_min along a tent-shaped
/// detour whose length matches the flight time. Throws InfeasibleError when
/// neither is possible.
inline Trajectory line_init(const Scenario& s) {
  const auto& u = s.uav;
  const auto& h = s.horizon;
  const int N = h.N;
  const double dt = h.dt;
  const Vec2 delta = u.end - u.start;
  const double dist = delta.norm();
  const double line_speed = dist / h.T;

  if (line_speed > u.v_max)
    throw InfeasibleError("end point unreachable: needs " + std::to_string(line_speed) +
                          " m/s > v_max");

  Trajectory t(N);
  if (line_speed > u.v_min) {
    const Vec2 v = delta / h.T;
    for (int n = 0; n < N; ++n) {
      t.v[n] = v;
      t.a[n].setZero();
      t.q[n] = u.start + (n + 1) * dt * v;
    }
    t.q[N - 1] = u.end;
    return t;
  }

  const double speed = 1.1 * u.v_min;
  if (speed >= u.v_max) throw InfeasibleError("no speed strictly between v_min and v_max for a detour");
  const bool degenerate = dist < 1e-9;
  Vec2 along;
  Vec2 side;
  if (degenerate) {
    side = detail::detour_direction(s, Vec2::UnitX(), true);
    along = Vec2(side.y(), -side.x());
  } else {
    along = delta / dist;
    side = detail::detour_direction(s, along, false);
  }
  // Turn at 90% of the acceleration limit: |dv| = 2 s sin(w/2) per slot.
  const double chord = 0.9 * u.a_max * dt / (2.0 * speed);
  const double turn_rate = chord >= 1.0 ? std::numbers::pi / 2 : 2.0 * std::asin(chord);
  const detail::TentProfile tent{speed, along, side, turn_rate, N, dt};

  auto center_for = [&](double alpha) -> double {
    const double half = 0.5 * tent.turn_slots(alpha);
    const double lo = half, hi = (N - 1) - half;
    if (lo > hi) return std::nan("");
    auto perp = [&](double c) { return tent.displacement(tent.velocities(alpha, c)).dot(side); };
    if (perp(lo) > 0.0 || perp(hi) < 0.0) return std::nan("");
    return detail::bisect(perp, lo, hi);
  };
  auto along_error = [&](double alpha) {
    const double c = center_for(alpha);
    if (std::isnan(c)) return std::nan("");
    return tent.displacement(tent.velocities(alpha, c)).dot(along) - dist;
  };

  // Along-track progress falls as the legs tilt away from the end point.
  const double alpha_lo = 1e-9;
  double alpha_hi = std::numbers::pi - 1e-9;
  const double err_lo = along_error(alpha_lo);
  while (std::isnan(along_error(alpha_hi)) && alpha_hi > alpha_lo) alpha_hi *= 0.98;
  const double err_hi = along_error(alpha_hi);
  if (std::isnan(err_lo) || std::isnan(err_hi) || err_lo < 0.0 || err_hi > 0.0)
    throw InfeasibleError("no v_min-respecting detour fits the horizon (N too small to turn)");
  const double alpha = detail::bisect(along_error, alpha_lo, alpha_hi);
  const double center = center_for(alpha);
  if (std::isnan(center)) throw InfeasibleError("detour construction failed");

  t.v = tent.velocities(alpha, center);
  for (int n = 1; n < N; ++n) t.a[n] = (t.v[n] - t.v[n - 1]) / dt;
  // a[1] absorbs the bisection residual so the end point is met exactly.
  const Vec2 residual = delta - tent.displacement(t.v);
  t.a[0] = 2.0 * residual / (dt * dt);
  t.q[0] = u.start + t.v[0] * dt + 0.5 * t.a[0] * dt * dt;
  for (int n = 1; n < N; ++n) t.q[n] = t.q[n - 1] + t.v[n] * dt + 0.5 * t.a[n] * dt * dt;
  return t;
}

/// Slack values that make every reformulation constraint tight at `t`.
inline SlackSet slack_init(const Trajectory& t, const Scenario& s) {
  const int N = t.size();
  const int M = s.num_jammers();
  const double H = s.uav.altitude;
  SlackSet k;
  k.tau.resize(N);
  k.L.resize(N);
  k.I.resize(N);
  k.d.assign(M, std::vector<double>(N));
  for (int n = 0; n < N; ++n) {
    k.tau[n] = t.v[n].norm();
    k.L[n] = 1.0 / (s.channel.source_power_w * channel_gain(t.q[n], H, s.source, s.channel.beta0));
    k.I[n] = interference_power(t.q[n], s);
    for (int m = 0; m < M; ++m) k.d[m][n] = squared_distance_3d(t.q[n], H, s.jammers[m].node);
  }
  return k;
}

}  // namespace uavee
