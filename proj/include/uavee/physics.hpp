#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "uavee/scenario.hpp"

// Exact evaluators of the channel, rate and propulsion models. Everything the
// optimizer reports is scored here, never with the surrogates it optimizes.

namespace uavee {

/// Per-slot horizontal positions, velocities and accelerations (altitude is
/// the scenario's fixed H). Slot n of the model is index n-1 here.
struct Trajectory {
  std::vector<Vec2> q;
  std::vector<Vec2> v;
  std::vector<Vec2> a;

  Trajectory() = default;
  explicit Trajectory(int n) : q(n, Vec2::Zero()), v(n, Vec2::Zero()), a(n, Vec2::Zero()) {}

  int size() const { return static_cast<int>(q.size()); }

  bool consistent() const {
    if (v.size() != q.size() || a.size() != q.size()) return false;
    for (std::size_t n = 0; n < q.size(); ++n)
      if (!q[n].allFinite() || !v[n].allFinite() || !a[n].allFinite()) return false;
    return true;
  }

  /// Time-reversed flight: positions mirrored in time, velocities negated.
  /// Accelerations keep their sign (d(-v)/d(-t) = a). Used for symmetry checks.
  Trajectory reversed() const {
    Trajectory r = *this;
    std::reverse(r.q.begin(), r.q.end());
    std::reverse(r.v.begin(), r.v.end());
    std::reverse(r.a.begin(), r.a.end());
    for (auto& v : r.v) v = -v;
    return r;
  }
};

inline double squared_distance_3d(const Vec2& uav_xy, double altitude, const GroundNode& g) {
  return (uav_xy - g.xy()).squaredNorm() + altitude * altitude;
}

/// Free-space gain beta0 / d^2 with d the 3-D UAV-to-ground distance.
inline double channel_gain(const Vec2& uav_xy, double altitude, const GroundNode& ground, double beta0) {
  return beta0 / squared_distance_3d(uav_xy, altitude, ground);
}

/// Jamming power plus noise at the UAV, in watts.
inline double interference_power(const Vec2& uav_xy, const Scenario& s) {
  double total = s.channel.noise_power_w;
  for (const auto& j : s.jammers)
    total += j.power_w * channel_gain(uav_xy, s.uav.altitude, j.node, s.channel.beta0);
  return total;
}

inline double sinr(const Vec2& uav_xy, const Scenario& s) {
  const double signal = s.channel.source_power_w *
                        channel_gain(uav_xy, s.uav.altitude, s.source, s.channel.beta0);
  return signal / interference_power(uav_xy, s);
}

/// Achievable rate from the source to the UAV in bits/second.
inline double slot_rate(const Vec2& uav_xy, const Scenario& s) {
  return s.channel.bandwidth_hz * std::log1p(sinr(uav_xy, s)) * std::numbers::log2e;
}

/// Propulsion power c1|v|^3 + (c2/|v|)(1 + |a|^2/g^2) in watts. Throws
/// DomainError at zero airspeed, where the fixed-wing model is singular.
inline double propulsion_power(const Vec2& v, const Vec2& a, const EnergyParams& e) {
  const double speed = v.norm();
  if (!(speed > 0.0)) throw DomainError("propulsion power undefined at zero speed");
  const double g2 = e.gravity * e.gravity;
  return e.c1 * speed * speed * speed + (e.c2 / speed) * (1.0 + a.squaredNorm() / g2);
}

/// Change of kinetic energy between the first and last slot.
inline double kinetic_energy_change(const Trajectory& t, double mass) {
  if (t.size() == 0) return 0.0;
  return 0.5 * mass * (t.v.back().squaredNorm() - t.v.front().squaredNorm());
}

/// Total propulsion energy in joules, including the kinetic-energy change.
inline double trajectory_energy(const Trajectory& t, const EnergyParams& e, double dt) {
  double sum = 0.0;
  for (int n = 0; n < t.size(); ++n) {
    try {
      sum += propulsion_power(t.v[n], t.a[n], e);
    } catch (const DomainError&) {
      throw DomainError("zero speed at slot " + std::to_string(n), n);
    }
  }
  return dt * sum + kinetic_energy_change(t, e.mass);
}

/// Sum of per-slot rates, sum_n R[n]. This is the numerator of the EE
/// objective and the "sum throughput" column of the comparison tables.
inline double sum_throughput(const Trajectory& t, const Scenario& s) {
  double sum = 0.0;
  for (const auto& q : t.q) sum += slot_rate(q, s);
  return sum;
}

/// Data volume actually delivered over the flight, dt * sum_n R[n], in bits.
inline double delivered_bits(const Trajectory& t, const Scenario& s) {
  return s.horizon.dt * sum_throughput(t, s);
}

/// sum_n R[n] / E. Same units as the comparison tables (bits per joule with
/// the per-slot rate sum as numerator).
inline double energy_efficiency(const Trajectory& t, const Scenario& s) {
  return sum_throughput(t, s) / trajectory_energy(t, s.energy, s.horizon.dt);
}

// ---------------------------------------------------------------------------
// Kinematic feasibility
// ---------------------------------------------------------------------------

enum class ConstraintFamily : int {
  dynamics = 0,       // q[n] = q[n-1] + v[n] dt + a[n] dt^2 / 2
  velocity,           // v[n] = v[n-1] + a[n] dt
  start,              // q[1] = start + v[1] dt + a[1] dt^2 / 2
  end,                // q[N] = end
  max_acceleration,   // |a[n]| <= a_max
  max_speed,          // |v[n]| <= v_max
  min_speed,          // |v[n]| >= v_min
};
inline constexpr int kNumFamilies = 7;

inline const char* family_name(ConstraintFamily f) {
  static constexpr std::array<const char*, kNumFamilies> names{
      "dynamics", "velocity", "start", "end", "max_acceleration", "max_speed", "min_speed"};
  return names[static_cast<int>(f)];
}

struct FeasibilityReport {
  struct Entry {
    double residual = 0.0;
    int slot = -1;  // 0-based index of the worst slot, -1 when no slot applies
  };
  std::array<Entry, kNumFamilies> families{};

  const Entry& operator[](ConstraintFamily f) const { return families[static_cast<int>(f)]; }

  double max_residual() const {
    double m = 0.0;
    for (const auto& e : families) m = std::max(m, e.residual);
    return m;
  }
  bool within(double tol) const { return max_residual() <= tol; }
};

inline FeasibilityReport kinematic_residuals(const Trajectory& t, const UavParams& uav, const Horizon& h) {
  FeasibilityReport r;
  const double dt = h.dt;
  auto record = [&r](ConstraintFamily f, double value, int slot) {
    auto& e = r.families[static_cast<int>(f)];
    if (e.slot < 0 || value > e.residual) e = {std::max(value, 0.0), slot};
  };
  const int N = t.size();
  if (N == 0) return r;
  record(ConstraintFamily::start, (t.q[0] - uav.start - t.v[0] * dt - 0.5 * t.a[0] * dt * dt).norm(), 0);
  record(ConstraintFamily::end, (t.q[N - 1] - uav.end).norm(), N - 1);
  for (int n = 1; n < N; ++n) {
    record(ConstraintFamily::dynamics,
           (t.q[n] - t.q[n - 1] - t.v[n] * dt - 0.5 * t.a[n] * dt * dt).norm(), n);
    record(ConstraintFamily::velocity, (t.v[n] - t.v[n - 1] - t.a[n] * dt).norm(), n);
  }
  for (int n = 0; n < N; ++n) {
    const double speed = t.v[n].norm();
    record(ConstraintFamily::max_acceleration, std::max(0.0, t.a[n].norm() - uav.a_max), n);
    record(ConstraintFamily::max_speed, std::max(0.0, speed - uav.v_max), n);
    record(ConstraintFamily::min_speed, std::max(0.0, uav.v_min - speed), n);
  }
  return r;
}

}  // namespace uavee
