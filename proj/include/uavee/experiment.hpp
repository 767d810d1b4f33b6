#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "uavee/optimizer.hpp"
#include "uavee/trajectory_init.hpp"

// Case runs, random-jammer sweeps and plot data. Everything written here is
// plain CSV or JSON.

namespace uavee {

inline std::vector<Mode> parse_modes(const std::string& s) {
  if (s == "all") return {Mode::max_ee, Mode::max_throughput, Mode::max_ee_nojam};
  return {parse_mode(s)};
}

/// "1".."4", "case1".."case4", or a path to a scenario file.
inline Scenario resolve_scenario(const std::string& spec) {
  std::string id = spec;
  if (id.rfind("case", 0) == 0) id = id.substr(4);
  if (!id.empty() && std::all_of(id.begin(), id.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); }))
    return case_scenario(std::stoi(id));
  if (spec.rfind("case", 0) == 0 && !std::filesystem::exists(spec))
    throw ValidationError("unknown case '" + spec + "' (expected 1-4 or a scenario file)");
  return load_scenario(spec);
}

struct Overrides {
  std::optional<double> T;
  std::optional<double> mass;
  bool paper_eq23 = false;
};

inline void apply(const Overrides& o, Scenario& s) {
  if (o.T) s.horizon = Horizon::from_duration(*o.T, s.horizon.dt);
  if (o.mass) s.energy.mass = *o.mass;
  if (o.paper_eq23) s.solver.altitude_in_distance_bound = false;
  validate(s);
}

// ---------------------------------------------------------------------------
// Output tables
// ---------------------------------------------------------------------------

/// Refuses to write a trajectory that violates the flight constraints.
inline void check_writable(const Trajectory& t, const Scenario& s) {
  const auto r = kinematic_residuals(t, s.uav, s.horizon);
  if (t.size() != s.horizon.N || !r.within(1e-6))
    throw InvariantViolation("trajectory fails the kinematic check (max residual " +
                             std::to_string(r.max_residual()) + "), not writing it");
}

inline void write_trajectory_csv(std::ostream& os, const Trajectory& t, const Scenario& s) {
  check_writable(t, s);
  os << "n,t_s,x_m,y_m,vx,vy,ax,ay,speed_mps,rate_bps,power_W\n";
  os << std::setprecision(12);
  for (int n = 0; n < t.size(); ++n) {
    os << n + 1 << ',' << (n + 1) * s.horizon.dt << ',' << t.q[n].x() << ',' << t.q[n].y() << ',' << t.v[n].x()
       << ',' << t.v[n].y() << ',' << t.a[n].x() << ',' << t.a[n].y() << ',' << t.v[n].norm() << ','
       << slot_rate(t.q[n], s) << ',' << propulsion_power(t.v[n], t.a[n], s.energy) << '\n';
  }
}

// Throughput is reported the way the comparison table does: the rate sum over
// slots, in kbits. delivered_kbits is the same sum times dt.
inline const char* kMetricsHeader =
    "algorithm,average_speed_mps,sum_throughput_kbits,energy_J,ee_kbits_per_J,delivered_kbits,termination";

inline void write_metrics_row(std::ostream& os, Mode mode, const Metrics& m, const Scenario& s,
                              const std::string& termination) {
  os << std::setprecision(10) << mode_name(mode) << ',' << m.average_speed << ',' << m.sum_throughput / 1e3 << ','
     << m.energy << ',' << m.ee / 1e3 << ',' << s.horizon.dt * m.sum_throughput / 1e3 << ',' << termination << '\n';
}

// ---------------------------------------------------------------------------
// Saved runs
// ---------------------------------------------------------------------------

struct SavedRun {
  Scenario scenario;
  RunReport report;
};

inline nlohmann::json run_to_json(const SavedRun& run) {
  using nlohmann::json;
  const RunReport& r = run.report;
  json traj = json::array();
  for (int n = 0; n < r.trajectory.size(); ++n)
    traj.push_back({r.trajectory.q[n].x(), r.trajectory.q[n].y(), r.trajectory.v[n].x(), r.trajectory.v[n].y(),
                    r.trajectory.a[n].x(), r.trajectory.a[n].y()});
  json log = json::array();
  for (const auto& e : r.log)
    log.push_back({{"outer", e.outer}, {"inner", e.inner}, {"lambda", e.lambda}, {"F", e.F},
                   {"surrogate_obj", e.surrogate_obj}, {"exact_throughput_bits", e.exact_throughput_bits},
                   {"exact_energy", e.exact_energy}, {"exact_ee", e.exact_ee}, {"solver_iters", e.solver_iters},
                   {"reduced_accuracy", e.reduced_accuracy}, {"wall_ms", e.wall_ms}});
  return {{"mode", mode_name(r.mode)},
          {"termination", r.termination},
          {"initial_ee", r.initial_ee},
          {"final_F", r.final_F},
          {"final_kkt", r.final_kkt.max()},
          {"kkt_tolerance", r.kkt_tolerance},
          {"metrics",
           {{"average_speed", r.metrics.average_speed},
            {"sum_throughput", r.metrics.sum_throughput},
            {"energy", r.metrics.energy},
            {"ee", r.metrics.ee}}},
          {"scenario", scenario_to_json(run.scenario)},
          {"trajectory", traj},
          {"log", log}};
}

inline SavedRun run_from_json(const nlohmann::json& j) {
  try {
    SavedRun out;
    out.scenario = scenario_from_json(j.at("scenario"));
    RunReport& r = out.report;
    r.mode = parse_mode(j.at("mode").get<std::string>());
    r.termination = j.at("termination").get<std::string>();
    r.initial_ee = j.at("initial_ee").get<double>();
    r.final_F = j.at("final_F").get<double>();
    r.kkt_tolerance = j.at("kkt_tolerance").get<double>();
    const auto& m = j.at("metrics");
    r.metrics = {m.at("average_speed").get<double>(), m.at("sum_throughput").get<double>(),
                 m.at("energy").get<double>(), m.at("ee").get<double>()};
    const auto& traj = j.at("trajectory");
    r.trajectory = Trajectory(static_cast<int>(traj.size()));
    for (std::size_t n = 0; n < traj.size(); ++n) {
      const auto& row = traj[n];
      r.trajectory.q[n] = {row.at(0).get<double>(), row.at(1).get<double>()};
      r.trajectory.v[n] = {row.at(2).get<double>(), row.at(3).get<double>()};
      r.trajectory.a[n] = {row.at(4).get<double>(), row.at(5).get<double>()};
    }
    for (const auto& e : j.at("log")) {
      IterationRecord rec;
      rec.outer = e.at("outer").get<int>();
      rec.inner = e.at("inner").get<int>();
      rec.lambda = e.at("lambda").get<double>();
      rec.F = e.at("F").get<double>();
      rec.surrogate_obj = e.at("surrogate_obj").get<double>();
      rec.exact_throughput_bits = e.at("exact_throughput_bits").get<double>();
      rec.exact_energy = e.at("exact_energy").get<double>();
      rec.exact_ee = e.at("exact_ee").get<double>();
      rec.solver_iters = e.at("solver_iters").get<int>();
      rec.reduced_accuracy = e.value("reduced_accuracy", false);
      rec.wall_ms = e.at("wall_ms").get<double>();
      r.log.push_back(rec);
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("run file: ") + e.what());
  }
}

inline SavedRun load_run(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open run file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("run file '" + path + "': " + e.what());
  }
  return run_from_json(j);
}

// ---------------------------------------------------------------------------
// run-case
// ---------------------------------------------------------------------------

inline std::string file_tag(Mode m) {
  std::string s = mode_name(m);
  std::replace(s.begin(), s.end(), '-', '_');
  return s;
}

inline std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream os(p);
  if (!os) throw std::runtime_error("cannot write '" + p.string() + "'");
  return os;
}

/// Runs each mode from the same straight-line start and writes
/// trajectory_<mode>.csv, convergence_<mode>.csv, run_<mode>.json and
/// metrics.csv into `out_dir`. A table goes to `summary`.
inline std::vector<SavedRun> run_case(const Scenario& s, const std::vector<Mode>& modes,
                                      const std::filesystem::path& out_dir, std::ostream& summary) {
  validate(s);
  std::filesystem::create_directories(out_dir);
  const Trajectory init = line_init(s);
  std::vector<SavedRun> runs;
  for (Mode m : modes) {
    SavedRun run{s, optimize(s, init, AlgoOptions::from_scenario(s, m))};
    {
      auto os = open_out(out_dir / ("trajectory_" + file_tag(m) + ".csv"));
      write_trajectory_csv(os, run.report.trajectory, s);
    }
    {
      auto os = open_out(out_dir / ("convergence_" + file_tag(m) + ".csv"));
      write_convergence_csv(os, run.report);
    }
    {
      auto os = open_out(out_dir / ("run_" + file_tag(m) + ".json"));
      os << run_to_json(run).dump(1) << '\n';
    }
    runs.push_back(std::move(run));
  }
  auto os = open_out(out_dir / "metrics.csv");
  os << kMetricsHeader << '\n';
  for (const auto& r : runs) write_metrics_row(os, r.report.mode, r.report.metrics, s, r.report.termination);

  summary << std::left << std::setw(16) << "algorithm" << std::right << std::setw(12) << "speed m/s" << std::setw(18)
          << "throughput kbit" << std::setw(14) << "energy J" << std::setw(12) << "EE kbit/J" << "  outer  termination\n";
  for (const auto& r : runs) {
    const Metrics& m = r.report.metrics;
    summary << std::left << std::setw(16) << mode_name(r.report.mode) << std::right << std::fixed << std::setprecision(2)
            << std::setw(12) << m.average_speed << std::setw(18) << m.sum_throughput / 1e3 << std::setw(14)
            << m.energy << std::setw(12) << m.ee / 1e3 << std::setw(7) << r.report.outer.size() << "  "
            << r.report.termination << '\n';
  }
  summary << std::defaultfloat;
  return runs;
}

// ---------------------------------------------------------------------------
// run-sweep
// ---------------------------------------------------------------------------

enum class SweepVariable { M, T };

struct SweepSpec {
  SweepVariable variable = SweepVariable::M;
  std::vector<double> values;
  int trials = 10;
  std::uint64_t seed = 1;
  Vec2 box_min{-500.0, 0.0};
  Vec2 box_max{500.0, 1000.0};
  double min_source_distance = 50.0;  // jammer samples closer than this to the source are redrawn
  double fixed_T = 60.0;              // horizon for an M sweep
  int fixed_M = 1;                    // jammer count for a T sweep
  int jobs = 1;

  /// Desk defaults: M in 1..4 at T = 60 s, or T in {60, 100} with one jammer.
  /// `full` switches to T = 200 s and a longer T range.
  static SweepSpec defaults(SweepVariable v, bool full) {
    SweepSpec s;
    s.variable = v;
    if (v == SweepVariable::M) {
      s.values = {1, 2, 3, 4};
      s.fixed_T = full ? 200.0 : 60.0;
    } else {
      s.values = full ? std::vector<double>{100, 150, 200, 250, 300} : std::vector<double>{60, 100};
    }
    return s;
  }

  void check() const {
    if (values.empty()) throw ValidationError("sweep: no values");
    for (double v : values) {
      if (!(v > 0.0)) throw ValidationError("sweep: values must be positive");
      if (variable == SweepVariable::M && v != std::floor(v)) throw ValidationError("sweep: M values must be integers");
    }
    if (trials < 1) throw ValidationError("sweep: trials must be >= 1");
    if (!(box_max.x() > box_min.x() && box_max.y() > box_min.y())) throw ValidationError("sweep: empty jammer box");
    if (min_source_distance < 0.0) throw ValidationError("sweep: negative source exclusion radius");
    if (jobs < 1) throw ValidationError("sweep: jobs must be >= 1");
  }
};

// 53 random bits to [0, 1); same stream on every platform, unlike the
// standard distributions.
inline double unit_draw(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Jammer positions of one trial. Every value in a sweep reuses the trial's
/// draw, and M jammers are the first M of the list, so curves compare like
/// with like.
inline std::vector<Jammer> draw_jammers(const SweepSpec& spec, const Scenario& base, int trial, int count) {
  std::seed_seq seq{static_cast<std::uint32_t>(spec.seed & 0xffffffffu), static_cast<std::uint32_t>(spec.seed >> 32),
                    static_cast<std::uint32_t>(trial)};
  std::mt19937_64 rng(seq);
  const double power = base.jammers.empty() ? 0.1 : base.jammers.front().power_w;
  std::vector<Jammer> out;
  int attempts = 0;
  while (static_cast<int>(out.size()) < count) {
    if (++attempts > 100000) throw ValidationError("sweep: source exclusion leaves no room for jammers");
    const double x = spec.box_min.x() + (spec.box_max.x() - spec.box_min.x()) * unit_draw(rng);
    const double y = spec.box_min.y() + (spec.box_max.y() - spec.box_min.y()) * unit_draw(rng);
    if ((Vec2(x, y) - base.source.xy()).norm() < spec.min_source_distance) continue;
    out.push_back({{x, y}, power});
  }
  return out;
}

struct TrialResult {
  double value = 0.0;
  int trial = 0;
  Mode mode = Mode::max_ee;
  std::string status;  // "ok" or the error text
  Metrics metrics;
  int outer_iterations = 0;
  std::vector<Jammer> jammers;
};

struct SweepSummaryRow {
  double value = 0.0;
  Mode mode = Mode::max_ee;
  int ok = 0;
  int failed = 0;
  double mean_ee = 0.0;  // bits/J
  double mean_sum_throughput = 0.0;
  double mean_energy = 0.0;
};

struct SweepResult {
  std::vector<TrialResult> trials;
  std::vector<SweepSummaryRow> summary;

  double mean_ee(double value, Mode mode) const {
    for (const auto& r : summary)
      if (r.value == value && r.mode == mode) return r.mean_ee;
    throw std::out_of_range("sweep: no summary row");
  }
};

inline Scenario sweep_scenario(const SweepSpec& spec, const Scenario& base, double value, int trial) {
  Scenario s = base;
  const bool m_sweep = spec.variable == SweepVariable::M;
  int max_m = spec.fixed_M;
  if (m_sweep) max_m = static_cast<int>(*std::max_element(spec.values.begin(), spec.values.end()));
  auto jammers = draw_jammers(spec, base, trial, max_m);
  jammers.resize(m_sweep ? static_cast<int>(value) : spec.fixed_M);
  s.jammers = jammers;
  s.horizon = Horizon::from_duration(m_sweep ? spec.fixed_T : value, base.horizon.dt);
  validate(s);
  return s;
}

/// One optimization per (value, trial, mode). A failed run is recorded with
/// its error and left out of the means; the sweep carries on.
inline SweepResult run_sweep(const SweepSpec& spec, const Scenario& base, const std::vector<Mode>& modes) {
  spec.check();
  struct Task {
    double value;
    int trial;
    Mode mode;
  };
  std::vector<Task> tasks;
  for (double v : spec.values)
    for (int k = 0; k < spec.trials; ++k)
      for (Mode m : modes) tasks.push_back({v, k, m});

  SweepResult res;
  res.trials.resize(tasks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < tasks.size(); i = next++) {
      const Task& t = tasks[i];
      TrialResult& out = res.trials[i];
      out.value = t.value;
      out.trial = t.trial;
      out.mode = t.mode;
      try {
        const Scenario s = sweep_scenario(spec, base, t.value, t.trial);
        out.jammers = s.jammers;
        const RunReport r = optimize(s, line_init(s), AlgoOptions::from_scenario(s, t.mode));
        check_writable(r.trajectory, s);
        out.metrics = r.metrics;
        out.outer_iterations = static_cast<int>(r.outer.size());
        out.status = "ok";
      } catch (const std::exception& e) {
        out.status = e.what();
      }
    }
  };
  if (spec.jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int j = 0; j < spec.jobs; ++j) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  for (double v : spec.values)
    for (Mode m : modes) {
      SweepSummaryRow row;
      row.value = v;
      row.mode = m;
      for (const auto& t : res.trials) {
        if (t.value != v || t.mode != m) continue;
        if (t.status != "ok") {
          ++row.failed;
          continue;
        }
        ++row.ok;
        row.mean_ee += t.metrics.ee;
        row.mean_sum_throughput += t.metrics.sum_throughput;
        row.mean_energy += t.metrics.energy;
      }
      if (row.ok > 0) {
        row.mean_ee /= row.ok;
        row.mean_sum_throughput /= row.ok;
        row.mean_energy /= row.ok;
      }
      res.summary.push_back(row);
    }
  return res;
}

inline std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c == '\n' ? ' ' : c;
  }
  return out + '"';
}

inline void write_sweep_summary(std::ostream& os, const SweepSpec& spec, const SweepResult& r) {
  const char* var = spec.variable == SweepVariable::M ? "M" : "T";
  os << "variable,value,algorithm,trials_ok,trials_failed,mean_ee_kbits_per_J,mean_sum_throughput_kbits,mean_energy_J\n";
  os << std::setprecision(10);
  for (const auto& row : r.summary)
    os << var << ',' << row.value << ',' << mode_name(row.mode) << ',' << row.ok << ',' << row.failed << ','
       << row.mean_ee / 1e3 << ',' << row.mean_sum_throughput / 1e3 << ',' << row.mean_energy << '\n';
}

inline void write_sweep_trials(std::ostream& os, const SweepSpec& spec, const SweepResult& r) {
  const char* var = spec.variable == SweepVariable::M ? "M" : "T";
  os << "variable,value,trial,algorithm,status,ee_kbits_per_J,sum_throughput_kbits,energy_J,average_speed_mps,"
        "outer_iters,jammers\n";
  os << std::setprecision(10);
  for (const auto& t : r.trials) {
    std::ostringstream jam;
    jam << std::setprecision(10);
    for (std::size_t i = 0; i < t.jammers.size(); ++i)
      jam << (i ? ";" : "") << t.jammers[i].node.x << ' ' << t.jammers[i].node.y;
    os << var << ',' << t.value << ',' << t.trial << ',' << mode_name(t.mode) << ',' << csv_quote(t.status) << ','
       << t.metrics.ee / 1e3 << ',' << t.metrics.sum_throughput / 1e3 << ',' << t.metrics.energy << ','
       << t.metrics.average_speed << ',' << t.outer_iterations << ',' << jam.str() << '\n';
  }
}

// ---------------------------------------------------------------------------
// plot-data
// ---------------------------------------------------------------------------

enum class PlotKind { trajectory_xy, speed_profile, ee_bars, convergence };

inline PlotKind parse_plot_kind(const std::string& s) {
  if (s == "trajectory_xy") return PlotKind::trajectory_xy;
  if (s == "speed_profile") return PlotKind::speed_profile;
  if (s == "ee_bars") return PlotKind::ee_bars;
  if (s == "convergence") return PlotKind::convergence;
  throw ValidationError("unknown plot kind '" + s + "' (trajectory_xy, speed_profile, ee_bars, convergence)");
}

/// One file per kind covering all given runs. Marker rows in trajectory_xy
/// use series source, jammer, start and end.
inline void emit_plot_data(std::ostream& os, PlotKind kind, const std::vector<SavedRun>& runs) {
  if (runs.empty()) throw ValidationError("plot-data: no runs");
  os << std::setprecision(12);
  switch (kind) {
    case PlotKind::trajectory_xy: {
      const Scenario& s = runs.front().scenario;
      os << "series,n,x_m,y_m\n";
      os << "source,0," << s.source.x << ',' << s.source.y << '\n';
      for (std::size_t m = 0; m < s.jammers.size(); ++m)
        os << "jammer," << m + 1 << ',' << s.jammers[m].node.x << ',' << s.jammers[m].node.y << '\n';
      os << "start,0," << s.uav.start.x() << ',' << s.uav.start.y() << '\n';
      os << "end,0," << s.uav.end.x() << ',' << s.uav.end.y() << '\n';
      for (const auto& r : runs) {
        const Trajectory& t = r.report.trajectory;
        for (int n = 0; n < t.size(); ++n)
          os << mode_name(r.report.mode) << ',' << n + 1 << ',' << t.q[n].x() << ',' << t.q[n].y() << '\n';
      }
      break;
    }
    case PlotKind::speed_profile:
      os << "series,n,t_s,speed_mps\n";
      for (const auto& r : runs) {
        const Trajectory& t = r.report.trajectory;
        for (int n = 0; n < t.size(); ++n)
          os << mode_name(r.report.mode) << ',' << n + 1 << ',' << (n + 1) * r.scenario.horizon.dt << ','
             << t.v[n].norm() << '\n';
      }
      break;
    case PlotKind::ee_bars:
      os << kMetricsHeader << '\n';
      for (const auto& r : runs)
        write_metrics_row(os, r.report.mode, r.report.metrics, r.scenario, r.report.termination);
      break;
    case PlotKind::convergence:
      for (std::size_t i = 0; i < runs.size(); ++i) {
        std::ostringstream one;
        write_convergence_csv(one, runs[i].report);
        std::istringstream lines(one.str());
        std::string line;
        std::getline(lines, line);
        if (i == 0) os << "series," << line << '\n';
        while (std::getline(lines, line)) os << mode_name(runs[i].report.mode) << ',' << line << '\n';
      }
      break;
  }
}

}  // namespace uavee
