// Command-line front end: single cases, random-jammer sweeps, plot data.

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "uavee/experiment.hpp"

namespace fs = std::filesystem;
using namespace uavee;

namespace {

struct Common {
  std::string mode = "all";
  std::string out = "out";
  std::uint64_t seed = 1;
  bool paper_eq23 = false;
  double mass = 0.0;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--mode", c.mode, "max-ee, max-throughput, max-ee-nojam or all")
      ->check(CLI::IsMember({"max-ee", "max-throughput", "max-ee-nojam", "all"}))
      ->capture_default_str();
  app->add_option("--out", c.out, "output directory (file for plot-data)")->capture_default_str();
  app->add_option("--seed", c.seed, "seed for every random draw")->capture_default_str();
  app->add_flag("--paper-eq23", c.paper_eq23, "jammer distance bound without the altitude term");
  app->add_option("--mass", c.mass, "UAV mass in kg; adds the kinetic-energy term")->check(CLI::NonNegativeNumber);
}

Overrides overrides(const Common& c, CLI::App* app, std::optional<double> T) {
  Overrides o;
  o.T = T;
  if (app->count("--mass")) o.mass = c.mass;
  o.paper_eq23 = c.paper_eq23;
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Energy-efficient UAV relay trajectories under jamming"};
  app.require_subcommand(1);

  Common rc;
  std::string scenario = "1";
  std::optional<double> T;
  auto* run_case_cmd = app.add_subcommand("run-case", "optimize one case or scenario file");
  run_case_cmd->add_option("--scenario", scenario, "case 1-4 (or case1..case4) or a scenario JSON file")
      ->capture_default_str();
  run_case_cmd->add_option("-T,--duration", T, "flight time override in s");
  add_common(run_case_cmd, rc);

  Common sc;
  std::string variable = "M";
  std::string base = "1";
  std::vector<double> values;
  int trials = 10, jobs = 1;
  bool full = false;
  double exclusion = 50.0;
  std::optional<double> fixed_T;
  std::optional<int> fixed_M;
  auto* sweep_cmd = app.add_subcommand("run-sweep", "random jammer placements over M or T");
  sweep_cmd->add_option("--variable", variable, "M or T")->check(CLI::IsMember({"M", "T"}))->capture_default_str();
  sweep_cmd->add_option("--values", values, "values to sweep (default M 1..4, or T 60 100)");
  sweep_cmd->add_option("--trials", trials, "random placements per value")->capture_default_str();
  sweep_cmd->add_option("--scenario", base, "base case or file; jammers are replaced")->capture_default_str();
  sweep_cmd->add_flag("--full", full, "full-length horizons (T = 200 s for M, up to 300 s for T)");
  sweep_cmd->add_option("--fixed-T", fixed_T, "horizon of an M sweep");
  sweep_cmd->add_option("--fixed-M", fixed_M, "jammer count of a T sweep");
  sweep_cmd->add_option("--min-source-distance", exclusion, "redraw jammers closer than this to the source (m)")
      ->capture_default_str();
  sweep_cmd->add_option("--jobs", jobs, "parallel runs")->check(CLI::PositiveNumber)->capture_default_str();
  add_common(sweep_cmd, sc);

  std::vector<std::string> run_files;
  std::string run_dir, kind = "trajectory_xy", plot_out = "-";
  auto* plot_cmd = app.add_subcommand("plot-data", "columnar data for a figure from saved runs");
  plot_cmd->add_option("--kind", kind, "trajectory_xy, speed_profile, ee_bars or convergence")
      ->check(CLI::IsMember({"trajectory_xy", "speed_profile", "ee_bars", "convergence"}))
      ->capture_default_str();
  plot_cmd->add_option("--run-dir", run_dir, "run-case output directory (reads every run_*.json)");
  plot_cmd->add_option("--run", run_files, "individual run_*.json files");
  plot_cmd->add_option("--out", plot_out, "output file, - for stdout")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_case_cmd) {
      Scenario s = resolve_scenario(scenario);
      apply(overrides(rc, run_case_cmd, T), s);
      run_case(s, parse_modes(rc.mode), rc.out, std::cout);
      std::cout << "wrote " << rc.out << '\n';
    } else if (*sweep_cmd) {
      Scenario s = resolve_scenario(base);
      apply(overrides(sc, sweep_cmd, std::nullopt), s);
      SweepSpec spec = SweepSpec::defaults(variable == "M" ? SweepVariable::M : SweepVariable::T, full);
      if (!values.empty()) spec.values = values;
      if (fixed_T) spec.fixed_T = *fixed_T;
      if (fixed_M) spec.fixed_M = *fixed_M;
      spec.trials = trials;
      spec.seed = sc.seed;
      spec.min_source_distance = exclusion;
      spec.jobs = jobs;
      const SweepResult r = run_sweep(spec, s, parse_modes(sc.mode));
      fs::create_directories(sc.out);
      std::ofstream summary(fs::path(sc.out) / "sweep_summary.csv"), detail(fs::path(sc.out) / "sweep_trials.csv");
      if (!summary || !detail) throw std::runtime_error("cannot write into '" + sc.out + "'");
      write_sweep_summary(summary, spec, r);
      write_sweep_trials(detail, spec, r);
      write_sweep_summary(std::cout, spec, r);
      int failed = 0;
      for (const auto& t : r.trials) failed += t.status != "ok";
      if (failed) std::cerr << failed << " of " << r.trials.size() << " runs failed; see sweep_trials.csv\n";
    } else if (*plot_cmd) {
      if (!run_dir.empty())
        for (const auto& e : fs::directory_iterator(run_dir)) {
          const std::string name = e.path().filename().string();
          if (name.rfind("run_", 0) == 0 && e.path().extension() == ".json") run_files.push_back(e.path().string());
        }
      std::sort(run_files.begin(), run_files.end());
      if (run_files.empty()) throw ValidationError("plot-data: give --run-dir or --run");
      std::vector<SavedRun> runs;
      for (const auto& f : run_files) runs.push_back(load_run(f));
      if (plot_out == "-") {
        emit_plot_data(std::cout, parse_plot_kind(kind), runs);
      } else {
        std::ofstream os(plot_out);
        if (!os) throw std::runtime_error("cannot write '" + plot_out + "'");
        emit_plot_data(os, parse_plot_kind(kind), runs);
      }
    }
  } catch (const ValidationError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
