#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "uavee/scenario.hpp"

using namespace uavee;
using Catch::Approx;

namespace {

std::string preset(int k) { return std::string(UAVEE_SOURCE_DIR) + "/scenarios/case" + std::to_string(k) + ".json"; }

std::string write_temp(const std::string& name, const std::string& text) {
  const auto path = std::filesystem::temp_directory_path() / name;
  std::ofstream(path) << text;
  return path.string();
}

void require_same(const Scenario& a, const Scenario& b) {
  CHECK(a.source.x == b.source.x);
  CHECK(a.source.y == b.source.y);
  REQUIRE(a.jammers.size() == b.jammers.size());
  for (std::size_t m = 0; m < a.jammers.size(); ++m) {
    CHECK(a.jammers[m].node.x == b.jammers[m].node.x);
    CHECK(a.jammers[m].node.y == b.jammers[m].node.y);
    CHECK(a.jammers[m].power_w == b.jammers[m].power_w);
  }
  CHECK(a.channel.bandwidth_hz == b.channel.bandwidth_hz);
  CHECK(a.channel.beta0 == b.channel.beta0);
  CHECK(a.channel.noise_power_w == b.channel.noise_power_w);
  CHECK(a.channel.source_power_w == b.channel.source_power_w);
  CHECK(a.energy.c1 == b.energy.c1);
  CHECK(a.energy.c2 == b.energy.c2);
  CHECK(a.energy.gravity == b.energy.gravity);
  CHECK(a.energy.mass == b.energy.mass);
  CHECK(a.uav.altitude == b.uav.altitude);
  CHECK(a.uav.v_max == b.uav.v_max);
  CHECK(a.uav.v_min == b.uav.v_min);
  CHECK(a.uav.a_max == b.uav.a_max);
  CHECK(a.uav.start == b.uav.start);
  CHECK(a.uav.end == b.uav.end);
  CHECK(a.horizon.T == b.horizon.T);
  CHECK(a.horizon.N == b.horizon.N);
  CHECK(a.horizon.dt == b.horizon.dt);
  CHECK(a.solver.outer_threshold == b.solver.outer_threshold);
  CHECK(a.solver.inner_threshold == b.solver.inner_threshold);
  CHECK(a.solver.max_outer == b.solver.max_outer);
  CHECK(a.solver.max_newton == b.solver.max_newton);
  CHECK(a.solver.altitude_in_distance_bound == b.solver.altitude_in_distance_bound);
  CHECK(a.solver.detour == b.solver.detour);
}

}  // namespace

TEST_CASE("defaults carry the reference parameter set", "[scenario]") {
  const Scenario s = default_scenario();
  CHECK(s.horizon.dt == 0.5);
  CHECK(s.channel.bandwidth_hz == 1e5);
  CHECK(s.channel.noise_power_w == Approx(1.2589e-15).epsilon(1e-4));
  CHECK(s.channel.beta0 == Approx(1e-6).epsilon(1e-12));
  CHECK(s.channel.source_power_w == 0.1);
  REQUIRE(s.jammers.size() == 1);
  CHECK(s.jammers[0].power_w == 0.1);
  CHECK(s.energy.c1 == 9.26e-4);
  CHECK(s.energy.c2 == 2250.0);
  CHECK(s.energy.gravity == 9.8);
  CHECK(s.energy.mass == 0.0);
  CHECK(s.uav.altitude == 100.0);
  CHECK(s.uav.v_max == 100.0);
  CHECK(s.uav.v_min == 3.0);
  CHECK(s.uav.a_max == 5.0);
  CHECK(s.solver.outer_threshold == 1e-3);
  CHECK(s.solver.inner_threshold == 10.0);
  CHECK_NOTHROW(validate(s));
}

TEST_CASE("unit conversions at the file boundary", "[scenario]") {
  CHECK(dbm_to_watts(-119.0) == Approx(1.2589254e-15).epsilon(1e-7));
  CHECK(dbm_to_watts(20.0) == Approx(0.1));
  CHECK(db_to_linear(-60.0) == Approx(1e-6));
  const auto doc = nlohmann::json::parse(R"({"channel": {"noise_power": {"dbm": -119}, "beta0": {"db": -60},
                                                       "source_power": {"dbm": 20}}})");
  const Scenario s = scenario_from_json(doc);
  CHECK(s.channel.noise_power_w == Approx(1.2589254e-15).epsilon(1e-7));
  CHECK(s.channel.beta0 == Approx(1e-6));
  CHECK(s.channel.source_power_w == Approx(0.1));
}

TEST_CASE("horizon-only file fills the remaining fields with defaults", "[scenario]") {
  const auto path = write_temp("uavee_horizon_only.json", R"({"horizon": {"T": 150, "dt": 0.5}})");
  const Scenario s = load_scenario(path);
  CHECK(s.horizon.N == 300);
  CHECK(s.horizon.T == 150.0);
  require_same(s, default_scenario());
  std::filesystem::remove(path);
}

TEST_CASE("inconsistent horizon is rejected", "[scenario]") {
  const auto path = write_temp("uavee_bad_horizon.json", R"({"horizon": {"T": 100, "dt": 0.5, "N": 150}})");
  CHECK_THROWS_AS(load_scenario(path), ValidationError);
  try {
    load_scenario(path);
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("T must equal N*dt") != std::string::npos);
  }
  std::filesystem::remove(path);
  CHECK_THROWS_AS(Horizon::from_duration(100.0, 0.3), ValidationError);
}

TEST_CASE("malformed and invalid documents", "[scenario]") {
  const auto broken = write_temp("uavee_broken.json", "{\"horizon\": ");
  CHECK_THROWS_AS(load_scenario(broken), ParseError);
  std::filesystem::remove(broken);
  CHECK_THROWS_AS(load_scenario("/nonexistent/uavee.json"), ParseError);
  using nlohmann::json;
  CHECK_THROWS_AS(scenario_from_json(json::parse(R"({"uav": {"speed": 3}})")), ParseError);
  CHECK_THROWS_AS(scenario_from_json(json::parse(R"({"uav": {"v_min": 0}})")), ValidationError);
  CHECK_THROWS_AS(scenario_from_json(json::parse(R"({"uav": {"v_min": 120}})")), ValidationError);
  CHECK_THROWS_AS(scenario_from_json(json::parse(R"({"uav": {"altitude": -1}})")), ValidationError);
  CHECK_THROWS_AS(scenario_from_json(json::parse(R"({"jammers": [{"x": 0, "y": 0, "power": 0}]})")),
                  ValidationError);
  CHECK_THROWS_AS(scenario_from_json(json::parse(R"({"energy": {"mass": -2}})")), ValidationError);
  // 20 km in 150 s needs 133 m/s.
  CHECK_THROWS_AS(scenario_from_json(json::parse(R"({"uav": {"start": [0, 0], "end": [20000, 0]}})")),
                  ValidationError);
}

TEST_CASE("no jammers is a legal scenario", "[scenario]") {
  const Scenario s = scenario_from_json(nlohmann::json::parse(R"({"jammers": []})"));
  CHECK(s.num_jammers() == 0);
  CHECK(without_jammers(case_scenario(4)).num_jammers() == 0);
}

TEST_CASE("preset files match the built-in cases", "[scenario]") {
  const Scenario c1 = load_scenario(preset(1));
  CHECK(c1.source.x == 0.0);
  CHECK(c1.source.y == 1000.0);
  REQUIRE(c1.jammers.size() == 1);
  CHECK(c1.jammers[0].node.x == 0.0);
  CHECK(c1.jammers[0].node.y == 0.0);
  CHECK(c1.uav.start == Vec2(-500.0, 0.0));
  CHECK(c1.uav.end == Vec2(500.0, 0.0));
  CHECK(c1.uav.altitude == 100.0);
  CHECK(c1.horizon.N == 300);
  for (int k = 1; k <= 4; ++k) {
    INFO("case " << k);
    const Scenario file = load_scenario(preset(k));
    const Scenario built = case_scenario(k);
    CHECK(file.channel.noise_power_w == Approx(built.channel.noise_power_w).epsilon(1e-12));
    CHECK(file.channel.beta0 == Approx(built.channel.beta0).epsilon(1e-12));
    REQUIRE(file.jammers.size() == built.jammers.size());
    for (std::size_t m = 0; m < file.jammers.size(); ++m) {
      CHECK(file.jammers[m].node.x == built.jammers[m].node.x);
      CHECK(file.jammers[m].node.y == built.jammers[m].node.y);
    }
    CHECK(file.horizon.T == built.horizon.T);
    CHECK(file.horizon.N == built.horizon.N);
  }
  CHECK(case_scenario(2).horizon.T == 200.0);
  CHECK(case_scenario(4).jammers[2].node.y == 800.0);
  CHECK_THROWS_AS(case_scenario(9), ValidationError);
}

TEST_CASE("save then load reproduces every field", "[scenario]") {
  Scenario s = case_scenario(4, 60.0);
  s.energy.mass = 2.5;
  s.channel.noise_power_w = dbm_to_watts(-117.3);
  s.jammers[1].power_w = 0.037;
  s.uav.start = {-123.456789012345, 7.0 / 3.0};
  s.solver.detour = DetourSide::negative_y;
  s.solver.altitude_in_distance_bound = false;
  s.solver.max_newton = 321;
  const auto path = (std::filesystem::temp_directory_path() / "uavee_roundtrip.json").string();
  save_scenario(s, path);
  const Scenario back = load_scenario(path);
  require_same(s, back);
  // Text form is stable too.
  CHECK(scenario_to_json(back).dump() == scenario_to_json(s).dump());
  std::filesystem::remove(path);
}
