#include <filesystem>
#include <fstream>
#include <string>

#include <doctest.h>
#include <json.hpp>

#include "fedq/config.hpp"
#include "fedq/errors.hpp"
#include "fedq/quant.hpp"

using namespace fedq;
using doctest::Approx;
using nlohmann::json;

namespace {

json parse(const char* text) { return json::parse(text); }

}  // namespace

TEST_SUITE("config") {

TEST_CASE("defaults pass their own validation and round-trip") {
  const RunConfig def = RunConfig::defaults();
  CHECK(def.devices == 10);
  CHECK(def.device.model_size == 37000000);
  CHECK(def.channel.distance == 45.0);
  CHECK(def.quant_mode == "on_demand");

  const RunConfig redone = RunConfig::from_json(def.to_json());
  CHECK(redone.to_json() == def.to_json());

  // An empty document is exactly the defaults.
  const RunConfig empty = RunConfig::from_json(parse("{}"));
  CHECK(empty.to_json() == def.to_json());
}

TEST_CASE("default fleet spans three bit widths") {
  const RunConfig def = RunConfig::defaults();
  const auto bits_for = [&](int k) {
    const DeviceProfile p = def.profile_for(k);
    return level_for_demand({p.norm_bound, p.error_tolerance}).bits;
  };
  CHECK(bits_for(0) == 6);
  CHECK(bits_for(1) == 6);
  CHECK(bits_for(2) == 6);
  CHECK(bits_for(3) == 7);
  CHECK(bits_for(6) == 7);
  CHECK(bits_for(7) == 8);
  CHECK(bits_for(9) == 8);
}

TEST_CASE("a modified config survives emit and reload unchanged") {
  RunConfig cfg = RunConfig::defaults();
  cfg.seed = 7;
  cfg.devices = 4;
  cfg.rounds = 3;
  cfg.quant_mode = "fixed8";
  cfg.partition = "mode_skew";
  cfg.participation = 0.75;
  cfg.arch = {8, 16, 16};
  cfg.steps = 12;
  cfg.beta_first = 0.05;
  cfg.beta_last = 0.3;
  cfg.lambda = 1e-5;
  cfg.overrides = {{1, {{"error_tolerance", 0.5}, {"distance_m", 90.0}}}};
  cfg.device.tau = 2e-26;
  cfg.channel.gain = 5e-4;
  cfg.qb_trials = 10;
  cfg.qb_dim = 16;

  const RunConfig redone = RunConfig::from_json(cfg.to_json());
  CHECK(redone.to_json() == cfg.to_json());
  CHECK(redone.overrides == cfg.overrides);
  CHECK(redone.arch == cfg.arch);
}

TEST_CASE("overrides patch a single device") {
  const RunConfig cfg = RunConfig::from_json(parse(R"({
    "fleet": {"devices": 3},
    "device_overrides": [
      {"index": 1, "error_tolerance": 0.5, "distance_m": 90.0}
    ]
  })"));

  CHECK(cfg.profile_for(0).error_tolerance == Approx(0.0277778));
  CHECK(cfg.profile_for(1).error_tolerance == 0.5);
  CHECK(cfg.profile_for(2).error_tolerance == Approx(0.0277778));
  CHECK(cfg.channel_for(0).distance == 45.0);
  CHECK(cfg.channel_for(1).distance == 90.0);

  const RunConfig none = RunConfig::from_json(parse(R"({"device_overrides": []})"));
  CHECK(none.overrides.empty());
}

TEST_CASE("sections apply their fields") {
  const RunConfig cfg = RunConfig::from_json(parse(R"({
    "seed": 99,
    "device": {"tau": 2e-26, "t_max_s": 20.0, "model_size": 1000},
    "channel": {"noise_w_per_hz": 1e-19, "bandwidth_hz": 1e7},
    "fleet": {"devices": 2, "rounds": 5, "quant_mode": "none",
               "batch_size": 8, "learning_rate": 0.01},
    "schedule": {"steps": 10, "beta_first": 0.1, "beta_last": 0.2},
    "data": {"modes": 4, "radius": 2.0, "stddev": 0.1, "per_device": 32},
    "model": {"time_embed": 4, "hidden1": 8, "hidden2": 8},
    "solver": {"lambda": 1e-7},
    "quantbench": {"trials": 100, "dim": 32}
  })"));

  CHECK(cfg.seed == 99);
  CHECK(cfg.device.tau == 2e-26);
  CHECK(cfg.device.t_max == 20.0);
  CHECK(cfg.device.model_size == 1000);
  CHECK(cfg.channel.noise_psd == 1e-19);
  CHECK(cfg.channel.bandwidth == 1e7);
  CHECK(cfg.devices == 2);
  CHECK(cfg.rounds == 5);
  CHECK(cfg.quant_mode == "none");
  CHECK(cfg.batch_size == 8);
  CHECK(cfg.learning_rate == 0.01);
  CHECK(cfg.steps == 10);
  CHECK(cfg.data_modes == 4);
  CHECK(cfg.data_per_device == 32);
  CHECK(cfg.arch.time_embed == 4);
  CHECK(cfg.lambda == 1e-7);
  CHECK(cfg.qb_trials == 100);
  CHECK(cfg.qb_dim == 32);

  // dBm input converts on the way in; emission is always W/Hz.
  const RunConfig dbm =
      RunConfig::from_json(parse(R"({"channel": {"noise_dbm_per_mhz": -95.0}})"));
  CHECK(dbm.channel.noise_psd == Approx(3.162277660168379e-19).epsilon(1e-12).scale(0.0));
  CHECK(dbm.to_json().at("channel").contains("noise_w_per_hz"));
  CHECK_FALSE(dbm.to_json().at("channel").contains("noise_dbm_per_mhz"));
}

TEST_CASE("shrinking the fleet drops inherited out-of-range overrides") {
  // The default demand mix references devices up to index 9; a file
  // that only shrinks the fleet keeps the entries that still exist.
  const RunConfig cfg = RunConfig::from_json(parse(R"({"fleet": {"devices": 2}})"));
  REQUIRE(cfg.overrides.size() == 2);
  CHECK(cfg.overrides[0].index == 0);
  CHECK(cfg.overrides[1].index == 1);
  CHECK(RunConfig::from_json(cfg.to_json()).overrides == cfg.overrides);

  // Overrides spelled out in the file are never silently dropped.
  CHECK_THROWS_AS(
      RunConfig::from_json(parse(
          R"({"fleet": {"devices": 2}, "device_overrides": [{"index": 2, "t_max_s": 3.0}]})")),
      ConfigError);
}

TEST_CASE("unknown keys are rejected with their location") {
  const char* bad[] = {
      R"({"bogus": 1})",
      R"({"device": {"f_max": 1e9}})",
      R"({"channel": {"snr": 3.0}})",
      R"({"fleet": {"device_count": 4}})",
      R"({"schedule": {"gamma": 0.1}})",
      R"({"data": {"spread": 1.0}})",
      R"({"model": {"depth": 3}})",
      R"({"solver": {"tol": 1e-9}})",
      R"({"quantbench": {"reps": 3}})",
      R"({"device_overrides": [{"index": 0, "foo": 1}]})",
  };
  for (const char* text : bad) {
    CHECK_THROWS_AS(RunConfig::from_json(parse(text)), ConfigError);
  }

  try {
    RunConfig::from_json(parse(R"({"device": {"f_max": 1e9}})"));
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("f_max") != std::string::npos);
  }
}

TEST_CASE("type and structure violations are rejected") {
  const char* bad[] = {
      R"([1, 2, 3])",
      R"({"seed": -1})",
      R"({"seed": "x"})",
      R"({"device": 5})",
      R"({"device": {"tau": "big"}})",
      R"({"device": {"model_size": 100.5}})",
      R"({"channel": {"noise_dbm_per_mhz": -95.0, "noise_w_per_hz": 1e-19}})",
      R"({"fleet": {"devices": 2.5}})",
      R"({"device_overrides": {}})",
      R"({"device_overrides": [{"error_tolerance": 0.5}]})",
      R"({"device_overrides": [{"index": 0, "error_tolerance": "low"}]})",
  };
  for (const char* text : bad) {
    CHECK_THROWS_AS(RunConfig::from_json(parse(text)), ConfigError);
  }
}

TEST_CASE("range violations are rejected") {
  const char* bad[] = {
      R"({"fleet": {"devices": 0}})",
      R"({"fleet": {"rounds": -1}})",
      R"({"fleet": {"batch_size": 0}})",
      R"({"fleet": {"learning_rate": 0.0}})",
      R"({"fleet": {"eval_samples": 1}})",
      R"({"fleet": {"participation": 0.0}})",
      R"({"fleet": {"participation": 1.1}})",
      R"({"fleet": {"quant_mode": "turbo"}})",
      R"({"fleet": {"partition": "alphabetical"}})",
      R"({"schedule": {"steps": 0}})",
      R"({"schedule": {"beta_first": 0.5, "beta_last": 0.4}})",
      R"({"schedule": {"beta_last": 1.0}})",
      R"({"data": {"modes": 0}})",
      R"({"data": {"per_device": 0}})",
      R"({"model": {"time_embed": 3}})",
      R"({"model": {"hidden1": 0}})",
      R"({"solver": {"lambda": 0.0}})",
      R"({"solver": {"lambda": 1.0}})",
      R"({"quantbench": {"trials": 0}})",
      R"({"device": {"tau": 0.0}})",
      R"({"device": {"f_min_hz": 2e9}})",
      R"({"device": {"p_min_w": 0.5}})",
      R"({"device_overrides": [{"index": 10, "tau": 1e-26}]})",
      R"({"device_overrides": [{"index": -1, "tau": 1e-26}]})",
      R"({"device_overrides": [{"index": 0, "t_max_s": 0.0}]})",
  };
  for (const char* text : bad) {
    CHECK_THROWS_AS(RunConfig::from_json(parse(text)), ConfigError);
  }
}

TEST_CASE("load_file reads, rejects, and reports") {
  namespace fs = std::filesystem;
  const fs::path path = fs::temp_directory_path() / "fedq_config_suite.json";

  {
    std::ofstream out(path);
    out << RunConfig::defaults().to_json().dump(2);
  }
  const RunConfig loaded = RunConfig::load_file(path.string());
  CHECK(loaded.to_json() == RunConfig::defaults().to_json());

  {
    std::ofstream out(path);
    out << "{nope";
  }
  CHECK_THROWS_AS(RunConfig::load_file(path.string()), ConfigError);
  fs::remove(path);

  CHECK_THROWS_AS(RunConfig::load_file((path / "missing.json").string()), ConfigError);
}

TEST_CASE("fleet() materializes devices, schedule, and policy") {
  RunConfig cfg = RunConfig::defaults();
  cfg.devices = 4;
  cfg.steps = 12;
  cfg.quant_mode = "fixed8";
  cfg.partition = "mode_skew";
  cfg.overrides = {{2, {{"distance_m", 90.0}}}};

  const FleetConfig fleet = cfg.fleet();
  REQUIRE(fleet.profiles.size() == 4);
  REQUIRE(fleet.channels.size() == 4);
  CHECK(fleet.channels[2].distance == 90.0);
  CHECK(fleet.channels[1].distance == 45.0);
  CHECK(fleet.schedule.steps() == 12);
  CHECK(fleet.policy == QuantPolicy{QuantMode::Fixed, 8});
  CHECK(fleet.partition == PartitionMode::ModeSkew);
  CHECK(fleet.arch == cfg.arch);
  CHECK(fleet.solver_lambda == cfg.lambda);

  const FleetConfig swapped = cfg.fleet(QuantPolicy::parse("none"));
  CHECK(swapped.policy == QuantPolicy{QuantMode::None, 0});
}

}  // TEST_SUITE
