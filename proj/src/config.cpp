#include "fedq/config.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <initializer_list>

namespace fedq {
namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw ConfigError(where + ": " + what);
}

void expect_object(const json& j, const std::string& where) {
  if (!j.is_object()) fail(where, "expected an object");
}

void check_keys(const json& j, const std::string& where,
                std::initializer_list<const char*> allowed) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* key : allowed) {
      if (it.key() == key) {
        known = true;
        break;
      }
    }
    if (!known) fail(where, "unknown key '" + it.key() + "'");
  }
}

double read_num(const json& j, const std::string& where, const char* key, double fallback) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (!v.is_number()) fail(where + "." + key, "expected a number");
  return v.get<double>();
}

int read_int(const json& j, const std::string& where, const char* key, int fallback) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (!v.is_number_integer()) fail(where + "." + key, "expected an integer");
  return v.get<int>();
}

std::uint64_t read_u64(const json& j, const std::string& where, const char* key,
                       std::uint64_t fallback) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (!v.is_number_unsigned()) fail(where + "." + key, "expected a non-negative integer");
  return v.get<std::uint64_t>();
}

std::string read_str(const json& j, const std::string& where, const char* key,
                     const std::string& fallback) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (!v.is_string()) fail(where + "." + key, "expected a string");
  return v.get<std::string>();
}

constexpr const char* kDeviceKeys[] = {
    "iterations", "data_size", "cycles_per_sample", "f_min_hz",
    "f_max_hz",   "tau",       "p_min_w",           "p_max_w",
    "norm_bound", "error_tolerance", "t_max_s",     "model_size",
};

constexpr const char* kChannelKeys[] = {
    "bandwidth_hz", "noise_dbm_per_mhz", "noise_w_per_hz",
    "gain",         "distance_m",        "pathloss_exp",
};

// Returns true when the key belongs to the profile or channel and was
// applied. Noise keys convert units on the way in.
bool apply_field(DeviceProfile& dev, ChannelParams& ch, const std::string& key,
                 double value) {
  if (key == "iterations") dev.iterations = value;
  else if (key == "data_size") dev.data_size = value;
  else if (key == "cycles_per_sample") dev.cycles_per_sample = value;
  else if (key == "f_min_hz") dev.f_min = value;
  else if (key == "f_max_hz") dev.f_max = value;
  else if (key == "tau") dev.tau = value;
  else if (key == "p_min_w") dev.p_min = value;
  else if (key == "p_max_w") dev.p_max = value;
  else if (key == "norm_bound") dev.norm_bound = value;
  else if (key == "error_tolerance") dev.error_tolerance = value;
  else if (key == "t_max_s") dev.t_max = value;
  else if (key == "model_size") dev.model_size = static_cast<std::uint64_t>(value);
  else if (key == "bandwidth_hz") ch.bandwidth = value;
  else if (key == "noise_dbm_per_mhz") ch.noise_psd = noise_psd_from_dbm_per_mhz(value);
  else if (key == "noise_w_per_hz") ch.noise_psd = value;
  else if (key == "gain") ch.gain = value;
  else if (key == "distance_m") ch.distance = value;
  else if (key == "pathloss_exp") ch.pathloss_exp = value;
  else return false;
  return true;
}

void require_positive(double v, const std::string& where) {
  if (!std::isfinite(v) || !(v > 0.0)) fail(where, "must be positive and finite");
}

void require_non_negative(double v, const std::string& where) {
  if (!std::isfinite(v) || v < 0.0) fail(where, "must be non-negative and finite");
}

void validate_profile(const DeviceProfile& dev, const std::string& where) {
  require_positive(dev.iterations, where + ".iterations");
  require_positive(dev.data_size, where + ".data_size");
  require_positive(dev.cycles_per_sample, where + ".cycles_per_sample");
  require_positive(dev.f_min, where + ".f_min_hz");
  require_positive(dev.f_max, where + ".f_max_hz");
  if (dev.f_min > dev.f_max) fail(where, "f_min_hz exceeds f_max_hz");
  require_positive(dev.tau, where + ".tau");
  require_non_negative(dev.p_min, where + ".p_min_w");
  require_positive(dev.p_max, where + ".p_max_w");
  if (dev.p_min > dev.p_max) fail(where, "p_min_w exceeds p_max_w");
  require_positive(dev.norm_bound, where + ".norm_bound");
  require_positive(dev.error_tolerance, where + ".error_tolerance");
  require_positive(dev.t_max, where + ".t_max_s");
  if (dev.model_size < 1) fail(where + ".model_size", "must be positive");
}

void validate_channel(const ChannelParams& ch, const std::string& where) {
  require_positive(ch.bandwidth, where + ".bandwidth_hz");
  require_positive(ch.noise_psd, where + ".noise");
  require_positive(ch.gain, where + ".gain");
  require_positive(ch.distance, where + ".distance_m");
  require_non_negative(ch.pathloss_exp, where + ".pathloss_exp");
}

void read_device_section(const json& j, DeviceProfile& dev, ChannelParams& scratch) {
  expect_object(j, "device");
  check_keys(j, "device",
             {"iterations", "data_size", "cycles_per_sample", "f_min_hz", "f_max_hz", "tau",
              "p_min_w", "p_max_w", "norm_bound", "error_tolerance", "t_max_s",
              "model_size"});
  for (const char* key : kDeviceKeys) {
    if (!j.contains(key)) continue;
    if (std::string(key) == "model_size") {
      dev.model_size = read_u64(j, "device", key, dev.model_size);
    } else {
      apply_field(dev, scratch, key, read_num(j, "device", key, 0.0));
    }
  }
}

void read_channel_section(const json& j, ChannelParams& ch, DeviceProfile& scratch) {
  expect_object(j, "channel");
  check_keys(j, "channel",
             {"bandwidth_hz", "noise_dbm_per_mhz", "noise_w_per_hz", "gain", "distance_m",
              "pathloss_exp"});
  if (j.contains("noise_dbm_per_mhz") && j.contains("noise_w_per_hz")) {
    fail("channel", "give noise as either noise_dbm_per_mhz or noise_w_per_hz, not both");
  }
  for (const char* key : kChannelKeys) {
    if (!j.contains(key)) continue;
    apply_field(scratch, ch, key, read_num(j, "channel", key, 0.0));
  }
}

}  // namespace

RunConfig RunConfig::defaults() {
  RunConfig cfg;
  cfg.device.iterations = 1.0;
  cfg.device.data_size = 512.0;
  cfg.device.cycles_per_sample = 3.25e6;
  cfg.device.f_min = 1e7;
  cfg.device.f_max = 1e9;
  cfg.device.tau = 1e-26;
  cfg.device.p_min = 1e-9;
  cfg.device.p_max = 0.2;
  cfg.device.norm_bound = 512.0;
  cfg.device.error_tolerance = 0.0277778;
  cfg.device.t_max = 16.64;
  cfg.device.model_size = 37000000;
  cfg.channel.bandwidth = 5e7;
  cfg.channel.noise_psd = noise_psd_from_dbm_per_mhz(-95.0);
  cfg.channel.gain = 1e-3;
  cfg.channel.distance = 45.0;
  cfg.channel.pathloss_exp = 3.76;
  // A loose, a default, and a tight error demand across the fleet, so
  // the chosen widths span several bit depths.
  for (int k : {0, 1, 2}) cfg.overrides.push_back({k, {{"error_tolerance", 0.111111}}});
  for (int k : {7, 8, 9}) cfg.overrides.push_back({k, {{"error_tolerance", 0.00694444}}});
  return cfg;
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  RunConfig cfg = defaults();
  expect_object(j, "config");
  check_keys(j, "config",
             {"seed", "device", "channel", "device_overrides", "fleet", "schedule", "data",
              "model", "solver", "quantbench"});

  cfg.seed = read_u64(j, "config", "seed", cfg.seed);
  if (j.contains("device")) read_device_section(j.at("device"), cfg.device, cfg.channel);
  if (j.contains("channel")) read_channel_section(j.at("channel"), cfg.channel, cfg.device);

  if (j.contains("device_overrides")) {
    const json& list = j.at("device_overrides");
    if (!list.is_array()) fail("device_overrides", "expected an array");
    cfg.overrides.clear();
    for (std::size_t i = 0; i < list.size(); ++i) {
      const std::string where = "device_overrides[" + std::to_string(i) + "]";
      const json& entry = list[i];
      expect_object(entry, where);
      if (!entry.contains("index")) fail(where, "missing 'index'");
      DeviceOverride ov;
      ov.index = read_int(entry, where, "index", 0);
      for (auto it = entry.begin(); it != entry.end(); ++it) {
        if (it.key() == "index") continue;
        DeviceProfile dscr;
        ChannelParams cscr;
        if (!apply_field(dscr, cscr, it.key(), 0.0)) {
          fail(where, "unknown key '" + it.key() + "'");
        }
        if (!it.value().is_number()) fail(where + "." + it.key(), "expected a number");
        ov.values[it.key()] = it.value().get<double>();
      }
      cfg.overrides.push_back(std::move(ov));
    }
  }

  if (j.contains("fleet")) {
    const json& f = j.at("fleet");
    expect_object(f, "fleet");
    check_keys(f, "fleet",
               {"devices", "rounds", "local_iters", "quant_mode", "batch_size",
                "learning_rate", "eval_interval", "eval_samples", "partition",
                "participation"});
    cfg.devices = read_int(f, "fleet", "devices", cfg.devices);
    cfg.rounds = read_int(f, "fleet", "rounds", cfg.rounds);
    cfg.local_iters = read_int(f, "fleet", "local_iters", cfg.local_iters);
    cfg.quant_mode = read_str(f, "fleet", "quant_mode", cfg.quant_mode);
    cfg.batch_size = read_int(f, "fleet", "batch_size", cfg.batch_size);
    cfg.learning_rate = read_num(f, "fleet", "learning_rate", cfg.learning_rate);
    cfg.eval_interval = read_int(f, "fleet", "eval_interval", cfg.eval_interval);
    cfg.eval_samples = read_int(f, "fleet", "eval_samples", cfg.eval_samples);
    cfg.partition = read_str(f, "fleet", "partition", cfg.partition);
    cfg.participation = read_num(f, "fleet", "participation", cfg.participation);
  }

  if (j.contains("schedule")) {
    const json& s = j.at("schedule");
    expect_object(s, "schedule");
    check_keys(s, "schedule", {"steps", "beta_first", "beta_last"});
    cfg.steps = read_int(s, "schedule", "steps", cfg.steps);
    cfg.beta_first = read_num(s, "schedule", "beta_first", cfg.beta_first);
    cfg.beta_last = read_num(s, "schedule", "beta_last", cfg.beta_last);
  }

  if (j.contains("data")) {
    const json& d = j.at("data");
    expect_object(d, "data");
    check_keys(d, "data", {"modes", "radius", "stddev", "per_device"});
    cfg.data_modes = read_int(d, "data", "modes", cfg.data_modes);
    cfg.data_radius = read_num(d, "data", "radius", cfg.data_radius);
    cfg.data_stddev = read_num(d, "data", "stddev", cfg.data_stddev);
    cfg.data_per_device = read_int(d, "data", "per_device", cfg.data_per_device);
  }

  if (j.contains("model")) {
    const json& m = j.at("model");
    expect_object(m, "model");
    check_keys(m, "model", {"time_embed", "hidden1", "hidden2"});
    cfg.arch.time_embed = read_int(m, "model", "time_embed", cfg.arch.time_embed);
    cfg.arch.hidden1 = read_int(m, "model", "hidden1", cfg.arch.hidden1);
    cfg.arch.hidden2 = read_int(m, "model", "hidden2", cfg.arch.hidden2);
  }

  if (j.contains("solver")) {
    const json& s = j.at("solver");
    expect_object(s, "solver");
    check_keys(s, "solver", {"lambda"});
    cfg.lambda = read_num(s, "solver", "lambda", cfg.lambda);
  }

  if (j.contains("quantbench")) {
    const json& q = j.at("quantbench");
    expect_object(q, "quantbench");
    check_keys(q, "quantbench", {"trials", "dim"});
    cfg.qb_trials = read_int(q, "quantbench", "trials", cfg.qb_trials);
    cfg.qb_dim = read_int(q, "quantbench", "dim", cfg.qb_dim);
  }

  // Materialize and validate every device up front so a bad override
  // is reported at load time, not mid-run.
  if (cfg.devices < 1) fail("fleet.devices", "must be positive");
  if (!j.contains("device_overrides")) {
    // The inherited default demand mix targets the default fleet size;
    // entries for devices that do not exist are dropped rather than
    // reported against a key the file never mentioned.
    std::erase_if(cfg.overrides,
                  [&cfg](const DeviceOverride& ov) { return ov.index >= cfg.devices; });
  }
  for (const DeviceOverride& ov : cfg.overrides) {
    if (ov.index < 0 || ov.index >= cfg.devices) {
      fail("device_overrides", "index " + std::to_string(ov.index) + " outside [0, " +
                                   std::to_string(cfg.devices) + ")");
    }
  }
  for (int k = 0; k < cfg.devices; ++k) {
    const std::string where = "device " + std::to_string(k);
    validate_profile(cfg.profile_for(k), where);
    validate_channel(cfg.channel_for(k), where);
  }
  if (cfg.rounds < 0) fail("fleet.rounds", "must be non-negative");
  if (cfg.local_iters < 0) fail("fleet.local_iters", "must be non-negative");
  QuantPolicy::parse(cfg.quant_mode);
  if (cfg.batch_size < 1) fail("fleet.batch_size", "must be positive");
  require_positive(cfg.learning_rate, "fleet.learning_rate");
  if (cfg.eval_interval < 0) fail("fleet.eval_interval", "must be non-negative");
  if (cfg.eval_samples < 2) fail("fleet.eval_samples", "must be at least 2");
  partition_mode_from(cfg.partition);
  if (!(cfg.participation > 0.0) || cfg.participation > 1.0) {
    fail("fleet.participation", "must lie in (0, 1]");
  }
  if (cfg.steps < 1) fail("schedule.steps", "must be positive");
  if (!(cfg.beta_first > 0.0) || !(cfg.beta_first <= cfg.beta_last) ||
      !(cfg.beta_last < 1.0)) {
    fail("schedule", "need 0 < beta_first <= beta_last < 1");
  }
  if (cfg.data_modes < 1) fail("data.modes", "must be positive");
  require_non_negative(cfg.data_radius, "data.radius");
  require_non_negative(cfg.data_stddev, "data.stddev");
  if (cfg.data_per_device < 1) fail("data.per_device", "must be positive");
  if (cfg.arch.time_embed < 2 || cfg.arch.time_embed % 2 != 0) {
    fail("model.time_embed", "must be an even number of at least 2");
  }
  if (cfg.arch.hidden1 < 1 || cfg.arch.hidden2 < 1) {
    fail("model", "hidden widths must be positive");
  }
  if (!(cfg.lambda > 0.0) || !(cfg.lambda < 1.0)) fail("solver.lambda", "must lie in (0, 1)");
  if (cfg.qb_trials < 1) fail("quantbench.trials", "must be positive");
  if (cfg.qb_dim < 1) fail("quantbench.dim", "must be positive");
  return cfg;
}

RunConfig RunConfig::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config file " + path + " is not valid JSON: " + e.what());
  }
  return from_json(j);
}

nlohmann::json RunConfig::to_json() const {
  json ovs = json::array();
  for (const DeviceOverride& ov : overrides) {
    json entry{{"index", ov.index}};
    for (const auto& [key, value] : ov.values) entry[key] = value;
    ovs.push_back(std::move(entry));
  }
  return json{
      {"seed", seed},
      {"device",
       {{"iterations", device.iterations},
        {"data_size", device.data_size},
        {"cycles_per_sample", device.cycles_per_sample},
        {"f_min_hz", device.f_min},
        {"f_max_hz", device.f_max},
        {"tau", device.tau},
        {"p_min_w", device.p_min},
        {"p_max_w", device.p_max},
        {"norm_bound", device.norm_bound},
        {"error_tolerance", device.error_tolerance},
        {"t_max_s", device.t_max},
        {"model_size", device.model_size}}},
      {"channel",
       {{"bandwidth_hz", channel.bandwidth},
        {"noise_w_per_hz", channel.noise_psd},
        {"gain", channel.gain},
        {"distance_m", channel.distance},
        {"pathloss_exp", channel.pathloss_exp}}},
      {"device_overrides", std::move(ovs)},
      {"fleet",
       {{"devices", devices},
        {"rounds", rounds},
        {"local_iters", local_iters},
        {"quant_mode", quant_mode},
        {"batch_size", batch_size},
        {"learning_rate", learning_rate},
        {"eval_interval", eval_interval},
        {"eval_samples", eval_samples},
        {"partition", partition},
        {"participation", participation}}},
      {"schedule",
       {{"steps", steps}, {"beta_first", beta_first}, {"beta_last", beta_last}}},
      {"data",
       {{"modes", data_modes},
        {"radius", data_radius},
        {"stddev", data_stddev},
        {"per_device", data_per_device}}},
      {"model",
       {{"time_embed", arch.time_embed},
        {"hidden1", arch.hidden1},
        {"hidden2", arch.hidden2}}},
      {"solver", {{"lambda", lambda}}},
      {"quantbench", {{"trials", qb_trials}, {"dim", qb_dim}}},
  };
}

DeviceProfile RunConfig::profile_for(int k) const {
  DeviceProfile p = device;
  ChannelParams scratch = channel;
  for (const DeviceOverride& ov : overrides) {
    if (ov.index != k) continue;
    for (const auto& [key, value] : ov.values) apply_field(p, scratch, key, value);
  }
  return p;
}

ChannelParams RunConfig::channel_for(int k) const {
  DeviceProfile scratch = device;
  ChannelParams c = channel;
  for (const DeviceOverride& ov : overrides) {
    if (ov.index != k) continue;
    for (const auto& [key, value] : ov.values) apply_field(scratch, c, key, value);
  }
  return c;
}

FleetConfig RunConfig::fleet() const { return fleet(QuantPolicy::parse(quant_mode)); }

FleetConfig RunConfig::fleet(const QuantPolicy& policy) const {
  FleetConfig f;
  f.profiles.reserve(devices);
  f.channels.reserve(devices);
  for (int k = 0; k < devices; ++k) {
    f.profiles.push_back(profile_for(k));
    f.channels.push_back(channel_for(k));
  }
  f.rounds = rounds;
  f.local_iters = local_iters;
  f.batch_size = batch_size;
  f.learning_rate = learning_rate;
  f.policy = policy;
  f.partition = partition_mode_from(partition);
  f.participation = participation;
  f.eval_interval = eval_interval;
  f.eval_samples = eval_samples;
  f.seed = seed;
  f.schedule = linear_schedule(steps, beta_first, beta_last);
  f.arch = arch;
  f.data_modes = data_modes;
  f.data_radius = data_radius;
  f.data_stddev = data_stddev;
  f.data_per_device = data_per_device;
  f.solver_lambda = lambda;
  return f;
}

}  // namespace fedq
