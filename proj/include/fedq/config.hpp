#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "fedq/federation.hpp"

namespace fedq {

/// Per-device departure from the fleet-wide device or channel
/// defaults: field name to value, applied by index.
struct DeviceOverride {
  int index = 0;
  std::map<std::string, double> values;

  bool operator==(const DeviceOverride&) const = default;
};

/// Everything a run reads from its configuration file, with working
/// defaults for every field. Parsing is strict: unknown keys, wrong
/// types, or out-of-range values raise ConfigError naming the key.
struct RunConfig {
  std::uint64_t seed = 42;

  DeviceProfile device;    ///< Fleet-wide device defaults.
  ChannelParams channel;   ///< Fleet-wide channel defaults.
  std::vector<DeviceOverride> overrides;

  int devices = 10;
  int rounds = 60;
  int local_iters = 1;
  std::string quant_mode = "on_demand";
  int batch_size = 64;
  double learning_rate = 1e-3;
  int eval_interval = 10;
  int eval_samples = 2000;
  std::string partition = "iid_uniform";
  double participation = 1.0;

  int steps = 50;
  double beta_first = 0.02;
  double beta_last = 0.4;

  int data_modes = 8;
  double data_radius = 4.0;
  double data_stddev = 0.3;
  int data_per_device = 512;

  NoiseModelArch arch;

  double lambda = 1e-6;

  int qb_trials = 100000;
  int qb_dim = 512;

  static RunConfig defaults();
  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig load_file(const std::string& path);

  /// Full emission: every section and key appears with its effective
  /// value, so loading the output reproduces this config exactly.
  nlohmann::json to_json() const;

  /// Device k's profile and channel, defaults plus overrides.
  DeviceProfile profile_for(int k) const;
  ChannelParams channel_for(int k) const;

  FleetConfig fleet() const;
  FleetConfig fleet(const QuantPolicy& policy) const;
};

}  // namespace fedq
