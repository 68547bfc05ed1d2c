#pragma once

#include <cmath>

#include "fedq/linkmodel.hpp"
#include "fedq/quant.hpp"
#include "fedq/rng.hpp"

namespace fedqtest {

/// The device most tests price out: one local pass over 512 samples
/// at 3.25 MCycles each, a 1 GHz CPU ceiling, 0.2 W radio, a 16.64 s
/// deadline, and a 37 M parameter upload at the middle error demand.
inline fedq::DeviceProfile reference_profile() {
  fedq::DeviceProfile dev;
  dev.iterations = 1.0;
  dev.data_size = 512.0;
  dev.cycles_per_sample = 3.25e6;
  dev.f_min = 1e7;
  dev.f_max = 1e9;
  dev.tau = 1e-26;
  dev.p_min = 1e-9;
  dev.p_max = 0.2;
  dev.norm_bound = 512.0;
  dev.error_tolerance = 0.0277778;
  dev.t_max = 16.64;
  dev.model_size = 37000000;
  return dev;
}

inline fedq::ChannelParams reference_channel() {
  fedq::ChannelParams ch;
  ch.bandwidth = 5e7;
  ch.noise_psd = fedq::noise_psd_from_dbm_per_mhz(-95.0);
  ch.gain = 1e-3;
  ch.distance = 45.0;
  ch.pathloss_exp = 3.76;
  return ch;
}

struct RandomCase {
  fedq::DeviceProfile dev;
  fedq::ChannelParams ch;
  uint64_t bits = 0;
  uint32_t levels = 0;
};

/// Draws a device/channel pair whose deadline leaves at least 20% slack
/// over the fastest possible round, so the split problem is feasible.
inline RandomCase random_case(fedq::Rng& rng) {
  RandomCase tc;
  tc.ch.bandwidth = rng.uniform(1e7, 1e8);
  tc.ch.noise_psd = fedq::noise_psd_from_dbm_per_mhz(-95.0);
  tc.ch.gain = std::pow(10.0, rng.uniform(-4.0, -2.0));
  tc.ch.distance = rng.uniform(20.0, 200.0);
  tc.ch.pathloss_exp = rng.uniform(2.0, 4.0);

  tc.dev.iterations = 1.0 + static_cast<double>(rng.uniform_int(3));
  tc.dev.data_size = rng.uniform(64.0, 1024.0);
  tc.dev.cycles_per_sample = rng.uniform(1e6, 6e6);
  tc.dev.f_min = 1e6;
  tc.dev.f_max = rng.uniform(5e8, 2e9);
  tc.dev.tau = std::pow(10.0, rng.uniform(-27.0, -25.0));
  tc.dev.p_min = 1e-12;
  tc.dev.p_max = rng.uniform(0.05, 0.5);
  tc.dev.norm_bound = rng.uniform(64.0, 2048.0);
  tc.dev.error_tolerance = std::pow(10.0, rng.uniform(-3.0, -0.5));
  tc.dev.model_size = static_cast<uint64_t>(rng.uniform(5e6, 6e7));

  const fedq::LevelChoice lc = fedq::level_for_demand(
      {tc.dev.norm_bound, tc.dev.error_tolerance});
  tc.levels = lc.levels;
  tc.bits = fedq::payload_bits(tc.dev.model_size, lc.bits);

  const double t_cmp_floor = tc.dev.workload() / tc.dev.f_max;
  const double t_com_floor = fedq::comm_time(
      static_cast<double>(tc.bits), fedq::uplink_rate(tc.ch, tc.dev.p_max));
  tc.dev.t_max = rng.uniform(1.2, 3.0) * (t_cmp_floor + t_com_floor);
  return tc;
}

}  // namespace fedqtest
