#include "fedq/linkmodel.hpp"

#include <cmath>
#include <string>

namespace fedq {
namespace {

constexpr double kBoundSnap = 1e-9;

// Snap x onto an end of [lo, hi] when it lands within kBoundSnap
// relative of it, from either side; report values further below lo or
// above hi. Two-sided snapping keeps a share computed to sit exactly
// on a device limit reporting that limit despite rounding.
double snap_to_range(double x, double lo, double hi, const char* what) {
  if (std::fabs(x - lo) <= kBoundSnap * std::fabs(lo)) return lo;
  if (std::fabs(x - hi) <= kBoundSnap * std::fabs(hi)) return hi;
  if (x < lo) {
    throw InfeasibleSplit(std::string(what) + " " + std::to_string(x) +
                          " below the device minimum " + std::to_string(lo));
  }
  if (x > hi) {
    throw InfeasibleSplit(std::string(what) + " " + std::to_string(x) +
                          " above the device maximum " + std::to_string(hi));
  }
  return x;
}

void check_frequency(const DeviceProfile& dev, double f) {
  if (!(f >= dev.f_min) || !(f <= dev.f_max)) {
    throw FrequencyOutOfRange("frequency " + std::to_string(f) + " outside [" +
                              std::to_string(dev.f_min) + ", " + std::to_string(dev.f_max) +
                              "] Hz");
  }
}

}  // namespace

double ChannelParams::path_gain() const { return gain * std::pow(distance, -pathloss_exp); }

double noise_psd_from_dbm_per_mhz(double dbm_per_mhz) {
  return std::pow(10.0, (dbm_per_mhz - 30.0) / 10.0) * 1e-6;
}

double comp_time(const DeviceProfile& dev, double f) {
  check_frequency(dev, f);
  return dev.workload() / f;
}

double comp_energy(const DeviceProfile& dev, double f) {
  check_frequency(dev, f);
  return dev.tau * f * f * dev.workload();
}

double uplink_rate(const ChannelParams& ch, double p) {
  if (p < 0.0) throw Error("transmit power must be non-negative");
  if (p == 0.0) return 0.0;
  const double snr = ch.path_gain() * p / (ch.bandwidth * ch.noise_psd);
  return ch.bandwidth * std::log2(1.0 + snr);
}

double power_for_rate(const ChannelParams& ch, double r) {
  if (r <= 0.0) throw ZeroRate("rate must be positive to invert");
  return (std::exp2(r / ch.bandwidth) - 1.0) * ch.bandwidth * ch.noise_psd / ch.path_gain();
}

double comm_time(double bits, double r) {
  if (r <= 0.0) throw ZeroRate("rate must be positive, got " + std::to_string(r));
  if (bits < 0.0) throw Error("bit count must be non-negative");
  return bits / r;
}

double comm_energy(double p, double t) {
  if (p < 0.0 || t < 0.0) throw Error("power and time must be non-negative");
  return p * t;
}

EnergySplit total_energy_split(const DeviceProfile& dev, const ChannelParams& ch, double bits,
                               double theta, double pi) {
  if (!(theta > 0.0) || theta > 1.0) {
    throw InfeasibleSplit("compute share " + std::to_string(theta) + " outside (0, 1]");
  }
  const bool has_payload = bits > 0.0;
  if (pi < 0.0 || pi > 1.0 || (has_payload && pi == 0.0)) {
    throw InfeasibleSplit("communication share " + std::to_string(pi) + " outside " +
                          (has_payload ? "(0, 1]" : "[0, 1]"));
  }

  EnergySplit split;
  split.t_cmp = theta * dev.t_max;
  split.f = snap_to_range(dev.workload() / split.t_cmp, dev.f_min, dev.f_max, "frequency");
  split.e_cmp = comp_energy(dev, split.f);

  if (has_payload) {
    split.t_com = pi * dev.t_max;
    const double rate = bits / split.t_com;
    split.p = snap_to_range(power_for_rate(ch, rate), dev.p_min, dev.p_max, "power");
    split.e_com = comm_energy(split.p, split.t_com);
  }
  return split;
}

double comm_energy_full_deadline(const DeviceProfile& dev, const ChannelParams& ch, double bits,
                                 double pi) {
  if (bits <= 0.0) return 0.0;
  if (!(pi > 0.0) || pi > 1.0) {
    throw InfeasibleSplit("communication share " + std::to_string(pi) + " outside (0, 1]");
  }
  const double rate = bits / (pi * dev.t_max);
  const double p = snap_to_range(power_for_rate(ch, rate), dev.p_min, dev.p_max, "power");
  return comm_energy(p, dev.t_max);
}

}  // namespace fedq
