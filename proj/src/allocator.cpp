#include "fedq/allocator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fedq/csv.hpp"

namespace fedq {
namespace {

constexpr double kLn2 = 0.69314718055994530941723212145818;

// exp2(x) * (1 - x ln 2) - 1, the shape of the communication energy
// derivative. Negative for every x > 0, approaching -x^2 ln^2(2) / 2
// near zero; written via expm1 to survive the cancellation there.
double psi(double x) {
  const double y = x * kLn2;
  if (y > 350.0) return -std::exp(y) * (y - 1.0) - 1.0;
  const double em = std::expm1(y);
  return em - y * (1.0 + em);
}

// Round energy along the deadline split, reduced to three constants:
//   E(theta, pi) = kc / theta^2 + a * pi * (exp2(c / pi) - 1).
struct Objective {
  double kc = 0.0;
  double a = 0.0;
  double c = 0.0;

  double e_cmp(double theta) const { return kc / (theta * theta); }
  double e_com(double pi) const {
    if (c == 0.0) return 0.0;
    return a * pi * std::expm1(c / pi * kLn2);
  }
  double total(double theta, double pi) const { return e_cmp(theta) + e_com(pi); }
  double d_cmp(double theta) const { return -2.0 * kc / (theta * theta * theta); }
  double d_com(double pi) const { return c == 0.0 ? 0.0 : a * psi(c / pi); }
};

Objective make_objective(const DeviceProfile& dev, const ChannelParams& ch, double bits) {
  const double w = dev.workload();
  Objective obj;
  obj.kc = dev.tau * w * w * w / (dev.t_max * dev.t_max);
  obj.a = ch.noise_psd * ch.bandwidth * dev.t_max / ch.path_gain();
  obj.c = bits / (ch.bandwidth * dev.t_max);
  return obj;
}

void check_tolerance(double lambda) {
  if (!(lambda > 0.0) || !(lambda < 1.0)) {
    throw Error("search tolerance must lie in (0, 1)");
  }
}

}  // namespace

std::string nu_trace_csv(const NuTrace& trace) {
  CsvWriter csv({"iteration", "nu_lo", "nu_hi", "theta", "pi", "E_total"});
  for (const NuTraceRow& row : trace) {
    csv.row({CsvWriter::num(row.iteration), CsvWriter::num(row.nu_lo),
             CsvWriter::num(row.nu_hi), CsvWriter::num(row.theta), CsvWriter::num(row.pi),
             CsvWriter::num(row.e_total)});
  }
  return csv.str();
}

SplitBounds split_bounds_for_bits(const DeviceProfile& dev, const ChannelParams& ch,
                                  double bits) {
  if (bits < 0.0) throw Error("bit count must be non-negative");
  SplitBounds b;
  b.theta_min = dev.workload() / (dev.f_max * dev.t_max);
  b.pi_min = bits > 0.0 ? bits / (dev.t_max * uplink_rate(ch, dev.p_max)) : 0.0;
  return b;
}

SplitBounds split_bounds(const DeviceProfile& dev, const ChannelParams& ch) {
  const LevelChoice lc = level_for_demand({dev.norm_bound, dev.error_tolerance});
  return split_bounds_for_bits(
      dev, ch, static_cast<double>(payload_bits(dev.model_size, lc.bits)));
}

double optimal_theta(const DeviceProfile& dev, double nu) {
  if (!(nu > 0.0)) throw InvalidMultiplier("dual price must be positive");
  const double w = dev.workload();
  const double kc = dev.tau * w * w * w / (dev.t_max * dev.t_max);
  return std::cbrt(2.0 * kc / nu);
}

double comm_stationarity(const DeviceProfile& dev, const ChannelParams& ch, double bits,
                         double pi, double nu) {
  const Objective obj = make_objective(dev, ch, bits);
  if (obj.c == 0.0) return nu;
  if (!(pi > 0.0)) throw Error("communication share must be positive");
  return obj.d_com(pi) + nu;
}

double bisect_comm_split(const DeviceProfile& dev, const ChannelParams& ch, double bits,
                         double nu, double pi_lo, double pi_hi, double lambda) {
  if (!(pi_lo <= pi_hi)) throw Error("empty communication share interval");
  if (!(lambda > 0.0)) throw Error("search tolerance must be positive");
  const auto phi = [&](double pi) { return comm_stationarity(dev, ch, bits, pi, nu); };
  if (pi_hi <= pi_lo) return pi_lo;
  if (phi(pi_lo) >= 0.0) return pi_lo;
  if (phi(pi_hi) <= 0.0) return pi_hi;
  double lo = pi_lo;
  double hi = pi_hi;
  while (hi - lo > lambda) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (phi(mid) > 0.0 ? hi : lo) = mid;
  }
  return 0.5 * (lo + hi);
}

SolveResult solve_allocation_for_bits(const DeviceProfile& dev, const ChannelParams& ch,
                                      double bits, double lambda) {
  check_tolerance(lambda);
  const SplitBounds bounds = split_bounds_for_bits(dev, ch, bits);
  if (!bounds.feasible()) {
    throw InfeasibleBudget("deadline too short: minimum shares sum to " +
                           std::to_string(bounds.theta_min + bounds.pi_min));
  }
  const Objective obj = make_objective(dev, ch, bits);
  const double theta_lo = bounds.theta_min;
  const double theta_hi = 1.0 - bounds.pi_min;
  const double pi_lo = bounds.pi_min;
  const double pi_hi = 1.0 - bounds.theta_min;

  // Dual bisection on the price of deadline time. The primal iterate
  // at each midpoint lower-clamps both shares; their sum steers the
  // bracket. The bracket is recorded after each halving.
  const auto primal = [&](double nu, double* theta, double* pi) {
    *theta = std::max(optimal_theta(dev, nu), theta_lo);
    *pi = bisect_comm_split(dev, ch, bits, nu, pi_lo, pi_hi,
                            std::max(lambda * (pi_hi - pi_lo),
                                     std::numeric_limits<double>::min()));
  };

  NuTrace trace;
  {
    double nu_lo = 0.0;
    double nu_hi = std::max(2.0 * obj.kc, std::numeric_limits<double>::min());
    double theta = 0.0;
    double pi = 0.0;
    for (int grow = 0;; ++grow) {
      if (grow > 4000) throw Error("dual bracket failed to close");
      primal(nu_hi, &theta, &pi);
      if (theta + pi <= 1.0) break;
      nu_hi *= 2.0;
    }
    const double width = nu_hi - nu_lo;
    int iteration = 0;
    while (nu_hi - nu_lo > lambda * width) {
      const double nu = 0.5 * (nu_lo + nu_hi);
      primal(nu, &theta, &pi);
      if (theta + pi <= 1.0) {
        nu_hi = nu;
      } else {
        nu_lo = nu;
      }
      trace.push_back({++iteration, nu_lo, nu_hi, theta, pi, obj.total(theta, pi)});
    }
  }

  // Polish on the active budget line pi = 1 - theta: the energy slope
  // along it is strictly increasing, so a sign bisection pins the
  // minimizer to machine precision.
  const auto slope = [&](double theta) { return obj.d_cmp(theta) - obj.d_com(1.0 - theta); };
  double theta_star = 0.0;
  bool clamped_theta = false;
  bool clamped_pi = false;
  if (theta_hi <= theta_lo) {
    theta_star = theta_lo;
    clamped_theta = clamped_pi = true;
  } else if (slope(theta_lo) >= 0.0) {
    theta_star = theta_lo;
    clamped_theta = true;
  } else if (slope(theta_hi) <= 0.0) {
    theta_star = theta_hi;
    clamped_pi = true;
  } else {
    double lo = theta_lo;
    double hi = theta_hi;
    while (true) {
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      (slope(mid) < 0.0 ? lo : hi) = mid;
    }
    theta_star = lo;
  }
  const double pi_star = 1.0 - theta_star;

  AllocationDecision d;
  d.theta = theta_star;
  d.pi = pi_star;
  d.nu = (clamped_theta && !clamped_pi) ? -obj.d_com(pi_star) : -obj.d_cmp(theta_star);
  d.payload_bits = bits;
  d.clamped_theta = clamped_theta;
  d.clamped_pi = clamped_pi;
  const EnergySplit split = total_energy_split(dev, ch, bits, theta_star, pi_star);
  d.f = split.f;
  d.p = split.p;
  d.e_cmp = split.e_cmp;
  d.e_com = split.e_com;
  d.e_total = split.total();
  d.t_cmp = split.t_cmp;
  d.t_com = split.t_com;
  return {d, std::move(trace)};
}

SolveResult solve_allocation(const DeviceProfile& dev, const ChannelParams& ch,
                             double lambda) {
  const LevelChoice lc = level_for_demand({dev.norm_bound, dev.error_tolerance});
  SolveResult result = solve_allocation_for_bits(
      dev, ch, static_cast<double>(payload_bits(dev.model_size, lc.bits)), lambda);
  result.decision.levels = lc.levels;
  result.decision.bits = lc.bits;
  return result;
}

GridMinimum grid_search_allocation(const DeviceProfile& dev, const ChannelParams& ch,
                                   double bits, double resolution) {
  if (!(resolution > 0.0) || !(resolution < 1.0)) {
    throw Error("grid resolution must lie in (0, 1)");
  }
  const SplitBounds bounds = split_bounds_for_bits(dev, ch, bits);
  if (!bounds.feasible()) {
    throw InfeasibleBudget("deadline too short: minimum shares sum to " +
                           std::to_string(bounds.theta_min + bounds.pi_min));
  }
  double theta_lo = bounds.theta_min;
  double theta_hi = 1.0 - bounds.pi_min;
  // The frequency floor caps the compute share from above, the power
  // floor caps the communication share from above.
  if (dev.f_min > 0.0) {
    theta_hi = std::min(theta_hi, dev.workload() / (dev.f_min * dev.t_max));
  }
  if (bits > 0.0 && dev.p_min > 0.0) {
    const double floor_rate = uplink_rate(ch, dev.p_min);
    if (floor_rate > 0.0) {
      theta_lo = std::max(theta_lo, 1.0 - bits / (dev.t_max * floor_rate));
    }
  }

  GridMinimum best;
  best.e_total = std::numeric_limits<double>::infinity();
  const auto consider = [&](double theta) {
    try {
      const EnergySplit split = total_energy_split(dev, ch, bits, theta, 1.0 - theta);
      if (split.total() < best.e_total) {
        best = {theta, 1.0 - theta, split.total()};
      }
    } catch (const InfeasibleSplit&) {
    }
  };
  const auto points = static_cast<long long>(std::floor((theta_hi - theta_lo) / resolution));
  for (long long i = 0; i <= points; ++i) {
    consider(std::min(theta_lo + static_cast<double>(i) * resolution, theta_hi));
  }
  consider(theta_hi);
  if (!std::isfinite(best.e_total)) {
    throw InfeasibleBudget("no feasible point on the budget line");
  }
  return best;
}

}  // namespace fedq
