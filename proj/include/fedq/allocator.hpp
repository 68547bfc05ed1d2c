#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fedq/linkmodel.hpp"
#include "fedq/quant.hpp"

namespace fedq {

/// Lower bounds on the compute and communication shares of a round.
/// theta_min is forced by the CPU ceiling, pi_min by the power
/// ceiling; a round is feasible iff they fit inside the deadline
/// together.
struct SplitBounds {
  double theta_min = 0.0;
  double pi_min = 0.0;

  bool feasible() const noexcept { return theta_min + pi_min <= 1.0; }
};

/// Energy-optimal operating point of one device round.
struct AllocationDecision {
  double theta = 0.0;         ///< Compute share of the deadline.
  double pi = 0.0;            ///< Communication share of the deadline.
  double nu = 0.0;            ///< Dual price of deadline time at the optimum.
  std::uint32_t levels = 0;   ///< Grid levels behind the payload; 0 if fixed externally.
  std::uint32_t bits = 0;     ///< Bits per parameter; 0 if fixed externally.
  double payload_bits = 0.0;  ///< Uplink size priced by the decision.
  double f = 0.0;             ///< Realized CPU frequency, Hz.
  double p = 0.0;             ///< Realized transmit power, W.
  double e_cmp = 0.0;
  double e_com = 0.0;
  double e_total = 0.0;
  double t_cmp = 0.0;
  double t_com = 0.0;
  bool clamped_theta = false;  ///< Compute share sits on its lower bound.
  bool clamped_pi = false;     ///< Communication share sits on its lower bound.
};

/// One step of the dual search: the bracket on nu after the step and
/// the primal iterate evaluated at its midpoint.
struct NuTraceRow {
  int iteration = 0;
  double nu_lo = 0.0;
  double nu_hi = 0.0;
  double theta = 0.0;
  double pi = 0.0;
  double e_total = 0.0;
};

using NuTrace = std::vector<NuTraceRow>;

/// Render a trace as CSV with header
/// iteration,nu_lo,nu_hi,theta,pi,E_total.
std::string nu_trace_csv(const NuTrace& trace);

struct SolveResult {
  AllocationDecision decision;
  NuTrace trace;
};

/// Share bounds for an uplink of `bits` total bits.
SplitBounds split_bounds_for_bits(const DeviceProfile& dev, const ChannelParams& ch,
                                  double bits);

/// Share bounds with the payload sized by the device's own error
/// demand.
SplitBounds split_bounds(const DeviceProfile& dev, const ChannelParams& ch);

/// Compute share that prices deadline time at nu when unconstrained:
/// the stationary point of compute energy plus nu * theta. Throws
/// InvalidMultiplier for nu <= 0.
double optimal_theta(const DeviceProfile& dev, double nu);

/// Derivative of communication energy plus nu * pi with respect to
/// the communication share. Negative where growing pi still pays,
/// positive past the stationary point. pi must be positive unless the
/// payload is empty.
double comm_stationarity(const DeviceProfile& dev, const ChannelParams& ch, double bits,
                         double pi, double nu);

/// Bisect comm_stationarity over [pi_lo, pi_hi] down to width lambda.
/// Returns the clamped end when the sign does not change inside.
double bisect_comm_split(const DeviceProfile& dev, const ChannelParams& ch, double bits,
                         double nu, double pi_lo, double pi_hi, double lambda);

/// Minimize round energy over the time split for an uplink of `bits`
/// total bits. Runs the dual bisection on nu (recorded in the trace,
/// terminating once the bracket shrinks to lambda of its initial
/// width), then polishes the primal point to machine precision on the
/// active budget line. Throws InfeasibleBudget when no split fits the
/// deadline.
SolveResult solve_allocation_for_bits(const DeviceProfile& dev, const ChannelParams& ch,
                                      double bits, double lambda = 1e-6);

/// solve_allocation_for_bits with the payload sized by the device's
/// error demand; the decision carries the chosen level count.
SolveResult solve_allocation(const DeviceProfile& dev, const ChannelParams& ch,
                             double lambda = 1e-6);

struct GridMinimum {
  double theta = 0.0;
  double pi = 0.0;
  double e_total = 0.0;
};

/// Reference minimizer: scan the budget line pi = 1 - theta at the
/// given theta resolution, pricing each point with
/// total_energy_split and skipping infeasible ones. Slow but
/// independent of the dual solver.
GridMinimum grid_search_allocation(const DeviceProfile& dev, const ChannelParams& ch,
                                   double bits, double resolution);

}  // namespace fedq
