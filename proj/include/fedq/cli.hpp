#pragma once

#include <string>
#include <vector>

#include "fedq/config.hpp"

namespace fedq {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitInfeasible = 2,
  kExitConfig = 3,
};

/// Parameter sweep request: which knob to move and where.
struct SweepRange {
  std::string param;  ///< "t_max" or "distance".
  double from = 0.0;
  double to = 0.0;
  int steps = 6;
};

/// Solve every device's allocation and write allocations.csv; with
/// oracle also grid-search each device and report the gap. Returns
/// kExitInfeasible when any device has no feasible split.
int cmd_allocate(const RunConfig& cfg, const std::string& out_dir, bool oracle);

/// Re-solve the fleet across a range of one parameter and write
/// sweep.csv. Returns kExitInfeasible when no point in the range is
/// feasible for the whole fleet.
int cmd_sweep(const RunConfig& cfg, const SweepRange& range, const std::string& out_dir);

/// Write the dual search trace of one device to nu_trace.csv.
int cmd_nu_trace(const RunConfig& cfg, int device, const std::string& out_dir);

/// Measure quantizer error and bias across distributions and level
/// counts; write quantbench.csv.
int cmd_quantbench(const RunConfig& cfg, const std::string& out_dir);

/// Run federated training under the configured policy, or under each
/// policy in `compare`, and write round logs, summaries, and the
/// effective config.
int cmd_train(const RunConfig& cfg, const std::vector<std::string>& compare,
              const std::string& out_dir);

/// Full command line entry point; returns the process exit code.
int run_cli(int argc, const char* const* argv);

}  // namespace fedq
