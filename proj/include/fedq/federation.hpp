#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fedq/allocator.hpp"
#include "fedq/diffusion.hpp"
#include "fedq/linkmodel.hpp"
#include "fedq/metrics.hpp"
#include "fedq/quant.hpp"

namespace fedq {

enum class QuantMode { OnDemand, Fixed, None };

/// Uplink compression policy. OnDemand sizes the grid per device from
/// its error demand; Fixed uses fixed_bits per parameter everywhere;
/// None sends raw 32-bit parameters.
struct QuantPolicy {
  QuantMode mode = QuantMode::OnDemand;
  std::uint32_t fixed_bits = 0;

  /// Parse "on_demand", "none", or "fixed<bits>" (e.g. "fixed8").
  /// Throws ConfigError on anything else.
  static QuantPolicy parse(const std::string& text);
  std::string name() const;

  bool operator==(const QuantPolicy&) const = default;
};

enum class PartitionMode { IidUniform, ModeSkew };

/// Parse "iid_uniform" or "mode_skew"; throws ConfigError otherwise.
PartitionMode partition_mode_from(const std::string& text);
std::string partition_mode_name(PartitionMode mode);

/// Split points across devices into near-equal shards (sizes differ
/// by at most one, larger shards first). IidUniform deals a seeded
/// shuffle; ModeSkew orders points by angle so each device sees a
/// contiguous arc of the ring. Throws TooFewSamples when there are
/// fewer points than devices.
std::vector<std::vector<Point2>> partition_dataset(const std::vector<Point2>& points,
                                                   int devices, PartitionMode mode,
                                                   std::uint64_t seed);

/// What one device hands back after its local round.
struct Upload {
  WeightVector weights;  ///< What the server aggregates (dequantized when compressed).
  std::optional<QuantizedPayload> payload;  ///< Wire payload; absent under None.
  double bits_sent = 0.0;
  double local_loss = 0.0;  ///< Mean training loss over the local steps.
  double quant_mse = 0.0;   ///< Squared distortion added by compression.
};

/// Run local_iters SGD steps from the global model on the device
/// shard, then compress per policy. Deterministic in seed; the
/// quantization stream is derived from it.
Upload local_update(const NoiseModel& global, const std::vector<Point2>& data,
                    const DeviceProfile& profile, const Schedule& sched,
                    const QuantPolicy& policy, int local_iters, int batch_size, double lr,
                    std::uint64_t seed);

/// Shard-size-weighted average of parameter vectors. Throws
/// ShapeError on mismatched counts or lengths, or non-positive sizes.
WeightVector aggregate_fedavg(const std::vector<WeightVector>& updates,
                              const std::vector<double>& sizes);

/// Everything a training run needs.
struct FleetConfig {
  std::vector<DeviceProfile> profiles;
  std::vector<ChannelParams> channels;
  int rounds = 0;
  int local_iters = 1;
  int batch_size = 64;
  double learning_rate = 1e-3;
  QuantPolicy policy;
  PartitionMode partition = PartitionMode::IidUniform;
  double participation = 1.0;  ///< Fraction of devices active per round.
  int eval_interval = 10;      ///< Rounds between distribution checks; 0 disables.
  int eval_samples = 2000;
  std::uint64_t seed = 1;
  Schedule schedule;
  NoiseModelArch arch;
  int data_modes = 8;
  double data_radius = 4.0;
  double data_stddev = 0.3;
  int data_per_device = 512;
  double solver_lambda = 1e-6;
};

struct DeviceRoundStats {
  int device = 0;
  double theta = 0.0;
  double pi = 0.0;
  double e_cmp = 0.0;
  double e_com = 0.0;
  double t_cmp = 0.0;
  double t_com = 0.0;
  double bits_sent = 0.0;
  double local_loss = 0.0;
  double quant_mse = 0.0;
};

struct RoundReport {
  int round = 0;  ///< 1-based.
  std::vector<DeviceRoundStats> devices;
  double energy_j = 0.0;    ///< Fleet energy spent this round.
  double bits_sent = 0.0;   ///< Fleet uplink traffic this round.
  double mean_loss = 0.0;   ///< Mean local loss over active devices.
  std::optional<double> frechet;  ///< Distribution distance when evaluated.
};

struct RunLedger {
  std::vector<RoundReport> rounds;
  WeightVector final_weights;
  double total_energy_j = 0.0;
  double total_bits = 0.0;
  std::optional<double> final_frechet;
};

/// Federated trainer. Construction prices every device round (the
/// splits are fixed across rounds: demand-optimized under OnDemand,
/// an even half/half under Fixed and None) and fails fast with the
/// offending device in the message when any round is infeasible.
class Trainer {
 public:
  explicit Trainer(FleetConfig cfg);

  const FleetConfig& config() const noexcept { return cfg_; }
  const NoiseModel& model() const noexcept { return model_; }
  const std::vector<AllocationDecision>& decisions() const noexcept { return decisions_; }
  const std::vector<std::vector<Point2>>& datasets() const noexcept { return datasets_; }
  const GaussianFit& reference_fit() const noexcept { return reference_; }

  /// Advance one round (1-based index): local updates on the active
  /// devices, aggregation, energy accounting, optional distribution
  /// evaluation.
  RoundReport run_round(int round_index);

 private:
  FleetConfig cfg_;
  std::vector<std::vector<Point2>> datasets_;
  GaussianFit reference_;
  NoiseModel model_;
  std::vector<AllocationDecision> decisions_;
  std::vector<EnergySplit> splits_;
};

/// Run the configured number of rounds from scratch and collect the
/// per-round reports.
RunLedger run_training(const FleetConfig& cfg);

}  // namespace fedq
