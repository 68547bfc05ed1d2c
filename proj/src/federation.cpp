#include "fedq/federation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace fedq {
namespace {

enum StreamTag : std::uint64_t {
  kTagData = 1,
  kTagPartition = 2,
  kTagInit = 3,
  kTagRound = 4,
  kTagSelect = 5,
  kTagEval = 6,
  kTagQuant = 7,
};

std::uint64_t round_seed(std::uint64_t seed, std::uint64_t tag, int round) {
  return derive_seed(derive_seed(seed, tag), static_cast<std::uint64_t>(round));
}

void check_fleet(const FleetConfig& cfg) {
  if (cfg.profiles.empty()) throw ConfigError("fleet needs at least one device");
  if (cfg.profiles.size() != cfg.channels.size()) {
    throw ConfigError("device and channel counts differ");
  }
  if (cfg.rounds < 0) throw ConfigError("round count must be non-negative");
  if (cfg.local_iters < 0) throw ConfigError("local iteration count must be non-negative");
  if (cfg.batch_size < 1) throw ConfigError("batch size must be positive");
  if (!(cfg.learning_rate > 0.0) || !std::isfinite(cfg.learning_rate)) {
    throw ConfigError("learning rate must be positive and finite");
  }
  if (!(cfg.participation > 0.0) || cfg.participation > 1.0) {
    throw ConfigError("participation must lie in (0, 1]");
  }
  if (cfg.eval_interval < 0) throw ConfigError("eval interval must be non-negative");
  if (cfg.eval_samples < 2) throw ConfigError("eval sample count must be at least 2");
  if (cfg.schedule.steps() < 1) throw ConfigError("noise schedule is empty");
  if (cfg.data_modes < 1) throw ConfigError("data mode count must be positive");
  if (cfg.data_per_device < 1) throw ConfigError("per-device data size must be positive");
  if (cfg.policy.mode == QuantMode::Fixed &&
      (cfg.policy.fixed_bits < 1 || cfg.policy.fixed_bits > 31)) {
    throw ConfigError("fixed bit width must lie in [1, 31]");
  }
}

std::uint32_t demand_levels(const DeviceProfile& profile) {
  return level_for_demand({profile.norm_bound, profile.error_tolerance}).levels;
}

}  // namespace

QuantPolicy QuantPolicy::parse(const std::string& text) {
  if (text == "on_demand") return {QuantMode::OnDemand, 0};
  if (text == "none") return {QuantMode::None, 0};
  if (text.rfind("fixed", 0) == 0 && text.size() > 5) {
    int bits = 0;
    for (std::size_t i = 5; i < text.size(); ++i) {
      if (text[i] < '0' || text[i] > '9') bits = -1;
      if (bits < 0) break;
      bits = bits * 10 + (text[i] - '0');
    }
    if (bits >= 1 && bits <= 31) return {QuantMode::Fixed, static_cast<std::uint32_t>(bits)};
  }
  throw ConfigError("unknown quantization policy '" + text +
                    "' (expected on_demand, none, or fixed<bits>)");
}

std::string QuantPolicy::name() const {
  switch (mode) {
    case QuantMode::OnDemand:
      return "on_demand";
    case QuantMode::None:
      return "none";
    case QuantMode::Fixed:
      return "fixed" + std::to_string(fixed_bits);
  }
  throw Error("unreachable");
}

PartitionMode partition_mode_from(const std::string& text) {
  if (text == "iid_uniform") return PartitionMode::IidUniform;
  if (text == "mode_skew") return PartitionMode::ModeSkew;
  throw ConfigError("unknown partition mode '" + text +
                    "' (expected iid_uniform or mode_skew)");
}

std::string partition_mode_name(PartitionMode mode) {
  return mode == PartitionMode::IidUniform ? "iid_uniform" : "mode_skew";
}

std::vector<std::vector<Point2>> partition_dataset(const std::vector<Point2>& points,
                                                   int devices, PartitionMode mode,
                                                   std::uint64_t seed) {
  if (devices < 1) throw ConfigError("device count must be positive");
  if (points.size() < static_cast<std::size_t>(devices)) {
    throw TooFewSamples("cannot spread " + std::to_string(points.size()) + " points over " +
                        std::to_string(devices) + " devices");
  }
  std::vector<std::size_t> order(points.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (mode == PartitionMode::IidUniform) {
    Rng rng(seed);
    for (std::size_t i = points.size(); i > 1; --i) {
      std::swap(order[i - 1], order[rng.uniform_int(i)]);
    }
  } else {
    std::stable_sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) {
      return std::atan2(points[l][1], points[l][0]) < std::atan2(points[r][1], points[r][0]);
    });
  }
  std::vector<std::vector<Point2>> shards(devices);
  const std::size_t base = points.size() / devices;
  const std::size_t extra = points.size() % devices;
  std::size_t at = 0;
  for (int k = 0; k < devices; ++k) {
    const std::size_t take = base + (static_cast<std::size_t>(k) < extra ? 1 : 0);
    shards[k].reserve(take);
    for (std::size_t i = 0; i < take; ++i) shards[k].push_back(points[order[at++]]);
  }
  return shards;
}

Upload local_update(const NoiseModel& global, const std::vector<Point2>& data,
                    const DeviceProfile& profile, const Schedule& sched,
                    const QuantPolicy& policy, int local_iters, int batch_size, double lr,
                    std::uint64_t seed) {
  if (local_iters < 0) throw ConfigError("local iteration count must be non-negative");
  NoiseModel local = global;
  Rng rng(seed);
  double loss_sum = 0.0;
  for (int i = 0; i < local_iters; ++i) {
    const Batch batch = make_batch(data, batch_size, sched.steps(), rng);
    LossGrad lg = loss_and_grad(local, batch, sched);
    sgd_step(local, lg.grad, lr);
    loss_sum += lg.loss;
  }

  Upload up;
  up.local_loss = local_iters > 0
                      ? loss_sum / local_iters
                      : batch_loss(local, make_batch(data, batch_size, sched.steps(), rng),
                                   sched);

  const std::uint64_t m = local.weights().size();
  std::uint32_t levels = 0;
  switch (policy.mode) {
    case QuantMode::None:
      up.weights = local.weights();
      up.bits_sent = static_cast<double>(payload_bits(m, 32));
      return up;
    case QuantMode::OnDemand:
      levels = demand_levels(profile);
      break;
    case QuantMode::Fixed:
      if (policy.fixed_bits < 1 || policy.fixed_bits > 31) {
        throw ConfigError("fixed bit width must lie in [1, 31]");
      }
      levels = std::uint32_t{1} << policy.fixed_bits;
      break;
  }

  const QuantSpec spec = build_spec(local.weights(), levels);
  up.payload = quantize(local.weights(), spec, derive_seed(seed, kTagQuant));
  up.weights = dequantize(*up.payload);
  up.bits_sent = static_cast<double>(payload_bits(m, spec.bits()));
  for (std::size_t i = 0; i < m; ++i) {
    const double d = up.weights[i] - local.weights()[i];
    up.quant_mse += d * d;
  }
  return up;
}

WeightVector aggregate_fedavg(const std::vector<WeightVector>& updates,
                              const std::vector<double>& sizes) {
  if (updates.empty()) throw ShapeError("nothing to aggregate");
  if (updates.size() != sizes.size()) {
    throw ShapeError("update and size counts differ");
  }
  const std::size_t dim = updates.front().size();
  double total = 0.0;
  for (double s : sizes) {
    if (!(s > 0.0) || !std::isfinite(s)) throw ShapeError("shard sizes must be positive");
    total += s;
  }
  WeightVector out(dim, 0.0);
  for (std::size_t k = 0; k < updates.size(); ++k) {
    if (updates[k].size() != dim) throw ShapeError("update length mismatch");
    const double w = sizes[k] / total;
    for (std::size_t i = 0; i < dim; ++i) out[i] += w * updates[k][i];
  }
  return out;
}

Trainer::Trainer(FleetConfig cfg) : cfg_(std::move(cfg)), model_(cfg_.arch, std::uint64_t{0}) {
  check_fleet(cfg_);
  const int devices = static_cast<int>(cfg_.profiles.size());

  Rng data_rng(derive_seed(cfg_.seed, kTagData));
  const std::vector<Point2> all = make_mixture_dataset(
      devices * cfg_.data_per_device, cfg_.data_modes, cfg_.data_radius, cfg_.data_stddev,
      data_rng);
  datasets_ = partition_dataset(all, devices, cfg_.partition,
                                derive_seed(cfg_.seed, kTagPartition));
  reference_ = fit_gaussian(all);
  model_ = NoiseModel(cfg_.arch, derive_seed(cfg_.seed, kTagInit));

  // Every uplink carries this model, whatever the profiles nominally
  // advertise.
  for (DeviceProfile& p : cfg_.profiles) {
    p.model_size = static_cast<std::uint64_t>(cfg_.arch.param_count());
  }

  decisions_.reserve(devices);
  splits_.reserve(devices);
  for (int k = 0; k < devices; ++k) {
    const DeviceProfile& prof = cfg_.profiles[k];
    const ChannelParams& chan = cfg_.channels[k];
    try {
      AllocationDecision dec;
      if (cfg_.policy.mode == QuantMode::OnDemand) {
        dec = solve_allocation(prof, chan, cfg_.solver_lambda).decision;
      } else {
        const std::uint32_t bits =
            cfg_.policy.mode == QuantMode::None ? 32 : cfg_.policy.fixed_bits;
        dec.theta = 0.5;
        dec.pi = 0.5;
        dec.bits = bits;
        dec.levels = cfg_.policy.mode == QuantMode::Fixed ? (std::uint32_t{1} << bits) : 0;
        dec.payload_bits = static_cast<double>(payload_bits(prof.model_size, bits));
        const EnergySplit split =
            total_energy_split(prof, chan, dec.payload_bits, dec.theta, dec.pi);
        dec.f = split.f;
        dec.p = split.p;
        dec.e_cmp = split.e_cmp;
        dec.e_com = split.e_com;
        dec.e_total = split.total();
        dec.t_cmp = split.t_cmp;
        dec.t_com = split.t_com;
      }
      decisions_.push_back(dec);
      splits_.push_back(total_energy_split(prof, chan, dec.payload_bits, dec.theta, dec.pi));
    } catch (const InfeasibleBudget& e) {
      throw InfeasibleBudget("device " + std::to_string(k) + ": " + e.what());
    } catch (const InfeasibleSplit& e) {
      throw InfeasibleBudget("device " + std::to_string(k) + ": " + e.what());
    }
  }
}

RoundReport Trainer::run_round(int round_index) {
  if (round_index < 1) throw ConfigError("round index is 1-based");
  const int devices = static_cast<int>(cfg_.profiles.size());

  std::vector<int> active(devices);
  std::iota(active.begin(), active.end(), 0);
  const int take = std::clamp(
      static_cast<int>(std::lround(cfg_.participation * devices)), 1, devices);
  if (take < devices) {
    Rng rng(round_seed(cfg_.seed, kTagSelect, round_index));
    for (int i = 0; i < take; ++i) {
      std::swap(active[i], active[i + static_cast<int>(rng.uniform_int(devices - i))]);
    }
    active.resize(take);
    std::sort(active.begin(), active.end());
  }

  RoundReport report;
  report.round = round_index;
  std::vector<WeightVector> updates;
  std::vector<double> sizes;
  updates.reserve(active.size());
  sizes.reserve(active.size());

  for (int k : active) {
    const Upload up = local_update(
        model_, datasets_[k], cfg_.profiles[k], cfg_.schedule, cfg_.policy,
        cfg_.local_iters, cfg_.batch_size, cfg_.learning_rate,
        derive_seed(round_seed(cfg_.seed, kTagRound, round_index),
                    static_cast<std::uint64_t>(k)));
    const EnergySplit& split = splits_[k];
    DeviceRoundStats stats;
    stats.device = k;
    stats.theta = decisions_[k].theta;
    stats.pi = decisions_[k].pi;
    stats.e_cmp = split.e_cmp;
    stats.e_com = split.e_com;
    stats.t_cmp = split.t_cmp;
    stats.t_com = split.t_com;
    stats.bits_sent = up.bits_sent;
    stats.local_loss = up.local_loss;
    stats.quant_mse = up.quant_mse;
    report.devices.push_back(stats);
    report.energy_j += split.total();
    report.bits_sent += up.bits_sent;
    report.mean_loss += up.local_loss;
    updates.push_back(std::move(up.weights));
    sizes.push_back(static_cast<double>(datasets_[k].size()));
  }
  report.mean_loss /= static_cast<double>(active.size());
  model_.set_weights(aggregate_fedavg(updates, sizes));

  const bool last_round = round_index == cfg_.rounds;
  if (cfg_.eval_interval > 0 &&
      (round_index % cfg_.eval_interval == 0 || last_round)) {
    const std::vector<Point2> drawn =
        sample(model_, cfg_.schedule, cfg_.eval_samples,
               round_seed(cfg_.seed, kTagEval, round_index));
    report.frechet = frechet_2d(fit_gaussian(drawn), reference_);
  }
  return report;
}

RunLedger run_training(const FleetConfig& cfg) {
  Trainer trainer(cfg);
  RunLedger ledger;
  ledger.rounds.reserve(cfg.rounds);
  for (int r = 1; r <= cfg.rounds; ++r) {
    ledger.rounds.push_back(trainer.run_round(r));
    const RoundReport& report = ledger.rounds.back();
    ledger.total_energy_j += report.energy_j;
    ledger.total_bits += report.bits_sent;
    if (report.frechet) ledger.final_frechet = report.frechet;
  }
  ledger.final_weights = trainer.model().weights();
  return ledger;
}

}  // namespace fedq
