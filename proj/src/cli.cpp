#include "fedq/cli.hpp"

#include <cmath>
#include <cstdio>
#include <optional>

#include <CLI11.hpp>

#include "fedq/allocator.hpp"
#include "fedq/csv.hpp"

namespace fedq {
namespace {

constexpr double kOracleResolution = 1e-5;
constexpr std::uint64_t kTagBench = 11;

std::string flag(bool v) { return v ? "1" : "0"; }

void note(const std::string& line) { std::fputs((line + "\n").c_str(), stdout); }

void warn(const std::string& line) { std::fputs((line + "\n").c_str(), stderr); }

std::string mode_suffix(const std::string& mode, bool multi) {
  return multi ? "_" + mode : std::string();
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

}  // namespace

int cmd_allocate(const RunConfig& cfg, const std::string& out_dir, bool oracle) {
  std::vector<std::string> header = {
      "device",    "status", "bits",    "levels",  "payload_bits", "theta",
      "pi",        "nu",     "f_hz",    "p_w",     "e_cmp_j",      "e_com_j",
      "e_total_j", "t_cmp_s", "t_com_s", "clamped_theta", "clamped_pi"};
  if (oracle) {
    header.insert(header.end(), {"oracle_theta", "oracle_e_total_j", "rel_gap"});
  }
  CsvWriter csv(header);
  bool any_infeasible = false;
  for (int k = 0; k < cfg.devices; ++k) {
    const DeviceProfile prof = cfg.profile_for(k);
    const ChannelParams chan = cfg.channel_for(k);
    try {
      const AllocationDecision d = solve_allocation(prof, chan, cfg.lambda).decision;
      std::vector<std::string> cells = {
          CsvWriter::num(k),          "ok",
          CsvWriter::num(d.bits),     CsvWriter::num(d.levels),
          CsvWriter::num(d.payload_bits), CsvWriter::num(d.theta),
          CsvWriter::num(d.pi),       CsvWriter::num(d.nu),
          CsvWriter::num(d.f),        CsvWriter::num(d.p),
          CsvWriter::num(d.e_cmp),    CsvWriter::num(d.e_com),
          CsvWriter::num(d.e_total),  CsvWriter::num(d.t_cmp),
          CsvWriter::num(d.t_com),    flag(d.clamped_theta),
          flag(d.clamped_pi)};
      if (oracle) {
        const GridMinimum gm =
            grid_search_allocation(prof, chan, d.payload_bits, kOracleResolution);
        cells.push_back(CsvWriter::num(gm.theta));
        cells.push_back(CsvWriter::num(gm.e_total));
        cells.push_back(CsvWriter::num(std::fabs(d.e_total - gm.e_total) / gm.e_total));
      }
      csv.row(cells);
    } catch (const InfeasibleBudget& e) {
      any_infeasible = true;
      warn("device " + std::to_string(k) + ": " + e.what());
      std::vector<std::string> cells(header.size(), "");
      cells[0] = CsvWriter::num(k);
      cells[1] = "infeasible";
      csv.row(cells);
    }
  }
  const std::string path = out_dir + "/allocations.csv";
  csv.write_file(path);
  note("wrote " + path);
  return any_infeasible ? kExitInfeasible : kExitOk;
}

int cmd_sweep(const RunConfig& cfg, const SweepRange& range, const std::string& out_dir) {
  if (range.param != "t_max" && range.param != "distance") {
    throw ConfigError("sweep parameter must be t_max or distance, got '" + range.param + "'");
  }
  if (range.steps < 1) throw ConfigError("sweep needs at least one step");
  if (!(range.from > 0.0) || !(range.to >= range.from)) {
    throw ConfigError("sweep range must satisfy 0 < from <= to");
  }

  std::vector<std::string> header = {range.param == "t_max" ? "t_max_s" : "distance_m"};
  for (int k = 0; k < cfg.devices; ++k) header.push_back("e_total_dev" + std::to_string(k));
  header.push_back("fleet_e_total_j");
  header.push_back("status");
  CsvWriter csv(header);

  bool any_full_row = false;
  for (int i = 0; i < range.steps; ++i) {
    const double value =
        range.steps == 1
            ? range.from
            : range.from + (range.to - range.from) * i / (range.steps - 1);
    std::vector<std::string> cells = {CsvWriter::num(value)};
    double fleet = 0.0;
    bool all_ok = true;
    for (int k = 0; k < cfg.devices; ++k) {
      DeviceProfile prof = cfg.profile_for(k);
      ChannelParams chan = cfg.channel_for(k);
      if (range.param == "t_max") {
        prof.t_max = value;
      } else {
        chan.distance = value;
      }
      try {
        const AllocationDecision d = solve_allocation(prof, chan, cfg.lambda).decision;
        cells.push_back(CsvWriter::num(d.e_total));
        fleet += d.e_total;
      } catch (const InfeasibleBudget&) {
        cells.push_back("");
        all_ok = false;
      }
    }
    cells.push_back(all_ok ? CsvWriter::num(fleet) : "");
    cells.push_back(all_ok ? "ok" : "infeasible");
    any_full_row = any_full_row || all_ok;
    csv.row(cells);
  }
  const std::string path = out_dir + "/sweep.csv";
  csv.write_file(path);
  note("wrote " + path);
  return any_full_row ? kExitOk : kExitInfeasible;
}

int cmd_nu_trace(const RunConfig& cfg, int device, const std::string& out_dir) {
  if (device < 0 || device >= cfg.devices) {
    throw ConfigError("device index " + std::to_string(device) + " outside [0, " +
                      std::to_string(cfg.devices) + ")");
  }
  try {
    const SolveResult result =
        solve_allocation(cfg.profile_for(device), cfg.channel_for(device), cfg.lambda);
    const std::string path = out_dir + "/nu_trace.csv";
    write_text_file(path, nu_trace_csv(result.trace));
    note("wrote " + path);
    note("device " + std::to_string(device) + ": theta=" + CsvWriter::num(result.decision.theta) +
         " pi=" + CsvWriter::num(result.decision.pi) +
         " E_total=" + CsvWriter::num(result.decision.e_total) + " J in " +
         std::to_string(result.trace.size()) + " iterations");
    return kExitOk;
  } catch (const InfeasibleBudget& e) {
    warn(std::string("infeasible: ") + e.what());
    return kExitInfeasible;
  }
}

int cmd_quantbench(const RunConfig& cfg, const std::string& out_dir) {
  CsvWriter csv({"distribution", "levels", "bits", "dim", "trials", "mse", "bound", "ratio",
                 "z_score"});
  const std::vector<std::string> distributions = {"gaussian", "uniform", "grid"};
  for (std::size_t d = 0; d < distributions.size(); ++d) {
    for (const std::uint32_t levels : {64u, 128u, 256u}) {
      Rng rng(derive_seed(derive_seed(cfg.seed, kTagBench),
                          (d << 8) | static_cast<std::uint64_t>(levels)));
      WeightVector w(cfg.qb_dim);
      if (distributions[d] == "gaussian") {
        for (double& x : w) x = rng.normal();
      } else if (distributions[d] == "uniform") {
        for (double& x : w) x = rng.uniform(-1.0, 1.0);
      } else {
        for (double& x : w) x = rng.normal();
        w = dequantize(quantize(w, build_spec(w, levels), rng.next_u64()));
      }
      const QuantSpec spec = build_spec(w, levels);
      double norm_sq = 0.0;
      for (double x : w) norm_sq += x * x;

      const std::uint64_t trial_key = rng.next_u64();
      double err_sum = 0.0;
      double md_sum = 0.0;
      double md_sq_sum = 0.0;
      for (int t = 0; t < cfg.qb_trials; ++t) {
        const WeightVector back = dequantize(quantize(w, spec, derive_seed(trial_key, t)));
        double err = 0.0;
        double dev = 0.0;
        for (std::size_t i = 0; i < w.size(); ++i) {
          const double diff = back[i] - w[i];
          err += diff * diff;
          dev += diff;
        }
        err_sum += err;
        const double md = dev / static_cast<double>(w.size());
        md_sum += md;
        md_sq_sum += md * md;
      }
      const double n = cfg.qb_trials;
      const double mse = err_sum / n;
      const double bound = norm_sq / (2.0 * static_cast<double>(levels) * levels);
      const double mean_md = md_sum / n;
      const double var_md = n > 1 ? std::max(0.0, (md_sq_sum / n - mean_md * mean_md) * n / (n - 1)) : 0.0;
      const double se = std::sqrt(var_md / n);
      const double z = se > 0.0 ? mean_md / se : 0.0;
      csv.row({distributions[d], CsvWriter::num(levels), CsvWriter::num(spec.bits()),
               CsvWriter::num(cfg.qb_dim), CsvWriter::num(cfg.qb_trials),
               CsvWriter::num(mse), CsvWriter::num(bound),
               CsvWriter::num(mse == 0.0 ? 0.0 : mse / bound), CsvWriter::num(z)});
    }
  }
  const std::string path = out_dir + "/quantbench.csv";
  csv.write_file(path);
  note("wrote " + path);
  return kExitOk;
}

int cmd_train(const RunConfig& cfg, const std::vector<std::string>& compare,
              const std::string& out_dir) {
  const bool multi = !compare.empty();
  const std::vector<std::string> modes =
      multi ? compare : std::vector<std::string>{cfg.quant_mode};

  write_text_file(out_dir + "/config_echo.json", cfg.to_json().dump(2) + "\n");
  note("wrote " + out_dir + "/config_echo.json");

  CsvWriter cmp({"quant_mode", "total_energy_j", "total_bits", "final_frechet",
                 "final_mean_loss"});
  for (const std::string& mode : modes) {
    const QuantPolicy policy = QuantPolicy::parse(mode);
    const RunLedger ledger = run_training(cfg.fleet(policy));

    CsvWriter rounds({"round", "energy_j", "cum_energy_j", "bits_sent", "cum_bits",
                      "mean_loss", "frechet"});
    double cum_energy = 0.0;
    double cum_bits = 0.0;
    for (const RoundReport& r : ledger.rounds) {
      cum_energy += r.energy_j;
      cum_bits += r.bits_sent;
      rounds.row({CsvWriter::num(r.round), CsvWriter::num(r.energy_j),
                  CsvWriter::num(cum_energy), CsvWriter::num(r.bits_sent),
                  CsvWriter::num(cum_bits), CsvWriter::num(r.mean_loss),
                  r.frechet ? CsvWriter::num(*r.frechet) : ""});
    }
    const std::string suffix = mode_suffix(mode, multi);
    rounds.write_file(out_dir + "/rounds" + suffix + ".csv");
    note("wrote " + out_dir + "/rounds" + suffix + ".csv");

    const std::string final_frechet =
        ledger.final_frechet ? CsvWriter::num(*ledger.final_frechet) : "";
    const std::string final_loss =
        ledger.rounds.empty() ? "" : CsvWriter::num(ledger.rounds.back().mean_loss);
    CsvWriter summary({"quant_mode", "rounds", "devices", "total_energy_j", "total_bits",
                       "final_frechet", "final_mean_loss"});
    summary.row({mode, CsvWriter::num(static_cast<int>(ledger.rounds.size())),
                 CsvWriter::num(cfg.devices), CsvWriter::num(ledger.total_energy_j),
                 CsvWriter::num(ledger.total_bits), final_frechet, final_loss});
    summary.write_file(out_dir + "/summary" + suffix + ".csv");
    note("wrote " + out_dir + "/summary" + suffix + ".csv");

    cmp.row({mode, CsvWriter::num(ledger.total_energy_j), CsvWriter::num(ledger.total_bits),
             final_frechet, final_loss});
  }
  if (multi) {
    cmp.write_file(out_dir + "/compare.csv");
    note("wrote " + out_dir + "/compare.csv");
  }
  return kExitOk;
}

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"on-demand quantized federated training over a modeled edge network"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = "out";
  std::uint64_t seed = 0;
  bool oracle = false;
  int device = 0;
  std::string compare_list;
  SweepRange range;

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON run configuration");
    sub->add_option("--seed", seed, "Override the configured seed");
    sub->add_option("--out", out_dir, "Output directory");
    return sub;
  };

  CLI::App* allocate = add_common(app.add_subcommand(
      "allocate", "Energy-optimal split and bit width for every device"));
  allocate->add_flag("--oracle", oracle, "Cross-check each split against a grid search");

  CLI::App* sweep = add_common(
      app.add_subcommand("sweep", "Re-solve the fleet across a parameter range"));
  sweep->add_option("--param", range.param, "t_max or distance")->required();
  sweep->add_option("--from", range.from, "First value")->required();
  sweep->add_option("--to", range.to, "Last value")->required();
  sweep->add_option("--steps", range.steps, "Points in the range");

  CLI::App* nu_trace = add_common(
      app.add_subcommand("nu-trace", "Dual search trace for one device"));
  nu_trace->add_option("--device", device, "Device index");

  add_common(app.add_subcommand("quantbench", "Quantizer error and bias measurements"));

  CLI::App* train =
      add_common(app.add_subcommand("train", "Federated training of the toy model"));
  train->add_option("--compare", compare_list,
                    "Comma-separated quantization policies to run side by side");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    RunConfig cfg = config_path.empty() ? RunConfig::defaults()
                                        : RunConfig::load_file(config_path);
    for (const CLI::App* sub : app.get_subcommands()) {
      if (sub->count("--seed") > 0) cfg.seed = seed;
    }
    const CLI::App* sub = app.get_subcommands().front();
    if (sub->get_name() == "allocate") return cmd_allocate(cfg, out_dir, oracle);
    if (sub->get_name() == "sweep") return cmd_sweep(cfg, range, out_dir);
    if (sub->get_name() == "nu-trace") return cmd_nu_trace(cfg, device, out_dir);
    if (sub->get_name() == "quantbench") return cmd_quantbench(cfg, out_dir);
    if (sub->get_name() == "train") return cmd_train(cfg, split_list(compare_list), out_dir);
    warn("unknown subcommand");
    return kExitFailure;
  } catch (const ConfigError& e) {
    warn(std::string("config error: ") + e.what());
    return kExitConfig;
  } catch (const InfeasibleBudget& e) {
    warn(std::string("infeasible: ") + e.what());
    return kExitInfeasible;
  } catch (const InfeasibleSplit& e) {
    warn(std::string("infeasible: ") + e.what());
    return kExitInfeasible;
  } catch (const Error& e) {
    warn(std::string("error: ") + e.what());
    return kExitFailure;
  } catch (const std::exception& e) {
    warn(std::string("error: ") + e.what());
    return kExitFailure;
  }
}

}  // namespace fedq
