// Python bindings for the main operations: link pricing, the split
// solver and its grid oracle, quantization and its codec, the toy
// diffusion model, distribution metrics, and config-driven training.
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "fedq/allocator.hpp"
#include "fedq/cli.hpp"
#include "fedq/config.hpp"
#include "fedq/diffusion.hpp"
#include "fedq/federation.hpp"
#include "fedq/linkmodel.hpp"
#include "fedq/metrics.hpp"
#include "fedq/quant.hpp"
#include "fedq/rng.hpp"

namespace py = pybind11;

namespace {

nlohmann::json parse_config_text(const std::string& text) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw fedq::ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
}

py::object opt_float(const std::optional<double>& v) {
  if (!v) return py::none();
  return py::float_(*v);
}

py::dict ledger_to_dict(const fedq::RunLedger& ledger) {
  py::list rounds;
  for (const fedq::RoundReport& r : ledger.rounds) {
    py::dict row;
    row["round"] = r.round;
    row["energy_j"] = r.energy_j;
    row["bits_sent"] = r.bits_sent;
    row["mean_loss"] = r.mean_loss;
    row["frechet"] = opt_float(r.frechet);
    rounds.append(row);
  }
  py::dict out;
  out["rounds"] = rounds;
  out["total_energy_j"] = ledger.total_energy_j;
  out["total_bits"] = ledger.total_bits;
  out["final_frechet"] = opt_float(ledger.final_frechet);
  out["final_weights"] = ledger.final_weights;
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "On-demand quantized federated training over a modeled edge network";

  const py::object base = py::register_exception<fedq::Error>(m, "Error");
  py::register_exception<fedq::ConfigError>(m, "ConfigError", base);
  py::register_exception<fedq::InfeasibleBudget>(m, "InfeasibleBudget", base);
  py::register_exception<fedq::InfeasibleSplit>(m, "InfeasibleSplit", base);
  py::register_exception<fedq::InvalidDemand>(m, "InvalidDemand", base);
  py::register_exception<fedq::CorruptPayload>(m, "CorruptPayload", base);

  py::class_<fedq::DeviceProfile>(m, "DeviceProfile",
                                  "Static description of one training device")
      .def(py::init<>())
      .def_readwrite("iterations", &fedq::DeviceProfile::iterations)
      .def_readwrite("data_size", &fedq::DeviceProfile::data_size)
      .def_readwrite("cycles_per_sample", &fedq::DeviceProfile::cycles_per_sample)
      .def_readwrite("f_min", &fedq::DeviceProfile::f_min)
      .def_readwrite("f_max", &fedq::DeviceProfile::f_max)
      .def_readwrite("tau", &fedq::DeviceProfile::tau)
      .def_readwrite("p_min", &fedq::DeviceProfile::p_min)
      .def_readwrite("p_max", &fedq::DeviceProfile::p_max)
      .def_readwrite("norm_bound", &fedq::DeviceProfile::norm_bound)
      .def_readwrite("error_tolerance", &fedq::DeviceProfile::error_tolerance)
      .def_readwrite("t_max", &fedq::DeviceProfile::t_max)
      .def_readwrite("model_size", &fedq::DeviceProfile::model_size)
      .def("workload", &fedq::DeviceProfile::workload,
           "Total CPU cycles of one local round");

  py::class_<fedq::ChannelParams>(m, "ChannelParams",
                                  "Uplink channel between a device and the server")
      .def(py::init<>())
      .def_readwrite("bandwidth", &fedq::ChannelParams::bandwidth)
      .def_readwrite("noise_psd", &fedq::ChannelParams::noise_psd)
      .def_readwrite("gain", &fedq::ChannelParams::gain)
      .def_readwrite("distance", &fedq::ChannelParams::distance)
      .def_readwrite("pathloss_exp", &fedq::ChannelParams::pathloss_exp)
      .def("path_gain", &fedq::ChannelParams::path_gain,
           "Combined gain |h|^2 * d^-eta seen by the receiver");

  m.def("noise_psd_from_dbm_per_mhz", &fedq::noise_psd_from_dbm_per_mhz, py::arg("dbm_per_mhz"),
        "Convert a noise density quoted in dBm per MHz to W/Hz");
  m.def("uplink_rate", &fedq::uplink_rate, py::arg("channel"), py::arg("power"),
        "Uplink throughput in bit/s at the given transmit power");
  m.def("power_for_rate", &fedq::power_for_rate, py::arg("channel"), py::arg("rate"),
        "Transmit power that achieves the given rate; inverse of uplink_rate");

  py::class_<fedq::EnergySplit>(m, "EnergySplit", "One device round priced at a concrete split")
      .def_readonly("e_cmp", &fedq::EnergySplit::e_cmp)
      .def_readonly("e_com", &fedq::EnergySplit::e_com)
      .def_readonly("f", &fedq::EnergySplit::f)
      .def_readonly("p", &fedq::EnergySplit::p)
      .def_readonly("t_cmp", &fedq::EnergySplit::t_cmp)
      .def_readonly("t_com", &fedq::EnergySplit::t_com)
      .def("total", &fedq::EnergySplit::total);

  m.def("total_energy_split", &fedq::total_energy_split, py::arg("device"), py::arg("channel"),
        py::arg("bits"), py::arg("theta"), py::arg("pi"),
        "Price a round that spends theta * t_max computing and pi * t_max transmitting");
  m.def("comm_energy_full_deadline", &fedq::comm_energy_full_deadline, py::arg("device"),
        py::arg("channel"), py::arg("bits"), py::arg("pi"),
        "Comparison pricing: the power that delivers the bits in pi * t_max, charged over the "
        "whole deadline");

  py::class_<fedq::SplitBounds>(m, "SplitBounds",
                                "Lower bounds on the compute and communication shares")
      .def_readonly("theta_min", &fedq::SplitBounds::theta_min)
      .def_readonly("pi_min", &fedq::SplitBounds::pi_min)
      .def("feasible", &fedq::SplitBounds::feasible);

  m.def("split_bounds", &fedq::split_bounds, py::arg("device"), py::arg("channel"),
        "Share bounds with the payload sized by the device's error demand");
  m.def("split_bounds_for_bits", &fedq::split_bounds_for_bits, py::arg("device"),
        py::arg("channel"), py::arg("bits"), "Share bounds for an uplink of `bits` total bits");

  py::class_<fedq::AllocationDecision>(m, "AllocationDecision",
                                       "Energy-optimal operating point of one device round")
      .def_readonly("theta", &fedq::AllocationDecision::theta)
      .def_readonly("pi", &fedq::AllocationDecision::pi)
      .def_readonly("nu", &fedq::AllocationDecision::nu)
      .def_readonly("levels", &fedq::AllocationDecision::levels)
      .def_readonly("bits", &fedq::AllocationDecision::bits)
      .def_readonly("payload_bits", &fedq::AllocationDecision::payload_bits)
      .def_readonly("f", &fedq::AllocationDecision::f)
      .def_readonly("p", &fedq::AllocationDecision::p)
      .def_readonly("e_cmp", &fedq::AllocationDecision::e_cmp)
      .def_readonly("e_com", &fedq::AllocationDecision::e_com)
      .def_readonly("e_total", &fedq::AllocationDecision::e_total)
      .def_readonly("t_cmp", &fedq::AllocationDecision::t_cmp)
      .def_readonly("t_com", &fedq::AllocationDecision::t_com)
      .def_readonly("clamped_theta", &fedq::AllocationDecision::clamped_theta)
      .def_readonly("clamped_pi", &fedq::AllocationDecision::clamped_pi);

  py::class_<fedq::NuTraceRow>(m, "NuTraceRow", "One step of the dual search")
      .def_readonly("iteration", &fedq::NuTraceRow::iteration)
      .def_readonly("nu_lo", &fedq::NuTraceRow::nu_lo)
      .def_readonly("nu_hi", &fedq::NuTraceRow::nu_hi)
      .def_readonly("theta", &fedq::NuTraceRow::theta)
      .def_readonly("pi", &fedq::NuTraceRow::pi)
      .def_readonly("e_total", &fedq::NuTraceRow::e_total);

  py::class_<fedq::SolveResult>(m, "SolveResult")
      .def_readonly("decision", &fedq::SolveResult::decision)
      .def_readonly("trace", &fedq::SolveResult::trace);

  m.def("solve_allocation", &fedq::solve_allocation, py::arg("device"), py::arg("channel"),
        py::arg("lambda_") = 1e-6,
        "Minimize round energy over the time split, payload sized by the error demand");
  m.def("solve_allocation_for_bits", &fedq::solve_allocation_for_bits, py::arg("device"),
        py::arg("channel"), py::arg("bits"), py::arg("lambda_") = 1e-6,
        "Minimize round energy for an uplink of `bits` total bits");
  m.def("nu_trace_csv", &fedq::nu_trace_csv, py::arg("trace"),
        "Render a dual search trace as CSV");

  py::class_<fedq::GridMinimum>(m, "GridMinimum")
      .def_readonly("theta", &fedq::GridMinimum::theta)
      .def_readonly("pi", &fedq::GridMinimum::pi)
      .def_readonly("e_total", &fedq::GridMinimum::e_total);

  m.def("grid_search_allocation", &fedq::grid_search_allocation, py::arg("device"),
        py::arg("channel"), py::arg("bits"), py::arg("resolution"),
        "Reference minimizer for an uplink of `bits` total bits: scan the budget line, "
        "independent of the dual solver");

  py::class_<fedq::LevelChoice>(m, "LevelChoice")
      .def_readonly("levels", &fedq::LevelChoice::levels)
      .def_readonly("bits", &fedq::LevelChoice::bits);

  m.def(
      "level_for_demand",
      [](double norm_bound, double error_tolerance) {
        return fedq::level_for_demand({norm_bound, error_tolerance});
      },
      py::arg("norm_bound"), py::arg("error_tolerance"),
      "Smallest power-of-two level count meeting the error demand");

  py::class_<fedq::QuantSpec>(m, "QuantSpec", "Uniform symmetric quantization grid")
      .def_readonly("levels", &fedq::QuantSpec::levels)
      .def_readonly("scale", &fedq::QuantSpec::scale)
      .def_readonly("grid_lo", &fedq::QuantSpec::grid_lo)
      .def_readonly("grid_hi", &fedq::QuantSpec::grid_hi)
      .def("bits", &fedq::QuantSpec::bits)
      .def("step", &fedq::QuantSpec::step)
      .def("grid_value", &fedq::QuantSpec::grid_value, py::arg("index"));

  m.def("build_spec", &fedq::build_spec, py::arg("weights"), py::arg("levels"),
        "Grid spanning [-max|w|, +max|w|] with the given level count");

  py::class_<fedq::QuantizedPayload>(m, "QuantizedPayload",
                                     "Bit-packed grid indices plus their decoding header")
      .def_property_readonly("spec", &fedq::QuantizedPayload::spec)
      .def_property_readonly("count", &fedq::QuantizedPayload::count)
      .def("indices", &fedq::QuantizedPayload::indices)
      .def("body_bits", &fedq::QuantizedPayload::body_bits)
      .def("serialize",
           [](const fedq::QuantizedPayload& p) {
             const std::vector<std::uint8_t> bytes = p.serialize();
             return py::bytes(reinterpret_cast<const char*>(bytes.data()), bytes.size());
           })
      .def_static("deserialize", [](const py::bytes& data) {
        const std::string buf = data;
        const std::vector<std::uint8_t> bytes(buf.begin(), buf.end());
        return fedq::QuantizedPayload::deserialize(bytes);
      });

  m.def("quantize", &fedq::quantize, py::arg("weights"), py::arg("spec"), py::arg("seed"),
        "Unbiased stochastic rounding of the weights onto the grid");
  m.def("dequantize", &fedq::dequantize, py::arg("payload"),
        "Map a payload back to grid values");
  m.def("payload_bits", &fedq::payload_bits, py::arg("model_size"), py::arg("bits"));

  py::class_<fedq::ErrorReport>(m, "ErrorReport")
      .def_readonly("mse", &fedq::ErrorReport::mse)
      .def_readonly("bound", &fedq::ErrorReport::bound)
      .def_readonly("ratio", &fedq::ErrorReport::ratio);

  m.def("empirical_error_report", &fedq::empirical_error_report, py::arg("weights"),
        py::arg("levels"), py::arg("trials"), py::arg("seed"),
        "Monte Carlo quantization error against the reference bound");

  py::class_<fedq::Schedule>(m, "Schedule", "Variance schedule of the forward noising chain")
      .def_readonly("betas", &fedq::Schedule::betas)
      .def_readonly("alphas", &fedq::Schedule::alphas)
      .def_readonly("alpha_bars", &fedq::Schedule::alpha_bars)
      .def("steps", &fedq::Schedule::steps);

  m.def("linear_schedule", &fedq::linear_schedule, py::arg("steps"), py::arg("beta_first"),
        py::arg("beta_last"), "Evenly spaced betas from beta_first to beta_last");

  py::class_<fedq::NoiseModelArch>(m, "NoiseModelArch", "Layer widths of the noise predictor")
      .def(py::init([](int time_embed, int hidden1, int hidden2) {
             return fedq::NoiseModelArch{time_embed, hidden1, hidden2};
           }),
           py::arg("time_embed") = 16, py::arg("hidden1") = 64, py::arg("hidden2") = 64)
      .def_readwrite("time_embed", &fedq::NoiseModelArch::time_embed)
      .def_readwrite("hidden1", &fedq::NoiseModelArch::hidden1)
      .def_readwrite("hidden2", &fedq::NoiseModelArch::hidden2)
      .def("input_dim", &fedq::NoiseModelArch::input_dim)
      .def("param_count", &fedq::NoiseModelArch::param_count);

  py::class_<fedq::NoiseModel>(m, "NoiseModel", "The noise predictor")
      .def(py::init<const fedq::NoiseModelArch&, std::uint64_t>(), py::arg("arch"),
           py::arg("init_seed"))
      .def(py::init<const fedq::NoiseModelArch&, fedq::WeightVector>(), py::arg("arch"),
           py::arg("weights"))
      .def_property_readonly("arch", &fedq::NoiseModel::arch)
      .def("weights", &fedq::NoiseModel::weights)
      .def("set_weights", &fedq::NoiseModel::set_weights, py::arg("weights"))
      .def("predict", &fedq::NoiseModel::predict, py::arg("x"), py::arg("t"),
           "Predicted noise for a point at timestep t (1-based)");

  m.def("sample", &fedq::sample, py::arg("model"), py::arg("schedule"), py::arg("count"),
        py::arg("seed"), "Draw points by running the reverse chain from Gaussian noise");
  m.def(
      "make_mixture_dataset",
      [](int count, int modes, double radius, double stddev, std::uint64_t seed) {
        fedq::Rng rng(seed);
        return fedq::make_mixture_dataset(count, modes, radius, stddev, rng);
      },
      py::arg("count"), py::arg("modes"), py::arg("radius"), py::arg("stddev"), py::arg("seed"),
      "Balanced Gaussian mixture on a ring");

  py::class_<fedq::Mat2>(m, "Mat2", "Symmetric 2x2 matrix [[a, b], [b, d]]")
      .def(py::init([](double a, double b, double c, double d) {
             return fedq::Mat2{a, b, c, d};
           }),
           py::arg("a") = 0.0, py::arg("b") = 0.0, py::arg("c") = 0.0, py::arg("d") = 0.0)
      .def_readwrite("a", &fedq::Mat2::a)
      .def_readwrite("b", &fedq::Mat2::b)
      .def_readwrite("c", &fedq::Mat2::c)
      .def_readwrite("d", &fedq::Mat2::d)
      .def("trace", &fedq::Mat2::trace)
      .def("det", &fedq::Mat2::det);

  py::class_<fedq::GaussianFit>(m, "GaussianFit", "Mean and covariance of a 2-D point cloud")
      .def(py::init<>())
      .def_readwrite("mean", &fedq::GaussianFit::mean)
      .def_readwrite("cov", &fedq::GaussianFit::cov);

  m.def("fit_gaussian", &fedq::fit_gaussian, py::arg("points"),
        "Moment-match a Gaussian to points");
  m.def("sqrt_spd_2x2", &fedq::sqrt_spd_2x2, py::arg("matrix"),
        "Principal square root of a symmetric positive semi-definite 2x2 matrix");
  m.def("frechet_2d", &fedq::frechet_2d, py::arg("a"), py::arg("b"),
        "Squared Frechet distance between two fitted Gaussians");

  m.def("partition_dataset", [](const std::vector<fedq::Point2>& points, int devices,
                                const std::string& mode, std::uint64_t seed) {
    return fedq::partition_dataset(points, devices, fedq::partition_mode_from(mode), seed);
  },
        py::arg("points"), py::arg("devices"), py::arg("mode"), py::arg("seed"),
        "Split points across devices, 'iid_uniform' or 'mode_skew'");
  m.def("aggregate_fedavg", &fedq::aggregate_fedavg, py::arg("updates"), py::arg("sizes"),
        "Shard-size-weighted average of parameter vectors");

  m.def("config_defaults_json", [] { return fedq::RunConfig::defaults().to_json().dump(2); },
        "The default run configuration as a JSON string");
  m.def(
      "normalize_config_json",
      [](const std::string& text) {
        return fedq::RunConfig::from_json(parse_config_text(text)).to_json().dump(2);
      },
      py::arg("config_json"),
      "Validate a configuration and return its full canonical emission");
  m.def(
      "run_training_json",
      [](const std::string& text, const std::string& quant_mode) {
        fedq::RunConfig cfg = fedq::RunConfig::from_json(parse_config_text(text));
        const fedq::QuantPolicy policy =
            fedq::QuantPolicy::parse(quant_mode.empty() ? cfg.quant_mode : quant_mode);
        return ledger_to_dict(fedq::run_training(cfg.fleet(policy)));
      },
      py::arg("config_json"), py::arg("quant_mode") = std::string(),
      "Run federated training from a JSON configuration and return the ledger");
  m.def(
      "cli_main",
      [](const std::vector<std::string>& args) {
        std::vector<std::string> argv_text;
        argv_text.reserve(args.size() + 1);
        argv_text.emplace_back("fedq");
        argv_text.insert(argv_text.end(), args.begin(), args.end());
        std::vector<const char*> argv;
        argv.reserve(argv_text.size());
        for (const std::string& a : argv_text) argv.push_back(a.c_str());
        return fedq::run_cli(static_cast<int>(argv.size()), argv.data());
      },
      py::arg("args"),
      "Invoke the command line entry point; returns the process exit code");
}
