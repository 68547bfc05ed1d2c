"""On-demand quantized federated training over a modeled edge network.

Thin re-export of the compiled module: device and channel models, the
time-split energy solver with its grid-search oracle, stochastic
quantization with a bit-exact codec, a small 2-D diffusion model,
Gaussian distribution metrics, and config-driven federated training.
"""

from ._core import (
    AllocationDecision,
    ChannelParams,
    ConfigError,
    CorruptPayload,
    DeviceProfile,
    EnergySplit,
    Error,
    ErrorReport,
    GaussianFit,
    GridMinimum,
    InfeasibleBudget,
    InfeasibleSplit,
    InvalidDemand,
    LevelChoice,
    Mat2,
    NoiseModel,
    NoiseModelArch,
    NuTraceRow,
    QuantSpec,
    QuantizedPayload,
    Schedule,
    SolveResult,
    SplitBounds,
    aggregate_fedavg,
    build_spec,
    cli_main,
    comm_energy_full_deadline,
    config_defaults_json,
    dequantize,
    empirical_error_report,
    fit_gaussian,
    frechet_2d,
    grid_search_allocation,
    level_for_demand,
    linear_schedule,
    make_mixture_dataset,
    noise_psd_from_dbm_per_mhz,
    normalize_config_json,
    nu_trace_csv,
    partition_dataset,
    payload_bits,
    power_for_rate,
    quantize,
    run_training_json,
    sample,
    solve_allocation,
    solve_allocation_for_bits,
    split_bounds,
    split_bounds_for_bits,
    sqrt_spd_2x2,
    total_energy_split,
    uplink_rate,
)

__all__ = [
    "AllocationDecision",
    "ChannelParams",
    "ConfigError",
    "CorruptPayload",
    "DeviceProfile",
    "EnergySplit",
    "Error",
    "ErrorReport",
    "GaussianFit",
    "GridMinimum",
    "InfeasibleBudget",
    "InfeasibleSplit",
    "InvalidDemand",
    "LevelChoice",
    "Mat2",
    "NoiseModel",
    "NoiseModelArch",
    "NuTraceRow",
    "QuantSpec",
    "QuantizedPayload",
    "Schedule",
    "SolveResult",
    "SplitBounds",
    "aggregate_fedavg",
    "build_spec",
    "cli_main",
    "comm_energy_full_deadline",
    "config_defaults_json",
    "dequantize",
    "empirical_error_report",
    "fit_gaussian",
    "frechet_2d",
    "grid_search_allocation",
    "level_for_demand",
    "linear_schedule",
    "make_mixture_dataset",
    "noise_psd_from_dbm_per_mhz",
    "normalize_config_json",
    "nu_trace_csv",
    "partition_dataset",
    "payload_bits",
    "power_for_rate",
    "quantize",
    "run_training_json",
    "sample",
    "solve_allocation",
    "solve_allocation_for_bits",
    "split_bounds",
    "split_bounds_for_bits",
    "sqrt_spd_2x2",
    "total_energy_split",
    "uplink_rate",
]
