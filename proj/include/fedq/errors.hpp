#pragma once

#include <stdexcept>
#include <string>

namespace fedq {

/// Base class for every error thrown by this library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Quantization error demand that no grid can satisfy, or demand
/// parameters outside their valid ranges.
struct InvalidDemand : Error {
  using Error::Error;
};

/// Weight vector is empty or contains non-finite entries.
struct InvalidWeights : Error {
  using Error::Error;
};

/// Serialized payload whose header or body fails validation.
struct CorruptPayload : Error {
  using Error::Error;
};

/// Computation frequency outside the device's supported range.
struct FrequencyOutOfRange : Error {
  using Error::Error;
};

/// Transmission at a non-positive rate.
struct ZeroRate : Error {
  using Error::Error;
};

/// Time split whose implied frequency or power cannot be realized
/// by the device.
struct InfeasibleSplit : Error {
  using Error::Error;
};

/// Round budget too small for any feasible split.
struct InfeasibleBudget : Error {
  using Error::Error;
};

/// Non-positive dual multiplier where a positive one is required.
struct InvalidMultiplier : Error {
  using Error::Error;
};

/// Too few samples to estimate the requested statistic.
struct TooFewSamples : Error {
  using Error::Error;
};

/// Covariance input that is not symmetric positive semi-definite
/// within tolerance.
struct InvalidCovariance : Error {
  using Error::Error;
};

/// Noise schedule parameters outside their valid ranges.
struct InvalidSchedule : Error {
  using Error::Error;
};

/// Mismatched tensor or vector dimensions.
struct ShapeError : Error {
  using Error::Error;
};

/// Non-finite value produced during training or sampling.
struct NumericalOverflow : Error {
  using Error::Error;
};

/// Malformed, incomplete, or out-of-range run configuration.
struct ConfigError : Error {
  using Error::Error;
};

}  // namespace fedq
