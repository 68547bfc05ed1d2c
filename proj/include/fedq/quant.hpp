#pragma once

#include <cstdint>
#include <vector>

#include "fedq/errors.hpp"
#include "fedq/types.hpp"

namespace fedq {

/// Accuracy demand placed on an uplink payload: norm_bound caps the
/// expected squared norm of the weights, error_tolerance is the
/// largest acceptable expected squared quantization error.
struct ErrorDemand {
  double norm_bound = 0.0;
  double error_tolerance = 0.0;
};

struct LevelChoice {
  std::uint32_t levels = 0;
  std::uint32_t bits = 0;
};

/// Smallest power-of-two level count (at least 2) whose worst-case
/// expected squared error sqrt(norm_bound / (2 * error_tolerance))
/// meets the demand. Throws InvalidDemand for non-positive inputs or
/// demands needing more than 31 bits per parameter.
LevelChoice level_for_demand(const ErrorDemand& demand);

/// Uniform symmetric grid of `levels` points over [grid_lo, grid_hi].
/// scale is the grid end magnitude (max |w| of the source vector).
struct QuantSpec {
  std::uint32_t levels = 0;
  double scale = 0.0;
  double grid_lo = 0.0;
  double grid_hi = 0.0;

  /// Bits per stored index; levels is always a power of two.
  std::uint32_t bits() const noexcept;
  double step() const noexcept { return (grid_hi - grid_lo) / (levels - 1); }
  double grid_value(std::uint32_t index) const noexcept { return grid_lo + index * step(); }

  bool operator==(const QuantSpec&) const = default;
};

/// Grid spanning [-max|w|, +max|w|] with the given level count.
/// An all-zero vector gets the sentinel grid [-1, 1] so that encoding
/// stays well defined. Throws InvalidWeights for empty or non-finite
/// input, InvalidDemand for a level count that is not a power of two
/// of at least 2 or that needs more than 31 bits.
QuantSpec build_spec(const WeightVector& w, std::uint32_t levels);

/// Bit-packed grid indices plus the header needed to decode them.
/// Indices are packed least-significant-bit first at bits() bits each;
/// unused bits of the final byte are zero.
class QuantizedPayload {
 public:
  QuantizedPayload() = default;

  /// Wrap already-packed bytes. Throws CorruptPayload when the byte
  /// count does not match count and spec.
  QuantizedPayload(QuantSpec spec, std::uint64_t count, std::vector<std::uint8_t> packed);

  /// Pack explicit indices. Throws CorruptPayload when an index is
  /// out of range for the spec.
  static QuantizedPayload from_indices(const QuantSpec& spec,
                                       const std::vector<std::uint32_t>& indices);

  const QuantSpec& spec() const noexcept { return spec_; }
  std::uint64_t count() const noexcept { return count_; }
  const std::vector<std::uint8_t>& packed() const noexcept { return packed_; }

  std::uint32_t index_at(std::uint64_t i) const;
  std::vector<std::uint32_t> indices() const;

  /// Bits occupied by the packed body, count * bits-per-index.
  std::uint64_t body_bits() const noexcept;

  /// Little-endian wire format:
  ///   [count:u64][levels:u32][scale:f64][grid_lo:f64][grid_hi:f64][body]
  /// with body of ceil(count * bits / 8) bytes. Byte-exact and
  /// platform independent.
  std::vector<std::uint8_t> serialize() const;

  /// Inverse of serialize. Throws CorruptPayload on any header or
  /// size violation, including non-zero padding bits.
  static QuantizedPayload deserialize(const std::vector<std::uint8_t>& bytes);

  bool operator==(const QuantizedPayload&) const = default;

 private:
  QuantSpec spec_{};
  std::uint64_t count_ = 0;
  std::vector<std::uint8_t> packed_;
};

/// Unbiased stochastic rounding of w onto the grid: each entry moves
/// to one of its two bracketing grid points, the upper one with
/// probability equal to the fractional position between them. Entries
/// outside the grid saturate to the nearest end. The result for a
/// given (w, spec, seed) is identical across platforms and call
/// order. Throws InvalidWeights on non-finite entries.
QuantizedPayload quantize(const WeightVector& w, const QuantSpec& spec, std::uint64_t seed);

/// Map a payload back to grid values.
WeightVector dequantize(const QuantizedPayload& payload);

/// Uplink size in bits for a model of the given parameter count at
/// bits per parameter.
std::uint64_t payload_bits(std::uint64_t model_size, std::uint32_t bits);

struct ErrorReport {
  double mse = 0.0;    ///< Monte Carlo mean squared error over trials.
  double bound = 0.0;  ///< ||w||^2 / (2 L^2) reference bound.
  double ratio = 0.0;  ///< mse / bound; 0 when mse is 0.
};

/// Measure quantization error of w at the given level count over
/// independent trials. Diagnostic; the reported ratio is not asserted
/// against 1 because empirical error routinely exceeds the reference
/// bound.
ErrorReport empirical_error_report(const WeightVector& w, std::uint32_t levels, int trials,
                                   std::uint64_t seed);

}  // namespace fedq
