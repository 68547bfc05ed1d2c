#include "fedq/quant.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <limits>

#include "fedq/rng.hpp"

namespace fedq {
namespace {

constexpr std::uint32_t kMaxBits = 31;

// Entries this close to a grid point (in index units) are treated as
// exact hits, so grid points are fixed points of quantization.
constexpr double kGridSnap = 1e-9;

bool is_pow2(std::uint64_t v) { return v != 0 && (v & (v - 1)) == 0; }

void check_levels(std::uint64_t levels) {
  if (levels < 2 || !is_pow2(levels)) {
    throw InvalidDemand("level count must be a power of two of at least 2, got " +
                        std::to_string(levels));
  }
  if (levels > (std::uint64_t{1} << kMaxBits)) {
    throw InvalidDemand("level count " + std::to_string(levels) + " exceeds " +
                        std::to_string(kMaxBits) + " bits per parameter");
  }
}

void check_spec(const QuantSpec& spec) {
  check_levels(spec.levels);
  if (!std::isfinite(spec.grid_lo) || !std::isfinite(spec.grid_hi) ||
      !(spec.grid_lo < spec.grid_hi)) {
    throw CorruptPayload("grid bounds must be finite with grid_lo < grid_hi");
  }
  if (!std::isfinite(spec.scale) || !(spec.scale > 0.0)) {
    throw CorruptPayload("grid scale must be finite and positive");
  }
}

std::uint64_t packed_size(std::uint64_t count, std::uint32_t bits) {
  return (count * bits + 7) / 8;
}

std::vector<std::uint8_t> pack_indices(const std::vector<std::uint32_t>& idx,
                                       std::uint32_t bits) {
  std::vector<std::uint8_t> out(packed_size(idx.size(), bits), 0);
  std::uint64_t acc = 0;
  unsigned filled = 0;
  std::size_t byte = 0;
  for (std::uint32_t v : idx) {
    acc |= std::uint64_t{v} << filled;
    filled += bits;
    while (filled >= 8) {
      out[byte++] = static_cast<std::uint8_t>(acc);
      acc >>= 8;
      filled -= 8;
    }
  }
  if (filled > 0) out[byte] = static_cast<std::uint8_t>(acc);
  return out;
}

template <typename F>
void unpack_indices(const std::vector<std::uint8_t>& bytes, std::uint64_t count,
                    std::uint32_t bits, F&& emit) {
  const std::uint64_t mask = (std::uint64_t{1} << bits) - 1;
  std::uint64_t acc = 0;
  unsigned filled = 0;
  std::size_t byte = 0;
  for (std::uint64_t i = 0; i < count; ++i) {
    while (filled < bits) {
      acc |= std::uint64_t{bytes[byte++]} << filled;
      filled += 8;
    }
    emit(static_cast<std::uint32_t>(acc & mask));
    acc >>= bits;
    filled -= bits;
  }
}

void store_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void store_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void store_f64(std::vector<std::uint8_t>& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof bits);
  store_u64(out, bits);
}

std::uint64_t load_u64(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t{p[i]} << (8 * i);
  return v;
}

std::uint32_t load_u32(const std::uint8_t* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t{p[i]} << (8 * i);
  return v;
}

double load_f64(const std::uint8_t* p) {
  const std::uint64_t bits = load_u64(p);
  double v;
  std::memcpy(&v, &bits, sizeof v);
  return v;
}

constexpr std::size_t kHeaderBytes = 8 + 4 + 8 + 8 + 8;

}  // namespace

std::uint32_t QuantSpec::bits() const noexcept {
  return levels < 2 ? 0 : static_cast<std::uint32_t>(std::bit_width(levels) - 1);
}

LevelChoice level_for_demand(const ErrorDemand& demand) {
  if (!std::isfinite(demand.norm_bound) || !(demand.norm_bound > 0.0)) {
    throw InvalidDemand("norm bound must be finite and positive");
  }
  if (!std::isfinite(demand.error_tolerance) || !(demand.error_tolerance > 0.0)) {
    throw InvalidDemand("error tolerance must be finite and positive");
  }
  const double target = std::sqrt(demand.norm_bound / (2.0 * demand.error_tolerance));
  if (target > static_cast<double>(std::uint64_t{1} << kMaxBits)) {
    throw InvalidDemand("demand needs more than " + std::to_string(kMaxBits) +
                        " bits per parameter");
  }
  std::uint32_t levels = 2;
  while (static_cast<double>(levels) < target) levels <<= 1;
  return {levels, static_cast<std::uint32_t>(std::bit_width(levels) - 1)};
}

QuantSpec build_spec(const WeightVector& w, std::uint32_t levels) {
  check_levels(levels);
  if (w.empty()) throw InvalidWeights("weight vector is empty");
  double peak = 0.0;
  for (double x : w) {
    if (!std::isfinite(x)) throw InvalidWeights("weight vector has a non-finite entry");
    peak = std::max(peak, std::fabs(x));
  }
  if (peak == 0.0) peak = 1.0;
  return QuantSpec{levels, peak, -peak, peak};
}

QuantizedPayload::QuantizedPayload(QuantSpec spec, std::uint64_t count,
                                   std::vector<std::uint8_t> packed)
    : spec_(spec), count_(count), packed_(std::move(packed)) {
  check_spec(spec_);
  if (count_ == 0) throw CorruptPayload("payload must hold at least one index");
  if (packed_.size() != packed_size(count_, spec_.bits())) {
    throw CorruptPayload("packed body size does not match count and bit width");
  }
}

QuantizedPayload QuantizedPayload::from_indices(const QuantSpec& spec,
                                                const std::vector<std::uint32_t>& indices) {
  check_spec(spec);
  if (indices.empty()) throw CorruptPayload("payload must hold at least one index");
  for (std::uint32_t v : indices) {
    if (v >= spec.levels) {
      throw CorruptPayload("index " + std::to_string(v) + " out of range for " +
                           std::to_string(spec.levels) + " levels");
    }
  }
  return QuantizedPayload(spec, indices.size(), pack_indices(indices, spec.bits()));
}

std::uint32_t QuantizedPayload::index_at(std::uint64_t i) const {
  const std::uint32_t bits = spec_.bits();
  const std::uint64_t pos = i * bits;
  std::uint64_t acc = 0;
  const std::size_t first = pos >> 3;
  const std::size_t last = std::min(packed_.size(), first + 8);
  for (std::size_t b = first; b < last; ++b) {
    acc |= std::uint64_t{packed_[b]} << (8 * (b - first));
  }
  return static_cast<std::uint32_t>((acc >> (pos & 7)) & ((std::uint64_t{1} << bits) - 1));
}

std::vector<std::uint32_t> QuantizedPayload::indices() const {
  std::vector<std::uint32_t> out;
  out.reserve(count_);
  unpack_indices(packed_, count_, spec_.bits(), [&](std::uint32_t v) { out.push_back(v); });
  return out;
}

std::uint64_t QuantizedPayload::body_bits() const noexcept { return count_ * spec_.bits(); }

std::vector<std::uint8_t> QuantizedPayload::serialize() const {
  std::vector<std::uint8_t> out;
  out.reserve(kHeaderBytes + packed_.size());
  store_u64(out, count_);
  store_u32(out, spec_.levels);
  store_f64(out, spec_.scale);
  store_f64(out, spec_.grid_lo);
  store_f64(out, spec_.grid_hi);
  out.insert(out.end(), packed_.begin(), packed_.end());
  return out;
}

QuantizedPayload QuantizedPayload::deserialize(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < kHeaderBytes) throw CorruptPayload("payload shorter than its header");
  const std::uint64_t count = load_u64(bytes.data());
  const std::uint32_t levels = load_u32(bytes.data() + 8);
  QuantSpec spec;
  spec.levels = levels;
  spec.scale = load_f64(bytes.data() + 12);
  spec.grid_lo = load_f64(bytes.data() + 20);
  spec.grid_hi = load_f64(bytes.data() + 28);
  try {
    check_spec(spec);
  } catch (const Error& e) {
    throw CorruptPayload(std::string("payload header invalid: ") + e.what());
  }
  if (count == 0) throw CorruptPayload("payload must hold at least one index");
  const std::uint64_t body = packed_size(count, spec.bits());
  if (bytes.size() != kHeaderBytes + body) {
    throw CorruptPayload("payload size does not match its header");
  }
  std::vector<std::uint8_t> packed(bytes.begin() + kHeaderBytes, bytes.end());
  const unsigned pad = static_cast<unsigned>(body * 8 - count * spec.bits());
  if (pad > 0 && (packed.back() >> (8 - pad)) != 0) {
    throw CorruptPayload("padding bits of the final byte must be zero");
  }
  return QuantizedPayload(spec, count, std::move(packed));
}

QuantizedPayload quantize(const WeightVector& w, const QuantSpec& spec, std::uint64_t seed) {
  check_spec(spec);
  if (w.empty()) throw InvalidWeights("weight vector is empty");
  const double lo = spec.grid_lo;
  const double hi = spec.grid_hi;
  const double step = spec.step();
  const std::uint32_t top = spec.levels - 1;
  std::vector<std::uint32_t> idx(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double x = w[i];
    if (!std::isfinite(x)) throw InvalidWeights("weight vector has a non-finite entry");
    std::uint32_t k;
    if (x <= lo) {
      k = 0;
    } else if (x >= hi) {
      k = top;
    } else {
      const double u = (x - lo) / step;
      double base = std::floor(u);
      if (base > top - 1) base = top - 1;
      const std::uint32_t l = static_cast<std::uint32_t>(base);
      const double frac = u - base;
      if (frac <= kGridSnap) {
        k = l;
      } else if (frac >= 1.0 - kGridSnap) {
        k = l + 1;
      } else {
        k = l + (unit_uniform_at(seed, i) < frac ? 1u : 0u);
      }
    }
    idx[i] = k;
  }
  return QuantizedPayload(spec, idx.size(), pack_indices(idx, spec.bits()));
}

WeightVector dequantize(const QuantizedPayload& payload) {
  const QuantSpec& spec = payload.spec();
  WeightVector out;
  out.reserve(payload.count());
  unpack_indices(payload.packed(), payload.count(), spec.bits(),
                 [&](std::uint32_t v) { out.push_back(spec.grid_value(v)); });
  return out;
}

std::uint64_t payload_bits(std::uint64_t model_size, std::uint32_t bits) {
  if (model_size == 0) throw InvalidDemand("model size must be positive");
  if (bits == 0 || bits > 64) throw InvalidDemand("bits per parameter must be in [1, 64]");
  return model_size * bits;
}

ErrorReport empirical_error_report(const WeightVector& w, std::uint32_t levels, int trials,
                                   std::uint64_t seed) {
  if (trials < 1) throw InvalidDemand("trial count must be positive");
  const QuantSpec spec = build_spec(w, levels);
  double norm_sq = 0.0;
  for (double x : w) norm_sq += x * x;

  double mse_sum = 0.0;
  for (int t = 0; t < trials; ++t) {
    const WeightVector back = dequantize(quantize(w, spec, derive_seed(seed, t)));
    double err = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double d = back[i] - w[i];
      err += d * d;
    }
    mse_sum += err;
  }

  ErrorReport report;
  report.mse = mse_sum / trials;
  report.bound = norm_sq / (2.0 * static_cast<double>(spec.levels) * spec.levels);
  if (report.mse == 0.0) {
    report.ratio = 0.0;
  } else if (report.bound == 0.0) {
    report.ratio = std::numeric_limits<double>::infinity();
  } else {
    report.ratio = report.mse / report.bound;
  }
  return report;
}

}  // namespace fedq
