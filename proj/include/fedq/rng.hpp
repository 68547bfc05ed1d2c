#pragma once

#include <cmath>
#include <cstdint>

namespace fedq {

/// SplitMix64 finalizer. Bijective on 64-bit words; the basis of
/// every random stream in the library.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Derive an independent stream key from a parent key and a tag.
/// derive_seed(s, a) and derive_seed(s, b) are unrelated for a != b,
/// so siblings can be consumed in any order without interference.
constexpr std::uint64_t derive_seed(std::uint64_t key, std::uint64_t tag) noexcept {
  return mix64(key ^ mix64(tag ^ 0xd1b54a32d192ed03ULL));
}

/// Counter-based pseudo-random stream. Copyable; copies continue the
/// sequence independently from the same position.
class Rng {
 public:
  explicit Rng(std::uint64_t key) : key_(key) {}

  /// Independent child stream; unaffected by draws on *this.
  [[nodiscard]] Rng child(std::uint64_t tag) const { return Rng(derive_seed(key_, tag)); }

  std::uint64_t next_u64() { return mix64(key_ + 0x9e3779b97f4a7c15ULL * ++counter_); }

  /// Uniform double in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t uniform_int(std::uint64_t n) { return next_u64() % n; }

  /// Standard normal deviate (Box-Muller, cached pair).
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    constexpr double two_pi = 6.283185307179586476925286766559;
    spare_ = r * std::sin(two_pi * u2);
    have_spare_ = true;
    return r * std::cos(two_pi * u2);
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

/// Value i of the unit-uniform stream identified by key, without
/// carrying stream state. Used where each element of a vector needs
/// its own reproducible draw.
inline double unit_uniform_at(std::uint64_t key, std::uint64_t index) {
  return static_cast<double>(mix64(key + 0x9e3779b97f4a7c15ULL * (index + 1)) >> 11) * 0x1.0p-53;
}

}  // namespace fedq
