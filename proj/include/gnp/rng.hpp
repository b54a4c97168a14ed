#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace gnp {

/// Stream purposes. Different purposes under the same seed never share draws.
enum class Purpose : std::uint64_t {
  init = 1,
  train_task = 2,
  validation_task = 3,
  test_task = 4,
  sample = 5,
  lv_rates = 6,
  lv_events = 7,
  threshold = 8,
  fixture = 9,
  bench = 10,
};

/// Counter-based generator: draw i of stream (seed, index, purpose) is a pure
/// function of those four values, so streams can be consumed in any order or
/// on any thread without coordination.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t index = 0, Purpose purpose = Purpose::sample)
      : key_(derive_key(seed, index, static_cast<std::uint64_t>(purpose))) {}

  std::uint64_t next_u64() noexcept { return mix(key_ + (++counter_) * kGamma); }

  /// Uniform on the open interval (0, 1).
  double uniform() noexcept { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller (consumes two draws).
  double normal() noexcept {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  /// Exponential with the given mean.
  double exponential(double mean) noexcept { return -mean * std::log(uniform()); }

  /// Uniform integer in [lo, hi], unbiased.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) noexcept {
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    if (span == 0) return static_cast<std::int64_t>(next_u64());
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
    std::uint64_t x = next_u64();
    while (x >= limit) x = next_u64();
    return lo + static_cast<std::int64_t>(x % span);
  }

  std::uint64_t draws() const noexcept { return counter_; }

  static constexpr std::uint64_t mix(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

 private:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

  static constexpr std::uint64_t derive_key(std::uint64_t seed, std::uint64_t index, std::uint64_t tag) noexcept {
    std::uint64_t k = mix(seed + kGamma);
    k = mix(k ^ (index * 0xD1B54A32D192ED03ULL + 1));
    k = mix(k ^ (tag * 0xABC98388FB8FAC03ULL + 7));
    return k;
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace gnp
