#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>

namespace hyperq {

/// Counter-based generator.
///
/// Output i of a stream with key k is splitmix64_mix(k + (i + 1) * golden), so
/// a stream is fully described by (key, counter) and can be skipped or
/// replayed. `split(id)` derives an independent child key from the parent key
/// and a stream id without advancing the parent; every trial, edge, or layer
/// that needs randomness takes its own child stream. Real-valued draws use the
/// top 53 bits, so results are identical on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : key_(mix(seed ^ 0x6a09e667f3bcc908ULL)) {}

  Rng split(std::uint64_t stream) const;
  Rng split(std::string_view name) const;

  std::uint64_t next_u64();
  /// Uniform in [0, 1).
  double uniform01();
  /// Uniform in [lo, hi].
  double uniform(double lo, double hi);
  /// Uniform integer in [0, n); n must be positive.
  std::size_t uniform_index(std::size_t n);
  bool bernoulli(double p) { return uniform01() < p; }

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

  static std::uint64_t mix(std::uint64_t z);

 private:
  struct FromKey {};
  Rng(FromKey, std::uint64_t key) : key_(key) {}

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace hyperq
