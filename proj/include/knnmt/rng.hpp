#pragma once

#include <cstdint>
#include <initializer_list>

namespace knnmt {

/// Counter-based random stream. The i-th output is a pure function of
/// (key, i), so streams can be derived hierarchically with `child()` and
/// consumed in any order without affecting each other.
///
/// Distributions are implemented here rather than with <random> so that
/// draws are bit-identical across standard library implementations.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) noexcept;

  /// Independent sub-stream for `key`. Does not advance this stream.
  RngStream child(std::uint64_t key) const noexcept;
  RngStream child(std::initializer_list<std::uint64_t> path) const noexcept;

  std::uint64_t next_u64() noexcept;
  /// Uniform on [0, 1) with 53 bits of precision.
  double uniform() noexcept;
  /// Uniform integer on [0, n). Unbiased (rejection sampling). n > 0.
  std::uint64_t below(std::uint64_t n) noexcept;
  /// Standard normal via Box-Muller; consumes exactly two words per call.
  double normal() noexcept;

  std::uint64_t key() const noexcept { return key_; }
  std::uint64_t position() const noexcept { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x) noexcept;

}  // namespace knnmt
