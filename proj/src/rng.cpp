#include "knnmt/rng.hpp"

#include <cmath>
#include <numbers>

namespace knnmt {

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
}

std::uint64_t mix64(std::uint64_t x) noexcept {
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

RngStream::RngStream(std::uint64_t seed) noexcept : key_(mix64(seed ^ 0x6A09E667F3BCC908ULL)) {}

RngStream RngStream::child(std::uint64_t key) const noexcept {
  RngStream out(0);
  out.key_ = mix64(key_ ^ mix64(key + kGolden));
  out.counter_ = 0;
  return out;
}

RngStream RngStream::child(std::initializer_list<std::uint64_t> path) const noexcept {
  RngStream out = *this;
  out.counter_ = 0;
  for (std::uint64_t k : path) out = out.child(k);
  return out;
}

std::uint64_t RngStream::next_u64() noexcept {
  ++counter_;
  return mix64(key_ + counter_ * kGolden);
}

double RngStream::uniform() noexcept {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t RngStream::below(std::uint64_t n) noexcept {
  // Reject the incomplete top block so every residue is equally likely.
  const std::uint64_t limit = (~std::uint64_t{0}) - ((~std::uint64_t{0}) % n);
  std::uint64_t x = next_u64();
  while (x >= limit) x = next_u64();
  return x % n;
}

double RngStream::normal() noexcept {
  // 1 - u keeps the log argument in (0, 1].
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace knnmt
