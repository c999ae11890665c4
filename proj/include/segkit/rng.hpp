#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>

namespace segkit {

// SplitMix64 output function.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// 64-bit FNV-1a, used to turn stage and purpose names into stream ids.
std::uint64_t stream_id(std::string_view name) noexcept;

/// Counter-based generator. Draw i of stream s under seed k is
///   mix64(mix64(k ^ mix64(s)) + i * 0x9e3779b97f4a7c15)
/// so any draw can be recomputed from (k, s, i) alone.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream) noexcept;

  std::uint64_t next() noexcept;
  std::uint64_t counter() const noexcept { return counter_; }

  double uniform() noexcept;       // [0, 1), 53 bits
  double uniform_open() noexcept;  // (0, 1)
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
  // Box-Muller on two uniforms; the sine branch is discarded.
  double normal() noexcept;
  int uniform_int(int lo, int hi) noexcept;  // inclusive, Lemire rejection
  bool bernoulli(double p) noexcept { return uniform() < p; }
  int binomial(int n, double p) noexcept;
  // Index drawn proportional to non-negative weights.
  std::size_t categorical(std::span<const double> weights) noexcept;

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace segkit
