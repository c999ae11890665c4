#include "segkit/rng.hpp"

#include <cmath>
#include <numbers>

namespace segkit {

std::uint64_t stream_id(std::string_view name) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : name) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t stream) noexcept : key_(mix64(seed ^ mix64(stream))) {}

std::uint64_t CounterRng::next() noexcept { return mix64(key_ + counter_++ * 0x9e3779b97f4a7c15ULL); }

double CounterRng::uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

double CounterRng::uniform_open() noexcept { return (static_cast<double>(next() >> 12) + 0.5) * 0x1.0p-52; }

double CounterRng::normal() noexcept {
  const double u1 = uniform_open();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

int CounterRng::uniform_int(int lo, int hi) noexcept {
  const std::uint64_t range = static_cast<std::uint64_t>(static_cast<std::int64_t>(hi) - lo) + 1;
  const std::uint64_t limit = -range % range;
  for (;;) {
    const unsigned __int128 m = static_cast<unsigned __int128>(next()) * range;
    if (static_cast<std::uint64_t>(m) >= limit) return lo + static_cast<int>(m >> 64);
  }
}

int CounterRng::binomial(int n, double p) noexcept {
  int k = 0;
  for (int i = 0; i < n; ++i) k += bernoulli(p);
  return k;
}

std::size_t CounterRng::categorical(std::span<const double> weights) noexcept {
  double total = 0.0;
  for (double w : weights) total += w;
  double u = uniform() * total;
  std::size_t last = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    last = i;
    if (u < weights[i]) return i;
    u -= weights[i];
  }
  return last;
}

}  // namespace segkit
