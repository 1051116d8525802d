#include "rcmcl/rng.hpp"

#include <cmath>
#include <numbers>

namespace rcmcl {

std::uint64_t mix64(std::uint64_t x) noexcept {
  // SplitMix64 finalizer.
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a64(std::string_view bytes) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

SplitRng::SplitRng(std::uint64_t seed, std::uint64_t stream) noexcept
    : seed_(seed), stream_(stream), key_(mix64(mix64(seed) ^ mix64(stream ^ 0x5bd1e9955bd1e995ULL))) {}

SplitRng SplitRng::child(std::string_view label) const noexcept {
  return SplitRng(seed_, mix64(stream_ ^ fnv1a64(label)));
}

SplitRng SplitRng::child(std::uint64_t index) const noexcept {
  return SplitRng(seed_, mix64(stream_ + 0x632be59bd9b4e019ULL * (index + 1)));
}

std::uint64_t SplitRng::next_u64() noexcept {
  // Two rounds keyed by the stream; the counter is injective within a stream.
  const std::uint64_t c = counter_++;
  return mix64(key_ ^ mix64(c));
}

double SplitRng::uniform() noexcept {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double SplitRng::uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

std::uint64_t SplitRng::uniform_index(std::uint64_t n) noexcept {
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return x % n;
}

double SplitRng::normal() noexcept {
  if (has_spare_) {
    has_spare_ = false;
    return spare_normal_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_normal_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

double SplitRng::normal(double mean, double stddev) noexcept { return mean + stddev * normal(); }

bool SplitRng::bernoulli(double p) noexcept { return uniform() < p; }

}  // namespace rcmcl
