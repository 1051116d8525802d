#pragma once

#include <cstdint>
#include <string_view>

namespace rcmcl {

// Counter-based splittable generator. A draw is a pure function of
// (key, counter), where key mixes seed and stream, so a given (seed, stream)
// yields the same sequence on every platform and child streams never share
// state with their parent or siblings.
class SplitRng {
 public:
  explicit SplitRng(std::uint64_t seed, std::uint64_t stream = 0) noexcept;

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream() const noexcept { return stream_; }

  SplitRng child(std::string_view label) const noexcept;
  SplitRng child(std::uint64_t index) const noexcept;

  std::uint64_t next_u64() noexcept;
  // Uniform in [0, 1) with 53 random bits.
  double uniform() noexcept;
  double uniform(double lo, double hi) noexcept;
  // Uniform integer in [0, n); n > 0. Unbiased (rejection sampling).
  std::uint64_t uniform_index(std::uint64_t n) noexcept;
  // Box-Muller on the generator's own uniforms; deterministic across libstdc++/libc++.
  double normal() noexcept;
  double normal(double mean, double stddev) noexcept;
  bool bernoulli(double p) noexcept;

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

std::uint64_t mix64(std::uint64_t x) noexcept;
// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes) noexcept;

}  // namespace rcmcl
