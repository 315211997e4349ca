// Copyright 2026 The svrpf Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SVRPF_RNG_HPP
#define SVRPF_RNG_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <vector>

/**
 * \file
 * \brief Counter-based, splittable random streams.
 *
 * Every stream is identified by a (seed, stream id) pair and produces the Philox4x32-10 keystream
 * of that pair. Output depends only on the pair and the number of draws taken so far, so Monte Carlo
 * replications can be assigned `stream id = run index` and executed in any order or thread.
 */

namespace svrpf {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30U)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27U)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31U);
}

/// One Philox4x32-10 block for the given counter and key.
inline std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr, std::array<std::uint32_t, 2> key) {
  constexpr std::uint64_t kMul0 = 0xD2511F53U;
  constexpr std::uint64_t kMul1 = 0xCD9E8D57U;
  constexpr std::uint32_t kWeyl0 = 0x9E3779B9U;
  constexpr std::uint32_t kWeyl1 = 0xBB67AE85U;
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = kMul0 * ctr[0];
    const std::uint64_t p1 = kMul1 * ctr[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32U);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32U);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kWeyl0;
    key[1] += kWeyl1;
  }
  return ctr;
}

}  // namespace detail

/// Deterministic random stream. Single-owner: copy or move it, never share it between threads.
/**
 * Satisfies UniformRandomBitGenerator so it can also drive `<random>` and `<algorithm>` facilities.
 */
class RandomStream {
 public:
  using result_type = std::uint64_t;

  RandomStream() : RandomStream(0, 0) {}
  RandomStream(std::uint64_t seed, std::uint64_t stream_id) : seed_{seed}, stream_id_{stream_id} {}

  [[nodiscard]] std::uint64_t seed() const noexcept { return seed_; }
  [[nodiscard]] std::uint64_t stream_id() const noexcept { return stream_id_; }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return next_u64(); }

  std::uint64_t next_u64() {
    if (buffered_ == 0) {
      refill();
    }
    return buffer_[2 - buffered_--];
  }

  /// Uniform real in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11U) * 0x1.0p-53; }

  /// Normal deviate with the given mean and standard deviation; `sd == 0` returns `mean` exactly.
  double gaussian(double mean, double sd) {
    if (sd == 0.0) {
      return mean;
    }
    return mean + sd * standard_normal();
  }

  double standard_normal() {
    if (has_spare_normal_) {
      has_spare_normal_ = false;
      return spare_normal_;
    }
    // Box-Muller; 1 - u lies in (0, 1] so the log is finite.
    const double radius = std::sqrt(-2.0 * std::log(1.0 - uniform()));
    const double angle = 2.0 * std::numbers::pi * uniform();
    spare_normal_ = radius * std::sin(angle);
    has_spare_normal_ = true;
    return radius * std::cos(angle);
  }

  /// Derives `count` child streams sharing this stream's seed.
  /**
   * Children are keyed by a value drawn from this stream, so they are pairwise distinct, reproducible
   * from an identical parent state, and do not overlap the parent's subsequent output.
   */
  std::vector<RandomStream> split(std::size_t count) {
    const std::uint64_t key = next_u64();
    std::vector<RandomStream> children;
    children.reserve(count);
    for (std::size_t j = 0; j < count; ++j) {
      children.emplace_back(seed_, detail::splitmix64(key + 0x9E3779B97F4A7C15ULL * (j + 1)));
    }
    return children;
  }

 private:
  void refill() {
    const std::array<std::uint32_t, 4> ctr = {
        static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32U),
        static_cast<std::uint32_t>(stream_id_), static_cast<std::uint32_t>(stream_id_ >> 32U)};
    const std::array<std::uint32_t, 2> key = {static_cast<std::uint32_t>(seed_),
                                              static_cast<std::uint32_t>(seed_ >> 32U)};
    const auto out = detail::philox4x32(ctr, key);
    buffer_[0] = (static_cast<std::uint64_t>(out[0]) << 32U) | out[1];
    buffer_[1] = (static_cast<std::uint64_t>(out[2]) << 32U) | out[3];
    buffered_ = 2;
    ++block_;
  }

  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t block_ = 0;
  std::array<std::uint64_t, 2> buffer_{};
  int buffered_ = 0;
  double spare_normal_ = 0.0;
  bool has_spare_normal_ = false;
};

}  // namespace svrpf

#endif
