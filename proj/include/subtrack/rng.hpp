// Copyright 2026 The Subtrack Authors. All Rights Reserved.
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


// Counter-based random streams. Every draw is a pure function of
// (seed, label, substream, position), so work may be split across threads
// without changing any value.

#ifndef SUBTRACK_RNG_HPP_
#define SUBTRACK_RNG_HPP_

#include <array>
#include <cmath>
#include <cstdint>
#include <string_view>

#include <Eigen/Dense>

namespace subtrack {

// Philox4x32 with 10 rounds (Salmon et al., SC'11).
inline std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                               std::array<std::uint32_t, 2> key) {
  constexpr std::uint32_t kM0 = 0xD2511F53u, kM1 = 0xCD9E8D57u;
  constexpr std::uint32_t kW0 = 0x9E3779B9u, kW1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = std::uint64_t{kM0} * ctr[0];
    const std::uint64_t p1 = std::uint64_t{kM1} * ctr[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kW0;
    key[1] += kW1;
  }
  return ctr;
}

// FNV-1a followed by a splitmix finalizer; only used to turn labels into keys.
inline std::uint64_t hash_label(std::uint64_t seed, std::string_view label) {
  std::uint64_t h = 1469598103934665603ull ^ seed;
  for (char c : label) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  h += 0x9E3779B97F4A7C15ull;
  h = (h ^ (h >> 30)) * 0xBF58476D1CE4E5B9ull;
  h = (h ^ (h >> 27)) * 0x94D049BB133111EBull;
  return h ^ (h >> 31);
}

class Stream {
 public:
  Stream(std::uint64_t seed, std::string_view label, std::uint64_t substream = 0)
      : key_(hash_label(seed, label)), substream_(substream) {}

  // Uniform on the open interval (0, 1) with 53 random bits.
  double uniform() {
    if (cached_ == 0) refill();
    const std::uint64_t bits = words_[2 - cached_];
    --cached_;
    return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Marsaglia polar method; implemented here so outputs do not depend on
  // the standard library's distribution code.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double k = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * k;
    has_spare_ = true;
    return u * k;
  }

  // Uniform integer in [0, bound) by rejection on 53-bit draws.
  std::uint64_t below(std::uint64_t bound) {
    const double b = static_cast<double>(bound);
    for (;;) {
      const auto v = static_cast<std::uint64_t>(uniform() * b);
      if (v < bound) return v;
    }
  }

  Eigen::MatrixXd gaussian(Eigen::Index rows, Eigen::Index cols, double sd = 1.0) {
    Eigen::MatrixXd out(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
      for (Eigen::Index i = 0; i < rows; ++i) out(i, j) = sd * normal();
    return out;
  }

 private:
  void refill() {
    const std::array<std::uint32_t, 4> ctr = {
        static_cast<std::uint32_t>(position_), static_cast<std::uint32_t>(position_ >> 32),
        static_cast<std::uint32_t>(substream_), static_cast<std::uint32_t>(substream_ >> 32)};
    const std::array<std::uint32_t, 2> key = {static_cast<std::uint32_t>(key_),
                                              static_cast<std::uint32_t>(key_ >> 32)};
    const auto out = philox4x32(ctr, key);
    words_[0] = (std::uint64_t{out[0]} << 32) | out[1];
    words_[1] = (std::uint64_t{out[2]} << 32) | out[3];
    ++position_;
    cached_ = 2;
  }

  std::uint64_t key_;
  std::uint64_t substream_;
  std::uint64_t position_ = 0;
  std::array<std::uint64_t, 2> words_{};
  int cached_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace subtrack

#endif  // SUBTRACK_RNG_HPP_
