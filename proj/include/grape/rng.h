// Copyright 2026 The grape-dp Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#ifndef GRAPE_RNG_H_
#define GRAPE_RNG_H_

#include <cstdint>
#include <initializer_list>

namespace grape {

// SplitMix64 finalizer. Bijective on 64-bit words.
constexpr std::uint64_t Mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Order-sensitive hash of a word sequence, used to derive stream seeds.
std::uint64_t HashWords(std::initializer_list<std::uint64_t> words);

// Counter-based SplitMix64 stream: draw k of seed s is
// Mix64(s + (k + 1) * 0x9E3779B97F4A7C15). The state is the pair
// (seed, counter), so a stream is copied by value and replayed exactly.
//
// Reference output for seed 0:
//   0xE220A8397B1DCDAF 0x6E789E6AA1B965F4 0x06C45D188009454F 0xF88BB8A8724C81EC
class RngStream {
 public:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

  explicit RngStream(std::uint64_t seed = 0, std::uint64_t counter = 0)
      : seed_(seed), counter_(counter) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t counter() const { return counter_; }

  std::uint64_t NextU64() {
    ++counter_;
    return Mix64(seed_ + counter_ * kGamma);
  }

  // Uniform on (0, 1], 53 bits.
  double NextUniform() {
    return static_cast<double>((NextU64() >> 11) + 1) * 0x1.0p-53;
  }

  // Uniform integer in [0, bound). Rejection sampling keeps it unbiased.
  std::uint64_t NextBelow(std::uint64_t bound);

  // Standard normal via Box-Muller; consumes exactly two draws.
  double NextNormal();

  // Independent stream keyed by `tag`; does not advance this stream.
  RngStream Substream(std::uint64_t tag) const {
    return RngStream(HashWords({seed_, counter_, tag}));
  }

  friend bool operator==(const RngStream&, const RngStream&) = default;

 private:
  std::uint64_t seed_;
  std::uint64_t counter_;
};

}  // namespace grape

#endif  // GRAPE_RNG_H_
