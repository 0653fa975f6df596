// Copyright 2026 The Pricure Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef PRICURE_RNG_H_
#define PRICURE_RNG_H_

#include <cstdint>
#include <random>
#include <string_view>

namespace pricure {

// Deterministic pseudo-random stream. Every consumer of randomness in a run
// gets its own named substream of the manifest seed, so replaying a manifest
// reproduces every random draw.
class Rng {
 public:
  explicit Rng(uint64_t seed);

  // Independent stream for `name` under `seed`; distinct names give
  // unrelated streams.
  static Rng Substream(uint64_t seed, std::string_view name);
  Rng Fork(std::string_view name);

  uint64_t NextU64() { return engine_(); }

  // Uniform over [0, bound); rejection sampling, no modulo bias.
  uint64_t UniformBelow(uint64_t bound);

  // Uniform over [lo, hi] (inclusive), signed.
  int64_t UniformInt(int64_t lo, int64_t hi);

  // Uniform double in [0, 1) with 53 random bits.
  double UniformUnit();

  double UniformReal(double lo, double hi) {
    return lo + (hi - lo) * UniformUnit();
  }

  // Standard normal via Box-Muller (no cached second value, so the stream
  // position depends only on the number of calls).
  double Normal();

  // Satisfies UniformRandomBitGenerator for <algorithm> shuffles.
  using result_type = uint64_t;
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~uint64_t{0}; }
  result_type operator()() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

uint64_t SplitMix64(uint64_t x);

}  // namespace pricure

#endif  // PRICURE_RNG_H_
