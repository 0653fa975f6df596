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

#include "pricure/rng.h"

#include <cmath>
#include <numbers>

namespace pricure {
namespace {

uint64_t HashName(std::string_view name) {
  // FNV-1a, 64 bit.
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : name) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

uint64_t SplitMix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Rng::Rng(uint64_t seed) {
  std::seed_seq seq{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32),
                    static_cast<uint32_t>(SplitMix64(seed)),
                    static_cast<uint32_t>(SplitMix64(seed) >> 32)};
  engine_.seed(seq);
}

Rng Rng::Substream(uint64_t seed, std::string_view name) {
  return Rng(SplitMix64(seed ^ SplitMix64(HashName(name))));
}

Rng Rng::Fork(std::string_view name) {
  return Substream(NextU64(), name);
}

uint64_t Rng::UniformBelow(uint64_t bound) {
  if (bound == 0) return 0;
  // 2^64 mod bound; draws below it would bias the low residues.
  const uint64_t threshold = (0 - bound) % bound;
  uint64_t v;
  do {
    v = engine_();
  } while (v < threshold);
  return v % bound;
}

int64_t Rng::UniformInt(int64_t lo, int64_t hi) {
  const uint64_t span = static_cast<uint64_t>(hi) - static_cast<uint64_t>(lo);
  if (span == ~uint64_t{0}) return static_cast<int64_t>(engine_());
  return static_cast<int64_t>(static_cast<uint64_t>(lo) + UniformBelow(span + 1));
}

double Rng::UniformUnit() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::Normal() {
  double u1;
  do {
    u1 = UniformUnit();
  } while (u1 <= 0.0);
  const double u2 = UniformUnit();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace pricure
