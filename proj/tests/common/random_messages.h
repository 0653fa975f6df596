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

// Random well-formed messages of every type, for wire fuzzing.

#ifndef PRICURE_TESTS_COMMON_RANDOM_MESSAGES_H_
#define PRICURE_TESTS_COMMON_RANDOM_MESSAGES_H_

#include <array>
#include <vector>

#include "pricure/rng.h"
#include "pricure/sharing.h"
#include "pricure/wire.h"

namespace pricure::testing {

inline const RingModulus kQ;

inline RingTensor RandomTensor(Rng& rng) {
  const uint32_t rank = static_cast<uint32_t>(rng.UniformInt(0, 3));
  std::vector<uint32_t> dims;
  size_t n = 1;
  for (uint32_t i = 0; i < rank; ++i) {
    dims.push_back(static_cast<uint32_t>(rng.UniformInt(0, 4)));
    n *= dims.back();
  }
  std::vector<uint64_t> data(n);
  for (auto& v : data) v = rng.UniformBelow(kQ.value());
  return RingTensor(kQ, dims, data);
}

inline std::vector<RingTensor> RandomTensors(Rng& rng) {
  std::vector<RingTensor> out(static_cast<size_t>(rng.UniformInt(0, 3)));
  for (auto& t : out) t = RandomTensor(rng);
  return out;
}

template <size_t N>
std::array<uint8_t, N> RandomBytes(Rng& rng) {
  std::array<uint8_t, N> a;
  for (auto& b : a) b = static_cast<uint8_t>(rng.NextU64());
  return a;
}

inline WorkerId RandomWorker(Rng& rng) { return rng.UniformInt(0, 1) ? WorkerId::kB : WorkerId::kA; }

inline LayerMaterial RandomLayer(Rng& rng, WorkerId w, bool relu) {
  const FixedPointCodec codec(kQ, 100);
  const uint32_t p = 1, r = static_cast<uint32_t>(rng.UniformInt(1, 3));
  const uint32_t c = static_cast<uint32_t>(rng.UniformInt(1, 3));
  const uint64_t id = rng.NextU64() >> 8;
  auto pick = [w](auto pair) { return w == WorkerId::kA ? pair.first : pair.second; };
  LayerMaterial m;
  m.matmul = pick(MakeMatrixTriple(kQ, p, r, c, id, rng));
  m.truncation = pick(MakeTruncationPairs(codec, c, id + 1, rng));
  if (relu) m.relu = pick(MakeReluMasks(codec, c, id + 2, rng));
  return m;
}

inline Message RandomMessage(Rng& rng) {
  switch (rng.UniformInt(0, kMaxMessageType)) {
    case 0x00: return Heartbeat{};
    case 0x01:
      return Hello{static_cast<PartyRole>(rng.UniformInt(0, 5)),
                   static_cast<uint32_t>(rng.NextU64()), RandomBytes<32>(rng)};
    case 0x02: {
      ModelShare s{static_cast<uint32_t>(rng.NextU64()), RandomWorker(rng), RandomTensors(rng),
                   {}};
      for (size_t i = 0; i < s.weights.size(); ++i) s.biases.push_back(RandomTensor(rng));
      return s;
    }
    case 0x03: return InputShare{rng.NextU64(), RandomWorker(rng), RandomTensor(rng)};
    case 0x04: return PublicKey{RandomBytes<32>(rng)};
    case 0x05: {
      TripleBatch b{rng.NextU64(), static_cast<uint32_t>(rng.NextU64()), RandomWorker(rng), {}};
      const int layers = static_cast<int>(rng.UniformInt(0, 2));
      for (int i = 0; i < layers; ++i) b.layers.push_back(RandomLayer(rng, b.worker, i + 1 < layers));
      return b;
    }
    case 0x06:
      return Open{rng.UniformInt(0, 1) ? OpenKind::kTruncate : OpenKind::kBeaver,
                  RandomTensors(rng)};
    case 0x07: return SignRequest{rng.NextU64(), RandomTensor(rng)};
    case 0x08: return SignShare{rng.NextU64(), RandomTensor(rng)};
    case 0x09:
      return Partial{rng.NextU64(), static_cast<uint32_t>(rng.NextU64()), RandomWorker(rng),
                     RandomTensor(rng)};
    case 0x0A: {
      SealedResult s{rng.NextU64(), RandomBytes<32>(rng), RandomBytes<24>(rng), {}};
      s.ciphertext.resize(static_cast<size_t>(rng.UniformInt(0, 64)));
      for (auto& b : s.ciphertext) b = static_cast<uint8_t>(rng.NextU64());
      return s;
    }
    case 0x0B: return BudgetRefused{rng.NextU64(), rng.UniformReal(0, 5), rng.UniformReal(0, 5)};
    case 0x0C: return ErrorNotice{static_cast<uint32_t>(rng.UniformInt(0, 99)), "boom \x01\xff"};
    default: return Bye{};
  }
}

}  // namespace pricure::testing

#endif  // PRICURE_TESTS_COMMON_RANDOM_MESSAGES_H_
