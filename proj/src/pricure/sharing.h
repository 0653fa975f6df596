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

// Two-party additive secret sharing over Z_q, with dealer-issued correlated
// randomness for share-by-share products, fixed-point truncation and ReLU.

#ifndef PRICURE_SHARING_H_
#define PRICURE_SHARING_H_

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "pricure/ring.h"
#include "pricure/rng.h"

namespace pricure {

enum class WorkerId : uint8_t { kA = 0, kB = 1 };

inline const char* WorkerName(WorkerId w) { return w == WorkerId::kA ? "A" : "B"; }

using SessionId = std::array<uint8_t, 16>;

std::string SessionIdHex(const SessionId& id);
SessionId SessionIdFromHex(const std::string& hex);
SessionId RandomSessionId(Rng& rng);

struct AdditiveShare {
  WorkerId holder = WorkerId::kA;
  SessionId session{};
  RingTensor value;
};

using SharePair = std::pair<AdditiveShare, AdditiveShare>;

// share_A uniform over the ring, share_B = secret - share_A.
SharePair SplitSecret(const RingTensor& secret, const SessionId& session, Rng& rng);

// Throws kProtocol on session/shape mismatch or if the holders are not one
// A and one B.
RingTensor Reconstruct(const AdditiveShare& a, const AdditiveShare& b);

// Local (communication-free) linear operations. Holders must match.
AdditiveShare AddShares(const AdditiveShare& a, const AdditiveShare& b);
AdditiveShare SubShares(const AdditiveShare& a, const AdditiveShare& b);
AdditiveShare MulPublic(const AdditiveShare& a, uint64_t c);
// Adds a public tensor to the shared secret; only worker A's share changes.
AdditiveShare AddPublic(const AdditiveShare& a, const RingTensor& pub);

enum class TripleKind : uint8_t { kElementwise = 0, kMatrix = 1 };

// One worker's half of a multiplication triple (q1, q2, q3 = q1 * q2).
// Matrix triples have q1: p x r, q2: r x c, q3 = q1 . q2: p x c.
struct BeaverTriple {
  uint64_t id = 0;
  TripleKind kind = TripleKind::kElementwise;
  WorkerId holder = WorkerId::kA;
  RingTensor q1, q2, q3;

  bool operator==(const BeaverTriple&) const = default;
};

std::pair<BeaverTriple, BeaverTriple> MakeElementwiseTriple(const RingModulus& q,
                                                           std::vector<uint32_t> dims,
                                                           uint64_t id, Rng& rng);
std::pair<BeaverTriple, BeaverTriple> MakeMatrixTriple(const RingModulus& q, uint32_t p,
                                                      uint32_t r, uint32_t c, uint64_t id,
                                                      Rng& rng);

// Per element, shares of a mask rho and of floor(rho / f). The pair also
// carries shares of the table T[i][k] = [k < rho_i mod f] for k in [0, f),
// which turns the rescale into an exact floor.
struct TruncationPair {
  uint64_t id = 0;
  WorkerId holder = WorkerId::kA;
  RingTensor mask;
  RingTensor mask_div;
  RingTensor carry_table;  // n x f

  bool operator==(const TruncationPair&) const = default;
};

// rho is drawn with centered lift uniform in [-L, L], L = (q-1)/2 - B where
// B = codec.TruncationBound(), so z + rho never wraps for |z| <= B.
std::pair<TruncationPair, TruncationPair> MakeTruncationPairs(const FixedPointCodec& codec,
                                                             uint32_t n, uint64_t id,
                                                             Rng& rng);

// Positive blinding factors r (multiples of f in [f, 2^20 f]) plus the two
// elementwise triples used to form r*x and x*DReLU(x).
struct ReluMask {
  uint64_t id = 0;
  WorkerId holder = WorkerId::kA;
  RingTensor blind;
  BeaverTriple blind_triple;
  BeaverTriple select_triple;

  bool operator==(const ReluMask&) const = default;
};

inline constexpr uint64_t kReluBlindMax = uint64_t{1} << 20;

std::pair<ReluMask, ReluMask> MakeReluMasks(const FixedPointCodec& codec, uint32_t n,
                                           uint64_t id, Rng& rng);

// Dealer side of the sign sub-protocol: reconstructs m = r*x, and returns
// fresh shares of [lift(m) > 0].
std::pair<RingTensor, RingTensor> DealerSignShares(const RingTensor& m_a,
                                                   const RingTensor& m_b, Rng& rng);

// Everything one worker consumes to evaluate one dense layer on shares.
// Output layers carry no ReLU mask.
struct LayerMaterial {
  BeaverTriple matmul;
  TruncationPair truncation;
  std::optional<ReluMask> relu;

  bool operator==(const LayerMaterial&) const = default;
};

enum class OpenKind : uint8_t { kBeaver = 1, kTruncate = 2 };

// Symmetric exchange with the other worker: send my opened shares, receive
// theirs (same count and shapes).
class PeerChannel {
 public:
  virtual ~PeerChannel() = default;
  virtual std::vector<RingTensor> Exchange(OpenKind kind,
                                           const std::vector<RingTensor>& mine) = 0;
};

// Worker-to-dealer sign request. Both workers send the same mask id.
class SignService {
 public:
  virtual ~SignService() = default;
  virtual RingTensor RequestSignShares(uint64_t mask_id, const RingTensor& m_share) = 0;
};

// One worker's view of the interactive operations for a session. Not
// thread-safe; each worker owns one.
class ShareEngine {
 public:
  ShareEngine(WorkerId self, const SessionId& session, const FixedPointCodec& codec,
              PeerChannel* peer, SignService* dealer);

  WorkerId self() const { return self_; }
  const SessionId& session() const { return session_; }
  const FixedPointCodec& codec() const { return codec_; }

  AdditiveShare Wrap(RingTensor value) const;

  // Element-wise product of two shared tensors.
  AdditiveShare BeaverMul(const AdditiveShare& x, const AdditiveShare& y,
                          const BeaverTriple& triple);
  // Matrix product of shared (p x r) and (r x c) tensors.
  AdditiveShare BeaverMatMul(const AdditiveShare& x, const AdditiveShare& y,
                             const BeaverTriple& triple);
  // floor(lift(z) / f), exact for |lift(z)| <= codec.TruncationBound().
  AdditiveShare Truncate(const AdditiveShare& z, const TruncationPair& pair);
  // max(lift(x), 0) via blinded sign retrieval through the dealer.
  AdditiveShare Relu(const AdditiveShare& x, const ReluMask& mask);

 private:
  void Consume(uint64_t id, WorkerId holder, const char* what);
  void CheckOwned(const AdditiveShare& s) const;

  WorkerId self_;
  SessionId session_;
  FixedPointCodec codec_;
  PeerChannel* peer_;
  SignService* dealer_;
  std::unordered_set<uint64_t> consumed_;
};

// Reference truncation with both shares co-located. In strict mode a secret
// outside +-codec.TruncationBound() raises kProtocol instead of returning an
// undefined result.
SharePair TruncateLocal(const AdditiveShare& z_a, const AdditiveShare& z_b,
                        const TruncationPair& pair_a, const TruncationPair& pair_b,
                        const FixedPointCodec& codec, bool strict);

}  // namespace pricure

#endif  // PRICURE_SHARING_H_
