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

#include "pricure/sharing.h"

#include "pricure/errors.h"

namespace pricure {
namespace {

RingTensor RandomTensor(const RingModulus& q, const std::vector<uint32_t>& dims, Rng& rng) {
  RingTensor t(q, dims);
  for (auto& v : t.mutable_data()) v = rng.UniformBelow(q.value());
  return t;
}

std::pair<RingTensor, RingTensor> SplitTensor(const RingTensor& secret, Rng& rng) {
  RingTensor a = RandomTensor(secret.modulus(), secret.dims(), rng);
  RingTensor b = Sub(secret, a);
  return {std::move(a), std::move(b)};
}

void CheckShare(const AdditiveShare& a, const AdditiveShare& b, const char* op) {
  PRICURE_ENFORCE(a.session == b.session, ErrorCode::kProtocol,
                  std::string(op) + ": shares belong to different sessions");
  PRICURE_ENFORCE(a.value.modulus() == b.value.modulus(), ErrorCode::kProtocol,
                  std::string(op) + ": shares use different moduli");
  PRICURE_ENFORCE(a.value.SameShape(b.value), ErrorCode::kProtocol,
                  std::string(op) + ": share shapes differ " + ShapeString(a.value.dims()) +
                      " vs " + ShapeString(b.value.dims()));
}

void CheckLocal(const AdditiveShare& a, const AdditiveShare& b, const char* op) {
  PRICURE_ENFORCE(a.holder == b.holder, ErrorCode::kProtocol,
                  std::string(op) + ": shares held by different workers");
  CheckShare(a, b, op);
}

void CheckOpened(const std::vector<RingTensor>& mine, const std::vector<RingTensor>& theirs) {
  PRICURE_ENFORCE(mine.size() == theirs.size(), ErrorCode::kProtocol,
                  "peer opened a different number of tensors");
  for (size_t i = 0; i < mine.size(); ++i) {
    PRICURE_ENFORCE(mine[i].SameShape(theirs[i]) && mine[i].modulus() == theirs[i].modulus(),
                    ErrorCode::kProtocol, "peer opened tensor with shape " +
                                              ShapeString(theirs[i].dims()) + ", expected " +
                                              ShapeString(mine[i].dims()));
  }
}

// Local half of the truncation once c = z + rho is public.
RingTensor FinishTruncate(WorkerId self, const RingTensor& c, const TruncationPair& pair,
                          const FixedPointCodec& codec) {
  const RingModulus& q = codec.modulus();
  const int64_t f = codec.scale();
  RingTensor out(q, c.dims());
  for (size_t i = 0; i < c.size(); ++i) {
    const int64_t lc = q.Lift(c[i]);
    const uint64_t t = self == WorkerId::kA ? q.FromSigned(FloorDiv(lc, f)) : 0;
    const uint64_t carry = pair.carry_table[i * f + static_cast<size_t>(FloorMod(lc, f))];
    out[i] = q.Sub(q.Sub(t, pair.mask_div[i]), carry);
  }
  return out;
}

void CheckTruncationPair(const TruncationPair& pair, size_t n, uint32_t f) {
  PRICURE_ENFORCE(pair.mask.size() == n && pair.mask_div.size() == n &&
                      pair.carry_table.size() == n * f,
                  ErrorCode::kProtocol, "truncation pair sized for " +
                                            std::to_string(pair.mask.size()) +
                                            " elements, need " + std::to_string(n));
}

}  // namespace

std::string SessionIdHex(const SessionId& id) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string s;
  for (uint8_t b : id) {
    s.push_back(kHex[b >> 4]);
    s.push_back(kHex[b & 15]);
  }
  return s;
}

SessionId SessionIdFromHex(const std::string& hex) {
  PRICURE_ENFORCE(hex.size() == 32, ErrorCode::kParse, "session id must be 32 hex digits");
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    Throw(ErrorCode::kParse, std::string("bad hex digit '") + c + "' in session id");
  };
  SessionId id{};
  for (size_t i = 0; i < 16; ++i) {
    id[i] = static_cast<uint8_t>(nibble(hex[2 * i]) << 4 | nibble(hex[2 * i + 1]));
  }
  return id;
}

SessionId RandomSessionId(Rng& rng) {
  SessionId id{};
  const uint64_t a = rng.NextU64(), b = rng.NextU64();
  for (int i = 0; i < 8; ++i) {
    id[i] = static_cast<uint8_t>(a >> (8 * i));
    id[8 + i] = static_cast<uint8_t>(b >> (8 * i));
  }
  return id;
}

SharePair SplitSecret(const RingTensor& secret, const SessionId& session, Rng& rng) {
  auto [a, b] = SplitTensor(secret, rng);
  return {AdditiveShare{WorkerId::kA, session, std::move(a)},
          AdditiveShare{WorkerId::kB, session, std::move(b)}};
}

RingTensor Reconstruct(const AdditiveShare& a, const AdditiveShare& b) {
  CheckShare(a, b, "reconstruct");
  PRICURE_ENFORCE(a.holder != b.holder, ErrorCode::kProtocol,
                  "reconstruct needs one share from each worker");
  return Add(a.value, b.value);
}

AdditiveShare AddShares(const AdditiveShare& a, const AdditiveShare& b) {
  CheckLocal(a, b, "add_shares");
  return AdditiveShare{a.holder, a.session, Add(a.value, b.value)};
}

AdditiveShare SubShares(const AdditiveShare& a, const AdditiveShare& b) {
  CheckLocal(a, b, "sub_shares");
  return AdditiveShare{a.holder, a.session, Sub(a.value, b.value)};
}

AdditiveShare MulPublic(const AdditiveShare& a, uint64_t c) {
  return AdditiveShare{a.holder, a.session, MulScalar(a.value, c)};
}

AdditiveShare AddPublic(const AdditiveShare& a, const RingTensor& pub) {
  PRICURE_ENFORCE(a.value.SameShape(pub), ErrorCode::kProtocol,
                  "add_public: shape mismatch");
  if (a.holder == WorkerId::kB) return a;
  return AdditiveShare{a.holder, a.session, Add(a.value, pub)};
}

std::pair<BeaverTriple, BeaverTriple> MakeElementwiseTriple(const RingModulus& q,
                                                           std::vector<uint32_t> dims,
                                                           uint64_t id, Rng& rng) {
  const RingTensor q1 = RandomTensor(q, dims, rng);
  const RingTensor q2 = RandomTensor(q, dims, rng);
  const RingTensor q3 = MulElementwise(q1, q2);
  auto [q1a, q1b] = SplitTensor(q1, rng);
  auto [q2a, q2b] = SplitTensor(q2, rng);
  auto [q3a, q3b] = SplitTensor(q3, rng);
  return {BeaverTriple{id, TripleKind::kElementwise, WorkerId::kA, std::move(q1a),
                       std::move(q2a), std::move(q3a)},
          BeaverTriple{id, TripleKind::kElementwise, WorkerId::kB, std::move(q1b),
                       std::move(q2b), std::move(q3b)}};
}

std::pair<BeaverTriple, BeaverTriple> MakeMatrixTriple(const RingModulus& q, uint32_t p,
                                                      uint32_t r, uint32_t c, uint64_t id,
                                                      Rng& rng) {
  const RingTensor q1 = RandomTensor(q, {p, r}, rng);
  const RingTensor q2 = RandomTensor(q, {r, c}, rng);
  const RingTensor q3 = MatMul(q1, q2);
  auto [q1a, q1b] = SplitTensor(q1, rng);
  auto [q2a, q2b] = SplitTensor(q2, rng);
  auto [q3a, q3b] = SplitTensor(q3, rng);
  return {BeaverTriple{id, TripleKind::kMatrix, WorkerId::kA, std::move(q1a), std::move(q2a),
                       std::move(q3a)},
          BeaverTriple{id, TripleKind::kMatrix, WorkerId::kB, std::move(q1b), std::move(q2b),
                       std::move(q3b)}};
}

std::pair<TruncationPair, TruncationPair> MakeTruncationPairs(const FixedPointCodec& codec,
                                                             uint32_t n, uint64_t id,
                                                             Rng& rng) {
  const RingModulus& q = codec.modulus();
  const uint32_t f = codec.scale();
  const auto limit = static_cast<int64_t>(q.half() - codec.TruncationBound());
  RingTensor mask(q, {n}), mask_div(q, {n}), table(q, {n, f});
  for (uint32_t i = 0; i < n; ++i) {
    const int64_t rho = rng.UniformInt(-limit, limit);
    mask[i] = q.FromSigned(rho);
    mask_div[i] = q.FromSigned(FloorDiv(rho, f));
    const int64_t rem = FloorMod(rho, f);
    for (uint32_t k = 0; k < f; ++k) table[size_t{i} * f + k] = k < rem ? 1 : 0;
  }
  auto [ma, mb] = SplitTensor(mask, rng);
  auto [da, db] = SplitTensor(mask_div, rng);
  auto [ta, tb] = SplitTensor(table, rng);
  return {TruncationPair{id, WorkerId::kA, std::move(ma), std::move(da), std::move(ta)},
          TruncationPair{id, WorkerId::kB, std::move(mb), std::move(db), std::move(tb)}};
}

std::pair<ReluMask, ReluMask> MakeReluMasks(const FixedPointCodec& codec, uint32_t n,
                                           uint64_t id, Rng& rng) {
  const RingModulus& q = codec.modulus();
  RingTensor blind(q, {n});
  for (uint32_t i = 0; i < n; ++i) {
    const uint64_t k = 1 + rng.UniformBelow(kReluBlindMax);
    blind[i] = q.Mul(q.Reduce64(k), q.Reduce64(codec.scale()));
  }
  auto [ba, bb] = SplitTensor(blind, rng);
  auto [t1a, t1b] = MakeElementwiseTriple(q, {n}, id + 1, rng);
  auto [t2a, t2b] = MakeElementwiseTriple(q, {n}, id + 2, rng);
  return {ReluMask{id, WorkerId::kA, std::move(ba), std::move(t1a), std::move(t2a)},
          ReluMask{id, WorkerId::kB, std::move(bb), std::move(t1b), std::move(t2b)}};
}

std::pair<RingTensor, RingTensor> DealerSignShares(const RingTensor& m_a,
                                                   const RingTensor& m_b, Rng& rng) {
  PRICURE_ENFORCE(m_a.SameShape(m_b) && m_a.modulus() == m_b.modulus(), ErrorCode::kProtocol,
                  "sign request shares do not match");
  const RingTensor m = Add(m_a, m_b);
  const RingModulus& q = m.modulus();
  RingTensor bits(q, m.dims());
  for (size_t i = 0; i < m.size(); ++i) bits[i] = q.Lift(m[i]) > 0 ? 1 : 0;
  return SplitTensor(bits, rng);
}

ShareEngine::ShareEngine(WorkerId self, const SessionId& session,
                         const FixedPointCodec& codec, PeerChannel* peer, SignService* dealer)
    : self_(self), session_(session), codec_(codec), peer_(peer), dealer_(dealer) {}

AdditiveShare ShareEngine::Wrap(RingTensor value) const {
  return AdditiveShare{self_, session_, std::move(value)};
}

void ShareEngine::Consume(uint64_t id, WorkerId holder, const char* what) {
  PRICURE_ENFORCE(holder == self_, ErrorCode::kProtocol,
                  std::string(what) + " " + std::to_string(id) + " was issued to worker " +
                      WorkerName(holder));
  PRICURE_ENFORCE(consumed_.insert(id).second, ErrorCode::kTripleReuse,
                  std::string(what) + " " + std::to_string(id) + " already used");
}

void ShareEngine::CheckOwned(const AdditiveShare& s) const {
  PRICURE_ENFORCE(s.holder == self_ && s.session == session_, ErrorCode::kProtocol,
                  "share does not belong to this worker/session");
}

AdditiveShare ShareEngine::BeaverMul(const AdditiveShare& x, const AdditiveShare& y,
                                     const BeaverTriple& triple) {
  CheckOwned(x);
  CheckOwned(y);
  PRICURE_ENFORCE(triple.kind == TripleKind::kElementwise, ErrorCode::kProtocol,
                  "element-wise product needs an element-wise triple");
  PRICURE_ENFORCE(x.value.size() == y.value.size() && x.value.size() == triple.q1.size() &&
                      triple.q2.size() == triple.q1.size() &&
                      triple.q3.size() == triple.q1.size(),
                  ErrorCode::kProtocol,
                  "triple shape " + ShapeString(triple.q1.dims()) + " does not fit operands " +
                      ShapeString(x.value.dims()) + ", " + ShapeString(y.value.dims()));
  Consume(triple.id, triple.holder, "triple");
  const auto& dims = x.value.dims();
  const RingTensor q1 = triple.q1.Reshaped(dims);
  const RingTensor q2 = triple.q2.Reshaped(dims);
  const RingTensor yv = y.value.Reshaped(dims);
  std::vector<RingTensor> mine{Sub(x.value, q1), Sub(yv, q2)};
  const std::vector<RingTensor> theirs = peer_->Exchange(OpenKind::kBeaver, mine);
  CheckOpened(mine, theirs);
  const RingTensor alpha = Add(mine[0], theirs[0]);
  const RingTensor beta = Add(mine[1], theirs[1]);
  RingTensor z = Add(triple.q3.Reshaped(dims), MulElementwise(alpha, q2));
  z = Add(z, MulElementwise(beta, q1));
  if (self_ == WorkerId::kA) z = Add(z, MulElementwise(alpha, beta));
  return Wrap(std::move(z));
}

AdditiveShare ShareEngine::BeaverMatMul(const AdditiveShare& x, const AdditiveShare& y,
                                        const BeaverTriple& triple) {
  CheckOwned(x);
  CheckOwned(y);
  PRICURE_ENFORCE(triple.kind == TripleKind::kMatrix, ErrorCode::kProtocol,
                  "matrix product needs a matrix triple");
  PRICURE_ENFORCE(x.value.SameShape(triple.q1) && y.value.SameShape(triple.q2),
                  ErrorCode::kProtocol,
                  "matrix triple " + ShapeString(triple.q1.dims()) + "." +
                      ShapeString(triple.q2.dims()) + " does not fit operands " +
                      ShapeString(x.value.dims()) + "." + ShapeString(y.value.dims()));
  Consume(triple.id, triple.holder, "triple");
  std::vector<RingTensor> mine{Sub(x.value, triple.q1), Sub(y.value, triple.q2)};
  const std::vector<RingTensor> theirs = peer_->Exchange(OpenKind::kBeaver, mine);
  CheckOpened(mine, theirs);
  const RingTensor alpha = Add(mine[0], theirs[0]);
  const RingTensor beta = Add(mine[1], theirs[1]);
  RingTensor z = Add(triple.q3, MatMul(alpha, triple.q2));
  z = Add(z, MatMul(triple.q1, beta));
  if (self_ == WorkerId::kA) z = Add(z, MatMul(alpha, beta));
  return Wrap(std::move(z));
}

AdditiveShare ShareEngine::Truncate(const AdditiveShare& z, const TruncationPair& pair) {
  CheckOwned(z);
  CheckTruncationPair(pair, z.value.size(), codec_.scale());
  Consume(pair.id, pair.holder, "truncation pair");
  std::vector<RingTensor> mine{Add(z.value, pair.mask.Reshaped(z.value.dims()))};
  const std::vector<RingTensor> theirs = peer_->Exchange(OpenKind::kTruncate, mine);
  CheckOpened(mine, theirs);
  const RingTensor c = Add(mine[0], theirs[0]);
  return Wrap(FinishTruncate(self_, c, pair, codec_));
}

AdditiveShare ShareEngine::Relu(const AdditiveShare& x, const ReluMask& mask) {
  CheckOwned(x);
  PRICURE_ENFORCE(dealer_ != nullptr, ErrorCode::kProtocol,
                  "ReLU needs the dealer's sign service");
  PRICURE_ENFORCE(mask.blind.size() == x.value.size(), ErrorCode::kProtocol,
                  "ReLU mask sized for " + std::to_string(mask.blind.size()) +
                      " elements, need " + std::to_string(x.value.size()));
  Consume(mask.id, mask.holder, "ReLU mask");
  const AdditiveShare blind = Wrap(mask.blind.Reshaped(x.value.dims()));
  const AdditiveShare blinded = BeaverMul(blind, x, mask.blind_triple);
  RingTensor bits = dealer_->RequestSignShares(mask.id, blinded.value);
  PRICURE_ENFORCE(bits.size() == x.value.size(), ErrorCode::kProtocol,
                  "dealer returned wrong number of sign shares");
  return BeaverMul(x, Wrap(bits.Reshaped(x.value.dims())), mask.select_triple);
}

SharePair TruncateLocal(const AdditiveShare& z_a, const AdditiveShare& z_b,
                        const TruncationPair& pair_a, const TruncationPair& pair_b,
                        const FixedPointCodec& codec, bool strict) {
  const RingTensor z = Reconstruct(z_a, z_b);
  if (strict) {
    const auto bound = static_cast<int64_t>(codec.TruncationBound());
    for (uint64_t v : z.data()) {
      const int64_t lz = codec.modulus().Lift(v);
      PRICURE_ENFORCE(lz <= bound && lz >= -bound, ErrorCode::kProtocol,
                      "truncation input " + std::to_string(lz) + " outside +-" +
                          std::to_string(bound) + "; result would be undefined");
    }
  }
  CheckTruncationPair(pair_a, z.size(), codec.scale());
  CheckTruncationPair(pair_b, z.size(), codec.scale());
  const RingTensor c = Add(Add(z_a.value, pair_a.mask.Reshaped(z.dims())),
                           Add(z_b.value, pair_b.mask.Reshaped(z.dims())));
  return {AdditiveShare{z_a.holder, z_a.session, FinishTruncate(z_a.holder, c, pair_a, codec)},
          AdditiveShare{z_b.holder, z_b.session, FinishTruncate(z_b.holder, c, pair_b, codec)}};
}

}  // namespace pricure
