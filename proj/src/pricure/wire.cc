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

#include "pricure/wire.h"

#include <algorithm>
#include <bit>
#include <cstring>

#include "pricure/errors.h"

namespace pricure {

namespace {

class Writer {
 public:
  void U8(uint8_t v) { out_.push_back(v); }
  void U32(uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<uint8_t>(v >> (8 * i)));
  }
  void U64(uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<uint8_t>(v >> (8 * i)));
  }
  void F64(double v) { U64(std::bit_cast<uint64_t>(v)); }
  void Bytes(std::span<const uint8_t> b) { out_.insert(out_.end(), b.begin(), b.end()); }
  void Blob(std::span<const uint8_t> b) {
    PRICURE_ENFORCE(b.size() <= UINT32_MAX, ErrorCode::kContract, "blob too large");
    U32(static_cast<uint32_t>(b.size()));
    Bytes(b);
  }
  void Tensor(const RingTensor& t) {
    U32(static_cast<uint32_t>(t.rank()));
    for (uint32_t d : t.dims()) U32(d);
    const size_t at = out_.size();
    out_.resize(at + 8 * t.size());
    uint8_t* p = out_.data() + at;
    for (uint64_t v : t.data()) {
      for (int i = 0; i < 8; ++i) *p++ = static_cast<uint8_t>(v >> (8 * i));
    }
  }
  void Tensors(const std::vector<RingTensor>& ts) {
    U32(static_cast<uint32_t>(ts.size()));
    for (const auto& t : ts) Tensor(t);
  }
  void Triple(const BeaverTriple& t) {
    U64(t.id);
    U8(static_cast<uint8_t>(t.kind));
    Tensor(t.q1);
    Tensor(t.q2);
    Tensor(t.q3);
  }

  std::vector<uint8_t> Take() { return std::move(out_); }

 private:
  std::vector<uint8_t> out_;
};

class Reader {
 public:
  Reader(std::span<const uint8_t> in, const RingModulus& q, const char* what)
      : in_(in), q_(q), what_(what) {}

  uint8_t U8() { return Need(1)[0]; }
  uint32_t U32() {
    const uint8_t* p = Need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= uint32_t{p[i]} << (8 * i);
    return v;
  }
  uint64_t U64() {
    const uint8_t* p = Need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= uint64_t{p[i]} << (8 * i);
    return v;
  }
  double F64() { return std::bit_cast<double>(U64()); }
  template <size_t N>
  std::array<uint8_t, N> Fixed() {
    std::array<uint8_t, N> a;
    std::memcpy(a.data(), Need(N), N);
    return a;
  }
  std::vector<uint8_t> Blob() {
    const uint32_t n = U32();
    const uint8_t* p = Need(n);
    return std::vector<uint8_t>(p, p + n);
  }
  WorkerId Worker() {
    const uint8_t w = U8();
    if (w > 1) Fail("worker id " + std::to_string(w));
    return static_cast<WorkerId>(w);
  }
  RingTensor Tensor() {
    const uint32_t rank = U32();
    if (rank > 8) Fail("tensor rank " + std::to_string(rank));
    std::vector<uint32_t> dims(rank);
    for (auto& d : dims) d = U32();
    // With no zero dimension the running product is monotone, so checking
    // each step against the payload bounds it without overflow.
    uint64_t count = std::find(dims.begin(), dims.end(), 0u) == dims.end() ? 1 : 0;
    for (uint32_t d : dims) {
      if (count == 0) break;
      count *= d;
      if (count > remaining() / 8) Fail("tensor larger than payload");
    }
    if (count > remaining() / 8) Fail("tensor larger than payload");
    const uint8_t* p = Need(8 * count);
    std::vector<uint64_t> data(count);
    for (uint64_t k = 0; k < count; ++k) {
      uint64_t v = 0;
      for (int i = 0; i < 8; ++i) v |= uint64_t{p[8 * k + i]} << (8 * i);
      if (v >= q_.value()) Fail("tensor element outside the ring");
      data[k] = v;
    }
    return RingTensor(q_, std::move(dims), std::move(data));
  }
  std::vector<RingTensor> Tensors() {
    const uint32_t n = U32();
    if (n > remaining() / 4) Fail("tensor count larger than payload");
    std::vector<RingTensor> ts;
    ts.reserve(n);
    for (uint32_t i = 0; i < n; ++i) ts.push_back(Tensor());
    return ts;
  }
  BeaverTriple Triple(WorkerId holder) {
    BeaverTriple t;
    t.id = U64();
    const uint8_t kind = U8();
    if (kind > 1) Fail("triple kind " + std::to_string(kind));
    t.kind = static_cast<TripleKind>(kind);
    t.holder = holder;
    t.q1 = Tensor();
    t.q2 = Tensor();
    t.q3 = Tensor();
    return t;
  }

  void Done() {
    if (pos_ != in_.size()) Fail(std::to_string(in_.size() - pos_) + " trailing bytes");
  }
  size_t remaining() const { return in_.size() - pos_; }
  [[noreturn]] void Fail(const std::string& msg) const {
    Throw(ErrorCode::kParse, std::string(what_) + " payload: " + msg);
  }

 private:
  const uint8_t* Need(uint64_t n) {
    if (n > remaining()) Fail("truncated");
    const uint8_t* p = in_.data() + pos_;
    pos_ += n;
    return p;
  }

  std::span<const uint8_t> in_;
  size_t pos_ = 0;
  const RingModulus& q_;
  const char* what_;
};

uint64_t LoadU64(const uint8_t* p) {
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= uint64_t{p[i]} << (8 * i);
  return v;
}

struct Header {
  MessageType type;
  SessionId session;
  uint64_t seq;
  uint64_t length;
};

Header ParseHeader(const uint8_t* p, uint64_t max_payload) {
  PRICURE_ENFORCE(std::memcmp(p, kFrameMagic.data(), 4) == 0, ErrorCode::kBadMagic,
                  "frame does not start with PRCR");
  PRICURE_ENFORCE(p[4] == kFrameVersion, ErrorCode::kBadVersion,
                  "frame version " + std::to_string(p[4]) + ", expected " +
                      std::to_string(kFrameVersion));
  PRICURE_ENFORCE(p[5] <= kMaxMessageType, ErrorCode::kUnknownType,
                  "unknown message type " + std::to_string(p[5]));
  Header h;
  h.type = static_cast<MessageType>(p[5]);
  std::memcpy(h.session.data(), p + 6, 16);
  h.seq = LoadU64(p + 22);
  h.length = LoadU64(p + 30);
  PRICURE_ENFORCE(h.length <= max_payload, ErrorCode::kLengthOverflow,
                  "frame payload of " + std::to_string(h.length) + " bytes exceeds limit " +
                      std::to_string(max_payload));
  return h;
}

}  // namespace

const char* MessageTypeName(MessageType type) {
  switch (type) {
    case MessageType::kHeartbeat:
      return "HEARTBEAT";
    case MessageType::kHello:
      return "HELLO";
    case MessageType::kModelShare:
      return "MODEL_SHARE";
    case MessageType::kInputShare:
      return "INPUT_SHARE";
    case MessageType::kPublicKey:
      return "PUBLIC_KEY";
    case MessageType::kTripleBatch:
      return "TRIPLE_BATCH";
    case MessageType::kOpen:
      return "OPEN";
    case MessageType::kSignRequest:
      return "SIGN_REQUEST";
    case MessageType::kSignShare:
      return "SIGN_SHARE";
    case MessageType::kPartial:
      return "PARTIAL";
    case MessageType::kSealedResult:
      return "SEALED_RESULT";
    case MessageType::kBudgetRefused:
      return "BUDGET_REFUSED";
    case MessageType::kError:
      return "ERROR";
    case MessageType::kBye:
      return "BYE";
  }
  return "UNKNOWN";
}

const char* PartyRoleName(PartyRole role) {
  switch (role) {
    case PartyRole::kOwner:
      return "owner";
    case PartyRole::kWorkerA:
      return "worker-a";
    case PartyRole::kWorkerB:
      return "worker-b";
    case PartyRole::kDealer:
      return "dealer";
    case PartyRole::kAggregator:
      return "aggregator";
    case PartyRole::kClient:
      return "client";
  }
  return "unknown";
}

PartyRole WorkerRole(WorkerId w) {
  return w == WorkerId::kA ? PartyRole::kWorkerA : PartyRole::kWorkerB;
}

std::vector<uint8_t> EncodeFrame(const Frame& frame) {
  std::vector<uint8_t> out;
  out.reserve(kFrameHeaderSize + frame.payload.size());
  out.insert(out.end(), kFrameMagic.begin(), kFrameMagic.end());
  out.push_back(kFrameVersion);
  out.push_back(static_cast<uint8_t>(frame.type));
  out.insert(out.end(), frame.session.begin(), frame.session.end());
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<uint8_t>(frame.seq >> (8 * i)));
  const uint64_t n = frame.payload.size();
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<uint8_t>(n >> (8 * i)));
  out.insert(out.end(), frame.payload.begin(), frame.payload.end());
  return out;
}

Frame DecodeFrame(std::span<const uint8_t> bytes, uint64_t max_payload) {
  PRICURE_ENFORCE(bytes.size() >= kFrameHeaderSize, ErrorCode::kShortRead,
                  "frame header needs " + std::to_string(kFrameHeaderSize) + " bytes, got " +
                      std::to_string(bytes.size()));
  const Header h = ParseHeader(bytes.data(), max_payload);
  const uint64_t available = bytes.size() - kFrameHeaderSize;
  PRICURE_ENFORCE(available >= h.length, ErrorCode::kShortRead,
                  "frame payload needs " + std::to_string(h.length) + " bytes, got " +
                      std::to_string(available));
  PRICURE_ENFORCE(available == h.length, ErrorCode::kParse,
                  std::to_string(available - h.length) + " bytes after the frame");
  Frame f{h.type, h.session, h.seq, {}};
  f.payload.assign(bytes.begin() + kFrameHeaderSize, bytes.end());
  return f;
}

void FrameDecoder::Feed(std::span<const uint8_t> bytes) {
  if (offset_ > 0 && offset_ >= buffer_.size() / 2) {
    buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<ptrdiff_t>(offset_));
    offset_ = 0;
  }
  buffer_.insert(buffer_.end(), bytes.begin(), bytes.end());
}

std::optional<Frame> FrameDecoder::Next() {
  const size_t avail = buffer_.size() - offset_;
  if (avail < kFrameHeaderSize) return std::nullopt;
  const Header h = ParseHeader(buffer_.data() + offset_, max_payload_);
  if (avail - kFrameHeaderSize < h.length) return std::nullopt;
  Frame f{h.type, h.session, h.seq, {}};
  const auto begin = buffer_.begin() + static_cast<ptrdiff_t>(offset_ + kFrameHeaderSize);
  f.payload.assign(begin, begin + static_cast<ptrdiff_t>(h.length));
  offset_ += kFrameHeaderSize + h.length;
  if (offset_ == buffer_.size()) {
    buffer_.clear();
    offset_ = 0;
  }
  return f;
}

std::vector<uint8_t> SerializePayload(const Message& message) {
  Writer w;
  std::visit(
      [&w](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, Heartbeat> || std::is_same_v<T, Bye>) {
        } else if constexpr (std::is_same_v<T, Hello>) {
          w.U8(static_cast<uint8_t>(m.role));
          w.U32(m.index);
          w.Bytes(m.config_hash);
        } else if constexpr (std::is_same_v<T, ModelShare>) {
          PRICURE_ENFORCE(m.weights.size() == m.biases.size(), ErrorCode::kContract,
                          "model share needs one bias per weight matrix");
          w.U32(m.owner);
          w.U8(static_cast<uint8_t>(m.worker));
          w.U32(static_cast<uint32_t>(m.weights.size()));
          for (size_t j = 0; j < m.weights.size(); ++j) {
            w.Tensor(m.weights[j]);
            w.Tensor(m.biases[j]);
          }
        } else if constexpr (std::is_same_v<T, InputShare>) {
          w.U64(m.round);
          w.U8(static_cast<uint8_t>(m.worker));
          w.Tensor(m.value);
        } else if constexpr (std::is_same_v<T, PublicKey>) {
          w.Bytes(m.key);
        } else if constexpr (std::is_same_v<T, TripleBatch>) {
          w.U64(m.round);
          w.U32(m.owner);
          w.U8(static_cast<uint8_t>(m.worker));
          w.U32(static_cast<uint32_t>(m.layers.size()));
          for (const LayerMaterial& l : m.layers) {
            w.Triple(l.matmul);
            w.U64(l.truncation.id);
            w.Tensor(l.truncation.mask);
            w.Tensor(l.truncation.mask_div);
            w.Tensor(l.truncation.carry_table);
            w.U8(l.relu ? 1 : 0);
            if (l.relu) {
              w.U64(l.relu->id);
              w.Tensor(l.relu->blind);
              w.Triple(l.relu->blind_triple);
              w.Triple(l.relu->select_triple);
            }
          }
        } else if constexpr (std::is_same_v<T, Open>) {
          w.U8(static_cast<uint8_t>(m.kind));
          w.Tensors(m.tensors);
        } else if constexpr (std::is_same_v<T, SignRequest> || std::is_same_v<T, SignShare>) {
          w.U64(m.mask_id);
          w.Tensor(m.share);
        } else if constexpr (std::is_same_v<T, Partial>) {
          w.U64(m.round);
          w.U32(m.owner);
          w.U8(static_cast<uint8_t>(m.worker));
          w.Tensor(m.value);
        } else if constexpr (std::is_same_v<T, SealedResult>) {
          w.U64(m.round);
          w.Bytes(m.sender);
          w.Bytes(m.nonce);
          w.Blob(m.ciphertext);
        } else if constexpr (std::is_same_v<T, BudgetRefused>) {
          w.U64(m.round);
          w.F64(m.spent);
          w.F64(m.cap);
        } else if constexpr (std::is_same_v<T, ErrorNotice>) {
          w.U32(m.code);
          w.Blob(std::span(reinterpret_cast<const uint8_t*>(m.message.data()), m.message.size()));
        }
      },
      message);
  return w.Take();
}

Message ParsePayload(MessageType type, std::span<const uint8_t> payload, const RingModulus& q) {
  Reader r(payload, q, MessageTypeName(type));
  Message out;
  switch (type) {
    case MessageType::kHeartbeat:
      out = Heartbeat{};
      break;
    case MessageType::kBye:
      out = Bye{};
      break;
    case MessageType::kHello: {
      Hello m;
      const uint8_t role = r.U8();
      if (role > static_cast<uint8_t>(PartyRole::kClient)) r.Fail("role " + std::to_string(role));
      m.role = static_cast<PartyRole>(role);
      m.index = r.U32();
      m.config_hash = r.Fixed<32>();
      out = m;
      break;
    }
    case MessageType::kModelShare: {
      ModelShare m;
      m.owner = r.U32();
      m.worker = r.Worker();
      const uint32_t layers = r.U32();
      if (layers > r.remaining() / 8) r.Fail("layer count larger than payload");
      for (uint32_t j = 0; j < layers; ++j) {
        m.weights.push_back(r.Tensor());
        m.biases.push_back(r.Tensor());
      }
      out = std::move(m);
      break;
    }
    case MessageType::kInputShare: {
      InputShare m;
      m.round = r.U64();
      m.worker = r.Worker();
      m.value = r.Tensor();
      out = std::move(m);
      break;
    }
    case MessageType::kPublicKey:
      out = PublicKey{r.Fixed<32>()};
      break;
    case MessageType::kTripleBatch: {
      TripleBatch m;
      m.round = r.U64();
      m.owner = r.U32();
      m.worker = r.Worker();
      const uint32_t layers = r.U32();
      if (layers > r.remaining() / 16) r.Fail("layer count larger than payload");
      for (uint32_t j = 0; j < layers; ++j) {
        LayerMaterial l;
        l.matmul = r.Triple(m.worker);
        l.truncation.id = r.U64();
        l.truncation.holder = m.worker;
        l.truncation.mask = r.Tensor();
        l.truncation.mask_div = r.Tensor();
        l.truncation.carry_table = r.Tensor();
        const uint8_t has_relu = r.U8();
        if (has_relu > 1) r.Fail("ReLU flag " + std::to_string(has_relu));
        if (has_relu) {
          ReluMask mask;
          mask.id = r.U64();
          mask.holder = m.worker;
          mask.blind = r.Tensor();
          mask.blind_triple = r.Triple(m.worker);
          mask.select_triple = r.Triple(m.worker);
          l.relu = std::move(mask);
        }
        m.layers.push_back(std::move(l));
      }
      out = std::move(m);
      break;
    }
    case MessageType::kOpen: {
      Open m;
      const uint8_t kind = r.U8();
      if (kind != 1 && kind != 2) r.Fail("open kind " + std::to_string(kind));
      m.kind = static_cast<OpenKind>(kind);
      m.tensors = r.Tensors();
      out = std::move(m);
      break;
    }
    case MessageType::kSignRequest: {
      SignRequest m;
      m.mask_id = r.U64();
      m.share = r.Tensor();
      out = std::move(m);
      break;
    }
    case MessageType::kSignShare: {
      SignShare m;
      m.mask_id = r.U64();
      m.share = r.Tensor();
      out = std::move(m);
      break;
    }
    case MessageType::kPartial: {
      Partial m;
      m.round = r.U64();
      m.owner = r.U32();
      m.worker = r.Worker();
      m.value = r.Tensor();
      out = std::move(m);
      break;
    }
    case MessageType::kSealedResult: {
      SealedResult m;
      m.round = r.U64();
      m.sender = r.Fixed<32>();
      m.nonce = r.Fixed<24>();
      m.ciphertext = r.Blob();
      out = std::move(m);
      break;
    }
    case MessageType::kBudgetRefused: {
      BudgetRefused m;
      m.round = r.U64();
      m.spent = r.F64();
      m.cap = r.F64();
      out = m;
      break;
    }
    case MessageType::kError: {
      ErrorNotice m;
      m.code = r.U32();
      const std::vector<uint8_t> text = r.Blob();
      m.message.assign(text.begin(), text.end());
      out = std::move(m);
      break;
    }
    default:
      Throw(ErrorCode::kUnknownType, "unknown message type");
  }
  r.Done();
  return out;
}

}  // namespace pricure
