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

// Wire format: frames and the typed messages they carry. docs/protocol.md
// is the byte-level reference; keep the two in step.

#ifndef PRICURE_WIRE_H_
#define PRICURE_WIRE_H_

#include <array>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "pricure/ring.h"
#include "pricure/sharing.h"

namespace pricure {

enum class MessageType : uint8_t {
  kHeartbeat = 0x00,
  kHello = 0x01,
  kModelShare = 0x02,
  kInputShare = 0x03,
  kPublicKey = 0x04,
  kTripleBatch = 0x05,
  kOpen = 0x06,
  kSignRequest = 0x07,
  kSignShare = 0x08,
  kPartial = 0x09,
  kSealedResult = 0x0A,
  kBudgetRefused = 0x0B,
  kError = 0x0C,
  kBye = 0x0D,
};

inline constexpr uint8_t kMaxMessageType = 0x0D;

const char* MessageTypeName(MessageType type);

inline constexpr std::array<uint8_t, 4> kFrameMagic = {'P', 'R', 'C', 'R'};
inline constexpr uint8_t kFrameVersion = 1;
// magic(4) version(1) type(1) session(16) seq(8) length(8).
inline constexpr size_t kFrameHeaderSize = 38;
inline constexpr uint64_t kDefaultMaxPayload = uint64_t{1} << 32;

struct Frame {
  MessageType type = MessageType::kHeartbeat;
  SessionId session{};
  uint64_t seq = 0;
  std::vector<uint8_t> payload;

  bool operator==(const Frame&) const = default;
};

std::vector<uint8_t> EncodeFrame(const Frame& frame);

// Decodes a buffer holding exactly one frame. Errors: kShortRead (buffer
// ends early), kBadMagic, kBadVersion, kUnknownType, kLengthOverflow
// (declared length above max_payload), kParse (bytes after the frame).
Frame DecodeFrame(std::span<const uint8_t> bytes, uint64_t max_payload = kDefaultMaxPayload);

// Incremental decoder for a byte stream cut at arbitrary points. Header
// errors are raised as soon as the header is complete.
class FrameDecoder {
 public:
  explicit FrameDecoder(uint64_t max_payload = kDefaultMaxPayload) : max_payload_(max_payload) {}

  void Feed(std::span<const uint8_t> bytes);
  std::optional<Frame> Next();
  size_t buffered() const { return buffer_.size(); }

 private:
  uint64_t max_payload_;
  std::vector<uint8_t> buffer_;
  size_t offset_ = 0;
};

enum class PartyRole : uint8_t {
  kOwner = 0,
  kWorkerA = 1,
  kWorkerB = 2,
  kDealer = 3,
  kAggregator = 4,
  kClient = 5,
};

const char* PartyRoleName(PartyRole role);
PartyRole WorkerRole(WorkerId w);

using ConfigHash = std::array<uint8_t, 32>;
using BoxPublicKey = std::array<uint8_t, 32>;
using BoxNonce = std::array<uint8_t, 24>;

struct Heartbeat {
  bool operator==(const Heartbeat&) const = default;
};
struct Hello {
  PartyRole role = PartyRole::kOwner;
  uint32_t index = 0;
  ConfigHash config_hash{};
  bool operator==(const Hello&) const = default;
};
struct ModelShare {
  uint32_t owner = 0;
  WorkerId worker = WorkerId::kA;
  std::vector<RingTensor> weights;
  std::vector<RingTensor> biases;
  bool operator==(const ModelShare&) const = default;
};
struct InputShare {
  uint64_t round = 0;
  WorkerId worker = WorkerId::kA;
  RingTensor value;
  bool operator==(const InputShare&) const = default;
};
struct PublicKey {
  BoxPublicKey key{};
  bool operator==(const PublicKey&) const = default;
};
struct TripleBatch {
  uint64_t round = 0;
  uint32_t owner = 0;
  WorkerId worker = WorkerId::kA;
  std::vector<LayerMaterial> layers;
  bool operator==(const TripleBatch&) const = default;
};
struct Open {
  OpenKind kind = OpenKind::kBeaver;
  std::vector<RingTensor> tensors;
  bool operator==(const Open&) const = default;
};
struct SignRequest {
  uint64_t mask_id = 0;
  RingTensor share;
  bool operator==(const SignRequest&) const = default;
};
struct SignShare {
  uint64_t mask_id = 0;
  RingTensor share;
  bool operator==(const SignShare&) const = default;
};
struct Partial {
  uint64_t round = 0;
  uint32_t owner = 0;
  WorkerId worker = WorkerId::kA;
  RingTensor value;
  bool operator==(const Partial&) const = default;
};
struct SealedResult {
  uint64_t round = 0;
  BoxPublicKey sender{};
  BoxNonce nonce{};
  std::vector<uint8_t> ciphertext;
  bool operator==(const SealedResult&) const = default;
};
struct BudgetRefused {
  uint64_t round = 0;
  double spent = 0;
  double cap = 0;
  bool operator==(const BudgetRefused&) const = default;
};
struct ErrorNotice {
  uint32_t code = 0;
  std::string message;
  bool operator==(const ErrorNotice&) const = default;
};
struct Bye {
  bool operator==(const Bye&) const = default;
};

// Alternative index equals the MessageType tag.
using Message = std::variant<Heartbeat, Hello, ModelShare, InputShare, PublicKey, TripleBatch,
                             Open, SignRequest, SignShare, Partial, SealedResult, BudgetRefused,
                             ErrorNotice, Bye>;

inline MessageType TypeOf(const Message& m) { return static_cast<MessageType>(m.index()); }

namespace wire_internal {
template <typename T, typename... Ts>
constexpr size_t IndexIn(const std::variant<Ts...>*) {
  size_t i = 0;
  ((std::is_same_v<T, Ts> ? false : (++i, true)) && ...);
  return i;
}
}  // namespace wire_internal

// Tag of message struct T.
template <typename T>
inline constexpr MessageType kTypeOf =
    static_cast<MessageType>(wire_internal::IndexIn<T>(static_cast<const Message*>(nullptr)));

std::vector<uint8_t> SerializePayload(const Message& message);
// Tensor elements are checked against q. Malformed payloads raise kParse.
Message ParsePayload(MessageType type, std::span<const uint8_t> payload, const RingModulus& q);

}  // namespace pricure

#endif  // PRICURE_WIRE_H_
