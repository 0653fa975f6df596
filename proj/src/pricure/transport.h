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

// Byte streams (in-process loopback and TCP) and the framed, sequenced
// connection every party talks through.

#ifndef PRICURE_TRANSPORT_H_
#define PRICURE_TRANSPORT_H_

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <set>
#include <span>
#include <string>
#include <utility>

#include "pricure/errors.h"
#include "pricure/wire.h"

namespace pricure {

using Clock = std::chrono::steady_clock;
using Millis = std::chrono::milliseconds;

// Reliable in-order duplex byte stream.
class ByteStream {
 public:
  virtual ~ByteStream() = default;

  // Throws kConnectionReset if the peer is gone.
  virtual void Write(std::span<const uint8_t> bytes) = 0;
  // Blocks until at least one byte is available and returns how many were
  // copied, or 0 at orderly end of stream. Throws kTimeout at the deadline
  // and kConnectionReset if the stream broke.
  virtual size_t ReadSome(std::span<uint8_t> buf, Clock::time_point deadline) = 0;
  // Orderly shutdown of the sending direction.
  virtual void Close() = 0;
  // Abortive close: the peer's reads fail with kConnectionReset.
  virtual void Reset() = 0;
};

std::pair<std::unique_ptr<ByteStream>, std::unique_ptr<ByteStream>> MakeLoopbackPair();

// host:port, e.g. "127.0.0.1:7001". kParse if malformed.
std::pair<std::string, uint16_t> ParseHostPort(const std::string& endpoint);

// Retries refused connections until the deadline (peers may still be
// starting). kTimeout naming the endpoint if it never comes up.
std::unique_ptr<ByteStream> TcpConnect(const std::string& host, uint16_t port,
                                       Clock::time_point deadline);

class TcpListener {
 public:
  // Port 0 picks a free port; see port().
  TcpListener(const std::string& host, uint16_t port);
  ~TcpListener();
  TcpListener(const TcpListener&) = delete;
  TcpListener& operator=(const TcpListener&) = delete;

  uint16_t port() const { return port_; }
  std::unique_ptr<ByteStream> Accept(Clock::time_point deadline);

 private:
  int fd_ = -1;
  uint16_t port_ = 0;
};

enum class Direction : uint8_t { kSent = 0, kReceived = 1 };

// Frames on one party pair. Outbound frames carry consecutive sequence
// numbers from 0; inbound frames must do the same (kDesync otherwise) and
// carry this session's id (kProtocol otherwise).
class Connection {
 public:
  Connection(std::unique_ptr<ByteStream> stream, const SessionId& session,
             const RingModulus& modulus, std::string peer_name);
  ~Connection();
  Connection(const Connection&) = delete;
  Connection& operator=(const Connection&) = delete;

  const std::string& peer_name() const { return peer_name_; }
  void set_peer_name(std::string name) { peer_name_ = std::move(name); }

  void Send(const Message& message);
  // Raw frame send; seq is assigned here. Used by tests to inject frames.
  void SendFrame(MessageType type, std::vector<uint8_t> payload);

  // Next message. An inbound ERROR notice is rethrown as an Error carrying
  // the peer's code. HEARTBEATs are skipped.
  Message Receive(Millis timeout);

  // Receives and checks the type; kProtocol naming both types otherwise.
  template <typename T>
  T ReceiveAs(Millis timeout) {
    Message m = Receive(timeout);
    if (!std::holds_alternative<T>(m)) UnexpectedType(TypeOf(m), kTypeOf<T>);
    return std::get<T>(std::move(m));
  }

  // Inbound types outside the set raise kProtocol. Empty set allows all.
  void set_allowed_inbound(std::set<MessageType> types) { allowed_ = std::move(types); }

  // Called with every frame's encoded bytes as sent or received.
  using Observer = std::function<void(Direction, MessageType, std::span<const uint8_t>)>;
  void set_observer(Observer observer) { observer_ = std::move(observer); }

  // Rewrites every outgoing message before it is framed; fault injection.
  using SendFilter = std::function<void(Message&)>;
  void set_send_filter(SendFilter filter) { send_filter_ = std::move(filter); }

  // Best-effort ERROR notice to the peer.
  void NotifyError(const Error& e);
  void Close();
  void Reset();

  uint64_t bytes_sent() const { return bytes_sent_; }
  uint64_t bytes_received() const { return bytes_received_; }

 private:
  [[noreturn]] void UnexpectedType(MessageType got, MessageType want) const;
  Frame ReadFrame(Clock::time_point deadline);

  std::unique_ptr<ByteStream> stream_;
  SessionId session_;
  RingModulus modulus_;
  std::string peer_name_;
  FrameDecoder decoder_;
  std::mutex send_mu_;
  uint64_t next_send_seq_ = 0;
  uint64_t next_recv_seq_ = 0;
  std::set<MessageType> allowed_;
  Observer observer_;
  SendFilter send_filter_;
  uint64_t bytes_sent_ = 0;
  uint64_t bytes_received_ = 0;
};

}  // namespace pricure

#endif  // PRICURE_TRANSPORT_H_
