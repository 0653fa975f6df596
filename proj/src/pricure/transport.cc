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

#include "pricure/transport.h"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <condition_variable>
#include <cstring>
#include <thread>

#include "pricure/errors.h"

namespace pricure {

namespace {

// One direction of a byte stream. The TCP reader thread fills it from the
// socket; loopback writers fill it directly.
struct Pipe {
  std::mutex mu;
  std::condition_variable cv;
  std::vector<uint8_t> data;
  size_t head = 0;
  bool closed = false;
  bool reset = false;

  void Push(std::span<const uint8_t> bytes) {
    std::lock_guard<std::mutex> lock(mu);
    PRICURE_ENFORCE(!reset, ErrorCode::kConnectionReset, "connection reset");
    PRICURE_ENFORCE(!closed, ErrorCode::kConnectionReset, "write after close");
    if (head > 0 && head >= data.size() / 2) {
      data.erase(data.begin(), data.begin() + static_cast<ptrdiff_t>(head));
      head = 0;
    }
    data.insert(data.end(), bytes.begin(), bytes.end());
    cv.notify_all();
  }

  size_t Pop(std::span<uint8_t> buf, Clock::time_point deadline) {
    std::unique_lock<std::mutex> lock(mu);
    const bool ready = cv.wait_until(lock, deadline,
                                     [&] { return reset || closed || head < data.size(); });
    if (reset) Throw(ErrorCode::kConnectionReset, "connection reset by peer");
    if (head < data.size()) {
      const size_t n = std::min(buf.size(), data.size() - head);
      std::memcpy(buf.data(), data.data() + head, n);
      head += n;
      return n;
    }
    if (closed) return 0;
    if (!ready) Throw(ErrorCode::kTimeout, "receive deadline exceeded");
    return 0;
  }

  void Close() {
    std::lock_guard<std::mutex> lock(mu);
    closed = true;
    cv.notify_all();
  }
  void Reset() {
    std::lock_guard<std::mutex> lock(mu);
    reset = true;
    cv.notify_all();
  }
};

class LoopbackStream : public ByteStream {
 public:
  LoopbackStream(std::shared_ptr<Pipe> in, std::shared_ptr<Pipe> out)
      : in_(std::move(in)), out_(std::move(out)) {}
  ~LoopbackStream() override { out_->Close(); }

  void Write(std::span<const uint8_t> bytes) override { out_->Push(bytes); }
  size_t ReadSome(std::span<uint8_t> buf, Clock::time_point deadline) override {
    return in_->Pop(buf, deadline);
  }
  void Close() override { out_->Close(); }
  void Reset() override {
    out_->Reset();
    in_->Reset();
  }

 private:
  std::shared_ptr<Pipe> in_, out_;
};

class TcpStream : public ByteStream {
 public:
  explicit TcpStream(int fd) : fd_(fd), in_(std::make_shared<Pipe>()) {
    const int one = 1;
    setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    reader_ = std::thread([fd = fd_, in = in_] {
      std::vector<uint8_t> buf(1 << 16);
      while (true) {
        const ssize_t n = recv(fd, buf.data(), buf.size(), 0);
        if (n > 0) {
          try {
            in->Push(std::span(buf.data(), static_cast<size_t>(n)));
          } catch (const Error&) {
            return;
          }
        } else if (n == 0) {
          in->Close();
          return;
        } else if (errno != EINTR) {
          in->Reset();
          return;
        }
      }
    });
  }

  ~TcpStream() override {
    shutdown(fd_, SHUT_RDWR);
    if (reader_.joinable()) reader_.join();
    close(fd_);
  }

  void Write(std::span<const uint8_t> bytes) override {
    size_t off = 0;
    while (off < bytes.size()) {
      const ssize_t n = send(fd_, bytes.data() + off, bytes.size() - off, MSG_NOSIGNAL);
      if (n < 0) {
        if (errno == EINTR) continue;
        Throw(ErrorCode::kConnectionReset, std::string("send failed: ") + std::strerror(errno));
      }
      off += static_cast<size_t>(n);
    }
  }
  size_t ReadSome(std::span<uint8_t> buf, Clock::time_point deadline) override {
    return in_->Pop(buf, deadline);
  }
  void Close() override { shutdown(fd_, SHUT_WR); }
  void Reset() override {
    const linger lg{1, 0};
    setsockopt(fd_, SOL_SOCKET, SO_LINGER, &lg, sizeof(lg));
    shutdown(fd_, SHUT_RDWR);
    in_->Reset();
  }

 private:
  int fd_;
  std::shared_ptr<Pipe> in_;
  std::thread reader_;
};

int PollTimeoutMs(Clock::time_point deadline) {
  const auto left = std::chrono::duration_cast<Millis>(deadline - Clock::now()).count();
  return static_cast<int>(std::clamp<int64_t>(left, 0, 1000));
}

}  // namespace

std::pair<std::unique_ptr<ByteStream>, std::unique_ptr<ByteStream>> MakeLoopbackPair() {
  auto ab = std::make_shared<Pipe>();
  auto ba = std::make_shared<Pipe>();
  return {std::make_unique<LoopbackStream>(ba, ab), std::make_unique<LoopbackStream>(ab, ba)};
}

std::pair<std::string, uint16_t> ParseHostPort(const std::string& endpoint) {
  const size_t colon = endpoint.rfind(':');
  PRICURE_ENFORCE(colon != std::string::npos && colon > 0, ErrorCode::kParse,
                  "endpoint '" + endpoint + "' is not host:port");
  uint16_t port = 0;
  const char* begin = endpoint.data() + colon + 1;
  const char* end = endpoint.data() + endpoint.size();
  auto [ptr, ec] = std::from_chars(begin, end, port);
  PRICURE_ENFORCE(ec == std::errc() && ptr == end && begin != end, ErrorCode::kParse,
                  "endpoint '" + endpoint + "' has a bad port");
  return {endpoint.substr(0, colon), port};
}

std::unique_ptr<ByteStream> TcpConnect(const std::string& host, uint16_t port,
                                       Clock::time_point deadline) {
  const std::string where = host + ":" + std::to_string(port);
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const int rc = getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res);
  PRICURE_ENFORCE(rc == 0, ErrorCode::kTransport,
                  "cannot resolve " + where + ": " + gai_strerror(rc));
  std::unique_ptr<addrinfo, decltype(&freeaddrinfo)> guard(res, freeaddrinfo);
  std::string last_error = "no attempt";
  while (true) {
    const int fd = socket(res->ai_family, res->ai_socktype | SOCK_CLOEXEC, res->ai_protocol);
    PRICURE_ENFORCE(fd >= 0, ErrorCode::kTransport, "socket(): " + std::string(strerror(errno)));
    if (connect(fd, res->ai_addr, res->ai_addrlen) == 0) return std::make_unique<TcpStream>(fd);
    last_error = std::strerror(errno);
    close(fd);
    if (Clock::now() >= deadline) {
      Throw(ErrorCode::kTimeout, "could not connect to " + where + ": " + last_error);
    }
    std::this_thread::sleep_for(Millis(50));
  }
}

TcpListener::TcpListener(const std::string& host, uint16_t port) {
  fd_ = socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
  PRICURE_ENFORCE(fd_ >= 0, ErrorCode::kTransport, "socket(): " + std::string(strerror(errno)));
  const int one = 1;
  setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    close(fd_);
    Throw(ErrorCode::kParse, "listen address '" + host + "' is not an IPv4 address");
  }
  if (bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0 || listen(fd_, 64) != 0) {
    const std::string err = std::strerror(errno);
    close(fd_);
    Throw(ErrorCode::kTransport, "cannot listen on " + host + ":" + std::to_string(port) + ": " +
                                     err);
  }
  socklen_t len = sizeof(addr);
  getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
}

TcpListener::~TcpListener() {
  if (fd_ >= 0) close(fd_);
}

std::unique_ptr<ByteStream> TcpListener::Accept(Clock::time_point deadline) {
  while (true) {
    pollfd p{fd_, POLLIN, 0};
    const int rc = poll(&p, 1, PollTimeoutMs(deadline));
    if (rc > 0) {
      const int fd = accept4(fd_, nullptr, nullptr, SOCK_CLOEXEC);
      if (fd >= 0) return std::make_unique<TcpStream>(fd);
      if (errno != EINTR && errno != ECONNABORTED) {
        Throw(ErrorCode::kTransport, std::string("accept(): ") + std::strerror(errno));
      }
    } else if (rc < 0 && errno != EINTR) {
      Throw(ErrorCode::kTransport, std::string("poll(): ") + std::strerror(errno));
    }
    if (Clock::now() >= deadline) {
      Throw(ErrorCode::kTimeout, "no connection on port " + std::to_string(port_) +
                                     " before the deadline");
    }
  }
}

Connection::Connection(std::unique_ptr<ByteStream> stream, const SessionId& session,
                       const RingModulus& modulus, std::string peer_name)
    : stream_(std::move(stream)),
      session_(session),
      modulus_(modulus),
      peer_name_(std::move(peer_name)) {}

Connection::~Connection() = default;

void Connection::Send(const Message& message) {
  if (send_filter_) {
    Message copy = message;
    send_filter_(copy);
    SendFrame(TypeOf(copy), SerializePayload(copy));
    return;
  }
  SendFrame(TypeOf(message), SerializePayload(message));
}

void Connection::SendFrame(MessageType type, std::vector<uint8_t> payload) {
  std::lock_guard<std::mutex> lock(send_mu_);
  const std::vector<uint8_t> bytes =
      EncodeFrame(Frame{type, session_, next_send_seq_, std::move(payload)});
  try {
    stream_->Write(bytes);
  } catch (const Error& e) {
    Throw(e.code(), "sending " + std::string(MessageTypeName(type)) + " to " + peer_name_ +
                        ": " + e.what());
  }
  ++next_send_seq_;
  bytes_sent_ += bytes.size();
  if (observer_) observer_(Direction::kSent, type, bytes);
}

Frame Connection::ReadFrame(Clock::time_point deadline) {
  std::vector<uint8_t> buf(1 << 16);
  while (true) {
    if (std::optional<Frame> f = decoder_.Next()) return std::move(*f);
    size_t n = 0;
    try {
      n = stream_->ReadSome(buf, deadline);
    } catch (const Error& e) {
      Throw(e.code(), "receiving from " + peer_name_ + ": " + e.what());
    }
    if (n == 0) {
      Throw(ErrorCode::kConnectionReset,
            "connection closed by " + peer_name_ +
                (decoder_.buffered() ? " in the middle of a frame" : ""));
    }
    decoder_.Feed(std::span(buf.data(), n));
  }
}

Message Connection::Receive(Millis timeout) {
  const Clock::time_point deadline = Clock::now() + timeout;
  while (true) {
    Frame f = ReadFrame(deadline);
    bytes_received_ += kFrameHeaderSize + f.payload.size();
    PRICURE_ENFORCE(f.session == session_, ErrorCode::kProtocol,
                    std::string(MessageTypeName(f.type)) + " from " + peer_name_ +
                        " belongs to session " + SessionIdHex(f.session));
    PRICURE_ENFORCE(f.seq == next_recv_seq_, ErrorCode::kDesync,
                    std::string(MessageTypeName(f.type)) + " from " + peer_name_ +
                        " has sequence number " + std::to_string(f.seq) + ", expected " +
                        std::to_string(next_recv_seq_));
    ++next_recv_seq_;
    if (observer_) observer_(Direction::kReceived, f.type, EncodeFrame(f));
    if (!allowed_.empty() && !allowed_.count(f.type) && f.type != MessageType::kError) {
      Throw(ErrorCode::kProtocol, std::string(MessageTypeName(f.type)) + " from " + peer_name_ +
                                      " is not accepted on this link");
    }
    Message m = ParsePayload(f.type, f.payload, modulus_);
    if (auto* notice = std::get_if<ErrorNotice>(&m)) {
      const auto code = static_cast<ErrorCode>(notice->code);
      Throw(std::string(ErrorCodeName(code)) == "unknown" ? ErrorCode::kProtocol : code,
            peer_name_ + " reported: " + notice->message);
    }
    if (std::holds_alternative<Heartbeat>(m)) continue;
    return m;
  }
}

void Connection::UnexpectedType(MessageType got, MessageType want) const {
  Throw(ErrorCode::kProtocol, "expected " + std::string(MessageTypeName(want)) + " from " +
                                  peer_name_ + ", got " + MessageTypeName(got));
}

void Connection::NotifyError(const Error& e) {
  try {
    Send(ErrorNotice{static_cast<uint32_t>(e.code()), e.what()});
  } catch (const Error&) {
  }
}

void Connection::Close() { stream_->Close(); }
void Connection::Reset() { stream_->Reset(); }

}  // namespace pricure
