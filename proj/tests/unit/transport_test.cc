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

#include <algorithm>
#include <cstring>
#include <thread>

#include "common/random_messages.h"
#include "gtest/gtest.h"
#include "pricure/errors.h"
#include "pricure/wire.h"

namespace pricure {
namespace {

using testing::kQ;
using testing::RandomMessage;

ErrorCode CodeOf(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kOk;
}

Frame SampleFrame(MessageType type = MessageType::kHeartbeat) {
  Frame f;
  f.type = type;
  for (size_t i = 0; i < f.session.size(); ++i) f.session[i] = static_cast<uint8_t>(i);
  f.seq = 7;
  return f;
}

TEST(WireTest, MessageTagsMatchVariantIndex) {
  EXPECT_EQ(kTypeOf<Heartbeat>, MessageType::kHeartbeat);
  EXPECT_EQ(kTypeOf<TripleBatch>, MessageType::kTripleBatch);
  EXPECT_EQ(kTypeOf<BudgetRefused>, MessageType::kBudgetRefused);
  EXPECT_EQ(kTypeOf<Bye>, MessageType::kBye);
  EXPECT_EQ(std::variant_size_v<Message>, size_t{kMaxMessageType} + 1);
}

TEST(WireTest, HeartbeatFrameLayout) {
  const std::vector<uint8_t> bytes = EncodeFrame(SampleFrame());
  ASSERT_EQ(bytes.size(), kFrameHeaderSize);
  EXPECT_EQ(std::vector<uint8_t>(bytes.begin(), bytes.begin() + 4),
            std::vector<uint8_t>({'P', 'R', 'C', 'R'}));
  EXPECT_EQ(bytes[4], 1);
  EXPECT_EQ(bytes[5], 0);
  EXPECT_EQ(bytes[6], 0);
  EXPECT_EQ(bytes[21], 15);
  EXPECT_EQ(bytes[22], 7);  // seq, little-endian
  for (size_t i = 23; i < 38; ++i) EXPECT_EQ(bytes[i], 0) << i;
  EXPECT_EQ(DecodeFrame(bytes), SampleFrame());
}

TEST(WireTest, FuzzedMessagesRoundTripThroughChunkedDecoder) {
  Rng rng(20260418);
  std::vector<Frame> sent;
  std::vector<Message> messages;
  std::vector<uint8_t> stream;
  for (uint64_t i = 0; i < 10000; ++i) {
    messages.push_back(RandomMessage(rng));
    Frame f = SampleFrame(TypeOf(messages.back()));
    f.seq = i;
    f.payload = SerializePayload(messages.back());
    const auto bytes = EncodeFrame(f);
    stream.insert(stream.end(), bytes.begin(), bytes.end());
    sent.push_back(std::move(f));
  }
  FrameDecoder decoder;
  size_t pos = 0, got = 0;
  while (pos < stream.size()) {
    const size_t n = std::min<size_t>(stream.size() - pos, rng.UniformInt(1, 300));
    decoder.Feed(std::span(stream.data() + pos, n));
    pos += n;
    while (auto f = decoder.Next()) {
      ASSERT_LT(got, sent.size());
      ASSERT_EQ(*f, sent[got]);
      ASSERT_EQ(ParsePayload(f->type, f->payload, kQ), messages[got]) << "message " << got;
      ++got;
    }
  }
  EXPECT_EQ(got, sent.size());
  EXPECT_EQ(decoder.buffered(), 0u);
}

TEST(WireTest, HeaderErrorsAreDistinct) {
  const std::vector<uint8_t> good = EncodeFrame(SampleFrame());
  auto corrupt = [&](size_t at, uint8_t v) {
    auto b = good;
    b[at] = v;
    return CodeOf([&] { DecodeFrame(b); });
  };
  EXPECT_EQ(corrupt(0, 'X'), ErrorCode::kBadMagic);
  EXPECT_EQ(corrupt(4, 2), ErrorCode::kBadVersion);
  EXPECT_EQ(corrupt(5, kMaxMessageType + 1), ErrorCode::kUnknownType);
  EXPECT_EQ(corrupt(37, 0x80), ErrorCode::kLengthOverflow);
  EXPECT_EQ(CodeOf([&] { DecodeFrame(std::span(good.data(), good.size() - 1)); }),
            ErrorCode::kShortRead);
  auto longer = good;
  longer.push_back(0);
  EXPECT_EQ(CodeOf([&] { DecodeFrame(longer); }), ErrorCode::kParse);

  Frame withBody = SampleFrame(MessageType::kBye);
  withBody.payload = {1, 2, 3};
  const auto body = EncodeFrame(withBody);
  EXPECT_EQ(CodeOf([&] { DecodeFrame(std::span(body.data(), body.size() - 1)); }),
            ErrorCode::kShortRead);
  EXPECT_EQ(CodeOf([&] { DecodeFrame(body, 2); }), ErrorCode::kLengthOverflow);
}

TEST(WireTest, IncrementalDecoderReportsHeaderErrorsEarly) {
  auto bytes = EncodeFrame(SampleFrame());
  bytes[0] = 'Z';
  FrameDecoder d;
  d.Feed(std::span(bytes.data(), 10));
  EXPECT_FALSE(d.Next().has_value());
  d.Feed(std::span(bytes.data() + 10, bytes.size() - 10));
  EXPECT_EQ(CodeOf([&] { d.Next(); }), ErrorCode::kBadMagic);
}

TEST(WireTest, MalformedPayloadsAreParseErrors) {
  const std::vector<uint8_t> junk = {1, 2, 3};
  for (uint8_t t = 1; t <= kMaxMessageType; ++t) {
    if (t == static_cast<uint8_t>(MessageType::kBye)) continue;
    EXPECT_EQ(CodeOf([&] { ParsePayload(static_cast<MessageType>(t), junk, kQ); }),
              ErrorCode::kParse)
        << MessageTypeName(static_cast<MessageType>(t));
  }
  EXPECT_EQ(CodeOf([&] { ParsePayload(MessageType::kBye, junk, kQ); }), ErrorCode::kParse);

  // Element equal to q is out of range.
  std::vector<uint8_t> p = SerializePayload(SignShare{1, RingTensor::Vector(kQ, {5})});
  const uint64_t q = kQ.value();
  std::memcpy(p.data() + p.size() - 8, &q, 8);
  EXPECT_EQ(CodeOf([&] { ParsePayload(MessageType::kSignShare, p, kQ); }), ErrorCode::kParse);

  // A huge declared dimension must not allocate or read past the end.
  std::vector<uint8_t> huge = SerializePayload(SignShare{1, RingTensor::Vector(kQ, {})});
  const uint32_t big = 0xFFFFFFFF;
  std::memcpy(huge.data() + 12, &big, 4);
  EXPECT_EQ(CodeOf([&] { ParsePayload(MessageType::kSignShare, huge, kQ); }), ErrorCode::kParse);
}

struct LinkedPair {
  std::unique_ptr<Connection> left, right;
};

SessionId TestSession() { return SampleFrame().session; }

LinkedPair MakeLoopbackConnections() {
  auto [a, b] = MakeLoopbackPair();
  return {std::make_unique<Connection>(std::move(a), TestSession(), kQ, "right"),
          std::make_unique<Connection>(std::move(b), TestSession(), kQ, "left")};
}

LinkedPair MakeTcpConnections() {
  TcpListener listener("127.0.0.1", 0);
  const auto deadline = Clock::now() + std::chrono::seconds(5);
  std::unique_ptr<ByteStream> client;
  std::thread t([&] { client = TcpConnect("127.0.0.1", listener.port(), deadline); });
  auto server = listener.Accept(deadline);
  t.join();
  return {std::make_unique<Connection>(std::move(client), TestSession(), kQ, "right"),
          std::make_unique<Connection>(std::move(server), TestSession(), kQ, "left")};
}

class ConnectionTest : public ::testing::TestWithParam<bool> {
 protected:
  LinkedPair Make() { return GetParam() ? MakeTcpConnections() : MakeLoopbackConnections(); }
};

TEST_P(ConnectionTest, HeartbeatsAreSkipped) {
  auto p = Make();
  p.left->Send(Heartbeat{});
  p.left->Send(Bye{});
  EXPECT_TRUE(std::holds_alternative<Bye>(p.right->Receive(Millis(2000))));
}

TEST_P(ConnectionTest, LargeTensorEcho) {
  auto p = Make();
  std::vector<uint64_t> data(1 << 17);  // 1 MiB of elements
  for (size_t i = 0; i < data.size(); ++i) data[i] = i * 7919 % kQ.value();
  const SignShare big{42, RingTensor::Vector(kQ, data)};
  // Both ends send simultaneously before reading.
  std::thread t([&] { p.right->Send(big); });
  p.left->Send(big);
  t.join();
  EXPECT_EQ(p.right->ReceiveAs<SignShare>(Millis(5000)), big);
  EXPECT_EQ(p.left->ReceiveAs<SignShare>(Millis(5000)), big);
}

TEST_P(ConnectionTest, WrongTypeNamesBothTypes) {
  auto p = Make();
  p.left->Send(Bye{});
  try {
    p.right->ReceiveAs<Partial>(Millis(2000));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kProtocol);
    EXPECT_NE(std::string(e.what()).find(MessageTypeName(MessageType::kPartial)),
              std::string::npos);
    EXPECT_NE(std::string(e.what()).find(MessageTypeName(MessageType::kBye)), std::string::npos);
  }
}

TEST_P(ConnectionTest, TimeoutAndReset) {
  auto p = Make();
  EXPECT_EQ(CodeOf([&] { p.right->Receive(Millis(50)); }), ErrorCode::kTimeout);
  p.left->Close();
  EXPECT_EQ(CodeOf([&] { p.right->Receive(Millis(2000)); }), ErrorCode::kConnectionReset);
}

TEST_P(ConnectionTest, ErrorNoticeCarriesPeerCode) {
  auto p = Make();
  p.left->NotifyError(Error(ErrorCode::kBudgetExhausted, "no budget left"));
  try {
    p.right->Receive(Millis(2000));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kBudgetExhausted);
    EXPECT_NE(std::string(e.what()).find("no budget left"), std::string::npos);
  }
}

TEST_P(ConnectionTest, WhitelistRejectsOtherTypes) {
  auto p = Make();
  p.right->set_allowed_inbound({MessageType::kPartial});
  p.left->Send(ModelShare{});
  EXPECT_EQ(CodeOf([&] { p.right->Receive(Millis(2000)); }), ErrorCode::kProtocol);
}

INSTANTIATE_TEST_SUITE_P(Streams, ConnectionTest, ::testing::Values(false, true),
                         [](const auto& info) { return info.param ? "Tcp" : "Loopback"; });

TEST(ConnectionTest, OutOfOrderSequenceIsDesync) {
  auto [a, b] = MakeLoopbackPair();
  Connection reader(std::move(b), TestSession(), kQ, "writer");
  Frame f = SampleFrame(MessageType::kBye);
  f.seq = 1;  // expected 0
  a->Write(EncodeFrame(f));
  EXPECT_EQ(CodeOf([&] { reader.Receive(Millis(1000)); }), ErrorCode::kDesync);
}

TEST(ConnectionTest, ForeignSessionIsRejected) {
  auto [a, b] = MakeLoopbackPair();
  Connection reader(std::move(b), TestSession(), kQ, "writer");
  Frame f = SampleFrame(MessageType::kBye);
  f.seq = 0;
  f.session[0] ^= 1;
  a->Write(EncodeFrame(f));
  EXPECT_EQ(CodeOf([&] { reader.Receive(Millis(1000)); }), ErrorCode::kProtocol);
}

TEST(ConnectionTest, PartialFrameThenCloseIsReset) {
  auto [a, b] = MakeLoopbackPair();
  Connection reader(std::move(b), TestSession(), kQ, "writer");
  const auto bytes = EncodeFrame(SampleFrame());
  a->Write(std::span(bytes.data(), 10));
  a->Close();
  EXPECT_EQ(CodeOf([&] { reader.Receive(Millis(1000)); }), ErrorCode::kConnectionReset);
}

TEST(ConnectionTest, LoopbackAndTcpCarryIdenticalBytes) {
  Rng rng(99);
  std::vector<Message> script;
  for (int i = 0; i < 200; ++i) script.push_back(RandomMessage(rng));
  script.erase(std::remove_if(script.begin(), script.end(),
                              [](const Message& m) {
                                return std::holds_alternative<ErrorNotice>(m) ||
                                       std::holds_alternative<Heartbeat>(m);
                              }),
               script.end());
  auto capture = [&](LinkedPair p) {
    std::vector<uint8_t> sent, received;
    p.left->set_observer([&](Direction, MessageType, std::span<const uint8_t> b) {
      sent.insert(sent.end(), b.begin(), b.end());
    });
    p.right->set_observer([&](Direction, MessageType, std::span<const uint8_t> b) {
      received.insert(received.end(), b.begin(), b.end());
    });
    for (const auto& m : script) {
      p.left->Send(m);
      EXPECT_EQ(p.right->Receive(Millis(2000)), m);
    }
    EXPECT_EQ(sent, received);
    EXPECT_EQ(p.left->bytes_sent(), sent.size());
    EXPECT_EQ(p.right->bytes_received(), received.size());
    return sent;
  };
  EXPECT_EQ(capture(MakeLoopbackConnections()), capture(MakeTcpConnections()));
}

TEST(TransportTest, ParseHostPort) {
  EXPECT_EQ(ParseHostPort("127.0.0.1:7001"), std::make_pair(std::string("127.0.0.1"), uint16_t{7001}));
  EXPECT_EQ(CodeOf([] { ParseHostPort("localhost"); }), ErrorCode::kParse);
  EXPECT_EQ(CodeOf([] { ParseHostPort("h:99999"); }), ErrorCode::kParse);
  EXPECT_EQ(CodeOf([] { ParseHostPort("h:"); }), ErrorCode::kParse);
}

TEST(TransportTest, ConnectTimesOutNamingEndpoint) {
  uint16_t port;
  {
    TcpListener l("127.0.0.1", 0);
    port = l.port();
  }
  try {
    TcpConnect("127.0.0.1", port, Clock::now() + Millis(200));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kTimeout);
    EXPECT_NE(std::string(e.what()).find(std::to_string(port)), std::string::npos);
  }
}

}  // namespace
}  // namespace pricure
