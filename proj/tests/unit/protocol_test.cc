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

#include "pricure/protocol.h"

#include <set>
#include <thread>

#include "common/stats.h"
#include "gtest/gtest.h"
#include "pricure/errors.h"
#include "pricure/local_two_party.h"
#include "pricure/runtime.h"

namespace pricure {
namespace {

ErrorCode CodeOf(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kOk;
}

std::string MessageOf(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

SessionConfig Config(const std::string& spec, uint32_t owners = 1, uint64_t rounds = 1) {
  SessionConfig cfg;
  Rng rng(17);
  cfg.session = RandomSessionId(rng);
  cfg.spec = NetworkSpec::Parse(spec);
  cfg.owners = owners;
  cfg.rounds = rounds;
  cfg.privacy.mode = AggregationMode::kNoNoise;
  cfg.timeout_ms = 5000;
  return cfg;
}

// Runs WorkerInfer on both workers in-process and reconstructs the output.
class LocalInference {
 public:
  explicit LocalInference(const SessionConfig& cfg)
      : cfg_(cfg),
        dealer_(99),
        a_(WorkerId::kA, cfg.session, cfg.codec(), &link_.endpoint(WorkerId::kA),
           &dealer_.endpoint(WorkerId::kA)),
        b_(WorkerId::kB, cfg.session, cfg.codec(), &link_.endpoint(WorkerId::kB),
           &dealer_.endpoint(WorkerId::kB)) {}

  RingTensor Run(const std::pair<ModelShare, ModelShare>& model,
                 const std::pair<InputShare, InputShare>& input,
                 const std::pair<TripleBatch, TripleBatch>& batch) {
    Partial pa, pb;
    RunTwoParty(
        link_, &dealer_, [&] { pa = WorkerInfer(a_, cfg_, model.first, input.first, batch.first); },
        [&] { pb = WorkerInfer(b_, cfg_, model.second, input.second, batch.second); });
    EXPECT_EQ(pa.worker, WorkerId::kA);
    EXPECT_EQ(pb.worker, WorkerId::kB);
    return Add(pa.value, pb.value);
  }

 private:
  SessionConfig cfg_;
  LocalPeerLink link_;
  LocalSignService dealer_;
  ShareEngine a_;
  ShareEngine b_;
};

TEST(SessionConfigTest, JsonRoundTripAndHash) {
  SessionConfig cfg = Config("784-128-64-10", 50, 100);
  cfg.privacy.mode = AggregationMode::kVoteHistogram;
  cfg.budget_cap = 1.0;
  const SessionConfig back = SessionConfig::FromJson(cfg.ToJson());
  EXPECT_EQ(back.ToJson(), cfg.ToJson());
  EXPECT_EQ(back.Hash(), cfg.Hash());

  std::vector<std::function<void(SessionConfig&)>> tweaks = {
      [](SessionConfig& c) { c.session[0] ^= 1; },
      [](SessionConfig& c) { c.scale = 1000; },
      [](SessionConfig& c) { c.owners = 49; },
      [](SessionConfig& c) { c.spec.hidden_dims[0] = 127; },
      [](SessionConfig& c) { c.privacy.epsilon = 0.5; },
      [](SessionConfig& c) { c.privacy.mode = AggregationMode::kScoreSum; },
      [](SessionConfig& c) { c.budget_cap = BudgetLedger::kUnlimited; },
      [](SessionConfig& c) { c.rounds = 99; },
      [](SessionConfig& c) { c.modulus = RingModulus(251); },
  };
  std::set<ConfigHash> seen{cfg.Hash()};
  for (auto& tweak : tweaks) {
    SessionConfig t = cfg;
    tweak(t);
    EXPECT_TRUE(seen.insert(t.Hash()).second) << t.ToJson();
  }
}

TEST(SessionConfigTest, MalformedJsonIsParseError) {
  EXPECT_EQ(CodeOf([] { SessionConfig::FromJson("{"); }), ErrorCode::kParse);
  EXPECT_EQ(CodeOf([] { SessionConfig::FromJson("{\"format\":\"pricure-session/1\"}"); }),
            ErrorCode::kParse);
  std::string text = Config("4-2").ToJson();
  text.replace(text.find("\"4-2\""), 5, "\"4-x\"");
  EXPECT_EQ(CodeOf([&] { SessionConfig::FromJson(text); }), ErrorCode::kParse);
}

TEST(OwnerShareTest, ReconstructsEncodedModelExactly) {
  const SessionConfig cfg = Config("30-500-4", 3);
  const ModelParameters params = GenerateFixture(cfg.spec, 4);
  Rng r1(1), r2(2);
  const auto s1 = OwnerShareModel(cfg, 2, params, r1);
  const auto s2 = OwnerShareModel(cfg, 2, params, r2);
  const EncodedModel want = EncodeModel(params, cfg.codec());
  for (const auto* s : {&s1, &s2}) {
    const EncodedModel got = ReconstructModel(cfg, s->first, s->second);
    EXPECT_EQ(got.weights, want.weights);
    EXPECT_EQ(got.biases, want.biases);
    EXPECT_EQ(s->first.owner, 2u);
  }
  EXPECT_NE(s1.first.weights, s2.first.weights);
  EXPECT_EQ(s1.first.weights[0].dims(), (std::vector<uint32_t>{30, 500}));
  EXPECT_EQ(s1.first.weights[1].dims(), (std::vector<uint32_t>{500, 4}));
}

TEST(OwnerShareTest, RejectsSpecMismatchAndBadOwner) {
  const SessionConfig cfg = Config("30-500-4", 3);
  Rng rng(1);
  EXPECT_EQ(CodeOf([&] { OwnerShareModel(cfg, 1, GenerateFixture(PresetSpec("blobs"), 1), rng); }),
            ErrorCode::kContract);
  EXPECT_EQ(CodeOf([&] { OwnerShareModel(cfg, 0, GenerateFixture(cfg.spec, 1), rng); }),
            ErrorCode::kContract);
  EXPECT_EQ(CodeOf([&] { OwnerShareModel(cfg, 4, GenerateFixture(cfg.spec, 1), rng); }),
            ErrorCode::kContract);
}

TEST(ClientShareTest, ReconstructsTruncatedInput) {
  const SessionConfig cfg = Config("4-3-2");
  Rng rng(8);
  const std::vector<double> x{0.456, -1.239, 3.0, 0.0};
  const auto [a, b] = ClientShareInput(cfg, 7, x, rng);
  EXPECT_EQ(a.round, 7u);
  const auto codec = cfg.codec();
  const auto decoded = codec.DecodeVector(Add(a.value, b.value));
  EXPECT_EQ(decoded, (std::vector<double>{0.45, -1.23, 3.0, 0.0}));
  EXPECT_EQ(CodeOf([&] { ClientShareInput(cfg, 0, std::vector<double>{1, 2}, rng); }),
            ErrorCode::kContract);
  EXPECT_EQ(PresetSpec("mnist").input_dim, 784u);
}

TEST(ClientShareTest, WorkerShareIsUniformUnderSmallModulus) {
  SessionConfig cfg = Config("1-1");
  cfg.modulus = RingModulus(251);
  cfg.scale = 10;
  Rng rng(3);
  std::vector<uint64_t> counts(251, 0);
  const std::vector<double> x{1.5};  // fixed secret
  for (int i = 0; i < 251 * 400; ++i) {
    ++counts[ClientShareInput(cfg, 0, x, rng).first.value[0]];
  }
  EXPECT_GT(testing::UniformChiSquarePValue(counts), 0.001);
}

TEST(DealerTest, InventoryMatchesSpecAndTriplesAreValid) {
  const SessionConfig cfg = Config("784-128-64-10", 2, 3);
  const auto [a, b] = DealerProvision(cfg, 1, 2, 42);
  const InventoryCounts want{3, 3, 128 + 64};
  EXPECT_EQ(ExpectedInventory(cfg.spec), want);
  EXPECT_EQ(CountInventory(a), want);
  EXPECT_EQ(CountInventory(b), want);
  EXPECT_EQ(a.round, 1u);
  EXPECT_EQ(a.owner, 2u);
  for (size_t j = 0; j < a.layers.size(); ++j) {
    const BeaverTriple& ta = a.layers[j].matmul;
    const BeaverTriple& tb = b.layers[j].matmul;
    EXPECT_EQ(ta.id, MaterialId(cfg, 1, 2, j, MaterialSlot::kMatMul));
    EXPECT_EQ(MatMul(Add(ta.q1, tb.q1), Add(ta.q2, tb.q2)), Add(ta.q3, tb.q3)) << "layer " << j;
  }
  const auto again = DealerProvision(cfg, 1, 2, 42);
  EXPECT_EQ(again.first, a);
  EXPECT_EQ(again.second, b);
  EXPECT_NE(DealerProvision(cfg, 1, 2, 43).first, a);
}

TEST(DealerTest, MaterialIdsAreUniqueAcrossSession) {
  const SessionConfig cfg = Config("8-16-16-4", 5, 7);
  std::set<uint64_t> ids;
  for (uint64_t r = 0; r < cfg.rounds; ++r) {
    for (uint32_t o = 1; o <= cfg.owners; ++o) {
      for (size_t j = 0; j < cfg.spec.layer_count(); ++j) {
        for (auto slot : {MaterialSlot::kMatMul, MaterialSlot::kTruncation, MaterialSlot::kRelu}) {
          const uint64_t id = MaterialId(cfg, r, o, j, slot);
          for (uint64_t k = 0; k < (slot == MaterialSlot::kRelu ? 3u : 1u); ++k) {
            EXPECT_TRUE(ids.insert(id + k).second);
          }
        }
      }
    }
  }
}

TEST(WorkerInferTest, LinearNetMatchesFixedPointExactly) {
  const SessionConfig cfg = Config("6-3");
  const ModelParameters params = GenerateFixture(cfg.spec, 11);
  Rng rng(2);
  const auto model = OwnerShareModel(cfg, 1, params, rng);
  LocalInference inf(cfg);
  for (uint64_t r = 0; r < 20; ++r) {
    std::vector<double> x(6);
    for (double& v : x) v = rng.UniformInt(-300, 300) / 100.0;
    const RingTensor got =
        inf.Run(model, ClientShareInput(cfg, r, x, rng), DealerProvision(cfg, r, 1, 5));
    EXPECT_EQ(got, ForwardFixed(params, x, cfg.codec())) << "round " << r;
  }
}

TEST(WorkerInferTest, DeepNetMatchesFixedPointExactly) {
  const SessionConfig cfg = Config("784-128-64-10");
  const ModelParameters params = GenerateFixture(cfg.spec, 12);
  Rng rng(3);
  const auto model = OwnerShareModel(cfg, 1, params, rng);
  LocalInference inf(cfg);
  for (uint64_t r = 0; r < 5; ++r) {
    std::vector<double> x(784);
    for (double& v : x) v = rng.UniformInt(0, 100) / 100.0;
    const RingTensor got =
        inf.Run(model, ClientShareInput(cfg, r, x, rng), DealerProvision(cfg, r, 1, 5));
    EXPECT_EQ(got, ForwardFixed(params, x, cfg.codec()));
  }
}

TEST(WorkerInferTest, ZeroNetGivesZero) {
  const SessionConfig cfg = Config("5-4-3");
  ModelParameters params = GenerateFixture(cfg.spec, 1);
  for (auto& l : params.layers) {
    std::fill(l.weights.begin(), l.weights.end(), 0.0);
    std::fill(l.bias.begin(), l.bias.end(), 0.0);
  }
  Rng rng(4);
  LocalInference inf(cfg);
  const RingTensor got = inf.Run(OwnerShareModel(cfg, 1, params, rng),
                                 ClientShareInput(cfg, 0, std::vector<double>(5, 0.0), rng),
                                 DealerProvision(cfg, 0, 1, 1));
  for (uint64_t v : got.data()) EXPECT_EQ(v, 0u);
}

TEST(WorkerInferTest, RejectsWrongOrReusedMaterial) {
  const SessionConfig cfg = Config("5-4-3", 2, 2);
  const ModelParameters params = GenerateFixture(cfg.spec, 1);
  Rng rng(5);
  const auto model = OwnerShareModel(cfg, 1, params, rng);
  const auto input = ClientShareInput(cfg, 0, std::vector<double>(5, 0.5), rng);
  LocalInference inf(cfg);

  // Batch for another owner or round.
  EXPECT_EQ(CodeOf([&] { inf.Run(model, input, DealerProvision(cfg, 0, 2, 1)); }),
            ErrorCode::kProtocol);
  EXPECT_EQ(CodeOf([&] { inf.Run(model, input, DealerProvision(cfg, 1, 1, 1)); }),
            ErrorCode::kProtocol);

  // Missing layer material.
  auto short_batch = DealerProvision(cfg, 0, 1, 1);
  short_batch.first.layers.pop_back();
  short_batch.second.layers.pop_back();
  EXPECT_NE(MessageOf([&] { inf.Run(model, input, short_batch); }).find("exhausted"),
            std::string::npos);

  // Same material twice in one engine.
  const auto batch = DealerProvision(cfg, 0, 1, 1);
  LocalInference fresh(cfg);
  fresh.Run(model, input, batch);
  EXPECT_EQ(CodeOf([&] { fresh.Run(model, input, batch); }), ErrorCode::kTripleReuse);
}

Partial OneHotPartial(const SessionConfig& cfg, uint64_t round, uint32_t owner, WorkerId w,
                      uint32_t cls, Rng& rng) {
  std::vector<double> out(cfg.spec.output_dim, 0.0);
  out[cls] = 1.0;
  const auto split = SplitSecret(cfg.codec().EncodeVector(out), cfg.session, rng);
  return Partial{round, owner, w, w == WorkerId::kA ? split.first.value : split.second.value};
}

// Feeds matching A/B partials whose reconstruction votes for `votes[i]`.
void FeedVotes(AggregatorState& s, const SessionConfig& cfg, uint64_t round,
               const std::vector<uint32_t>& votes, Rng& rng) {
  for (uint32_t i = 0; i < votes.size(); ++i) {
    std::vector<double> out(cfg.spec.output_dim, 0.0);
    out[votes[i]] = 1.0;
    const auto split = SplitSecret(cfg.codec().EncodeVector(out), cfg.session, rng);
    s.Accept(Partial{round, i + 1, WorkerId::kA, split.first.value}, WorkerId::kA);
    s.Accept(Partial{round, i + 1, WorkerId::kB, split.second.value}, WorkerId::kB);
  }
}

TEST(AggregatorTest, NoiselessSingleModelIsArgmax) {
  const SessionConfig cfg = Config("2-5", 1);
  AggregatorState s(cfg, 1);
  s.BeginRound(0);
  Rng rng(1);
  const auto split =
      SplitSecret(cfg.codec().EncodeVector(std::vector<double>{0.1, -2, 3.5, 3.49, 0}),
                  cfg.session, rng);
  s.Accept({0, 1, WorkerId::kA, split.first.value}, WorkerId::kA);
  EXPECT_FALSE(s.Complete());
  s.Accept({0, 1, WorkerId::kB, split.second.value}, WorkerId::kB);
  const AggregatedRound r = s.Finish();
  EXPECT_EQ(r.release.label, 2u);
  EXPECT_FALSE(r.refused);
}

TEST(AggregatorTest, NoiselessMajorityVote) {
  const SessionConfig cfg = Config("2-8", 3);
  AggregatorState s(cfg, 1);
  Rng rng(2);
  s.BeginRound(0);
  FeedVotes(s, cfg, 0, {2, 2, 7}, rng);
  EXPECT_EQ(s.Finish().release.label, 2u);
}

TEST(AggregatorTest, RejectsDuplicatesAndStrays) {
  const SessionConfig cfg = Config("2-3", 2);
  AggregatorState s(cfg, 1);
  Rng rng(3);
  s.BeginRound(4);
  s.Accept(OneHotPartial(cfg, 4, 1, WorkerId::kA, 0, rng), WorkerId::kA);
  EXPECT_EQ(CodeOf([&] { s.Accept(OneHotPartial(cfg, 4, 1, WorkerId::kA, 0, rng), WorkerId::kA); }),
            ErrorCode::kProtocol);
  EXPECT_EQ(CodeOf([&] { s.Accept(OneHotPartial(cfg, 3, 2, WorkerId::kA, 0, rng), WorkerId::kA); }),
            ErrorCode::kProtocol);
  EXPECT_EQ(CodeOf([&] { s.Accept(OneHotPartial(cfg, 4, 3, WorkerId::kA, 0, rng), WorkerId::kA); }),
            ErrorCode::kProtocol);
  EXPECT_EQ(CodeOf([&] { s.Accept(OneHotPartial(cfg, 4, 2, WorkerId::kB, 0, rng), WorkerId::kA); }),
            ErrorCode::kProtocol);
  EXPECT_EQ(s.DescribeMissing(), "worker A: owner 2; worker B: owners 1, 2");
  EXPECT_EQ(CodeOf([&] { s.Finish(); }), ErrorCode::kProtocol);
}

TEST(AggregatorTest, NoisyVoteWinRateMatchesLaplaceDifference) {
  // 50 owners voting 30 / 20 at epsilon 0.05: class 0 wins when
  // L1 - L0 < 10, i.e. with probability 1 - P(L1 - L0 > 10).
  SessionConfig cfg = Config("2-2", 50, 1);
  cfg.privacy = {AggregationMode::kVoteHistogram, 0.05, 1.0, 1.0};
  std::vector<uint32_t> votes(30, 0);
  votes.resize(50, 1);
  AggregatorState s(cfg, 77);
  Rng rng(4);
  const int trials = 10000;
  int wins = 0;
  for (int t = 0; t < trials; ++t) {
    s.BeginRound(static_cast<uint64_t>(t));
    FeedVotes(s, cfg, static_cast<uint64_t>(t), votes, rng);
    const AggregatedRound r = s.Finish();
    EXPECT_EQ(r.release.aggregate, (std::vector<double>{30, 20}));
    wins += r.release.label == 0;
  }
  const double expected = 1.0 - testing::LaplaceDifferenceTail(10.0, 20.0);
  EXPECT_NEAR(static_cast<double>(wins) / trials, expected, 0.02 * expected);
}

TEST(AggregatorTest, BudgetRefusesAfterCap) {
  SessionConfig cfg = Config("2-2", 1, 25);
  cfg.privacy = {AggregationMode::kVoteHistogram, 0.05, 1.0, 1.0};
  cfg.budget_cap = 1.0;
  AggregatorState s(cfg, 1);
  Rng rng(5);
  int answered = 0;
  for (uint64_t r = 0; r < 25; ++r) {
    s.BeginRound(r);
    FeedVotes(s, cfg, r, {1}, rng);
    answered += !s.Finish().refused;
  }
  EXPECT_EQ(answered, 20);
}

TEST(SealTest, RoundTripsEveryLabel) {
  const BoxKeyPair client = BoxKeyPair::Generate();
  const BoxKeyPair agg = BoxKeyPair::Generate();
  for (uint32_t label = 0; label < 10; ++label) {
    const SealedResult s = SealLabel(label + 100, label, client.public_key, agg);
    EXPECT_EQ(OpenSealedLabel(s, label + 100, client, 10), label);
  }
}

TEST(SealTest, TamperingIsDetected) {
  const BoxKeyPair client = BoxKeyPair::Generate();
  const BoxKeyPair agg = BoxKeyPair::Generate();
  const SealedResult s = SealLabel(3, 1, client.public_key, agg);
  for (size_t bit = 0; bit < s.ciphertext.size() * 8; bit += 13) {
    SealedResult t = s;
    t.ciphertext[bit / 8] ^= static_cast<uint8_t>(1u << (bit % 8));
    EXPECT_EQ(CodeOf([&] { OpenSealedLabel(t, 3, client, 4); }), ErrorCode::kTamper);
  }
  SealedResult nonce = s;
  nonce.nonce[0] ^= 1;
  EXPECT_EQ(CodeOf([&] { OpenSealedLabel(nonce, 3, client, 4); }), ErrorCode::kTamper);
  EXPECT_EQ(CodeOf([&] { OpenSealedLabel(s, 3, BoxKeyPair::Generate(), 4); }), ErrorCode::kTamper);
  EXPECT_EQ(CodeOf([&] { OpenSealedLabel(s, 4, client, 4); }), ErrorCode::kTamper);
  EXPECT_EQ(CodeOf([&] { OpenSealedLabel(s, 3, client, 1); }), ErrorCode::kTamper);
}

TEST(HandshakeTest, ConfigMismatchIsDetected) {
  const SessionConfig cfg = Config("4-2");
  SessionConfig other = cfg;
  other.privacy.epsilon = 0.5;
  auto [x, y] = MakeLoopbackPair();
  Connection a(std::move(x), cfg.session, cfg.modulus, "b");
  Connection b(std::move(y), cfg.session, cfg.modulus, "a");
  SendHello(a, cfg, PartyRole::kDealer, 0);
  SendHello(b, other, PartyRole::kWorkerA, 0);
  EXPECT_EQ(CodeOf([&] { ReceiveHello(b, other); }), ErrorCode::kConfigMismatch);
  const Hello h = ReceiveHello(a, cfg.ToJson() == other.ToJson() ? cfg : other);
  EXPECT_EQ(CodeOf([&] { CheckPeer(h, PartyRole::kWorkerB, 0); }), ErrorCode::kProtocol);
}

// Aggregator driven by hand over loopback links.
class AggregatorHarness {
 public:
  explicit AggregatorHarness(SessionConfig cfg) : cfg_(std::move(cfg)) {
    for (auto* side : {&client_, &a_, &b_}) {
      auto [x, y] = MakeLoopbackPair();
      side->first = std::make_unique<Connection>(std::move(x), cfg_.session, cfg_.modulus, "agg");
      side->second = std::make_unique<Connection>(std::move(y), cfg_.session, cfg_.modulus, "peer");
    }
    thread_ = std::thread([this] {
      try {
        RunAggregator(cfg_, 1, *client_.second, *a_.second, *b_.second);
      } catch (const Error& e) {
        error_ = e;
      }
    });
  }
  ~AggregatorHarness() {
    if (thread_.joinable()) thread_.join();
  }
  Connection& client() { return *client_.first; }
  Connection& worker(WorkerId w) { return w == WorkerId::kA ? *a_.first : *b_.first; }
  std::optional<Error> Join() {
    thread_.join();
    return error_;
  }

 private:
  using Pair = std::pair<std::unique_ptr<Connection>, std::unique_ptr<Connection>>;
  SessionConfig cfg_;
  Pair client_, a_, b_;
  std::thread thread_;
  std::optional<Error> error_;
};

TEST(AggregatorLoopTest, TimeoutNamesMissingOwner) {
  SessionConfig cfg = Config("2-3", 2);
  cfg.timeout_ms = 300;
  AggregatorHarness h(cfg);
  Rng rng(1);
  h.client().Send(PublicKey{BoxKeyPair::Generate().public_key});
  h.worker(WorkerId::kA).Send(OneHotPartial(cfg, 0, 1, WorkerId::kA, 0, rng));
  h.worker(WorkerId::kA).Send(OneHotPartial(cfg, 0, 2, WorkerId::kA, 0, rng));
  h.worker(WorkerId::kB).Send(OneHotPartial(cfg, 0, 1, WorkerId::kB, 0, rng));
  const auto err = h.Join();
  ASSERT_TRUE(err.has_value());
  EXPECT_EQ(err->code(), ErrorCode::kTimeout);
  EXPECT_NE(std::string(err->what()).find("worker B: owner 2"), std::string::npos) << err->what();
}

TEST(AggregatorLoopTest, DuplicatePartialIsProtocolError) {
  const SessionConfig cfg = Config("2-3", 2);
  AggregatorHarness h(cfg);
  Rng rng(1);
  h.client().Send(PublicKey{BoxKeyPair::Generate().public_key});
  h.worker(WorkerId::kA).Send(OneHotPartial(cfg, 0, 1, WorkerId::kA, 0, rng));
  h.worker(WorkerId::kA).Send(OneHotPartial(cfg, 0, 1, WorkerId::kA, 0, rng));
  const auto err = h.Join();
  ASSERT_TRUE(err.has_value());
  EXPECT_EQ(err->code(), ErrorCode::kProtocol);
  // The aggregator told the sender why.
  EXPECT_EQ(CodeOf([&] { h.worker(WorkerId::kA).Receive(Millis(1000)); }), ErrorCode::kProtocol);
}

TEST(AggregatorLoopTest, ShareMessagesAreRefused) {
  const SessionConfig cfg = Config("2-3", 1);
  AggregatorHarness h(cfg);
  Rng rng(1);
  h.client().Send(ClientShareInput(cfg, 0, std::vector<double>{1, 2}, rng).first);
  const auto err = h.Join();
  ASSERT_TRUE(err.has_value());
  EXPECT_EQ(err->code(), ErrorCode::kProtocol);
  EXPECT_NE(std::string(err->what()).find("INPUT_SHARE"), std::string::npos) << err->what();
}

struct BlobSession {
  SessionConfig cfg;
  std::vector<ModelParameters> models;
  std::vector<std::vector<double>> inputs;
  std::vector<uint32_t> labels;
};

BlobSession MakeBlobSession(uint32_t owners, uint32_t rounds, AggregationMode mode,
                            double epsilon) {
  BlobSession s;
  s.cfg = Config("8-16-4", owners, rounds);
  s.cfg.privacy = {mode, epsilon, 1.0, 1.0};
  for (uint32_t i = 0; i < owners; ++i) {
    s.models.push_back(NearestMeanModel(FitClassMeans(MakeBlobs(25, 4, 8, 100 + i))));
  }
  const SyntheticDataset test = MakeBlobs((rounds + 3) / 4, 4, 8, 7);
  s.inputs.assign(test.features.begin(), test.features.begin() + rounds);
  s.labels.assign(test.labels.begin(), test.labels.begin() + rounds);
  return s;
}

TEST(SessionTest, NoiselessLabelsMatchPlaintextEnsemble) {
  const BlobSession s = MakeBlobSession(3, 12, AggregationMode::kNoNoise, 1.0);
  RunOptions opts;
  opts.record_transcript = true;
  const SessionOutcome out = RunSession(s.cfg, s.models, s.inputs, 9, LoopbackStreams(), opts);
  ASSERT_EQ(out.client.rounds.size(), 12u);
  const auto codec = s.cfg.codec();
  for (size_t r = 0; r < s.inputs.size(); ++r) {
    std::vector<std::vector<double>> outs;
    for (size_t i = 0; i < s.models.size(); ++i) {
      const RingTensor want = ForwardFixed(s.models[i], s.inputs[r], codec);
      EXPECT_EQ(out.aggregator.rounds[r].outputs[i], want);
      outs.push_back(codec.DecodeVector(want));
    }
    ASSERT_TRUE(out.client.rounds[r].label.has_value());
    EXPECT_EQ(*out.client.rounds[r].label, PlaintextEnsembleLabel(outs, s.cfg.privacy));
  }
  EXPECT_EQ(out.dealer.batches, 12u * 3u);
  EXPECT_EQ(out.dealer.sign_requests, 12u * 3u * 2u);

  // Transcript properties.
  std::set<std::string> owner_peers;
  for (const TranscriptEntry& e : out.transcript) {
    if (e.to == "aggregator") {
      EXPECT_TRUE(e.type != MessageType::kModelShare && e.type != MessageType::kInputShare &&
                  e.type != MessageType::kTripleBatch && e.type != MessageType::kOpen)
          << MessageTypeName(e.type) << " from " << e.from;
    }
    if (e.from.rfind("owner", 0) == 0) owner_peers.insert(e.to);
    if (e.to.rfind("owner", 0) == 0) owner_peers.insert(e.from);
  }
  EXPECT_EQ(owner_peers, (std::set<std::string>{"worker A", "worker B"}));
}

TEST(SessionTest, LoopbackAndTcpGiveIdenticalNoisyLabels) {
  const BlobSession s = MakeBlobSession(4, 10, AggregationMode::kVoteHistogram, 0.3);
  const SessionOutcome loop = RunSession(s.cfg, s.models, s.inputs, 21, LoopbackStreams());
  const SessionOutcome tcp = RunSession(s.cfg, s.models, s.inputs, 21, LocalTcpStreams());
  for (size_t r = 0; r < s.inputs.size(); ++r) {
    EXPECT_EQ(loop.client.rounds[r].label, tcp.client.rounds[r].label);
    EXPECT_EQ(loop.aggregator.rounds[r].release.noised, tcp.aggregator.rounds[r].release.noised);
  }
}

TEST(SessionTest, BudgetCapRefusesLaterRounds) {
  BlobSession s = MakeBlobSession(2, 25, AggregationMode::kVoteHistogram, 0.05);
  s.cfg.budget_cap = 1.0;
  const SessionOutcome out = RunSession(s.cfg, s.models, s.inputs, 3, LoopbackStreams());
  int answered = 0;
  for (size_t r = 0; r < out.client.rounds.size(); ++r) {
    answered += out.client.rounds[r].label.has_value();
    EXPECT_EQ(out.client.rounds[r].label.has_value(), r < 20) << r;
  }
  EXPECT_EQ(answered, 20);
  EXPECT_NEAR(out.aggregator.spent, 1.0, 1e-9);
}

TEST(SessionTest, TamperedSealIsReportedByClient) {
  const BlobSession s = MakeBlobSession(1, 2, AggregationMode::kNoNoise, 1.0);
  RunOptions opts;
  opts.mutate = [](const std::string& from, const std::string&, Message& m) {
    if (auto* sealed = std::get_if<SealedResult>(&m); sealed && from == "aggregator") {
      sealed->ciphertext[0] ^= 0x40;
    }
  };
  try {
    RunSession(s.cfg, s.models, s.inputs, 3, LoopbackStreams(), opts);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kTamper);
    EXPECT_EQ(std::string(e.what()).rfind("client: ", 0), 0u) << e.what();
  }
}

TEST(SessionTest, WorkerDesyncIsAttributed) {
  const BlobSession s = MakeBlobSession(1, 1, AggregationMode::kNoNoise, 1.0);
  RunOptions opts;
  opts.mutate = [](const std::string& from, const std::string& to, Message& m) {
    if (auto* o = std::get_if<Open>(&m); o && from == "worker B" && to == "worker A") {
      o->kind = o->kind == OpenKind::kBeaver ? OpenKind::kTruncate : OpenKind::kBeaver;
    }
  };
  try {
    RunSession(s.cfg, s.models, s.inputs, 3, LoopbackStreams(), opts);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDesync);
    EXPECT_EQ(std::string(e.what()).rfind("worker A: ", 0), 0u) << e.what();
  }
}

}  // namespace
}  // namespace pricure
