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

#include <sodium.h>

#include <chrono>
#include <cmath>
#include <cstring>
#include <functional>

#include "json.hpp"
#include "pricure/errors.h"

namespace pricure {

namespace {

using Json = nlohmann::json;

void EnsureSodium() {
  static const int rc = sodium_init();
  PRICURE_ENFORCE(rc >= 0, ErrorCode::kInternal, "libsodium failed to initialize");
}

double MillisSince(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

std::string OwnerTag(uint32_t owner) { return "owner " + std::to_string(owner); }

void CheckOwner(const SessionConfig& cfg, uint32_t owner) {
  PRICURE_ENFORCE(owner >= 1 && owner <= cfg.owners, ErrorCode::kContract,
                  "owner index " + std::to_string(owner) + " outside 1.." +
                      std::to_string(cfg.owners));
}

// Sends BYE on every link, then requires BYE back from each. Sending first
// keeps the exchange free of ordering deadlocks.
void ExchangeBye(const std::vector<Connection*>& links, Millis timeout) {
  for (Connection* c : links) c->Send(Bye{});
  for (Connection* c : links) c->ReceiveAs<Bye>(timeout);
}

// Runs a party body; on failure tells every link why before rethrowing.
template <typename F>
auto Guarded(const std::vector<Connection*>& links, F&& body) {
  try {
    return body();
  } catch (const Error& e) {
    for (Connection* c : links) c->NotifyError(e);
    throw;
  }
}

class RemotePeer : public PeerChannel {
 public:
  RemotePeer(Connection& conn, Millis timeout) : conn_(conn), timeout_(timeout) {}
  std::vector<RingTensor> Exchange(OpenKind kind, const std::vector<RingTensor>& mine) override {
    conn_.Send(Open{kind, mine});
    Open theirs = conn_.ReceiveAs<Open>(timeout_);
    PRICURE_ENFORCE(theirs.kind == kind, ErrorCode::kDesync,
                    "peer opened kind " + std::to_string(static_cast<int>(theirs.kind)) +
                        " while this worker opened kind " +
                        std::to_string(static_cast<int>(kind)));
    return std::move(theirs.tensors);
  }

 private:
  Connection& conn_;
  Millis timeout_;
};

class RemoteSignService : public SignService {
 public:
  RemoteSignService(Connection& conn, Millis timeout) : conn_(conn), timeout_(timeout) {}
  RingTensor RequestSignShares(uint64_t mask_id, const RingTensor& m_share) override {
    conn_.Send(SignRequest{mask_id, m_share});
    SignShare reply = conn_.ReceiveAs<SignShare>(timeout_);
    PRICURE_ENFORCE(reply.mask_id == mask_id, ErrorCode::kDesync,
                    "dealer answered mask " + std::to_string(reply.mask_id) + ", expected " +
                        std::to_string(mask_id));
    PRICURE_ENFORCE(reply.share.SameShape(m_share), ErrorCode::kProtocol,
                    "dealer sign share has shape " + ShapeString(reply.share.dims()));
    return std::move(reply.share);
  }

 private:
  Connection& conn_;
  Millis timeout_;
};

}  // namespace

void SessionConfig::Validate() const {
  PRICURE_ENFORCE(scale >= 2, ErrorCode::kContract, "scale must be at least 2");
  PRICURE_ENFORCE(owners >= 1, ErrorCode::kContract, "a session needs at least one owner");
  PRICURE_ENFORCE(rounds >= 1, ErrorCode::kContract, "a session needs at least one round");
  PRICURE_ENFORCE(timeout_ms >= 1, ErrorCode::kContract, "timeout must be positive");
  PRICURE_ENFORCE(budget_cap > 0 && !std::isnan(budget_cap), ErrorCode::kContract,
                  "budget cap must be positive");
  spec.Validate();
  privacy.Validate();
}

std::string SessionConfig::ToJson() const {
  Json j;
  j["format"] = "pricure-session/1";
  j["session"] = SessionIdHex(session);
  j["modulus"] = std::to_string(modulus.value());
  j["scale"] = scale;
  j["owners"] = owners;
  j["spec"] = spec.ToString();
  j["privacy"] = {{"mode", AggregationModeName(privacy.mode)},
                  {"epsilon", privacy.epsilon},
                  {"sensitivity", privacy.sensitivity},
                  {"clip", privacy.clip}};
  j["budget_cap"] = std::isinf(budget_cap) ? Json(nullptr) : Json(budget_cap);
  j["rounds"] = rounds;
  j["timeout_ms"] = timeout_ms;
  return j.dump();
}

SessionConfig SessionConfig::FromJson(const std::string& text) {
  SessionConfig cfg;
  try {
    const Json j = Json::parse(text);
    PRICURE_ENFORCE(j.value("format", "") == "pricure-session/1", ErrorCode::kParse,
                    "session config format must be pricure-session/1");
    cfg.session = SessionIdFromHex(j.at("session").get<std::string>());
    cfg.modulus = RingModulus(std::stoull(j.at("modulus").get<std::string>()));
    cfg.scale = j.at("scale").get<uint32_t>();
    cfg.owners = j.at("owners").get<uint32_t>();
    cfg.spec = NetworkSpec::Parse(j.at("spec").get<std::string>());
    const Json& p = j.at("privacy");
    cfg.privacy.mode = ParseAggregationMode(p.at("mode").get<std::string>());
    cfg.privacy.epsilon = p.at("epsilon").get<double>();
    cfg.privacy.sensitivity = p.value("sensitivity", 1.0);
    cfg.privacy.clip = p.value("clip", 1.0);
    if (j.contains("budget_cap") && !j["budget_cap"].is_null()) {
      cfg.budget_cap = j["budget_cap"].get<double>();
    }
    cfg.rounds = j.at("rounds").get<uint64_t>();
    cfg.timeout_ms = j.value("timeout_ms", 30000u);
  } catch (const Json::exception& e) {
    Throw(ErrorCode::kParse, std::string("session config: ") + e.what());
  } catch (const std::logic_error& e) {
    Throw(ErrorCode::kParse, std::string("session config: bad modulus: ") + e.what());
  }
  cfg.Validate();
  return cfg;
}

ConfigHash SessionConfig::Hash() const {
  EnsureSodium();
  const std::string text = ToJson();
  ConfigHash h{};
  crypto_generichash(h.data(), h.size(), reinterpret_cast<const unsigned char*>(text.data()),
                     text.size(), nullptr, 0);
  return h;
}

uint64_t MaterialId(const SessionConfig& cfg, uint64_t round, uint32_t owner, size_t layer,
                    MaterialSlot slot) {
  const uint64_t per_owner = cfg.spec.layer_count();
  return ((round * cfg.owners + (owner - 1)) * per_owner + layer) * 8 +
         static_cast<uint64_t>(slot);
}

std::pair<ModelShare, ModelShare> OwnerShareModel(const SessionConfig& cfg, uint32_t owner,
                                                  const ModelParameters& params, Rng& rng) {
  CheckOwner(cfg, owner);
  params.Validate();
  PRICURE_ENFORCE(params.spec == cfg.spec, ErrorCode::kContract,
                  OwnerTag(owner) + " model is " + params.spec.ToString() +
                      " but the session expects " + cfg.spec.ToString());
  const EncodedModel enc = EncodeModel(params, cfg.codec());
  ModelShare a{owner, WorkerId::kA, {}, {}};
  ModelShare b{owner, WorkerId::kB, {}, {}};
  auto split = [&](const RingTensor& t, std::vector<RingTensor>& to_a,
                   std::vector<RingTensor>& to_b) {
    SharePair s = SplitSecret(t, cfg.session, rng);
    to_a.push_back(std::move(s.first.value));
    to_b.push_back(std::move(s.second.value));
  };
  for (size_t j = 0; j < enc.weights.size(); ++j) {
    split(enc.weights[j], a.weights, b.weights);
    split(enc.biases[j], a.biases, b.biases);
  }
  return {std::move(a), std::move(b)};
}

EncodedModel ReconstructModel(const SessionConfig& cfg, const ModelShare& a,
                              const ModelShare& b) {
  PRICURE_ENFORCE(a.worker == WorkerId::kA && b.worker == WorkerId::kB, ErrorCode::kProtocol,
                  "model bundles must be one for worker A and one for worker B");
  PRICURE_ENFORCE(a.owner == b.owner, ErrorCode::kProtocol,
                  "model bundles come from different owners");
  const size_t layers = cfg.spec.layer_count();
  PRICURE_ENFORCE(a.weights.size() == layers && b.weights.size() == layers &&
                      a.biases.size() == layers && b.biases.size() == layers,
                  ErrorCode::kProtocol, "model bundle has the wrong number of layers");
  EncodedModel m;
  m.spec = cfg.spec;
  for (size_t j = 0; j < layers; ++j) {
    const SessionId& s = cfg.session;
    m.weights.push_back(Reconstruct({WorkerId::kA, s, a.weights[j]}, {WorkerId::kB, s, b.weights[j]}));
    m.biases.push_back(Reconstruct({WorkerId::kA, s, a.biases[j]}, {WorkerId::kB, s, b.biases[j]}));
  }
  return m;
}

std::pair<InputShare, InputShare> ClientShareInput(const SessionConfig& cfg, uint64_t round,
                                                   std::span<const double> x, Rng& rng) {
  PRICURE_ENFORCE(x.size() == cfg.spec.input_dim, ErrorCode::kContract,
                  "input has " + std::to_string(x.size()) + " features, the session expects " +
                      std::to_string(cfg.spec.input_dim));
  SharePair s = SplitSecret(cfg.codec().EncodeVector(x), cfg.session, rng);
  return {InputShare{round, WorkerId::kA, std::move(s.first.value)},
          InputShare{round, WorkerId::kB, std::move(s.second.value)}};
}

std::pair<TripleBatch, TripleBatch> DealerProvision(const SessionConfig& cfg, uint64_t round,
                                                    uint32_t owner, uint64_t seed) {
  CheckOwner(cfg, owner);
  const FixedPointCodec codec = cfg.codec();
  Rng rng = Rng::Substream(seed, "triples/" + std::to_string(round) + "/" + std::to_string(owner));
  TripleBatch a{round, owner, WorkerId::kA, {}};
  TripleBatch b{round, owner, WorkerId::kB, {}};
  const size_t layers = cfg.spec.layer_count();
  for (size_t j = 0; j < layers; ++j) {
    const uint32_t rows = cfg.spec.LayerInputDim(j);
    const uint32_t cols = cfg.spec.LayerOutputDim(j);
    auto id = [&](MaterialSlot s) { return MaterialId(cfg, round, owner, j, s); };
    LayerMaterial la, lb;
    std::tie(la.matmul, lb.matmul) =
        MakeMatrixTriple(cfg.modulus, 1, rows, cols, id(MaterialSlot::kMatMul), rng);
    std::tie(la.truncation, lb.truncation) =
        MakeTruncationPairs(codec, cols, id(MaterialSlot::kTruncation), rng);
    if (j + 1 < layers) {
      auto masks = MakeReluMasks(codec, cols, id(MaterialSlot::kRelu), rng);
      la.relu = std::move(masks.first);
      lb.relu = std::move(masks.second);
    }
    a.layers.push_back(std::move(la));
    b.layers.push_back(std::move(lb));
  }
  return {std::move(a), std::move(b)};
}

InventoryCounts ExpectedInventory(const NetworkSpec& spec) {
  return {spec.layer_count(), spec.layer_count(), spec.TotalHiddenUnits()};
}

InventoryCounts CountInventory(const TripleBatch& batch) {
  InventoryCounts c;
  for (const LayerMaterial& l : batch.layers) {
    ++c.matmul_triples;
    ++c.truncation_pairs;
    if (l.relu) c.relu_units += l.relu->blind.size();
  }
  return c;
}

Partial WorkerInfer(ShareEngine& engine, const SessionConfig& cfg, const ModelShare& model,
                    const InputShare& input, const TripleBatch& batch) {
  const WorkerId self = engine.self();
  const std::string who = "worker " + std::string(WorkerName(self)) + ", " +
                          OwnerTag(model.owner) + ", round " + std::to_string(input.round);
  PRICURE_ENFORCE(model.worker == self && input.worker == self && batch.worker == self,
                  ErrorCode::kProtocol, who + ": received material addressed to the other worker");
  PRICURE_ENFORCE(batch.round == input.round && batch.owner == model.owner, ErrorCode::kProtocol,
                  who + ": dealer batch is for round " + std::to_string(batch.round) + ", " +
                      OwnerTag(batch.owner));
  const size_t layers = cfg.spec.layer_count();
  PRICURE_ENFORCE(model.weights.size() == layers && model.biases.size() == layers,
                  ErrorCode::kProtocol, who + ": model share has the wrong number of layers");
  PRICURE_ENFORCE(batch.layers.size() >= layers, ErrorCode::kProtocol,
                  who + ": dealer material exhausted after " +
                      std::to_string(batch.layers.size()) + " of " + std::to_string(layers) +
                      " layers");
  PRICURE_ENFORCE(batch.layers.size() == layers, ErrorCode::kProtocol,
                  who + ": dealer batch carries material for extra layers");
  PRICURE_ENFORCE(input.value.size() == cfg.spec.input_dim, ErrorCode::kProtocol,
                  who + ": input share has " + std::to_string(input.value.size()) + " values");

  const uint64_t f = engine.codec().scale();
  AdditiveShare h = engine.Wrap(input.value.Reshaped({1, cfg.spec.input_dim}));
  for (size_t j = 0; j < layers; ++j) {
    const LayerMaterial& mat = batch.layers[j];
    const uint32_t cols = cfg.spec.LayerOutputDim(j);
    auto expect_id = [&](uint64_t got, MaterialSlot slot, const char* what) {
      const uint64_t want = MaterialId(cfg, input.round, model.owner, j, slot);
      PRICURE_ENFORCE(got == want, ErrorCode::kProtocol,
                      who + ": layer " + std::to_string(j + 1) + " " + what + " has id " +
                          std::to_string(got) + ", expected " + std::to_string(want));
    };
    expect_id(mat.matmul.id, MaterialSlot::kMatMul, "matmul triple");
    expect_id(mat.truncation.id, MaterialSlot::kTruncation, "truncation pair");
    PRICURE_ENFORCE(model.biases[j].size() == cols, ErrorCode::kProtocol,
                    who + ": layer " + std::to_string(j + 1) + " bias share has the wrong size");

    AdditiveShare z = engine.BeaverMatMul(h, engine.Wrap(model.weights[j]), mat.matmul);
    z = AddShares(z, MulPublic(engine.Wrap(model.biases[j].Reshaped({1, cols})), f));
    z = engine.Truncate(z, mat.truncation);
    if (j + 1 < layers) {
      PRICURE_ENFORCE(mat.relu.has_value(), ErrorCode::kProtocol,
                      who + ": dealer material exhausted, no ReLU mask for layer " +
                          std::to_string(j + 1));
      expect_id(mat.relu->id, MaterialSlot::kRelu, "ReLU mask");
      z = engine.Relu(z, *mat.relu);
    } else {
      PRICURE_ENFORCE(!mat.relu.has_value(), ErrorCode::kProtocol,
                      who + ": dealer sent a ReLU mask for the output layer");
    }
    h = std::move(z);
  }
  return Partial{input.round, model.owner, self, h.value.Reshaped({cfg.spec.output_dim})};
}

BoxKeyPair BoxKeyPair::Generate() {
  EnsureSodium();
  BoxKeyPair kp;
  crypto_box_keypair(kp.public_key.data(), kp.secret_key.data());
  return kp;
}

SealedResult SealLabel(uint64_t round, uint32_t label, const BoxPublicKey& recipient,
                       const BoxKeyPair& sender) {
  EnsureSodium();
  std::array<uint8_t, 12> plain{};
  for (int i = 0; i < 8; ++i) plain[i] = static_cast<uint8_t>(round >> (8 * i));
  for (int i = 0; i < 4; ++i) plain[8 + i] = static_cast<uint8_t>(label >> (8 * i));
  SealedResult out;
  out.round = round;
  out.sender = sender.public_key;
  randombytes_buf(out.nonce.data(), out.nonce.size());
  out.ciphertext.resize(plain.size() + crypto_box_MACBYTES);
  PRICURE_ENFORCE(crypto_box_easy(out.ciphertext.data(), plain.data(), plain.size(),
                                  out.nonce.data(), recipient.data(),
                                  sender.secret_key.data()) == 0,
                  ErrorCode::kInternal, "sealing the result failed");
  return out;
}

uint32_t OpenSealedLabel(const SealedResult& sealed, uint64_t expected_round,
                         const BoxKeyPair& recipient, uint32_t classes) {
  EnsureSodium();
  std::array<uint8_t, 12> plain{};
  PRICURE_ENFORCE(sealed.ciphertext.size() == plain.size() + crypto_box_MACBYTES,
                  ErrorCode::kTamper, "sealed result has the wrong length");
  PRICURE_ENFORCE(crypto_box_open_easy(plain.data(), sealed.ciphertext.data(),
                                       sealed.ciphertext.size(), sealed.nonce.data(),
                                       sealed.sender.data(), recipient.secret_key.data()) == 0,
                  ErrorCode::kTamper, "sealed result failed authentication");
  uint64_t round = 0;
  uint32_t label = 0;
  for (int i = 0; i < 8; ++i) round |= uint64_t{plain[i]} << (8 * i);
  for (int i = 0; i < 4; ++i) label |= uint32_t{plain[8 + i]} << (8 * i);
  PRICURE_ENFORCE(round == expected_round && sealed.round == expected_round, ErrorCode::kTamper,
                  "sealed result is for round " + std::to_string(round) + ", expected " +
                      std::to_string(expected_round));
  PRICURE_ENFORCE(label < classes, ErrorCode::kTamper,
                  "sealed label " + std::to_string(label) + " is not a class");
  return label;
}

AggregatorState::AggregatorState(const SessionConfig& cfg, uint64_t seed)
    : cfg_(cfg), seed_(seed), ledger_(cfg.budget_cap) {
  cfg_.Validate();
}

void AggregatorState::BeginRound(uint64_t round) {
  round_ = round;
  open_ = true;
  for (auto& r : received_) r.assign(cfg_.owners, std::nullopt);
}

void AggregatorState::Accept(const Partial& p, WorkerId link) {
  PRICURE_ENFORCE(open_, ErrorCode::kProtocol, "partial outside a round");
  const std::string from = "worker " + std::string(WorkerName(link));
  PRICURE_ENFORCE(p.worker == link, ErrorCode::kProtocol,
                  from + " sent a partial labelled for worker " + WorkerName(p.worker));
  PRICURE_ENFORCE(p.round == round_, ErrorCode::kProtocol,
                  from + " sent a partial for round " + std::to_string(p.round) +
                      " during round " + std::to_string(round_));
  PRICURE_ENFORCE(p.owner >= 1 && p.owner <= cfg_.owners, ErrorCode::kProtocol,
                  from + " sent a partial for unknown " + OwnerTag(p.owner));
  PRICURE_ENFORCE(p.value.size() == cfg_.spec.output_dim && p.value.modulus() == cfg_.modulus,
                  ErrorCode::kProtocol,
                  from + " sent a malformed partial for " + OwnerTag(p.owner));
  auto& slot = received_[static_cast<int>(link)][p.owner - 1];
  PRICURE_ENFORCE(!slot.has_value(), ErrorCode::kProtocol,
                  from + " sent a second partial for " + OwnerTag(p.owner) + " in round " +
                      std::to_string(round_));
  slot = p.value;
}

bool AggregatorState::Complete() const {
  for (const auto& r : received_) {
    for (const auto& v : r) {
      if (!v) return false;
    }
  }
  return open_;
}

std::string AggregatorState::DescribeMissing() const {
  std::string out;
  for (int w = 0; w < 2; ++w) {
    std::vector<uint32_t> missing;
    for (uint32_t i = 0; i < received_[w].size(); ++i) {
      if (!received_[w][i]) missing.push_back(i + 1);
    }
    if (missing.empty()) continue;
    if (!out.empty()) out += "; ";
    out += "worker " + std::string(WorkerName(static_cast<WorkerId>(w))) +
           (missing.size() == 1 ? ": owner " : ": owners ");
    for (size_t k = 0; k < missing.size(); ++k) {
      out += (k ? ", " : "") + std::to_string(missing[k]);
    }
  }
  return out;
}

AggregatedRound AggregatorState::Finish() {
  PRICURE_ENFORCE(Complete(), ErrorCode::kProtocol,
                  "round " + std::to_string(round_) + " is missing partials from " +
                      DescribeMissing());
  open_ = false;
  AggregatedRound out;
  out.round = round_;
  const FixedPointCodec codec = cfg_.codec();
  std::vector<std::vector<double>> scores;
  for (uint32_t i = 0; i < cfg_.owners; ++i) {
    out.outputs.push_back(Add(*received_[0][i], *received_[1][i]));
    scores.push_back(codec.DecodeVector(out.outputs.back()));
  }
  const double cost = cfg_.privacy.QueryCost();
  if (!ledger_.WouldAdmit(kClientAccount, cost)) {
    out.refused = true;
    return out;
  }
  Rng rng = Rng::Substream(seed_, "noise/" + std::to_string(round_));
  out.release = Aggregate(scores, cfg_.privacy, rng);
  ledger_.Charge(kClientAccount, cost);
  return out;
}

void SendHello(Connection& conn, const SessionConfig& cfg, PartyRole role, uint32_t index) {
  conn.Send(Hello{role, index, cfg.Hash()});
}

Hello ReceiveHello(Connection& conn, const SessionConfig& cfg) {
  Hello h = conn.ReceiveAs<Hello>(cfg.timeout());
  PRICURE_ENFORCE(h.config_hash == cfg.Hash(), ErrorCode::kConfigMismatch,
                  std::string(PartyRoleName(h.role)) + " " + std::to_string(h.index) + " on " +
                      conn.peer_name() + " runs a different session configuration");
  return h;
}

void CheckPeer(const Hello& hello, PartyRole role, uint32_t index) {
  PRICURE_ENFORCE(hello.role == role && hello.index == index, ErrorCode::kProtocol,
                  std::string("expected ") + PartyRoleName(role) + " " + std::to_string(index) +
                      ", peer introduced itself as " + PartyRoleName(hello.role) + " " +
                      std::to_string(hello.index));
}

OwnerReport RunOwner(const SessionConfig& cfg, uint32_t owner, const ModelParameters& params,
                     uint64_t seed, Connection& worker_a, Connection& worker_b) {
  const std::vector<Connection*> links{&worker_a, &worker_b};
  return Guarded(links, [&] {
    for (Connection* c : links) c->set_allowed_inbound({MessageType::kBye});
    OwnerReport report;
    const auto start = Clock::now();
    Rng rng = Rng::Substream(seed, "sharing/owner/" + std::to_string(owner));
    auto [a, b] = OwnerShareModel(cfg, owner, params, rng);
    report.share_ms = MillisSince(start);
    worker_a.Send(a);
    worker_b.Send(b);
    ExchangeBye(links, cfg.timeout());
    return report;
  });
}

WorkerReport RunWorker(const SessionConfig& cfg, WorkerId self, const WorkerLinks& links) {
  PRICURE_ENFORCE(links.owners.size() == cfg.owners && links.client && links.dealer &&
                      links.peer && links.aggregator,
                  ErrorCode::kContract, "worker is missing links");
  std::vector<Connection*> all = links.owners;
  all.insert(all.end(), {links.client, links.dealer, links.peer, links.aggregator});
  return Guarded(all, [&] {
    for (Connection* c : links.owners) c->set_allowed_inbound({MessageType::kModelShare, MessageType::kBye});
    links.client->set_allowed_inbound({MessageType::kInputShare, MessageType::kBye});
    links.dealer->set_allowed_inbound(
        {MessageType::kTripleBatch, MessageType::kSignShare, MessageType::kBye});
    links.peer->set_allowed_inbound({MessageType::kOpen, MessageType::kBye});
    links.aggregator->set_allowed_inbound({MessageType::kBye});

    std::vector<ModelShare> models;
    for (uint32_t i = 1; i <= cfg.owners; ++i) {
      Connection& c = *links.owners[i - 1];
      ModelShare m = c.ReceiveAs<ModelShare>(cfg.timeout());
      PRICURE_ENFORCE(m.owner == i && m.worker == self, ErrorCode::kProtocol,
                      c.peer_name() + " sent a model share for " + OwnerTag(m.owner) +
                          ", worker " + WorkerName(m.worker));
      ExchangeBye({&c}, cfg.timeout());
      models.push_back(std::move(m));
    }

    RemotePeer peer(*links.peer, cfg.timeout());
    RemoteSignService dealer(*links.dealer, cfg.timeout());
    ShareEngine engine(self, cfg.session, cfg.codec(), &peer, &dealer);
    WorkerReport report;
    for (uint64_t round = 0; round < cfg.rounds; ++round) {
      InputShare in = links.client->ReceiveAs<InputShare>(cfg.timeout());
      PRICURE_ENFORCE(in.round == round && in.worker == self, ErrorCode::kProtocol,
                      "client sent an input share for round " + std::to_string(in.round) +
                          ", worker " + WorkerName(in.worker) + " during round " +
                          std::to_string(round));
      const auto start = Clock::now();
      for (uint32_t i = 1; i <= cfg.owners; ++i) {
        TripleBatch batch = links.dealer->ReceiveAs<TripleBatch>(cfg.timeout());
        links.aggregator->Send(WorkerInfer(engine, cfg, models[i - 1], in, batch));
      }
      report.round_ms.push_back(MillisSince(start));
    }
    ExchangeBye({links.client, links.dealer, links.peer, links.aggregator}, cfg.timeout());
    return report;
  });
}

DealerReport RunDealer(const SessionConfig& cfg, uint64_t seed, Connection& worker_a,
                       Connection& worker_b) {
  const std::vector<Connection*> links{&worker_a, &worker_b};
  return Guarded(links, [&] {
    for (Connection* c : links) c->set_allowed_inbound({MessageType::kSignRequest, MessageType::kBye});
    DealerReport report;
    const size_t hidden = cfg.spec.hidden_dims.size();
    for (uint64_t round = 0; round < cfg.rounds; ++round) {
      for (uint32_t owner = 1; owner <= cfg.owners; ++owner) {
        auto [a, b] = DealerProvision(cfg, round, owner, seed);
        worker_a.Send(a);
        worker_b.Send(b);
        ++report.batches;
        Rng rng = Rng::Substream(seed, "sign/" + std::to_string(round) + "/" +
                                           std::to_string(owner));
        for (size_t j = 0; j < hidden; ++j) {
          const uint64_t want = MaterialId(cfg, round, owner, j, MaterialSlot::kRelu);
          SignRequest ra = worker_a.ReceiveAs<SignRequest>(cfg.timeout());
          SignRequest rb = worker_b.ReceiveAs<SignRequest>(cfg.timeout());
          PRICURE_ENFORCE(ra.mask_id == want && rb.mask_id == want, ErrorCode::kDesync,
                          "sign requests for masks " + std::to_string(ra.mask_id) + " (A) and " +
                              std::to_string(rb.mask_id) + " (B), expected " +
                              std::to_string(want));
          auto [sa, sb] = DealerSignShares(ra.share, rb.share, rng);
          worker_a.Send(SignShare{want, std::move(sa)});
          worker_b.Send(SignShare{want, std::move(sb)});
          report.sign_requests += 2;
        }
      }
    }
    ExchangeBye(links, cfg.timeout());
    return report;
  });
}

AggregatorReport RunAggregator(const SessionConfig& cfg, uint64_t seed, Connection& client,
                               Connection& worker_a, Connection& worker_b) {
  const std::vector<Connection*> links{&client, &worker_a, &worker_b};
  return Guarded(links, [&] {
    client.set_allowed_inbound({MessageType::kPublicKey, MessageType::kBye});
    worker_a.set_allowed_inbound({MessageType::kPartial, MessageType::kBye});
    worker_b.set_allowed_inbound({MessageType::kPartial, MessageType::kBye});
    const PublicKey client_key = client.ReceiveAs<PublicKey>(cfg.timeout());
    const BoxKeyPair keys = BoxKeyPair::Generate();
    AggregatorState state(cfg, seed);
    AggregatorReport report;
    for (uint64_t round = 0; round < cfg.rounds; ++round) {
      state.BeginRound(round);
      const auto start = Clock::now();
      const Clock::time_point deadline = start + cfg.timeout();
      for (auto [conn, w] : {std::pair{&worker_a, WorkerId::kA}, std::pair{&worker_b, WorkerId::kB}}) {
        for (uint32_t k = 0; k < cfg.owners; ++k) {
          const auto left = std::max(Millis(0), std::chrono::duration_cast<Millis>(
                                                    deadline - Clock::now()));
          try {
            state.Accept(conn->ReceiveAs<Partial>(left), w);
          } catch (const Error& e) {
            if (e.code() != ErrorCode::kTimeout) throw;
            Throw(ErrorCode::kTimeout, "round " + std::to_string(round) +
                                           ": no partials within the deadline from " +
                                           state.DescribeMissing());
          }
        }
      }
      AggregatedRound r = state.Finish();
      if (r.refused) {
        client.Send(BudgetRefused{round, state.ledger().spent(AggregatorState::kClientAccount),
                                  state.ledger().cap()});
      } else {
        client.Send(SealLabel(round, r.release.label, client_key.key, keys));
      }
      report.round_ms.push_back(MillisSince(start));
      report.rounds.push_back(std::move(r));
    }
    report.spent = state.ledger().spent(AggregatorState::kClientAccount);
    ExchangeBye(links, cfg.timeout());
    return report;
  });
}

ClientReport RunClient(const SessionConfig& cfg, const std::vector<std::vector<double>>& inputs,
                       uint64_t seed, Connection& worker_a, Connection& worker_b,
                       Connection& aggregator) {
  PRICURE_ENFORCE(inputs.size() == cfg.rounds, ErrorCode::kContract,
                  "client has " + std::to_string(inputs.size()) + " inputs for " +
                      std::to_string(cfg.rounds) + " rounds");
  const std::vector<Connection*> links{&worker_a, &worker_b, &aggregator};
  return Guarded(links, [&] {
    worker_a.set_allowed_inbound({MessageType::kBye});
    worker_b.set_allowed_inbound({MessageType::kBye});
    aggregator.set_allowed_inbound(
        {MessageType::kSealedResult, MessageType::kBudgetRefused, MessageType::kBye});
    const BoxKeyPair keys = BoxKeyPair::Generate();
    aggregator.Send(PublicKey{keys.public_key});
    Rng rng = Rng::Substream(seed, "sharing/client");
    ClientReport report;
    // The answer arrives only after every worker finished every owner.
    const Millis wait = cfg.timeout() * 2;
    for (uint64_t round = 0; round < cfg.rounds; ++round) {
      const auto start = Clock::now();
      auto [a, b] = ClientShareInput(cfg, round, inputs[round], rng);
      worker_a.Send(a);
      worker_b.Send(b);
      ClientRound r{round, std::nullopt, 0};
      Message reply = aggregator.Receive(wait);
      if (auto* sealed = std::get_if<SealedResult>(&reply)) {
        r.label = OpenSealedLabel(*sealed, round, keys, cfg.spec.output_dim);
      } else {
        PRICURE_ENFORCE(std::holds_alternative<BudgetRefused>(reply), ErrorCode::kProtocol,
                        std::string("aggregator sent ") + MessageTypeName(TypeOf(reply)) +
                            " instead of a round result");
        const auto& refused = std::get<BudgetRefused>(reply);
        PRICURE_ENFORCE(refused.round == round, ErrorCode::kProtocol,
                        "budget refusal for round " + std::to_string(refused.round) +
                            " during round " + std::to_string(round));
      }
      r.latency_ms = MillisSince(start);
      report.rounds.push_back(r);
    }
    ExchangeBye(links, cfg.timeout());
    return report;
  });
}

}  // namespace pricure
