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

// Party logic for one collaborative inference session: model owners share
// their networks with two workers, the client shares its inputs, the workers
// evaluate every network on shares with help from the dealer, and the
// aggregator reconstructs, aggregates with Laplace noise and seals the label
// for the client.

#ifndef PRICURE_PROTOCOL_H_
#define PRICURE_PROTOCOL_H_

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pricure/dp.h"
#include "pricure/model.h"
#include "pricure/ring.h"
#include "pricure/sharing.h"
#include "pricure/transport.h"
#include "pricure/wire.h"

namespace pricure {

// Parameters every party must agree on; the handshake compares Hash().
struct SessionConfig {
  SessionId session{};
  RingModulus modulus;
  uint32_t scale = 100;
  // Owners are numbered 1..owners.
  uint32_t owners = 1;
  NetworkSpec spec;
  PrivacyParams privacy;
  // Total epsilon the client may spend; infinite by default.
  double budget_cap = BudgetLedger::kUnlimited;
  // Inference rounds (client queries) in the session.
  uint64_t rounds = 1;
  // Deadline for any single wait, including the aggregator's per-round
  // collection of partials.
  uint32_t timeout_ms = 30000;

  FixedPointCodec codec() const { return FixedPointCodec(modulus, scale); }
  Millis timeout() const { return Millis(timeout_ms); }

  // kContract on out-of-range fields.
  void Validate() const;
  // Canonical JSON (sorted keys, no whitespace).
  std::string ToJson() const;
  // kParse on malformed input; validates the result.
  static SessionConfig FromJson(const std::string& json);
  // BLAKE2b-256 of ToJson().
  ConfigHash Hash() const;
};

// Kinds of dealer material consumed per layer.
enum class MaterialSlot : uint8_t { kMatMul = 0, kTruncation = 1, kRelu = 2 };

// Unique id of one piece of material: ((round*m + owner-1)*(L+1) + layer)*8
// + slot. A ReLU mask also uses the next two ids for its internal triples.
uint64_t MaterialId(const SessionConfig& cfg, uint64_t round, uint32_t owner, size_t layer,
                    MaterialSlot slot);

// Encodes the model and splits every tensor. kContract if the parameters do
// not match cfg.spec or the owner index is out of range.
std::pair<ModelShare, ModelShare> OwnerShareModel(const SessionConfig& cfg, uint32_t owner,
                                                  const ModelParameters& params, Rng& rng);

// Inverse of OwnerShareModel; kProtocol on mismatched bundles.
EncodedModel ReconstructModel(const SessionConfig& cfg, const ModelShare& a,
                              const ModelShare& b);

// Encodes (truncating to the grid) and splits an input vector. kContract if
// its length is not the input dimension.
std::pair<InputShare, InputShare> ClientShareInput(const SessionConfig& cfg, uint64_t round,
                                                   std::span<const double> x, Rng& rng);

// The material both workers consume to evaluate owner `owner` in `round`.
// Deterministic in (seed, round, owner).
std::pair<TripleBatch, TripleBatch> DealerProvision(const SessionConfig& cfg, uint64_t round,
                                                    uint32_t owner, uint64_t seed);

struct InventoryCounts {
  uint64_t matmul_triples = 0;
  uint64_t truncation_pairs = 0;
  // Hidden units covered by ReLU masks.
  uint64_t relu_units = 0;

  bool operator==(const InventoryCounts&) const = default;
};

// What one (round, owner) batch must contain: one matmul triple and one
// truncation pair per layer, one ReLU mask unit per hidden unit.
InventoryCounts ExpectedInventory(const NetworkSpec& spec);
InventoryCounts CountInventory(const TripleBatch& batch);

// One worker's evaluation of one owner's network on the shared input. The
// engine carries the peer and dealer channels. Output: that worker's share
// of the o output values. Errors: kProtocol if any bundle is addressed to
// another slot or the batch lacks material for a layer (exhausted);
// kTripleReuse if material is presented twice; kDesync from the channels.
Partial WorkerInfer(ShareEngine& engine, const SessionConfig& cfg, const ModelShare& model,
                    const InputShare& input, const TripleBatch& batch);

// Authenticated public-key encryption of round labels.
struct BoxKeyPair {
  BoxPublicKey public_key{};
  std::array<uint8_t, 32> secret_key{};

  static BoxKeyPair Generate();
};

SealedResult SealLabel(uint64_t round, uint32_t label, const BoxPublicKey& recipient,
                       const BoxKeyPair& sender);
// kTamper if authentication fails, the round differs or label >= classes.
uint32_t OpenSealedLabel(const SealedResult& sealed, uint64_t expected_round,
                         const BoxKeyPair& recipient, uint32_t classes);

struct AggregatedRound {
  uint64_t round = 0;
  // Reconstructed output of owner i at index i-1.
  std::vector<RingTensor> outputs;
  NoisyAggregate release;
  bool refused = false;
};

// Per-round collection and release logic of the aggregator, independent of
// the transport.
class AggregatorState {
 public:
  AggregatorState(const SessionConfig& cfg, uint64_t seed);

  void BeginRound(uint64_t round);
  // kProtocol for a partial from the wrong round, an unknown owner, a
  // second partial for the same (owner, worker), a worker field that
  // disagrees with the sending link, or a wrongly shaped value.
  void Accept(const Partial& partial, WorkerId link);
  bool Complete() const;
  // "worker A: owners 2, 3; worker B: owner 3".
  std::string DescribeMissing() const;
  // Reconstructs the outputs and releases a noisy label charged to the
  // budget. Requires Complete(). A refused round carries no release.
  AggregatedRound Finish();

  const BudgetLedger& ledger() const { return ledger_; }

  static constexpr const char* kClientAccount = "client";

 private:
  SessionConfig cfg_;
  uint64_t seed_;
  BudgetLedger ledger_;
  uint64_t round_ = 0;
  bool open_ = false;
  std::vector<std::optional<RingTensor>> received_[2];
};

// Handshake: each side sends HELLO and checks the peer's. kConfigMismatch if
// the hashes differ, kProtocol if the peer has an unexpected role or index.
void SendHello(Connection& conn, const SessionConfig& cfg, PartyRole role, uint32_t index);
Hello ReceiveHello(Connection& conn, const SessionConfig& cfg);
void CheckPeer(const Hello& hello, PartyRole role, uint32_t index);

// Party loops. Handshakes must already be done on every connection. Each
// loop sets its per-link inbound whitelist, runs all cfg.rounds rounds and
// ends by exchanging BYE on every link. Seeds are the session's master
// seed; each party derives its own named streams from it.

struct OwnerReport {
  double share_ms = 0;
};
OwnerReport RunOwner(const SessionConfig& cfg, uint32_t owner, const ModelParameters& params,
                     uint64_t seed, Connection& worker_a, Connection& worker_b);

struct WorkerLinks {
  std::vector<Connection*> owners;  // owner i at index i-1
  Connection* client = nullptr;
  Connection* dealer = nullptr;
  Connection* peer = nullptr;
  Connection* aggregator = nullptr;
};
struct WorkerReport {
  std::vector<double> round_ms;
};
WorkerReport RunWorker(const SessionConfig& cfg, WorkerId self, const WorkerLinks& links);

struct DealerReport {
  uint64_t batches = 0;
  uint64_t sign_requests = 0;
};
DealerReport RunDealer(const SessionConfig& cfg, uint64_t seed, Connection& worker_a,
                       Connection& worker_b);

struct AggregatorReport {
  std::vector<AggregatedRound> rounds;
  double spent = 0;
  std::vector<double> round_ms;
};
AggregatorReport RunAggregator(const SessionConfig& cfg, uint64_t seed, Connection& client,
                               Connection& worker_a, Connection& worker_b);

struct ClientRound {
  uint64_t round = 0;
  std::optional<uint32_t> label;  // empty if the budget refused the query
  double latency_ms = 0;
};
struct ClientReport {
  std::vector<ClientRound> rounds;
};
// inputs.size() must equal cfg.rounds.
ClientReport RunClient(const SessionConfig& cfg, const std::vector<std::vector<double>>& inputs,
                       uint64_t seed, Connection& worker_a, Connection& worker_b,
                       Connection& aggregator);

}  // namespace pricure

#endif  // PRICURE_PROTOCOL_H_
