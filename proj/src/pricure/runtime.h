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

// Whole-session drivers built on the protocol module. Sessions run either
// in one process or as one process per party over TCP.

#ifndef PRICURE_RUNTIME_H_
#define PRICURE_RUNTIME_H_

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pricure/model.h"
#include "pricure/protocol.h"
#include "pricure/transport.h"

namespace pricure {

// JSON run manifest ("pricure-manifest/1"). Relative paths are resolved
// against the manifest's directory.
struct RunManifest {
  uint64_t seed = 0;
  std::vector<std::string> models;
  std::string dataset;
  std::string output_dir;
  // Number of dataset rows to query; 0 means all of them.
  uint64_t rounds = 0;
  uint64_t modulus = RingModulus::kDefault;
  uint32_t scale = 100;
  PrivacyParams privacy;
  double budget_cap = BudgetLedger::kUnlimited;
  uint32_t timeout_ms = 30000;
  // Listener addresses for TCP mode: "worker_a", "worker_b", "aggregator".
  std::map<std::string, std::string> endpoints;
};

// kIo if the manifest or a referenced file is missing, kParse if any of
// them is malformed.
RunManifest LoadManifest(const std::string& path);
// Writes paths relative to the manifest's directory when they lie below it.
void SaveManifest(const RunManifest& manifest, const std::string& path);

// Everything a party needs, loaded and cross-checked.
struct PreparedSession {
  SessionConfig cfg;
  uint64_t seed = 0;
  std::vector<ModelParameters> models;  // owner i at index i-1
  std::vector<std::vector<double>> inputs;
  std::vector<uint32_t> true_labels;
};

// Loads models and dataset. kContract if the models disagree on the network
// or the dataset does not fit it; kUsage if more rounds than rows are asked.
PreparedSession PrepareSession(const RunManifest& manifest);
// Session id and config derived deterministically from the seed.
SessionConfig MakeSessionConfig(const RunManifest& manifest, const NetworkSpec& spec,
                                uint32_t owners, uint64_t rounds);

// Produces connected byte-stream pairs for the in-process runner.
using StreamPairFactory =
    std::function<std::pair<std::unique_ptr<ByteStream>, std::unique_ptr<ByteStream>>()>;
StreamPairFactory LoopbackStreams();
// Real sockets over 127.0.0.1, one listener per pair.
StreamPairFactory LocalTcpStreams();

struct TranscriptEntry {
  std::string from;
  std::string to;
  MessageType type;
  size_t bytes;
};

struct SessionOutcome {
  std::vector<OwnerReport> owners;
  WorkerReport workers[2];
  DealerReport dealer;
  AggregatorReport aggregator;
  ClientReport client;
  // Every frame sent, in per-sender order; filled when requested.
  std::vector<TranscriptEntry> transcript;
};

struct RunOptions {
  bool record_transcript = false;
  // Applied to every frame sent by the named party before it hits the wire
  // (tests use it to tamper with traffic). Keys are party names such as
  // "aggregator" or "owner 2".
  std::function<void(const std::string& sender, const std::string& receiver, Message&)> mutate;
};

// All parties on threads in this process. The first party to fail aborts
// the others; its error is rethrown prefixed with its name.
SessionOutcome RunSession(const SessionConfig& cfg, const std::vector<ModelParameters>& models,
                          const std::vector<std::vector<double>>& inputs, uint64_t seed,
                          const StreamPairFactory& streams, const RunOptions& options = {});

// Party names used in diagnostics and transcripts.
std::string PartyName(PartyRole role, uint32_t index);

// Noiseless plaintext ensemble label for decoded per-model outputs.
uint32_t PlaintextEnsembleLabel(const std::vector<std::vector<double>>& outputs,
                                const PrivacyParams& privacy);

struct SimulationReport {
  SessionConfig cfg;
  std::vector<uint32_t> true_labels;
  std::vector<std::optional<uint32_t>> labels;  // empty when refused
  std::vector<uint32_t> reference_labels;
  uint64_t refused = 0;
  double agreement = 0;  // labels vs reference, over answered rounds
  double accuracy = 0;   // labels vs truth, over answered rounds
  double reference_accuracy = 0;
  // Largest |protocol output - fixed-point reference| over all outputs, in
  // units of 1/scale.
  int64_t max_output_error_ulp = 0;
  double share_ms_mean = 0;
  std::vector<double> worker_round_ms;
  std::vector<double> aggregator_round_ms;
  std::vector<double> client_latency_ms;
  SessionOutcome outcome;
};

SimulationReport Simulate(const PreparedSession& session, const StreamPairFactory& streams);
// labels.csv (round,true_label,label,reference_label) and report.json.
void WriteSimulationReport(const SimulationReport& report, const std::string& output_dir);
std::string HardwareDescription();

// One party in its own process, over TCP. Listeners bind the manifest
// endpoints; connectors retry until cfg.timeout.
struct PartyResult {
  PartyRole role;
  uint32_t index;
  std::optional<ClientReport> client;
  std::optional<AggregatorReport> aggregator;
};
PartyResult RunParty(const PreparedSession& session,
                     const std::map<std::string, std::string>& endpoints, PartyRole role,
                     uint32_t index);
// "owner", "worker_a", "worker_b", "dealer", "aggregator", "client".
PartyRole ParsePartyRole(const std::string& name);

// Training rows per class in each blobs owner's private shard.
inline constexpr uint32_t kBlobShardPerClass = 25;

// Fixture set: m models of the preset network, a dataset and a manifest.
// Blobs fixtures are noisy nearest-mean classifiers fitted per owner on
// disjoint shards; other presets use random grid weights and random
// inputs labelled by the plaintext ensemble.
struct FixtureOptions {
  std::string preset = "blobs";
  uint32_t owners = 10;
  uint64_t seed = 1;
  uint32_t samples = 100;
  std::string output_dir;
  PrivacyParams privacy;
};
std::string WriteFixtures(const FixtureOptions& options);  // returns manifest path

// Accuracy over a (epsilon, owner count) grid. The protocol runs once per
// input without noise; the recorded per-owner outputs are then released
// `trials` times per cell with fresh Laplace noise.
struct EvalCell {
  double epsilon;
  uint32_t owners;
  double accuracy;
  double accuracy_stddev;
  double noiseless_accuracy;
  uint32_t trials;
};
std::vector<EvalCell> EvaluateGrid(const SimulationReport& noiseless,
                                   const std::vector<double>& epsilons,
                                   const std::vector<uint32_t>& owner_counts,
                                   AggregationMode mode, uint32_t trials, uint64_t seed);
void WriteEvalCsv(const std::vector<EvalCell>& cells, AggregationMode mode, std::ostream& out);

}  // namespace pricure

#endif  // PRICURE_RUNTIME_H_
