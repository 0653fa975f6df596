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

#include "pricure/runtime.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "pricure/errors.h"

namespace pricure {

namespace fs = std::filesystem;
using Json = nlohmann::json;

namespace {

struct PartyKey {
  PartyRole role;
  uint32_t index;
  auto operator<=>(const PartyKey&) const = default;
};

std::string NameOf(const PartyKey& k) { return PartyName(k.role, k.index); }

const PartyKey kWorkerA{PartyRole::kWorkerA, 0};
const PartyKey kWorkerB{PartyRole::kWorkerB, 0};
const PartyKey kDealer{PartyRole::kDealer, 0};
const PartyKey kAggregator{PartyRole::kAggregator, 0};
const PartyKey kClient{PartyRole::kClient, 0};

// Every link as (connecting side, listening side). Only the workers and the
// aggregator listen.
std::vector<std::pair<PartyKey, PartyKey>> Topology(uint32_t owners) {
  std::vector<std::pair<PartyKey, PartyKey>> links;
  for (uint32_t i = 1; i <= owners; ++i) {
    links.push_back({{PartyRole::kOwner, i}, kWorkerA});
    links.push_back({{PartyRole::kOwner, i}, kWorkerB});
  }
  links.push_back({kClient, kWorkerA});
  links.push_back({kClient, kWorkerB});
  links.push_back({kClient, kAggregator});
  links.push_back({kDealer, kWorkerA});
  links.push_back({kDealer, kWorkerB});
  links.push_back({kWorkerA, kWorkerB});
  links.push_back({kWorkerA, kAggregator});
  links.push_back({kWorkerB, kAggregator});
  return links;
}

std::vector<PartyKey> AllParties(uint32_t owners) {
  std::vector<PartyKey> all;
  for (uint32_t i = 1; i <= owners; ++i) all.push_back({PartyRole::kOwner, i});
  for (const PartyKey& k : {kWorkerA, kWorkerB, kDealer, kAggregator, kClient}) all.push_back(k);
  return all;
}

const char* EndpointKey(PartyRole role) {
  switch (role) {
    case PartyRole::kWorkerA: return "worker_a";
    case PartyRole::kWorkerB: return "worker_b";
    case PartyRole::kAggregator: return "aggregator";
    default: return "";
  }
}

struct PartyOutputs {
  std::optional<OwnerReport> owner;
  std::optional<WorkerReport> worker;
  std::optional<DealerReport> dealer;
  std::optional<AggregatorReport> aggregator;
  std::optional<ClientReport> client;
};

using LinkMap = std::map<PartyKey, Connection*>;

Connection& Link(const LinkMap& links, const PartyKey& peer) {
  auto it = links.find(peer);
  PRICURE_ENFORCE(it != links.end(), ErrorCode::kInternal, "no link to " + NameOf(peer));
  return *it->second;
}

PartyOutputs RunRole(const PartyKey& self, const SessionConfig& cfg,
                     const std::vector<ModelParameters>& models,
                     const std::vector<std::vector<double>>& inputs, uint64_t seed,
                     const LinkMap& links) {
  PartyOutputs out;
  switch (self.role) {
    case PartyRole::kOwner:
      out.owner = RunOwner(cfg, self.index, models.at(self.index - 1), seed,
                           Link(links, kWorkerA), Link(links, kWorkerB));
      break;
    case PartyRole::kWorkerA:
    case PartyRole::kWorkerB: {
      const bool is_a = self.role == PartyRole::kWorkerA;
      WorkerLinks w;
      for (uint32_t i = 1; i <= cfg.owners; ++i) {
        w.owners.push_back(&Link(links, {PartyRole::kOwner, i}));
      }
      w.client = &Link(links, kClient);
      w.dealer = &Link(links, kDealer);
      w.peer = &Link(links, is_a ? kWorkerB : kWorkerA);
      w.aggregator = &Link(links, kAggregator);
      out.worker = RunWorker(cfg, is_a ? WorkerId::kA : WorkerId::kB, w);
      break;
    }
    case PartyRole::kDealer:
      out.dealer = RunDealer(cfg, seed, Link(links, kWorkerA), Link(links, kWorkerB));
      break;
    case PartyRole::kAggregator:
      out.aggregator = RunAggregator(cfg, seed, Link(links, kClient), Link(links, kWorkerA),
                                     Link(links, kWorkerB));
      break;
    case PartyRole::kClient:
      out.client = RunClient(cfg, inputs, seed, Link(links, kWorkerA), Link(links, kWorkerB),
                             Link(links, kAggregator));
      break;
  }
  return out;
}

double Mean(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double Percentile(std::vector<double> v, double p) {
  if (v.empty()) return 0;
  std::sort(v.begin(), v.end());
  const size_t k = static_cast<size_t>(std::ceil(p * static_cast<double>(v.size()))) ;
  return v[std::min(v.size() - 1, k == 0 ? 0 : k - 1)];
}

Json Stats(const std::vector<double>& v) {
  return {{"mean", Mean(v)}, {"p50", Percentile(v, 0.5)}, {"p95", Percentile(v, 0.95)},
          {"count", v.size()}};
}

std::string ResolvePath(const fs::path& base, const std::string& p) {
  fs::path path(p);
  if (path.is_relative()) path = base / path;
  return path.lexically_normal().string();
}

std::string ReadFile(const std::string& path, const std::string& what) {
  std::ifstream in(path, std::ios::binary);
  PRICURE_ENFORCE(in.good(), ErrorCode::kIo, "cannot open " + what + " '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

SyntheticDataset LoadDataset(const std::string& path) {
  std::ifstream in(path);
  PRICURE_ENFORCE(in.good(), ErrorCode::kIo, "cannot open dataset '" + path + "'");
  try {
    return ReadDatasetCsv(in);
  } catch (const Error& e) {
    Throw(e.code(), "dataset '" + path + "': " + e.what());
  }
}

}  // namespace

std::string PartyName(PartyRole role, uint32_t index) {
  switch (role) {
    case PartyRole::kOwner: return "owner " + std::to_string(index);
    case PartyRole::kWorkerA: return "worker A";
    case PartyRole::kWorkerB: return "worker B";
    case PartyRole::kDealer: return "dealer";
    case PartyRole::kAggregator: return "aggregator";
    case PartyRole::kClient: return "client";
  }
  return "unknown party";
}

PartyRole ParsePartyRole(const std::string& name) {
  if (name == "owner") return PartyRole::kOwner;
  if (name == "worker_a") return PartyRole::kWorkerA;
  if (name == "worker_b") return PartyRole::kWorkerB;
  if (name == "dealer") return PartyRole::kDealer;
  if (name == "aggregator") return PartyRole::kAggregator;
  if (name == "client") return PartyRole::kClient;
  Throw(ErrorCode::kUsage, "unknown role '" + name +
                               "' (owner, worker_a, worker_b, dealer, aggregator, client)");
}

RunManifest LoadManifest(const std::string& path) {
  const std::string text = ReadFile(path, "manifest");
  const fs::path base = fs::path(path).parent_path();
  RunManifest m;
  try {
    const Json j = Json::parse(text);
    PRICURE_ENFORCE(j.value("format", "") == "pricure-manifest/1", ErrorCode::kParse,
                    "manifest format must be pricure-manifest/1");
    m.seed = j.at("seed").get<uint64_t>();
    for (const auto& p : j.at("models")) m.models.push_back(ResolvePath(base, p.get<std::string>()));
    m.dataset = ResolvePath(base, j.at("dataset").get<std::string>());
    m.output_dir = ResolvePath(base, j.value("output_dir", std::string("out")));
    m.rounds = j.value("rounds", uint64_t{0});
    if (j.contains("session")) {
      const Json& s = j["session"];
      if (s.contains("modulus")) {
        m.modulus = s["modulus"].is_string() ? std::stoull(s["modulus"].get<std::string>())
                                             : s["modulus"].get<uint64_t>();
      }
      m.scale = s.value("scale", 100u);
      if (s.contains("privacy")) {
        const Json& p = s["privacy"];
        m.privacy.mode = ParseAggregationMode(p.value("mode", std::string("vote")));
        m.privacy.epsilon = p.value("epsilon", 0.05);
        m.privacy.sensitivity = p.value("sensitivity", 1.0);
        m.privacy.clip = p.value("clip", 1.0);
      }
      if (s.contains("budget_cap") && !s["budget_cap"].is_null()) {
        m.budget_cap = s["budget_cap"].get<double>();
      }
      m.timeout_ms = s.value("timeout_ms", 30000u);
    }
    if (j.contains("endpoints")) {
      for (const auto& [k, v] : j["endpoints"].items()) m.endpoints[k] = v.get<std::string>();
    }
  } catch (const Json::exception& e) {
    Throw(ErrorCode::kParse, "manifest '" + path + "': " + e.what());
  } catch (const std::logic_error& e) {
    Throw(ErrorCode::kParse, "manifest '" + path + "': bad modulus");
  }
  PRICURE_ENFORCE(!m.models.empty(), ErrorCode::kParse,
                  "manifest '" + path + "' lists no models");
  for (const std::string& p : m.models) {
    PRICURE_ENFORCE(fs::is_regular_file(p), ErrorCode::kIo, "model file '" + p + "' not found");
  }
  PRICURE_ENFORCE(fs::is_regular_file(m.dataset), ErrorCode::kIo,
                  "dataset '" + m.dataset + "' not found");
  return m;
}

void SaveManifest(const RunManifest& m, const std::string& path) {
  const fs::path base = fs::absolute(fs::path(path)).parent_path();
  auto rel = [&](const std::string& p) {
    const fs::path r = fs::absolute(p).lexically_relative(base);
    return (r.empty() || *r.begin() == "..") ? fs::absolute(p).string() : r.string();
  };
  Json j;
  j["format"] = "pricure-manifest/1";
  j["seed"] = m.seed;
  j["models"] = Json::array();
  for (const auto& p : m.models) j["models"].push_back(rel(p));
  j["dataset"] = rel(m.dataset);
  j["output_dir"] = rel(m.output_dir);
  j["rounds"] = m.rounds;
  j["session"] = {{"modulus", std::to_string(m.modulus)},
                  {"scale", m.scale},
                  {"privacy",
                   {{"mode", AggregationModeName(m.privacy.mode)},
                    {"epsilon", m.privacy.epsilon},
                    {"sensitivity", m.privacy.sensitivity},
                    {"clip", m.privacy.clip}}},
                  {"budget_cap", std::isinf(m.budget_cap) ? Json(nullptr) : Json(m.budget_cap)},
                  {"timeout_ms", m.timeout_ms}};
  if (!m.endpoints.empty()) j["endpoints"] = m.endpoints;
  std::ofstream out(path);
  PRICURE_ENFORCE(out.good(), ErrorCode::kIo, "cannot write manifest '" + path + "'");
  out << j.dump(2) << "\n";
  PRICURE_ENFORCE(out.good(), ErrorCode::kIo, "writing manifest '" + path + "' failed");
}

SessionConfig MakeSessionConfig(const RunManifest& m, const NetworkSpec& spec, uint32_t owners,
                                uint64_t rounds) {
  SessionConfig cfg;
  Rng rng = Rng::Substream(m.seed, "session");
  cfg.session = RandomSessionId(rng);
  cfg.modulus = RingModulus(m.modulus);
  cfg.scale = m.scale;
  cfg.owners = owners;
  cfg.spec = spec;
  cfg.privacy = m.privacy;
  cfg.budget_cap = m.budget_cap;
  cfg.rounds = rounds;
  cfg.timeout_ms = m.timeout_ms;
  cfg.Validate();
  return cfg;
}

PreparedSession PrepareSession(const RunManifest& m) {
  PreparedSession s;
  s.seed = m.seed;
  for (const std::string& p : m.models) s.models.push_back(LoadModel(p).params);
  const NetworkSpec spec = s.models.front().spec;
  for (size_t i = 0; i < s.models.size(); ++i) {
    PRICURE_ENFORCE(s.models[i].spec == spec, ErrorCode::kContract,
                    "model '" + m.models[i] + "' is " + s.models[i].spec.ToString() +
                        " but the first model is " + spec.ToString());
  }
  SyntheticDataset data = LoadDataset(m.dataset);
  PRICURE_ENFORCE(data.size() > 0, ErrorCode::kContract, "dataset '" + m.dataset + "' is empty");
  PRICURE_ENFORCE(data.dim == spec.input_dim, ErrorCode::kContract,
                  "dataset has " + std::to_string(data.dim) + " features, models expect " +
                      std::to_string(spec.input_dim));
  for (uint32_t label : data.labels) {
    PRICURE_ENFORCE(label < spec.output_dim, ErrorCode::kContract,
                    "dataset label " + std::to_string(label) + " exceeds the model's classes");
  }
  const uint64_t rounds = m.rounds == 0 ? data.size() : m.rounds;
  PRICURE_ENFORCE(rounds <= data.size(), ErrorCode::kUsage,
                  std::to_string(rounds) + " rounds requested but the dataset has " +
                      std::to_string(data.size()) + " rows");
  s.inputs.assign(data.features.begin(), data.features.begin() + static_cast<ptrdiff_t>(rounds));
  s.true_labels.assign(data.labels.begin(), data.labels.begin() + static_cast<ptrdiff_t>(rounds));
  s.cfg = MakeSessionConfig(m, spec, static_cast<uint32_t>(s.models.size()), rounds);
  return s;
}

StreamPairFactory LoopbackStreams() { return [] { return MakeLoopbackPair(); }; }

StreamPairFactory LocalTcpStreams() {
  return [] {
    TcpListener listener("127.0.0.1", 0);
    const auto deadline = Clock::now() + std::chrono::seconds(10);
    std::unique_ptr<ByteStream> client;
    std::exception_ptr failure;
    std::thread t([&] {
      try {
        client = TcpConnect("127.0.0.1", listener.port(), deadline);
      } catch (...) {
        failure = std::current_exception();
      }
    });
    std::unique_ptr<ByteStream> server;
    try {
      server = listener.Accept(deadline);
    } catch (...) {
      t.join();
      throw;
    }
    t.join();
    if (failure) std::rethrow_exception(failure);
    return std::make_pair(std::move(client), std::move(server));
  };
}

SessionOutcome RunSession(const SessionConfig& cfg, const std::vector<ModelParameters>& models,
                          const std::vector<std::vector<double>>& inputs, uint64_t seed,
                          const StreamPairFactory& streams, const RunOptions& options) {
  cfg.Validate();
  PRICURE_ENFORCE(models.size() == cfg.owners, ErrorCode::kContract,
                  std::to_string(models.size()) + " models for " + std::to_string(cfg.owners) +
                      " owners");
  SessionOutcome outcome;
  std::mutex mu;
  std::map<PartyKey, LinkMap> links;
  std::vector<std::unique_ptr<Connection>> conns;
  auto add = [&](const PartyKey& self, const PartyKey& peer, std::unique_ptr<ByteStream> s) {
    auto c = std::make_unique<Connection>(std::move(s), cfg.session, cfg.modulus, NameOf(peer));
    const std::string from = NameOf(self), to = NameOf(peer);
    if (options.record_transcript) {
      c->set_observer([&, from, to](Direction d, MessageType t, std::span<const uint8_t> b) {
        if (d != Direction::kSent) return;
        std::lock_guard<std::mutex> lock(mu);
        outcome.transcript.push_back({from, to, t, b.size()});
      });
    }
    if (options.mutate) {
      c->set_send_filter([&options, from, to](Message& m) { options.mutate(from, to, m); });
    }
    links[self][peer] = c.get();
    conns.push_back(std::move(c));
  };
  for (const auto& [a, b] : Topology(cfg.owners)) {
    auto [sa, sb] = streams();
    add(a, b, std::move(sa));
    add(b, a, std::move(sb));
  }

  const std::vector<PartyKey> parties = AllParties(cfg.owners);
  std::vector<PartyOutputs> results(parties.size());
  std::atomic<bool> aborted{false};
  std::optional<Error> root;
  int root_rank = 3;
  std::optional<Error> first;
  auto abort_all = [&] {
    if (aborted.exchange(true)) return;
    for (auto& c : conns) c->Reset();
  };
  std::vector<std::thread> threads;
  for (size_t p = 0; p < parties.size(); ++p) {
    threads.emplace_back([&, p] {
      const PartyKey self = parties[p];
      const LinkMap& mine = links[self];
      try {
        for (const auto& [peer, c] : mine) SendHello(*c, cfg, self.role, self.index);
        for (const auto& [peer, c] : mine) CheckPeer(ReceiveHello(*c, cfg), peer.role, peer.index);
        results[p] = RunRole(self, cfg, models, inputs, seed, mine);
      } catch (const Error& e) {
        std::lock_guard<std::mutex> lock(mu);
        Error tagged(e.code(), NameOf(self) + ": " + e.what());
        // Lower rank is closer to the cause: own failures before the abort,
        // then own non-transport failures after it. Relayed peer reports
        // and reset fallout never qualify.
        const bool relayed = std::string(e.what()).find(" reported: ") != std::string::npos;
        const int rank = relayed ? 3 : !aborted.load() ? 0 : IsTransportError(e.code()) ? 3 : 1;
        if (!first) first = tagged;
        if (rank < root_rank) {
          root = tagged;
          root_rank = rank;
        }
        abort_all();
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(mu);
        Error tagged(ErrorCode::kInternal, NameOf(self) + ": " + e.what());
        if (!first) first = tagged;
        if (root_rank > 0) {
          root = tagged;
          root_rank = 0;
        }
        abort_all();
      }
    });
  }
  for (auto& t : threads) t.join();
  if (root) throw *root;
  if (first) throw *first;

  for (size_t p = 0; p < parties.size(); ++p) {
    PartyOutputs& r = results[p];
    if (r.owner) outcome.owners.push_back(*r.owner);
    if (r.worker) outcome.workers[parties[p].role == PartyRole::kWorkerA ? 0 : 1] = *r.worker;
    if (r.dealer) outcome.dealer = *r.dealer;
    if (r.aggregator) outcome.aggregator = std::move(*r.aggregator);
    if (r.client) outcome.client = std::move(*r.client);
  }
  return outcome;
}

uint32_t PlaintextEnsembleLabel(const std::vector<std::vector<double>>& outputs,
                                const PrivacyParams& privacy) {
  const std::vector<double> agg = privacy.mode == AggregationMode::kScoreSum
                                      ? ClippedScoreSum(outputs, privacy.clip)
                                      : VoteHistogram(outputs);
  return static_cast<uint32_t>(ArgMax(agg));
}

SimulationReport Simulate(const PreparedSession& s, const StreamPairFactory& streams) {
  SimulationReport report;
  report.cfg = s.cfg;
  report.true_labels = s.true_labels;
  report.outcome = RunSession(s.cfg, s.models, s.inputs, s.seed, streams);
  const FixedPointCodec codec = s.cfg.codec();
  const RingModulus& q = s.cfg.modulus;
  std::vector<EncodedModel> encoded;
  for (const auto& m : s.models) encoded.push_back(EncodeModel(m, codec));

  uint64_t answered = 0, agree = 0, correct = 0, ref_correct = 0;
  for (uint64_t r = 0; r < s.cfg.rounds; ++r) {
    const RingTensor x = codec.EncodeVector(s.inputs[r]);
    std::vector<std::vector<double>> reference;
    for (size_t i = 0; i < encoded.size(); ++i) {
      const RingTensor want = ForwardFixed(encoded[i], x, codec);
      const RingTensor& got = report.outcome.aggregator.rounds[r].outputs[i];
      for (size_t k = 0; k < want.size(); ++k) {
        const int64_t err = std::llabs(q.Lift(got[k]) - q.Lift(want[k]));
        report.max_output_error_ulp = std::max(report.max_output_error_ulp, err);
      }
      reference.push_back(codec.DecodeVector(want));
    }
    const uint32_t ref = PlaintextEnsembleLabel(reference, s.cfg.privacy);
    report.reference_labels.push_back(ref);
    ref_correct += ref == s.true_labels[r];
    const std::optional<uint32_t> label = report.outcome.client.rounds[r].label;
    report.labels.push_back(label);
    if (!label) {
      ++report.refused;
      continue;
    }
    ++answered;
    agree += *label == ref;
    correct += *label == s.true_labels[r];
  }
  const double n = static_cast<double>(std::max<uint64_t>(answered, 1));
  report.agreement = static_cast<double>(agree) / n;
  report.accuracy = static_cast<double>(correct) / n;
  report.reference_accuracy = static_cast<double>(ref_correct) / static_cast<double>(s.cfg.rounds);
  std::vector<double> share;
  for (const auto& o : report.outcome.owners) share.push_back(o.share_ms);
  report.share_ms_mean = Mean(share);
  report.worker_round_ms = report.outcome.workers[0].round_ms;
  for (size_t r = 0; r < report.worker_round_ms.size() &&
                     r < report.outcome.workers[1].round_ms.size();
       ++r) {
    report.worker_round_ms[r] =
        std::max(report.worker_round_ms[r], report.outcome.workers[1].round_ms[r]);
  }
  report.aggregator_round_ms = report.outcome.aggregator.round_ms;
  for (const auto& c : report.outcome.client.rounds) report.client_latency_ms.push_back(c.latency_ms);
  return report;
}

std::string HardwareDescription() {
  std::ifstream in("/proc/cpuinfo");
  std::string line, model = "unknown cpu";
  while (std::getline(in, line)) {
    if (line.rfind("model name", 0) == 0) {
      model = line.substr(line.find(':') + 2);
      break;
    }
  }
  return model + ", " + std::to_string(std::thread::hardware_concurrency()) + " threads";
}

void WriteSimulationReport(const SimulationReport& r, const std::string& output_dir) {
  std::error_code ec;
  fs::create_directories(output_dir, ec);
  PRICURE_ENFORCE(!ec, ErrorCode::kIo, "cannot create '" + output_dir + "': " + ec.message());
  {
    std::ofstream out(fs::path(output_dir) / "labels.csv");
    PRICURE_ENFORCE(out.good(), ErrorCode::kIo, "cannot write labels.csv in " + output_dir);
    out << "round,true_label,label,reference_label\n";
    for (size_t i = 0; i < r.labels.size(); ++i) {
      out << i << "," << r.true_labels[i] << ","
          << (r.labels[i] ? std::to_string(*r.labels[i]) : std::string("refused")) << ","
          << r.reference_labels[i] << "\n";
    }
  }
  Json j;
  j["format"] = "pricure-report/1";
  j["session"] = Json::parse(r.cfg.ToJson());
  j["rounds"] = r.labels.size();
  j["refused"] = r.refused;
  j["agreement"] = r.agreement;
  j["accuracy"] = r.accuracy;
  j["reference_accuracy"] = r.reference_accuracy;
  j["max_output_error_ulp"] = r.max_output_error_ulp;
  j["budget_spent"] = std::isinf(r.outcome.aggregator.spent) ? Json("inf")
                                                             : Json(r.outcome.aggregator.spent);
  j["timing_ms"] = {{"share_per_model_mean", r.share_ms_mean},
                    {"worker_round", Stats(r.worker_round_ms)},
                    {"aggregator_round", Stats(r.aggregator_round_ms)},
                    {"client_latency", Stats(r.client_latency_ms)}};
  j["hardware"] = HardwareDescription();
  std::ofstream out(fs::path(output_dir) / "report.json");
  PRICURE_ENFORCE(out.good(), ErrorCode::kIo, "cannot write report.json in " + output_dir);
  out << j.dump(2) << "\n";
}

PartyResult RunParty(const PreparedSession& s,
                     const std::map<std::string, std::string>& endpoints, PartyRole role,
                     uint32_t index) {
  const SessionConfig& cfg = s.cfg;
  const PartyKey self{role, role == PartyRole::kOwner ? index : 0};
  PRICURE_ENFORCE(role != PartyRole::kOwner || (index >= 1 && index <= cfg.owners),
                  ErrorCode::kUsage,
                  "owner index must be in 1.." + std::to_string(cfg.owners));
  auto endpoint_of = [&](PartyRole r) {
    auto it = endpoints.find(EndpointKey(r));
    PRICURE_ENFORCE(it != endpoints.end(), ErrorCode::kUsage,
                    std::string("no endpoint for ") + EndpointKey(r) + " in the manifest");
    auto hp = ParseHostPort(it->second);
    if (hp.first == "localhost") hp.first = "127.0.0.1";
    return hp;
  };
  std::set<PartyKey> incoming;
  std::vector<PartyKey> outgoing;
  for (const auto& [from, to] : Topology(cfg.owners)) {
    if (to == self) incoming.insert(from);
    if (from == self) outgoing.push_back(to);
  }

  std::map<PartyKey, std::unique_ptr<Connection>> conns;
  std::mutex mu;
  const Clock::time_point deadline = Clock::now() + cfg.timeout();
  std::exception_ptr accept_failure;
  std::thread acceptor;
  std::unique_ptr<TcpListener> listener;
  if (!incoming.empty()) {
    const auto [host, port] = endpoint_of(role);
    listener = std::make_unique<TcpListener>(host, port);
    acceptor = std::thread([&] {
      try {
        std::set<PartyKey> pending = incoming;
        while (!pending.empty()) {
          auto c = std::make_unique<Connection>(listener->Accept(deadline), cfg.session,
                                                cfg.modulus, "incoming connection");
          const Hello h = ReceiveHello(*c, cfg);
          const PartyKey peer{h.role, h.index};
          PRICURE_ENFORCE(pending.count(peer), ErrorCode::kProtocol,
                          "unexpected connection from " + NameOf(peer));
          pending.erase(peer);
          c->set_peer_name(NameOf(peer));
          SendHello(*c, cfg, self.role, self.index);
          std::lock_guard<std::mutex> lock(mu);
          conns[peer] = std::move(c);
        }
      } catch (...) {
        accept_failure = std::current_exception();
      }
    });
  }
  std::exception_ptr connect_failure;
  try {
    for (const PartyKey& peer : outgoing) {
      const auto [host, port] = endpoint_of(peer.role);
      std::unique_ptr<ByteStream> stream;
      try {
        stream = TcpConnect(host, port, deadline);
      } catch (const Error& e) {
        Throw(e.code(), NameOf(peer) + ": " + e.what());
      }
      auto c = std::make_unique<Connection>(std::move(stream), cfg.session, cfg.modulus,
                                            NameOf(peer));
      SendHello(*c, cfg, self.role, self.index);
      CheckPeer(ReceiveHello(*c, cfg), peer.role, peer.index);
      std::lock_guard<std::mutex> lock(mu);
      conns[peer] = std::move(c);
    }
  } catch (...) {
    connect_failure = std::current_exception();
  }
  if (acceptor.joinable()) acceptor.join();
  if (connect_failure) std::rethrow_exception(connect_failure);
  if (accept_failure) std::rethrow_exception(accept_failure);

  LinkMap links;
  for (auto& [k, c] : conns) links[k] = c.get();
  PartyOutputs out = RunRole(self, cfg, s.models, s.inputs, s.seed, links);
  return PartyResult{role, self.index, std::move(out.client), std::move(out.aggregator)};
}

std::string WriteFixtures(const FixtureOptions& o) {
  PRICURE_ENFORCE(o.owners >= 1, ErrorCode::kUsage, "--m must be at least 1");
  PRICURE_ENFORCE(o.samples >= 1, ErrorCode::kUsage, "--samples must be at least 1");
  PRICURE_ENFORCE(!o.output_dir.empty(), ErrorCode::kUsage, "an output directory is required");
  const NetworkSpec spec = PresetSpec(o.preset);
  std::error_code ec;
  fs::create_directories(o.output_dir, ec);
  PRICURE_ENFORCE(!ec, ErrorCode::kIo, "cannot create '" + o.output_dir + "': " + ec.message());
  const fs::path dir = fs::absolute(o.output_dir);

  std::vector<ModelParameters> models;
  SyntheticDataset data;
  if (o.preset == "blobs") {
    const uint32_t classes = spec.output_dim, dim = spec.input_dim;
    for (uint32_t i = 1; i <= o.owners; ++i) {
      const uint64_t shard_seed =
          Rng::Substream(o.seed, "fixture/shard/" + std::to_string(i)).NextU64();
      const SyntheticDataset shard = MakeBlobs(kBlobShardPerClass, classes, dim, shard_seed);
      models.push_back(NearestMeanModel(FitClassMeans(shard)));
    }
    const uint64_t test_seed = Rng::Substream(o.seed, "fixture/test").NextU64();
    data = MakeBlobs((o.samples + classes - 1) / classes, classes, dim, test_seed);
    data.features.resize(o.samples);
    data.labels.resize(o.samples);
  } else {
    for (uint32_t i = 1; i <= o.owners; ++i) {
      models.push_back(GenerateFixture(
          spec, Rng::Substream(o.seed, "fixture/model/" + std::to_string(i)).NextU64()));
    }
    const FixedPointCodec codec;
    std::vector<EncodedModel> encoded;
    for (const auto& m : models) encoded.push_back(EncodeModel(m, codec));
    Rng rng = Rng::Substream(o.seed, "fixture/inputs");
    data.seed = o.seed;
    data.classes = spec.output_dim;
    data.dim = spec.input_dim;
    for (uint32_t n = 0; n < o.samples; ++n) {
      std::vector<double> x(spec.input_dim);
      for (double& v : x) v = static_cast<double>(rng.UniformInt(0, 100)) / 100.0;
      std::vector<std::vector<double>> outs;
      for (const auto& e : encoded) {
        outs.push_back(codec.DecodeVector(ForwardFixed(e, codec.EncodeVector(x), codec)));
      }
      data.labels.push_back(PlaintextEnsembleLabel(outs, PrivacyParams{}));
      data.features.push_back(std::move(x));
    }
  }

  RunManifest m;
  m.seed = o.seed;
  m.privacy = o.privacy;
  m.rounds = o.samples;
  m.output_dir = (dir / "out").string();
  for (uint32_t i = 1; i <= o.owners; ++i) {
    std::ostringstream name;
    name << "model_" << std::setw(3) << std::setfill('0') << i << ".model";
    const std::string path = (dir / name.str()).string();
    SaveModel(ModelFile{i, o.preset + " fixture, seed " + std::to_string(o.seed), models[i - 1]},
              path);
    m.models.push_back(path);
  }
  m.dataset = (dir / "dataset.csv").string();
  {
    std::ofstream out(m.dataset);
    PRICURE_ENFORCE(out.good(), ErrorCode::kIo, "cannot write '" + m.dataset + "'");
    WriteDatasetCsv(data, out);
  }
  const std::string manifest = (dir / "manifest.json").string();
  SaveManifest(m, manifest);
  return manifest;
}

std::vector<EvalCell> EvaluateGrid(const SimulationReport& noiseless,
                                   const std::vector<double>& epsilons,
                                   const std::vector<uint32_t>& owner_counts,
                                   AggregationMode mode, uint32_t trials, uint64_t seed) {
  PRICURE_ENFORCE(trials >= 1, ErrorCode::kUsage, "trials must be at least 1");
  const SessionConfig& cfg = noiseless.cfg;
  const FixedPointCodec codec = cfg.codec();
  const auto& rounds = noiseless.outcome.aggregator.rounds;
  std::vector<std::vector<std::vector<double>>> decoded;
  for (const auto& r : rounds) {
    decoded.emplace_back();
    for (const auto& o : r.outputs) decoded.back().push_back(codec.DecodeVector(o));
  }
  std::vector<EvalCell> cells;
  for (uint32_t k : owner_counts) {
    PRICURE_ENFORCE(k >= 1 && k <= cfg.owners, ErrorCode::kUsage,
                    "owner count " + std::to_string(k) + " outside 1.." +
                        std::to_string(cfg.owners));
    for (size_t e = 0; e < epsilons.size(); ++e) {
      PrivacyParams p;
      p.mode = mode;
      p.epsilon = epsilons[e];
      p.Validate();
      Rng rng = Rng::Substream(seed, "eval/" + std::to_string(k) + "/" + std::to_string(e));
      uint64_t noiseless_correct = 0;
      std::vector<std::vector<std::vector<double>>> firsts;
      for (size_t r = 0; r < decoded.size(); ++r) {
        firsts.emplace_back(decoded[r].begin(), decoded[r].begin() + k);
        noiseless_correct += PlaintextEnsembleLabel(firsts.back(), p) == noiseless.true_labels[r];
      }
      std::vector<double> accs;
      for (uint32_t t = 0; t < trials; ++t) {
        uint64_t correct = 0;
        for (size_t r = 0; r < firsts.size(); ++r) {
          correct += Aggregate(firsts[r], p, rng).label == noiseless.true_labels[r];
        }
        accs.push_back(static_cast<double>(correct) / static_cast<double>(firsts.size()));
      }
      const double mean = Mean(accs);
      double var = 0;
      for (double a : accs) var += (a - mean) * (a - mean);
      cells.push_back({epsilons[e], k, mean,
                       trials > 1 ? std::sqrt(var / (trials - 1)) : 0.0,
                       static_cast<double>(noiseless_correct) / static_cast<double>(firsts.size()),
                       trials});
    }
  }
  return cells;
}

void WriteEvalCsv(const std::vector<EvalCell>& cells, AggregationMode mode, std::ostream& out) {
  out << "# pricure-eval/1\n";
  out << "epsilon,owners,mode,accuracy,accuracy_stddev,noiseless_accuracy,trials\n";
  out << std::setprecision(10);
  for (const EvalCell& c : cells) {
    out << c.epsilon << "," << c.owners << "," << AggregationModeName(mode) << "," << c.accuracy
        << "," << c.accuracy_stddev << "," << c.noiseless_accuracy << "," << c.trials << "\n";
  }
}

}  // namespace pricure
