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

#include <fstream>
#include <sstream>
#include <thread>

#include "common/temp_dir.h"
#include "gtest/gtest.h"
#include "json.hpp"
#include "pricure/errors.h"

namespace pricure {
namespace {

namespace fs = std::filesystem;
using testing::TempDir;

ErrorCode CodeOf(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kOk;
}

std::string Slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string Fixtures(const TempDir& dir, const std::string& preset, uint32_t owners,
                     uint32_t samples, uint64_t seed = 1,
                     AggregationMode mode = AggregationMode::kNoNoise) {
  FixtureOptions o;
  o.preset = preset;
  o.owners = owners;
  o.samples = samples;
  o.seed = seed;
  o.output_dir = dir.path().string();
  o.privacy.mode = mode;
  return WriteFixtures(o);
}

TEST(ManifestTest, SaveLoadRoundTripWithRelativePaths) {
  TempDir dir;
  const std::string path = Fixtures(dir, "blobs", 3, 8);
  RunManifest m = LoadManifest(path);
  ASSERT_EQ(m.models.size(), 3u);
  EXPECT_EQ(m.rounds, 8u);
  EXPECT_EQ(m.privacy.mode, AggregationMode::kNoNoise);

  // Stored paths are relative to the manifest.
  const nlohmann::json j = nlohmann::json::parse(Slurp(path));
  EXPECT_EQ(j["format"], "pricure-manifest/1");
  EXPECT_EQ(j["models"][0], "model_001.model");
  EXPECT_EQ(j["dataset"], "dataset.csv");
  EXPECT_TRUE(j["session"]["budget_cap"].is_null());

  m.budget_cap = 2.5;
  m.privacy = {AggregationMode::kScoreSum, 0.25, 1.0, 2.0};
  m.timeout_ms = 1234;
  m.endpoints = {{"worker_a", "127.0.0.1:9001"}, {"aggregator", "127.0.0.1:9003"}};
  const std::string copy = dir.Sub("copy.json");
  SaveManifest(m, copy);
  const RunManifest back = LoadManifest(copy);
  EXPECT_EQ(back.models, m.models);
  EXPECT_EQ(back.dataset, m.dataset);
  EXPECT_EQ(back.budget_cap, 2.5);
  EXPECT_EQ(back.privacy.mode, AggregationMode::kScoreSum);
  EXPECT_EQ(back.privacy.epsilon, 0.25);
  EXPECT_EQ(back.privacy.clip, 2.0);
  EXPECT_EQ(back.timeout_ms, 1234u);
  EXPECT_EQ(back.endpoints, m.endpoints);
  EXPECT_EQ(back.modulus, RingModulus::kDefault);
}

TEST(ManifestTest, ErrorsAreClassified) {
  TempDir dir;
  EXPECT_EQ(CodeOf([&] { LoadManifest(dir.Sub("none.json")); }), ErrorCode::kIo);
  const std::string path = Fixtures(dir, "blobs", 2, 4);
  auto write = [&](const std::string& text) {
    std::ofstream(dir.Sub("m.json")) << text;
    return dir.Sub("m.json");
  };
  EXPECT_EQ(CodeOf([&] { LoadManifest(write("{")); }), ErrorCode::kParse);
  EXPECT_EQ(CodeOf([&] { LoadManifest(write("{\"format\":\"other\"}")); }), ErrorCode::kParse);
  nlohmann::json j = nlohmann::json::parse(Slurp(path));
  j["models"].push_back("missing.model");
  EXPECT_EQ(CodeOf([&] { LoadManifest(write(j.dump())); }), ErrorCode::kIo);
  j = nlohmann::json::parse(Slurp(path));
  j["models"] = nlohmann::json::array();
  EXPECT_EQ(CodeOf([&] { LoadManifest(write(j.dump())); }), ErrorCode::kParse);
}

TEST(FixtureTest, DeterministicInSeed) {
  TempDir a, b, c;
  Fixtures(a, "blobs", 3, 20, 5);
  Fixtures(b, "blobs", 3, 20, 5);
  Fixtures(c, "blobs", 3, 20, 6);
  for (const char* f : {"model_001.model", "model_003.model", "dataset.csv"}) {
    EXPECT_EQ(Slurp(a.path() / f), Slurp(b.path() / f)) << f;
    EXPECT_NE(Slurp(a.path() / f), Slurp(c.path() / f)) << f;
  }
}

TEST(FixtureTest, PresetShapesAndUsageErrors) {
  TempDir dir;
  const PreparedSession s = PrepareSession(LoadManifest(Fixtures(dir, "mimic", 2, 5)));
  EXPECT_EQ(s.cfg.spec.ToString(), "30-500-4");
  EXPECT_EQ(s.models.size(), 2u);
  EXPECT_EQ(s.inputs.size(), 5u);
  EXPECT_EQ(s.inputs[0].size(), 30u);
  TempDir other;
  EXPECT_EQ(CodeOf([&] { Fixtures(other, "blobs", 0, 5); }), ErrorCode::kUsage);
  EXPECT_EQ(CodeOf([&] { Fixtures(other, "nosuch", 2, 5); }), ErrorCode::kUsage);
}

TEST(PrepareTest, RejectsInconsistentInputs) {
  TempDir a, b;
  RunManifest m = LoadManifest(Fixtures(a, "blobs", 2, 6));
  m.rounds = 7;
  EXPECT_EQ(CodeOf([&] { PrepareSession(m); }), ErrorCode::kUsage);
  m.rounds = 0;
  EXPECT_EQ(PrepareSession(m).cfg.rounds, 6u);

  RunManifest mixed = m;
  mixed.models.push_back(LoadManifest(Fixtures(b, "mimic", 1, 2)).models[0]);
  EXPECT_EQ(CodeOf([&] { PrepareSession(mixed); }), ErrorCode::kContract);

  RunManifest wrong_data = m;
  wrong_data.dataset = LoadManifest(b.Sub("manifest.json")).dataset;
  EXPECT_EQ(CodeOf([&] { PrepareSession(wrong_data); }), ErrorCode::kContract);
}

TEST(PrepareTest, SessionIdFollowsSeed) {
  TempDir dir;
  RunManifest m = LoadManifest(Fixtures(dir, "blobs", 2, 4));
  const SessionConfig c1 = PrepareSession(m).cfg;
  EXPECT_EQ(PrepareSession(m).cfg.Hash(), c1.Hash());
  m.seed += 1;
  EXPECT_NE(PrepareSession(m).cfg.session, c1.session);
}

TEST(SimulateTest, NoiselessBlobsMatchReferenceAndWriteReport) {
  TempDir dir;
  const RunManifest m = LoadManifest(Fixtures(dir, "blobs", 5, 40));
  const SimulationReport r = Simulate(PrepareSession(m), LoopbackStreams());
  EXPECT_EQ(r.max_output_error_ulp, 0);
  EXPECT_EQ(r.agreement, 1.0);
  EXPECT_EQ(r.refused, 0u);
  EXPECT_GE(r.reference_accuracy, 0.9);
  EXPECT_EQ(r.accuracy, r.reference_accuracy);

  WriteSimulationReport(r, m.output_dir);
  std::ifstream labels(fs::path(m.output_dir) / "labels.csv");
  std::string line;
  std::getline(labels, line);
  EXPECT_EQ(line, "round,true_label,label,reference_label");
  int rows = 0;
  while (std::getline(labels, line)) ++rows;
  EXPECT_EQ(rows, 40);
  const auto j = nlohmann::json::parse(Slurp(fs::path(m.output_dir) / "report.json"));
  EXPECT_EQ(j["format"], "pricure-report/1");
  EXPECT_EQ(j["rounds"], 40);
  EXPECT_EQ(j["agreement"], 1.0);
  EXPECT_TRUE(j["timing_ms"]["worker_round"].contains("mean"));
}

TEST(EvalTest, GridShapeAndLimits) {
  TempDir dir;
  const SimulationReport r =
      Simulate(PrepareSession(LoadManifest(Fixtures(dir, "blobs", 4, 40))), LoopbackStreams());
  const auto cells =
      EvaluateGrid(r, {0.001, 1000.0}, {1, 4}, AggregationMode::kVoteHistogram, 20, 3);
  ASSERT_EQ(cells.size(), 4u);
  for (const EvalCell& c : cells) {
    EXPECT_EQ(c.trials, 20u);
    if (c.epsilon == 1000.0) {
      EXPECT_EQ(c.accuracy, c.noiseless_accuracy);
      EXPECT_EQ(c.accuracy_stddev, 0.0);
    }
  }
  EXPECT_EQ(cells[3].noiseless_accuracy, r.reference_accuracy);
  EXPECT_LT(cells[2].accuracy, 0.5);  // 4 classes, noise dominates
  EXPECT_EQ(CodeOf([&] { EvaluateGrid(r, {1.0}, {5}, AggregationMode::kVoteHistogram, 1, 1); }),
            ErrorCode::kUsage);
  EXPECT_EQ(CodeOf([&] { EvaluateGrid(r, {0.0}, {1}, AggregationMode::kVoteHistogram, 1, 1); }),
            ErrorCode::kContract);

  std::ostringstream csv;
  WriteEvalCsv(cells, AggregationMode::kVoteHistogram, csv);
  std::istringstream in(csv.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "# pricure-eval/1");
  std::getline(in, line);
  EXPECT_EQ(line, "epsilon,owners,mode,accuracy,accuracy_stddev,noiseless_accuracy,trials");
  int rows = 0;
  while (std::getline(in, line)) {
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 6);
    ++rows;
  }
  EXPECT_EQ(rows, 4);
}

uint16_t FreePort() {
  TcpListener l("127.0.0.1", 0);
  return l.port();
}

TEST(PartyTest, SeparatePartiesOverTcpMatchSimulation) {
  TempDir dir;
  RunManifest m = LoadManifest(Fixtures(dir, "blobs", 3, 6, 9, AggregationMode::kVoteHistogram));
  m.privacy.epsilon = 0.5;
  m.timeout_ms = 10000;
  m.endpoints = {{"worker_a", "127.0.0.1:" + std::to_string(FreePort())},
                 {"worker_b", "127.0.0.1:" + std::to_string(FreePort())},
                 {"aggregator", "localhost:" + std::to_string(FreePort())}};
  const PreparedSession s = PrepareSession(m);
  const SimulationReport sim = Simulate(s, LoopbackStreams());

  std::vector<std::pair<PartyRole, uint32_t>> parties = {
      {PartyRole::kWorkerA, 0}, {PartyRole::kWorkerB, 0}, {PartyRole::kAggregator, 0},
      {PartyRole::kDealer, 0},  {PartyRole::kClient, 0}};
  for (uint32_t i = 1; i <= 3; ++i) parties.push_back({PartyRole::kOwner, i});
  std::vector<std::optional<PartyResult>> results(parties.size());
  std::vector<std::string> errors(parties.size());
  std::vector<std::thread> threads;
  for (size_t p = 0; p < parties.size(); ++p) {
    threads.emplace_back([&, p] {
      try {
        results[p] = RunParty(s, m.endpoints, parties[p].first, parties[p].second);
      } catch (const std::exception& e) {
        errors[p] = e.what();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (size_t p = 0; p < parties.size(); ++p) EXPECT_EQ(errors[p], "") << p;
  ASSERT_TRUE(results[4] && results[4]->client);
  const ClientReport& client = *results[4]->client;
  ASSERT_EQ(client.rounds.size(), 6u);
  for (size_t r = 0; r < 6; ++r) EXPECT_EQ(client.rounds[r].label, sim.labels[r]) << r;
}

TEST(PartyTest, MissingPeerTimesOutWithItsName) {
  TempDir dir;
  RunManifest m = LoadManifest(Fixtures(dir, "blobs", 1, 1));
  m.timeout_ms = 300;
  m.endpoints = {{"worker_a", "127.0.0.1:" + std::to_string(FreePort())},
                 {"worker_b", "127.0.0.1:" + std::to_string(FreePort())},
                 {"aggregator", "127.0.0.1:" + std::to_string(FreePort())}};
  try {
    RunParty(PrepareSession(m), m.endpoints, PartyRole::kOwner, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kTimeout);
    EXPECT_NE(std::string(e.what()).find("worker A"), std::string::npos) << e.what();
  }
  EXPECT_EQ(CodeOf([&] { RunParty(PrepareSession(m), m.endpoints, PartyRole::kOwner, 2); }),
            ErrorCode::kUsage);
  EXPECT_EQ(CodeOf([] { ParsePartyRole("boss"); }), ErrorCode::kUsage);
}

}  // namespace
}  // namespace pricure
