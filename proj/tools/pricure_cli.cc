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

// Command-line front end over the C API.
//
// Exit codes: 0 success, 1 internal, 2 usage, 3 protocol, 4 transport,
// 5 budget, 6 file or parse errors.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pricure/pricure.h"

namespace {

enum ExitCode {
  kExitOk = 0,
  kExitInternal = 1,
  kExitUsage = 2,
  kExitProtocol = 3,
  kExitTransport = 4,
  kExitBudget = 5,
  kExitIo = 6,
};

int ExitCodeFor(pricure_status status) {
  switch (pricure_classify(status)) {
    case PRICURE_CLASS_OK: return kExitOk;
    case PRICURE_CLASS_USAGE: return kExitUsage;
    case PRICURE_CLASS_PROTOCOL: return kExitProtocol;
    case PRICURE_CLASS_TRANSPORT: return kExitTransport;
    case PRICURE_CLASS_BUDGET: return kExitBudget;
    case PRICURE_CLASS_IO: return kExitIo;
    case PRICURE_CLASS_INTERNAL: return kExitInternal;
  }
  return kExitInternal;
}

// Carries a failed status out of a command.
struct Failure {
  pricure_status status;
  std::string message;
};

void Check(pricure_status status) {
  if (status != PRICURE_OK) throw Failure{status, pricure_last_error()};
}

template <typename T, void (*Free)(T*)>
struct Deleter {
  void operator()(T* p) const { Free(p); }
};
using ManifestPtr =
    std::unique_ptr<pricure_manifest, Deleter<pricure_manifest, pricure_manifest_free>>;
using SessionPtr = std::unique_ptr<pricure_session, Deleter<pricure_session, pricure_session_free>>;
using ReportPtr = std::unique_ptr<pricure_report, Deleter<pricure_report, pricure_report_free>>;
using PartyPtr = std::unique_ptr<pricure_party_result,
                                 Deleter<pricure_party_result, pricure_party_result_free>>;

pricure_mode ParseMode(const std::string& name) {
  pricure_mode mode;
  Check(pricure_parse_mode(name.c_str(), &mode));
  return mode;
}

// Manifest overrides shared by the session commands.
struct SessionFlags {
  std::string manifest;
  std::optional<std::string> mode;
  std::optional<double> epsilon;
  std::optional<double> clip;
  std::optional<double> budget_cap;
  std::optional<uint64_t> rounds;
  std::optional<uint64_t> seed;
  std::optional<uint32_t> timeout_ms;

  void Register(CLI::App* cmd) {
    cmd->add_option("-M,--manifest", manifest, "Run manifest (pricure-manifest/1)")
        ->required();
    cmd->add_option("--mode", mode, "Aggregation: vote, score or none");
    cmd->add_option("--epsilon", epsilon, "Per-query privacy parameter");
    cmd->add_option("--clip", clip, "Score clip bound for score mode");
    cmd->add_option("--budget-cap", budget_cap, "Total epsilon per client (negative: none)");
    cmd->add_option("--rounds", rounds, "Queries to run (0: every dataset row)");
    cmd->add_option("--seed", seed, "Master seed");
    cmd->add_option("--timeout-ms", timeout_ms, "Deadline for any single wait");
  }

  ManifestPtr Load() const {
    pricure_manifest* raw = nullptr;
    Check(pricure_manifest_load(manifest.c_str(), &raw));
    ManifestPtr m(raw);
    if (mode || epsilon) {
      Check(pricure_manifest_set_privacy(m.get(),
                                         mode ? ParseMode(*mode) : pricure_manifest_mode(m.get()),
                                         epsilon ? *epsilon : pricure_manifest_epsilon(m.get())));
    }
    if (clip) Check(pricure_manifest_set_clip(m.get(), *clip));
    if (budget_cap) Check(pricure_manifest_set_budget_cap(m.get(), *budget_cap));
    if (rounds) Check(pricure_manifest_set_rounds(m.get(), *rounds));
    if (seed) Check(pricure_manifest_set_seed(m.get(), *seed));
    if (timeout_ms) Check(pricure_manifest_set_timeout_ms(m.get(), *timeout_ms));
    return m;
  }
};

SessionPtr Prepare(const pricure_manifest* m) {
  pricure_session* raw = nullptr;
  Check(pricure_session_prepare(m, &raw));
  return SessionPtr(raw);
}

ReportPtr RunSimulation(const pricure_session* s, pricure_transport transport) {
  pricure_report* raw = nullptr;
  Check(pricure_simulate(s, transport, &raw));
  return ReportPtr(raw);
}

void PrintTiming(const pricure_report* r, pricure_timing which, const char* name) {
  pricure_timing_stats t;
  Check(pricure_report_timing(r, which, &t));
  std::printf("  %-22s n=%-5llu mean=%9.3f  p50=%9.3f  p95=%9.3f  max=%9.3f ms\n", name,
              static_cast<unsigned long long>(t.count), t.mean_ms, t.p50_ms, t.p95_ms, t.max_ms);
}

int CmdFixtures(const std::string& preset, uint32_t owners, uint64_t seed, uint32_t samples,
                const std::string& out, const std::string& mode, double epsilon) {
  pricure_fixture_options o;
  pricure_fixture_options_init(&o);
  o.preset = preset.c_str();
  o.owners = owners;
  o.seed = seed;
  o.samples = samples;
  o.output_dir = out.c_str();
  o.mode = ParseMode(mode);
  o.epsilon = epsilon;
  std::vector<char> path(4096);
  Check(pricure_write_fixtures(&o, path.data(), path.size()));
  std::printf("wrote %u %s models, %u samples\nmanifest: %s\n", owners, preset.c_str(), samples,
              path.data());
  return kExitOk;
}

int CmdSimulate(const SessionFlags& flags, const std::string& transport,
                std::optional<std::string> out) {
  ManifestPtr m = flags.Load();
  if (out) Check(pricure_manifest_set_output_dir(m.get(), out->c_str()));
  SessionPtr s = Prepare(m.get());
  ReportPtr r = RunSimulation(
      s.get(), transport == "tcp" ? PRICURE_TRANSPORT_TCP : PRICURE_TRANSPORT_LOOPBACK);
  const std::string dir = pricure_manifest_output_dir(m.get());
  Check(pricure_report_write(r.get(), dir.c_str()));
  pricure_report_summary sum;
  Check(pricure_report_summary_get(r.get(), &sum));
  std::printf("network %s, %u owners, %llu rounds over %s\n", pricure_session_spec(s.get()),
              pricure_session_owners(s.get()), static_cast<unsigned long long>(sum.rounds),
              transport.c_str());
  std::printf("  answered %llu, refused %llu\n",
              static_cast<unsigned long long>(sum.rounds - sum.refused),
              static_cast<unsigned long long>(sum.refused));
  std::printf("  agreement with plaintext ensemble  %.4f\n", sum.agreement);
  std::printf("  accuracy                           %.4f\n", sum.accuracy);
  std::printf("  plaintext ensemble accuracy        %.4f\n", sum.reference_accuracy);
  std::printf("  max output error                   %lld ulp\n",
              static_cast<long long>(sum.max_output_error_ulp));
  if (std::isinf(sum.budget_spent)) {
    std::printf("  budget spent                       unbounded (noiseless)\n");
  } else {
    std::printf("  budget spent                       %.6g\n", sum.budget_spent);
  }
  PrintTiming(r.get(), PRICURE_TIMING_SHARE, "share per model");
  PrintTiming(r.get(), PRICURE_TIMING_WORKER, "worker round");
  PrintTiming(r.get(), PRICURE_TIMING_AGGREGATOR, "aggregator round");
  PrintTiming(r.get(), PRICURE_TIMING_CLIENT, "client latency");
  std::printf("report: %s\n", dir.c_str());
  return kExitOk;
}

int CmdParty(const SessionFlags& flags, const std::string& role_name, uint32_t index,
             const std::map<std::string, std::string>& endpoints,
             std::optional<std::string> labels_path) {
  pricure_role role;
  Check(pricure_parse_role(role_name.c_str(), &role));
  ManifestPtr m = flags.Load();
  for (const auto& [k, v] : endpoints) Check(pricure_manifest_set_endpoint(m.get(), k.c_str(), v.c_str()));
  SessionPtr s = Prepare(m.get());
  pricure_party_result* raw = nullptr;
  Check(pricure_run_party(s.get(), m.get(), role, index, &raw));
  PartyPtr result(raw);
  if (role != PRICURE_ROLE_CLIENT) return kExitOk;

  std::ofstream file;
  if (labels_path) {
    file.open(*labels_path);
    if (!file) {
      throw Failure{PRICURE_E_IO, "cannot write '" + *labels_path + "'"};
    }
  }
  std::ostream& out = labels_path ? file : std::cout;
  out << "round,label\n";
  for (uint64_t r = 0; r < pricure_party_result_rounds(result.get()); ++r) {
    uint32_t label = 0;
    int answered = 0;
    Check(pricure_party_result_label(result.get(), r, &label, &answered));
    out << r << "," << (answered ? std::to_string(label) : std::string("refused")) << "\n";
  }
  return kExitOk;
}

int CmdBench(const SessionFlags& flags, uint32_t repeat, std::optional<std::string> json_path) {
  ManifestPtr m = flags.Load();
  SessionPtr s = Prepare(m.get());
  std::printf("bench: network %s, %u owners, %llu queries, %u run(s)\nhardware: %s\n",
              pricure_session_spec(s.get()), pricure_session_owners(s.get()),
              static_cast<unsigned long long>(pricure_session_rounds(s.get())), repeat,
              pricure_hardware_description());
  std::vector<ReportPtr> reports;
  for (uint32_t i = 0; i < repeat; ++i) {
    reports.push_back(RunSimulation(s.get(), PRICURE_TRANSPORT_LOOPBACK));
    std::printf("run %u\n", i + 1);
    PrintTiming(reports.back().get(), PRICURE_TIMING_SHARE, "share per model");
    PrintTiming(reports.back().get(), PRICURE_TIMING_CLIENT, "per-sample latency");
    PrintTiming(reports.back().get(), PRICURE_TIMING_WORKER, "worker round");
    PrintTiming(reports.back().get(), PRICURE_TIMING_AGGREGATOR, "aggregator round");
  }
  if (json_path) {
    std::ofstream out(*json_path);
    if (!out) throw Failure{PRICURE_E_IO, "cannot write '" + *json_path + "'"};
    out << "{\n  \"format\": \"pricure-bench/1\",\n  \"network\": \""
        << pricure_session_spec(s.get()) << "\",\n  \"owners\": "
        << pricure_session_owners(s.get()) << ",\n  \"queries\": "
        << pricure_session_rounds(s.get()) << ",\n  \"hardware\": \""
        << pricure_hardware_description() << "\",\n  \"runs\": [";
    for (size_t i = 0; i < reports.size(); ++i) {
      out << (i ? ",\n" : "\n") << "    {";
      const std::pair<pricure_timing, const char*> kinds[] = {
          {PRICURE_TIMING_SHARE, "share_per_model"},
          {PRICURE_TIMING_CLIENT, "per_sample_latency"},
          {PRICURE_TIMING_WORKER, "worker_round"},
          {PRICURE_TIMING_AGGREGATOR, "aggregator_round"}};
      for (size_t k = 0; k < 4; ++k) {
        pricure_timing_stats t;
        Check(pricure_report_timing(reports[i].get(), kinds[k].first, &t));
        out << (k ? ", " : "") << "\"" << kinds[k].second << "_ms\": {\"count\": " << t.count
            << ", \"mean\": " << t.mean_ms << ", \"p50\": " << t.p50_ms
            << ", \"p95\": " << t.p95_ms << ", \"max\": " << t.max_ms << "}";
      }
      out << "}";
    }
    out << "\n  ]\n}\n";
  }
  return kExitOk;
}

int CmdEval(const SessionFlags& flags, const std::vector<double>& epsilons,
            std::vector<uint32_t> owner_counts, const std::string& mode, uint32_t trials,
            uint64_t eval_seed, const std::string& out) {
  ManifestPtr m = flags.Load();
  // One noiseless protocol run records every owner's output.
  Check(pricure_manifest_set_privacy(m.get(), PRICURE_MODE_NONE, 1.0));
  Check(pricure_manifest_set_budget_cap(m.get(), -1));
  SessionPtr s = Prepare(m.get());
  if (owner_counts.empty()) owner_counts.push_back(pricure_session_owners(s.get()));
  ReportPtr r = RunSimulation(s.get(), PRICURE_TRANSPORT_LOOPBACK);
  Check(pricure_evaluate(r.get(), epsilons.data(), epsilons.size(), owner_counts.data(),
                         owner_counts.size(), ParseMode(mode), trials, eval_seed, out.c_str()));
  std::printf("wrote %zu cells to %s\n", epsilons.size() * owner_counts.size(), out.c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pricure: private collaborative inference over secret-shared models"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(pricure_version()));

  std::function<int()> run;

  // fixtures
  auto* fx = app.add_subcommand("fixtures", "Write synthetic models, a dataset and a manifest");
  std::string fx_preset = "blobs", fx_out = "fixtures", fx_mode = "vote";
  uint32_t fx_m = 10, fx_samples = 100;
  uint64_t fx_seed = 1;
  double fx_eps = 0.05;
  fx->add_option("--spec", fx_preset, "Network preset: mnist, fmnist, idc, mimic, blobs")
      ->capture_default_str();
  fx->add_option("--m", fx_m, "Number of model owners")->capture_default_str();
  fx->add_option("--seed", fx_seed, "Seed for models and data")->capture_default_str();
  fx->add_option("--samples", fx_samples, "Dataset rows")->capture_default_str();
  fx->add_option("-o,--out", fx_out, "Output directory")->capture_default_str();
  fx->add_option("--mode", fx_mode, "Aggregation mode written to the manifest")
      ->capture_default_str();
  fx->add_option("--epsilon", fx_eps, "Epsilon written to the manifest")->capture_default_str();
  fx->callback([&] {
    run = [&] { return CmdFixtures(fx_preset, fx_m, fx_seed, fx_samples, fx_out, fx_mode, fx_eps); };
  });

  // simulate
  auto* sim = app.add_subcommand("simulate", "Run every party in this process");
  SessionFlags sim_flags;
  sim_flags.Register(sim);
  std::string sim_transport = "loopback";
  std::optional<std::string> sim_out;
  sim->add_option("--transport", sim_transport, "loopback or tcp (127.0.0.1)")
      ->check(CLI::IsMember({"loopback", "tcp"}))
      ->capture_default_str();
  sim->add_option("-o,--out", sim_out, "Report directory (default: manifest output_dir)");
  sim->callback([&] { run = [&] { return CmdSimulate(sim_flags, sim_transport, sim_out); }; });

  // party
  auto* party = app.add_subcommand("party", "Run one party over TCP");
  SessionFlags party_flags;
  party_flags.Register(party);
  std::string party_role;
  uint32_t party_index = 0;
  std::optional<std::string> ep_a, ep_b, ep_agg, party_labels;
  party->add_option("--role", party_role,
                    "owner, worker_a, worker_b, dealer, aggregator or client")
      ->required();
  party->add_option("--index", party_index, "Owner number, 1-based (owners only)");
  party->add_option("--worker-a", ep_a, "host:port of worker A");
  party->add_option("--worker-b", ep_b, "host:port of worker B");
  party->add_option("--aggregator", ep_agg, "host:port of the aggregator");
  party->add_option("--labels", party_labels, "Client only: write labels CSV here, not stdout");
  party->callback([&] {
    run = [&] {
      std::map<std::string, std::string> eps;
      if (ep_a) eps["worker_a"] = *ep_a;
      if (ep_b) eps["worker_b"] = *ep_b;
      if (ep_agg) eps["aggregator"] = *ep_agg;
      return CmdParty(party_flags, party_role, party_index, eps, party_labels);
    };
  });

  // bench
  auto* bench = app.add_subcommand("bench", "Measure share time and per-sample latency");
  SessionFlags bench_flags;
  bench_flags.Register(bench);
  uint32_t bench_repeat = 1;
  std::optional<std::string> bench_json;
  bench->add_option("--repeat", bench_repeat, "Independent runs")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  bench->add_option("--json", bench_json, "Also write the measurements as JSON");
  bench->callback([&] { run = [&] { return CmdBench(bench_flags, bench_repeat, bench_json); }; });

  // eval
  auto* ev = app.add_subcommand("eval", "Accuracy over an epsilon x owner-count grid");
  SessionFlags ev_flags;
  ev_flags.Register(ev);
  std::vector<double> ev_eps{0.001, 0.01, 0.05, 0.1, 0.5, 1.0};
  std::vector<uint32_t> ev_owners;
  std::string ev_mode = "vote", ev_out = "eval.csv";
  uint32_t ev_trials = 100;
  uint64_t ev_seed = 1;
  ev->add_option("--epsilons", ev_eps, "Epsilon grid")->delimiter(',')->capture_default_str();
  ev->add_option("--owners", ev_owners, "Owner counts (first k models); default all")
      ->delimiter(',');
  ev->add_option("--eval-mode", ev_mode, "vote or score")
      ->check(CLI::IsMember({"vote", "score"}))
      ->capture_default_str();
  ev->add_option("--trials", ev_trials, "Noise draws per cell")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  ev->add_option("--eval-seed", ev_seed, "Seed for the noise draws")->capture_default_str();
  ev->add_option("-o,--out", ev_out, "CSV output path")->capture_default_str();
  ev->callback([&] {
    run = [&] { return CmdEval(ev_flags, ev_eps, ev_owners, ev_mode, ev_trials, ev_seed, ev_out); };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }
  try {
    return run();
  } catch (const Failure& f) {
    std::fprintf(stderr, "pricure: %s error: %s\n", pricure_status_name(f.status),
                 f.message.c_str());
    return ExitCodeFor(f.status);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "pricure: internal error: %s\n", e.what());
    return kExitInternal;
  }
}
