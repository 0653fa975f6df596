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

#include "pricure/pricure.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pricure/errors.h"
#include "pricure/runtime.h"

struct pricure_manifest {
  pricure::RunManifest m;
};

struct pricure_session {
  pricure::PreparedSession s;
  std::string spec;
  std::string json;
};

struct pricure_report {
  pricure::SimulationReport r;
};

struct pricure_party_result {
  std::vector<std::optional<uint32_t>> labels;
};

namespace {

using pricure::ErrorCode;

// Status values are the internal error codes.
static_assert(PRICURE_E_USAGE == static_cast<int>(ErrorCode::kUsage));
static_assert(PRICURE_E_IO == static_cast<int>(ErrorCode::kIo));
static_assert(PRICURE_E_PROTOCOL == static_cast<int>(ErrorCode::kProtocol));
static_assert(PRICURE_E_TAMPER == static_cast<int>(ErrorCode::kTamper));
static_assert(PRICURE_E_BUDGET_EXHAUSTED == static_cast<int>(ErrorCode::kBudgetExhausted));
static_assert(PRICURE_E_TIMEOUT == static_cast<int>(ErrorCode::kTimeout));
static_assert(PRICURE_E_TRANSPORT == static_cast<int>(ErrorCode::kTransport));
static_assert(PRICURE_E_UNKNOWN_TYPE == static_cast<int>(ErrorCode::kUnknownType));
static_assert(PRICURE_E_INTERNAL == static_cast<int>(ErrorCode::kInternal));
static_assert(PRICURE_ROLE_CLIENT == static_cast<int>(pricure::PartyRole::kClient));
static_assert(PRICURE_MODE_NONE == static_cast<int>(pricure::AggregationMode::kNoNoise));

thread_local std::string last_error;

pricure_status Fail(ErrorCode code, const std::string& message) {
  last_error = message;
  return static_cast<pricure_status>(code);
}

// Runs fn, translating exceptions into a status and the thread's message.
template <typename Fn>
pricure_status Guard(Fn&& fn) {
  last_error.clear();
  try {
    fn();
    return PRICURE_OK;
  } catch (const pricure::Error& e) {
    return Fail(e.code(), e.what());
  } catch (const std::bad_alloc&) {
    return Fail(ErrorCode::kInternal, "out of memory");
  } catch (const std::exception& e) {
    return Fail(ErrorCode::kInternal, e.what());
  }
}

void Require(const void* p, const char* what) {
  PRICURE_ENFORCE(p != nullptr, ErrorCode::kUsage, std::string(what) + " must not be NULL");
}

pricure::AggregationMode ToMode(pricure_mode mode) {
  switch (mode) {
    case PRICURE_MODE_VOTE: return pricure::AggregationMode::kVoteHistogram;
    case PRICURE_MODE_SCORE: return pricure::AggregationMode::kScoreSum;
    case PRICURE_MODE_NONE: return pricure::AggregationMode::kNoNoise;
  }
  pricure::Throw(ErrorCode::kUsage, "unknown aggregation mode " + std::to_string(mode));
}

pricure_timing_stats StatsOf(std::vector<double> v) {
  pricure_timing_stats s{};
  s.count = v.size();
  if (v.empty()) return s;
  std::sort(v.begin(), v.end());
  double sum = 0;
  for (double x : v) sum += x;
  s.mean_ms = sum / static_cast<double>(v.size());
  auto pct = [&](double p) {
    return v[std::min(v.size() - 1, static_cast<size_t>(p * static_cast<double>(v.size())))];
  };
  s.p50_ms = pct(0.5);
  s.p95_ms = pct(0.95);
  s.max_ms = v.back();
  return s;
}

}  // namespace

extern "C" {

const char* pricure_version(void) { return "1.0.0"; }

const char* pricure_last_error(void) { return last_error.c_str(); }

const char* pricure_status_name(pricure_status status) {
  return pricure::ErrorCodeName(static_cast<ErrorCode>(status));
}

pricure_status_class pricure_classify(pricure_status status) {
  const auto code = static_cast<ErrorCode>(status);
  switch (code) {
    case ErrorCode::kOk: return PRICURE_CLASS_OK;
    case ErrorCode::kUsage:
    case ErrorCode::kContract:
    case ErrorCode::kRange: return PRICURE_CLASS_USAGE;
    case ErrorCode::kParse:
    case ErrorCode::kIo: return PRICURE_CLASS_IO;
    case ErrorCode::kBudgetExhausted: return PRICURE_CLASS_BUDGET;
    default: break;
  }
  if (pricure::IsProtocolError(code)) return PRICURE_CLASS_PROTOCOL;
  if (pricure::IsTransportError(code) || pricure::IsParseError(code)) {
    return PRICURE_CLASS_TRANSPORT;
  }
  return PRICURE_CLASS_INTERNAL;
}

pricure_status pricure_parse_mode(const char* name, pricure_mode* out) {
  return Guard([&] {
    Require(name, "name");
    Require(out, "out");
    // A caller-supplied name is a usage error, unlike one read from a file.
    try {
      *out = static_cast<pricure_mode>(pricure::ParseAggregationMode(name));
    } catch (const pricure::Error& e) {
      pricure::Throw(ErrorCode::kUsage, e.what());
    }
  });
}

pricure_status pricure_parse_role(const char* name, pricure_role* out) {
  return Guard([&] {
    Require(name, "name");
    Require(out, "out");
    *out = static_cast<pricure_role>(pricure::ParsePartyRole(name));
  });
}

void pricure_fixture_options_init(pricure_fixture_options* o) {
  if (o == nullptr) return;
  *o = pricure_fixture_options{"blobs", 10, 1, 100, nullptr, PRICURE_MODE_VOTE, 0.05};
}

pricure_status pricure_write_fixtures(const pricure_fixture_options* options, char* path_out,
                                      size_t path_capacity) {
  return Guard([&] {
    Require(options, "options");
    Require(options->preset, "options->preset");
    Require(options->output_dir, "options->output_dir");
    pricure::FixtureOptions o;
    o.preset = options->preset;
    o.owners = options->owners;
    o.seed = options->seed;
    o.samples = options->samples;
    o.output_dir = options->output_dir;
    o.privacy.mode = ToMode(options->mode);
    o.privacy.epsilon = options->epsilon;
    o.privacy.Validate();
    const std::string path = pricure::WriteFixtures(o);
    if (path_out != nullptr) {
      PRICURE_ENFORCE(path.size() < path_capacity, ErrorCode::kRange,
                      "manifest path needs " + std::to_string(path.size() + 1) + " bytes");
      std::memcpy(path_out, path.c_str(), path.size() + 1);
    }
  });
}

pricure_status pricure_manifest_load(const char* path, pricure_manifest** out) {
  return Guard([&] {
    Require(path, "path");
    Require(out, "out");
    *out = nullptr;
    auto m = std::make_unique<pricure_manifest>();
    m->m = pricure::LoadManifest(path);
    *out = m.release();
  });
}

pricure_status pricure_manifest_save(const pricure_manifest* manifest, const char* path) {
  return Guard([&] {
    Require(manifest, "manifest");
    Require(path, "path");
    pricure::SaveManifest(manifest->m, path);
  });
}

void pricure_manifest_free(pricure_manifest* manifest) { delete manifest; }

pricure_status pricure_manifest_set_privacy(pricure_manifest* manifest, pricure_mode mode,
                                            double epsilon) {
  return Guard([&] {
    Require(manifest, "manifest");
    pricure::PrivacyParams p = manifest->m.privacy;
    p.mode = ToMode(mode);
    p.epsilon = epsilon;
    p.Validate();
    manifest->m.privacy = p;
  });
}

pricure_status pricure_manifest_set_clip(pricure_manifest* manifest, double clip) {
  return Guard([&] {
    Require(manifest, "manifest");
    pricure::PrivacyParams p = manifest->m.privacy;
    p.clip = clip;
    p.Validate();
    manifest->m.privacy = p;
  });
}

pricure_status pricure_manifest_set_budget_cap(pricure_manifest* manifest, double cap) {
  return Guard([&] {
    Require(manifest, "manifest");
    PRICURE_ENFORCE(!std::isnan(cap), ErrorCode::kUsage, "budget cap is NaN");
    manifest->m.budget_cap = cap < 0 ? pricure::BudgetLedger::kUnlimited : cap;
  });
}

pricure_status pricure_manifest_set_rounds(pricure_manifest* manifest, uint64_t rounds) {
  return Guard([&] {
    Require(manifest, "manifest");
    manifest->m.rounds = rounds;
  });
}

pricure_status pricure_manifest_set_seed(pricure_manifest* manifest, uint64_t seed) {
  return Guard([&] {
    Require(manifest, "manifest");
    manifest->m.seed = seed;
  });
}

pricure_status pricure_manifest_set_timeout_ms(pricure_manifest* manifest, uint32_t timeout_ms) {
  return Guard([&] {
    Require(manifest, "manifest");
    PRICURE_ENFORCE(timeout_ms > 0, ErrorCode::kUsage, "timeout must be positive");
    manifest->m.timeout_ms = timeout_ms;
  });
}

pricure_status pricure_manifest_set_endpoint(pricure_manifest* manifest, const char* key,
                                             const char* address) {
  return Guard([&] {
    Require(manifest, "manifest");
    Require(key, "key");
    Require(address, "address");
    const std::string k = key;
    PRICURE_ENFORCE(k == "worker_a" || k == "worker_b" || k == "aggregator", ErrorCode::kUsage,
                    "endpoint key must be worker_a, worker_b or aggregator, not '" + k + "'");
    pricure::ParseHostPort(address);
    manifest->m.endpoints[k] = address;
  });
}

pricure_status pricure_manifest_set_output_dir(pricure_manifest* manifest, const char* dir) {
  return Guard([&] {
    Require(manifest, "manifest");
    Require(dir, "dir");
    manifest->m.output_dir = dir;
  });
}

const char* pricure_manifest_output_dir(const pricure_manifest* manifest) {
  return manifest == nullptr ? "" : manifest->m.output_dir.c_str();
}

pricure_mode pricure_manifest_mode(const pricure_manifest* manifest) {
  return manifest == nullptr ? PRICURE_MODE_VOTE
                             : static_cast<pricure_mode>(manifest->m.privacy.mode);
}

double pricure_manifest_epsilon(const pricure_manifest* manifest) {
  return manifest == nullptr ? 0.0 : manifest->m.privacy.epsilon;
}

pricure_status pricure_session_prepare(const pricure_manifest* manifest, pricure_session** out) {
  return Guard([&] {
    Require(manifest, "manifest");
    Require(out, "out");
    *out = nullptr;
    auto s = std::make_unique<pricure_session>();
    s->s = pricure::PrepareSession(manifest->m);
    s->spec = s->s.cfg.spec.ToString();
    s->json = s->s.cfg.ToJson();
    *out = s.release();
  });
}

void pricure_session_free(pricure_session* session) { delete session; }

uint32_t pricure_session_owners(const pricure_session* session) {
  return session == nullptr ? 0 : session->s.cfg.owners;
}

uint64_t pricure_session_rounds(const pricure_session* session) {
  return session == nullptr ? 0 : session->s.cfg.rounds;
}

uint32_t pricure_session_classes(const pricure_session* session) {
  return session == nullptr ? 0 : session->s.cfg.spec.output_dim;
}

const char* pricure_session_spec(const pricure_session* session) {
  return session == nullptr ? "" : session->spec.c_str();
}

const char* pricure_session_config_json(const pricure_session* session) {
  return session == nullptr ? "" : session->json.c_str();
}

pricure_status pricure_simulate(const pricure_session* session, pricure_transport transport,
                                pricure_report** out) {
  return Guard([&] {
    Require(session, "session");
    Require(out, "out");
    *out = nullptr;
    PRICURE_ENFORCE(transport == PRICURE_TRANSPORT_LOOPBACK || transport == PRICURE_TRANSPORT_TCP,
                    ErrorCode::kUsage, "unknown transport");
    auto r = std::make_unique<pricure_report>();
    r->r = pricure::Simulate(session->s, transport == PRICURE_TRANSPORT_TCP
                                             ? pricure::LocalTcpStreams()
                                             : pricure::LoopbackStreams());
    *out = r.release();
  });
}

void pricure_report_free(pricure_report* report) { delete report; }

uint64_t pricure_report_rounds(const pricure_report* report) {
  return report == nullptr ? 0 : report->r.labels.size();
}

pricure_status pricure_report_label(const pricure_report* report, uint64_t round,
                                    uint32_t* label_out, int* answered) {
  return Guard([&] {
    Require(report, "report");
    Require(label_out, "label_out");
    PRICURE_ENFORCE(round < report->r.labels.size(), ErrorCode::kRange, "round out of range");
    const auto& l = report->r.labels[round];
    *label_out = l.value_or(0);
    if (answered != nullptr) *answered = l.has_value();
  });
}

pricure_status pricure_report_reference_label(const pricure_report* report, uint64_t round,
                                              uint32_t* out) {
  return Guard([&] {
    Require(report, "report");
    Require(out, "out");
    PRICURE_ENFORCE(round < report->r.reference_labels.size(), ErrorCode::kRange,
                    "round out of range");
    *out = report->r.reference_labels[round];
  });
}

pricure_status pricure_report_true_label(const pricure_report* report, uint64_t round,
                                         uint32_t* out) {
  return Guard([&] {
    Require(report, "report");
    Require(out, "out");
    PRICURE_ENFORCE(round < report->r.true_labels.size(), ErrorCode::kRange,
                    "round out of range");
    *out = report->r.true_labels[round];
  });
}

pricure_status pricure_report_summary_get(const pricure_report* report,
                                          pricure_report_summary* out) {
  return Guard([&] {
    Require(report, "report");
    Require(out, "out");
    const auto& r = report->r;
    *out = pricure_report_summary{r.labels.size(),     r.refused,
                                  r.agreement,         r.accuracy,
                                  r.reference_accuracy, r.max_output_error_ulp,
                                  r.outcome.aggregator.spent};
  });
}

pricure_status pricure_report_timing(const pricure_report* report, pricure_timing which,
                                     pricure_timing_stats* out) {
  return Guard([&] {
    Require(report, "report");
    Require(out, "out");
    const auto& r = report->r;
    switch (which) {
      case PRICURE_TIMING_SHARE: {
        std::vector<double> v;
        for (const auto& o : r.outcome.owners) v.push_back(o.share_ms);
        *out = StatsOf(v);
        return;
      }
      case PRICURE_TIMING_WORKER: *out = StatsOf(r.worker_round_ms); return;
      case PRICURE_TIMING_AGGREGATOR: *out = StatsOf(r.aggregator_round_ms); return;
      case PRICURE_TIMING_CLIENT: *out = StatsOf(r.client_latency_ms); return;
    }
    pricure::Throw(ErrorCode::kUsage, "unknown timing selector");
  });
}

pricure_status pricure_report_write(const pricure_report* report, const char* dir) {
  return Guard([&] {
    Require(report, "report");
    Require(dir, "dir");
    pricure::WriteSimulationReport(report->r, dir);
  });
}

const char* pricure_hardware_description(void) {
  static const std::string description = pricure::HardwareDescription();
  return description.c_str();
}

pricure_status pricure_evaluate(const pricure_report* noiseless, const double* epsilons,
                                size_t n_epsilons, const uint32_t* owner_counts,
                                size_t n_owner_counts, pricure_mode mode, uint32_t trials,
                                uint64_t seed, const char* csv_path) {
  return Guard([&] {
    Require(noiseless, "noiseless");
    Require(csv_path, "csv_path");
    PRICURE_ENFORCE(n_epsilons > 0 && epsilons != nullptr, ErrorCode::kUsage,
                    "at least one epsilon is required");
    PRICURE_ENFORCE(n_owner_counts > 0 && owner_counts != nullptr, ErrorCode::kUsage,
                    "at least one owner count is required");
    PRICURE_ENFORCE(noiseless->r.cfg.privacy.mode == pricure::AggregationMode::kNoNoise,
                    ErrorCode::kUsage, "evaluation needs a report from a noiseless run");
    const auto cells = pricure::EvaluateGrid(
        noiseless->r, std::vector<double>(epsilons, epsilons + n_epsilons),
        std::vector<uint32_t>(owner_counts, owner_counts + n_owner_counts), ToMode(mode), trials,
        seed);
    std::ofstream out(csv_path);
    PRICURE_ENFORCE(out.good(), ErrorCode::kIo, std::string("cannot write '") + csv_path + "'");
    pricure::WriteEvalCsv(cells, ToMode(mode), out);
    PRICURE_ENFORCE(out.good(), ErrorCode::kIo, std::string("writing '") + csv_path + "' failed");
  });
}

pricure_status pricure_run_party(const pricure_session* session,
                                 const pricure_manifest* manifest, pricure_role role,
                                 uint32_t index, pricure_party_result** out) {
  return Guard([&] {
    Require(session, "session");
    Require(manifest, "manifest");
    Require(out, "out");
    *out = nullptr;
    PRICURE_ENFORCE(role >= PRICURE_ROLE_OWNER && role <= PRICURE_ROLE_CLIENT, ErrorCode::kUsage,
                    "unknown role");
    const pricure::PartyResult r = pricure::RunParty(
        session->s, manifest->m.endpoints, static_cast<pricure::PartyRole>(role), index);
    auto res = std::make_unique<pricure_party_result>();
    if (r.client) {
      for (const auto& c : r.client->rounds) res->labels.push_back(c.label);
    } else if (r.aggregator) {
      for (const auto& a : r.aggregator->rounds) {
        res->labels.push_back(a.refused ? std::nullopt
                                        : std::optional<uint32_t>(a.release.label));
      }
    }
    *out = res.release();
  });
}

void pricure_party_result_free(pricure_party_result* result) { delete result; }

uint64_t pricure_party_result_rounds(const pricure_party_result* result) {
  return result == nullptr ? 0 : result->labels.size();
}

pricure_status pricure_party_result_label(const pricure_party_result* result, uint64_t round,
                                          uint32_t* label_out, int* answered) {
  return Guard([&] {
    Require(result, "result");
    Require(label_out, "label_out");
    PRICURE_ENFORCE(round < result->labels.size(), ErrorCode::kRange, "round out of range");
    *label_out = result->labels[round].value_or(0);
    if (answered != nullptr) *answered = result->labels[round].has_value();
  });
}

}  // extern "C"
