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

#include "pricure/dp.h"

#include <algorithm>
#include <cmath>

#include "pricure/errors.h"

namespace pricure {

namespace {

// Summing e.g. 0.05 twenty times overshoots 1.0 by an ulp; costs within this
// relative slack of the cap still fit.
constexpr double kCapSlack = 1e-9;

bool PositiveFinite(double v) { return std::isfinite(v) && v > 0.0; }

size_t ArgMaxLowest(const std::vector<double>& v) {
  return static_cast<size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

void CheckScores(const std::vector<std::vector<double>>& scores) {
  PRICURE_ENFORCE(!scores.empty(), ErrorCode::kContract, "aggregation needs at least one model");
  const size_t o = scores[0].size();
  PRICURE_ENFORCE(o >= 1, ErrorCode::kContract, "score vectors are empty");
  for (size_t i = 0; i < scores.size(); ++i) {
    PRICURE_ENFORCE(scores[i].size() == o, ErrorCode::kContract,
                    "model " + std::to_string(i) + " has " + std::to_string(scores[i].size()) +
                        " scores, expected " + std::to_string(o));
  }
}

}  // namespace

const char* AggregationModeName(AggregationMode mode) {
  switch (mode) {
    case AggregationMode::kVoteHistogram:
      return "vote";
    case AggregationMode::kScoreSum:
      return "score";
    case AggregationMode::kNoNoise:
      return "none";
  }
  return "?";
}

AggregationMode ParseAggregationMode(const std::string& name) {
  if (name == "vote") return AggregationMode::kVoteHistogram;
  if (name == "score") return AggregationMode::kScoreSum;
  if (name == "none") return AggregationMode::kNoNoise;
  Throw(ErrorCode::kParse, "unknown aggregation mode '" + name + "' (vote, score, none)");
}

void PrivacyParams::Validate() const {
  PRICURE_ENFORCE(PositiveFinite(epsilon), ErrorCode::kContract,
                  "epsilon must be positive and finite");
  PRICURE_ENFORCE(PositiveFinite(sensitivity), ErrorCode::kContract,
                  "sensitivity must be positive and finite");
  PRICURE_ENFORCE(PositiveFinite(clip), ErrorCode::kContract,
                  "clip bound must be positive and finite");
}

double PrivacyParams::NoiseScale() const {
  switch (mode) {
    case AggregationMode::kVoteHistogram:
      return sensitivity / epsilon;
    case AggregationMode::kScoreSum:
      return clip / epsilon;
    case AggregationMode::kNoNoise:
      return 0.0;
  }
  return 0.0;
}

double PrivacyParams::QueryCost() const {
  return mode == AggregationMode::kNoNoise ? BudgetLedger::kUnlimited : epsilon;
}

double SampleLaplace(double b, Rng& rng) {
  PRICURE_ENFORCE(PositiveFinite(b), ErrorCode::kContract, "Laplace scale must be positive");
  double u;
  do {
    u = rng.UniformUnit() - 0.5;
  } while (u == -0.5);
  const double mag = -b * std::log1p(-2.0 * std::fabs(u));
  return u < 0 ? -mag : mag;
}

std::vector<double> VoteHistogram(const std::vector<std::vector<double>>& scores) {
  CheckScores(scores);
  std::vector<double> votes(scores[0].size(), 0.0);
  for (const auto& s : scores) votes[ArgMaxLowest(s)] += 1.0;
  return votes;
}

std::vector<double> ClippedScoreSum(const std::vector<std::vector<double>>& scores,
                                    double clip) {
  CheckScores(scores);
  std::vector<double> sum(scores[0].size(), 0.0);
  for (const auto& s : scores) {
    for (size_t c = 0; c < s.size(); ++c) sum[c] += std::clamp(s[c], 0.0, clip);
  }
  return sum;
}

NoisyAggregate Aggregate(const std::vector<std::vector<double>>& scores,
                         const PrivacyParams& params, Rng& rng) {
  params.Validate();
  return NoisyRelease(params.mode == AggregationMode::kScoreSum
                          ? ClippedScoreSum(scores, params.clip)
                          : VoteHistogram(scores),
                      params, rng);
}

NoisyAggregate NoisyRelease(std::vector<double> aggregate, const PrivacyParams& params,
                            Rng& rng) {
  params.Validate();
  PRICURE_ENFORCE(!aggregate.empty(), ErrorCode::kContract, "nothing to release");
  NoisyAggregate out;
  out.aggregate = std::move(aggregate);
  out.noised = out.aggregate;
  if (params.mode != AggregationMode::kNoNoise) {
    const double b = params.NoiseScale();
    for (double& v : out.noised) v += SampleLaplace(b, rng);
  }
  out.label = static_cast<uint32_t>(ArgMaxLowest(out.noised));
  return out;
}

BudgetLedger::BudgetLedger(double cap) : cap_(cap) {
  PRICURE_ENFORCE(cap >= 0.0 && !std::isnan(cap), ErrorCode::kContract,
                  "budget cap must be non-negative");
}

double BudgetLedger::spent(const std::string& client) const {
  auto it = accounts_.find(client);
  return it == accounts_.end() ? 0.0 : it->second.spent;
}

uint64_t BudgetLedger::answered(const std::string& client) const {
  auto it = accounts_.find(client);
  return it == accounts_.end() ? 0 : it->second.answered;
}

bool BudgetLedger::WouldAdmit(const std::string& client, double cost) const {
  if (std::isinf(cap_)) return true;
  if (std::isinf(cost)) return false;
  return spent(client) + cost <= cap_ * (1.0 + kCapSlack);
}

void BudgetLedger::Charge(const std::string& client, double cost) {
  PRICURE_ENFORCE(cost >= 0.0, ErrorCode::kContract, "query cost must be non-negative");
  if (!WouldAdmit(client, cost)) {
    Throw(ErrorCode::kBudgetExhausted,
          "privacy budget exhausted for client '" + client + "': spent " +
              std::to_string(spent(client)) + " of " + std::to_string(cap_) + ", query costs " +
              std::to_string(cost));
  }
  Account& a = accounts_[client];
  a.spent += cost;
  ++a.answered;
}

}  // namespace pricure
