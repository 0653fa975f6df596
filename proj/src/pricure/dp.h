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

// Ensemble aggregation with the Laplace mechanism and per-client budget
// accounting.

#ifndef PRICURE_DP_H_
#define PRICURE_DP_H_

#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "pricure/rng.h"

namespace pricure {

enum class AggregationMode : uint8_t {
  // Per-model argmax votes, Lap(s/eps) per class.
  kVoteHistogram = 0,
  // Per-model scores clipped to [0, C] and summed, Lap(C/eps) per class.
  kScoreSum = 1,
  // Vote histogram released without noise. Not differentially private.
  kNoNoise = 2,
};

// "vote", "score", "none".
const char* AggregationModeName(AggregationMode mode);
AggregationMode ParseAggregationMode(const std::string& name);

struct PrivacyParams {
  AggregationMode mode = AggregationMode::kVoteHistogram;
  double epsilon = 0.05;
  double sensitivity = 1.0;
  // Score clip bound; also the sensitivity in kScoreSum mode.
  double clip = 1.0;

  // kContract unless every parameter is positive and finite.
  void Validate() const;
  // Laplace scale b = s / epsilon (zero in kNoNoise).
  double NoiseScale() const;
  // Budget charged per answered query: epsilon, or infinity in kNoNoise.
  double QueryCost() const;
};

// Inverse-CDF draw: u ~ U(-1/2, 1/2), -b * sgn(u) * ln(1 - 2|u|).
double SampleLaplace(double b, Rng& rng);

struct NoisyAggregate {
  std::vector<double> aggregate;  // before noise
  std::vector<double> noised;
  uint32_t label = 0;
};

std::vector<double> VoteHistogram(const std::vector<std::vector<double>>& scores);
std::vector<double> ClippedScoreSum(const std::vector<std::vector<double>>& scores,
                                    double clip);

// scores[i] is model i's decoded output vector. Throws kContract if there
// are no models or the vectors differ in length.
NoisyAggregate Aggregate(const std::vector<std::vector<double>>& scores,
                         const PrivacyParams& params, Rng& rng);

// Noise and argmax over an already aggregated per-class vector.
NoisyAggregate NoisyRelease(std::vector<double> aggregate, const PrivacyParams& params,
                            Rng& rng);

// Linear composition of per-query epsilon, per client.
class BudgetLedger {
 public:
  static constexpr double kUnlimited = std::numeric_limits<double>::infinity();

  explicit BudgetLedger(double cap = kUnlimited);

  double cap() const { return cap_; }
  double spent(const std::string& client) const;
  uint64_t answered(const std::string& client) const;

  // Charges `cost` to the client or throws kBudgetExhausted, leaving the
  // ledger unchanged. An infinite cost is admitted only when the cap is
  // unlimited.
  void Charge(const std::string& client, double cost);
  bool WouldAdmit(const std::string& client, double cost) const;

 private:
  struct Account {
    double spent = 0.0;
    uint64_t answered = 0;
  };
  double cap_;
  std::map<std::string, Account> accounts_;
};

}  // namespace pricure

#endif  // PRICURE_DP_H_
