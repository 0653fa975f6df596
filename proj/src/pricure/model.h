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

// Feed-forward networks: shapes, parameters, plaintext reference passes in
// floating and fixed point, the pricure-model/1 file format and synthetic
// fixtures.

#ifndef PRICURE_MODEL_H_
#define PRICURE_MODEL_H_

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "pricure/ring.h"

namespace pricure {

// d -> k_1 -> ... -> k_l -> o. Hidden layers use ReLU, the output layer is
// linear.
struct NetworkSpec {
  uint32_t input_dim = 0;
  std::vector<uint32_t> hidden_dims;
  uint32_t output_dim = 0;

  size_t layer_count() const { return hidden_dims.size() + 1; }
  uint32_t LayerInputDim(size_t j) const;
  uint32_t LayerOutputDim(size_t j) const;
  size_t TotalHiddenUnits() const;

  // Throws kContract if any dimension is zero.
  void Validate() const;

  // "784-128-64-10".
  std::string ToString() const;
  // Inverse of ToString(); kParse on malformed text.
  static NetworkSpec Parse(const std::string& text);

  bool operator==(const NetworkSpec&) const = default;
};

// mnist, fmnist: 784-128-64-10. idc: 7500-500-2. mimic: 30-500-4.
// blobs: 8-16-4. Unknown names raise kUsage.
NetworkSpec PresetSpec(const std::string& name);
std::vector<std::string> PresetNames();

// One affine layer, weights row-major (inputs x outputs).
struct DenseLayer {
  uint32_t rows = 0;
  uint32_t cols = 0;
  std::vector<double> weights;
  std::vector<double> bias;

  double w(uint32_t r, uint32_t c) const { return weights[size_t{r} * cols + c]; }
  bool operator==(const DenseLayer&) const = default;
};

struct ModelParameters {
  NetworkSpec spec;
  std::vector<DenseLayer> layers;

  // Shapes agree with spec and every value is finite (kContract otherwise).
  void Validate() const;
  bool operator==(const ModelParameters&) const = default;
};

std::vector<double> ForwardFloat(const ModelParameters& params, std::span<const double> x);

// Parameters lifted into the ring: weights encode(W), biases encode(b).
struct EncodedModel {
  NetworkSpec spec;
  std::vector<RingTensor> weights;
  std::vector<RingTensor> biases;
};

EncodedModel EncodeModel(const ModelParameters& params, const FixedPointCodec& codec);

// Per layer: z = h . W + f * b at scale f^2, then floor(lift(z) / f), then
// ReLU on hidden layers. The shared protocol follows the same schedule and
// reproduces this output exactly.
//
// Raises kRange if some |lift(z)| exceeds codec.TruncationBound(), or if a
// hidden activation is too large for the blinded sign test.
RingTensor ForwardFixed(const EncodedModel& model, const RingTensor& x,
                        const FixedPointCodec& codec);
RingTensor ForwardFixed(const ModelParameters& params, std::span<const double> x,
                        const FixedPointCodec& codec);

// Largest |lift(h)| a hidden activation may have so that the blinded value
// r * h stays inside the centered range for every admissible blind r.
uint64_t ReluInputBound(const FixedPointCodec& codec);

// Weights uniform on the 0.01 grid of [-0.5, 0.5], biases on that of
// [-0.1, 0.1].
ModelParameters GenerateFixture(const NetworkSpec& spec, uint64_t seed);

struct ModelFile {
  uint32_t owner = 0;
  std::string note;
  ModelParameters params;
};

// pricure-model/1 text format. Values are written as decimals with exactly
// two fractional digits (truncated toward zero), so save then load is exact
// for parameters on that grid.
void WriteModel(const ModelFile& model, std::ostream& out);
ModelFile ReadModel(std::istream& in);
void SaveModel(const ModelFile& model, const std::string& path);
ModelFile LoadModel(const std::string& path);

// Parses "-0.45" style decimals into hundredths exactly; kParse otherwise.
int64_t ParseHundredths(const std::string& text);
std::string FormatHundredths(int64_t hundredths);

struct SyntheticDataset {
  uint64_t seed = 0;
  uint32_t classes = 0;
  uint32_t dim = 0;
  double stddev = 1.0;
  std::vector<std::vector<double>> means;
  std::vector<std::vector<double>> features;
  std::vector<uint32_t> labels;

  size_t size() const { return labels.size(); }
};

inline constexpr double kBlobSeparation = 4.0;

// Isotropic Gaussian blobs, class c centred at kBlobSeparation * e_c.
// Samples are rounded to the 0.01 grid and interleaved by class.
SyntheticDataset MakeBlobs(uint32_t n_per_class, uint32_t classes, uint32_t dim,
                           uint64_t seed);

// Per-class sample means.
std::vector<std::vector<double>> FitClassMeans(const SyntheticDataset& data);

// d-2d-k network whose hidden layer computes (relu(x), relu(-x)) and whose
// output scores are mu_c . x - |mu_c|^2 / 2, so argmax is the nearest mean.
// Means are truncated to the 0.01 grid.
ModelParameters NearestMeanModel(const std::vector<std::vector<double>>& means);

// Index of the largest value, lowest index on ties.
size_t ArgMax(std::span<const double> v);
size_t ArgMaxLifted(const RingTensor& v);

// CSV with header "label,x0,...,x{d-1}".
void WriteDatasetCsv(const SyntheticDataset& data, std::ostream& out);
SyntheticDataset ReadDatasetCsv(std::istream& in);

}  // namespace pricure

#endif  // PRICURE_MODEL_H_
