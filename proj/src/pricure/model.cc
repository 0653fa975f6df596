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

#include "pricure/model.h"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "pricure/errors.h"
#include "pricure/rng.h"
#include "pricure/sharing.h"

namespace pricure {

namespace {

constexpr char kModelFormat[] = "pricure-model/1";

std::vector<std::string> SplitWords(const std::string& line) {
  std::vector<std::string> words;
  std::istringstream in(line);
  std::string w;
  while (in >> w) words.push_back(w);
  return words;
}

uint32_t ParseDim(const std::string& text, const std::string& what) {
  uint32_t v = 0;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  PRICURE_ENFORCE(ec == std::errc() && ptr == end && !text.empty(), ErrorCode::kParse,
                  "bad " + what + " '" + text + "'");
  return v;
}

// Line-numbered parse errors for ReadModel / ReadDatasetCsv.
class LineReader {
 public:
  explicit LineReader(std::istream& in) : in_(in) {}

  bool Next(std::string& line) {
    while (std::getline(in_, line)) {
      ++number_;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line[0] == '#') continue;
      return true;
    }
    return false;
  }
  std::string NextRequired(const std::string& expecting) {
    std::string line;
    if (!Next(line)) Fail("unexpected end of file, expected " + expecting);
    return line;
  }
  [[noreturn]] void Fail(const std::string& msg) const {
    Throw(ErrorCode::kParse, "line " + std::to_string(number_) + ": " + msg);
  }
  int number() const { return number_; }

 private:
  std::istream& in_;
  int number_ = 0;
};

void WriteRow(std::ostream& out, const char* tag, const double* values, size_t n) {
  out << tag;
  const FixedPointCodec hundredths;
  for (size_t i = 0; i < n; ++i) out << ' ' << FormatHundredths(hundredths.ToScaled(values[i]));
  out << '\n';
}

void ReadRow(LineReader& reader, const std::string& line, const char* tag, uint32_t n,
             double* out) {
  const std::vector<std::string> words = SplitWords(line);
  if (words.empty() || words[0] != tag) {
    reader.Fail(std::string("expected '") + tag + "' row");
  }
  if (words.size() != size_t{n} + 1) {
    reader.Fail(std::string("'") + tag + "' row has " + std::to_string(words.size() - 1) +
                " values, expected " + std::to_string(n));
  }
  for (uint32_t i = 0; i < n; ++i) {
    try {
      out[i] = static_cast<double>(ParseHundredths(words[i + 1])) / 100.0;
    } catch (const Error& e) {
      reader.Fail(std::string("value ") + std::to_string(i + 1) + ": " + e.what());
    }
  }
}

}  // namespace

uint32_t NetworkSpec::LayerInputDim(size_t j) const {
  return j == 0 ? input_dim : hidden_dims.at(j - 1);
}

uint32_t NetworkSpec::LayerOutputDim(size_t j) const {
  return j == hidden_dims.size() ? output_dim : hidden_dims.at(j);
}

size_t NetworkSpec::TotalHiddenUnits() const {
  size_t n = 0;
  for (uint32_t k : hidden_dims) n += k;
  return n;
}

void NetworkSpec::Validate() const {
  PRICURE_ENFORCE(input_dim >= 1 && output_dim >= 1, ErrorCode::kContract,
                  "network dimensions must be positive: " + ToString());
  for (uint32_t k : hidden_dims) {
    PRICURE_ENFORCE(k >= 1, ErrorCode::kContract,
                    "network dimensions must be positive: " + ToString());
  }
}

std::string NetworkSpec::ToString() const {
  std::string s = std::to_string(input_dim);
  for (uint32_t k : hidden_dims) s += "-" + std::to_string(k);
  return s + "-" + std::to_string(output_dim);
}

NetworkSpec NetworkSpec::Parse(const std::string& text) {
  std::vector<uint32_t> dims;
  size_t start = 0;
  while (true) {
    const size_t dash = text.find('-', start);
    dims.push_back(ParseDim(text.substr(start, dash - start), "network dimension"));
    if (dash == std::string::npos) break;
    start = dash + 1;
  }
  PRICURE_ENFORCE(dims.size() >= 2, ErrorCode::kParse,
                  "network spec '" + text + "' needs at least input and output sizes");
  NetworkSpec spec;
  spec.input_dim = dims.front();
  spec.output_dim = dims.back();
  spec.hidden_dims.assign(dims.begin() + 1, dims.end() - 1);
  try {
    spec.Validate();
  } catch (const Error& e) {
    Throw(ErrorCode::kParse, e.what());
  }
  return spec;
}

NetworkSpec PresetSpec(const std::string& name) {
  if (name == "mnist" || name == "fmnist") return NetworkSpec{784, {128, 64}, 10};
  if (name == "idc") return NetworkSpec{7500, {500}, 2};
  if (name == "mimic") return NetworkSpec{30, {500}, 4};
  if (name == "blobs") return NetworkSpec{8, {16}, 4};
  Throw(ErrorCode::kUsage, "unknown network preset '" + name + "'");
}

std::vector<std::string> PresetNames() { return {"mnist", "fmnist", "idc", "mimic", "blobs"}; }

void ModelParameters::Validate() const {
  spec.Validate();
  PRICURE_ENFORCE(layers.size() == spec.layer_count(), ErrorCode::kContract,
                  "model has " + std::to_string(layers.size()) + " layers, spec " +
                      spec.ToString() + " needs " + std::to_string(spec.layer_count()));
  for (size_t j = 0; j < layers.size(); ++j) {
    const DenseLayer& layer = layers[j];
    const std::string where = "layer " + std::to_string(j + 1);
    PRICURE_ENFORCE(layer.rows == spec.LayerInputDim(j) && layer.cols == spec.LayerOutputDim(j),
                    ErrorCode::kContract,
                    where + " is " + std::to_string(layer.rows) + "x" +
                        std::to_string(layer.cols) + ", spec " + spec.ToString() + " needs " +
                        std::to_string(spec.LayerInputDim(j)) + "x" +
                        std::to_string(spec.LayerOutputDim(j)));
    PRICURE_ENFORCE(layer.weights.size() == size_t{layer.rows} * layer.cols &&
                        layer.bias.size() == layer.cols,
                    ErrorCode::kContract, where + " storage does not match its shape");
    for (double v : layer.weights) {
      PRICURE_ENFORCE(std::isfinite(v), ErrorCode::kContract, where + " has a non-finite weight");
    }
    for (double v : layer.bias) {
      PRICURE_ENFORCE(std::isfinite(v), ErrorCode::kContract, where + " has a non-finite bias");
    }
  }
}

std::vector<double> ForwardFloat(const ModelParameters& params, std::span<const double> x) {
  PRICURE_ENFORCE(x.size() == params.spec.input_dim, ErrorCode::kContract,
                  "input has " + std::to_string(x.size()) + " features, model expects " +
                      std::to_string(params.spec.input_dim));
  std::vector<double> h(x.begin(), x.end());
  for (size_t j = 0; j < params.layers.size(); ++j) {
    const DenseLayer& layer = params.layers[j];
    std::vector<double> z(layer.bias);
    for (uint32_t r = 0; r < layer.rows; ++r) {
      const double hr = h[r];
      if (hr == 0.0) continue;
      const double* row = &layer.weights[size_t{r} * layer.cols];
      for (uint32_t c = 0; c < layer.cols; ++c) z[c] += hr * row[c];
    }
    if (j + 1 < params.layers.size()) {
      for (double& v : z) v = v > 0.0 ? v : 0.0;
    }
    h = std::move(z);
  }
  return h;
}

EncodedModel EncodeModel(const ModelParameters& params, const FixedPointCodec& codec) {
  params.Validate();
  EncodedModel out;
  out.spec = params.spec;
  for (const DenseLayer& layer : params.layers) {
    RingTensor w(codec.modulus(), {layer.rows, layer.cols});
    for (size_t i = 0; i < layer.weights.size(); ++i) w[i] = codec.EncodeRaw(layer.weights[i]);
    out.weights.push_back(std::move(w));
    out.biases.push_back(codec.EncodeVector(layer.bias));
  }
  return out;
}

uint64_t ReluInputBound(const FixedPointCodec& codec) {
  return codec.modulus().half() / (kReluBlindMax * codec.scale());
}

RingTensor ForwardFixed(const EncodedModel& model, const RingTensor& x,
                        const FixedPointCodec& codec) {
  const RingModulus& q = codec.modulus();
  PRICURE_ENFORCE(x.size() == model.spec.input_dim, ErrorCode::kContract,
                  "input has " + std::to_string(x.size()) + " features, model expects " +
                      std::to_string(model.spec.input_dim));
  const auto trunc_bound = static_cast<int64_t>(codec.TruncationBound());
  const auto relu_bound = static_cast<int64_t>(ReluInputBound(codec));
  const int64_t f = codec.scale();
  RingTensor h = x.Reshaped({static_cast<uint32_t>(x.size())});
  for (size_t j = 0; j < model.weights.size(); ++j) {
    const RingTensor z =
        Add(MatMul(h, model.weights[j]), MulScalar(model.biases[j], q.Reduce64(codec.scale())));
    const bool hidden = j + 1 < model.weights.size();
    RingTensor next(q, z.dims());
    for (size_t i = 0; i < z.size(); ++i) {
      const int64_t lz = q.Lift(z[i]);
      PRICURE_ENFORCE(lz <= trunc_bound && lz >= -trunc_bound, ErrorCode::kRange,
                      "layer " + std::to_string(j + 1) + " pre-activation " +
                          std::to_string(lz) + " exceeds the truncation bound " +
                          std::to_string(trunc_bound));
      int64_t t = FloorDiv(lz, f);
      if (hidden) {
        PRICURE_ENFORCE(t <= relu_bound && t >= -relu_bound, ErrorCode::kRange,
                        "layer " + std::to_string(j + 1) + " activation " + std::to_string(t) +
                            " too large for the blinded sign test");
        t = t > 0 ? t : 0;
      }
      next[i] = q.FromSigned(t);
    }
    h = std::move(next);
  }
  return h;
}

RingTensor ForwardFixed(const ModelParameters& params, std::span<const double> x,
                        const FixedPointCodec& codec) {
  PRICURE_ENFORCE(x.size() == params.spec.input_dim, ErrorCode::kContract,
                  "input has " + std::to_string(x.size()) + " features, model expects " +
                      std::to_string(params.spec.input_dim));
  return ForwardFixed(EncodeModel(params, codec), codec.EncodeVector(x), codec);
}

ModelParameters GenerateFixture(const NetworkSpec& spec, uint64_t seed) {
  spec.Validate();
  Rng rng = Rng::Substream(seed, "fixture/" + spec.ToString());
  ModelParameters params;
  params.spec = spec;
  for (size_t j = 0; j < spec.layer_count(); ++j) {
    DenseLayer layer;
    layer.rows = spec.LayerInputDim(j);
    layer.cols = spec.LayerOutputDim(j);
    layer.weights.resize(size_t{layer.rows} * layer.cols);
    for (double& w : layer.weights) w = static_cast<double>(rng.UniformInt(-50, 50)) / 100.0;
    layer.bias.resize(layer.cols);
    for (double& b : layer.bias) b = static_cast<double>(rng.UniformInt(-10, 10)) / 100.0;
    params.layers.push_back(std::move(layer));
  }
  return params;
}

int64_t ParseHundredths(const std::string& text) {
  size_t i = 0;
  bool negative = false;
  if (i < text.size() && (text[i] == '-' || text[i] == '+')) negative = text[i++] == '-';
  const size_t int_start = i;
  while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) ++i;
  const size_t int_len = i - int_start;
  int64_t frac = 0;
  size_t frac_len = 0;
  if (i < text.size() && text[i] == '.') {
    ++i;
    while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) {
      if (frac_len < 2) frac = frac * 10 + (text[i] - '0');
      PRICURE_ENFORCE(frac_len < 2 || text[i] == '0', ErrorCode::kParse,
                      "'" + text + "' has more than two significant fractional digits");
      ++frac_len;
      ++i;
    }
  }
  PRICURE_ENFORCE(i == text.size() && (int_len > 0 || frac_len > 0) && int_len <= 16,
                  ErrorCode::kParse, "'" + text + "' is not a decimal number");
  if (frac_len == 1) frac *= 10;
  int64_t whole = 0;
  for (size_t k = int_start; k < int_start + int_len; ++k) whole = whole * 10 + (text[k] - '0');
  const int64_t v = whole * 100 + frac;
  return negative ? -v : v;
}

std::string FormatHundredths(int64_t hundredths) {
  const uint64_t mag = hundredths < 0 ? 0 - static_cast<uint64_t>(hundredths)
                                      : static_cast<uint64_t>(hundredths);
  const uint64_t frac = mag % 100;
  std::string s = hundredths < 0 ? "-" : "";
  s += std::to_string(mag / 100);
  s += '.';
  s += static_cast<char>('0' + frac / 10);
  s += static_cast<char>('0' + frac % 10);
  return s;
}

void WriteModel(const ModelFile& model, std::ostream& out) {
  model.params.Validate();
  PRICURE_ENFORCE(model.note.find('\n') == std::string::npos, ErrorCode::kContract,
                  "model note must be a single line");
  out << "format " << kModelFormat << '\n';
  out << "owner " << model.owner << '\n';
  out << "note " << model.note << '\n';
  out << "spec " << model.params.spec.ToString() << '\n';
  for (size_t j = 0; j < model.params.layers.size(); ++j) {
    const DenseLayer& layer = model.params.layers[j];
    out << "layer " << j + 1 << ' ' << layer.rows << ' ' << layer.cols << '\n';
    for (uint32_t r = 0; r < layer.rows; ++r) {
      WriteRow(out, "w", &layer.weights[size_t{r} * layer.cols], layer.cols);
    }
    WriteRow(out, "b", layer.bias.data(), layer.cols);
  }
  out << "end\n";
}

ModelFile ReadModel(std::istream& in) {
  LineReader reader(in);
  auto expect_key = [&](const std::string& key) {
    const std::string line = reader.NextRequired("'" + key + "'");
    if (line.compare(0, key.size() + 1, key + " ") != 0 && line != key) {
      reader.Fail("expected '" + key + "'");
    }
    return line.size() > key.size() ? line.substr(key.size() + 1) : std::string();
  };

  if (expect_key("format") != kModelFormat) {
    reader.Fail(std::string("unsupported format, expected ") + kModelFormat);
  }
  ModelFile model;
  try {
    model.owner = ParseDim(expect_key("owner"), "owner id");
  } catch (const Error& e) {
    reader.Fail(e.what());
  }
  model.note = expect_key("note");
  try {
    model.params.spec = NetworkSpec::Parse(expect_key("spec"));
  } catch (const Error& e) {
    reader.Fail(e.what());
  }
  const NetworkSpec& spec = model.params.spec;
  for (size_t j = 0; j < spec.layer_count(); ++j) {
    const std::vector<std::string> words = SplitWords(expect_key("layer"));
    DenseLayer layer;
    try {
      if (words.size() != 3) Throw(ErrorCode::kParse, "layer header needs index rows cols");
      const uint32_t index = ParseDim(words[0], "layer index");
      layer.rows = ParseDim(words[1], "row count");
      layer.cols = ParseDim(words[2], "column count");
      if (index != j + 1) Throw(ErrorCode::kParse, "expected layer " + std::to_string(j + 1));
    } catch (const Error& e) {
      reader.Fail(e.what());
    }
    if (layer.rows != spec.LayerInputDim(j) || layer.cols != spec.LayerOutputDim(j)) {
      reader.Fail("layer " + std::to_string(j + 1) + " shape " + std::to_string(layer.rows) +
                  "x" + std::to_string(layer.cols) + " does not match spec " + spec.ToString());
    }
    layer.weights.resize(size_t{layer.rows} * layer.cols);
    for (uint32_t r = 0; r < layer.rows; ++r) {
      ReadRow(reader, reader.NextRequired("'w' row"), "w", layer.cols,
              &layer.weights[size_t{r} * layer.cols]);
    }
    layer.bias.resize(layer.cols);
    ReadRow(reader, reader.NextRequired("'b' row"), "b", layer.cols, layer.bias.data());
    model.params.layers.push_back(std::move(layer));
  }
  if (reader.NextRequired("'end'") != "end") reader.Fail("expected 'end'");
  std::string extra;
  if (reader.Next(extra)) reader.Fail("trailing content after 'end'");
  return model;
}

void SaveModel(const ModelFile& model, const std::string& path) {
  std::ofstream out(path);
  PRICURE_ENFORCE(out.good(), ErrorCode::kIo, "cannot write " + path);
  WriteModel(model, out);
  out.flush();
  PRICURE_ENFORCE(out.good(), ErrorCode::kIo, "error writing " + path);
}

ModelFile LoadModel(const std::string& path) {
  std::ifstream in(path);
  PRICURE_ENFORCE(in.good(), ErrorCode::kIo, "cannot read " + path);
  try {
    return ReadModel(in);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kParse) throw;
    Throw(ErrorCode::kParse, path + ": " + e.what());
  }
}

SyntheticDataset MakeBlobs(uint32_t n_per_class, uint32_t classes, uint32_t dim,
                           uint64_t seed) {
  PRICURE_ENFORCE(classes >= 2, ErrorCode::kContract, "blobs need at least two classes");
  PRICURE_ENFORCE(dim >= classes, ErrorCode::kContract,
                  "blobs need dim >= classes so class means are orthogonal");
  SyntheticDataset data;
  data.seed = seed;
  data.classes = classes;
  data.dim = dim;
  data.means.assign(classes, std::vector<double>(dim, 0.0));
  for (uint32_t c = 0; c < classes; ++c) data.means[c][c] = kBlobSeparation;
  Rng rng = Rng::Substream(seed, "blobs");
  for (uint32_t i = 0; i < n_per_class; ++i) {
    for (uint32_t c = 0; c < classes; ++c) {
      std::vector<double> x(dim);
      for (uint32_t k = 0; k < dim; ++k) {
        const double v = data.means[c][k] + data.stddev * rng.Normal();
        x[k] = std::round(v * 100.0) / 100.0;
      }
      data.features.push_back(std::move(x));
      data.labels.push_back(c);
    }
  }
  return data;
}

std::vector<std::vector<double>> FitClassMeans(const SyntheticDataset& data) {
  std::vector<std::vector<double>> means(data.classes, std::vector<double>(data.dim, 0.0));
  std::vector<size_t> counts(data.classes, 0);
  for (size_t i = 0; i < data.size(); ++i) {
    const uint32_t c = data.labels[i];
    ++counts[c];
    for (uint32_t k = 0; k < data.dim; ++k) means[c][k] += data.features[i][k];
  }
  for (uint32_t c = 0; c < data.classes; ++c) {
    PRICURE_ENFORCE(counts[c] > 0, ErrorCode::kContract,
                    "class " + std::to_string(c) + " has no samples");
    for (double& v : means[c]) v /= static_cast<double>(counts[c]);
  }
  return means;
}

ModelParameters NearestMeanModel(const std::vector<std::vector<double>>& means) {
  PRICURE_ENFORCE(means.size() >= 2, ErrorCode::kContract, "need at least two class means");
  const auto k = static_cast<uint32_t>(means.size());
  const auto d = static_cast<uint32_t>(means[0].size());
  const FixedPointCodec hundredths;
  auto grid = [&](double v) { return static_cast<double>(hundredths.ToScaled(v)) / 100.0; };

  ModelParameters params;
  params.spec = NetworkSpec{d, {2 * d}, k};
  DenseLayer split{d, 2 * d, std::vector<double>(size_t{d} * 2 * d, 0.0),
                   std::vector<double>(2 * d, 0.0)};
  for (uint32_t i = 0; i < d; ++i) {
    split.weights[size_t{i} * 2 * d + i] = 1.0;
    split.weights[size_t{i} * 2 * d + d + i] = -1.0;
  }
  DenseLayer readout{2 * d, k, std::vector<double>(size_t{2} * d * k, 0.0),
                     std::vector<double>(k, 0.0)};
  for (uint32_t c = 0; c < k; ++c) {
    PRICURE_ENFORCE(means[c].size() == d, ErrorCode::kContract, "class means differ in length");
    double norm2 = 0.0;
    for (uint32_t i = 0; i < d; ++i) {
      const double mu = grid(means[c][i]);
      readout.weights[size_t{i} * k + c] = mu;
      readout.weights[size_t{d + i} * k + c] = -mu;
      norm2 += mu * mu;
    }
    readout.bias[c] = grid(-norm2 / 2.0);
  }
  params.layers.push_back(std::move(split));
  params.layers.push_back(std::move(readout));
  return params;
}

size_t ArgMax(std::span<const double> v) {
  size_t best = 0;
  for (size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

size_t ArgMaxLifted(const RingTensor& v) {
  size_t best = 0;
  const RingModulus& q = v.modulus();
  for (size_t i = 1; i < v.size(); ++i) {
    if (q.Lift(v[i]) > q.Lift(v[best])) best = i;
  }
  return best;
}

void WriteDatasetCsv(const SyntheticDataset& data, std::ostream& out) {
  out << "label";
  for (uint32_t k = 0; k < data.dim; ++k) out << ",x" << k;
  out << '\n';
  for (size_t i = 0; i < data.size(); ++i) {
    out << data.labels[i];
    for (double v : data.features[i]) out << ',' << FormatHundredths(std::llround(v * 100.0));
    out << '\n';
  }
}

SyntheticDataset ReadDatasetCsv(std::istream& in) {
  LineReader reader(in);
  const std::string header = reader.NextRequired("CSV header");
  std::vector<std::string> cols;
  std::stringstream hs(header);
  for (std::string c; std::getline(hs, c, ',');) cols.push_back(c);
  if (cols.size() < 2 || cols[0] != "label") reader.Fail("header must start with 'label'");
  SyntheticDataset data;
  data.dim = static_cast<uint32_t>(cols.size() - 1);
  std::string line;
  while (reader.Next(line)) {
    std::stringstream ls(line);
    std::vector<std::string> fields;
    for (std::string c; std::getline(ls, c, ',');) fields.push_back(c);
    if (fields.size() != cols.size()) {
      reader.Fail("row has " + std::to_string(fields.size()) + " fields, expected " +
                  std::to_string(cols.size()));
    }
    std::vector<double> x(data.dim);
    uint32_t label = 0;
    try {
      label = ParseDim(fields[0], "label");
      for (uint32_t k = 0; k < data.dim; ++k) {
        x[k] = static_cast<double>(ParseHundredths(fields[k + 1])) / 100.0;
      }
    } catch (const Error& e) {
      reader.Fail(e.what());
    }
    data.classes = std::max(data.classes, label + 1);
    data.features.push_back(std::move(x));
    data.labels.push_back(label);
  }
  return data;
}

}  // namespace pricure
