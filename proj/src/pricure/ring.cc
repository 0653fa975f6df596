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

#include "pricure/ring.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "pricure/errors.h"

namespace pricure {
namespace {

constexpr uint64_t kMersenne61 = (uint64_t{1} << 61) - 1;

uint64_t MulModSlow(uint64_t a, uint64_t b, uint64_t m) {
  return static_cast<uint64_t>(static_cast<u128>(a) * b % m);
}

uint64_t PowMod(uint64_t base, uint64_t exp, uint64_t m) {
  uint64_t result = 1 % m;
  base %= m;
  while (exp > 0) {
    if (exp & 1) result = MulModSlow(result, base, m);
    base = MulModSlow(base, base, m);
    exp >>= 1;
  }
  return result;
}

void CheckSameModulus(const RingModulus& a, const RingModulus& b) {
  PRICURE_ENFORCE(a == b, ErrorCode::kContract,
                  "ring modulus mismatch: " + std::to_string(a.value()) + " vs " +
                      std::to_string(b.value()));
}

void CheckSameShape(const RingTensor& a, const RingTensor& b, const char* op) {
  CheckSameModulus(a.modulus(), b.modulus());
  PRICURE_ENFORCE(a.SameShape(b), ErrorCode::kContract,
                  std::string(op) + ": shape mismatch " + ShapeString(a.dims()) +
                      " vs " + ShapeString(b.dims()));
}

size_t ElementCount(const std::vector<uint32_t>& dims) {
  size_t n = 1;
  for (uint32_t d : dims) n *= d;
  return n;
}

}  // namespace

bool IsPrime64(uint64_t n) {
  if (n < 2) return false;
  for (uint64_t p : {2ULL, 3ULL, 5ULL, 7ULL, 11ULL, 13ULL, 17ULL, 19ULL, 23ULL, 29ULL, 31ULL, 37ULL}) {
    if (n % p == 0) return n == p;
  }
  uint64_t d = n - 1;
  int s = 0;
  while ((d & 1) == 0) {
    d >>= 1;
    ++s;
  }
  // Deterministic witness set for all 64-bit integers.
  for (uint64_t a : {2ULL, 325ULL, 9375ULL, 28178ULL, 450775ULL, 9780504ULL, 1795265022ULL}) {
    uint64_t x = PowMod(a % n, d, n);
    if (a % n == 0 || x == 1 || x == n - 1) continue;
    bool composite = true;
    for (int r = 1; r < s; ++r) {
      x = MulModSlow(x, x, n);
      if (x == n - 1) {
        composite = false;
        break;
      }
    }
    if (composite) return false;
  }
  return true;
}

RingModulus::RingModulus(uint64_t q) : q_(q) {
  PRICURE_ENFORCE(q == kDefault || (q >= 3 && IsPrime64(q)), ErrorCode::kContract,
                  "ring modulus must be an odd prime, got " + std::to_string(q));
  half_ = (q - 1) / 2;
  mersenne61_ = q == kMersenne61;
  const u128 max_product = static_cast<u128>(q - 1) * (q - 1);
  const u128 capacity = ~u128{0} / max_product;
  // One slot is kept for the reduced carry-in of the previous chunk.
  chunk_ = static_cast<size_t>(std::min<u128>(capacity, u128{1} << 20));
  chunk_ = chunk_ > 1 ? chunk_ - 1 : 1;
}

uint64_t RingModulus::Reduce(u128 x) const {
  if (mersenne61_) {
    x = (x & kMersenne61) + (x >> 61);
    x = (x & kMersenne61) + (x >> 61);
    uint64_t r = static_cast<uint64_t>(x);
    return r >= kMersenne61 ? r - kMersenne61 : r;
  }
  return static_cast<uint64_t>(x % q_);
}

uint64_t RingModulus::FromSigned(int64_t x) const {
  if (x >= 0) return Reduce64(static_cast<uint64_t>(x));
  // -(x) computed in unsigned to cover INT64_MIN.
  const uint64_t mag = Reduce64(0 - static_cast<uint64_t>(x));
  return Neg(mag);
}

RingElement::RingElement(const RingModulus& modulus, uint64_t value)
    : modulus_(modulus), value_(value) {
  PRICURE_ENFORCE(value < modulus.value(), ErrorCode::kContract,
                  "ring element " + std::to_string(value) + " not below modulus");
}

RingElement Add(const RingElement& a, const RingElement& b) {
  CheckSameModulus(a.modulus(), b.modulus());
  return RingElement(a.modulus(), a.modulus().Add(a.value(), b.value()));
}

RingElement Mul(const RingElement& a, const RingElement& b) {
  CheckSameModulus(a.modulus(), b.modulus());
  return RingElement(a.modulus(), a.modulus().Mul(a.value(), b.value()));
}

int64_t CenteredLift(const RingElement& a) { return a.modulus().Lift(a.value()); }

RingTensor::RingTensor(const RingModulus& modulus, std::vector<uint32_t> dims)
    : modulus_(modulus), dims_(std::move(dims)), data_(ElementCount(dims_), 0) {}

RingTensor::RingTensor(const RingModulus& modulus, std::vector<uint32_t> dims,
                       std::vector<uint64_t> data)
    : modulus_(modulus), dims_(std::move(dims)), data_(std::move(data)) {
  PRICURE_ENFORCE(data_.size() == ElementCount(dims_), ErrorCode::kContract,
                  "tensor data size does not match shape " + ShapeString(dims_));
  for (uint64_t v : data_) {
    PRICURE_ENFORCE(v < modulus_.value(), ErrorCode::kContract,
                    "tensor element not reduced mod q");
  }
}

RingTensor RingTensor::Vector(const RingModulus& modulus, std::vector<uint64_t> data) {
  const auto n = static_cast<uint32_t>(data.size());
  return RingTensor(modulus, {n}, std::move(data));
}

RingTensor RingTensor::Matrix(const RingModulus& modulus, uint32_t rows, uint32_t cols,
                              std::vector<uint64_t> data) {
  return RingTensor(modulus, {rows, cols}, std::move(data));
}

uint32_t RingTensor::rows() const {
  if (dims_.empty()) return 1;
  return dims_.size() == 1 ? 1 : dims_[0];
}

uint32_t RingTensor::cols() const {
  if (dims_.empty()) return 1;
  return dims_.size() == 1 ? dims_[0] : dims_[1];
}

RingTensor RingTensor::Reshaped(std::vector<uint32_t> dims) const {
  PRICURE_ENFORCE(ElementCount(dims) == data_.size(), ErrorCode::kContract,
                  "reshape " + ShapeString(dims_) + " -> " + ShapeString(dims));
  RingTensor out = *this;
  out.dims_ = std::move(dims);
  return out;
}

std::string ShapeString(const std::vector<uint32_t>& dims) {
  std::ostringstream os;
  os << "(";
  for (size_t i = 0; i < dims.size(); ++i) os << (i ? "x" : "") << dims[i];
  os << ")";
  return os.str();
}

RingTensor Add(const RingTensor& a, const RingTensor& b) {
  CheckSameShape(a, b, "add");
  RingTensor out(a.modulus(), a.dims());
  const RingModulus& q = a.modulus();
  for (size_t i = 0; i < a.size(); ++i) out[i] = q.Add(a[i], b[i]);
  return out;
}

RingTensor Sub(const RingTensor& a, const RingTensor& b) {
  CheckSameShape(a, b, "sub");
  RingTensor out(a.modulus(), a.dims());
  const RingModulus& q = a.modulus();
  for (size_t i = 0; i < a.size(); ++i) out[i] = q.Sub(a[i], b[i]);
  return out;
}

RingTensor MulElementwise(const RingTensor& a, const RingTensor& b) {
  CheckSameShape(a, b, "mul");
  RingTensor out(a.modulus(), a.dims());
  const RingModulus& q = a.modulus();
  for (size_t i = 0; i < a.size(); ++i) out[i] = q.Mul(a[i], b[i]);
  return out;
}

RingTensor MulScalar(const RingTensor& a, uint64_t c) {
  const RingModulus& q = a.modulus();
  PRICURE_ENFORCE(c < q.value(), ErrorCode::kContract, "scalar not reduced mod q");
  RingTensor out(q, a.dims());
  for (size_t i = 0; i < a.size(); ++i) out[i] = q.Mul(a[i], c);
  return out;
}

RingTensor MatMul(const RingTensor& a, const RingTensor& b) {
  CheckSameModulus(a.modulus(), b.modulus());
  PRICURE_ENFORCE(a.rank() <= 2 && b.rank() == 2, ErrorCode::kContract,
                  "matmul expects (p x r) . (r x c)");
  const uint32_t p = a.rows(), r = a.cols(), c = b.cols();
  PRICURE_ENFORCE(b.rows() == r, ErrorCode::kContract,
                  "matmul inner dimension mismatch " + ShapeString(a.dims()) + " . " +
                      ShapeString(b.dims()));
  const RingModulus& q = a.modulus();
  const size_t chunk = q.accumulate_chunk();
  std::vector<uint32_t> out_dims =
      a.rank() == 1 ? std::vector<uint32_t>{c} : std::vector<uint32_t>{p, c};
  RingTensor out(q, out_dims);
  std::vector<u128> acc(c);
  const auto bd = b.data();
  const auto ad = a.data();
  for (uint32_t i = 0; i < p; ++i) {
    std::fill(acc.begin(), acc.end(), 0);
    size_t since_reduce = 0;
    for (uint32_t k = 0; k < r; ++k) {
      const uint64_t aik = ad[size_t{i} * r + k];
      if (aik != 0) {
        const uint64_t* brow = bd.data() + size_t{k} * c;
        for (uint32_t j = 0; j < c; ++j) acc[j] += static_cast<u128>(aik) * brow[j];
      }
      if (++since_reduce == chunk) {
        for (uint32_t j = 0; j < c; ++j) acc[j] = q.Reduce(acc[j]);
        since_reduce = 0;
      }
    }
    for (uint32_t j = 0; j < c; ++j) out[size_t{i} * c + j] = q.Reduce(acc[j]);
  }
  return out;
}

FixedPointCodec::FixedPointCodec(const RingModulus& modulus, uint32_t scale)
    : modulus_(modulus), scale_(scale) {
  PRICURE_ENFORCE(scale >= 1, ErrorCode::kContract, "fixed-point scale must be >= 1");
}

int64_t FixedPointCodec::ToScaled(double x) const {
  PRICURE_ENFORCE(std::isfinite(x), ErrorCode::kRange, "cannot encode non-finite value");
  double y = x * static_cast<double>(scale_);
  const double nearest = std::nearbyint(y);
  // Two ulps of the product: absorbs the rounding of x and of x*f.
  const double tolerance = 2.0 * std::numeric_limits<double>::epsilon() * std::fabs(y);
  if (std::fabs(y - nearest) <= tolerance) y = nearest;
  const double limit = static_cast<double>(modulus_.value()) / 2.0;
  PRICURE_ENFORCE(std::fabs(y) < limit, ErrorCode::kRange,
                  "value " + std::to_string(x) + " outside fixed-point range");
  return static_cast<int64_t>(std::trunc(y));
}

uint64_t FixedPointCodec::EncodeScaled(int64_t scaled) const {
  const uint64_t mag = scaled < 0 ? 0 - static_cast<uint64_t>(scaled)
                                  : static_cast<uint64_t>(scaled);
  PRICURE_ENFORCE(mag <= modulus_.half(), ErrorCode::kRange,
                  "scaled value " + std::to_string(scaled) + " outside ring range");
  return modulus_.FromSigned(scaled);
}

uint64_t FixedPointCodec::EncodeRaw(double x) const { return EncodeScaled(ToScaled(x)); }

RingElement FixedPointCodec::Encode(double x) const {
  return RingElement(modulus_, EncodeRaw(x));
}

double FixedPointCodec::DecodeRaw(uint64_t a) const {
  return static_cast<double>(modulus_.Lift(a)) / static_cast<double>(scale_);
}

double FixedPointCodec::Decode(const RingElement& a) const {
  CheckSameModulus(a.modulus(), modulus_);
  return DecodeRaw(a.value());
}

RingTensor FixedPointCodec::EncodeVector(std::span<const double> xs) const {
  std::vector<uint64_t> data;
  data.reserve(xs.size());
  for (double x : xs) data.push_back(EncodeRaw(x));
  return RingTensor::Vector(modulus_, std::move(data));
}

std::vector<double> FixedPointCodec::DecodeVector(const RingTensor& t) const {
  CheckSameModulus(t.modulus(), modulus_);
  std::vector<double> out;
  out.reserve(t.size());
  for (uint64_t v : t.data()) out.push_back(DecodeRaw(v));
  return out;
}

uint64_t FixedPointCodec::TruncationBound() const {
  return modulus_.value() / (4 * static_cast<uint64_t>(scale_));
}

}  // namespace pricure
