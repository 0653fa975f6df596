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

// Arithmetic in Z_q for a prime q < 2^64 and the fixed-point codec that maps
// real-valued model parameters onto it.

#ifndef PRICURE_RING_H_
#define PRICURE_RING_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace pricure {

using u128 = unsigned __int128;

bool IsPrime64(uint64_t n);

class RingModulus {
 public:
  // 2^61 - 1.
  static constexpr uint64_t kDefault = 2305843009213693951ULL;

  // Throws kContract unless q is a prime >= 3.
  explicit RingModulus(uint64_t q = kDefault);

  uint64_t value() const { return q_; }

  uint64_t Reduce(u128 x) const;
  uint64_t Reduce64(uint64_t x) const { return x >= q_ ? x % q_ : x; }
  uint64_t FromSigned(int64_t x) const;

  uint64_t Add(uint64_t a, uint64_t b) const {
    const uint64_t s = a + b;
    // a, b < q < 2^64; the sum may carry out of 64 bits.
    return (s < a || s >= q_) ? s - q_ : s;
  }
  uint64_t Sub(uint64_t a, uint64_t b) const { return a >= b ? a - b : a + (q_ - b); }
  uint64_t Neg(uint64_t a) const { return a == 0 ? 0 : q_ - a; }
  uint64_t Mul(uint64_t a, uint64_t b) const {
    return Reduce(static_cast<u128>(a) * b);
  }

  // Representative in (-q/2, q/2]: a if a <= (q-1)/2 else a - q.
  int64_t Lift(uint64_t a) const {
    return a <= half_ ? static_cast<int64_t>(a)
                      : -static_cast<int64_t>(q_ - a);
  }
  uint64_t half() const { return half_; }

  // Number of (q-1)^2 products that can be summed in a u128 without
  // overflow; matmul reduces once per chunk.
  size_t accumulate_chunk() const { return chunk_; }

  bool operator==(const RingModulus& o) const { return q_ == o.q_; }

 private:
  uint64_t q_;
  uint64_t half_;
  size_t chunk_;
  bool mersenne61_;
};

class RingElement {
 public:
  RingElement(const RingModulus& modulus, uint64_t value);

  uint64_t value() const { return value_; }
  const RingModulus& modulus() const { return modulus_; }

  bool operator==(const RingElement& o) const {
    return modulus_ == o.modulus_ && value_ == o.value_;
  }

 private:
  RingModulus modulus_;
  uint64_t value_;
};

// Throw kContract on modulus mismatch.
RingElement Add(const RingElement& a, const RingElement& b);
RingElement Mul(const RingElement& a, const RingElement& b);
int64_t CenteredLift(const RingElement& a);

// Row-major tensor of ring elements. Rank is 1 or 2 in practice; the wire
// format allows any rank.
class RingTensor {
 public:
  RingTensor() : modulus_(RingModulus::kDefault) {}
  RingTensor(const RingModulus& modulus, std::vector<uint32_t> dims);
  RingTensor(const RingModulus& modulus, std::vector<uint32_t> dims,
             std::vector<uint64_t> data);

  static RingTensor Vector(const RingModulus& modulus, std::vector<uint64_t> data);
  static RingTensor Matrix(const RingModulus& modulus, uint32_t rows, uint32_t cols,
                           std::vector<uint64_t> data);

  const RingModulus& modulus() const { return modulus_; }
  const std::vector<uint32_t>& dims() const { return dims_; }
  size_t rank() const { return dims_.size(); }
  size_t size() const { return data_.size(); }
  // Rank-1 tensors act as 1 x n rows.
  uint32_t rows() const;
  uint32_t cols() const;

  std::span<const uint64_t> data() const { return data_; }
  std::span<uint64_t> mutable_data() { return data_; }
  uint64_t operator[](size_t i) const { return data_[i]; }
  uint64_t& operator[](size_t i) { return data_[i]; }
  uint64_t at(uint32_t r, uint32_t c) const { return data_[size_t{r} * cols() + c]; }

  RingTensor Reshaped(std::vector<uint32_t> dims) const;

  bool SameShape(const RingTensor& o) const { return dims_ == o.dims_; }
  bool operator==(const RingTensor& o) const {
    return modulus_ == o.modulus_ && dims_ == o.dims_ && data_ == o.data_;
  }

 private:
  RingModulus modulus_;
  std::vector<uint32_t> dims_;
  std::vector<uint64_t> data_;
};

std::string ShapeString(const std::vector<uint32_t>& dims);

// Element-wise ops; shapes and moduli must match (kContract otherwise).
RingTensor Add(const RingTensor& a, const RingTensor& b);
RingTensor Sub(const RingTensor& a, const RingTensor& b);
RingTensor MulElementwise(const RingTensor& a, const RingTensor& b);
RingTensor MulScalar(const RingTensor& a, uint64_t c);
// (p x r) . (r x c) -> (p x c); rank-1 operands are treated as rows and the
// result keeps the left operand's rank.
RingTensor MatMul(const RingTensor& a, const RingTensor& b);

// Maps reals to ring elements at a fixed decimal scale.
class FixedPointCodec {
 public:
  explicit FixedPointCodec(const RingModulus& modulus = RingModulus(),
                           uint32_t scale = 100);

  const RingModulus& modulus() const { return modulus_; }
  uint32_t scale() const { return scale_; }

  // trunc(x * scale) reduced mod q. Products within two ulps of an integer
  // are snapped to it first, so grid values such as 0.29 encode to 29.
  // Throws kRange if |x|*scale >= q/2 or x is not finite.
  RingElement Encode(double x) const;
  uint64_t EncodeRaw(double x) const;
  // Scaled integer (e.g. hundredths) straight into the ring.
  uint64_t EncodeScaled(int64_t scaled) const;
  double Decode(const RingElement& a) const;
  double DecodeRaw(uint64_t a) const;

  // Truncated scaled integer, the value Encode() reduces mod q.
  int64_t ToScaled(double x) const;

  RingTensor EncodeVector(std::span<const double> xs) const;
  std::vector<double> DecodeVector(const RingTensor& t) const;

  // Largest |secret| (as centered lift) a share-domain truncation accepts:
  // floor(q / (4 * scale)).
  uint64_t TruncationBound() const;

 private:
  RingModulus modulus_;
  uint32_t scale_;
};

// floor(a / b) for b > 0, rounding toward negative infinity.
inline int64_t FloorDiv(int64_t a, int64_t b) {
  const int64_t q = a / b;
  return (a % b != 0 && a < 0) ? q - 1 : q;
}
inline int64_t FloorMod(int64_t a, int64_t b) {
  const int64_t r = a % b;
  return r < 0 ? r + b : r;
}

}  // namespace pricure

#endif  // PRICURE_RING_H_
