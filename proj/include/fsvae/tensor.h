// Copyright 2026 The FSVAE Authors.
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

#ifndef FSVAE_TENSOR_H_
#define FSVAE_TENSOR_H_

#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace fsvae {

using Shape = std::vector<int64_t>;

int64_t NumElements(const Shape& shape);
std::string ShapeString(const Shape& shape);

// Dense row-major float32 tensor with value semantics.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, float fill = 0.0f);
  Tensor(Shape shape, std::vector<float> values);

  static Tensor Scalar(float v) { return Tensor({}, {v}); }

  const Shape& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int64_t dim(int axis) const;
  int64_t size() const { return static_cast<int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  float* data() { return data_.data(); }
  const float* data() const { return data_.data(); }
  std::span<float> values() { return data_; }
  std::span<const float> values() const { return data_; }
  const std::vector<float>& vector() const { return data_; }

  float& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
  float operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }
  float& at(std::initializer_list<int64_t> index);
  float at(std::initializer_list<int64_t> index) const;

  // Same data, new shape; element count must match.
  Tensor Reshaped(Shape shape) const;
  void Reshape(Shape shape);

  void Fill(float v);
  bool AllFinite() const;
  // Throws NumericError naming `what` if any element is NaN/Inf.
  void CheckFinite(const char* what) const;

  bool operator==(const Tensor& other) const;

 private:
  int64_t Offset(std::initializer_list<int64_t> index) const;

  Shape shape_;
  std::vector<float> data_;
};

// Packed binary tensor for spike values. One bit per element.
class BitTensor {
 public:
  BitTensor() = default;
  explicit BitTensor(Shape shape);

  // Every element of `t` must be exactly 0 or 1.
  static BitTensor FromTensor(const Tensor& t);
  Tensor ToTensor() const;

  const Shape& shape() const { return shape_; }
  int64_t size() const { return size_; }

  bool Get(int64_t i) const {
    return (words_[static_cast<size_t>(i >> 6)] >> (i & 63)) & 1u;
  }
  void Set(int64_t i, bool v) {
    const uint64_t mask = uint64_t{1} << (i & 63);
    auto& w = words_[static_cast<size_t>(i >> 6)];
    w = v ? (w | mask) : (w & ~mask);
  }
  int64_t Count() const;

  bool operator==(const BitTensor& other) const {
    return shape_ == other.shape_ && words_ == other.words_;
  }

 private:
  Shape shape_;
  int64_t size_ = 0;
  std::vector<uint64_t> words_;
};

// Elementwise arithmetic. Shapes must be equal (no broadcasting).
Tensor Add(const Tensor& a, const Tensor& b);
Tensor Sub(const Tensor& a, const Tensor& b);
Tensor Mul(const Tensor& a, const Tensor& b);
Tensor Add(const Tensor& a, float s);
Tensor Mul(const Tensor& a, float s);
Tensor Tanh(const Tensor& a);

// [m,k] x [k,n] -> [m,n]; a rank-1 right operand is treated as a column.
Tensor MatMul(const Tensor& a, const Tensor& b);

// Reductions over the listed axes (removed from the result shape).
Tensor Sum(const Tensor& a, std::span<const int> axes);
Tensor Mean(const Tensor& a, std::span<const int> axes);
float SumAll(const Tensor& a);

// Transposes the two leading "blocks": [a, b, rest...] -> [b, a, rest...].
Tensor SwapLeadingAxes(const Tensor& a);

}  // namespace fsvae

#endif  // FSVAE_TENSOR_H_
