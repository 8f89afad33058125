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

#include "fsvae/tensor.h"

#include <Eigen/Core>
#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <sstream>

#include "fsvae/errors.h"

namespace fsvae {

using RowMatrix =
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

int64_t NumElements(const Shape& shape) {
  int64_t n = 1;
  for (int64_t d : shape) {
    if (d < 0) throw ShapeError("negative dimension in " + ShapeString(shape));
    n *= d;
  }
  return n;
}

std::string ShapeString(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, float fill)
    : shape_(std::move(shape)),
      data_(static_cast<size_t>(NumElements(shape_)), fill) {}

Tensor::Tensor(Shape shape, std::vector<float> values)
    : shape_(std::move(shape)), data_(std::move(values)) {
  if (static_cast<int64_t>(data_.size()) != NumElements(shape_)) {
    throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                     " does not match shape " + ShapeString(shape_));
  }
}

int64_t Tensor::dim(int axis) const {
  if (axis < 0) axis += rank();
  if (axis < 0 || axis >= rank()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for " +
                     ShapeString(shape_));
  }
  return shape_[static_cast<size_t>(axis)];
}

int64_t Tensor::Offset(std::initializer_list<int64_t> index) const {
  if (static_cast<int>(index.size()) != rank()) {
    throw ShapeError("index rank mismatch for " + ShapeString(shape_));
  }
  int64_t off = 0;
  size_t axis = 0;
  for (int64_t i : index) {
    if (i < 0 || i >= shape_[axis]) {
      throw ShapeError("index out of range for " + ShapeString(shape_));
    }
    off = off * shape_[axis] + i;
    ++axis;
  }
  return off;
}

float& Tensor::at(std::initializer_list<int64_t> index) {
  return data_[static_cast<size_t>(Offset(index))];
}

float Tensor::at(std::initializer_list<int64_t> index) const {
  return data_[static_cast<size_t>(Offset(index))];
}

Tensor Tensor::Reshaped(Shape shape) const {
  Tensor out = *this;
  out.Reshape(std::move(shape));
  return out;
}

void Tensor::Reshape(Shape shape) {
  if (NumElements(shape) != size()) {
    throw ShapeError("cannot reshape " + ShapeString(shape_) + " to " +
                     ShapeString(shape));
  }
  shape_ = std::move(shape);
}

void Tensor::Fill(float v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::AllFinite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](float v) { return std::isfinite(v); });
}

void Tensor::CheckFinite(const char* what) const {
  if (!AllFinite()) {
    throw NumericError(std::string("non-finite value in ") + what + " " +
                       ShapeString(shape_));
  }
}

bool Tensor::operator==(const Tensor& other) const {
  return shape_ == other.shape_ &&
         std::memcmp(data_.data(), other.data_.data(),
                     data_.size() * sizeof(float)) == 0;
}

BitTensor::BitTensor(Shape shape)
    : shape_(std::move(shape)),
      size_(NumElements(shape_)),
      words_(static_cast<size_t>((size_ + 63) / 64), 0) {}

BitTensor BitTensor::FromTensor(const Tensor& t) {
  BitTensor out(t.shape());
  for (int64_t i = 0; i < t.size(); ++i) {
    const float v = t[i];
    if (v != 0.0f && v != 1.0f) {
      throw NumericError("BitTensor::FromTensor: value " + std::to_string(v) +
                         " at " + std::to_string(i) + " is not binary");
    }
    if (v == 1.0f) out.Set(i, true);
  }
  return out;
}

Tensor BitTensor::ToTensor() const {
  Tensor out(shape_);
  for (int64_t i = 0; i < size_; ++i) out[i] = Get(i) ? 1.0f : 0.0f;
  return out;
}

int64_t BitTensor::Count() const {
  int64_t n = 0;
  for (uint64_t w : words_) n += std::popcount(w);
  return n;
}

namespace {

void RequireSameShape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " +
                     ShapeString(a.shape()) + " vs " + ShapeString(b.shape()));
  }
}

template <typename F>
Tensor Zip(const Tensor& a, const Tensor& b, const char* op, F f) {
  RequireSameShape(a, b, op);
  Tensor out(a.shape());
  for (int64_t i = 0; i < a.size(); ++i) out[i] = f(a[i], b[i]);
  return out;
}

template <typename F>
Tensor Map(const Tensor& a, F f) {
  Tensor out(a.shape());
  for (int64_t i = 0; i < a.size(); ++i) out[i] = f(a[i]);
  return out;
}

}  // namespace

Tensor Add(const Tensor& a, const Tensor& b) {
  return Zip(a, b, "add", [](float x, float y) { return x + y; });
}
Tensor Sub(const Tensor& a, const Tensor& b) {
  return Zip(a, b, "sub", [](float x, float y) { return x - y; });
}
Tensor Mul(const Tensor& a, const Tensor& b) {
  return Zip(a, b, "mul", [](float x, float y) { return x * y; });
}
Tensor Add(const Tensor& a, float s) {
  return Map(a, [s](float x) { return x + s; });
}
Tensor Mul(const Tensor& a, float s) {
  return Map(a, [s](float x) { return x * s; });
}
Tensor Tanh(const Tensor& a) {
  return Map(a, [](float x) { return std::tanh(x); });
}

Tensor MatMul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || (b.rank() != 1 && b.rank() != 2) ||
      a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul: cannot multiply " + ShapeString(a.shape()) +
                     " by " + ShapeString(b.shape()));
  }
  const int64_t m = a.dim(0), k = a.dim(1);
  const int64_t n = b.rank() == 1 ? 1 : b.dim(1);
  Tensor out(b.rank() == 1 ? Shape{m} : Shape{m, n});
  Eigen::Map<const RowMatrix> ma(a.data(), m, k);
  Eigen::Map<const RowMatrix> mb(b.data(), k, n);
  Eigen::Map<RowMatrix> mo(out.data(), m, n);
  mo.noalias() = ma * mb;
  return out;
}

Tensor Sum(const Tensor& a, std::span<const int> axes) {
  std::vector<bool> reduce(static_cast<size_t>(a.rank()), false);
  for (int ax : axes) {
    const int norm = ax < 0 ? ax + a.rank() : ax;
    if (norm < 0 || norm >= a.rank()) {
      throw ShapeError("sum: axis " + std::to_string(ax) +
                       " out of range for " + ShapeString(a.shape()));
    }
    reduce[static_cast<size_t>(norm)] = true;
  }
  Shape out_shape;
  for (int i = 0; i < a.rank(); ++i) {
    if (!reduce[static_cast<size_t>(i)]) out_shape.push_back(a.dim(i));
  }
  Tensor out(out_shape);
  // Walk the input in order, mapping each flat index to its output slot.
  std::vector<int64_t> idx(static_cast<size_t>(a.rank()), 0);
  for (int64_t flat = 0; flat < a.size(); ++flat) {
    int64_t o = 0;
    for (int i = 0; i < a.rank(); ++i) {
      if (!reduce[static_cast<size_t>(i)]) o = o * a.dim(i) + idx[static_cast<size_t>(i)];
    }
    out[o] += a[flat];
    for (int i = a.rank() - 1; i >= 0; --i) {
      if (++idx[static_cast<size_t>(i)] < a.dim(i)) break;
      idx[static_cast<size_t>(i)] = 0;
    }
  }
  return out;
}

Tensor Mean(const Tensor& a, std::span<const int> axes) {
  Tensor s = Sum(a, axes);
  const int64_t count = s.size() == 0 ? 0 : a.size() / s.size();
  if (count == 0) throw ShapeError("mean over empty axes of " + ShapeString(a.shape()));
  return Mul(s, 1.0f / static_cast<float>(count));
}

float SumAll(const Tensor& a) {
  double s = 0.0;
  for (float v : a.values()) s += v;
  return static_cast<float>(s);
}

Tensor SwapLeadingAxes(const Tensor& a) {
  if (a.rank() < 2) throw ShapeError("SwapLeadingAxes needs rank >= 2");
  const int64_t d0 = a.dim(0), d1 = a.dim(1);
  const int64_t inner = a.size() / (d0 * d1 == 0 ? 1 : d0 * d1);
  Shape s = a.shape();
  std::swap(s[0], s[1]);
  Tensor out(s);
  for (int64_t i = 0; i < d0; ++i) {
    for (int64_t j = 0; j < d1; ++j) {
      std::copy_n(a.data() + (i * d1 + j) * inner, inner,
                  out.data() + (j * d0 + i) * inner);
    }
  }
  return out;
}

}  // namespace fsvae
