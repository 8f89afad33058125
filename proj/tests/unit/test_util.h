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


#ifndef FSVAE_TESTS_TEST_UTIL_H_
#define FSVAE_TESTS_TEST_UTIL_H_

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "fsvae/rng.h"
#include "fsvae/tensor.h"

namespace fsvae::testing {

inline Tensor RandomTensor(const Shape& shape, RngStream& rng, float lo = -1.0f,
                           float hi = 1.0f) {
  Tensor t(shape);
  for (float& v : t.values()) v = lo + (hi - lo) * rng.UniformFloat();
  return t;
}

inline Tensor RandomBinary(const Shape& shape, RngStream& rng, float p = 0.5f) {
  Tensor t(shape);
  for (float& v : t.values()) v = rng.UniformFloat() < p ? 1.0f : 0.0f;
  return t;
}

// <w, y> accumulated in double.
inline double Dot(const Tensor& w, const Tensor& y) {
  double s = 0.0;
  for (int64_t i = 0; i < w.size(); ++i) s += double(w[i]) * double(y[i]);
  return s;
}

// Central differences of `loss` at `x`, one coordinate at a time.
inline std::vector<double> NumericGrad(const std::function<double(const Tensor&)>& loss,
                                       const Tensor& x, double h) {
  std::vector<double> g(static_cast<size_t>(x.size()));
  Tensor probe = x;
  for (int64_t i = 0; i < x.size(); ++i) {
    const float orig = probe[i];
    probe[i] = static_cast<float>(orig + h);
    const double up = loss(probe);
    const float hi = probe[i];
    probe[i] = static_cast<float>(orig - h);
    const double down = loss(probe);
    const float lo = probe[i];
    probe[i] = orig;
    // Divide by the step actually taken after rounding to float.
    g[static_cast<size_t>(i)] = (up - down) / (double(hi) - double(lo));
  }
  return g;
}

// ||a - n|| / max(||a||, ||n||); 0 when both vanish.
inline double RelativeError(const Tensor& analytic, const std::vector<double>& numeric) {
  double diff = 0.0, na = 0.0, nn = 0.0;
  for (int64_t i = 0; i < analytic.size(); ++i) {
    const double a = analytic[i], n = numeric[static_cast<size_t>(i)];
    diff += (a - n) * (a - n);
    na += a * a;
    nn += n * n;
  }
  const double scale = std::sqrt(std::max(na, nn));
  return scale == 0.0 ? 0.0 : std::sqrt(diff) / scale;
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path TempDir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("fsvae_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace fsvae::testing

#endif  // FSVAE_TESTS_TEST_UTIL_H_
