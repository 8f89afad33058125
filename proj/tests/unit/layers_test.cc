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


#include <cmath>
#include <functional>
#include <memory>

#include <gtest/gtest.h>

#include "fsvae/errors.h"
#include "fsvae/layers.h"
#include "test_util.h"

namespace fsvae {
namespace {

using testing::Dot;
using testing::NumericGrad;
using testing::RandomTensor;
using testing::RelativeError;

constexpr int kSeeds = 20;
constexpr double kTol = 1e-3;

// Checks d<w, layer(x)>/dx and d/dparam for every parameter.
void CheckLayerGradients(Layer& layer, const Tensor& x, RngStream& rng, double h) {
  LayerCache cache;
  const Tensor y = layer.Forward(x, &cache);
  const Tensor w = RandomTensor(y.shape(), rng);
  for (Parameter* p : layer.Parameters()) p->ZeroGrad();
  const Tensor gx = layer.Backward(w, cache, true);

  auto loss_x = [&](const Tensor& probe) { return Dot(w, layer.Forward(probe, nullptr)); };
  EXPECT_LT(RelativeError(gx, NumericGrad(loss_x, x, h)), kTol) << "input";
  for (Parameter* p : layer.Parameters()) {
    const Tensor saved = p->value;
    auto loss_p = [&](const Tensor& probe) {
      p->value = probe;
      const double l = Dot(w, layer.Forward(x, nullptr));
      p->value = saved;
      return l;
    };
    EXPECT_LT(RelativeError(p->grad, NumericGrad(loss_p, saved, h)), kTol) << p->name;
  }
}

TEST(LinearTest, FiniteDifferences) {
  for (int s = 0; s < kSeeds; ++s) {
    RngStream rng(static_cast<uint64_t>(s), 1);
    Linear fc("fc", 7, 5, true, 1.0f, rng);
    fc.bias().value = RandomTensor({5}, rng);
    CheckLayerGradients(fc, RandomTensor({3, 7}, rng), rng, 1e-2);
  }
}

TEST(LinearTest, ZeroUpstreamGivesZeroGrads) {
  RngStream rng(5);
  Linear fc("fc", 4, 3, true, 1.0f, rng);
  LayerCache cache;
  const Tensor x = RandomTensor({2, 4}, rng);
  fc.Forward(x, &cache);
  const Tensor gx = fc.Backward(Tensor({2, 3}), cache, true);
  EXPECT_EQ(gx, Tensor({2, 4}));
  EXPECT_EQ(fc.weight().grad, Tensor({3, 4}));
  EXPECT_EQ(fc.bias().grad, Tensor({3}));
}

TEST(LinearTest, BackwardWithoutCacheFails) {
  RngStream rng(5);
  Linear fc("fc", 4, 3, false, 1.0f, rng);
  EXPECT_THROW(fc.Backward(Tensor({2, 3}), LayerCache{}, true), Error);
}

TEST(LinearTest, FlattensTrailingAxes) {
  RngStream rng(2);
  Linear fc("fc", 12, 2, false, 1.0f, rng);
  EXPECT_EQ(fc.Forward(Tensor({5, 3, 2, 2}), nullptr).shape(), (Shape{5, 2}));
  EXPECT_THROW(fc.Forward(Tensor({5, 11}), nullptr), ShapeError);
}

TEST(FanInUniformTest, RespectsBound) {
  RngStream rng(9);
  const Tensor w = FanInUniform({64, 27}, 27, 2.0f, rng);
  const float bound = 2.0f * std::sqrt(3.0f / 27.0f);
  for (float v : w.values()) ASSERT_LE(std::abs(v), bound);
}

TEST(Conv2dLayerTest, FiniteDifferences) {
  for (int s = 0; s < kSeeds; ++s) {
    RngStream rng(static_cast<uint64_t>(s), 2);
    Conv2dLayer conv("conv", 2, 3, 3, {.stride = 1 + s % 2, .padding = 1}, true, 1.0f, rng);
    conv.bias().value = RandomTensor({3}, rng);
    CheckLayerGradients(conv, RandomTensor({2, 2, 6, 6}, rng), rng, 1e-2);
  }
}

TEST(ConvTranspose2dLayerTest, FiniteDifferences) {
  for (int s = 0; s < kSeeds; ++s) {
    RngStream rng(static_cast<uint64_t>(s), 3);
    ConvTranspose2dLayer deconv("deconv", 3, 2, 3,
                                {.stride = 2, .padding = 1, .output_padding = 1}, true,
                                1.0f, rng);
    deconv.bias().value = RandomTensor({2}, rng);
    CheckLayerGradients(deconv, RandomTensor({2, 3, 3, 3}, rng), rng, 1e-2);
  }
}

TEST(TdBatchNormTest, FiniteDifferences) {
  for (int s = 0; s < kSeeds; ++s) {
    RngStream rng(static_cast<uint64_t>(s), 4);
    TdBatchNorm bn("bn", 3, 0.5f);
    bn.gamma().value = RandomTensor({3}, rng, 0.5f, 1.5f);
    bn.beta().value = RandomTensor({3}, rng);
    const Tensor x = RandomTensor({4, 3, 2, 2}, rng, -2.0f, 2.0f);
    LayerCache cache;
    const Tensor y = bn.Forward(x, true, &cache);
    const Tensor w = RandomTensor(y.shape(), rng);
    bn.gamma().ZeroGrad();
    bn.beta().ZeroGrad();
    const Tensor gx = bn.Backward(w, cache);

    auto loss_x = [&](const Tensor& probe) { return Dot(w, bn.Forward(probe, true, nullptr)); };
    EXPECT_LT(RelativeError(gx, NumericGrad(loss_x, x, 1e-2)), kTol);
    for (Parameter* p : bn.Parameters()) {
      const Tensor saved = p->value;
      auto loss_p = [&](const Tensor& probe) {
        p->value = probe;
        const double l = Dot(w, bn.Forward(x, true, nullptr));
        p->value = saved;
        return l;
      };
      EXPECT_LT(RelativeError(p->grad, NumericGrad(loss_p, saved, 1e-2)), kTol) << p->name;
    }
  }
}

TEST(TdBatchNormTest, ConstantChannelGivesBeta) {
  TdBatchNorm bn("bn", 2, 0.5f);
  bn.beta().value = Tensor({2}, {0.25f, -0.75f});
  Tensor x({3, 2, 2});
  for (int64_t n = 0; n < 3; ++n)
    for (int64_t j = 0; j < 2; ++j) {
      x.at({n, 0, j}) = 4.0f;
      x.at({n, 1, j}) = -1.0f;
    }
  const Tensor y = bn.Forward(x, true, nullptr);
  for (int64_t n = 0; n < 3; ++n)
    for (int64_t j = 0; j < 2; ++j) {
      EXPECT_FLOAT_EQ(y.at({n, 0, j}), 0.25f);
      EXPECT_FLOAT_EQ(y.at({n, 1, j}), -0.75f);
    }
}

TEST(TdBatchNormTest, SymmetricTwoValuesStayNormalized) {
  TdBatchNorm bn("bn", 1, 1.0f);
  const Tensor x({4, 1}, {-1, 1, 1, -1});
  const Tensor y = bn.Forward(x, true, nullptr);
  for (int64_t i = 0; i < 4; ++i) EXPECT_NEAR(y[i], x[i], 1e-5f);
}

TEST(TdBatchNormTest, EvalModeWithUnitStatsIsAffine) {
  TdBatchNorm bn("bn", 2, 0.5f);
  bn.gamma().value = Tensor({2}, {2.0f, 3.0f});
  bn.beta().value = Tensor({2}, {0.1f, -0.1f});
  const Tensor x({2, 2}, {1.0f, -2.0f, 0.5f, 4.0f});
  const Tensor y = bn.Forward(x, false, nullptr);
  const float scale = 1.0f / std::sqrt(1.0f + 1e-5f);
  EXPECT_NEAR(y.at({0, 0}), 2.0f * 0.5f * 1.0f * scale + 0.1f, 1e-6f);
  EXPECT_NEAR(y.at({0, 1}), 3.0f * 0.5f * -2.0f * scale - 0.1f, 1e-6f);
  EXPECT_NEAR(y.at({1, 1}), 3.0f * 0.5f * 4.0f * scale - 0.1f, 1e-6f);
}

TEST(TdBatchNormTest, RunningStatisticsUseMomentumAndUnbiasedVariance) {
  TdBatchNorm bn("bn", 1, 0.5f);
  const Tensor x({4, 1}, {1, 2, 3, 6});
  bn.Forward(x, true, nullptr);
  // mean 3, unbiased variance (4+1+0+9)/3.
  EXPECT_NEAR(bn.running_mean()[0], 0.1f * 3.0f, 1e-6f);
  EXPECT_NEAR(bn.running_var()[0], 0.9f + 0.1f * 14.0f / 3.0f, 1e-6f);
}

TEST(TdBatchNormTest, EmptyBatchFails) {
  TdBatchNorm bn("bn", 2, 0.5f);
  EXPECT_THROW(bn.Forward(Tensor({0, 2}), true, nullptr), ShapeError);
}

}  // namespace
}  // namespace fsvae
