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
#include <memory>
#include <vector>

#include <gtest/gtest.h>

#include "fsvae/errors.h"
#include "fsvae/layers.h"
#include "fsvae/snn.h"
#include "test_util.h"

namespace fsvae {
namespace {

using testing::RandomBinary;
using testing::RandomTensor;

TEST(LifTest, SubthresholdInputsAccumulate) {
  const LifConfig cfg{.tau_decay = 0.5f, .v_th = 1.0f};
  NeuronState st = NeuronState::Zeros({1});
  BitTensor o = LifStep(st, Tensor({1}, {0.6f}), cfg);
  EXPECT_FLOAT_EQ(st.u[0], 0.6f);
  EXPECT_FALSE(o.Get(0));
  o = LifStep(st, Tensor({1}, {0.6f}), cfg);
  EXPECT_FLOAT_EQ(st.u[0], 0.9f);
  EXPECT_FALSE(o.Get(0));
}

TEST(LifTest, SpikeResetsDecayTerm) {
  const LifConfig cfg{.tau_decay = 0.5f, .v_th = 1.0f};
  NeuronState st = NeuronState::Zeros({1});
  LifStep(st, Tensor({1}, {0.6f}), cfg);
  const BitTensor o = LifStep(st, Tensor({1}, {0.8f}), cfg);
  EXPECT_FLOAT_EQ(st.u[0], 1.1f);
  EXPECT_TRUE(o.Get(0));
  LifStep(st, Tensor({1}, {0.25f}), cfg);
  EXPECT_FLOAT_EQ(st.u[0], 0.25f);
}

TEST(LifTest, ZeroInputNeverFires) {
  NeuronState st = NeuronState::Zeros({8});
  for (int t = 0; t < 50; ++t) EXPECT_EQ(LifStep(st, Tensor({8}), LifConfig{}).Count(), 0);
}

TEST(LifTest, NonFiniteInputFails) {
  NeuronState st = NeuronState::Zeros({2});
  EXPECT_THROW(LifStep(st, Tensor({2}, {0.0f, INFINITY}), LifConfig{}), NumericError);
}

TEST(LifTest, SequenceMatchesScalarRecurrence) {
  const LifConfig cfg;
  for (uint64_t seed = 0; seed < 50; ++seed) {
    RngStream rng(seed, 10);
    const int64_t T = 1 + static_cast<int64_t>(rng.UniformInt(32)), n = 3, width = 5;
    const Tensor x = RandomTensor({T * n, width}, rng, -0.5f, 1.5f);
    Tensor u, spikes;
    LifForwardSequence(x, T, cfg, u, spikes);
    for (int64_t j = 0; j < n * width; ++j) {
      double v = 0.0;
      bool fired = false;
      for (int64_t t = 0; t < T; ++t) {
        const int64_t i = t * n * width + j;
        v = (fired ? 0.0 : 0.25 * v) + x[i];
        fired = v >= 0.5;
        ASSERT_NEAR(u[i], v, 1e-6);
        ASSERT_EQ(spikes[i], fired ? 1.0f : 0.0f);
      }
    }
  }
}

TEST(SurrogateTest, WindowEdges) {
  const LifConfig cfg;  // v_th 0.5, a 1
  EXPECT_FLOAT_EQ(SurrogateGrad(0.5f, cfg), 1.0f);
  EXPECT_FLOAT_EQ(SurrogateGrad(0.5f + 0.51f, cfg), 0.0f);
  EXPECT_FLOAT_EQ(SurrogateGrad(0.5f - 0.51f, cfg), 0.0f);
  EXPECT_FLOAT_EQ(SurrogateGrad(0.9f, LifConfig{.surrogate_width = 2.0f}), 0.5f);
}

// Forward-mode derivative of sum_t sum_n PSP(o)_t w.r.t. every input, with
// the surrogate in place of the step and the reset gate held constant.
std::vector<double> UnrolledGradient(const std::vector<double>& x, int64_t T, int64_t n,
                                     const LifConfig& cfg, double tau_syn) {
  std::vector<double> u(x.size()), o(x.size());
  for (int64_t j = 0; j < n; ++j) {
    for (int64_t t = 0; t < T; ++t) {
      const double prev_u = t ? u[(t - 1) * n + j] : 0.0;
      const double prev_o = t ? o[(t - 1) * n + j] : 0.0;
      const double v = cfg.tau_decay * prev_u * (1.0 - prev_o) + x[t * n + j];
      u[t * n + j] = v;
      o[t * n + j] = v >= cfg.v_th ? 1.0 : 0.0;
    }
  }
  std::vector<double> grad(x.size());
  for (int64_t s = 0; s < T; ++s) {
    for (int64_t j = 0; j < n; ++j) {
      double du = 0.0, dpsp = 0.0, dl = 0.0;
      for (int64_t t = 0; t < T; ++t) {
        const double gate = t ? 1.0 - o[(t - 1) * n + j] : 1.0;
        du = cfg.tau_decay * gate * du + (t == s ? 1.0 : 0.0);
        const double uu = u[t * n + j];
        const double ds = std::abs(uu - cfg.v_th) < cfg.surrogate_width / 2
                              ? 1.0 / cfg.surrogate_width
                              : 0.0;
        dpsp = (1.0 - 1.0 / tau_syn) * dpsp + ds * du / tau_syn;
        dl += dpsp;
      }
      grad[s * n + j] = dl;
    }
  }
  return grad;
}

TEST(LifBackwardTest, MatchesUnrolledGraphOracle) {
  const LifConfig cfg;
  const int64_t T = 4, n = 2;
  for (uint64_t seed = 0; seed < 20; ++seed) {
    RngStream rng(seed, 11);
    const Tensor x = RandomTensor({T, n}, rng, 0.0f, 0.9f);
    Tensor u, spikes;
    LifForwardSequence(x, T, cfg, u, spikes);
    const Tensor grad_o = PspFilterBackward(Tensor({T, n}, 1.0f), 2.0f);
    const Tensor gx = LifBackwardSequence(grad_o, u, spikes, T, cfg);
    const std::vector<double> oracle =
        UnrolledGradient({x.values().begin(), x.values().end()}, T, n, cfg, 2.0);
    for (int64_t i = 0; i < x.size(); ++i) {
      EXPECT_NEAR(gx[i], oracle[static_cast<size_t>(i)], 1e-5) << "seed " << seed << " i " << i;
    }
  }
}

TEST(PspTest, HandEvaluatedSequence) {
  const Tensor psp = PspFilter(Tensor({3, 1}, {1, 1, 0}), 2.0f);
  EXPECT_FLOAT_EQ(psp[0], 0.5f);
  EXPECT_FLOAT_EQ(psp[1], 0.75f);
  EXPECT_FLOAT_EQ(psp[2], 0.375f);
}

TEST(PspTest, ZerosStayZeroAndOnesApproachOne) {
  EXPECT_EQ(PspFilter(Tensor({10, 3}), 2.0f), Tensor({10, 3}));
  const Tensor ones = PspFilter(Tensor({60, 1}, 1.0f), 2.0f);
  for (int64_t t = 1; t < 60; ++t) EXPECT_GE(ones[t], ones[t - 1]);
  EXPECT_NEAR(ones[59], 1.0f, 1e-6f);
  EXPECT_LE(ones[59], 1.0f);
}

TEST(PspTest, IdentityWhenTauIsOne) {
  RngStream rng(4);
  const Tensor seq = RandomTensor({6, 2}, rng, 0.0f, 1.0f);
  EXPECT_EQ(PspFilter(seq, 1.0f), seq);
  EXPECT_THROW(PspFilter(seq, 0.5f), ConfigError);
}

TEST(PspTest, UpdateMatchesFilterAndClosedForm) {
  RngStream rng(8);
  const int64_t T = 12, n = 4;
  const Tensor z = RandomBinary({T, n}, rng);
  const Tensor filtered = PspFilter(z, 3.0f);
  PspState st{Tensor({n}), 3.0f};
  for (int64_t t = 0; t < T; ++t) {
    st = PspUpdate(st, BitTensor::FromTensor(Tensor({n}, std::vector<float>(
                                                     z.data() + t * n, z.data() + (t + 1) * n))));
    for (int64_t j = 0; j < n; ++j) {
      double closed = 0.0;
      for (int64_t i = 0; i <= t; ++i) closed += (1.0 / 3.0) * std::pow(2.0 / 3.0, i) * z[(t - i) * n + j];
      EXPECT_NEAR(st.psp[j], closed, 1e-6);
      EXPECT_NEAR(filtered[t * n + j], closed, 1e-6);
    }
  }
}

TEST(PspTest, BackwardFiniteDifferences) {
  for (int s = 0; s < 20; ++s) {
    RngStream rng(static_cast<uint64_t>(s), 12);
    const Tensor seq = RandomTensor({7, 3}, rng, 0.0f, 1.0f);
    const Tensor w = RandomTensor({7, 3}, rng);
    const float tau = 1.0f + 3.0f * rng.UniformFloat();
    auto loss = [&](const Tensor& p) { return testing::Dot(w, PspFilter(p, tau)); };
    EXPECT_LT(testing::RelativeError(PspFilterBackward(w, tau),
                                     testing::NumericGrad(loss, seq, 1e-2)),
              1e-3);
  }
}

std::unique_ptr<Layer> Fc(int64_t in, int64_t out, RngStream& rng) {
  return std::make_unique<Linear>("fc", in, out, false, 1.0f, rng);
}

TEST(SpikingLayerTest, ZeroInputGivesZeroOutput) {
  RngStream rng(1);
  SpikingLayer layer("l", Fc(6, 4, rng), 4, LifConfig{});
  const Tensor out = layer.Forward(Tensor({5 * 2, 6}), 5, false, true, nullptr);
  EXPECT_EQ(out, Tensor({10, 4}));
}

TEST(SpikingLayerTest, SingleSynapseFiresAtSameStep) {
  RngStream rng(1);
  const LifConfig lif;
  auto fc = std::make_unique<Linear>("fc", 3, 3, false, 1.0f, rng);
  fc->weight().value = Tensor({3, 3});
  for (int64_t i = 0; i < 3; ++i) fc->weight().value.at({i, i}) = 2.0f * lif.v_th;
  SpikingLayer layer("l", std::move(fc), 3, lif);
  // Unit running statistics and gamma = 1/v_th make the norm a pass-through.
  layer.bn().gamma().value = Tensor({3}, 1.0f / lif.v_th);
  Tensor in({4, 3});
  in.at({2, 1}) = 1.0f;
  const Tensor out = layer.Forward(in, 4, false, false, nullptr);
  for (int64_t i = 0; i < out.size(); ++i) EXPECT_EQ(out[i], i == 2 * 3 + 1 ? 1.0f : 0.0f);
}

TEST(SpikingLayerTest, OutputIsBinaryAcrossSeeds) {
  for (uint64_t seed = 0; seed < 100; ++seed) {
    RngStream rng(seed, 13);
    SpikingLayer layer("l", Fc(8, 6, rng), 6, LifConfig{});
    const Tensor out =
        layer.Forward(RandomTensor({4 * 3, 8}, rng, -2.0f, 2.0f), 4, false, true, nullptr);
    for (float v : out.values()) ASSERT_TRUE(v == 0.0f || v == 1.0f);
  }
}

TEST(SpikingLayerTest, TimeInvariantInputMatchesRepeatedFrames) {
  RngStream rng(3);
  SpikingLayer a("a", Fc(5, 4, rng), 4, LifConfig{});
  RngStream rng2(3);
  SpikingLayer b("b", Fc(5, 4, rng2), 4, LifConfig{});
  const Tensor frame = RandomTensor({2, 5}, rng);
  EXPECT_EQ(a.Forward(frame, 6, true, true, nullptr),
            b.Forward(RepeatFrames(frame, 6), 6, false, true, nullptr));
}

TEST(FramesTest, RepeatThenSumScalesByT) {
  const Tensor frame({2, 2}, {1, 2, 3, 4});
  EXPECT_EQ(SumFrames(RepeatFrames(frame, 3), 3), Mul(frame, 3.0f));
}

}  // namespace
}  // namespace fsvae
