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


#include <filesystem>
#include <fstream>
#include <string>

#include <gtest/gtest.h>

#include "fsvae/config.h"
#include "fsvae/errors.h"
#include "test_util.h"

namespace fsvae {
namespace {

void ExpectConfigError(const std::string& text, const std::string& needle) {
  try {
    ParseConfigText(text);
    FAIL() << "expected ConfigError for: " << text;
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
  }
}

TEST(ConfigTest, EmptyTextGivesDefaults) {
  const RunConfig c = ParseConfigText("");
  EXPECT_EQ(c.model.latent.timesteps, 16);
  EXPECT_EQ(c.model.latent.channels, 128);
  EXPECT_EQ(c.model.latent.k, 20);
  EXPECT_EQ(c.model.channels, (std::vector<int64_t>{32, 64, 128, 256}));
  EXPECT_FLOAT_EQ(c.model.lif.tau_decay, 0.25f);
  EXPECT_FLOAT_EQ(c.model.lif.v_th, 0.5f);
  EXPECT_FLOAT_EQ(c.model.tau_out, 0.8f);
  EXPECT_FLOAT_EQ(c.model.tau_syn, 2.0f);
  EXPECT_EQ(c.model.loss, LossFlavor::kMmdPsp);
  EXPECT_FLOAT_EQ(c.train.lr, 1e-3f);
  EXPECT_FLOAT_EQ(c.train.weight_decay, 1e-3f);
  EXPECT_EQ(c.train.epochs, 150);
  EXPECT_EQ(c.train.batch_size, 250);
  EXPECT_FLOAT_EQ(c.train.schedule_ceiling, 0.3f);
}

TEST(ConfigTest, ParsesValuesCommentsAndWhitespace) {
  const RunConfig c = ParseConfigText(
      "# desk run\n"
      "  latent_dim = 32   # C\n"
      "k=4\n"
      "\n"
      "channels = 16, 32,64 ,128\n"
      "loss = kld\n"
      "teacher_forcing = false\n"
      "lr = 2.5e-4\n"
      "seed = 18446744073709551615\n");
  EXPECT_EQ(c.model.latent.channels, 32);
  EXPECT_EQ(c.model.latent.k, 4);
  EXPECT_EQ(c.model.channels, (std::vector<int64_t>{16, 32, 64, 128}));
  EXPECT_EQ(c.model.loss, LossFlavor::kKld);
  EXPECT_FALSE(c.train.teacher_forcing);
  EXPECT_FLOAT_EQ(c.train.lr, 2.5e-4f);
  EXPECT_EQ(c.train.seed, 18446744073709551615ull);
}

TEST(ConfigTest, RejectsKOfOne) { ExpectConfigError("k = 1\n", "k must be >= 2, got 1"); }

TEST(ConfigTest, ErrorsNameLineAndKey) {
  ExpectConfigError("k = 4\nlatnet_dim = 3\n", "config line 2: unknown key 'latnet_dim'");
  ExpectConfigError("timesteps = eight\n", "key 'timesteps' expects an integer, got 'eight'");
  ExpectConfigError("straight_through = maybe\n", "expects a boolean");
  ExpectConfigError("epochs\n", "expected 'key = value'");
  ExpectConfigError("lr =\n", "has no value");
  ExpectConfigError("epochs = 0\n", "epochs must be >= 1");
  ExpectConfigError("loss = l1\n", "unknown loss flavor");
  ExpectConfigError("image_size = 20\n", "image_size");
}

TEST(ConfigTest, FormatRoundTrips) {
  RunConfig c = ParseConfigText("latent_dim = 7\nk = 3\nloss = mmd\nlr = 0.1\ntau_out = 0.7\n"
                                "schedule_ceiling = 0.25\nsubset = 99\nae_latent = 5\n");
  const std::string text = FormatConfig(c);
  const RunConfig back = ParseConfigText(text);
  EXPECT_EQ(FormatConfig(back), text);
  EXPECT_TRUE(back.model.Diff(c.model).empty());
  EXPECT_FLOAT_EQ(back.train.lr, 0.1f);
  EXPECT_FLOAT_EQ(back.model.tau_out, 0.7f);
  EXPECT_EQ(back.train.subset, 99);
  EXPECT_EQ(back.eval.ae_latent, 5);
}

TEST(ConfigTest, FileErrorsCarryThePath) {
  const auto dir = testing::TempDir("config");
  const auto path = (dir / "bad.conf").string();
  std::ofstream(path) << "k = 1\n";
  try {
    ParseConfigFile(path);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find(path), std::string::npos);
  }
  EXPECT_THROW(ParseConfigFile((dir / "missing.conf").string()), ConfigError);
}

}  // namespace
}  // namespace fsvae
