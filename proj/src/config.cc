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

#include "fsvae/config.h"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string_view>

#include "fsvae/errors.h"

namespace fsvae {
namespace {

std::string_view Trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

struct Field {
  std::string key;
  std::function<void(RunConfig&, std::string_view)> parse;
  std::function<std::string(const RunConfig&)> format;
};

[[noreturn]] void BadValue(std::string_view value, const char* expected) {
  throw ConfigError(std::string("expects ") + expected + ", got '" +
                    std::string(value) + "'");
}

int64_t ToInt(std::string_view v) {
  int64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) BadValue(v, "an integer");
  return out;
}

uint64_t ToUint(std::string_view v) {
  uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    BadValue(v, "a non-negative integer");
  }
  return out;
}

float ToFloat(std::string_view v) {
  float out = 0.0f;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) BadValue(v, "a number");
  return out;
}

bool ToBool(std::string_view v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  BadValue(v, "a boolean");
}

std::vector<int64_t> ToIntList(std::string_view v) {
  std::vector<int64_t> out;
  while (!v.empty()) {
    const auto comma = v.find(',');
    out.push_back(ToInt(Trim(v.substr(0, comma))));
    if (comma == std::string_view::npos) break;
    v.remove_prefix(comma + 1);
  }
  if (out.empty()) BadValue(v, "a comma-separated integer list");
  return out;
}

std::string FloatText(float f) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, f);
  return std::string(buf, p);
}

template <typename T>
Field IntField(std::string key, T RunConfig::*group, int64_t T::*member) {
  return {key,
          [group, member](RunConfig& c, std::string_view v) {
            (c.*group).*member = ToInt(v);
          },
          [group, member](const RunConfig& c) {
            return std::to_string((c.*group).*member);
          }};
}

template <typename T>
Field FloatField(std::string key, T RunConfig::*group, float T::*member) {
  return {key,
          [group, member](RunConfig& c, std::string_view v) {
            (c.*group).*member = ToFloat(v);
          },
          [group, member](const RunConfig& c) {
            return FloatText((c.*group).*member);
          }};
}

template <typename T>
Field BoolField(std::string key, T RunConfig::*group, bool T::*member) {
  return {key,
          [group, member](RunConfig& c, std::string_view v) {
            (c.*group).*member = ToBool(v);
          },
          [group, member](const RunConfig& c) -> std::string {
            return (c.*group).*member ? "true" : "false";
          }};
}

const std::vector<Field>& Fields() {
  using R = RunConfig;
  static const std::vector<Field> fields = {
      IntField("image_size", &R::model, &ModelConfig::image_size),
      IntField("image_channels", &R::model, &ModelConfig::image_channels),
      {"channels",
       [](R& c, std::string_view v) { c.model.channels = ToIntList(v); },
       [](const R& c) {
         std::string s;
         for (size_t i = 0; i < c.model.channels.size(); ++i) {
           s += (i ? "," : "") + std::to_string(c.model.channels[i]);
         }
         return s;
       }},
      {"latent_dim",
       [](R& c, std::string_view v) { c.model.latent.channels = ToInt(v); },
       [](const R& c) { return std::to_string(c.model.latent.channels); }},
      {"k", [](R& c, std::string_view v) { c.model.latent.k = ToInt(v); },
       [](const R& c) { return std::to_string(c.model.latent.k); }},
      {"timesteps",
       [](R& c, std::string_view v) { c.model.latent.timesteps = ToInt(v); },
       [](const R& c) { return std::to_string(c.model.latent.timesteps); }},
      IntField("posterior_hidden", &R::model, &ModelConfig::posterior_hidden),
      IntField("prior_hidden", &R::model, &ModelConfig::prior_hidden),
      {"tau_decay",
       [](R& c, std::string_view v) { c.model.lif.tau_decay = ToFloat(v); },
       [](const R& c) { return FloatText(c.model.lif.tau_decay); }},
      {"v_th", [](R& c, std::string_view v) { c.model.lif.v_th = ToFloat(v); },
       [](const R& c) { return FloatText(c.model.lif.v_th); }},
      {"surrogate_width",
       [](R& c, std::string_view v) { c.model.lif.surrogate_width = ToFloat(v); },
       [](const R& c) { return FloatText(c.model.lif.surrogate_width); }},
      FloatField("tau_out", &R::model, &ModelConfig::tau_out),
      FloatField("tau_syn", &R::model, &ModelConfig::tau_syn),
      {"loss",
       [](R& c, std::string_view v) {
         c.model.loss = ParseLossFlavor(std::string(v));
       },
       [](const R& c) { return LossFlavorName(c.model.loss); }},
      FloatField("dist_weight", &R::model, &ModelConfig::dist_weight),
      BoolField("straight_through", &R::model, &ModelConfig::straight_through),
      IntField("epochs", &R::train, &TrainConfig::epochs),
      FloatField("lr", &R::train, &TrainConfig::lr),
      FloatField("weight_decay", &R::train, &TrainConfig::weight_decay),
      IntField("batch_size", &R::train, &TrainConfig::batch_size),
      FloatField("schedule_ceiling", &R::train, &TrainConfig::schedule_ceiling),
      BoolField("teacher_forcing", &R::train, &TrainConfig::teacher_forcing),
      FloatField("grad_clip", &R::train, &TrainConfig::grad_clip),
      {"seed", [](R& c, std::string_view v) { c.train.seed = ToUint(v); },
       [](const R& c) { return std::to_string(c.train.seed); }},
      IntField("subset", &R::train, &TrainConfig::subset),
      IntField("checkpoint_every", &R::train, &TrainConfig::checkpoint_every),
      IntField("frechet_samples", &R::eval, &EvalConfig::frechet_samples),
      IntField("ae_latent", &R::eval, &EvalConfig::ae_latent),
      IntField("ae_epochs", &R::eval, &EvalConfig::ae_epochs),
      IntField("ae_batch", &R::eval, &EvalConfig::ae_batch),
      IntField("eval_subset", &R::eval, &EvalConfig::eval_subset),
  };
  return fields;
}

}  // namespace

void TrainConfig::Validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (!(lr >= 0.0f)) throw ConfigError("lr must be >= 0");
  if (!(weight_decay >= 0.0f)) throw ConfigError("weight_decay must be >= 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(schedule_ceiling >= 0.0f && schedule_ceiling <= 1.0f)) {
    throw ConfigError("schedule_ceiling must lie in [0,1]");
  }
  if (!(grad_clip >= 0.0f)) throw ConfigError("grad_clip must be >= 0");
  if (subset < 0) throw ConfigError("subset must be >= 0");
  if (checkpoint_every < 0) throw ConfigError("checkpoint_every must be >= 0");
}

void EvalConfig::Validate() const {
  if (frechet_samples < 2) throw ConfigError("frechet_samples must be >= 2");
  if (ae_latent < 1) throw ConfigError("ae_latent must be >= 1");
  if (ae_epochs < 1) throw ConfigError("ae_epochs must be >= 1");
  if (ae_batch < 1) throw ConfigError("ae_batch must be >= 1");
  if (eval_subset < 0) throw ConfigError("eval_subset must be >= 0");
}

void RunConfig::Validate() const {
  model.Validate();
  train.Validate();
  eval.Validate();
}

RunConfig ParseConfigText(const std::string& text) {
  RunConfig config;
  std::map<std::string, const Field*> by_key;
  for (const Field& f : Fields()) by_key[f.key] = &f;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line(raw);
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = Trim(line);
    if (line.empty()) continue;
    const std::string where = "config line " + std::to_string(line_no);
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(where + ": expected 'key = value', got '" +
                        std::string(line) + "'");
    }
    const std::string key(Trim(line.substr(0, eq)));
    const std::string_view value = Trim(line.substr(eq + 1));
    auto it = by_key.find(key);
    if (it == by_key.end()) {
      throw ConfigError(where + ": unknown key '" + key + "'");
    }
    if (value.empty()) throw ConfigError(where + ": key '" + key + "' has no value");
    try {
      it->second->parse(config, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + ": key '" + key + "' " + e.what());
    }
  }
  config.Validate();
  return config;
}

RunConfig ParseConfigFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::ostringstream text;
  text << in.rdbuf();
  try {
    return ParseConfigText(text.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

std::string FormatConfig(const RunConfig& config) {
  std::string out;
  for (const Field& f : Fields()) out += f.key + " = " + f.format(config) + "\n";
  return out;
}

}  // namespace fsvae
