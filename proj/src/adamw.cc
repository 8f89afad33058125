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

#include "fsvae/adamw.h"

#include <cmath>
#include <map>

#include "fsvae/errors.h"

namespace fsvae {

AdamW::AdamW(std::vector<Parameter*> params, AdamWOptions options)
    : params_(std::move(params)), options_(options) {
  for (Parameter* p : params_) {
    m_.emplace_back(p->value.shape());
    v_.emplace_back(p->value.shape());
  }
}

void AdamW::Step() {
  for (Parameter* p : params_) {
    if (p->grad.shape() != p->value.shape()) {
      throw ShapeError("adamw: gradient " + ShapeString(p->grad.shape()) +
                       " vs parameter " + ShapeString(p->value.shape()) +
                       " for " + p->name);
    }
    if (!p->grad.AllFinite()) {
      throw NumericError("adamw: non-finite gradient for " + p->name);
    }
  }
  ++step_;
  const AdamWOptions& o = options_;
  const double bc1 = 1.0 - std::pow(static_cast<double>(o.beta1), step_);
  const double bc2 = 1.0 - std::pow(static_cast<double>(o.beta2), step_);
  const float decay = 1.0f - o.lr * o.weight_decay;
  for (size_t i = 0; i < params_.size(); ++i) {
    Tensor& w = params_[i]->value;
    const Tensor& g = params_[i]->grad;
    Tensor& m = m_[i];
    Tensor& v = v_[i];
    for (int64_t j = 0; j < w.size(); ++j) {
      m[j] = o.beta1 * m[j] + (1.0f - o.beta1) * g[j];
      v[j] = o.beta2 * v[j] + (1.0f - o.beta2) * g[j] * g[j];
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      w[j] = static_cast<float>(w[j] * decay -
                                o.lr * mhat / (std::sqrt(vhat) + o.eps));
    }
  }
}

void AdamW::ZeroGrad() {
  for (Parameter* p : params_) p->ZeroGrad();
}

std::vector<std::pair<std::string, Tensor>> AdamW::StateTensors() const {
  std::vector<std::pair<std::string, Tensor>> out;
  out.emplace_back("adamw.step", Tensor({1}, static_cast<float>(step_)));
  for (size_t i = 0; i < params_.size(); ++i) {
    out.emplace_back("adamw.m." + params_[i]->name, m_[i]);
    out.emplace_back("adamw.v." + params_[i]->name, v_[i]);
  }
  return out;
}

void AdamW::LoadState(std::span<const std::pair<std::string, Tensor>> tensors) {
  std::map<std::string, const Tensor*> by_name;
  for (const auto& [name, t] : tensors) by_name[name] = &t;
  auto find = [&](const std::string& name, const Shape& shape) -> const Tensor& {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw FormatError("optimizer state missing " + name);
    if (it->second->shape() != shape) {
      throw FormatError("optimizer state " + name + " has shape " +
                        ShapeString(it->second->shape()) + ", expected " +
                        ShapeString(shape));
    }
    return *it->second;
  };
  const Tensor& step = find("adamw.step", {1});
  for (size_t i = 0; i < params_.size(); ++i) {
    m_[i] = find("adamw.m." + params_[i]->name, params_[i]->value.shape());
    v_[i] = find("adamw.v." + params_[i]->name, params_[i]->value.shape());
  }
  step_ = static_cast<int64_t>(step[0]);
}

float ClipGradNorm(std::span<Parameter* const> params, float max_norm) {
  double ss = 0.0;
  for (const Parameter* p : params)
    for (float g : p->grad.values()) ss += static_cast<double>(g) * g;
  const double norm = std::sqrt(ss);
  if (max_norm > 0.0f && norm > max_norm) {
    const float scale = static_cast<float>(max_norm / (norm + 1e-6));
    for (Parameter* p : params)
      for (float& g : p->grad.values()) g *= scale;
  }
  return static_cast<float>(norm);
}

}  // namespace fsvae
