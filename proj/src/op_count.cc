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

#include "fsvae/op_count.h"

#include <cstdio>

#include "fsvae/errors.h"

namespace fsvae {
namespace {

LayerSpec Conv(std::string name, int64_t cin, int64_t size, int64_t cout,
               std::vector<std::pair<std::string, int64_t>> inputs) {
  LayerSpec l;
  l.name = std::move(name);
  l.kind = LayerKind::kConv;
  l.in_channels = cin;
  l.in_height = l.in_width = size;
  l.out_channels = cout;
  l.out_height = l.out_width = (size + 1) / 2;
  l.kernel = 3;
  l.inputs = std::move(inputs);
  return l;
}

LayerSpec Deconv(std::string name, int64_t cin, int64_t size, int64_t cout,
                 std::vector<std::pair<std::string, int64_t>> inputs) {
  LayerSpec l;
  l.name = std::move(name);
  l.kind = LayerKind::kDeconv;
  l.in_channels = cin;
  l.in_height = l.in_width = size;
  l.out_channels = cout;
  l.out_height = l.out_width = size * 2;
  l.kernel = 3;
  l.inputs = std::move(inputs);
  return l;
}

LayerSpec Fc(std::string name, int64_t in, int64_t out,
             std::vector<std::pair<std::string, int64_t>> inputs) {
  LayerSpec l;
  l.name = std::move(name);
  l.in_channels = in;
  l.out_channels = out;
  l.inputs = std::move(inputs);
  return l;
}

// Encoder convs, then the decoder from `decoder_input` onward.
void AddEncoderConvs(const ModelConfig& c, LayerGraph& g) {
  int64_t size = c.image_size, cin = c.image_channels;
  std::string prev;
  for (size_t i = 0; i < c.channels.size(); ++i) {
    std::vector<std::pair<std::string, int64_t>> in;
    if (!prev.empty()) in.emplace_back(prev, cin * size * size);
    g.layers.push_back(Conv("encoder.conv" + std::to_string(i), cin, size,
                            c.channels[i], std::move(in)));
    prev = g.layers.back().name;
    cin = c.channels[i];
    size = (size + 1) / 2;
  }
}

void AddDecoder(const ModelConfig& c, const std::string& z_source, LayerGraph& g) {
  const int64_t s = c.bottleneck_size(), C = c.latent.channels;
  const int64_t L = static_cast<int64_t>(c.channels.size());
  const int64_t flat = c.channels.back() * s * s;
  g.layers.push_back(Fc("decoder.fc", C, flat, {{z_source, C}}));
  std::string prev = "decoder.fc";
  int64_t size = s;
  for (int64_t i = 0; i < L; ++i) {
    const int64_t cin = c.channels[static_cast<size_t>(L - 1 - i)];
    const int64_t cout = i + 1 < L ? c.channels[static_cast<size_t>(L - 2 - i)]
                                   : c.channels.front();
    g.layers.push_back(Deconv("decoder.deconv" + std::to_string(i), cin, size, cout,
                              {{prev, cin * size * size}}));
    prev = g.layers.back().name;
    size *= 2;
  }
  LayerSpec out = Conv("decoder.output", c.channels.front(), size, c.image_channels,
                       {{prev, c.channels.front() * size * size}});
  out.out_height = out.out_width = size;
  out.spiking = false;
  g.layers.push_back(out);
}

std::string Sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

}  // namespace

int64_t LayerSpec::macs() const {
  switch (kind) {
    case LayerKind::kConv:
      return out_count() * in_channels * kernel * kernel;
    case LayerKind::kDeconv:
      return in_count() * out_channels * kernel * kernel;
    case LayerKind::kFc:
      return in_count() * out_count();
  }
  return 0;
}

Shape LayerSpec::weight_shape() const {
  switch (kind) {
    case LayerKind::kConv:
      return {out_channels, in_channels, kernel, kernel};
    case LayerKind::kDeconv:
      return {in_channels, out_channels, kernel, kernel};
    case LayerKind::kFc:
      return {out_count(), in_count()};
  }
  return {};
}

LayerGraph BuildSnnGraph(const ModelConfig& c) {
  c.Validate();
  LayerGraph g;
  g.timesteps = c.latent.timesteps;
  g.image_pixels = c.image_channels * c.image_size * c.image_size;
  g.latent = c.latent.channels;
  AddEncoderConvs(c, g);
  const int64_t s = c.bottleneck_size(), C = c.latent.channels;
  const int64_t flat = c.channels.back() * s * s;
  g.layers.push_back(Fc("encoder.fc", flat, C, {{g.layers.back().name, flat}}));
  const int64_t kc = c.latent.k * C, h = c.posterior_hidden;
  // The sampled z has the firing rate of the last sampler layer.
  g.layers.push_back(Fc("posterior.fc0", 2 * C, h,
                        {{"posterior.fc2", C}, {"encoder.fc", C}}));
  g.layers.push_back(Fc("posterior.fc1", h, h, {{"posterior.fc0", h}}));
  g.layers.push_back(Fc("posterior.fc2", h, kc, {{"posterior.fc1", h}}));
  AddDecoder(c, "posterior.fc2", g);
  return g;
}

LayerGraph BuildAnnGraph(const ModelConfig& c) {
  c.Validate();
  LayerGraph g;
  g.timesteps = 1;
  g.image_pixels = c.image_channels * c.image_size * c.image_size;
  g.latent = c.latent.channels;
  AddEncoderConvs(c, g);
  const int64_t s = c.bottleneck_size(), C = c.latent.channels;
  const int64_t flat = c.channels.back() * s * s;
  const std::string last = g.layers.back().name;
  g.layers.push_back(Fc("encoder.fc_mu", flat, C, {{last, flat}}));
  g.layers.push_back(Fc("encoder.fc_logvar", flat, C, {{last, flat}}));
  AddDecoder(c, "encoder.fc_mu", g);
  return g;
}

void ValidateGraph(const LayerGraph& graph, Fsvae& model) {
  std::map<std::string, const Parameter*> weights;
  for (const Parameter* p : model.Parameters()) weights[p->name] = p;
  for (const LayerSpec& l : graph.layers) {
    auto it = weights.find(l.name + ".weight");
    if (it == weights.end()) {
      throw ShapeError("layer graph: model has no layer '" + l.name + "'");
    }
    if (it->second->value.shape() != l.weight_shape()) {
      throw ShapeError("layer graph: '" + l.name + "' expects weight " +
                       ShapeString(l.weight_shape()) + ", model has " +
                       ShapeString(it->second->value.shape()));
    }
  }
}

OpCountReport CountOps(const LayerGraph& graph, CountMode mode,
                       const std::map<std::string, double>& rates) {
  OpCountReport r;
  r.mode = mode;
  const double T = static_cast<double>(graph.timesteps);
  for (const LayerSpec& l : graph.layers) {
    OpRow row;
    row.name = l.name;
    const double mac = static_cast<double>(l.macs());
    const double neurons = static_cast<double>(l.out_count());
    if (mode == CountMode::kAnn) {
      row.adds = mac;
      row.mults = mac;
    } else {
      if (l.inputs.empty()) {
        row.adds = mac;
        row.mults = mac;
      } else {
        double spikes = 0.0, width = 0.0;
        for (const auto& [src, w] : l.inputs) {
          auto it = rates.find(src);
          if (it == rates.end()) {
            throw ShapeError("op count: no firing rate for layer '" + src +
                             "' feeding '" + l.name + "'");
          }
          if (!(it->second >= 0.0 && it->second <= 1.0)) {
            throw ConfigError("op count: firing rate of '" + src + "' outside [0,1]");
          }
          spikes += it->second * static_cast<double>(w);
          width += static_cast<double>(w);
        }
        row.input_rate = spikes / width;
        row.adds = mac * row.input_rate * T;
      }
      if (l.spiking) {
        row.adds += neurons * T;
        row.mults += neurons * T;
      } else {
        // Bias once, then the leaky accumulation of the output membrane.
        row.adds += neurons + neurons * T;
        row.mults += neurons * T;
      }
    }
    r.total_adds += row.adds;
    r.total_mults += row.mults;
    r.rows.push_back(row);
  }
  if (mode == CountMode::kAnn) {
    // z = mu + exp(logvar / 2) * eps
    const double C = static_cast<double>(graph.latent);
    r.rows.push_back({"reparameterize", C, 2.0 * C, 1.0});
    r.total_adds += C;
    r.total_mults += 2.0 * C;
  }
  return r;
}

std::string FormatOpTable(const OpCountReport& ann, const OpCountReport& snn) {
  std::string s;
  s += "# ANN: 1 add + 1 mult per MAC; the bias seeds the accumulator (BN folded).\n";
  s += "# SNN: adds = MAC x presynaptic rate x T; first layer computed once;\n";
  s += "#      per neuron per step 1 mult + 1 add for the membrane; output membrane\n";
  s += "#      1 mult + 1 add per pixel per step plus its bias once.\n";
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-20s %12s %12s %12s %12s %8s\n", "layer", "ANN add",
                "ANN mult", "SNN add", "SNN mult", "rate");
  s += buf;
  std::map<std::string, const OpRow*> snn_rows, ann_rows;
  for (const OpRow& r : snn.rows) snn_rows[r.name] = &r;
  for (const OpRow& r : ann.rows) ann_rows[r.name] = &r;
  std::vector<std::string> names;
  for (const OpRow& r : ann.rows) names.push_back(r.name);
  for (const OpRow& r : snn.rows) {
    if (!ann_rows.count(r.name)) names.push_back(r.name);
  }
  for (const std::string& n : names) {
    const OpRow* a = ann_rows.count(n) ? ann_rows[n] : nullptr;
    const OpRow* b = snn_rows.count(n) ? snn_rows[n] : nullptr;
    std::snprintf(buf, sizeof buf, "%-20s %12s %12s %12s %12s %8s\n", n.c_str(),
                  a ? Sci(a->adds).c_str() : "-", a ? Sci(a->mults).c_str() : "-",
                  b ? Sci(b->adds).c_str() : "-", b ? Sci(b->mults).c_str() : "-",
                  b ? (std::to_string(b->input_rate).substr(0, 6)).c_str() : "-");
    s += buf;
  }
  std::snprintf(buf, sizeof buf, "%-20s %12s %12s %12s %12s\n", "total",
                Sci(ann.total_adds).c_str(), Sci(ann.total_mults).c_str(),
                Sci(snn.total_adds).c_str(), Sci(snn.total_mults).c_str());
  s += buf;
  return s;
}

std::string OpReportCsv(const OpCountReport& report) {
  std::string s = "mode,layer,adds,mults,input_rate\n";
  const char* mode = report.mode == CountMode::kAnn ? "ann" : "snn";
  char buf[200];
  for (const OpRow& r : report.rows) {
    std::snprintf(buf, sizeof buf, "%s,%s,%.17g,%.17g,%.6f\n", mode, r.name.c_str(),
                  r.adds, r.mults, r.input_rate);
    s += buf;
  }
  std::snprintf(buf, sizeof buf, "%s,total,%.17g,%.17g,\n", mode, report.total_adds,
                report.total_mults);
  s += buf;
  return s;
}

}  // namespace fsvae
