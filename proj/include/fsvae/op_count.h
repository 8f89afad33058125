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

#ifndef FSVAE_OP_COUNT_H_
#define FSVAE_OP_COUNT_H_

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "fsvae/model.h"

namespace fsvae {

enum class LayerKind { kConv, kDeconv, kFc };

// One synaptic layer and the neurons it drives.
struct LayerSpec {
  std::string name;
  LayerKind kind = LayerKind::kFc;
  int64_t in_channels = 0, in_height = 1, in_width = 1;
  int64_t out_channels = 0, out_height = 1, out_width = 1;
  int64_t kernel = 1;
  // Layers whose spikes feed this one, with their widths. Empty for a
  // real-valued input (the image).
  std::vector<std::pair<std::string, int64_t>> inputs;
  // false for the non-firing output layer.
  bool spiking = true;

  int64_t in_count() const { return in_channels * in_height * in_width; }
  int64_t out_count() const { return out_channels * out_height * out_width; }
  // Multiply-accumulates for one dense evaluation (padding taps included).
  int64_t macs() const;
  // Expected weight shape of the layer's parameter "<name>.weight".
  Shape weight_shape() const;
};

struct LayerGraph {
  std::vector<LayerSpec> layers;
  int64_t timesteps = 1;
  // Pixels of the output image.
  int64_t image_pixels = 0;
  // Latent width; the ANN graph adds a reparameterization of this size.
  int64_t latent = 0;
};

// Reconstruction path of the spiking model: encoder, posterior sampler,
// decoder and output layer.
LayerGraph BuildSnnGraph(const ModelConfig& config);
// Conventional VAE with the same encoder and decoder; the sampler is
// replaced by mean and log-variance heads on the encoder features.
LayerGraph BuildAnnGraph(const ModelConfig& config);
// Throws ShapeError when a layer's weight shape disagrees with the model.
void ValidateGraph(const LayerGraph& graph, Fsvae& model);

enum class CountMode { kAnn, kSnn };

struct OpRow {
  std::string name;
  double adds = 0.0;
  double mults = 0.0;
  double input_rate = 1.0;  // presynaptic firing rate used (SNN mode)
};

struct OpCountReport {
  CountMode mode = CountMode::kAnn;
  std::vector<OpRow> rows;
  double total_adds = 0.0;
  double total_mults = 0.0;
};

// Counting conventions (inference of one image):
//  ANN: every MAC is 1 add + 1 mult; the bias is the accumulator's start
//       value (batch norm folded into the weights), so it costs nothing.
//  SNN: a synapse driven by spikes costs one add per MAC per input spike,
//       i.e. MAC * presynaptic rate * T; the real-valued image is the same
//       at every step, so the first layer's current is computed once
//       (MAC adds + MAC mults). Each spiking neuron costs, per step, 1 mult
//       for the leak and 1 add to integrate its current. The output layer
//       accumulates its membrane with 1 mult + 1 add per pixel per step and
//       adds its bias once. Sampling (random selection) is free.
// `rates` maps layer names to mean output firing rates; missing entries
// for a spiking input are an error in SNN mode.
OpCountReport CountOps(const LayerGraph& graph, CountMode mode,
                       const std::map<std::string, double>& rates = {});

// ANN and SNN totals side by side, per layer and in total.
std::string FormatOpTable(const OpCountReport& ann, const OpCountReport& snn);
std::string OpReportCsv(const OpCountReport& report);

}  // namespace fsvae

#endif  // FSVAE_OP_COUNT_H_
