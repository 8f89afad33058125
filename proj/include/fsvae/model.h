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

#ifndef FSVAE_MODEL_H_
#define FSVAE_MODEL_H_

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "fsvae/latent.h"
#include "fsvae/layers.h"
#include "fsvae/losses.h"
#include "fsvae/rng.h"
#include "fsvae/snn.h"
#include "fsvae/tensor.h"

namespace fsvae {

struct ModelConfig {
  int64_t image_size = 32;
  int64_t image_channels = 1;
  // Encoder conv widths; the decoder mirrors them.
  std::vector<int64_t> channels = {32, 64, 128, 256};
  LatentConfig latent;
  int64_t posterior_hidden = 256;
  int64_t prior_hidden = 128;
  LifConfig lif;
  float tau_out = 0.8f;
  float tau_syn = 2.0f;
  LossFlavor loss = LossFlavor::kMmdPsp;
  // Weight of the distance term relative to the per-pixel MSE.
  float dist_weight = 1.0f;
  // Route the decoder's gradient on z to the selected sampler output.
  bool straight_through = true;

  void Validate() const;
  // Spatial size at the encoder bottleneck.
  int64_t bottleneck_size() const;
  // Names of fields whose values differ, e.g. {"latent_dim", "k"}.
  std::vector<std::string> Diff(const ModelConfig& other) const;
};

// Non-firing output neurons: u <- tau_out * u + x_t, image = tanh(u_T).
class OutputAccumulator {
 public:
  OutputAccumulator(Shape shape, float tau_out)
      : u_(std::move(shape)), tau_out_(tau_out) {}
  void Accumulate(const Tensor& x_t);
  const Tensor& potential() const { return u_; }
  Tensor Image() const { return Tanh(u_); }

 private:
  Tensor u_;
  float tau_out_;
};

// u_T = sum_t tau_out^(T-1-t) x_t over a [T*N, ...] stack; returns [N, ...].
Tensor AccumulateMembrane(const Tensor& stack, int64_t timesteps, float tau_out);
// Gradient of AccumulateMembrane w.r.t. the stack.
Tensor AccumulateMembraneBackward(const Tensor& grad_u, int64_t timesteps,
                                  float tau_out);
// Spike-to-image decoding: tanh of AccumulateMembrane.
Tensor SpikeToImage(const Tensor& stack, int64_t timesteps, float tau_out);
// Gradient of SpikeToImage w.r.t. the stack given the decoded image.
Tensor SpikeToImageBackward(const Tensor& grad_image, const Tensor& image,
                            int64_t timesteps, float tau_out);

// Direct input encoding: the image, unchanged, as input current at every
// timestep. images [N, ...] in [-1, 1] -> [T*N, ...].
Tensor DirectEncode(const Tensor& images, int64_t timesteps);

// Accumulates spike counts per named layer.
class FiringRateRecorder {
 public:
  void Add(const std::string& layer, double spikes, double neuron_steps);
  // Mean spike probability per layer, in insertion order.
  std::vector<std::pair<std::string, double>> Rates() const;
  void Clear() {
    order_.clear();
    totals_.clear();
  }

 private:
  std::vector<std::string> order_;
  std::map<std::string, std::pair<double, double>> totals_;
};

class Fsvae {
 public:
  struct EncoderTrace {
    std::vector<SpikingLayer::Trace> convs;
    SpikingLayer::Trace fc;
  };
  // The output synapse is linear, so it is applied once to the
  // tau_out-weighted spike sum rather than to every frame.
  struct DecoderTrace {
    SpikingLayer::Trace fc;
    std::vector<SpikingLayer::Trace> deconvs;
    LayerCache output;
    Tensor image;
  };
  struct TrainTrace {
    Tensor images;
    EncoderTrace encoder;
    std::vector<SamplerNet::StepTrace> posterior;
    std::vector<SamplerNet::StepTrace> prior;
    LatentSampleRecord q, p;
    DecoderTrace decoder;
    Tensor grad_image, grad_pi_q, grad_pi_p;
    LossBreakdown loss;
    bool valid = false;
  };

  Fsvae(const ModelConfig& config, uint64_t init_seed);
  Fsvae(const Fsvae&) = delete;
  Fsvae& operator=(const Fsvae&) = delete;

  const ModelConfig& config() const { return config_; }

  // images [N, c, H, W] in [-1,1] -> encoder spikes [T*N, C].
  Tensor Encode(const Tensor& images, bool training, EncoderTrace* trace);
  // Latent spikes [T*N, C] -> decoded image [N, c, H, W] in (-1,1).
  Tensor Decode(const Tensor& z, bool training, DecoderTrace* trace);

  // One training forward pass (posterior, teacher-forced prior with
  // scheduled sampling, decoder on z_q) and loss. `rng` is not advanced;
  // per-role child streams are derived from it.
  LossBreakdown TrainForward(const Tensor& images, float p_mix,
                             bool teacher_forcing, const RngStream& rng,
                             TrainTrace& trace);
  // Accumulates parameter gradients for the loss of `trace`.
  void Backward(const TrainTrace& trace);

  // Evaluation-mode reconstruction through the posterior.
  Tensor Reconstruct(const Tensor& images, const RngStream& rng,
                     LatentSampleRecord* latents = nullptr);
  // Samples `n` images from the prior chain.
  Tensor Generate(int64_t n, const RngStream& rng,
                  LatentSampleRecord* latents = nullptr);

  std::vector<Parameter*> Parameters();
  // Parameters and batch-norm running statistics, by name.
  std::vector<std::pair<std::string, Tensor*>> StateTensors();

  // When set, every forward pass adds its per-layer spike counts.
  void set_rate_recorder(FiringRateRecorder* r) { recorder_ = r; }

  SamplerNet& posterior() { return *posterior_; }
  SamplerNet& prior() { return *prior_; }
  std::vector<std::unique_ptr<SpikingLayer>>& encoder_convs() { return enc_convs_; }
  SpikingLayer& encoder_fc() { return *enc_fc_; }
  SpikingLayer& decoder_fc() { return *dec_fc_; }
  std::vector<std::unique_ptr<SpikingLayer>>& decoder_deconvs() { return dec_deconvs_; }
  Conv2dLayer& output_layer() { return *output_; }

 private:
  void Record(const std::string& name, const Tensor& spikes);
  void RecordSampler(const SamplerNet& net);

  ModelConfig config_;
  std::vector<std::unique_ptr<SpikingLayer>> enc_convs_;
  std::unique_ptr<SpikingLayer> enc_fc_;
  std::unique_ptr<SamplerNet> posterior_;
  std::unique_ptr<SamplerNet> prior_;
  std::unique_ptr<SpikingLayer> dec_fc_;
  std::vector<std::unique_ptr<SpikingLayer>> dec_deconvs_;
  std::unique_ptr<Conv2dLayer> output_;
  FiringRateRecorder* recorder_ = nullptr;
};

// Stream ids of the per-role children used by TrainForward / Reconstruct /
// Generate.
inline constexpr uint64_t kPosteriorStream = 1;
inline constexpr uint64_t kPriorStream = 2;
inline constexpr uint64_t kMixStream = 3;

}  // namespace fsvae

#endif  // FSVAE_MODEL_H_
