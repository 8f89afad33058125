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

#include "fsvae/model.h"

#include <algorithm>
#include <cmath>

#include "fsvae/errors.h"

namespace fsvae {

void ModelConfig::Validate() const {
  latent.Validate();
  lif.Validate();
  if (channels.empty()) throw ConfigError("channels must list at least one width");
  for (int64_t c : channels) {
    if (c < 1) throw ConfigError("channel widths must be >= 1");
  }
  if (image_channels < 1) throw ConfigError("image_channels must be >= 1");
  const int64_t factor = int64_t{1} << channels.size();
  if (image_size < factor || image_size % factor != 0) {
    throw ConfigError("image_size " + std::to_string(image_size) +
                      " is not divisible by 2^" + std::to_string(channels.size()));
  }
  if (posterior_hidden < 1 || prior_hidden < 1) {
    throw ConfigError("sampler hidden widths must be >= 1");
  }
  if (!(tau_out > 0.0f && tau_out <= 1.0f)) throw ConfigError("tau_out must lie in (0,1]");
  if (!(tau_syn >= 1.0f)) throw ConfigError("tau_syn must be >= 1");
  if (!(dist_weight >= 0.0f && std::isfinite(dist_weight))) {
    throw ConfigError("dist_weight must be finite and >= 0");
  }
}

int64_t ModelConfig::bottleneck_size() const {
  return image_size >> channels.size();
}

std::vector<std::string> ModelConfig::Diff(const ModelConfig& o) const {
  std::vector<std::string> d;
  if (image_size != o.image_size) d.push_back("image_size");
  if (image_channels != o.image_channels) d.push_back("image_channels");
  if (channels != o.channels) d.push_back("channels");
  if (latent.channels != o.latent.channels) d.push_back("latent_dim");
  if (latent.k != o.latent.k) d.push_back("k");
  if (latent.timesteps != o.latent.timesteps) d.push_back("timesteps");
  if (posterior_hidden != o.posterior_hidden) d.push_back("posterior_hidden");
  if (prior_hidden != o.prior_hidden) d.push_back("prior_hidden");
  if (lif.tau_decay != o.lif.tau_decay) d.push_back("tau_decay");
  if (lif.v_th != o.lif.v_th) d.push_back("v_th");
  if (lif.surrogate_width != o.lif.surrogate_width) d.push_back("surrogate_width");
  if (tau_out != o.tau_out) d.push_back("tau_out");
  if (tau_syn != o.tau_syn) d.push_back("tau_syn");
  if (loss != o.loss) d.push_back("loss");
  if (dist_weight != o.dist_weight) d.push_back("dist_weight");
  if (straight_through != o.straight_through) d.push_back("straight_through");
  return d;
}

void OutputAccumulator::Accumulate(const Tensor& x_t) {
  if (x_t.shape() != u_.shape()) {
    throw ShapeError("output accumulator: input " + ShapeString(x_t.shape()) +
                     " vs state " + ShapeString(u_.shape()));
  }
  for (int64_t i = 0; i < u_.size(); ++i) u_[i] = tau_out_ * u_[i] + x_t[i];
  u_.CheckFinite("output membrane");
}

Tensor AccumulateMembrane(const Tensor& stack, int64_t timesteps,
                          float tau_out) {
  Shape s = stack.shape();
  if (s.empty() || timesteps < 1 || s[0] % timesteps != 0) {
    throw ShapeError("spike_to_image: " + ShapeString(s) + " is not " +
                     std::to_string(timesteps) + " stacked frames");
  }
  s[0] /= timesteps;
  Tensor u(s);
  const int64_t frame = u.size();
  for (int64_t t = 0; t < timesteps; ++t)
    for (int64_t i = 0; i < frame; ++i) u[i] = tau_out * u[i] + stack[t * frame + i];
  return u;
}

Tensor SpikeToImage(const Tensor& stack, int64_t timesteps, float tau_out) {
  return Tanh(AccumulateMembrane(stack, timesteps, tau_out));
}

Tensor AccumulateMembraneBackward(const Tensor& grad_u, int64_t timesteps,
                                  float tau_out) {
  Shape s = grad_u.shape();
  if (s.empty() || timesteps < 1) {
    throw ShapeError("accumulate backward: bad gradient " + ShapeString(s));
  }
  s[0] *= timesteps;
  Tensor g(s);
  const int64_t frame = grad_u.size();
  float decay = 1.0f;
  for (int64_t t = timesteps - 1; t >= 0; --t) {
    for (int64_t i = 0; i < frame; ++i) g[t * frame + i] = decay * grad_u[i];
    decay *= tau_out;
  }
  return g;
}

Tensor SpikeToImageBackward(const Tensor& grad_image, const Tensor& image,
                            int64_t timesteps, float tau_out) {
  if (grad_image.shape() != image.shape()) {
    throw ShapeError("spike_to_image backward: " +
                     ShapeString(grad_image.shape()) + " vs " +
                     ShapeString(image.shape()));
  }
  Tensor gu(image.shape());
  for (int64_t i = 0; i < gu.size(); ++i) {
    gu[i] = grad_image[i] * (1.0f - image[i] * image[i]);
  }
  return AccumulateMembraneBackward(gu, timesteps, tau_out);
}

Tensor DirectEncode(const Tensor& images, int64_t timesteps) {
  if (timesteps < 1) throw ConfigError("direct_encode: timesteps must be >= 1");
  for (float v : images.values()) {
    if (!(v >= -1.0f && v <= 1.0f)) {
      throw ConfigError("direct_encode: pixel " + std::to_string(v) +
                        " outside [-1,1]");
    }
  }
  return RepeatFrames(images, timesteps);
}

void FiringRateRecorder::Add(const std::string& layer, double spikes,
                             double neuron_steps) {
  auto [it, inserted] = totals_.try_emplace(layer, 0.0, 0.0);
  if (inserted) order_.push_back(layer);
  it->second.first += spikes;
  it->second.second += neuron_steps;
}

std::vector<std::pair<std::string, double>> FiringRateRecorder::Rates() const {
  std::vector<std::pair<std::string, double>> out;
  for (const auto& name : order_) {
    const auto& [s, n] = totals_.at(name);
    out.emplace_back(name, n > 0 ? s / n : 0.0);
  }
  return out;
}

Fsvae::Fsvae(const ModelConfig& config, uint64_t init_seed) : config_(config) {
  config_.Validate();
  RngStream init(init_seed, /*stream=*/0x1417);
  const float relu_gain = std::sqrt(2.0f);
  const auto& ch = config_.channels;
  const int64_t L = static_cast<int64_t>(ch.size());
  const int64_t s = config_.bottleneck_size();
  const int64_t C = config_.latent.channels;
  const ConvParams down{2, 1, 0};
  const ConvParams up{2, 1, 1};

  int64_t in_c = config_.image_channels;
  for (int64_t i = 0; i < L; ++i) {
    const std::string name = "encoder.conv" + std::to_string(i);
    enc_convs_.push_back(std::make_unique<SpikingLayer>(
        name,
        std::make_unique<Conv2dLayer>(name, in_c, ch[static_cast<size_t>(i)], 3,
                                      down, false, relu_gain, init),
        ch[static_cast<size_t>(i)], config_.lif));
    in_c = ch[static_cast<size_t>(i)];
  }
  const int64_t flat = ch.back() * s * s;
  enc_fc_ = std::make_unique<SpikingLayer>(
      "encoder.fc",
      std::make_unique<Linear>("encoder.fc", flat, C, false, relu_gain, init), C,
      config_.lif);
  posterior_ = std::make_unique<SamplerNet>("posterior", 2 * C,
                                            config_.posterior_hidden,
                                            config_.latent, config_.lif, init);
  prior_ = std::make_unique<SamplerNet>("prior", C, config_.prior_hidden,
                                        config_.latent, config_.lif, init);
  dec_fc_ = std::make_unique<SpikingLayer>(
      "decoder.fc",
      std::make_unique<Linear>("decoder.fc", C, flat, false, relu_gain, init),
      flat, config_.lif);
  // The BN above normalizes per flattened unit; the deconvs work per channel.
  for (int64_t i = 0; i < L; ++i) {
    const int64_t cin = ch[static_cast<size_t>(L - 1 - i)];
    const int64_t cout = i + 1 < L ? ch[static_cast<size_t>(L - 2 - i)] : ch.front();
    const std::string name = "decoder.deconv" + std::to_string(i);
    dec_deconvs_.push_back(std::make_unique<SpikingLayer>(
        name,
        std::make_unique<ConvTranspose2dLayer>(name, cin, cout, 3, up, false,
                                               relu_gain, init),
        cout, config_.lif));
  }
  output_ = std::make_unique<Conv2dLayer>("decoder.output", ch.front(),
                                          config_.image_channels, 3,
                                          ConvParams{1, 1, 0}, true, 1.0f, init);
}

void Fsvae::Record(const std::string& name, const Tensor& spikes) {
  if (!recorder_) return;
  recorder_->Add(name, SumAll(spikes), static_cast<double>(spikes.size()));
}

void Fsvae::RecordSampler(const SamplerNet& net) {
  if (!recorder_) return;
  for (int i = 0; i < SamplerNet::kLayers; ++i) {
    recorder_->Add(net.LayerName(i), net.spike_totals()[static_cast<size_t>(i)],
                   net.step_totals()[static_cast<size_t>(i)]);
  }
}

Tensor Fsvae::Encode(const Tensor& images, bool training, EncoderTrace* trace) {
  const ModelConfig& c = config_;
  const Shape expected{images.rank() > 0 ? images.dim(0) : 0, c.image_channels,
                       c.image_size, c.image_size};
  if (images.shape() != expected || expected[0] < 1) {
    throw ShapeError("encode: images " + ShapeString(images.shape()) +
                     ", expected [N," + std::to_string(c.image_channels) + "," +
                     std::to_string(c.image_size) + "," +
                     std::to_string(c.image_size) + "]");
  }
  for (float v : images.values()) {
    if (!(v >= -1.0f && v <= 1.0f)) {
      throw ConfigError("encode: pixel " + std::to_string(v) + " outside [-1,1]");
    }
  }
  const int64_t T = c.latent.timesteps;
  if (trace) trace->convs.assign(enc_convs_.size(), {});
  Tensor h = images;
  for (size_t i = 0; i < enc_convs_.size(); ++i) {
    // The first layer sees the same real-valued frame at every timestep.
    h = enc_convs_[i]->Forward(h, T, /*time_invariant=*/i == 0, training,
                               trace ? &trace->convs[i] : nullptr);
    Record(enc_convs_[i]->name(), h);
  }
  h = enc_fc_->Forward(h, T, false, training, trace ? &trace->fc : nullptr);
  Record(enc_fc_->name(), h);
  return h;
}

Tensor Fsvae::Decode(const Tensor& z, bool training, DecoderTrace* trace) {
  const ModelConfig& c = config_;
  const int64_t T = c.latent.timesteps;
  if (z.rank() != 2 || z.dim(1) != c.latent.channels || z.dim(0) % T != 0 ||
      z.dim(0) == 0) {
    throw ShapeError("decode: z " + ShapeString(z.shape()) + ", expected [T*N," +
                     std::to_string(c.latent.channels) + "] with T=" +
                     std::to_string(T));
  }
  const int64_t s = c.bottleneck_size();
  Tensor h = dec_fc_->Forward(z, T, false, training, trace ? &trace->fc : nullptr);
  Record(dec_fc_->name(), h);
  h.Reshape({h.dim(0), c.channels.back(), s, s});
  if (trace) trace->deconvs.assign(dec_deconvs_.size(), {});
  for (size_t i = 0; i < dec_deconvs_.size(); ++i) {
    h = dec_deconvs_[i]->Forward(h, T, false, training,
                                 trace ? &trace->deconvs[i] : nullptr);
    Record(dec_deconvs_[i]->name(), h);
  }
  Tensor summed = AccumulateMembrane(h, T, c.tau_out);
  Tensor image = Tanh(output_->Forward(summed, trace ? &trace->output : nullptr));
  image.CheckFinite("decoded image");
  if (trace) trace->image = image;
  return image;
}

LossBreakdown Fsvae::TrainForward(const Tensor& images, float p_mix,
                                  bool teacher_forcing, const RngStream& rng,
                                  TrainTrace& trace) {
  const ModelConfig& c = config_;
  const int64_t T = c.latent.timesteps, C = c.latent.channels;
  trace = TrainTrace{};
  trace.images = images;
  const int64_t N = images.rank() > 0 ? images.dim(0) : 0;
  Tensor encoded = Encode(images, true, &trace.encoder);

  RngStream rq = rng.Child(kPosteriorStream);
  RngStream rp = rng.Child(kPriorStream);
  RngStream rm = rng.Child(kMixStream);
  posterior_->Reset(N);
  prior_->Reset(N);
  trace.posterior.assign(static_cast<size_t>(T), {});
  trace.prior.assign(static_cast<size_t>(T), {});
  trace.q = MakeRecord(T, N, c.latent);
  trace.p = MakeRecord(T, N, c.latent);

  Tensor zq_prev({N, C}), zp_prev({N, C}), frame({N, C});
  Tensor zq_stack({T * N, C});
  for (int64_t t = 0; t < T; ++t) {
    const size_t ts = static_cast<size_t>(t);
    std::copy_n(encoded.data() + t * N * C, N * C, frame.data());
    LatentStep sq = PosteriorStep(*posterior_, zq_prev, frame, rq, true,
                                  &trace.posterior[ts]);
    Tensor prior_in = zp_prev;
    if (t > 0 && teacher_forcing) prior_in = ScheduledMix(zq_prev, zp_prev, p_mix, rm);
    LatentStep sp = PriorStep(*prior_, prior_in, rp, true, &trace.prior[ts]);
    StoreStep(sq, t, trace.q);
    StoreStep(sp, t, trace.p);
    std::copy_n(sq.z.data(), N * C, zq_stack.data() + t * N * C);
    zq_prev = std::move(sq.z);
    zp_prev = std::move(sp.z);
  }
  RecordSampler(*posterior_);
  RecordSampler(*prior_);

  Tensor image = Decode(zq_stack, true, &trace.decoder);
  trace.loss = ElboLoss(images, image, trace.q.pi.pi, trace.p.pi.pi, c.loss,
                        c.tau_syn, &trace.grad_image, &trace.grad_pi_q,
                        &trace.grad_pi_p, c.dist_weight);
  if (!std::isfinite(trace.loss.total)) {
    throw NumericError("non-finite loss (recon " + std::to_string(trace.loss.recon) +
                       ", dist " + std::to_string(trace.loss.dist) + ")");
  }
  trace.valid = true;
  return trace.loss;
}

void Fsvae::Backward(const TrainTrace& trace) {
  if (!trace.valid) throw Error("Fsvae::Backward without a forward trace");
  const ModelConfig& c = config_;
  const int64_t T = c.latent.timesteps, C = c.latent.channels, k = c.latent.k;
  const int64_t N = trace.images.dim(0);
  const bool st = c.straight_through;

  // Decoder: image -> output membrane -> spike sum -> spiking stack -> z_q.
  const DecoderTrace& dt = trace.decoder;
  Tensor g(dt.image.shape());
  for (int64_t i = 0; i < g.size(); ++i) {
    g[i] = trace.grad_image[i] * (1.0f - dt.image[i] * dt.image[i]);
  }
  g = AccumulateMembraneBackward(output_->Backward(g, dt.output, true), T,
                                 c.tau_out);
  for (size_t i = dec_deconvs_.size(); i-- > 0;) {
    g = dec_deconvs_[i]->Backward(g, dt.deconvs[i], true);
  }
  g.Reshape(dt.fc.u.shape());
  Tensor grad_z = dec_fc_->Backward(g, dt.fc, st);

  // Posterior BPTT. The z_{t-1} input slot passes its gradient back to the
  // element of zeta_{t-1} that was selected.
  SamplerNet::Carry carry_q;
  Tensor grad_encoded({T * N, C});
  Tensor grad_zin({N, C});
  const float inv_k = 1.0f / static_cast<float>(k);
  for (int64_t t = T - 1; t >= 0; --t) {
    Tensor gz({N, k * C});
    for (int64_t n = 0; n < N; ++n) {
      for (int64_t ch = 0; ch < C; ++ch) {
        const int64_t idx = (t * N + n) * C + ch;
        const float base = trace.grad_pi_q[idx] * inv_k;
        float* block = gz.data() + n * k * C + ch * k;
        for (int64_t j = 0; j < k; ++j) block[j] = base;
        if (st) {
          block[trace.q.chosen[static_cast<size_t>(idx)]] +=
              grad_z[idx] + grad_zin[n * C + ch];
        }
      }
    }
    Tensor gin = posterior_->BackwardStep(gz, trace.posterior[static_cast<size_t>(t)],
                                          carry_q, true);
    for (int64_t n = 0; n < N; ++n) {
      std::copy_n(gin.data() + n * 2 * C, C, grad_zin.data() + n * C);
      std::copy_n(gin.data() + n * 2 * C + C, C, grad_encoded.data() + (t * N + n) * C);
    }
  }

  // Prior: its inputs are treated as constants.
  SamplerNet::Carry carry_p;
  for (int64_t t = T - 1; t >= 0; --t) {
    Tensor gz({N, k * C});
    for (int64_t n = 0; n < N; ++n)
      for (int64_t ch = 0; ch < C; ++ch) {
        const float base = trace.grad_pi_p[(t * N + n) * C + ch] * inv_k;
        std::fill_n(gz.data() + n * k * C + ch * k, k, base);
      }
    prior_->BackwardStep(gz, trace.prior[static_cast<size_t>(t)], carry_p, false);
  }

  // Encoder.
  const EncoderTrace& et = trace.encoder;
  g = enc_fc_->Backward(grad_encoded, et.fc, true);
  for (size_t i = enc_convs_.size(); i-- > 0;) {
    g = enc_convs_[i]->Backward(g, et.convs[i], i > 0);
  }
}

Tensor Fsvae::Reconstruct(const Tensor& images, const RngStream& rng,
                          LatentSampleRecord* latents) {
  const int64_t N = images.rank() > 0 ? images.dim(0) : 0;
  Tensor encoded = Encode(images, false, nullptr);
  RngStream rq = rng.Child(kPosteriorStream);
  LatentSampleRecord rec = SamplePosterior(*posterior_, encoded, N, rq, false, nullptr);
  RecordSampler(*posterior_);
  Tensor z = rec.z.ToTensor();
  z.Reshape({config_.latent.timesteps * N, config_.latent.channels});
  if (latents) *latents = std::move(rec);
  return Decode(z, false, nullptr);
}

Tensor Fsvae::Generate(int64_t n, const RngStream& rng,
                       LatentSampleRecord* latents) {
  if (n < 1) throw ConfigError("generate: need at least one sample");
  RngStream rp = rng.Child(kPriorStream);
  LatentSampleRecord rec =
      SamplePrior(*prior_, config_.latent.timesteps, n, rp, false);
  RecordSampler(*prior_);
  Tensor z = rec.z.ToTensor();
  z.Reshape({config_.latent.timesteps * n, config_.latent.channels});
  if (latents) *latents = std::move(rec);
  return Decode(z, false, nullptr);
}

std::vector<Parameter*> Fsvae::Parameters() {
  std::vector<Parameter*> out;
  auto add = [&out](std::vector<Parameter*> ps) {
    out.insert(out.end(), ps.begin(), ps.end());
  };
  for (auto& l : enc_convs_) add(l->Parameters());
  add(enc_fc_->Parameters());
  add(posterior_->Parameters());
  add(prior_->Parameters());
  add(dec_fc_->Parameters());
  for (auto& l : dec_deconvs_) add(l->Parameters());
  add(output_->Parameters());
  return out;
}

std::vector<std::pair<std::string, Tensor*>> Fsvae::StateTensors() {
  std::vector<std::pair<std::string, Tensor*>> out;
  for (Parameter* p : Parameters()) out.emplace_back(p->name, &p->value);
  std::vector<TdBatchNorm*> norms;
  for (auto& l : enc_convs_) norms.push_back(&l->bn());
  norms.push_back(&enc_fc_->bn());
  for (TdBatchNorm* b : posterior_->Norms()) norms.push_back(b);
  for (TdBatchNorm* b : prior_->Norms()) norms.push_back(b);
  norms.push_back(&dec_fc_->bn());
  for (auto& l : dec_deconvs_) norms.push_back(&l->bn());
  for (TdBatchNorm* b : norms) {
    out.emplace_back(b->name() + ".running_mean", &b->running_mean());
    out.emplace_back(b->name() + ".running_var", &b->running_var());
  }
  return out;
}

}  // namespace fsvae
