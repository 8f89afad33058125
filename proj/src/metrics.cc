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

#include "fsvae/metrics.h"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>

#include "fsvae/adamw.h"
#include "fsvae/errors.h"
#include "fsvae/losses.h"

namespace fsvae {
namespace {

using MatrixD = Eigen::MatrixXd;
using VectorD = Eigen::VectorXd;

void Moments(const Tensor& f, VectorD& mean, MatrixD& cov) {
  const int64_t n = f.dim(0), d = f.dim(1);
  MatrixD x(n, d);
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < d; ++j) x(i, j) = f[i * d + j];
  mean = x.colwise().mean().transpose();
  x.rowwise() -= mean.transpose();
  cov = (x.transpose() * x) / static_cast<double>(n - 1);
}

// Eigenvalues of a symmetric matrix with tiny negative ones set to zero.
VectorD ClampedEigenvalues(const Eigen::SelfAdjointEigenSolver<MatrixD>& es,
                           const char* what) {
  if (es.info() != Eigen::Success) {
    throw NumericError(std::string("frechet: eigendecomposition of ") + what +
                       " failed");
  }
  VectorD ev = es.eigenvalues();
  const double largest = std::max(1.0, ev.cwiseAbs().maxCoeff());
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev(i) < 0.0) {
      if (ev(i) < -1e-6 * largest) {
        char buf[160];
        std::snprintf(buf, sizeof buf,
                      "frechet: %s is not PSD (eigenvalue %.3e, range [%.3e, %.3e])",
                      what, ev(i), ev.minCoeff(), ev.maxCoeff());
        throw NumericError(buf);
      }
      ev(i) = 0.0;
    }
  }
  return ev;
}

// tr((A B)^(1/2)) = tr((A^(1/2) B A^(1/2))^(1/2)) for PSD A, B.
double TraceSqrtProduct(const MatrixD& a, const MatrixD& b) {
  Eigen::SelfAdjointEigenSolver<MatrixD> ea(a);
  const VectorD la = ClampedEigenvalues(ea, "covariance");
  const MatrixD root = ea.eigenvectors() * la.cwiseSqrt().asDiagonal() *
                       ea.eigenvectors().transpose();
  MatrixD m = root * b * root;
  m = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<MatrixD> em(m, Eigen::EigenvaluesOnly);
  return ClampedEigenvalues(em, "covariance product").cwiseSqrt().sum();
}

void Relu(Tensor& t) {
  for (float& v : t.values()) v = std::max(v, 0.0f);
}

// Zeroes gradient where the ReLU output was 0.
void ReluBackward(Tensor& g, const Tensor& out) {
  for (int64_t i = 0; i < g.size(); ++i) {
    if (out[i] <= 0.0f) g[i] = 0.0f;
  }
}

constexpr int64_t kAeWidths[3] = {32, 64, 128};

}  // namespace

double FrechetDistance(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(1)) {
    throw ShapeError("frechet: feature sets " + ShapeString(a.shape()) + " and " +
                     ShapeString(b.shape()) + " must be [N, D] with equal D");
  }
  if (a.dim(0) < 2 || b.dim(0) < 2) {
    throw ShapeError("frechet: need at least 2 samples per side");
  }
  a.CheckFinite("frechet features");
  b.CheckFinite("frechet features");
  VectorD ma, mb;
  MatrixD ca, cb;
  Moments(a, ma, ca);
  Moments(b, mb, cb);
  // Both orderings agree mathematically; averaging makes the result
  // exactly symmetric in floating point as well.
  const double cross = 0.5 * (TraceSqrtProduct(ca, cb) + TraceSqrtProduct(cb, ca));
  const double d = (ma - mb).squaredNorm() + (ca.trace() + cb.trace()) - 2.0 * cross;
  return std::max(d, 0.0);
}

double ReconstructionLoss(const std::function<Tensor(const Tensor&)>& reconstruct,
                          const Tensor& images, int64_t batch) {
  if (images.rank() < 1 || images.dim(0) == 0) {
    throw ShapeError("reconstruction loss: empty evaluation set");
  }
  if (batch < 1) throw ConfigError("reconstruction loss: batch must be >= 1");
  const int64_t n = images.dim(0), img = images.size() / n;
  double total = 0.0;
  for (int64_t b0 = 0; b0 < n; b0 += batch) {
    const int64_t nb = std::min(batch, n - b0);
    Shape s = images.shape();
    s[0] = nb;
    Tensor x(s, std::vector<float>(images.data() + b0 * img,
                                   images.data() + (b0 + nb) * img));
    total += static_cast<double>(MseLoss(x, reconstruct(x), nullptr)) *
             static_cast<double>(nb);
  }
  return total / static_cast<double>(n);
}

double ReconstructionLoss(Fsvae& model, const Tensor& images, int64_t batch,
                          const RngStream& rng) {
  uint64_t call = 0;
  return ReconstructionLoss(
      [&](const Tensor& x) { return model.Reconstruct(x, rng.Child(call++)); },
      images, batch);
}

double MeanImageBaselineMse(const Tensor& reference, const Tensor& images) {
  if (reference.dim(0) == 0 || images.dim(0) == 0) {
    throw ShapeError("baseline: empty image set");
  }
  const int64_t img = reference.size() / reference.dim(0);
  if (images.size() / images.dim(0) != img) {
    throw ShapeError("baseline: image sizes differ: " + ShapeString(reference.shape()) +
                     " vs " + ShapeString(images.shape()));
  }
  std::vector<double> mean(static_cast<size_t>(img), 0.0);
  for (int64_t i = 0; i < reference.size(); ++i) mean[static_cast<size_t>(i % img)] += reference[i];
  for (double& m : mean) m /= static_cast<double>(reference.dim(0));
  double s = 0.0;
  for (int64_t i = 0; i < images.size(); ++i) {
    const double d = images[i] - mean[static_cast<size_t>(i % img)];
    s += d * d;
  }
  return s / static_cast<double>(images.size());
}

// ---- EvalAutoencoder ----

struct EvalAutoencoder::Pass {
  LayerCache conv[3], enc_fc, dec_fc, deconv[3];
  Tensor conv_out[3], dec_fc_out, deconv_out[3];
};

EvalAutoencoder::EvalAutoencoder(int64_t image_size, int64_t latent, uint64_t seed)
    : image_size_(image_size), latent_(latent) {
  if (image_size % 8 != 0 || image_size < 8) {
    throw ConfigError("eval autoencoder: image size must be a multiple of 8");
  }
  if (latent < 1) throw ConfigError("eval autoencoder: latent must be >= 1");
  RngStream init(seed, 0xAE);
  const float gain = std::sqrt(2.0f);
  const ConvParams down{2, 1, 0}, up{2, 1, 1};
  convs_.reserve(3);
  deconvs_.reserve(3);
  int64_t in = 1;
  for (int i = 0; i < 3; ++i) {
    convs_.emplace_back("ae.conv" + std::to_string(i), in, kAeWidths[i], 3, down,
                        true, gain, init);
    in = kAeWidths[i];
  }
  const int64_t s = image_size / 8, flat = kAeWidths[2] * s * s;
  enc_fc_ = std::make_unique<Linear>("ae.enc_fc", flat, latent, true, 1.0f, init);
  dec_fc_ = std::make_unique<Linear>("ae.dec_fc", latent, flat, true, gain, init);
  for (int i = 0; i < 3; ++i) {
    const int64_t cin = kAeWidths[2 - i], cout = i < 2 ? kAeWidths[1 - i] : 1;
    deconvs_.emplace_back("ae.deconv" + std::to_string(i), cin, cout, 3, up, true,
                          i < 2 ? gain : 1.0f, init);
  }
}

Tensor EvalAutoencoder::EncodeImpl(const Tensor& images, Pass* pass) const {
  const Shape expected{images.rank() == 4 ? images.dim(0) : 0, 1, image_size_, image_size_};
  if (images.shape() != expected) {
    throw ShapeError("eval autoencoder: images " + ShapeString(images.shape()) +
                     ", expected [N,1," + std::to_string(image_size_) + "," +
                     std::to_string(image_size_) + "]");
  }
  Tensor h = images;
  for (int i = 0; i < 3; ++i) {
    h = convs_[static_cast<size_t>(i)].Forward(h, pass ? &pass->conv[i] : nullptr);
    Relu(h);
    if (pass) pass->conv_out[i] = h;
  }
  return enc_fc_->Forward(h, pass ? &pass->enc_fc : nullptr);
}

Tensor EvalAutoencoder::DecodeImpl(const Tensor& code, Pass* pass) const {
  const int64_t s = image_size_ / 8;
  Tensor h = dec_fc_->Forward(code, pass ? &pass->dec_fc : nullptr);
  Relu(h);
  if (pass) pass->dec_fc_out = h;
  h.Reshape({code.dim(0), kAeWidths[2], s, s});
  for (int i = 0; i < 3; ++i) {
    h = deconvs_[static_cast<size_t>(i)].Forward(h, pass ? &pass->deconv[i] : nullptr);
    if (i < 2) Relu(h);
    else h = Tanh(h);
    if (pass) pass->deconv_out[i] = h;
  }
  return h;
}

Tensor EvalAutoencoder::Encode(const Tensor& images) const {
  return EncodeImpl(images, nullptr);
}

Tensor EvalAutoencoder::Reconstruct(const Tensor& images) const {
  return DecodeImpl(EncodeImpl(images, nullptr), nullptr);
}

void EvalAutoencoder::Backward(const Tensor& grad_out, const Pass& pass) {
  Tensor g = grad_out;
  const Tensor& y = pass.deconv_out[2];
  for (int64_t i = 0; i < g.size(); ++i) g[i] *= 1.0f - y[i] * y[i];
  for (int i = 2; i >= 0; --i) {
    if (i < 2) ReluBackward(g, pass.deconv_out[i]);
    g = deconvs_[static_cast<size_t>(i)].Backward(g, pass.deconv[i], true);
  }
  g.Reshape(pass.dec_fc_out.shape());
  ReluBackward(g, pass.dec_fc_out);
  g = dec_fc_->Backward(g, pass.dec_fc, true);
  g = enc_fc_->Backward(g, pass.enc_fc, true);
  g.Reshape(pass.conv_out[2].shape());
  for (int i = 2; i >= 0; --i) {
    ReluBackward(g, pass.conv_out[i]);
    g = convs_[static_cast<size_t>(i)].Backward(g, pass.conv[i], i > 0);
  }
}

std::vector<Parameter*> EvalAutoencoder::Parameters() {
  std::vector<Parameter*> out;
  auto add = [&out](std::vector<Parameter*> ps) { out.insert(out.end(), ps.begin(), ps.end()); };
  for (auto& c : convs_) add(c.Parameters());
  add(enc_fc_->Parameters());
  add(dec_fc_->Parameters());
  for (auto& d : deconvs_) add(d.Parameters());
  return out;
}

std::vector<double> EvalAutoencoder::Train(const Tensor& images, int64_t epochs,
                                           int64_t batch, uint64_t seed) {
  if (epochs < 1 || batch < 1) throw ConfigError("eval autoencoder: bad schedule");
  const int64_t n = images.dim(0);
  const int64_t batches = std::max<int64_t>(1, n / batch);
  const int64_t bs = std::min(batch, n);
  const int64_t img = images.size() / n;
  std::vector<Parameter*> params = Parameters();
  AdamW opt(params, AdamWOptions{1e-3f, 0.0f, 0.9f, 0.999f, 1e-8f});
  std::vector<double> history;
  std::vector<int64_t> order(static_cast<size_t>(n));
  Tensor x({bs, 1, image_size_, image_size_});
  for (int64_t e = 0; e < epochs; ++e) {
    for (int64_t i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;
    RngStream shuffle = RngStream(seed, 0xAE5).Child(static_cast<uint64_t>(e));
    for (int64_t i = n - 1; i > 0; --i) {
      std::swap(order[static_cast<size_t>(i)],
                order[shuffle.UniformInt(static_cast<uint64_t>(i + 1))]);
    }
    double total = 0.0;
    for (int64_t b = 0; b < batches; ++b) {
      for (int64_t i = 0; i < bs; ++i) {
        std::copy_n(images.data() + order[static_cast<size_t>(b * bs + i)] * img, img,
                    x.data() + i * img);
      }
      Pass pass;
      Tensor y = DecodeImpl(EncodeImpl(x, &pass), &pass);
      Tensor g;
      total += MseLoss(x, y, &g);
      opt.ZeroGrad();
      Backward(g, pass);
      opt.Step();
    }
    history.push_back(total / static_cast<double>(batches));
  }
  return history;
}

Checkpoint EvalAutoencoder::Save() const {
  Checkpoint c;
  c.meta["kind"] = "eval_autoencoder";
  c.meta["image_size"] = std::to_string(image_size_);
  c.meta["latent"] = std::to_string(latent_);
  for (Parameter* p : const_cast<EvalAutoencoder*>(this)->Parameters()) {
    c.tensors.emplace_back(p->name, p->value);
  }
  return c;
}

std::unique_ptr<EvalAutoencoder> EvalAutoencoder::Load(const Checkpoint& ckpt) {
  auto kind = ckpt.meta.find("kind");
  if (kind == ckpt.meta.end() || kind->second != "eval_autoencoder") {
    throw FormatError("not an eval autoencoder checkpoint");
  }
  auto ae = std::make_unique<EvalAutoencoder>(std::stoll(ckpt.meta.at("image_size")),
                                              std::stoll(ckpt.meta.at("latent")), 0);
  for (Parameter* p : ae->Parameters()) {
    const Tensor* t = ckpt.Find(p->name);
    if (!t || t->shape() != p->value.shape()) {
      throw FormatError("eval autoencoder checkpoint: bad or missing '" + p->name + "'");
    }
    p->value = *t;
  }
  return ae;
}

std::vector<std::pair<std::string, double>> FiringRateReport(Fsvae& model,
                                                             const Tensor& images,
                                                             int64_t batch,
                                                             const RngStream& rng) {
  if (images.dim(0) == 0) throw ShapeError("firing rates: empty image set");
  FiringRateRecorder rec;
  model.set_rate_recorder(&rec);
  try {
    const int64_t n = images.dim(0), img = images.size() / n;
    uint64_t call = 0;
    for (int64_t b0 = 0; b0 < n; b0 += batch) {
      const int64_t nb = std::min(batch, n - b0);
      Shape s = images.shape();
      s[0] = nb;
      Tensor x(s, std::vector<float>(images.data() + b0 * img,
                                     images.data() + (b0 + nb) * img));
      model.Reconstruct(x, rng.Child(call++));
      model.Generate(nb, rng.Child(call++));
    }
  } catch (...) {
    model.set_rate_recorder(nullptr);
    throw;
  }
  model.set_rate_recorder(nullptr);
  return rec.Rates();
}

std::string FiringRateCsv(const std::vector<std::pair<std::string, double>>& rates) {
  std::string s = "layer,rate\n";
  char buf[64];
  for (const auto& [name, r] : rates) {
    std::snprintf(buf, sizeof buf, "%.6f", r);
    s += name + "," + buf + "\n";
  }
  return s;
}

EvalResult EvaluateModel(Fsvae& model, const Tensor& train, const Tensor& test,
                         const EvalAutoencoder& ae, int64_t samples, int64_t batch,
                         const RngStream& rng) {
  EvalResult r;
  r.recon = ReconstructionLoss(model, test, batch, rng.Child(1));
  r.baseline = MeanImageBaselineMse(train, test);
  const int64_t n = std::min(samples, test.dim(0));
  if (n < 2) throw ShapeError("evaluate: need at least 2 test images");
  const int64_t img = test.size() / test.dim(0);
  Shape s = test.shape();
  s[0] = n;
  Tensor real(s, std::vector<float>(test.data(), test.data() + n * img));
  Tensor generated(s);
  RngStream gen = rng.Child(2);
  for (int64_t b0 = 0, call = 0; b0 < n; b0 += batch, ++call) {
    const int64_t nb = std::min(batch, n - b0);
    Tensor g = model.Generate(nb, gen.Child(static_cast<uint64_t>(call)));
    std::copy_n(g.data(), nb * img, generated.data() + b0 * img);
  }
  r.frechet = FrechetDistance(ae.Encode(real), ae.Encode(generated));
  return r;
}

std::string MetricsCsv(const std::vector<std::pair<std::string, double>>& metrics) {
  std::string s = "metric,value\n";
  char buf[64];
  for (const auto& [name, v] : metrics) {
    std::snprintf(buf, sizeof buf, "%.9g", v);
    s += name + "," + buf + "\n";
  }
  return s;
}

}  // namespace fsvae
