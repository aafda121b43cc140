#pragma once

// Residual convolutional denoiser: the network predicts the noise and the
// denoised image is input minus prediction, clamped to [0,1]. One archive is
// trained per noise level and then frozen; inference is pure and safe to run
// concurrently on shared weights.

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "denfuse/archive.hpp"
#include "denfuse/autograd.hpp"
#include "denfuse/errors.hpp"
#include "denfuse/optimizer.hpp"
#include "denfuse/rng.hpp"
#include "denfuse/tensor.hpp"

namespace denfuse {

struct DenoiserSpec {
  int depth = 7;        // number of conv layers; ReLU after all but the last
  int channels = 32;
  int kernel_size = 3;
  bool residual = true;

  void validate() const {
    if (depth < 2) throw std::invalid_argument("denoiser depth must be >= 2");
    if (channels < 1) throw std::invalid_argument("denoiser channels must be >= 1");
    if (kernel_size < 1 || kernel_size % 2 == 0) {
      throw std::invalid_argument("denoiser kernel size must be odd and positive");
    }
    if (!residual) throw std::invalid_argument("only the residual formulation is supported");
  }
};

// clean + N(0, (sigma/255)^2) i.i.d. per pixel; NOT clamped. The noise field
// depends only on (seed, pixel index), never on evaluation order.
inline Tensor gaussian_field(const std::vector<int>& shape, double sigma255, std::uint64_t seed) {
  if (sigma255 < 0.0) throw std::invalid_argument("noise sigma must be >= 0");
  Tensor out(shape);
  const double std_dev = sigma255 / 255.0;
  for (std::int64_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<float>(counter_gaussian(seed, static_cast<std::uint64_t>(i)) * std_dev);
  }
  return out;
}

inline Tensor add_awgn(const Tensor& clean, double sigma255, std::uint64_t seed) {
  if (sigma255 < 0.0) throw std::invalid_argument("noise sigma must be >= 0");
  if (sigma255 == 0.0) return clean;
  return add(clean, gaussian_field(clean.shape(), sigma255, seed));
}

class ResidualDenoiser {
 public:
  ResidualDenoiser(const DenoiserSpec& spec, std::uint64_t seed) : spec_(spec) {
    spec_.validate();
    Rng rng(mix64(seed, 0xDE401));
    init_params(rng);
  }

  const DenoiserSpec& spec() const { return spec_; }
  const std::vector<ParamPtr>& parameters() const { return params_; }
  std::vector<ParamPtr>& parameters() { return params_; }

  // graph forward: x [N,1,H,W] -> predicted noise [N,1,H,W]
  Var predict_noise(Var x) const {
    Var h = x;
    for (int layer = 0; layer < spec_.depth; ++layer) {
      h = conv2d(h, params_[2 * layer], params_[2 * layer + 1]);
      if (layer + 1 < spec_.depth) h = relu(h);
    }
    return h;
  }

  // pure inference on an [H,W] image: clamp(noisy - predicted_noise, 0, 1)
  Tensor denoise(const Tensor& noisy) const {
    if (noisy.rank() != 2) {
      throw std::invalid_argument("denoise: expected an [H,W] image, got " + shape_string(noisy.shape()));
    }
    Var x = constant(noisy.reshaped({1, 1, noisy.dim(0), noisy.dim(1)}));
    Var pred = predict_noise_frozen(x);
    Tensor out(noisy.shape());
    for (std::int64_t i = 0; i < out.size(); ++i) {
      const float v = noisy[i] - pred->value[i];
      out[i] = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
    }
    return out;
  }

  Archive to_archive() const {
    Archive a(kBackboneArchiveKind);
    a.set_meta_int("depth", spec_.depth);
    a.set_meta_int("channels", spec_.channels);
    a.set_meta_int("kernel_size", spec_.kernel_size);
    a.set_meta_int("residual", spec_.residual ? 1 : 0);
    for (const ParamPtr& p : params_) a.add_blob(p->name, p->value);
    return a;
  }

  static ResidualDenoiser from_archive(const Archive& a) {
    if (a.kind() != kBackboneArchiveKind) {
      throw std::runtime_error("backbone: archive kind mismatch");
    }
    DenoiserSpec spec;
    spec.depth = static_cast<int>(a.meta_int("depth"));
    spec.channels = static_cast<int>(a.meta_int("channels"));
    spec.kernel_size = static_cast<int>(a.meta_int("kernel_size"));
    spec.residual = a.meta_int("residual") != 0;
    ResidualDenoiser net(spec, 0);
    for (ParamPtr& p : net.params_) {
      const Tensor& stored = a.blob(p->name);
      if (!stored.same_shape(p->value)) {
        throw std::runtime_error("backbone: blob '" + p->name + "' has shape " +
                                 shape_string(stored.shape()) + ", spec expects " +
                                 shape_string(p->value.shape()));
      }
      p->value = stored;
      p->zero_grad();
    }
    return net;
  }

 private:
  // forward without gradient tracking (weights wrapped as constants)
  Var predict_noise_frozen(Var x) const {
    Var h = x;
    for (int layer = 0; layer < spec_.depth; ++layer) {
      h = conv2d(h, constant(params_[2 * layer]->value), constant(params_[2 * layer + 1]->value));
      if (layer + 1 < spec_.depth) h = relu(h);
    }
    return h;
  }

  void init_params(Rng& rng) {
    params_.clear();
    for (int layer = 0; layer < spec_.depth; ++layer) {
      const int cin = layer == 0 ? 1 : spec_.channels;
      const int cout = layer + 1 == spec_.depth ? 1 : spec_.channels;
      const int k = spec_.kernel_size;
      Tensor kernel({cout, cin, k, k});
      const double std_dev = std::sqrt(2.0 / (static_cast<double>(cin) * k * k));
      for (std::int64_t i = 0; i < kernel.size(); ++i) {
        kernel[i] = static_cast<float>(rng.normal() * std_dev);
      }
      params_.push_back(make_parameter("conv" + std::to_string(layer) + ".weight", std::move(kernel)));
      params_.push_back(make_parameter("conv" + std::to_string(layer) + ".bias", Tensor({cout})));
    }
  }

  DenoiserSpec spec_;
  std::vector<ParamPtr> params_;
};

struct TrainLog {
  std::vector<double> epoch_loss;
};

// Cut a stride-aligned grid of square patches from [H,W] images.
inline std::vector<Tensor> extract_patches(const std::vector<Tensor>& images, int patch, int stride) {
  if (patch < 1 || stride < 1) throw std::invalid_argument("patch and stride must be positive");
  std::vector<Tensor> out;
  for (const Tensor& img : images) {
    if (img.rank() != 2) throw std::invalid_argument("extract_patches: images must be [H,W]");
    const int h = img.dim(0), w = img.dim(1);
    for (int y = 0; y + patch <= h; y += stride) {
      for (int x = 0; x + patch <= w; x += stride) {
        Tensor p({patch, patch});
        for (int i = 0; i < patch; ++i) {
          for (int j = 0; j < patch; ++j) p.at(i, j) = img.at(y + i, x + j);
        }
        out.push_back(std::move(p));
      }
    }
  }
  return out;
}

// Train on synthetic AWGN pairs: minimize mse(network(clean+noise), noise).
// Noise is resynthesized every epoch from an epoch-derived seed, so the whole
// run is a pure function of (patches, sigma, epochs, seed).
inline Archive train_backbone(const std::vector<Tensor>& clean_patches, double sigma255, int epochs,
                              std::uint64_t seed, TrainLog* log = nullptr,
                              const DenoiserSpec& spec = {}, int batch_size = 8) {
  if (clean_patches.empty()) throw std::invalid_argument("train_backbone: empty patch set");
  if (epochs < 0) throw std::invalid_argument("train_backbone: epochs must be >= 0");
  if (sigma255 < 0.0) throw std::invalid_argument("train_backbone: sigma must be >= 0");
  for (const Tensor& p : clean_patches) {
    if (p.rank() != 2 || !p.same_shape(clean_patches.front())) {
      throw std::invalid_argument("train_backbone: patches must all be [P,P] with one shape");
    }
  }
  const int ph = clean_patches.front().dim(0);
  const int pw = clean_patches.front().dim(1);

  ResidualDenoiser net(spec, mix64(seed, 0xB0B0));
  AdamOptimizer adam(net.parameters());

  for (int epoch = 0; epoch < epochs; ++epoch) {
    const std::uint64_t epoch_seed = mix64(seed, 0xE70C + static_cast<std::uint64_t>(epoch));
    std::vector<std::size_t> order(clean_patches.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng shuffler(mix64(epoch_seed, 0x5F));
    shuffler.shuffle(order);

    double loss_sum = 0.0;
    std::int64_t sample_count = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(batch_size)) {
      const int n = static_cast<int>(std::min(order.size() - start, static_cast<std::size_t>(batch_size)));
      Tensor noisy({n, 1, ph, pw});
      Tensor noise({n, 1, ph, pw});
      for (int s = 0; s < n; ++s) {
        const std::size_t pi = order[start + s];
        const Tensor field =
            gaussian_field(clean_patches[pi].shape(), sigma255, mix64(epoch_seed, pi));
        const Tensor& clean = clean_patches[pi];
        float* nz = noisy.data() + static_cast<std::size_t>(s) * ph * pw;
        float* nf = noise.data() + static_cast<std::size_t>(s) * ph * pw;
        for (std::int64_t i = 0; i < clean.size(); ++i) {
          nf[i] = field[i];
          nz[i] = clean[i] + field[i];
        }
      }
      Var pred = net.predict_noise(constant(std::move(noisy)));
      Var loss = mse_loss(pred, noise);
      const double loss_value = loss->value[0];
      if (!std::isfinite(loss_value)) {
        throw NumericalError("train_backbone: non-finite loss at epoch " + std::to_string(epoch));
      }
      backward(loss);
      adam.step();
      loss_sum += loss_value * n;
      sample_count += n;
    }
    if (log != nullptr) log->epoch_loss.push_back(loss_sum / static_cast<double>(sample_count));
  }
  return net.to_archive();
}

}  // namespace denfuse
