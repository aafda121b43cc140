#pragma once

// Decoupled dual-attention fusion over the 13-branch stack.
//
// Spatial path: three 3x3 convs (13->32->32->13) produce per-pixel logits,
// softmax across branches gives one weight map per branch, and the fused
// image is the weighted sum. Channel path: global average pool, FC 13->32->13,
// softmax gives one scalar weight per branch. The two paths never interact
// until their fused images are concatenated and merged by a single 3x3 conv.
//
// Evaluating a subset (SM or FM) restricts the softmax normalization to the
// subset's branches; excluded branches get weight zero.

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "denfuse/archive.hpp"
#include "denfuse/autograd.hpp"
#include "denfuse/ensemble.hpp"
#include "denfuse/errors.hpp"
#include "denfuse/optimizer.hpp"
#include "denfuse/rng.hpp"
#include "denfuse/tensor.hpp"

namespace denfuse {

enum class AttentionPath { Spatial, Channel };

enum class FusionObjective { Dual, SpatialOnly, ChannelOnly };

inline const char* objective_name(FusionObjective o) {
  switch (o) {
    case FusionObjective::Dual: return "dual";
    case FusionObjective::SpatialOnly: return "spatial";
    case FusionObjective::ChannelOnly: return "channel";
  }
  return "?";
}

class FusionNetwork {
 public:
  static constexpr int kHiddenWidth = 32;

  explicit FusionNetwork(std::uint64_t seed) {
    Rng rng(mix64(seed, 0xF051));
    auto he_tensor = [&rng](std::vector<int> shape, int fan_in) {
      Tensor t(std::move(shape));
      const double std_dev = std::sqrt(2.0 / fan_in);
      for (std::int64_t i = 0; i < t.size(); ++i) t[i] = static_cast<float>(rng.normal() * std_dev);
      return t;
    };
    const int b = kBranchCount, hwid = kHiddenWidth;
    params_.push_back(make_parameter("spatial1.weight", he_tensor({hwid, b, 3, 3}, b * 9)));
    params_.push_back(make_parameter("spatial1.bias", Tensor({hwid})));
    params_.push_back(make_parameter("spatial2.weight", he_tensor({hwid, hwid, 3, 3}, hwid * 9)));
    params_.push_back(make_parameter("spatial2.bias", Tensor({hwid})));
    params_.push_back(make_parameter("spatial3.weight", he_tensor({b, hwid, 3, 3}, hwid * 9)));
    params_.push_back(make_parameter("spatial3.bias", Tensor({b})));
    params_.push_back(make_parameter("channel1.weight", he_tensor({hwid, b}, b)));
    params_.push_back(make_parameter("channel1.bias", Tensor({hwid})));
    params_.push_back(make_parameter("channel2.weight", he_tensor({b, hwid}, hwid)));
    params_.push_back(make_parameter("channel2.bias", Tensor({b})));
    // merge starts as a pass-through of the spatial path; the channel mix
    // grows from zero during training
    Tensor merge({1, 2, 3, 3});
    merge.at(0, 0, 1, 1) = 1.0f;
    params_.push_back(make_parameter("merge.weight", std::move(merge)));
    params_.push_back(make_parameter("merge.bias", Tensor({1})));
  }

  const std::vector<ParamPtr>& parameters() const { return params_; }
  std::vector<ParamPtr>& parameters() { return params_; }

  struct Graph {
    Var spatial_weights;  // [1,13,H,W]
    Var fused_spatial;    // [1,1,H,W]
    Var channel_weights;  // [1,13]
    Var fused_channel;    // [1,1,H,W]
    Var fused;            // [1,1,H,W]
  };

  Graph build_graph(const Var& branches, BranchSubset subset = BranchSubset::Joint) const {
    const std::vector<int> keep = subset_indices(subset);

    Var h1 = relu(conv2d(branches, params_[0], params_[1]));
    Var h2 = relu(conv2d(h1, params_[2], params_[3]));
    Var spatial_logits = conv2d(h2, params_[4], params_[5]);
    Graph g;
    g.spatial_weights = softmax_channels(spatial_logits, keep);
    g.fused_spatial = sum_channels(mul(g.spatial_weights, branches));

    Var pooled = reshape(global_avg_pool(branches), {1, kBranchCount});
    Var c1 = relu(fully_connected(pooled, params_[6], params_[7]));
    Var channel_logits = fully_connected(c1, params_[8], params_[9]);
    Var cw = softmax_channels(reshape(channel_logits, {1, kBranchCount, 1, 1}), keep);
    g.channel_weights = reshape(cw, {1, kBranchCount});
    g.fused_channel = sum_channels(scale_channels(branches, g.channel_weights));

    g.fused = conv2d(concat_channels(g.fused_spatial, g.fused_channel), params_[10], params_[11]);
    return g;
  }

  Archive to_archive() const {
    Archive a(kFusionArchiveKind);
    a.set_meta_int("branches", kBranchCount);
    a.set_meta_int("hidden_width", kHiddenWidth);
    for (const ParamPtr& p : params_) a.add_blob(p->name, p->value);
    return a;
  }

  static FusionNetwork from_archive(const Archive& a) {
    if (a.kind() != kFusionArchiveKind) {
      throw std::runtime_error("fusion: archive kind mismatch");
    }
    FusionNetwork net(0);
    for (ParamPtr& p : net.params_) {
      const Tensor& stored = a.blob(p->name);
      if (!stored.same_shape(p->value)) {
        throw std::runtime_error("fusion: blob '" + p->name + "' has shape " +
                                 shape_string(stored.shape()) + ", expected " +
                                 shape_string(p->value.shape()));
      }
      p->value = stored;
      p->zero_grad();
    }
    return net;
  }

 private:
  std::vector<ParamPtr> params_;
};

struct FusionOutput {
  Tensor fused;            // [H,W]
  Tensor spatial_weights;  // [13,H,W], sums to 1 over branches at every pixel
  Tensor channel_weights;  // [13], sums to 1
  Tensor fused_spatial;    // [H,W]
  Tensor fused_channel;    // [H,W]
};

namespace detail {

inline Var stack_var(const EnsembleStack& stack) {
  return constant(stack.branches.reshaped({1, kBranchCount, stack.height(), stack.width()}));
}

}  // namespace detail

inline FusionOutput dual_fuse(const EnsembleStack& stack, const FusionNetwork& net,
                              BranchSubset subset = BranchSubset::Joint) {
  const int h = stack.height(), w = stack.width();
  FusionNetwork::Graph g = net.build_graph(detail::stack_var(stack), subset);
  FusionOutput out;
  out.fused = g.fused->value.reshaped({h, w});
  out.spatial_weights = g.spatial_weights->value.reshaped({kBranchCount, h, w});
  out.channel_weights = g.channel_weights->value.reshaped({kBranchCount});
  out.fused_spatial = g.fused_spatial->value.reshaped({h, w});
  out.fused_channel = g.fused_channel->value.reshaped({h, w});
  return out;
}

inline std::pair<Tensor, Tensor> spatial_attention(const EnsembleStack& stack, const FusionNetwork& net,
                                                   BranchSubset subset = BranchSubset::Joint) {
  FusionOutput out = dual_fuse(stack, net, subset);
  return {std::move(out.spatial_weights), std::move(out.fused_spatial)};
}

inline std::pair<Tensor, Tensor> channel_attention(const EnsembleStack& stack, const FusionNetwork& net,
                                                   BranchSubset subset = BranchSubset::Joint) {
  FusionOutput out = dual_fuse(stack, net, subset);
  return {std::move(out.channel_weights), std::move(out.fused_channel)};
}

inline Tensor single_path_fuse(const EnsembleStack& stack, const FusionNetwork& net, AttentionPath path,
                               BranchSubset subset = BranchSubset::Joint) {
  FusionOutput out = dual_fuse(stack, net, subset);
  return path == AttentionPath::Spatial ? std::move(out.fused_spatial) : std::move(out.fused_channel);
}

// Train on prebuilt stacks (the backbone is frozen, so stacks are constants).
inline FusionNetwork train_fusion_on_stacks(const std::vector<EnsembleStack>& stacks,
                                            const std::vector<Tensor>& cleans, int epochs,
                                            std::uint64_t seed, TrainLog* log = nullptr,
                                            FusionObjective objective = FusionObjective::Dual) {
  if (stacks.empty() || stacks.size() != cleans.size()) {
    throw std::invalid_argument("train_fusion: need a non-empty matching set of stacks and targets");
  }
  if (epochs < 0) throw std::invalid_argument("train_fusion: epochs must be >= 0");

  FusionNetwork net(mix64(seed, 0xF1F1));
  AdamOptimizer adam(net.parameters());

  std::vector<Tensor> targets;
  targets.reserve(cleans.size());
  for (std::size_t i = 0; i < cleans.size(); ++i) {
    targets.push_back(cleans[i].reshaped({1, 1, cleans[i].dim(0), cleans[i].dim(1)}));
  }

  for (int epoch = 0; epoch < epochs; ++epoch) {
    // step decay settles the joint optimum late in training
    const double progress = epochs > 1 ? static_cast<double>(epoch) / epochs : 0.0;
    adam.set_learning_rate(progress < 0.6 ? 1e-3f : (progress < 0.85 ? 3e-4f : 1e-4f));

    std::vector<std::size_t> order(stacks.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng shuffler(mix64(mix64(seed, 0xF2), static_cast<std::uint64_t>(epoch)));
    shuffler.shuffle(order);

    double loss_sum = 0.0;
    for (std::size_t idx : order) {
      FusionNetwork::Graph g = net.build_graph(detail::stack_var(stacks[idx]));
      Var output = objective == FusionObjective::Dual
                       ? g.fused
                       : (objective == FusionObjective::SpatialOnly ? g.fused_spatial : g.fused_channel);
      Var loss = mse_loss(output, targets[idx]);
      const double loss_value = loss->value[0];
      if (!std::isfinite(loss_value)) {
        throw NumericalError("train_fusion: non-finite loss at epoch " + std::to_string(epoch));
      }
      backward(loss);
      adam.step();
      loss_sum += loss_value;
    }
    if (log != nullptr) log->epoch_loss.push_back(loss_sum / static_cast<double>(stacks.size()));
  }
  return net;
}

// Spec entry point: builds stacks with the frozen backbone, trains the dual
// objective. Backbone gradients are never computed (branches are constants).
inline FusionNetwork train_fusion(const std::vector<std::pair<Tensor, Tensor>>& noisy_clean_pairs,
                                  const Archive& backbone, std::span<const FrequencyBand> bands,
                                  double sigma, int epochs = 100, std::uint64_t seed = 1,
                                  TrainLog* log = nullptr,
                                  FusionObjective objective = FusionObjective::Dual) {
  if (noisy_clean_pairs.empty()) throw std::invalid_argument("train_fusion: empty training set");
  const ResidualDenoiser denoiser = ResidualDenoiser::from_archive(backbone);
  std::vector<EnsembleStack> stacks;
  std::vector<Tensor> cleans;
  stacks.reserve(noisy_clean_pairs.size());
  for (const auto& [noisy, clean] : noisy_clean_pairs) {
    stacks.push_back(build_stack(noisy, denoiser, bands, sigma));
    cleans.push_back(clean);
  }
  return train_fusion_on_stacks(stacks, cleans, epochs, seed, log, objective);
}

}  // namespace denfuse
