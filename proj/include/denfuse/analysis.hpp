#pragma once

// Diagnostics: PSNR, pixel-error sampling across the 13 branches, pairwise
// Pearson correlation of branch errors, and the method-by-subset evaluation
// table.

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "denfuse/ensemble.hpp"
#include "denfuse/fusion.hpp"
#include "denfuse/rng.hpp"
#include "denfuse/tensor.hpp"

namespace denfuse {

// 10*log10(peak^2 / MSE); identical inputs give +infinity
inline double psnr(const Tensor& a, const Tensor& b, double peak = 1.0) {
  require_same_shape(a, b, "psnr");
  double acc = 0.0;
  for (std::int64_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - b[i];
    acc += d * d;
  }
  const double mse = acc / static_cast<double>(a.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / mse);
}

struct ErrorSample {
  int image_id = 0;
  int row = 0;
  int col = 0;
  double sigma = 0.0;
  std::array<float, kBranchCount> residuals{};  // branch - clean at this pixel
};

// Seeded uniform pixel sampling without replacement; residuals are
// (denoised branch - clean) at each sampled pixel.
inline std::vector<ErrorSample> error_distribution(const EnsembleStack& stack, const Tensor& clean,
                                                   int n_pixels, std::uint64_t seed, int image_id = 0) {
  if (clean.rank() != 2 || clean.dim(0) != stack.height() || clean.dim(1) != stack.width()) {
    throw std::invalid_argument("error_distribution: clean image does not match the stack");
  }
  const int h = stack.height(), w = stack.width();
  const std::int64_t total = static_cast<std::int64_t>(h) * w;
  if (n_pixels < 1 || n_pixels > total) {
    throw std::invalid_argument("error_distribution: n_pixels must be in 1.." + std::to_string(total));
  }

  // partial Fisher-Yates over pixel indices
  std::vector<std::int64_t> indices(static_cast<std::size_t>(total));
  for (std::int64_t i = 0; i < total; ++i) indices[static_cast<std::size_t>(i)] = i;
  Rng rng(mix64(seed, 0x9A3));
  for (int i = 0; i < n_pixels; ++i) {
    const std::int64_t j = i + static_cast<std::int64_t>(rng.next() % static_cast<std::uint64_t>(total - i));
    std::swap(indices[static_cast<std::size_t>(i)], indices[static_cast<std::size_t>(j)]);
  }

  std::vector<ErrorSample> samples;
  samples.reserve(static_cast<std::size_t>(n_pixels));
  for (int i = 0; i < n_pixels; ++i) {
    const std::int64_t p = indices[static_cast<std::size_t>(i)];
    ErrorSample s;
    s.image_id = image_id;
    s.row = static_cast<int>(p / w);
    s.col = static_cast<int>(p % w);
    s.sigma = stack.sigma;
    for (int b = 0; b < kBranchCount; ++b) {
      s.residuals[static_cast<std::size_t>(b)] = stack.branch_data(b)[p] - clean[p];
    }
    samples.push_back(s);
  }
  return samples;
}

struct CorrelationMatrix {
  std::array<double, kBranchCount * kBranchCount> values{};

  double at(int i, int j) const { return values[static_cast<std::size_t>(i) * kBranchCount + j]; }
  double& at(int i, int j) { return values[static_cast<std::size_t>(i) * kBranchCount + j]; }
  bool defined(int i, int j) const { return !std::isnan(at(i, j)); }
};

// Pearson r of pixel-wise errors for every branch pair, pooled over samples.
// A zero-variance branch makes its whole row/column NaN rather than 0.
inline CorrelationMatrix correlation_matrix(std::span<const ErrorSample> samples) {
  if (samples.size() < 2) {
    throw std::invalid_argument("correlation_matrix: need at least 2 samples");
  }
  const double n = static_cast<double>(samples.size());
  std::array<double, kBranchCount> mean{};
  for (const ErrorSample& s : samples) {
    for (int b = 0; b < kBranchCount; ++b) mean[static_cast<std::size_t>(b)] += s.residuals[static_cast<std::size_t>(b)];
  }
  for (double& m : mean) m /= n;

  std::array<double, kBranchCount> var{};
  CorrelationMatrix out;
  std::array<std::array<double, kBranchCount>, kBranchCount> cov{};
  for (const ErrorSample& s : samples) {
    std::array<double, kBranchCount> d;
    for (int b = 0; b < kBranchCount; ++b) {
      d[static_cast<std::size_t>(b)] = s.residuals[static_cast<std::size_t>(b)] - mean[static_cast<std::size_t>(b)];
    }
    for (int i = 0; i < kBranchCount; ++i) {
      var[static_cast<std::size_t>(i)] += d[static_cast<std::size_t>(i)] * d[static_cast<std::size_t>(i)];
      for (int j = i + 1; j < kBranchCount; ++j) {
        cov[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] +=
            d[static_cast<std::size_t>(i)] * d[static_cast<std::size_t>(j)];
      }
    }
  }

  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (int i = 0; i < kBranchCount; ++i) {
    for (int j = 0; j < kBranchCount; ++j) {
      if (var[static_cast<std::size_t>(i)] == 0.0 || var[static_cast<std::size_t>(j)] == 0.0) {
        out.at(i, j) = nan;
      } else if (i == j) {
        out.at(i, j) = 1.0;
      } else {
        const double c = i < j ? cov[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]
                               : cov[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)];
        out.at(i, j) = c / std::sqrt(var[static_cast<std::size_t>(i)] * var[static_cast<std::size_t>(j)]);
      }
    }
  }
  return out;
}

// mean |r| over unordered branch pairs drawn from `indices` (diagonal excluded)
inline double mean_abs_offdiagonal(const CorrelationMatrix& corr, std::span<const int> indices) {
  double acc = 0.0;
  int count = 0;
  for (std::size_t a = 0; a < indices.size(); ++a) {
    for (std::size_t b = a + 1; b < indices.size(); ++b) {
      const double r = corr.at(indices[a], indices[b]);
      if (!std::isnan(r)) {
        acc += std::abs(r);
        ++count;
      }
    }
  }
  return count > 0 ? acc / count : std::numeric_limits<double>::quiet_NaN();
}

struct SubsetScores {
  double sm = 0.0;
  double fm = 0.0;
  double joint = 0.0;

  double get(BranchSubset s) const {
    switch (s) {
      case BranchSubset::Sm: return sm;
      case BranchSubset::Fm: return fm;
      case BranchSubset::Joint: return joint;
    }
    return 0.0;
  }
  void set(BranchSubset s, double v) {
    switch (s) {
      case BranchSubset::Sm: sm = v; break;
      case BranchSubset::Fm: fm = v; break;
      case BranchSubset::Joint: joint = v; break;
    }
  }
};

// One sigma's worth of Table rows: mean test-set PSNR for the baseline, the
// averaging ensemble, each single-path model, and the dual model, each over
// the SM / FM / Joint branch subsets.
struct EvaluationColumn {
  double sigma = 0.0;
  double baseline = 0.0;
  SubsetScores averaging;
  SubsetScores spatial;
  SubsetScores channel;
  SubsetScores dual;
};

// Outputs are clamped to [0,1] before PSNR (the target's range).
inline EvaluationColumn evaluation_report(const std::vector<std::pair<Tensor, Tensor>>& test_pairs,
                                          const ResidualDenoiser& denoiser,
                                          const FusionNetwork& dual_net,
                                          const FusionNetwork& spatial_net,
                                          const FusionNetwork& channel_net,
                                          std::span<const FrequencyBand> bands, double sigma) {
  if (test_pairs.empty()) throw std::invalid_argument("evaluation_report: empty test set");

  constexpr std::array<BranchSubset, 3> kSubsets = {BranchSubset::Sm, BranchSubset::Fm,
                                                    BranchSubset::Joint};
  double baseline = 0.0;
  std::array<SubsetScores, 4> scores;  // averaging, spatial, channel, dual
  for (const auto& [noisy, clean] : test_pairs) {
    const EnsembleStack stack = build_stack(noisy, denoiser, bands, sigma);
    baseline += psnr(stack.branch(0), clean);
    for (BranchSubset subset : kSubsets) {
      scores[0].set(subset, scores[0].get(subset) + psnr(clamp01(average_fuse(stack, subset)), clean));
      scores[1].set(subset,
                    scores[1].get(subset) +
                        psnr(clamp01(single_path_fuse(stack, spatial_net, AttentionPath::Spatial, subset)),
                             clean));
      scores[2].set(subset,
                    scores[2].get(subset) +
                        psnr(clamp01(single_path_fuse(stack, channel_net, AttentionPath::Channel, subset)),
                             clean));
      scores[3].set(subset,
                    scores[3].get(subset) + psnr(clamp01(dual_fuse(stack, dual_net, subset).fused), clean));
    }
  }

  const double n = static_cast<double>(test_pairs.size());
  EvaluationColumn col;
  col.sigma = sigma;
  col.baseline = baseline / n;
  for (BranchSubset subset : kSubsets) {
    for (std::size_t m = 0; m < scores.size(); ++m) scores[m].set(subset, scores[m].get(subset) / n);
  }
  col.averaging = scores[0];
  col.spatial = scores[1];
  col.channel = scores[2];
  col.dual = scores[3];
  return col;
}

}  // namespace denfuse
