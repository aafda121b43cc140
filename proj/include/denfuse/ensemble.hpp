#pragma once

// The 13-branch virtual ensemble built from one frozen denoiser: branch 0 is
// the plain denoised image, branches 1-7 denoise spatially transformed inputs
// and are mapped back into the original frame, branches 8-12 denoise
// frequency-masked inputs and enter as-is (masking has no inverse).

#include <atomic>
#include <cstdint>
#include <span>
#include <thread>
#include <vector>

#include "denfuse/backbone.hpp"
#include "denfuse/tensor.hpp"
#include "denfuse/transforms.hpp"

namespace denfuse {

struct EnsembleStack {
  Tensor branches;  // [13,H,W], indexed by Manipulation
  Tensor noisy;     // [H,W]
  double sigma = 0.0;
  std::vector<Manipulation> provenance;

  int height() const { return branches.dim(1); }
  int width() const { return branches.dim(2); }

  Tensor branch(int index) const {
    const int h = height(), w = width();
    Tensor out({h, w});
    const float* src = branch_data(index);
    std::copy_n(src, static_cast<std::size_t>(h) * w, out.data());
    return out;
  }

  const float* branch_data(int index) const {
    return branches.data() + static_cast<std::size_t>(index) * height() * width();
  }
};

enum class BranchSubset { Sm, Fm, Joint };

inline const char* subset_name(BranchSubset s) {
  switch (s) {
    case BranchSubset::Sm: return "sm";
    case BranchSubset::Fm: return "fm";
    case BranchSubset::Joint: return "joint";
  }
  return "?";
}

// branch 0 is always included, mirroring its presence in every ensemble
inline std::vector<int> subset_indices(BranchSubset s) {
  switch (s) {
    case BranchSubset::Sm: return {0, 1, 2, 3, 4, 5, 6, 7};
    case BranchSubset::Fm: return {0, 8, 9, 10, 11, 12};
    case BranchSubset::Joint: return {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12};
  }
  return {};
}

inline EnsembleStack build_stack(const Tensor& noisy, const ResidualDenoiser& denoiser,
                                 std::span<const FrequencyBand> bands, double sigma = 0.0,
                                 bool parallel = true) {
  if (noisy.rank() != 2) {
    throw std::invalid_argument("build_stack: expected an [H,W] image, got " + shape_string(noisy.shape()));
  }
  if (bands.size() != kFrequencyCount) {
    throw std::invalid_argument("build_stack: expected " + std::to_string(kFrequencyCount) +
                                " frequency bands, got " + std::to_string(bands.size()));
  }
  const int h = noisy.dim(0), w = noisy.dim(1);

  std::vector<FrequencyMask> masks;
  masks.reserve(bands.size());
  for (const FrequencyBand& b : bands) masks.push_back(build_mask(b.low_frac, b.high_frac, h, w));

  EnsembleStack stack;
  stack.branches = Tensor({kBranchCount, h, w});
  stack.noisy = noisy;
  stack.sigma = sigma;
  for (int i = 0; i < kBranchCount; ++i) stack.provenance.push_back(manipulation_from_index(i));

  auto compute_branch = [&](int index) -> Tensor {
    const Manipulation m = manipulation_from_index(index);
    if (m == Manipulation::Identity) return denoiser.denoise(noisy);
    if (is_spatial(m)) return invert_spatial(denoiser.denoise(apply_spatial(noisy, m)), m);
    return denoiser.denoise(apply_frequency_mask(noisy, masks[static_cast<std::size_t>(index - kSpatialCount - 1)]));
  };

  auto store = [&](int index, const Tensor& img) {
    std::copy_n(img.data(), static_cast<std::size_t>(h) * w,
                stack.branches.data() + static_cast<std::size_t>(index) * h * w);
  };

  // the 13 branches are independent; each worker writes only its own slot
  const unsigned workers = parallel ? std::min(std::thread::hardware_concurrency(), 13u) : 1u;
  if (workers > 1) {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < workers; ++t) {
      pool.emplace_back([&]() {
        for (int i = next.fetch_add(1); i < kBranchCount; i = next.fetch_add(1)) {
          store(i, compute_branch(i));
        }
      });
    }
    for (std::thread& t : pool) t.join();
  } else {
    for (int i = 0; i < kBranchCount; ++i) store(i, compute_branch(i));
  }
  return stack;
}

inline EnsembleStack build_stack(const Tensor& noisy, const Archive& backbone,
                                 std::span<const FrequencyBand> bands, double sigma = 0.0,
                                 bool parallel = true) {
  const ResidualDenoiser denoiser = ResidualDenoiser::from_archive(backbone);
  return build_stack(noisy, denoiser, bands, sigma, parallel);
}

// arithmetic mean of the subset's branches (double accumulation)
inline Tensor average_fuse(const EnsembleStack& stack, BranchSubset subset) {
  const std::vector<int> indices = subset_indices(subset);
  const int h = stack.height(), w = stack.width();
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  Tensor out({h, w});
  for (std::size_t i = 0; i < hw; ++i) {
    double acc = 0.0;
    for (int idx : indices) acc += stack.branch_data(idx)[i];
    out[static_cast<std::int64_t>(i)] = static_cast<float>(acc / static_cast<double>(indices.size()));
  }
  return out;
}

}  // namespace denfuse
