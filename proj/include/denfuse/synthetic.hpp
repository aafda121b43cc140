#pragma once

// Procedural grayscale test images: smooth cosine background, sharp-edged
// ellipses and rectangles, fine sinusoidal textures and thin lines. The
// broadband content matters: band-stop filtering must actually destroy
// structure for frequency-manipulated branches to behave like they do on
// natural images.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "denfuse/rng.hpp"
#include "denfuse/tensor.hpp"

namespace denfuse {

inline Tensor synthesize_image(int height, int width, std::uint64_t seed) {
  if (height < 1 || width < 1) throw std::invalid_argument("synthesize_image: dims must be positive");
  Rng rng(mix64(seed, 0x51317));
  Tensor img = Tensor::full({height, width}, 0.45f);

  // low-frequency cosine background
  const int waves = 2 + static_cast<int>(rng.below(2));
  for (int k = 0; k < waves; ++k) {
    const double fy = rng.uniform(0.3, 2.0);
    const double fx = rng.uniform(0.3, 2.0);
    const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double amp = rng.uniform(0.04, 0.12);
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        const double arg = 2.0 * std::numbers::pi *
                               (fy * y / static_cast<double>(height) + fx * x / static_cast<double>(width)) +
                           phase;
        img.at(y, x) += static_cast<float>(amp * std::cos(arg));
      }
    }
  }

  // sharp-edged shapes at random levels
  const int shapes = 5 + static_cast<int>(rng.below(4));
  for (int s = 0; s < shapes; ++s) {
    const bool ellipse = rng.uniform() < 0.6;
    const double cy = rng.uniform(0.1, 0.9) * height;
    const double cx = rng.uniform(0.1, 0.9) * width;
    const double ry = rng.uniform(0.06, 0.30) * height;
    const double rx = rng.uniform(0.06, 0.30) * width;
    const double angle = rng.uniform(0.0, std::numbers::pi);
    const double level = rng.uniform(0.08, 0.92);
    const double opacity = rng.uniform(0.7, 1.0);
    const double feather = 0.5;
    const double ca = std::cos(angle), sa = std::sin(angle);
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        const double dy = y - cy, dx = x - cx;
        const double u = ca * dx + sa * dy;
        const double v = -sa * dx + ca * dy;
        // signed distance proxy: negative inside
        double d;
        if (ellipse) {
          d = (std::sqrt((u / rx) * (u / rx) + (v / ry) * (v / ry)) - 1.0) * std::min(rx, ry);
        } else {
          d = std::max(std::abs(u) - rx, std::abs(v) - ry);
        }
        if (d >= feather) continue;
        double cover = d <= -feather ? 1.0 : 0.5 * (1.0 - d / feather);
        cover *= opacity;
        const float old = img.at(y, x);
        img.at(y, x) = static_cast<float>(old + cover * (level - old));
      }
    }
  }

  // thin high-contrast lines
  const int lines = 2 + static_cast<int>(rng.below(3));
  for (int l = 0; l < lines; ++l) {
    const double cy = rng.uniform(0.1, 0.9) * height;
    const double cx = rng.uniform(0.1, 0.9) * width;
    const double angle = rng.uniform(0.0, std::numbers::pi);
    const double half_len = rng.uniform(0.15, 0.45) * std::min(height, width);
    const double half_width = rng.uniform(0.5, 1.1);
    const double level = rng.uniform() < 0.5 ? rng.uniform(0.05, 0.2) : rng.uniform(0.8, 0.95);
    const double ca = std::cos(angle), sa = std::sin(angle);
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        const double dy = y - cy, dx = x - cx;
        const double along = ca * dx + sa * dy;
        const double across = -sa * dx + ca * dy;
        if (std::abs(along) > half_len) continue;
        const double d = std::abs(across) - half_width;
        if (d >= 0.5) continue;
        const double cover = d <= -0.5 ? 1.0 : 0.5 - d;
        const float old = img.at(y, x);
        img.at(y, x) = static_cast<float>(old + cover * (level - old));
      }
    }
  }

  // Localized periodic textures at three scales, so the coarse, mid and fine
  // spectral bands all carry structure a denoiser can learn to keep. Scales
  // are quoted in cycles across the image.
  struct TextureScale {
    double fy_lo, fy_hi, fx_lo, fx_hi;
    double amp_lo, amp_hi;
    int min_patches;
  };
  // Energy tapers from coarse to fine so that each band-stop mask removes a
  // distinct, nontrivial slice of structure.
  const TextureScale scales[6] = {
      {25.2, 28.0, 25.2, 28.0, 0.10, 0.14, 1},  // fine diagonal weave
      {23.0, 30.0, 0.0, 5.0, 0.20, 0.28, 2},    // fine striping
      {18.0, 22.0, 0.0, 5.0, 0.18, 0.24, 1},    // mid-fine striping
      {13.0, 17.0, 0.0, 5.0, 0.14, 0.20, 1},    // mid striping
      {6.0, 14.0, 6.0, 14.0, 0.16, 0.22, 1},    // medium weave
      {3.0, 8.0, 3.0, 8.0, 0.30, 0.40, 3},      // coarse weave
  };
  for (const TextureScale& sc : scales) {
    const int patches = sc.min_patches + static_cast<int>(rng.below(2));
    for (int t = 0; t < patches; ++t) {
      const int ty = static_cast<int>(rng.uniform(0.0, 0.6) * height);
      const int tx = static_cast<int>(rng.uniform(0.0, 0.6) * width);
      const int th = std::max(2, static_cast<int>(rng.uniform(0.3, 0.5) * height));
      const int tw = std::max(2, static_cast<int>(rng.uniform(0.3, 0.5) * width));
      double fy = rng.uniform(sc.fy_lo, sc.fy_hi);
      double fx = rng.uniform(sc.fx_lo, sc.fx_hi);
      if (rng.uniform() < 0.5) std::swap(fy, fx);
      if (rng.uniform() < 0.5) fy = -fy;
      const double amp = rng.uniform(sc.amp_lo, sc.amp_hi);
      const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
      for (int y = ty; y < std::min(height, ty + th); ++y) {
        for (int x = tx; x < std::min(width, tx + tw); ++x) {
          const double arg =
              2.0 * std::numbers::pi *
                  (fy * y / static_cast<double>(height) + fx * x / static_cast<double>(width)) +
              phase;
          img.at(y, x) += static_cast<float>(amp * std::sin(arg));
        }
      }
    }
  }

  for (std::int64_t i = 0; i < img.size(); ++i) {
    img[i] = std::min(0.98f, std::max(0.02f, img[i]));
  }
  return img;
}

}  // namespace denfuse
