#pragma once

// Test-only reference implementations, kept independent of the library's
// compute paths: naive double-precision loops, direct formula evaluations,
// and a central-difference driver. Expected values in the tests come from
// these, never from the code under test.

#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <vector>

#include "denfuse/rng.hpp"
#include "denfuse/tensor.hpp"

namespace oracle {

using denfuse::Tensor;

// direct-summation cross-correlation with zero "same" padding
inline std::vector<double> conv2d_naive(const std::vector<double>& input,
                                        const std::vector<double>& kernel,
                                        const std::vector<double>& bias, int n, int cin, int cout,
                                        int h, int w, int k) {
  const int pad = (k - 1) / 2;
  std::vector<double> out(static_cast<std::size_t>(n) * cout * h * w, 0.0);
  for (int s = 0; s < n; ++s) {
    for (int co = 0; co < cout; ++co) {
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          double acc = bias[static_cast<std::size_t>(co)];
          for (int ci = 0; ci < cin; ++ci) {
            for (int ki = 0; ki < k; ++ki) {
              for (int kj = 0; kj < k; ++kj) {
                const int sy = y + ki - pad;
                const int sx = x + kj - pad;
                if (sy < 0 || sy >= h || sx < 0 || sx >= w) continue;
                acc += input[((static_cast<std::size_t>(s) * cin + ci) * h + sy) * w + sx] *
                       kernel[((static_cast<std::size_t>(co) * cin + ci) * k + ki) * k + kj];
              }
            }
          }
          out[((static_cast<std::size_t>(s) * cout + co) * h + y) * w + x] = acc;
        }
      }
    }
  }
  return out;
}

inline std::vector<double> to_double(const Tensor& t) {
  std::vector<double> out(static_cast<std::size_t>(t.size()));
  for (std::int64_t i = 0; i < t.size(); ++i) out[static_cast<std::size_t>(i)] = t[i];
  return out;
}

// O(N^4) orthonormal DCT-II straight from the definition
inline std::vector<double> dct2_naive(const Tensor& img) {
  const int h = img.dim(0), w = img.dim(1);
  std::vector<double> out(static_cast<std::size_t>(h) * w, 0.0);
  for (int u = 0; u < h; ++u) {
    for (int v = 0; v < w; ++v) {
      const double au = u == 0 ? std::sqrt(1.0 / h) : std::sqrt(2.0 / h);
      const double av = v == 0 ? std::sqrt(1.0 / w) : std::sqrt(2.0 / w);
      double acc = 0.0;
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          acc += img.at(y, x) * std::cos(std::numbers::pi * (2.0 * y + 1.0) * u / (2.0 * h)) *
                 std::cos(std::numbers::pi * (2.0 * x + 1.0) * v / (2.0 * w));
        }
      }
      out[static_cast<std::size_t>(u) * w + v] = au * av * acc;
    }
  }
  return out;
}

// O(N^4) inverse (DCT-III)
inline std::vector<double> idct2_naive(const Tensor& coeffs) {
  const int h = coeffs.dim(0), w = coeffs.dim(1);
  std::vector<double> out(static_cast<std::size_t>(h) * w, 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int u = 0; u < h; ++u) {
        for (int v = 0; v < w; ++v) {
          const double au = u == 0 ? std::sqrt(1.0 / h) : std::sqrt(2.0 / h);
          const double av = v == 0 ? std::sqrt(1.0 / w) : std::sqrt(2.0 / w);
          acc += au * av * coeffs.at(u, v) *
                 std::cos(std::numbers::pi * (2.0 * y + 1.0) * u / (2.0 * h)) *
                 std::cos(std::numbers::pi * (2.0 * x + 1.0) * v / (2.0 * w));
        }
      }
      out[static_cast<std::size_t>(y) * w + x] = acc;
    }
  }
  return out;
}

inline std::vector<double> softmax_naive(const std::vector<double>& logits) {
  double m = logits[0];
  for (double v : logits) m = std::max(m, v);
  double denom = 0.0;
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - m);
    denom += out[i];
  }
  for (double& v : out) v /= denom;
  return out;
}

inline double mse_naive(const Tensor& a, const Tensor& b) {
  double acc = 0.0;
  for (std::int64_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - b[i];
    acc += d * d;
  }
  return acc / static_cast<double>(a.size());
}

inline double psnr_naive(const Tensor& a, const Tensor& b, double peak) {
  return 10.0 * std::log10(peak * peak / mse_naive(a, b));
}

inline double mean_naive(const std::vector<double>& xs) {
  double acc = 0.0;
  for (double v : xs) acc += v;
  return acc / static_cast<double>(xs.size());
}

inline double pearson_naive(const std::vector<double>& x, const std::vector<double>& y) {
  const double mx = mean_naive(x), my = mean_naive(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

// central finite difference on one scalar slot; divides by the perturbation
// the float slot actually realized, not the nominal one
inline double central_difference(float* slot, double eps, const std::function<double()>& loss) {
  const float saved = *slot;
  *slot = static_cast<float>(static_cast<double>(saved) + eps);
  const double x_plus = *slot;
  const double plus = loss();
  *slot = static_cast<float>(static_cast<double>(saved) - eps);
  const double x_minus = *slot;
  const double minus = loss();
  *slot = saved;
  return (plus - minus) / (x_plus - x_minus);
}

// double-precision recomputation of the mean-squared-error from a prediction
// tensor, so finite differences are not limited by float loss readback
inline double mse_readback(const Tensor& pred, const Tensor& target) { return mse_naive(pred, target); }

inline Tensor random_tensor(std::vector<int> shape, denfuse::Rng& rng, double lo = -1.0,
                            double hi = 1.0) {
  Tensor t(std::move(shape));
  for (std::int64_t i = 0; i < t.size(); ++i) t[i] = static_cast<float>(rng.uniform(lo, hi));
  return t;
}

}  // namespace oracle
