#pragma once

// The twelve input manipulations: seven lossless dihedral transforms with
// exact inverses, and five binary DCT-domain band-stop masks.
//
// rot90 is counter-clockwise with pixel (i,j) -> (j, H-1-i); "rotation plus
// vertical mirror" applies the rotation first. vmirror flips row order.

#include <array>
#include <cmath>
#include <cstdint>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "denfuse/tensor.hpp"

namespace denfuse {

enum class Manipulation : int {
  Identity = 0,
  Rot90VMirror = 1,
  VMirror = 2,
  Rot270 = 3,
  Rot180VMirror = 4,
  Rot90 = 5,
  Rot180 = 6,
  Rot270VMirror = 7,
  FmBand1 = 8,
  FmBand2 = 9,
  FmBand3 = 10,
  FmBand4 = 11,
  FmBand5 = 12,
};

constexpr int kBranchCount = 13;
constexpr int kSpatialCount = 7;
constexpr int kFrequencyCount = 5;

inline int branch_index(Manipulation m) { return static_cast<int>(m); }

inline Manipulation manipulation_from_index(int index) {
  if (index < 0 || index >= kBranchCount) {
    throw std::invalid_argument("manipulation index must be 0..12, got " + std::to_string(index));
  }
  return static_cast<Manipulation>(index);
}

inline bool is_spatial(Manipulation m) {
  const int i = branch_index(m);
  return i >= 1 && i <= kSpatialCount;
}

inline bool is_frequency(Manipulation m) { return branch_index(m) > kSpatialCount; }

inline const char* manipulation_name(Manipulation m) {
  switch (m) {
    case Manipulation::Identity: return "identity";
    case Manipulation::Rot90VMirror: return "rot90+vmirror";
    case Manipulation::VMirror: return "vmirror";
    case Manipulation::Rot270: return "rot270";
    case Manipulation::Rot180VMirror: return "rot180+vmirror";
    case Manipulation::Rot90: return "rot90";
    case Manipulation::Rot180: return "rot180";
    case Manipulation::Rot270VMirror: return "rot270+vmirror";
    case Manipulation::FmBand1: return "fm[0.1,1.0]";
    case Manipulation::FmBand2: return "fm[0.3,1.0]";
    case Manipulation::FmBand3: return "fm[0.5,1.0]";
    case Manipulation::FmBand4: return "fm[0.4,0.5]";
    case Manipulation::FmBand5: return "fm[0.8,0.9]";
  }
  return "?";
}

namespace detail {

inline void require_image(const Tensor& t, const char* what) {
  if (t.rank() != 2) {
    throw std::invalid_argument(std::string(what) + ": expected a rank-2 [H,W] tensor, got " +
                                shape_string(t.shape()));
  }
}

}  // namespace detail

inline Tensor rot90(const Tensor& img) {
  detail::require_image(img, "rot90");
  const int h = img.dim(0), w = img.dim(1);
  Tensor out({w, h});
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) out.at(j, h - 1 - i) = img.at(i, j);
  }
  return out;
}

inline Tensor rot180(const Tensor& img) {
  detail::require_image(img, "rot180");
  const int h = img.dim(0), w = img.dim(1);
  Tensor out({h, w});
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) out.at(h - 1 - i, w - 1 - j) = img.at(i, j);
  }
  return out;
}

inline Tensor rot270(const Tensor& img) {
  detail::require_image(img, "rot270");
  const int h = img.dim(0), w = img.dim(1);
  Tensor out({w, h});
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) out.at(w - 1 - j, i) = img.at(i, j);
  }
  return out;
}

inline Tensor vmirror(const Tensor& img) {
  detail::require_image(img, "vmirror");
  const int h = img.dim(0), w = img.dim(1);
  Tensor out({h, w});
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) out.at(h - 1 - i, j) = img.at(i, j);
  }
  return out;
}

inline Tensor apply_spatial(const Tensor& img, Manipulation m) {
  switch (m) {
    case Manipulation::Rot90VMirror: return vmirror(rot90(img));
    case Manipulation::VMirror: return vmirror(img);
    case Manipulation::Rot270: return rot270(img);
    case Manipulation::Rot180VMirror: return vmirror(rot180(img));
    case Manipulation::Rot90: return rot90(img);
    case Manipulation::Rot180: return rot180(img);
    case Manipulation::Rot270VMirror: return vmirror(rot270(img));
    default:
      throw std::invalid_argument(std::string("apply_spatial: not a spatial manipulation: ") +
                                  manipulation_name(m));
  }
}

inline Tensor invert_spatial(const Tensor& img, Manipulation m) {
  switch (m) {
    case Manipulation::Rot90VMirror: return rot270(vmirror(img));
    case Manipulation::VMirror: return vmirror(img);
    case Manipulation::Rot270: return rot90(img);
    case Manipulation::Rot180VMirror: return rot180(vmirror(img));
    case Manipulation::Rot90: return rot270(img);
    case Manipulation::Rot180: return rot180(img);
    case Manipulation::Rot270VMirror: return rot90(vmirror(img));
    default:
      throw std::invalid_argument(std::string("invert_spatial: not a spatial manipulation: ") +
                                  manipulation_name(m));
  }
}

namespace detail {

// orthonormal DCT-II basis: row u of the returned n*n matrix holds
// alpha(u) * cos(pi*(2x+1)*u / (2n)); cached per size.
inline const std::vector<double>& dct_basis(int n) {
  static std::mutex mutex;
  static std::unordered_map<int, std::vector<double>> cache;
  std::lock_guard<std::mutex> lock(mutex);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  std::vector<double> basis(static_cast<std::size_t>(n) * n);
  const double a0 = std::sqrt(1.0 / n);
  const double a = std::sqrt(2.0 / n);
  for (int u = 0; u < n; ++u) {
    for (int x = 0; x < n; ++x) {
      basis[static_cast<std::size_t>(u) * n + x] =
          (u == 0 ? a0 : a) * std::cos(std::numbers::pi * (2.0 * x + 1.0) * u / (2.0 * n));
    }
  }
  return cache.emplace(n, std::move(basis)).first->second;
}

}  // namespace detail

// orthonormal 2-D DCT-II of an [H,W] image; (0,0) is the DC coefficient
inline Tensor dct2(const Tensor& img) {
  detail::require_image(img, "dct2");
  const int h = img.dim(0), w = img.dim(1);
  const std::vector<double>& dh = detail::dct_basis(h);
  const std::vector<double>& dw = detail::dct_basis(w);
  // T = Dh * X
  std::vector<double> tmp(static_cast<std::size_t>(h) * w, 0.0);
  for (int u = 0; u < h; ++u) {
    for (int i = 0; i < h; ++i) {
      const double c = dh[static_cast<std::size_t>(u) * h + i];
      const float* row = img.data() + static_cast<std::size_t>(i) * w;
      double* out = tmp.data() + static_cast<std::size_t>(u) * w;
      for (int j = 0; j < w; ++j) out[j] += c * row[j];
    }
  }
  // Y = T * Dw^T
  Tensor out({h, w});
  for (int u = 0; u < h; ++u) {
    const double* trow = tmp.data() + static_cast<std::size_t>(u) * w;
    for (int v = 0; v < w; ++v) {
      const double* brow = dw.data() + static_cast<std::size_t>(v) * w;
      double acc = 0.0;
      for (int j = 0; j < w; ++j) acc += trow[j] * brow[j];
      out.at(u, v) = static_cast<float>(acc);
    }
  }
  return out;
}

// inverse (DCT-III); idct2(dct2(x)) recovers x to float precision
inline Tensor idct2(const Tensor& coeffs) {
  detail::require_image(coeffs, "idct2");
  const int h = coeffs.dim(0), w = coeffs.dim(1);
  const std::vector<double>& dh = detail::dct_basis(h);
  const std::vector<double>& dw = detail::dct_basis(w);
  // T = Dh^T * Y
  std::vector<double> tmp(static_cast<std::size_t>(h) * w, 0.0);
  for (int u = 0; u < h; ++u) {
    const float* yrow = coeffs.data() + static_cast<std::size_t>(u) * w;
    for (int i = 0; i < h; ++i) {
      const double c = dh[static_cast<std::size_t>(u) * h + i];
      double* out = tmp.data() + static_cast<std::size_t>(i) * w;
      for (int j = 0; j < w; ++j) out[j] += c * yrow[j];
    }
  }
  // X = T * Dw
  Tensor out({h, w});
  for (int i = 0; i < h; ++i) {
    const double* trow = tmp.data() + static_cast<std::size_t>(i) * w;
    for (int j = 0; j < w; ++j) {
      double acc = 0.0;
      for (int v = 0; v < w; ++v) acc += trow[v] * dw[static_cast<std::size_t>(v) * w + j];
      out.at(i, j) = static_cast<float>(acc);
    }
  }
  return out;
}

struct FrequencyBand {
  double low_frac;
  double high_frac;
};

// the five catalog bands, in branch order 8..12
inline std::array<FrequencyBand, kFrequencyCount> default_bands() {
  return {{{0.1, 1.0}, {0.3, 1.0}, {0.5, 1.0}, {0.4, 0.5}, {0.8, 0.9}}};
}

inline std::vector<FrequencyBand> default_band_list() {
  const auto bands = default_bands();
  return {bands.begin(), bands.end()};
}

// Binary mask over DCT coefficients: zero on the closed quarter annulus
// r_low <= sqrt(u^2+v^2) <= r_high, with radii given as fractions of
// r_max = sqrt((H-1)^2 + (W-1)^2) measured from the DC coefficient.
class FrequencyMask {
 public:
  static FrequencyMask build(double low_frac, double high_frac, int height, int width) {
    if (!(low_frac >= 0.0 && high_frac <= 1.0 && low_frac <= high_frac)) {
      throw std::invalid_argument("frequency mask fractions must satisfy 0 <= low <= high <= 1");
    }
    if (height < 1 || width < 1) {
      throw std::invalid_argument("frequency mask dims must be positive");
    }
    FrequencyMask m;
    m.low_frac_ = low_frac;
    m.high_frac_ = high_frac;
    m.values_ = Tensor({height, width});
    const double r_max = std::sqrt(static_cast<double>(height - 1) * (height - 1) +
                                   static_cast<double>(width - 1) * (width - 1));
    const double r_low = low_frac * r_max;
    const double r_high = high_frac * r_max;
    for (int u = 0; u < height; ++u) {
      for (int v = 0; v < width; ++v) {
        const double r = std::sqrt(static_cast<double>(u) * u + static_cast<double>(v) * v);
        m.values_.at(u, v) = (r >= r_low && r <= r_high) ? 0.0f : 1.0f;
      }
    }
    return m;
  }

  const Tensor& values() const { return values_; }
  double low_frac() const { return low_frac_; }
  double high_frac() const { return high_frac_; }
  int height() const { return values_.dim(0); }
  int width() const { return values_.dim(1); }

  std::int64_t zero_count() const {
    std::int64_t n = 0;
    for (std::int64_t i = 0; i < values_.size(); ++i) {
      if (values_[i] == 0.0f) ++n;
    }
    return n;
  }

 private:
  FrequencyMask() = default;
  double low_frac_ = 0.0;
  double high_frac_ = 0.0;
  Tensor values_;
};

inline FrequencyMask build_mask(double low_frac, double high_frac, int height, int width) {
  return FrequencyMask::build(low_frac, high_frac, height, width);
}

// idct2(dct2(image) .* mask); an orthogonal projection, hence idempotent
inline Tensor apply_frequency_mask(const Tensor& img, const FrequencyMask& mask) {
  detail::require_image(img, "apply_frequency_mask");
  if (img.dim(0) != mask.height() || img.dim(1) != mask.width()) {
    throw std::invalid_argument("apply_frequency_mask: image " + shape_string(img.shape()) +
                                " does not match mask " + shape_string(mask.values().shape()));
  }
  Tensor coeffs = dct2(img);
  for (std::int64_t i = 0; i < coeffs.size(); ++i) coeffs[i] *= mask.values()[i];
  return idct2(coeffs);
}

}  // namespace denfuse
