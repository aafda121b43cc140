#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <vector>

#include "denfuse/rng.hpp"
#include "denfuse/transforms.hpp"
#include "oracles.hpp"

using namespace denfuse;

namespace {

Tensor random_image(int h, int w, Rng& rng) { return oracle::random_tensor({h, w}, rng, 0.0, 1.0); }

const std::vector<Manipulation> kSpatialIds = {
    Manipulation::Rot90VMirror,  Manipulation::VMirror, Manipulation::Rot270,
    Manipulation::Rot180VMirror, Manipulation::Rot90,   Manipulation::Rot180,
    Manipulation::Rot270VMirror};

}  // namespace

TEST(SpatialTest, Rot90PixelMapping) {
  // (i,j) -> (j, H-1-i)
  Rng rng(31);
  Tensor img = random_image(3, 5, rng);
  Tensor r = rot90(img);
  ASSERT_EQ(r.dim(0), 5);
  ASSERT_EQ(r.dim(1), 3);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 5; ++j) EXPECT_FLOAT_EQ(r.at(j, 3 - 1 - i), img.at(i, j));
  }
}

TEST(SpatialTest, Rot180TwiceIsIdentity) {
  Rng rng(32);
  Tensor img = random_image(6, 4, rng);
  EXPECT_TRUE(bit_equal(rot180(rot180(img)), img));
}

TEST(SpatialTest, FourRot90ComposeToIdentity) {
  Rng rng(33);
  Tensor img = random_image(5, 7, rng);
  EXPECT_TRUE(bit_equal(rot90(rot90(rot90(rot90(img)))), img));
}

TEST(SpatialTest, VMirrorIsInvolution) {
  Rng rng(34);
  Tensor img = random_image(4, 6, rng);
  EXPECT_TRUE(bit_equal(vmirror(vmirror(img)), img));
  EXPECT_TRUE(bit_equal(invert_spatial(apply_spatial(img, Manipulation::VMirror), Manipulation::VMirror),
                        img));
}

TEST(SpatialTest, Rot90InverseIsRot270) {
  Rng rng(35);
  Tensor img = random_image(5, 3, rng);
  EXPECT_TRUE(bit_equal(rot270(rot90(img)), img));
  EXPECT_TRUE(bit_equal(invert_spatial(apply_spatial(img, Manipulation::Rot90), Manipulation::Rot90), img));
}

TEST(SpatialTest, AllSevenRoundTripBitExactly) {
  Rng rng(36);
  for (auto [h, w] : std::vector<std::pair<int, int>>{{8, 8}, {5, 9}, {1, 4}, {16, 12}}) {
    Tensor img = random_image(h, w, rng);
    for (Manipulation m : kSpatialIds) {
      EXPECT_TRUE(bit_equal(invert_spatial(apply_spatial(img, m), m), img))
          << manipulation_name(m) << " on " << h << "x" << w;
    }
  }
}

TEST(SpatialTest, SevenTransformsAreDistinctAndNotIdentity) {
  // distinguishes all dihedral elements on an asymmetric image
  Rng rng(37);
  Tensor img = random_image(6, 6, rng);
  std::vector<Tensor> results;
  results.push_back(img);
  for (Manipulation m : kSpatialIds) results.push_back(apply_spatial(img, m));
  for (std::size_t a = 0; a < results.size(); ++a) {
    for (std::size_t b = a + 1; b < results.size(); ++b) {
      EXPECT_FALSE(bit_equal(results[a], results[b])) << a << " vs " << b;
    }
  }
}

TEST(SpatialTest, RejectsNonSpatialIds) {
  Tensor img({2, 2}, {1, 2, 3, 4});
  EXPECT_THROW(apply_spatial(img, Manipulation::Identity), std::invalid_argument);
  EXPECT_THROW(apply_spatial(img, Manipulation::FmBand1), std::invalid_argument);
  EXPECT_THROW(invert_spatial(img, Manipulation::FmBand3), std::invalid_argument);
}

TEST(ManipulationTest, IndexMappingIsFixed) {
  EXPECT_EQ(branch_index(Manipulation::Identity), 0);
  EXPECT_EQ(branch_index(Manipulation::Rot90VMirror), 1);
  EXPECT_EQ(branch_index(Manipulation::VMirror), 2);
  EXPECT_EQ(branch_index(Manipulation::Rot270), 3);
  EXPECT_EQ(branch_index(Manipulation::Rot180VMirror), 4);
  EXPECT_EQ(branch_index(Manipulation::Rot90), 5);
  EXPECT_EQ(branch_index(Manipulation::Rot180), 6);
  EXPECT_EQ(branch_index(Manipulation::Rot270VMirror), 7);
  EXPECT_EQ(branch_index(Manipulation::FmBand5), 12);
  EXPECT_THROW(manipulation_from_index(13), std::invalid_argument);
  EXPECT_THROW(manipulation_from_index(-1), std::invalid_argument);
  for (int i = 0; i < kBranchCount; ++i) {
    EXPECT_EQ(branch_index(manipulation_from_index(i)), i);
  }
}

TEST(DctTest, ConstantImageHasOnlyDcCoefficient) {
  const float c = 0.37f;
  Tensor img = Tensor::full({5, 7}, c);
  Tensor coeffs = dct2(img);
  EXPECT_NEAR(coeffs.at(0, 0), c * std::sqrt(5.0 * 7.0), 1e-5);
  for (int u = 0; u < 5; ++u) {
    for (int v = 0; v < 7; ++v) {
      if (u == 0 && v == 0) continue;
      EXPECT_NEAR(coeffs.at(u, v), 0.0, 1e-5);
    }
  }
}

TEST(DctTest, EnergyIsPreserved) {
  Rng rng(41);
  for (int trial = 0; trial < 5; ++trial) {
    Tensor img = random_image(12, 9, rng);
    Tensor coeffs = dct2(img);
    double ex = 0.0, ec = 0.0;
    for (std::int64_t i = 0; i < img.size(); ++i) {
      ex += static_cast<double>(img[i]) * img[i];
      ec += static_cast<double>(coeffs[i]) * coeffs[i];
    }
    EXPECT_NEAR(ec / ex, 1.0, 1e-4);
  }
}

TEST(DctTest, MatchesNaiveCosineSumOracle) {
  Rng rng(42);
  for (int h = 1; h <= 8; ++h) {
    for (int w : {1, 3, 8}) {
      Tensor img = random_image(h, w, rng);
      Tensor coeffs = dct2(img);
      const std::vector<double> expected = oracle::dct2_naive(img);
      for (std::int64_t i = 0; i < coeffs.size(); ++i) {
        EXPECT_NEAR(coeffs[i], expected[static_cast<std::size_t>(i)], 1e-5)
            << h << "x" << w << " at " << i;
      }
      Tensor back = idct2(coeffs);
      const std::vector<double> expected_back = oracle::idct2_naive(coeffs);
      for (std::int64_t i = 0; i < back.size(); ++i) {
        EXPECT_NEAR(back[i], expected_back[static_cast<std::size_t>(i)], 1e-5);
      }
    }
  }
}

TEST(DctTest, RoundTripWithinTolerance) {
  Rng rng(43);
  Tensor img = random_image(16, 16, rng);
  EXPECT_LT(max_abs_diff(idct2(dct2(img)), img), 1e-5);
}

TEST(DctTest, OneHotDcGivesConstantImage) {
  Tensor coeffs({4, 4});
  coeffs.at(0, 0) = 2.0f;
  Tensor img = idct2(coeffs);
  const float expected = 2.0f / std::sqrt(16.0f);
  for (std::int64_t i = 0; i < img.size(); ++i) EXPECT_NEAR(img[i], expected, 1e-6);
}

TEST(DctTest, Linearity) {
  Rng rng(44);
  Tensor x = random_image(10, 6, rng);
  Tensor y = random_image(10, 6, rng);
  const float a = 1.7f, b = -0.6f;
  Tensor combo({10, 6});
  for (std::int64_t i = 0; i < combo.size(); ++i) combo[i] = a * x[i] + b * y[i];
  Tensor lhs = dct2(combo);
  Tensor tx = dct2(x), ty = dct2(y);
  for (std::int64_t i = 0; i < lhs.size(); ++i) {
    EXPECT_NEAR(lhs[i], a * tx[i] + b * ty[i], 1e-5);
  }
}

TEST(MaskTest, FullBandZeroesEverythingIncludingDc) {
  FrequencyMask mask = build_mask(0.0, 1.0, 6, 9);
  EXPECT_EQ(mask.zero_count(), 6 * 9);
}

TEST(MaskTest, DegenerateBandMatchesExactRadiusOnly) {
  FrequencyMask mask = build_mask(0.5, 0.5, 8, 8);
  const double r_max = std::sqrt(49.0 + 49.0);
  for (int u = 0; u < 8; ++u) {
    for (int v = 0; v < 8; ++v) {
      const bool zero = std::sqrt(static_cast<double>(u * u + v * v)) == 0.5 * r_max;
      EXPECT_EQ(mask.values().at(u, v) == 0.0f, zero);
    }
  }
}

TEST(MaskTest, ZeroSetMatchesBruteForceEnumeration) {
  for (const FrequencyBand& band : default_bands()) {
    for (auto [h, w] : std::vector<std::pair<int, int>>{{8, 8}, {16, 16}, {33, 47}, {64, 64}}) {
      FrequencyMask mask = build_mask(band.low_frac, band.high_frac, h, w);
      const double r_max =
          std::sqrt(static_cast<double>(h - 1) * (h - 1) + static_cast<double>(w - 1) * (w - 1));
      std::int64_t zeros = 0;
      for (int u = 0; u < h; ++u) {
        for (int v = 0; v < w; ++v) {
          const double r = std::sqrt(static_cast<double>(u) * u + static_cast<double>(v) * v);
          const bool expect_zero = r >= band.low_frac * r_max && r <= band.high_frac * r_max;
          if (expect_zero) ++zeros;
          EXPECT_EQ(mask.values().at(u, v) == 0.0f, expect_zero)
              << "band [" << band.low_frac << "," << band.high_frac << "] at (" << u << "," << v << ")";
        }
      }
      EXPECT_EQ(mask.zero_count(), zeros);
    }
  }
}

TEST(MaskTest, LowPassMasksAreNested) {
  // zero-set(0.5,1.0) subset of zero-set(0.3,1.0) subset of zero-set(0.1,1.0)
  const int h = 32, w = 32;
  FrequencyMask fm1 = build_mask(0.1, 1.0, h, w);
  FrequencyMask fm2 = build_mask(0.3, 1.0, h, w);
  FrequencyMask fm3 = build_mask(0.5, 1.0, h, w);
  for (std::int64_t i = 0; i < fm1.values().size(); ++i) {
    if (fm3.values()[i] == 0.0f) EXPECT_EQ(fm2.values()[i], 0.0f);
    if (fm2.values()[i] == 0.0f) EXPECT_EQ(fm1.values()[i], 0.0f);
  }
  EXPECT_LT(fm3.zero_count(), fm2.zero_count());
  EXPECT_LT(fm2.zero_count(), fm1.zero_count());
}

TEST(MaskTest, RejectsBadFractions) {
  EXPECT_THROW(build_mask(-0.1, 1.0, 8, 8), std::invalid_argument);
  EXPECT_THROW(build_mask(0.0, 1.1, 8, 8), std::invalid_argument);
  EXPECT_THROW(build_mask(0.6, 0.5, 8, 8), std::invalid_argument);
}

TEST(MaskApplyTest, AllOnesMaskKeepsImage) {
  Rng rng(45);
  Tensor img = random_image(12, 12, rng);
  // low > high is rejected, so build an annulus that is empty by geometry:
  // a degenerate band at an unachievable radius keeps every coefficient
  FrequencyMask mask = build_mask(0.97231, 0.97231, 12, 12);
  ASSERT_EQ(mask.zero_count(), 0);
  EXPECT_LT(max_abs_diff(apply_frequency_mask(img, mask), img), 1e-5);
}

TEST(MaskApplyTest, FullMaskZeroesImage) {
  Rng rng(46);
  Tensor img = random_image(9, 5, rng);
  FrequencyMask mask = build_mask(0.0, 1.0, 9, 5);
  Tensor out = apply_frequency_mask(img, mask);
  for (std::int64_t i = 0; i < out.size(); ++i) EXPECT_NEAR(out[i], 0.0, 1e-6);
}

TEST(MaskApplyTest, IdempotentWithinTolerance) {
  Rng rng(47);
  for (const FrequencyBand& band : default_bands()) {
    Tensor img = random_image(24, 24, rng);
    FrequencyMask mask = build_mask(band.low_frac, band.high_frac, 24, 24);
    Tensor once = apply_frequency_mask(img, mask);
    Tensor twice = apply_frequency_mask(once, mask);
    EXPECT_LT(max_abs_diff(once, twice), 1e-4);
  }
}

TEST(MaskApplyTest, IsOrthogonalProjection) {
  // <x - P(x), P(x)> ~= 0
  Rng rng(48);
  for (const FrequencyBand& band : default_bands()) {
    Tensor img = random_image(20, 20, rng);
    FrequencyMask mask = build_mask(band.low_frac, band.high_frac, 20, 20);
    Tensor proj = apply_frequency_mask(img, mask);
    double inner = 0.0;
    for (std::int64_t i = 0; i < img.size(); ++i) {
      inner += (static_cast<double>(img[i]) - proj[i]) * proj[i];
    }
    EXPECT_LT(std::abs(inner), 1e-3);
  }
}

TEST(MaskApplyTest, RejectsDimensionMismatch) {
  Tensor img({4, 4});
  FrequencyMask mask = build_mask(0.1, 1.0, 8, 8);
  EXPECT_THROW(apply_frequency_mask(img, mask), std::invalid_argument);
}

TEST(SpatialGroupTest, InversesStayInsideIdentityPlusSm) {
  // composing each transform with its inverse candidates lands on identity
  Rng rng(49);
  Tensor img = random_image(8, 8, rng);
  for (Manipulation m : kSpatialIds) {
    Tensor forward = apply_spatial(img, m);
    bool found_inverse = false;
    for (Manipulation inv : kSpatialIds) {
      if (bit_equal(apply_spatial(forward, inv), img)) {
        found_inverse = true;
        break;
      }
    }
    // self-inverse via invert_spatial always works; an explicit SM inverse
    // must also exist because {identity + SM} is the full dihedral group
    EXPECT_TRUE(found_inverse || bit_equal(forward, img)) << manipulation_name(m);
  }
}
