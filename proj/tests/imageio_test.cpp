#include <gtest/gtest.h>

#include <png.h>

#include <cstdio>
#include <filesystem>
#include <vector>

#include "denfuse/errors.hpp"
#include "denfuse/image_io.hpp"
#include "denfuse/rng.hpp"
#include "oracles.hpp"

using namespace denfuse;

namespace {

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / name;
}

// minimal writers for formats our saver does not produce
void write_png_raw(const std::string& path, int h, int w, int bit_depth, int color_type,
                   const std::vector<std::uint8_t>& rows_bytes, std::size_t row_bytes) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  ASSERT_NE(f, nullptr);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  ASSERT_EQ(setjmp(png_jmpbuf(png)), 0);
  png_init_io(png, f);
  png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), bit_depth,
               color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_bytep> rows(static_cast<std::size_t>(h));
  for (int y = 0; y < h; ++y) {
    rows[static_cast<std::size_t>(y)] = const_cast<png_bytep>(rows_bytes.data() + y * row_bytes);
  }
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(f);
}

}  // namespace

TEST(PngTest, EightBitRoundTripIsLossless) {
  // quantized values survive save/load exactly
  Rng rng(111);
  Tensor img({9, 13});
  for (std::int64_t i = 0; i < img.size(); ++i) {
    img[i] = static_cast<float>(rng.below(256)) / 255.0f;
  }
  const auto path = temp_file("denfuse_png8.png");
  save_image_png(path.string(), img);
  Tensor back = load_image_png(path.string());
  EXPECT_TRUE(bit_equal(back, img));
  // second round trip is a fixed point
  save_image_png(path.string(), back);
  EXPECT_TRUE(bit_equal(load_image_png(path.string()), back));
  std::filesystem::remove(path);
}

TEST(PngTest, SixteenBitGrayLoads) {
  const int h = 3, w = 4;
  std::vector<std::uint8_t> rows(static_cast<std::size_t>(h) * w * 2);
  std::vector<std::uint16_t> values = {0,     1,     256,   65535, 1000,  2000,
                                       30000, 40000, 50000, 60000, 12345, 54321};
  for (int i = 0; i < h * w; ++i) {
    rows[static_cast<std::size_t>(2 * i)] = static_cast<std::uint8_t>(values[static_cast<std::size_t>(i)] >> 8);
    rows[static_cast<std::size_t>(2 * i + 1)] = static_cast<std::uint8_t>(values[static_cast<std::size_t>(i)] & 0xFF);
  }
  const auto path = temp_file("denfuse_png16.png");
  write_png_raw(path.string(), h, w, 16, PNG_COLOR_TYPE_GRAY, rows, static_cast<std::size_t>(w) * 2);
  Tensor img = load_image_png(path.string());
  ASSERT_EQ(img.dim(0), h);
  ASSERT_EQ(img.dim(1), w);
  for (int i = 0; i < h * w; ++i) {
    EXPECT_NEAR(img[i], values[static_cast<std::size_t>(i)] / 65535.0, 1e-7);
  }
  std::filesystem::remove(path);
}

TEST(PngTest, RgbConvertsViaRec601Luma) {
  const int h = 1, w = 3;
  // pure red, green, blue pixels
  std::vector<std::uint8_t> rows = {255, 0, 0, 0, 255, 0, 0, 0, 255};
  const auto path = temp_file("denfuse_png_rgb.png");
  write_png_raw(path.string(), h, w, 8, PNG_COLOR_TYPE_RGB, rows, static_cast<std::size_t>(w) * 3);
  Tensor img = load_image_png(path.string());
  EXPECT_NEAR(img[0], 0.299, 1e-6);
  EXPECT_NEAR(img[1], 0.587, 1e-6);
  EXPECT_NEAR(img[2], 0.114, 1e-6);
  std::filesystem::remove(path);
}

TEST(PngTest, MissingFileIsDataError) {
  EXPECT_THROW(load_image_png("/nonexistent/denfuse.png"), DataError);
}

TEST(RawFloatTest, RoundTripIsExact) {
  Rng rng(112);
  Tensor img = oracle::random_tensor({7, 5}, rng, -2.0, 2.0);  // unclamped values allowed
  const auto path = temp_file("denfuse_raw.f32");
  save_image_f32(path.string(), img);
  EXPECT_TRUE(bit_equal(load_image_f32(path.string()), img));
  std::filesystem::remove(path);
}

TEST(RawFloatTest, CorruptionIsDetected) {
  Rng rng(113);
  Tensor img = oracle::random_tensor({4, 4}, rng);
  const auto path = temp_file("denfuse_raw_bad.f32");
  save_image_f32(path.string(), img);
  {
    std::FILE* f = std::fopen(path.string().c_str(), "r+b");
    ASSERT_NE(f, nullptr);
    std::fseek(f, -1, SEEK_END);
    const int c = std::fgetc(f);
    std::fseek(f, -1, SEEK_END);
    std::fputc(c ^ 0x20, f);
    std::fclose(f);
  }
  EXPECT_THROW(load_image_f32(path.string()), DataError);
  std::filesystem::remove(path);
}
