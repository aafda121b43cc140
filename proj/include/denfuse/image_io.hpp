#pragma once

// Grayscale image I/O. PNG (8/16-bit gray; RGB converted via Rec.601 luma) for
// corpora and display outputs; a raw float32 container (.f32) for values that
// must survive exactly, like unclamped noisy images.

#include <png.h>

#include <cstdint>
#include <cstdio>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "denfuse/errors.hpp"
#include "denfuse/serial.hpp"
#include "denfuse/tensor.hpp"

namespace denfuse {

namespace detail {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f != nullptr) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace detail

// Load a PNG as an [H,W] tensor in [0,1]. Palette images expand to RGB, RGB(A)
// collapses to luma Y = 0.299R + 0.587G + 0.114B, 16-bit samples divide by 65535.
inline Tensor load_image_png(const std::string& path) {
  detail::FilePtr file(std::fopen(path.c_str(), "rb"));
  if (!file) throw DataError("cannot open image '" + path + "'");

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (png == nullptr) throw std::runtime_error("libpng: read struct allocation failed");
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw std::runtime_error("libpng: info struct allocation failed");
  }
  std::vector<std::uint8_t> raw;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("failed to decode PNG '" + path + "'");
  }

  png_init_io(png, file.get());
  png_read_info(png, info);

  const png_uint_32 width = png_get_image_width(png, info);
  const png_uint_32 height = png_get_image_height(png, info);
  const int color_type = png_get_color_type(png, info);
  int bit_depth = png_get_bit_depth(png, info);

  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);

  bit_depth = png_get_bit_depth(png, info);
  const int channels = png_get_channels(png, info);
  const std::size_t row_bytes = png_get_rowbytes(png, info);

  raw.resize(row_bytes * height);
  rows.resize(height);
  for (png_uint_32 y = 0; y < height; ++y) rows[y] = raw.data() + y * row_bytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  Tensor out({static_cast<int>(height), static_cast<int>(width)});
  const double denom = bit_depth == 16 ? 65535.0 : 255.0;
  for (png_uint_32 y = 0; y < height; ++y) {
    const std::uint8_t* row = raw.data() + y * row_bytes;
    for (png_uint_32 x = 0; x < width; ++x) {
      double sample;
      if (channels == 1) {
        sample = bit_depth == 16
                     ? static_cast<double>((row[2 * x] << 8) | row[2 * x + 1])
                     : static_cast<double>(row[x]);
      } else {
        // 3 channels; 16-bit samples are big-endian in the file
        double rgb[3];
        for (int c = 0; c < 3; ++c) {
          rgb[c] = bit_depth == 16
                       ? static_cast<double>((row[(3 * x + c) * 2] << 8) | row[(3 * x + c) * 2 + 1])
                       : static_cast<double>(row[3 * x + c]);
        }
        sample = 0.299 * rgb[0] + 0.587 * rgb[1] + 0.114 * rgb[2];
      }
      out.at(static_cast<int>(y), static_cast<int>(x)) = static_cast<float>(sample / denom);
    }
  }
  return out;
}

// Save [H,W] values as 8-bit grayscale: round(clamp(v,0,1) * 255).
inline void save_image_png(const std::string& path, const Tensor& img) {
  if (img.rank() != 2) throw std::invalid_argument("save_image_png: expected an [H,W] tensor");
  const int h = img.dim(0), w = img.dim(1);

  detail::FilePtr file(std::fopen(path.c_str(), "wb"));
  if (!file) throw DataError("cannot open '" + path + "' for writing");

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (png == nullptr) throw std::runtime_error("libpng: write struct allocation failed");
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_write_struct(&png, nullptr);
    throw std::runtime_error("libpng: info struct allocation failed");
  }
  std::vector<std::uint8_t> raw(static_cast<std::size_t>(h) * w);
  std::vector<png_bytep> rows(static_cast<std::size_t>(h));
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("failed to encode PNG '" + path + "'");
  }

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const float v = img.at(y, x);
      const float c = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
      raw[static_cast<std::size_t>(y) * w + x] = static_cast<std::uint8_t>(std::lround(c * 255.0f));
    }
    rows[static_cast<std::size_t>(y)] = raw.data() + static_cast<std::size_t>(y) * w;
  }

  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8,
               PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

// Raw float32 [H,W] container: magic, version, dims, payload CRC, LE floats.
inline void save_image_f32(const std::string& path, const Tensor& img) {
  if (img.rank() != 2) throw std::invalid_argument("save_image_f32: expected an [H,W] tensor");
  std::vector<std::uint8_t> out;
  out.insert(out.end(), {'D', 'F', 'I', 'M'});
  serial::put_u32(out, 1);
  serial::put_u32(out, static_cast<std::uint32_t>(img.dim(0)));
  serial::put_u32(out, static_cast<std::uint32_t>(img.dim(1)));
  serial::put_u32(out, serial::crc32_floats(img.data(), static_cast<std::size_t>(img.size())));
  for (std::int64_t i = 0; i < img.size(); ++i) serial::put_f32(out, img[i]);

  detail::FilePtr file(std::fopen(path.c_str(), "wb"));
  if (!file) throw DataError("cannot open '" + path + "' for writing");
  if (std::fwrite(out.data(), 1, out.size(), file.get()) != out.size()) {
    throw std::runtime_error("write failed for '" + path + "'");
  }
}

inline Tensor load_image_f32(const std::string& path) {
  detail::FilePtr file(std::fopen(path.c_str(), "rb"));
  if (!file) throw DataError("cannot open image '" + path + "'");
  std::vector<std::uint8_t> bytes;
  std::uint8_t buf[65536];
  std::size_t got;
  while ((got = std::fread(buf, 1, sizeof(buf), file.get())) > 0) {
    bytes.insert(bytes.end(), buf, buf + got);
  }
  serial::Reader r(bytes.data(), bytes.size());
  const std::uint8_t* magic = r.bytes(4);
  if (magic[0] != 'D' || magic[1] != 'F' || magic[2] != 'I' || magic[3] != 'M') {
    throw DataError("'" + path + "' is not a raw float image");
  }
  if (r.u32() != 1) throw DataError("'" + path + "': unsupported raw image version");
  const std::uint32_t h = r.u32();
  const std::uint32_t w = r.u32();
  const std::uint32_t stored_crc = r.u32();
  const std::size_t count = static_cast<std::size_t>(h) * w;
  std::vector<float> data(count);
  for (std::size_t i = 0; i < count; ++i) data[i] = r.f32();
  if (serial::crc32_floats(data.data(), data.size()) != stored_crc) {
    throw DataError("'" + path + "': payload CRC mismatch");
  }
  return Tensor({static_cast<int>(h), static_cast<int>(w)}, std::move(data));
}

}  // namespace denfuse
