// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <png.h>

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "poke/common.hpp"

namespace poke {

// Row-major, channel-interleaved raster. T is the storage type; float images
// hold [0,1] color or meters, integer images hold quantized disk formats.
template <typename T>
struct Image {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<T> data;

  Image() = default;
  Image(int w, int h, int c, T fill = T{})
      : width(w), height(h), channels(c),
        data(static_cast<size_t>(w) * h * c, fill) {}

  size_t index(int x, int y, int c = 0) const {
    return (static_cast<size_t>(y) * width + x) * channels + c;
  }
  T& at(int x, int y, int c = 0) { return data[index(x, y, c)]; }
  const T& at(int x, int y, int c = 0) const { return data[index(x, y, c)]; }
  size_t pixel_count() const { return static_cast<size_t>(width) * height; }
};

using ImageF = Image<float>;
using ImageU8 = Image<uint8_t>;
using ImageU16 = Image<uint16_t>;

namespace detail {

struct PngWriteCtx {
  FILE* fp = nullptr;
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~PngWriteCtx() {
    if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
    if (fp) std::fclose(fp);
  }
};

struct PngReadCtx {
  FILE* fp = nullptr;
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~PngReadCtx() {
    if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
    if (fp) std::fclose(fp);
  }
};

template <typename T>
void write_png_impl(const std::string& path, const Image<T>& img, int bit_depth) {
  static_assert(sizeof(T) == 1 || sizeof(T) == 2);
  require(img.width > 0 && img.height > 0, ErrorClass::io, "empty image: " + path);
  require(img.channels == 1 || img.channels == 3, ErrorClass::io,
          "png supports 1 or 3 channels: " + path);

  PngWriteCtx ctx;
  ctx.fp = std::fopen(path.c_str(), "wb");
  if (!ctx.fp) fail(ErrorClass::io, "cannot open for writing: " + path);
  ctx.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  require(ctx.png != nullptr, ErrorClass::io, "png_create_write_struct failed");
  ctx.info = png_create_info_struct(ctx.png);
  require(ctx.info != nullptr, ErrorClass::io, "png_create_info_struct failed");

  std::vector<png_bytep> rows(img.height);
  auto* base = reinterpret_cast<const uint8_t*>(img.data.data());
  size_t stride = static_cast<size_t>(img.width) * img.channels * sizeof(T);
  for (int y = 0; y < img.height; ++y)
    rows[y] = const_cast<png_bytep>(base + y * stride);

  if (setjmp(png_jmpbuf(ctx.png)))
    fail(ErrorClass::io, "png write failed: " + path);

  png_init_io(ctx.png, ctx.fp);
  int color = img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB;
  png_set_IHDR(ctx.png, ctx.info, img.width, img.height, bit_depth, color,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(ctx.png, ctx.info);
  if (bit_depth == 16) png_set_swap(ctx.png);  // host is little-endian
  png_write_image(ctx.png, rows.data());
  png_write_end(ctx.png, nullptr);
}

template <typename T>
Image<T> read_png_impl(const std::string& path, int want_depth) {
  PngReadCtx ctx;
  ctx.fp = std::fopen(path.c_str(), "rb");
  if (!ctx.fp) fail(ErrorClass::io, "cannot open for reading: " + path);
  ctx.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  require(ctx.png != nullptr, ErrorClass::io, "png_create_read_struct failed");
  ctx.info = png_create_info_struct(ctx.png);
  require(ctx.info != nullptr, ErrorClass::io, "png_create_info_struct failed");

  if (setjmp(png_jmpbuf(ctx.png)))
    fail(ErrorClass::io, "png read failed: " + path);

  png_init_io(ctx.png, ctx.fp);
  png_read_info(ctx.png, ctx.info);
  int depth = png_get_bit_depth(ctx.png, ctx.info);
  int color = png_get_color_type(ctx.png, ctx.info);
  require(depth == want_depth, ErrorClass::io,
          "unexpected png bit depth in " + path + ": " + std::to_string(depth));
  require(color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_RGB, ErrorClass::io,
          "unexpected png color type in " + path);
  if (want_depth == 16) png_set_swap(ctx.png);

  Image<T> img(static_cast<int>(png_get_image_width(ctx.png, ctx.info)),
               static_cast<int>(png_get_image_height(ctx.png, ctx.info)),
               color == PNG_COLOR_TYPE_GRAY ? 1 : 3);
  std::vector<png_bytep> rows(img.height);
  auto* base = reinterpret_cast<uint8_t*>(img.data.data());
  size_t stride = static_cast<size_t>(img.width) * img.channels * sizeof(T);
  for (int y = 0; y < img.height; ++y) rows[y] = base + y * stride;
  png_read_image(ctx.png, rows.data());
  return img;
}

}  // namespace detail

inline void write_png8(const std::string& path, const ImageU8& img) {
  detail::write_png_impl(path, img, 8);
}
inline ImageU8 read_png8(const std::string& path) {
  return detail::read_png_impl<uint8_t>(path, 8);
}

inline void write_png16(const std::string& path, const ImageU16& img) {
  require(img.channels == 1, ErrorClass::io, "16-bit png must be single channel");
  detail::write_png_impl(path, img, 16);
}
inline ImageU16 read_png16(const std::string& path) {
  ImageU16 img = detail::read_png_impl<uint16_t>(path, 16);
  require(img.channels == 1, ErrorClass::io, "16-bit png must be single channel: " + path);
  return img;
}

// Raw little-endian float stream, row-major, channel-interleaved. Dimensions
// are not stored in the file; callers pass them from the frame metadata.
inline void write_raw_f32(const std::string& path, const ImageF& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorClass::io, "cannot open for writing: " + path);
  out.write(reinterpret_cast<const char*>(img.data.data()),
            static_cast<std::streamsize>(img.data.size() * sizeof(float)));
  if (!out) fail(ErrorClass::io, "short write: " + path);
}

inline ImageF read_raw_f32(const std::string& path, int width, int height, int channels) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) fail(ErrorClass::io, "cannot open for reading: " + path);
  size_t expect = static_cast<size_t>(width) * height * channels * sizeof(float);
  require(static_cast<size_t>(in.tellg()) == expect, ErrorClass::io,
          "size mismatch in " + path);
  in.seekg(0);
  ImageF img(width, height, channels);
  in.read(reinterpret_cast<char*>(img.data.data()), static_cast<std::streamsize>(expect));
  if (!in) fail(ErrorClass::io, "short read: " + path);
  return img;
}

// Quantization helpers. Color uses round-to-nearest over [0,1] -> [0,255];
// depth stores millimeters in 16 bits with 0 reserved for invalid.
inline ImageU8 to_u8(const ImageF& img) {
  ImageU8 out(img.width, img.height, img.channels);
  for (size_t i = 0; i < img.data.size(); ++i) {
    float v = std::min(1.0f, std::max(0.0f, img.data[i]));
    out.data[i] = static_cast<uint8_t>(v * 255.0f + 0.5f);
  }
  return out;
}

inline ImageF to_float(const ImageU8& img) {
  ImageF out(img.width, img.height, img.channels);
  for (size_t i = 0; i < img.data.size(); ++i)
    out.data[i] = static_cast<float>(img.data[i]) / 255.0f;
  return out;
}

inline ImageU16 depth_to_u16mm(const ImageF& depth) {
  require(depth.channels == 1, ErrorClass::io, "depth image must be single channel");
  ImageU16 out(depth.width, depth.height, 1);
  for (size_t i = 0; i < depth.data.size(); ++i) {
    float mm = depth.data[i] * 1000.0f;
    mm = std::min(mm, 65535.0f);
    out.data[i] = mm <= 0.0f ? 0 : static_cast<uint16_t>(mm + 0.5f);
  }
  return out;
}

inline ImageF u16mm_to_depth(const ImageU16& img) {
  ImageF out(img.width, img.height, 1);
  for (size_t i = 0; i < img.data.size(); ++i)
    out.data[i] = static_cast<float>(img.data[i]) / 1000.0f;
  return out;
}

}  // namespace poke
