// Copyright 2026 The bjdd Authors
// SPDX-License-Identifier: Apache-2.0

#include "bjdd/png_io.hpp"

#include <png.h>

#include <cmath>
#include <csetjmp>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "bjdd/errors.hpp"

namespace bjdd {

namespace fs = std::filesystem;

namespace {

struct ReadCursor {
  const std::vector<std::uint8_t>* bytes;
  std::size_t pos;
};

// libpng reports errors through longjmp; the message is kept here so the
// C++ exception is thrown only after the jump has unwound libpng's frames.
struct ErrorSlot {
  char message[256] = "malformed PNG";
};

void on_error(png_structp png, png_const_charp msg) {
  auto* slot = static_cast<ErrorSlot*>(png_get_error_ptr(png));
  std::strncpy(slot->message, msg, sizeof(slot->message) - 1);
  png_longjmp(png, 1);
}

void on_warning(png_structp, png_const_charp) {}

void read_bytes(png_structp png, png_bytep out, png_size_t n) {
  auto* cur = static_cast<ReadCursor*>(png_get_io_ptr(png));
  if (n > cur->bytes->size() - cur->pos) png_error(png, "unexpected end of PNG data");
  std::memcpy(out, cur->bytes->data() + cur->pos, n);
  cur->pos += n;
}

void write_bytes(png_structp png, png_bytep data, png_size_t n) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + n);
}

void flush_bytes(png_structp) {}

std::vector<std::uint8_t> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

Png8 decode_png(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) throw DataError("not a PNG file");
  ErrorSlot slot;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &slot, on_error, on_warning);
  if (!png) throw std::bad_alloc();
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw std::bad_alloc();
  }
  ReadCursor cursor{&bytes, 0};
  Png8 image;
  std::vector<png_bytep> rows;
  std::string unsupported;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError(std::string("malformed PNG: ") + slot.message);
  }
  png_set_read_fn(png, &cursor, read_bytes);
  png_read_info(png, info);
  const int depth = png_get_bit_depth(png, info);
  const int type = png_get_color_type(png, info);
  if (depth != 8) {
    unsupported = std::to_string(depth) + "-bit samples";
  } else if (type == PNG_COLOR_TYPE_RGB) {
    image.channels = 3;
  } else if (type == PNG_COLOR_TYPE_GRAY) {
    image.channels = 1;
  } else {
    unsupported = "color type " + std::to_string(type) + " (only gray and RGB are supported)";
  }
  if (unsupported.empty()) {
    image.width = png_get_image_width(png, info);
    image.height = png_get_image_height(png, info);
    image.pixels.resize(image.width * image.height * image.channels);
    rows.resize(image.height);
    for (std::size_t y = 0; y < image.height; ++y) rows[y] = image.pixels.data() + y * image.width * image.channels;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
  }
  png_destroy_read_struct(&png, &info, nullptr);
  if (!unsupported.empty()) throw DataError("unsupported PNG: " + unsupported);
  return image;
}

std::vector<std::uint8_t> encode_png(const Png8& image) {
  if (image.channels != 1 && image.channels != 3) throw std::invalid_argument("encode_png: 1 or 3 channels");
  if (image.pixels.size() != image.width * image.height * image.channels || image.width == 0 ||
      image.height == 0) {
    throw std::invalid_argument("encode_png: pixel buffer does not match the dimensions");
  }
  ErrorSlot slot;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &slot, on_error, on_warning);
  if (!png) throw std::bad_alloc();
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw std::bad_alloc();
  }
  std::vector<std::uint8_t> out;
  std::vector<png_bytep> rows(image.height);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw DataError(std::string("PNG encoding failed: ") + slot.message);
  }
  png_set_write_fn(png, &out, write_bytes, flush_bytes);
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width), static_cast<png_uint_32>(image.height), 8,
               image.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (std::size_t y = 0; y < image.height; ++y) {
    rows[y] = const_cast<png_bytep>(image.pixels.data() + y * image.width * image.channels);
  }
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

Png8 read_png_file(const fs::path& path) {
  try {
    return decode_png(read_file(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_png_file(const fs::path& path, const Png8& image) {
  const auto bytes = encode_png(image);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed for " + path.string());
}

std::uint8_t quantize_unit(float v) noexcept {
  const float scaled = std::round(v * 255.0f);
  if (!(scaled > 0.0f)) return 0;  // also maps NaN to 0
  if (scaled >= 255.0f) return 255;
  return static_cast<std::uint8_t>(scaled);
}

Png8 to_png8(const PlanarImage& image) {
  Png8 png{image.width(), image.height(), image.channels(), {}};
  png.pixels.resize(image.size());
  for (std::size_t y = 0; y < image.height(); ++y)
    for (std::size_t x = 0; x < image.width(); ++x)
      for (std::size_t c = 0; c < image.channels(); ++c)
        png.pixels[(y * image.width() + x) * image.channels() + c] = quantize_unit(image.at(c, y, x));
  return png;
}

PlanarImage from_png8(const Png8& png) {
  PlanarImage image(png.channels, png.height, png.width);
  for (std::size_t y = 0; y < png.height; ++y)
    for (std::size_t x = 0; x < png.width; ++x)
      for (std::size_t c = 0; c < png.channels; ++c)
        image.at(c, y, x) = static_cast<float>(png.pixels[(y * png.width + x) * png.channels + c]) / 255.0f;
  return image;
}

ColorImage load_png(const fs::path& path) {
  const Png8 png = read_png_file(path);
  if (png.channels != 3) throw DataError(path.string() + ": expected an RGB image");
  ColorImage image;
  static_cast<PlanarImage&>(image) = from_png8(png);
  return image;
}

void save_png(const fs::path& path, const ColorImage& image) { write_png_file(path, to_png8(image)); }

BayerMosaic load_mosaic_png(const fs::path& path) {
  const Png8 png = read_png_file(path);
  if (png.channels != 1) throw DataError(path.string() + ": expected a grayscale mosaic");
  BayerMosaic mosaic;
  static_cast<PlanarImage&>(mosaic) = from_png8(png);
  return mosaic;
}

void save_mosaic_png(const fs::path& path, const BayerMosaic& mosaic) { write_png_file(path, to_png8(mosaic)); }

}  // namespace bjdd
