// Copyright 2026 The bjdd Authors
// SPDX-License-Identifier: Apache-2.0

/// \file
/// 8-bit PNG reading and writing. Samples map to v/255 on load and to
/// round(255 v), clamped to [0,255], on save. Errors are DataError.

#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "bjdd/image.hpp"

namespace bjdd {

/// Interleaved 8-bit pixels as stored in the file.
struct Png8 {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 0;  // 1 (gray) or 3 (RGB)
  std::vector<std::uint8_t> pixels;

  bool operator==(const Png8&) const = default;
};

/// Accepts 8-bit gray or 8-bit RGB only (no palette, alpha or 16-bit).
Png8 decode_png(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> encode_png(const Png8& image);

Png8 read_png_file(const std::filesystem::path& path);
void write_png_file(const std::filesystem::path& path, const Png8& image);

/// Requires an 8-bit RGB file.
ColorImage load_png(const std::filesystem::path& path);
void save_png(const std::filesystem::path& path, const ColorImage& image);

/// Requires an 8-bit grayscale file.
BayerMosaic load_mosaic_png(const std::filesystem::path& path);
void save_mosaic_png(const std::filesystem::path& path, const BayerMosaic& mosaic);

std::uint8_t quantize_unit(float v) noexcept;
Png8 to_png8(const PlanarImage& image);
PlanarImage from_png8(const Png8& png);

}  // namespace bjdd
