// Copyright 2026 The bjdd Authors
// SPDX-License-Identifier: Apache-2.0

/// \file
/// Bayer degradation: mosaic sampling, additive Gaussian noise, packing the
/// mosaic into a half-resolution 4-channel input, and D4 augmentation.

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "bjdd/image.hpp"

namespace bjdd {

enum class CfaChannel : std::uint8_t { R = 0, G = 1, B = 2 };

/// A 2x2 Bayer cell. Cells are indexed in raster order:
/// 0 = (0,0), 1 = (0,1), 2 = (1,0), 3 = (1,1).
class BayerPattern {
 public:
  /// RGGB: R at (0,0), G at (0,1) and (1,0), B at (1,1).
  BayerPattern() : BayerPattern(rggb()) {}
  explicit BayerPattern(std::array<CfaChannel, 4> cells);

  static BayerPattern rggb();
  /// Parses "rggb", "grbg", "gbrg" or "bggr" (case-insensitive).
  static BayerPattern parse(std::string_view name);

  std::string name() const;
  CfaChannel at(std::size_t y, std::size_t x) const noexcept { return cells_[(y % 2) * 2 + x % 2]; }

  /// Raster cell index of each packed channel, in packing order
  /// (R, first G in raster order, second G, B). For RGGB this is (0,1,2,3).
  const std::array<std::size_t, 4>& pack_order() const noexcept { return pack_order_; }

  bool operator==(const BayerPattern& other) const noexcept { return cells_ == other.cells_; }

 private:
  std::array<CfaChannel, 4> cells_;
  std::array<std::size_t, 4> pack_order_{};
};

struct DegradationSpec {
  /// Noise standard deviation on the 0-255 scale; applied as sigma/255.
  double sigma = 0.0;
  std::uint64_t seed = 0;
  bool clip = true;
};

/// Samples one channel per pixel according to the pattern. Dimensions must
/// be even.
BayerMosaic mosaic(const ColorImage& image, const BayerPattern& pattern = {});

/// Places each CFA sample in its own channel, other channels zero.
ColorImage scatter_to_color(const BayerMosaic& mosaic, const BayerPattern& pattern = {});

/// y = m + n with n ~ N(0, (sigma/255)^2) i.i.d., optionally clipped to
/// [0,1]. The noise stream is keyed by (spec.seed, image_index), so results
/// do not depend on call order. sigma == 0 returns the input unchanged.
BayerMosaic add_gaussian_noise(const BayerMosaic& mosaic, const DegradationSpec& spec,
                               std::uint64_t image_index = 0);

/// pack(m)(ch, h, w) = m(2h + dy, 2w + dx) for the cell (dy,dx) of channel ch.
PackedInput pack_raw(const BayerMosaic& mosaic, const BayerPattern& pattern = {});
BayerMosaic unpack(const PackedInput& packed, const BayerPattern& pattern = {});

/// mosaic, add_gaussian_noise and pack_raw in sequence.
PackedInput degrade_and_pack(const ColorImage& image, const BayerPattern& pattern,
                             const DegradationSpec& spec, std::uint64_t image_index);

enum class Dihedral : std::uint8_t {
  Identity,
  Rotate90,
  Rotate180,
  Rotate270,
  FlipLeftRight,
  FlipUpDown,
  Transpose,
  AntiTranspose,
};

inline constexpr std::array<Dihedral, 8> kDihedralGroup = {
    Dihedral::Identity,      Dihedral::Rotate90,   Dihedral::Rotate180, Dihedral::Rotate270,
    Dihedral::FlipLeftRight, Dihedral::FlipUpDown, Dihedral::Transpose, Dihedral::AntiTranspose,
};

/// Applies one D4 element to a square image (any channel count).
PlanarImage apply_dihedral(const PlanarImage& image, Dihedral op);

/// The 8 D4 transforms of a square patch, in kDihedralGroup order.
std::vector<ColorImage> augment8(const ColorImage& image);

}  // namespace bjdd
