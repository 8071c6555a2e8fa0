// Copyright 2026 The bjdd Authors
// SPDX-License-Identifier: Apache-2.0

#include "bjdd/cfa.hpp"

#include <algorithm>
#include <cctype>
#include <stdexcept>

#include "bjdd/rng.hpp"

namespace bjdd {

namespace {

void require_even(const PlanarImage& img, const char* op) {
  if (img.height() % 2 != 0 || img.width() % 2 != 0) {
    throw std::invalid_argument(std::string(op) + ": dimensions must be even, got " +
                                std::to_string(img.height()) + "x" + std::to_string(img.width()));
  }
}

char channel_letter(CfaChannel c) {
  switch (c) {
    case CfaChannel::R: return 'r';
    case CfaChannel::G: return 'g';
    case CfaChannel::B: return 'b';
  }
  return '?';
}

}  // namespace

BayerPattern::BayerPattern(std::array<CfaChannel, 4> cells) : cells_(cells) {
  int r = 0, g = 0, b = 0;
  std::size_t first_g = 4, second_g = 4, r_cell = 4, b_cell = 4;
  for (std::size_t i = 0; i < 4; ++i) {
    switch (cells[i]) {
      case CfaChannel::R: ++r; r_cell = i; break;
      case CfaChannel::B: ++b; b_cell = i; break;
      case CfaChannel::G:
        ++g;
        (first_g == 4 ? first_g : second_g) = i;
        break;
    }
  }
  if (r != 1 || g != 2 || b != 1) {
    throw std::invalid_argument("BayerPattern: need exactly one R, two G and one B per cell");
  }
  if (first_g + second_g != 3) throw std::invalid_argument("BayerPattern: the two G cells must be diagonal");
  pack_order_ = {r_cell, first_g, second_g, b_cell};
}

BayerPattern BayerPattern::rggb() {
  return BayerPattern({CfaChannel::R, CfaChannel::G, CfaChannel::G, CfaChannel::B});
}

BayerPattern BayerPattern::parse(std::string_view name) {
  if (name.size() != 4) throw std::invalid_argument("BayerPattern: expected four letters");
  std::array<CfaChannel, 4> cells{};
  for (std::size_t i = 0; i < 4; ++i) {
    switch (std::tolower(static_cast<unsigned char>(name[i]))) {
      case 'r': cells[i] = CfaChannel::R; break;
      case 'g': cells[i] = CfaChannel::G; break;
      case 'b': cells[i] = CfaChannel::B; break;
      default: throw std::invalid_argument("BayerPattern: unknown channel letter in '" + std::string(name) + "'");
    }
  }
  return BayerPattern(cells);
}

std::string BayerPattern::name() const {
  std::string s;
  for (CfaChannel c : cells_) s.push_back(channel_letter(c));
  return s;
}

BayerMosaic mosaic(const ColorImage& image, const BayerPattern& pattern) {
  require_even(image, "mosaic");
  BayerMosaic out(image.height(), image.width());
  for (std::size_t y = 0; y < image.height(); ++y)
    for (std::size_t x = 0; x < image.width(); ++x)
      out.at(0, y, x) = image.at(static_cast<std::size_t>(pattern.at(y, x)), y, x);
  return out;
}

ColorImage scatter_to_color(const BayerMosaic& m, const BayerPattern& pattern) {
  ColorImage out(m.height(), m.width());
  for (std::size_t y = 0; y < m.height(); ++y)
    for (std::size_t x = 0; x < m.width(); ++x)
      out.at(static_cast<std::size_t>(pattern.at(y, x)), y, x) = m.at(0, y, x);
  return out;
}

BayerMosaic add_gaussian_noise(const BayerMosaic& m, const DegradationSpec& spec,
                               std::uint64_t image_index) {
  if (!(spec.sigma >= 0)) throw std::invalid_argument("add_gaussian_noise: sigma must be >= 0");
  if (spec.sigma == 0) return m;
  BayerMosaic out = m;
  CounterRng rng(spec.seed, image_index);
  const double stddev = spec.sigma / 255.0;
  for (float& v : out.values()) {
    double noisy = v + stddev * rng.normal();
    if (spec.clip) noisy = std::clamp(noisy, 0.0, 1.0);
    v = static_cast<float>(noisy);
  }
  return out;
}

PackedInput pack_raw(const BayerMosaic& m, const BayerPattern& pattern) {
  require_even(m, "pack_raw");
  PackedInput out(m.height() / 2, m.width() / 2);
  const auto& order = pattern.pack_order();
  for (std::size_t ch = 0; ch < 4; ++ch) {
    const std::size_t dy = order[ch] / 2, dx = order[ch] % 2;
    for (std::size_t h = 0; h < out.height(); ++h)
      for (std::size_t w = 0; w < out.width(); ++w) out.at(ch, h, w) = m.at(0, 2 * h + dy, 2 * w + dx);
  }
  return out;
}

BayerMosaic unpack(const PackedInput& p, const BayerPattern& pattern) {
  BayerMosaic out(p.height() * 2, p.width() * 2);
  const auto& order = pattern.pack_order();
  for (std::size_t ch = 0; ch < 4; ++ch) {
    const std::size_t dy = order[ch] / 2, dx = order[ch] % 2;
    for (std::size_t h = 0; h < p.height(); ++h)
      for (std::size_t w = 0; w < p.width(); ++w) out.at(0, 2 * h + dy, 2 * w + dx) = p.at(ch, h, w);
  }
  return out;
}

PackedInput degrade_and_pack(const ColorImage& image, const BayerPattern& pattern,
                             const DegradationSpec& spec, std::uint64_t image_index) {
  return pack_raw(add_gaussian_noise(mosaic(image, pattern), spec, image_index), pattern);
}

PlanarImage apply_dihedral(const PlanarImage& image, Dihedral op) {
  if (image.height() != image.width()) {
    throw std::invalid_argument("apply_dihedral: image must be square");
  }
  const std::size_t n = image.height(), last = n - 1;
  PlanarImage out(image.channels(), n, n);
  for (std::size_t c = 0; c < image.channels(); ++c)
    for (std::size_t y = 0; y < n; ++y)
      for (std::size_t x = 0; x < n; ++x) {
        std::size_t sy = y, sx = x;
        switch (op) {
          case Dihedral::Identity: break;
          case Dihedral::Rotate90: sy = x; sx = last - y; break;
          case Dihedral::Rotate180: sy = last - y; sx = last - x; break;
          case Dihedral::Rotate270: sy = last - x; sx = y; break;
          case Dihedral::FlipLeftRight: sx = last - x; break;
          case Dihedral::FlipUpDown: sy = last - y; break;
          case Dihedral::Transpose: sy = x; sx = y; break;
          case Dihedral::AntiTranspose: sy = last - x; sx = last - y; break;
        }
        out.at(c, y, x) = image.at(c, sy, sx);
      }
  return out;
}

std::vector<ColorImage> augment8(const ColorImage& image) {
  if (image.height() != image.width()) throw std::invalid_argument("augment8: patch must be square");
  std::vector<ColorImage> out;
  out.reserve(kDihedralGroup.size());
  for (Dihedral op : kDihedralGroup) {
    ColorImage img;
    static_cast<PlanarImage&>(img) = apply_dihedral(image, op);
    out.push_back(std::move(img));
  }
  return out;
}

}  // namespace bjdd
