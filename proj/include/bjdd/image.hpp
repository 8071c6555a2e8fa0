// Copyright 2026 The bjdd Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "bjdd/tensor.hpp"

namespace bjdd {

/// Channel-planar float image, (C,H,W) row-major.
class PlanarImage {
 public:
  PlanarImage() = default;
  PlanarImage(std::size_t channels, std::size_t height, std::size_t width, float fill = 0.0f)
      : channels_(channels), height_(height), width_(width),
        data_(channels * height * width, fill) {}

  std::size_t channels() const noexcept { return channels_; }
  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t size() const noexcept { return data_.size(); }

  float& at(std::size_t c, std::size_t y, std::size_t x) noexcept {
    return data_[(c * height_ + y) * width_ + x];
  }
  float at(std::size_t c, std::size_t y, std::size_t x) const noexcept {
    return data_[(c * height_ + y) * width_ + x];
  }

  std::span<float> plane(std::size_t c) noexcept {
    return std::span<float>(data_).subspan(c * height_ * width_, height_ * width_);
  }
  std::span<const float> plane(std::size_t c) const noexcept {
    return std::span<const float>(data_).subspan(c * height_ * width_, height_ * width_);
  }

  std::span<float> values() noexcept { return data_; }
  std::span<const float> values() const noexcept { return data_; }

  bool operator==(const PlanarImage&) const = default;

 private:
  std::size_t channels_ = 0, height_ = 0, width_ = 0;
  std::vector<float> data_;
};

/// Full-resolution RGB image, nominally in [0,1].
struct ColorImage : PlanarImage {
  ColorImage() = default;
  ColorImage(std::size_t height, std::size_t width, float fill = 0.0f)
      : PlanarImage(3, height, width, fill) {}
};

/// Single-plane color filter array observation.
struct BayerMosaic : PlanarImage {
  BayerMosaic() = default;
  BayerMosaic(std::size_t height, std::size_t width, float fill = 0.0f)
      : PlanarImage(1, height, width, fill) {}
};

/// Half-resolution 4-channel rearrangement of a mosaic (generator input).
struct PackedInput : PlanarImage {
  PackedInput() = default;
  PackedInput(std::size_t half_height, std::size_t half_width, float fill = 0.0f)
      : PlanarImage(4, half_height, half_width, fill) {}
};

/// Stacks same-shaped images into an (N,C,H,W) tensor.
Tensor stack_images(std::span<const PlanarImage* const> images);
Tensor stack_images(std::span<const ColorImage> images);
Tensor stack_images(std::span<const PackedInput> images);

/// Extracts sample `index` of an (N,3,H,W) batch.
ColorImage color_image_from_batch(const Tensor& batch, std::size_t index);

/// Clamps every value to [0,1].
void clip_unit(PlanarImage& image) noexcept;

}  // namespace bjdd
