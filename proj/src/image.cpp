// Copyright 2026 The bjdd Authors
// SPDX-License-Identifier: Apache-2.0

#include "bjdd/image.hpp"

#include <algorithm>
#include <stdexcept>

namespace bjdd {

Tensor stack_images(std::span<const PlanarImage* const> images) {
  if (images.empty()) throw std::invalid_argument("stack_images: empty batch");
  const PlanarImage& first = *images.front();
  std::vector<Real> data;
  data.reserve(images.size() * first.size());
  for (const PlanarImage* img : images) {
    if (img->channels() != first.channels() || img->height() != first.height() ||
        img->width() != first.width()) {
      throw std::invalid_argument("stack_images: images differ in shape");
    }
    for (float v : img->values()) data.push_back(static_cast<Real>(v));
  }
  return Tensor({images.size(), first.channels(), first.height(), first.width()}, std::move(data));
}

template <class Image>
static Tensor stack_typed(std::span<const Image> images) {
  std::vector<const PlanarImage*> ptrs;
  ptrs.reserve(images.size());
  for (const auto& img : images) ptrs.push_back(&img);
  return stack_images(std::span<const PlanarImage* const>(ptrs));
}

Tensor stack_images(std::span<const ColorImage> images) { return stack_typed(images); }
Tensor stack_images(std::span<const PackedInput> images) { return stack_typed(images); }

ColorImage color_image_from_batch(const Tensor& batch, std::size_t index) {
  if (batch.rank() != 4 || batch.dim(1) != 3 || index >= batch.dim(0)) {
    throw std::invalid_argument("color_image_from_batch: expected (N,3,H,W) and a valid index");
  }
  ColorImage img(batch.dim(2), batch.dim(3));
  const auto src = batch.data().subspan(index * img.size(), img.size());
  std::transform(src.begin(), src.end(), img.values().begin(),
                 [](Real v) { return static_cast<float>(v); });
  return img;
}

void clip_unit(PlanarImage& image) noexcept {
  for (float& v : image.values()) v = std::clamp(v, 0.0f, 1.0f);
}

}  // namespace bjdd
