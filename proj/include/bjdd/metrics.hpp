// Copyright 2026 The bjdd Authors
// SPDX-License-Identifier: Apache-2.0

/// \file
/// Image quality metrics on the [0,1] scale. Inputs are clipped to [0,1]
/// before comparison and all arithmetic is in double precision.

#pragma once

#include <array>
#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "bjdd/checkpoint.hpp"
#include "bjdd/image.hpp"

namespace bjdd {

/// Reported instead of +inf when the images are identical.
inline constexpr double kPsnrCap = 99.0;

/// 10 log10(1 / mse), or kPsnrCap when mse == 0.
double psnr_from_mse(double mse);

/// Mean squared error over every sample. Shapes must match.
double mse(const PlanarImage& ref, const PlanarImage& test);

/// PSNR with the error pooled over all channels of the image.
double psnr(const PlanarImage& ref, const PlanarImage& test);

/// PSNR of each of the three channels separately (R, G, B).
std::array<double, 3> channel_psnr(const ColorImage& ref, const ColorImage& test);

/// Color PSNR: the MSE is pooled over all three channels, which is not the
/// same as averaging the per-channel PSNRs.
double cpsnr(const ColorImage& ref, const ColorImage& test);

struct SsimOptions {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 1.0;
};

/// Normalized window x window Gaussian weights, row-major.
std::vector<double> ssim_window(const SsimOptions& options = {});

/// Mean SSIM over the valid (unpadded) map, averaged over channels. Throws
/// std::invalid_argument for images smaller than the window.
double ssim(const PlanarImage& ref, const PlanarImage& test, const SsimOptions& options = {});

/// Removes `border` pixels from every side.
PlanarImage crop_border(const PlanarImage& image, std::size_t border);

struct MetricsRow {
  std::string image;
  double sigma = 0.0;
  double rpsnr = 0.0, gpsnr = 0.0, bpsnr = 0.0, cpsnr = 0.0, ssim = 0.0;

  bool operator==(const MetricsRow&) const = default;
};

/// All five metrics for one reconstruction, after optional border cropping.
MetricsRow compare_images(const std::string& name, double sigma, const ColorImage& ref,
                          const ColorImage& test, std::size_t crop = 0);

/// Column means; the image field is "AVG".
MetricsRow average_row(const std::vector<MetricsRow>& rows);

struct MetricsTable {
  std::vector<MetricsRow> rows;
  MetricsRow average;
};

void write_metrics_csv(std::ostream& out, const MetricsTable& table);

/// Reconstructs one image: degrade (index-keyed noise), pack, generator in
/// eval mode, clip to [0,1]. Dimensions must be even.
ColorImage reconstruct(const Generator& generator, const BayerPattern& pattern, const ColorImage& image,
                       const DegradationSpec& degradation, std::uint64_t image_index);

struct NamedImage {
  std::string name;
  ColorImage image;
};

/// Evaluates images in the given order; image i uses noise index i.
MetricsTable evaluate_images(const Model& model, const std::vector<NamedImage>& images, double sigma,
                             std::uint64_t seed, std::size_t crop = 0);

/// The PNG files of a directory in sorted file-name order.
std::vector<std::filesystem::path> list_png_files(const std::filesystem::path& dir);
std::vector<NamedImage> load_png_directory(const std::filesystem::path& dir);

/// Loads the checkpoint and every PNG of `data_dir` (sorted) and evaluates.
MetricsTable evaluate_dataset(const std::filesystem::path& checkpoint, const std::filesystem::path& data_dir,
                              double sigma, std::uint64_t seed, std::size_t crop = 0);

}  // namespace bjdd
