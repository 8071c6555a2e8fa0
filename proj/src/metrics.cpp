// Copyright 2026 The bjdd Authors
// SPDX-License-Identifier: Apache-2.0

#include "bjdd/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "bjdd/errors.hpp"
#include "bjdd/png_io.hpp"

namespace bjdd {

namespace fs = std::filesystem;

namespace {

void require_same_shape(const PlanarImage& a, const PlanarImage& b, const char* op) {
  if (a.channels() != b.channels() || a.height() != b.height() || a.width() != b.width()) {
    throw std::invalid_argument(std::string(op) + ": image shapes differ");
  }
}

double clip01(float v) { return std::clamp(static_cast<double>(v), 0.0, 1.0); }

double plane_sse(std::span<const float> a, std::span<const float> b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = clip01(a[i]) - clip01(b[i]);
    sum += d * d;
  }
  return sum;
}

/// Valid-mode separable filtering of an h x w plane with a 1-D kernel.
std::vector<double> filter_valid(const std::vector<double>& src, std::size_t h, std::size_t w,
                                 const std::vector<double>& k) {
  const std::size_t n = k.size();
  const std::size_t oh = h - n + 1, ow = w - n + 1;
  std::vector<double> rows(h * ow, 0.0);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < ow; ++x) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += k[i] * src[y * w + x + i];
      rows[y * ow + x] = s;
    }
  std::vector<double> out(oh * ow, 0.0);
  for (std::size_t y = 0; y < oh; ++y)
    for (std::size_t x = 0; x < ow; ++x) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += k[i] * rows[(y + i) * ow + x];
      out[y * ow + x] = s;
    }
  return out;
}

std::vector<double> gaussian_1d(const SsimOptions& o) {
  std::vector<double> k(static_cast<std::size_t>(o.window));
  const double center = (o.window - 1) / 2.0;
  double total = 0.0;
  for (std::size_t i = 0; i < k.size(); ++i) {
    const double d = static_cast<double>(i) - center;
    k[i] = std::exp(-d * d / (2.0 * o.sigma * o.sigma));
    total += k[i];
  }
  for (double& v : k) v /= total;
  return k;
}

double ssim_plane(std::span<const float> a, std::span<const float> b, std::size_t h, std::size_t w,
                  const SsimOptions& o) {
  const std::vector<double> k = gaussian_1d(o);
  const std::size_t n = h * w;
  std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = clip01(a[i]);
    y[i] = clip01(b[i]);
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  const auto mx = filter_valid(x, h, w, k), my = filter_valid(y, h, w, k);
  const auto exx = filter_valid(xx, h, w, k), eyy = filter_valid(yy, h, w, k);
  const auto exy = filter_valid(xy, h, w, k);
  const double c1 = (o.k1 * o.dynamic_range) * (o.k1 * o.dynamic_range);
  const double c2 = (o.k2 * o.dynamic_range) * (o.k2 * o.dynamic_range);
  double sum = 0.0;
  for (std::size_t i = 0; i < mx.size(); ++i) {
    const double vx = exx[i] - mx[i] * mx[i];
    const double vy = eyy[i] - my[i] * my[i];
    const double cxy = exy[i] - mx[i] * my[i];
    sum += ((2.0 * mx[i] * my[i] + c1) * (2.0 * cxy + c2)) /
           ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
  }
  return sum / static_cast<double>(mx.size());
}

std::string format_value(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

}  // namespace

double psnr_from_mse(double mse) {
  if (mse < 0 || std::isnan(mse)) throw std::invalid_argument("psnr_from_mse: negative or NaN MSE");
  if (mse == 0) return kPsnrCap;
  return 10.0 * std::log10(1.0 / mse);
}

double mse(const PlanarImage& ref, const PlanarImage& test) {
  require_same_shape(ref, test, "mse");
  if (ref.size() == 0) throw std::invalid_argument("mse: empty images");
  return plane_sse(ref.values(), test.values()) / static_cast<double>(ref.size());
}

double psnr(const PlanarImage& ref, const PlanarImage& test) { return psnr_from_mse(mse(ref, test)); }

std::array<double, 3> channel_psnr(const ColorImage& ref, const ColorImage& test) {
  require_same_shape(ref, test, "channel_psnr");
  if (ref.channels() != 3) throw std::invalid_argument("channel_psnr: expected RGB images");
  std::array<double, 3> out{};
  const double n = static_cast<double>(ref.height() * ref.width());
  for (std::size_t c = 0; c < 3; ++c) out[c] = psnr_from_mse(plane_sse(ref.plane(c), test.plane(c)) / n);
  return out;
}

double cpsnr(const ColorImage& ref, const ColorImage& test) {
  if (ref.channels() != 3 || test.channels() != 3) throw std::invalid_argument("cpsnr: expected RGB images");
  return psnr(ref, test);
}

std::vector<double> ssim_window(const SsimOptions& options) {
  const auto k = gaussian_1d(options);
  std::vector<double> w(k.size() * k.size());
  for (std::size_t i = 0; i < k.size(); ++i)
    for (std::size_t j = 0; j < k.size(); ++j) w[i * k.size() + j] = k[i] * k[j];
  return w;
}

double ssim(const PlanarImage& ref, const PlanarImage& test, const SsimOptions& options) {
  require_same_shape(ref, test, "ssim");
  const auto win = static_cast<std::size_t>(options.window);
  if (options.window < 1 || ref.height() < win || ref.width() < win) {
    throw std::invalid_argument("ssim: image smaller than the " + std::to_string(options.window) + "x" +
                                std::to_string(options.window) + " window");
  }
  if (ref.channels() == 0) throw std::invalid_argument("ssim: no channels");
  double total = 0.0;
  for (std::size_t c = 0; c < ref.channels(); ++c) {
    total += ssim_plane(ref.plane(c), test.plane(c), ref.height(), ref.width(), options);
  }
  return total / static_cast<double>(ref.channels());
}

PlanarImage crop_border(const PlanarImage& image, std::size_t border) {
  if (2 * border >= image.height() || 2 * border >= image.width()) {
    throw std::invalid_argument("crop_border: border removes the whole image");
  }
  PlanarImage out(image.channels(), image.height() - 2 * border, image.width() - 2 * border);
  for (std::size_t c = 0; c < out.channels(); ++c)
    for (std::size_t y = 0; y < out.height(); ++y)
      for (std::size_t x = 0; x < out.width(); ++x) out.at(c, y, x) = image.at(c, y + border, x + border);
  return out;
}

MetricsRow compare_images(const std::string& name, double sigma, const ColorImage& ref, const ColorImage& test,
                          std::size_t crop) {
  ColorImage r = ref, t = test;
  if (crop > 0) {
    static_cast<PlanarImage&>(r) = crop_border(ref, crop);
    static_cast<PlanarImage&>(t) = crop_border(test, crop);
  }
  const auto per_channel = channel_psnr(r, t);
  return MetricsRow{name, sigma, per_channel[0], per_channel[1], per_channel[2], cpsnr(r, t), ssim(r, t)};
}

MetricsRow average_row(const std::vector<MetricsRow>& rows) {
  if (rows.empty()) throw std::invalid_argument("average_row: no rows");
  MetricsRow avg{"AVG"};
  for (const auto& r : rows) {
    avg.sigma += r.sigma;
    avg.rpsnr += r.rpsnr;
    avg.gpsnr += r.gpsnr;
    avg.bpsnr += r.bpsnr;
    avg.cpsnr += r.cpsnr;
    avg.ssim += r.ssim;
  }
  const double n = static_cast<double>(rows.size());
  avg.sigma /= n;
  avg.rpsnr /= n;
  avg.gpsnr /= n;
  avg.bpsnr /= n;
  avg.cpsnr /= n;
  avg.ssim /= n;
  return avg;
}

void write_metrics_csv(std::ostream& out, const MetricsTable& table) {
  out << "image,sigma,rpsnr,gpsnr,bpsnr,cpsnr,ssim\n";
  auto write = [&](const MetricsRow& r) {
    out << r.image << ',' << format_value(r.sigma) << ',' << format_value(r.rpsnr) << ','
        << format_value(r.gpsnr) << ',' << format_value(r.bpsnr) << ',' << format_value(r.cpsnr) << ','
        << format_value(r.ssim) << '\n';
  };
  for (const auto& r : table.rows) write(r);
  write(table.average);
}

ColorImage reconstruct(const Generator& generator, const BayerPattern& pattern, const ColorImage& image,
                       const DegradationSpec& degradation, std::uint64_t image_index) {
  if (image.height() % 2 != 0 || image.width() % 2 != 0) {
    throw DataError("image dimensions must be even, got " + std::to_string(image.height()) + "x" +
                    std::to_string(image.width()));
  }
  const PackedInput packed = degrade_and_pack(image, pattern, degradation, image_index);
  NoGradGuard no_grad;
  const Tensor out = generator_forward(generator, stack_images(std::span<const PackedInput>(&packed, 1)));
  detail::require_finite(out.data(), "generator output");
  ColorImage result = color_image_from_batch(out, 0);
  clip_unit(result);
  return result;
}

MetricsTable evaluate_images(const Model& model, const std::vector<NamedImage>& images, double sigma,
                             std::uint64_t seed, std::size_t crop) {
  if (images.empty()) throw DataError("no images to evaluate");
  const DegradationSpec degradation{sigma, seed, true};
  MetricsTable table;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const ColorImage out = reconstruct(model.generator, model.metadata.pattern, images[i].image, degradation, i);
    table.rows.push_back(compare_images(images[i].name, sigma, images[i].image, out, crop));
  }
  table.average = average_row(table.rows);
  return table;
}

std::vector<fs::path> list_png_files(const fs::path& dir) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw DataError(dir.string() + " is not a directory");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".png") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end(),
            [](const fs::path& a, const fs::path& b) { return a.filename().string() < b.filename().string(); });
  return files;
}

std::vector<NamedImage> load_png_directory(const fs::path& dir) {
  std::vector<NamedImage> images;
  for (const auto& path : list_png_files(dir)) images.push_back({path.filename().string(), load_png(path)});
  if (images.empty()) throw DataError("no PNG files in " + dir.string());
  return images;
}

MetricsTable evaluate_dataset(const fs::path& checkpoint, const fs::path& data_dir, double sigma,
                              std::uint64_t seed, std::size_t crop) {
  const Model model = load_model(checkpoint);
  return evaluate_images(model, load_png_directory(data_dir), sigma, seed, crop);
}

}  // namespace bjdd
