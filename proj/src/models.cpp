// Copyright 2026 The bjdd Authors
// SPDX-License-Identifier: Apache-2.0

#include "bjdd/models.hpp"

#include <cmath>
#include <stdexcept>

#include "bjdd/rng.hpp"

namespace bjdd {

Tensor& ParameterStore::add(std::string name, Tensor tensor, Kind kind) {
  if (contains(name)) throw std::invalid_argument("ParameterStore: duplicate name '" + name + "'");
  tensor.set_requires_grad(kind == Kind::Parameter);
  entries_.push_back({std::move(name), std::move(tensor), kind});
  return entries_.back().tensor;
}

bool ParameterStore::contains(const std::string& name) const {
  for (const auto& e : entries_)
    if (e.name == name) return true;
  return false;
}

Tensor& ParameterStore::at(const std::string& name) {
  for (auto& e : entries_)
    if (e.name == name) return e.tensor;
  throw std::out_of_range("ParameterStore: no tensor named '" + name + "'");
}

const Tensor& ParameterStore::at(const std::string& name) const {
  return const_cast<ParameterStore*>(this)->at(name);
}

void ParameterStore::zero_grad() {
  for (auto& e : entries_)
    if (e.kind == Kind::Parameter) e.tensor.zero_grad();
}

std::size_t count_parameters(const ParameterStore& store) {
  std::size_t total = 0;
  for (const auto& e : store.entries())
    if (e.kind == ParameterStore::Kind::Parameter) total += e.tensor.numel();
  return total;
}

void GeneratorSpec::validate() const {
  if (res_blocks < 0) throw std::invalid_argument("GeneratorSpec: res_blocks must be >= 0");
  if (trunk_width <= 0) throw std::invalid_argument("GeneratorSpec: trunk_width must be positive");
  if (upscale != 2) throw std::invalid_argument("GeneratorSpec: upscale is fixed to 2");
  if (kernel <= 0 || kernel % 2 == 0) throw std::invalid_argument("GeneratorSpec: kernel must be odd");
  if (!(dropout_keep > 0 && dropout_keep <= 1)) {
    throw std::invalid_argument("GeneratorSpec: dropout_keep must lie in (0,1]");
  }
}

std::vector<int> DiscriminatorSpec::widths() const {
  std::vector<int> w;
  for (int i = 0; i < conv_layers; ++i) {
    const long long width = static_cast<long long>(base_width) << (i / 2);
    w.push_back(static_cast<int>(std::min<long long>(width, max_width)));
  }
  return w;
}

void DiscriminatorSpec::validate() const {
  if (conv_layers <= 0) throw std::invalid_argument("DiscriminatorSpec: conv_layers must be positive");
  if (base_width <= 0 || max_width < base_width) {
    throw std::invalid_argument("DiscriminatorSpec: need 0 < base_width <= max_width");
  }
  if (static_cast<int>(strides.size()) != conv_layers) {
    throw std::invalid_argument("DiscriminatorSpec: one stride per conv layer required");
  }
  for (int s : strides)
    if (s != 1 && s != 2) throw std::invalid_argument("DiscriminatorSpec: strides must be 1 or 2");
  if (!(lrelu_alpha >= 0 && lrelu_alpha < 1)) {
    throw std::invalid_argument("DiscriminatorSpec: lrelu_alpha must lie in [0,1)");
  }
}

namespace {

void add_conv(ParameterStore& store, const std::string& prefix, int in_ch, int out_ch, int k,
              std::uint64_t seed, double gain = 1.0) {
  const auto fan_in = static_cast<double>(in_ch) * k * k;
  const double stddev = gain * std::sqrt(2.0 / fan_in);
  CounterRng rng(seed, store.size());
  Tensor w({static_cast<std::size_t>(out_ch), static_cast<std::size_t>(in_ch),
            static_cast<std::size_t>(k), static_cast<std::size_t>(k)});
  for (Real& v : w.mutable_data()) v = static_cast<Real>(stddev * rng.normal());
  store.add(prefix + ".weight", std::move(w));
  store.add(prefix + ".bias", Tensor({static_cast<std::size_t>(out_ch)}));
}

void add_batch_norm(ParameterStore& store, const std::string& prefix, int ch) {
  const auto c = static_cast<std::size_t>(ch);
  store.add(prefix + ".gamma", Tensor({c}, Real(1)));
  store.add(prefix + ".beta", Tensor({c}, Real(0)));
  store.add(prefix + ".running_mean", Tensor({c}, Real(0)), ParameterStore::Kind::Buffer);
  store.add(prefix + ".running_var", Tensor({c}, Real(1)), ParameterStore::Kind::Buffer);
  store.add(prefix + ".tracked", Tensor({1}, Real(0)), ParameterStore::Kind::Buffer);
}

Tensor conv(const ParameterStore& p, const std::string& prefix, const Tensor& x, int stride,
            int padding) {
  return conv2d(x, p.at(prefix + ".weight"), p.at(prefix + ".bias"), stride, padding);
}

std::string res_name(int block, int conv_index) {
  return "res" + std::to_string(block) + ".conv" + std::to_string(conv_index);
}

}  // namespace

// Unnormalized residual blocks at full He gain roughly triple the activation
// variance each; the default network would start with outputs in the
// thousands. The last conv of each residual branch and the output conv start
// at a tenth of the He scale.
constexpr double kBranchGain = 0.1;

Generator build_generator(const GeneratorSpec& spec, std::uint64_t init_seed) {
  spec.validate();
  Generator g{spec, {}};
  const int w = spec.trunk_width, k = spec.kernel;
  const int r2 = spec.upscale * spec.upscale;
  add_conv(g.params, "head", 4, w, k, init_seed);
  for (int b = 0; b < spec.res_blocks; ++b) {
    add_conv(g.params, res_name(b, 1), w, w, k, init_seed);
    add_conv(g.params, res_name(b, 2), w, w, k, init_seed, kBranchGain);
  }
  add_conv(g.params, "tail", w, w, k, init_seed);
  add_conv(g.params, "upsample", w, w * r2, k, init_seed);
  add_conv(g.params, "out", w, 3, k, init_seed, kBranchGain);
  return g;
}

Tensor generator_trunk(const Generator& g, const Tensor& input, const ForwardOptions& options) {
  if (input.rank() != 4 || input.dim(1) != 4) {
    throw std::invalid_argument("generator_forward: expected (N,4,H,W) input, got " +
                                shape_string(input.shape()));
  }
  const int pad = g.spec.kernel / 2;
  const auto& p = g.params;
  const Tensor head = relu(conv(p, "head", input, 1, pad));
  Tensor x = head;
  for (int b = 0; b < g.spec.res_blocks; ++b) {
    Tensor y = relu(conv(p, res_name(b, 1), x, 1, pad));
    y = dropout(y, static_cast<Real>(g.spec.dropout_keep), options.mode, options.rng);
    y = conv(p, res_name(b, 2), y, 1, pad);
    x = add(y, x);
  }
  return add(conv(p, "tail", x, 1, pad), head);
}

Tensor generator_forward(const Generator& g, const Tensor& input, const ForwardOptions& options) {
  const int pad = g.spec.kernel / 2;
  const Tensor features = generator_trunk(g, input, options);
  const Tensor up = pixel_shuffle(conv(g.params, "upsample", features, 1, pad), g.spec.upscale);
  return conv(g.params, "out", up, 1, pad);
}

Discriminator build_discriminator(const DiscriminatorSpec& spec, std::uint64_t init_seed) {
  spec.validate();
  Discriminator d{spec, {}, {}};
  const auto widths = spec.widths();
  int in_ch = 3;
  for (int i = 0; i < spec.conv_layers; ++i) {
    const std::string idx = std::to_string(i + 1);
    add_conv(d.params, "conv" + idx, in_ch, widths[static_cast<std::size_t>(i)], 3, init_seed);
    if (i > 0 || spec.first_layer_bn) add_batch_norm(d.params, "bn" + idx, widths[static_cast<std::size_t>(i)]);
    in_ch = widths[static_cast<std::size_t>(i)];
  }
  add_conv(d.params, "score", in_ch, 1, 3, init_seed);
  return d;
}

Tensor discriminator_forward(Discriminator& d, const Tensor& images, Mode mode,
                             bool track_running_stats) {
  if (images.rank() != 4 || images.dim(1) != 3) {
    throw std::invalid_argument("discriminator_forward: expected (N,3,H,W), got " +
                                shape_string(images.shape()));
  }
  auto& p = d.params;
  Tensor x = images;
  for (int i = 0; i < d.spec.conv_layers; ++i) {
    const std::string idx = std::to_string(i + 1);
    x = conv(p, "conv" + idx, x, d.spec.strides[static_cast<std::size_t>(i)], 1);
    const std::string bn = "bn" + idx;
    if (p.contains(bn + ".gamma")) {
      BatchNormState state{p.at(bn + ".running_mean"), p.at(bn + ".running_var"), p.at(bn + ".tracked")};
      const bool track = mode == Mode::Train && track_running_stats;
      x = batch_norm(x, p.at(bn + ".gamma"), p.at(bn + ".beta"), track || mode == Mode::Eval ? &state : nullptr,
                     mode, d.bn);
    }
    x = leaky_relu(x, static_cast<Real>(d.spec.lrelu_alpha));
  }
  return per_sample_mean(sigmoid(conv(p, "score", x, 1, 1)));
}

std::vector<std::size_t> discriminator_feature_sizes(const DiscriminatorSpec& spec, std::size_t side) {
  std::vector<std::size_t> sizes;
  for (int s : spec.strides) {
    side = (side + 2 - 3) / static_cast<std::size_t>(s) + 1;
    sizes.push_back(side);
  }
  return sizes;
}

}  // namespace bjdd
