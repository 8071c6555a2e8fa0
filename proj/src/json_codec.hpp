// Copyright 2026 The bjdd Authors
// SPDX-License-Identifier: Apache-2.0

// JSON encoding of the spec structs, shared by run configs and checkpoint
// metadata. Readers reject unknown keys and wrongly typed values.

#pragma once

#include <set>
#include <string>

#include <json.hpp>

#include "bjdd/cfa.hpp"
#include "bjdd/errors.hpp"
#include "bjdd/losses.hpp"
#include "bjdd/models.hpp"
#include "bjdd/ops.hpp"

namespace bjdd::json_codec {

using nlohmann::json;

/// Reads keys out of one JSON object, remembering which were used.
class Reader {
 public:
  Reader(const json& object, std::string path) : object_(object), path_(std::move(path)) {
    if (!object_.is_object()) throw ConfigError(path_ + ": expected a JSON object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    const auto it = object_.find(key);
    if (it == object_.end()) return;
    try {
      out = it->get<T>();
    } catch (const json::exception&) {
      throw ConfigError(path_ + "." + key + ": wrong type");
    }
  }

  /// Returns the sub-object, or nullptr when absent.
  const json* child(const char* key) {
    seen_.insert(key);
    const auto it = object_.find(key);
    return it == object_.end() ? nullptr : &*it;
  }

  std::string path(const char* key) const { return path_ + "." + key; }

  /// Throws ConfigError naming the first key that was never requested.
  void finish() const {
    for (const auto& [key, value] : object_.items()) {
      if (!seen_.count(key)) throw ConfigError(path_ + ": unknown key '" + key + "'");
    }
  }

 private:
  const json& object_;
  std::string path_;
  std::set<std::string> seen_;
};

inline json to_json(const GeneratorSpec& s) {
  return {{"res_blocks", s.res_blocks}, {"trunk_width", s.trunk_width}, {"upscale", s.upscale},
          {"kernel", s.kernel},         {"dropout_keep", s.dropout_keep}};
}

inline void from_json(const json& j, const std::string& path, GeneratorSpec& s) {
  Reader r(j, path);
  r.get("res_blocks", s.res_blocks);
  r.get("trunk_width", s.trunk_width);
  r.get("upscale", s.upscale);
  r.get("kernel", s.kernel);
  r.get("dropout_keep", s.dropout_keep);
  r.finish();
}

inline json to_json(const DiscriminatorSpec& s) {
  return {{"conv_layers", s.conv_layers}, {"base_width", s.base_width},
          {"max_width", s.max_width},     {"lrelu_alpha", s.lrelu_alpha},
          {"strides", s.strides},         {"first_layer_bn", s.first_layer_bn}};
}

inline void from_json(const json& j, const std::string& path, DiscriminatorSpec& s) {
  Reader r(j, path);
  r.get("conv_layers", s.conv_layers);
  r.get("base_width", s.base_width);
  r.get("max_width", s.max_width);
  r.get("lrelu_alpha", s.lrelu_alpha);
  r.get("strides", s.strides);
  r.get("first_layer_bn", s.first_layer_bn);
  r.finish();
}

inline json to_json(const FeatureExtractorSpec& s) { return {{"widths", s.widths}, {"seed", s.seed}}; }

inline void from_json(const json& j, const std::string& path, FeatureExtractorSpec& s) {
  Reader r(j, path);
  r.get("widths", s.widths);
  r.get("seed", s.seed);
  r.finish();
}

inline json to_json(const BatchNormOptions& s) {
  return {{"eps", static_cast<double>(s.eps)}, {"momentum", static_cast<double>(s.momentum)}};
}

inline void from_json(const json& j, const std::string& path, BatchNormOptions& s) {
  Reader r(j, path);
  double eps = s.eps, momentum = s.momentum;
  r.get("eps", eps);
  r.get("momentum", momentum);
  r.finish();
  s.eps = static_cast<Real>(eps);
  s.momentum = static_cast<Real>(momentum);
}

inline BayerPattern pattern_from_json(const json& j, const std::string& path) {
  if (!j.is_string()) throw ConfigError(path + ": expected a pattern name string");
  try {
    return BayerPattern::parse(j.get<std::string>());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

}  // namespace bjdd::json_codec
