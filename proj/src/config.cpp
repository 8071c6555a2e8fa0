// Copyright 2026 The bjdd Authors
// SPDX-License-Identifier: Apache-2.0

#include "bjdd/config.hpp"

#include <fstream>
#include <sstream>

#include "json_codec.hpp"

namespace bjdd {

namespace fs = std::filesystem;
using json_codec::json;
using json_codec::Reader;

namespace {

fs::path resolve(const std::string& p, const fs::path& base) {
  fs::path path(p);
  return path.is_relative() && !base.empty() ? base / path : path;
}

}  // namespace

RunConfig parse_run_config(const std::string& text, const fs::path& base_dir) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig rc;
  TrainConfig& c = rc.train;
  Reader r(root, "config");
  r.get("seed", c.seed);
  r.get("init_seed", c.init_seed);
  r.get("steps", c.steps);
  r.get("batch_size", c.batch_size);
  r.get("d_steps_per_g", c.d_steps_per_g);
  r.get("checkpoint_every", c.checkpoint_every);
  r.get("patch_size", c.patch_size);
  r.get("augment", c.augment);
  if (const json* j = r.child("optimizer")) {
    Reader o(*j, r.path("optimizer"));
    o.get("lr", c.adam.lr);
    o.get("beta1", c.adam.beta1);
    o.get("beta2", c.adam.beta2);
    o.get("eps", c.adam.eps);
    o.finish();
  }
  if (const json* j = r.child("loss")) {
    Reader l(*j, r.path("loss"));
    l.get("lambda_p", c.weights.lambda_p);
    l.get("lambda_a", c.weights.lambda_a);
    l.finish();
  }
  if (const json* j = r.child("degradation")) {
    Reader d(*j, r.path("degradation"));
    d.get("sigma_min", c.sigma_min);
    d.get("sigma_max", c.sigma_max);
    d.get("clip", c.clip);
    if (const json* p = d.child("pattern")) c.pattern = json_codec::pattern_from_json(*p, d.path("pattern"));
    d.finish();
  }
  if (const json* j = r.child("generator")) json_codec::from_json(*j, r.path("generator"), c.generator);
  if (const json* j = r.child("discriminator")) {
    json_codec::from_json(*j, r.path("discriminator"), c.discriminator);
  }
  if (const json* j = r.child("feature_extractor")) {
    json_codec::from_json(*j, r.path("feature_extractor"), c.features);
  }
  if (const json* j = r.child("batch_norm")) json_codec::from_json(*j, r.path("batch_norm"), c.batch_norm);
  if (const json* j = r.child("paths")) {
    Reader p(*j, r.path("paths"));
    std::string data, out;
    p.get("data", data);
    p.get("out", out);
    p.finish();
    if (!data.empty()) rc.data_dir = resolve(data, base_dir);
    if (!out.empty()) rc.out_dir = resolve(out, base_dir);
  }
  r.finish();
  c.validate();
  return rc;
}

RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_run_config(text.str(), path.parent_path());
}

std::string run_config_to_json(const RunConfig& rc) {
  const TrainConfig& c = rc.train;
  json j;
  j["seed"] = c.seed;
  j["init_seed"] = c.init_seed;
  j["steps"] = c.steps;
  j["batch_size"] = c.batch_size;
  j["d_steps_per_g"] = c.d_steps_per_g;
  j["checkpoint_every"] = c.checkpoint_every;
  j["patch_size"] = c.patch_size;
  j["augment"] = c.augment;
  j["optimizer"] = {{"lr", c.adam.lr}, {"beta1", c.adam.beta1}, {"beta2", c.adam.beta2}, {"eps", c.adam.eps}};
  j["loss"] = {{"lambda_p", c.weights.lambda_p}, {"lambda_a", c.weights.lambda_a}};
  j["degradation"] = {{"sigma_min", c.sigma_min},
                      {"sigma_max", c.sigma_max},
                      {"clip", c.clip},
                      {"pattern", c.pattern.name()}};
  j["generator"] = json_codec::to_json(c.generator);
  j["discriminator"] = json_codec::to_json(c.discriminator);
  j["feature_extractor"] = json_codec::to_json(c.features);
  j["batch_norm"] = json_codec::to_json(c.batch_norm);
  json paths = json::object();
  if (rc.data_dir) paths["data"] = rc.data_dir->string();
  if (rc.out_dir) paths["out"] = rc.out_dir->string();
  j["paths"] = paths;
  return j.dump(2) + "\n";
}

}  // namespace bjdd
