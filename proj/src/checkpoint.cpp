// Copyright 2026 The bjdd Authors
// SPDX-License-Identifier: Apache-2.0

#include "bjdd/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <set>

#include "json_codec.hpp"

namespace bjdd {

namespace fs = std::filesystem;
using json_codec::json;

namespace {

constexpr char kMagic[4] = {'B', 'J', 'D', 'D'};
constexpr const char* kGeneratorPrefix = "generator.";
constexpr const char* kDiscriminatorPrefix = "discriminator.";

static_assert(std::numeric_limits<float>::is_iec559, "float32 must be IEEE-754");

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t checked_u32(std::size_t v, const char* what) {
  if (v > std::numeric_limits<std::uint32_t>::max()) {
    throw std::length_error(std::string("archive: ") + what + " exceeds 32 bits");
  }
  return static_cast<std::uint32_t>(v);
}

class ByteReader {
 public:
  ByteReader(const std::vector<std::uint8_t>& bytes, std::size_t start) : bytes_(bytes), pos_(start) {}

  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }

  std::string text(std::size_t n, const char* what) {
    need(n, what);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  void floats(std::vector<float>& out, std::size_t n) {
    if (n > remaining() / 4) truncated("tensor data");
    out.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::uint32_t bits = 0;
      for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(bytes_[pos_ + b]) << (8 * b);
      out[i] = std::bit_cast<float>(bits);
      pos_ += 4;
    }
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n, const char* what) const {
    if (n > remaining()) truncated(what);
  }
  [[noreturn]] static void truncated(const char* what) {
    throw CheckpointError(CheckpointError::Kind::Truncated,
                          std::string("archive truncated while reading ") + what);
  }

  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_;
};

}  // namespace

std::vector<std::uint8_t> encode_archive(const Archive& archive) {
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put_u32(out, kCheckpointVersion);
  put_u32(out, checked_u32(archive.metadata.size(), "metadata"));
  out.insert(out.end(), archive.metadata.begin(), archive.metadata.end());
  put_u32(out, checked_u32(archive.tensors.size(), "tensor count"));
  for (const auto& t : archive.tensors) {
    std::size_t n = 1;
    for (std::size_t d : t.shape) n *= d;
    if (n != t.data.size()) {
      throw std::invalid_argument("archive: tensor '" + t.name + "' data does not match its shape");
    }
    put_u32(out, checked_u32(t.name.size(), "name"));
    out.insert(out.end(), t.name.begin(), t.name.end());
    put_u32(out, checked_u32(t.shape.size(), "rank"));
    for (std::size_t d : t.shape) put_u32(out, checked_u32(d, "dimension"));
    for (float v : t.data) put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

Archive decode_archive(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 4) {
    throw CheckpointError(CheckpointError::Kind::Truncated, "archive truncated while reading magic");
  }
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw CheckpointError(CheckpointError::Kind::BadMagic, "not a bjdd archive (bad magic)");
  }
  ByteReader in(bytes, 4);
  const std::uint32_t version = in.u32("version");
  if (version != kCheckpointVersion) {
    throw CheckpointError(CheckpointError::Kind::UnsupportedVersion,
                          "unsupported archive version " + std::to_string(version) + " (expected " +
                              std::to_string(kCheckpointVersion) + ")");
  }
  Archive archive;
  archive.metadata = in.text(in.u32("metadata length"), "metadata");
  const std::uint32_t count = in.u32("tensor count");
  for (std::uint32_t i = 0; i < count; ++i) {
    ArchivedTensor t;
    t.name = in.text(in.u32("name length"), "name");
    const std::uint32_t rank = in.u32("rank");
    std::size_t n = 1;
    for (std::uint32_t r = 0; r < rank; ++r) {
      const std::uint32_t d = in.u32("dimensions");
      t.shape.push_back(d);
      if (d != 0 && n > std::numeric_limits<std::size_t>::max() / d) {
        throw CheckpointError(CheckpointError::Kind::Malformed, "tensor '" + t.name + "' is too large");
      }
      n *= d;
    }
    in.floats(t.data, n);
    archive.tensors.push_back(std::move(t));
  }
  if (in.remaining() != 0) {
    throw CheckpointError(CheckpointError::Kind::Malformed, "trailing bytes after the last tensor");
  }
  return archive;
}

void save_archive(const fs::path& path, const Archive& archive, bool overwrite) {
  if (!overwrite && fs::exists(path)) {
    throw DataError("refusing to overwrite existing file " + path.string());
  }
  const auto bytes = encode_archive(archive);
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

Archive load_archive(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_archive(bytes);
}

namespace {

std::string metadata_text(const ModelMetadata& m) {
  json j;
  j["format"] = "bjdd-model";
  j["generator"] = json_codec::to_json(m.generator);
  j["discriminator"] = m.discriminator ? json_codec::to_json(*m.discriminator) : json(nullptr);
  j["discriminator_reduction"] = "mean_after_sigmoid";
  j["batch_norm"] = json_codec::to_json(m.batch_norm);
  j["pattern"] = m.pattern.name();
  json order = json::array();
  for (std::size_t cell : m.pattern.pack_order()) {
    const std::size_t y = cell / 2, x = cell % 2;
    const char label = "RGB"[static_cast<int>(m.pattern.at(y, x))];
    order.push_back(std::string(1, label) + "@(" + std::to_string(y) + "," + std::to_string(x) + ")");
  }
  j["packing_order"] = order;
  j["feature_extractor"] = json_codec::to_json(m.features);
  j["train_step"] = m.train_step;
  return j.dump(2);
}

ModelMetadata parse_metadata(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw CheckpointError(CheckpointError::Kind::Malformed, std::string("metadata is not JSON: ") + e.what());
  }
  ModelMetadata m;
  try {
    json_codec::Reader r(j, "metadata");
    std::string format, reduction;
    std::vector<std::string> order;
    r.get("format", format);
    if (format != "bjdd-model") throw ConfigError("metadata: not a model checkpoint");
    if (const json* g = r.child("generator")) json_codec::from_json(*g, "metadata.generator", m.generator);
    if (const json* d = r.child("discriminator"); d && !d->is_null()) {
      DiscriminatorSpec spec;
      json_codec::from_json(*d, "metadata.discriminator", spec);
      m.discriminator = spec;
    }
    r.get("discriminator_reduction", reduction);
    if (const json* bn = r.child("batch_norm")) json_codec::from_json(*bn, "metadata.batch_norm", m.batch_norm);
    if (const json* p = r.child("pattern")) m.pattern = json_codec::pattern_from_json(*p, "metadata.pattern");
    r.get("packing_order", order);
    if (const json* fx = r.child("feature_extractor")) {
      json_codec::from_json(*fx, "metadata.feature_extractor", m.features);
    }
    r.get("train_step", m.train_step);
    r.finish();
  } catch (const ConfigError& e) {
    throw CheckpointError(CheckpointError::Kind::Malformed, e.what());
  }
  return m;
}

void append_store(Archive& archive, const ParameterStore& store, const std::string& prefix) {
  for (const auto& e : store.entries()) {
    const auto values = e.tensor.data();
    archive.tensors.push_back({prefix + e.name, e.tensor.shape(), std::vector<float>(values.begin(), values.end())});
  }
}

}  // namespace

Archive model_to_archive(const Generator& generator, const Discriminator* discriminator,
                         const ModelMetadata& metadata) {
  ModelMetadata m = metadata;
  m.generator = generator.spec;
  if (discriminator) {
    m.discriminator = discriminator->spec;
    m.batch_norm = discriminator->bn;
  } else {
    m.discriminator.reset();
  }
  Archive archive;
  archive.metadata = metadata_text(m);
  append_store(archive, generator.params, kGeneratorPrefix);
  if (discriminator) append_store(archive, discriminator->params, kDiscriminatorPrefix);
  return archive;
}

Model model_from_archive(const Archive& archive) {
  Model model{parse_metadata(archive.metadata), {}, std::nullopt};
  try {
    model.generator = build_generator(model.metadata.generator, 0);
    if (model.metadata.discriminator) {
      model.discriminator = build_discriminator(*model.metadata.discriminator, 0);
      model.discriminator->bn = model.metadata.batch_norm;
    }
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(CheckpointError::Kind::Malformed, std::string("invalid stored spec: ") + e.what());
  }

  std::size_t expected = model.generator.params.size();
  if (model.discriminator) expected += model.discriminator->params.size();
  if (archive.tensors.size() != expected) {
    throw CheckpointError(CheckpointError::Kind::Malformed,
                          "checkpoint holds " + std::to_string(archive.tensors.size()) +
                              " tensors, the stored specs need " + std::to_string(expected));
  }
  std::set<std::string> assigned;
  for (const auto& t : archive.tensors) {
    if (!assigned.insert(t.name).second) {
      throw CheckpointError(CheckpointError::Kind::Malformed, "duplicate tensor '" + t.name + "'");
    }
    ParameterStore* store = nullptr;
    std::string name;
    if (t.name.rfind(kGeneratorPrefix, 0) == 0) {
      store = &model.generator.params;
      name = t.name.substr(std::strlen(kGeneratorPrefix));
    } else if (model.discriminator && t.name.rfind(kDiscriminatorPrefix, 0) == 0) {
      store = &model.discriminator->params;
      name = t.name.substr(std::strlen(kDiscriminatorPrefix));
    }
    if (!store || !store->contains(name)) {
      throw CheckpointError(CheckpointError::Kind::Malformed, "unexpected tensor '" + t.name + "'");
    }
    Tensor& target = store->at(name);
    if (target.shape() != t.shape) {
      throw CheckpointError(CheckpointError::Kind::Malformed,
                            "tensor '" + t.name + "' has shape " + shape_string(t.shape) + ", expected " +
                                shape_string(target.shape()));
    }
    auto dst = target.mutable_data();
    std::copy(t.data.begin(), t.data.end(), dst.begin());
  }
  return model;
}

void save_model(const fs::path& path, const Generator& generator, const Discriminator* discriminator,
                const ModelMetadata& metadata, bool overwrite) {
  save_archive(path, model_to_archive(generator, discriminator, metadata), overwrite);
}

Model load_model(const fs::path& path) { return model_from_archive(load_archive(path)); }

}  // namespace bjdd
