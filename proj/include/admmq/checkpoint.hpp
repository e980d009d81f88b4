// Checkpoint directory: manifest.json + weights.bin. Tensor payloads are raw
// little-endian 64-bit reals, each with a crc32 recorded in the manifest, so
// a reload reproduces evaluation bit-identically or fails loudly.
#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <zlib.h>

#include <admmq/common.hpp>
#include <admmq/config.hpp>
#include <admmq/model.hpp>
#include <admmq/quantizer.hpp>

namespace admmq {

inline constexpr int kCheckpointFormatVersion = 1;

namespace detail {

inline void write_f64_le(std::vector<unsigned char>& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  for (int i = 0; i < 8; ++i)
    out.push_back(static_cast<unsigned char>(bits >> (8 * i)));
}

inline double read_f64_le(const unsigned char* p) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= std::uint64_t(p[i]) << (8 * i);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

inline std::uint32_t crc32_of(const unsigned char* p, std::size_t n) {
  return static_cast<std::uint32_t>(
      ::crc32(0L, reinterpret_cast<const Bytef*>(p), static_cast<uInt>(n)));
}

}  // namespace detail

struct Checkpoint {
  Model model;
  json manifest;
  bool quantized = false;
  QuantScheme scheme;  // entries present iff quantized
};

inline void save_checkpoint(const std::string& dir, const Model& model,
                            const QuantScheme* scheme, const json& run_config,
                            const json& metrics) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);

  std::vector<unsigned char> blob;
  json tensors = json::array();
  auto add_tensor = [&](const std::string& name, const Tensor& t) {
    std::size_t offset = blob.size();
    for (double v : t.values()) detail::write_f64_le(blob, v);
    std::size_t bytes = blob.size() - offset;
    tensors.push_back({{"name", name},
                       {"shape", t.shape()},
                       {"offset", offset},
                       {"bytes", bytes},
                       {"crc32", detail::crc32_of(blob.data() + offset, bytes)}});
  };
  for (const Layer& l : model.layers) {
    if (!l.has_weights()) continue;
    add_tensor(l.name + ".weight", l.weights);
    add_tensor(l.name + ".bias", l.bias);
  }

  json manifest;
  manifest["format_version"] = kCheckpointFormatVersion;
  manifest["architecture"] = architecture_to_json(model);
  manifest["run_config"] = run_config;
  manifest["metrics"] = metrics;
  if (scheme) {
    json q = json::array();
    for (const SchemeEntry& e : scheme->entries)
      q.push_back({{"layer", e.layer},
                   {"mode", quant_mode_name(e.mode)},
                   {"alpha", e.alpha}});
    manifest["quant"] = q;
  } else {
    manifest["quant"] = nullptr;
  }
  manifest["tensors"] = tensors;

  std::ofstream mf(dir + "/manifest.json");
  if (!mf) throw DataError("cannot write '" + dir + "/manifest.json'");
  mf << manifest.dump(2) << "\n";
  std::ofstream wf(dir + "/weights.bin", std::ios::binary);
  if (!wf) throw DataError("cannot write '" + dir + "/weights.bin'");
  wf.write(reinterpret_cast<const char*>(blob.data()),
           static_cast<std::streamsize>(blob.size()));
}

inline Checkpoint load_checkpoint(const std::string& dir) {
  std::ifstream mf(dir + "/manifest.json");
  if (!mf) throw DataError("cannot open '" + dir + "/manifest.json'");
  json manifest;
  try {
    mf >> manifest;
  } catch (const json::exception& e) {
    throw DataError("checkpoint manifest '" + dir + "' is not valid JSON: " +
                    e.what());
  }
  if (!manifest.contains("format_version") ||
      manifest.at("format_version").get<int>() != kCheckpointFormatVersion)
    throw DataError("checkpoint '" + dir + "': unsupported format version");

  Checkpoint ck;
  ck.manifest = manifest;
  ck.model = build_model(manifest.at("architecture"));

  std::ifstream wf(dir + "/weights.bin", std::ios::binary);
  if (!wf) throw DataError("cannot open '" + dir + "/weights.bin'");
  std::vector<unsigned char> blob((std::istreambuf_iterator<char>(wf)),
                                  std::istreambuf_iterator<char>());

  for (const json& t : manifest.at("tensors")) {
    std::string name = t.at("name").get<std::string>();
    std::size_t offset = t.at("offset").get<std::size_t>();
    std::size_t bytes = t.at("bytes").get<std::size_t>();
    if (offset + bytes > blob.size())
      throw DataError("checkpoint '" + dir + "': tensor '" + name +
                      "' payload out of range");
    if (detail::crc32_of(blob.data() + offset, bytes) !=
        t.at("crc32").get<std::uint32_t>())
      throw DataError("checkpoint '" + dir + "': checksum mismatch for '" +
                      name + "' (corrupt payload)");
    auto dot = name.rfind('.');
    std::string layer_name = name.substr(0, dot);
    std::string field = name.substr(dot + 1);
    Layer* layer = nullptr;
    for (Layer& l : ck.model.layers)
      if (l.name == layer_name) layer = &l;
    if (!layer)
      throw DataError("checkpoint '" + dir + "': unknown layer '" +
                      layer_name + "'");
    Tensor& dst = field == "weight" ? layer->weights : layer->bias;
    if (bytes != dst.numel() * 8)
      throw DataError("checkpoint '" + dir + "': tensor '" + name +
                      "' size mismatch");
    for (std::size_t i = 0; i < dst.numel(); ++i)
      dst[i] = detail::read_f64_le(blob.data() + offset + i * 8);
  }

  if (!manifest.at("quant").is_null()) {
    ck.quantized = true;
    for (const json& e : manifest.at("quant")) {
      SchemeEntry se;
      se.layer = e.at("layer").get<std::string>();
      se.mode = quant_mode_from_string(e.at("mode").get<std::string>());
      se.alpha = e.at("alpha").get<double>();
      ck.scheme.entries.push_back(std::move(se));
    }
    for (const SchemeEntry& e : ck.scheme.entries) {
      if (e.mode == QuantMode::excluded) continue;
      const Layer* l = ck.model.find_layer(e.layer);
      if (!l || !is_feasible(l->weights, e.mode, e.alpha))
        throw DataError("checkpoint '" + dir + "': quantized layer '" +
                        e.layer + "' violates its level set");
    }
  }
  return ck;
}

}  // namespace admmq
