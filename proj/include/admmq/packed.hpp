// Packed weight export for quantized models. Per layer: header (name, mode,
// big-endian alpha, dims) followed by the bit-packed payload, MSB first,
// zero-padded to a byte boundary:
//   binary  1 bit/weight: 1 = +alpha, 0 = -alpha
//   ternary 2 bits/weight: 00 = 0, 01 = +alpha, 10 = -alpha
// Unpacking restores bit-exact tensors (values are copies of the stored
// alpha). Biases are not packed; they stay in the checkpoint.
#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <admmq/common.hpp>
#include <admmq/model.hpp>
#include <admmq/quantizer.hpp>

namespace admmq {

inline constexpr char kPackedMagic[8] = {'A', 'D', 'M', 'Q',
                                         'P', 'A', 'K', '1'};

inline std::size_t packed_payload_bytes(std::size_t numel, QuantMode mode) {
  std::size_t bits = numel * (mode == QuantMode::binary ? 1 : 2);
  return (bits + 7) / 8;
}

namespace detail {

inline void put_be32(std::vector<unsigned char>& out, std::uint32_t v) {
  out.push_back(static_cast<unsigned char>(v >> 24));
  out.push_back(static_cast<unsigned char>(v >> 16));
  out.push_back(static_cast<unsigned char>(v >> 8));
  out.push_back(static_cast<unsigned char>(v));
}

inline void put_f64_be(std::vector<unsigned char>& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  for (int i = 7; i >= 0; --i)
    out.push_back(static_cast<unsigned char>(bits >> (8 * i)));
}

struct ByteReader {
  const std::vector<unsigned char>& buf;
  std::size_t off = 0;
  const std::string& path;

  void need(std::size_t n) const {
    if (off + n > buf.size())
      throw DataError("'" + path + "': truncated at byte offset " +
                      std::to_string(off));
  }
  std::uint32_t be32() {
    need(4);
    std::uint32_t v = (std::uint32_t(buf[off]) << 24) |
                      (std::uint32_t(buf[off + 1]) << 16) |
                      (std::uint32_t(buf[off + 2]) << 8) |
                      std::uint32_t(buf[off + 3]);
    off += 4;
    return v;
  }
  double f64_be() {
    need(8);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits = (bits << 8) | buf[off + i];
    off += 8;
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  unsigned char byte() {
    need(1);
    return buf[off++];
  }
};

}  // namespace detail

struct PackedLayer {
  std::string name;
  QuantMode mode = QuantMode::binary;
  double alpha = 0.0;
  Tensor values;
};

inline void export_packed(const std::string& path, const Model& model,
                          const QuantScheme& scheme) {
  std::vector<unsigned char> out(kPackedMagic, kPackedMagic + 8);
  std::uint32_t count = 0;
  for (const SchemeEntry& e : scheme.entries)
    if (e.mode != QuantMode::excluded) ++count;
  if (count == 0)
    throw ConfigError("export: scheme has no quantized layers");
  detail::put_be32(out, count);

  for (const SchemeEntry& e : scheme.entries) {
    if (e.mode == QuantMode::excluded) continue;
    const Layer* l = model.find_layer(e.layer);
    if (!l) throw ConfigError("export: layer '" + e.layer + "' not in model");
    const Tensor& w = l->weights;
    if (!is_feasible(w, e.mode, e.alpha))
      throw Error("export: layer '" + e.layer +
                      "' is not feasible for its level set",
                  3);

    detail::put_be32(out, static_cast<std::uint32_t>(e.layer.size()));
    out.insert(out.end(), e.layer.begin(), e.layer.end());
    out.push_back(e.mode == QuantMode::binary ? 1 : 2);
    detail::put_f64_be(out, e.alpha);
    out.push_back(static_cast<unsigned char>(w.ndim()));
    for (std::size_t d = 0; d < w.ndim(); ++d)
      detail::put_be32(out, static_cast<std::uint32_t>(w.dim(d)));

    unsigned char acc = 0;
    int used = 0;
    const int width = e.mode == QuantMode::binary ? 1 : 2;
    for (std::size_t i = 0; i < w.numel(); ++i) {
      unsigned code;
      if (e.mode == QuantMode::binary) {
        code = w[i] == e.alpha ? 1u : 0u;
      } else {
        code = w[i] == 0.0 ? 0u : (w[i] == e.alpha ? 1u : 2u);
      }
      acc = static_cast<unsigned char>((acc << width) | code);
      used += width;
      if (used == 8) {
        out.push_back(acc);
        acc = 0;
        used = 0;
      }
    }
    if (used > 0) out.push_back(static_cast<unsigned char>(acc << (8 - used)));
  }

  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write '" + path + "'");
  f.write(reinterpret_cast<const char*>(out.data()),
          static_cast<std::streamsize>(out.size()));
}

inline std::vector<PackedLayer> load_packed(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open '" + path + "'");
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(f)),
                                 std::istreambuf_iterator<char>());
  detail::ByteReader r{buf, 0, path};
  r.need(8);
  if (std::memcmp(buf.data(), kPackedMagic, 8) != 0)
    throw DataError("'" + path + "': not a packed weight file");
  r.off = 8;

  std::vector<PackedLayer> layers(r.be32());
  for (PackedLayer& pl : layers) {
    std::uint32_t name_len = r.be32();
    r.need(name_len);
    pl.name.assign(buf.begin() + r.off, buf.begin() + r.off + name_len);
    r.off += name_len;
    unsigned char mode = r.byte();
    if (mode != 1 && mode != 2)
      throw DataError("'" + path + "': bad mode byte at offset " +
                      std::to_string(r.off - 1));
    pl.mode = mode == 1 ? QuantMode::binary : QuantMode::ternary;
    pl.alpha = r.f64_be();
    if (!(pl.alpha > 0.0))
      throw DataError("'" + path + "': non-positive alpha for '" + pl.name + "'");
    Shape shape(r.byte());
    for (std::size_t& d : shape) d = r.be32();
    pl.values = Tensor(shape);

    const std::size_t numel = pl.values.numel();
    const int width = pl.mode == QuantMode::binary ? 1 : 2;
    r.need(packed_payload_bytes(numel, pl.mode));
    std::size_t bit = 0;
    for (std::size_t i = 0; i < numel; ++i, bit += width) {
      unsigned char byte = buf[r.off + bit / 8];
      unsigned shift = 8 - width - (bit % 8);
      unsigned code = (byte >> shift) & ((1u << width) - 1u);
      double v;
      if (pl.mode == QuantMode::binary) {
        v = code ? pl.alpha : -pl.alpha;
      } else {
        if (code == 3)
          throw DataError("'" + path + "': invalid ternary code 11 in '" +
                          pl.name + "'");
        v = code == 0 ? 0.0 : (code == 1 ? pl.alpha : -pl.alpha);
      }
      pl.values[i] = v;
    }
    r.off += packed_payload_bytes(numel, pl.mode);
  }
  return layers;
}

}  // namespace admmq
