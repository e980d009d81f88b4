// Dataset ingestion: IDX files (MNIST layout, optionally gzip-compressed),
// stratified subsetting, and seeded synthetic Gaussian blobs.
#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include <zlib.h>

#include <admmq/common.hpp>
#include <admmq/rng.hpp>
#include <admmq/tensor.hpp>

namespace admmq {

struct Dataset {
  Tensor images;            // [n, 1, H, W], values in [0, 1]
  std::vector<int> labels;  // class indices, length n
  std::string split;        // train / val / test tag

  std::size_t size() const { return labels.size(); }
  std::size_t sample_numel() const {
    return size() ? images.numel() / size() : 0;
  }
  int num_classes() const {
    int c = 0;
    for (int l : labels) c = std::max(c, l + 1);
    return c;
  }
};

namespace detail {

inline std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open '" + path + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
  return bytes;
}

inline std::vector<std::uint8_t> gunzip(const std::vector<std::uint8_t>& in,
                                        const std::string& path) {
  z_stream zs{};
  if (inflateInit2(&zs, 15 + 16) != Z_OK)
    throw DataError("zlib init failed for '" + path + "'");
  std::vector<std::uint8_t> out;
  std::vector<std::uint8_t> buf(1 << 16);
  zs.next_in = const_cast<Bytef*>(in.data());
  zs.avail_in = static_cast<uInt>(in.size());
  int rc = Z_OK;
  while (rc != Z_STREAM_END) {
    zs.next_out = buf.data();
    zs.avail_out = static_cast<uInt>(buf.size());
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      inflateEnd(&zs);
      throw DataError("gzip decompression failed for '" + path + "'");
    }
    out.insert(out.end(), buf.data(), buf.data() + (buf.size() - zs.avail_out));
  }
  inflateEnd(&zs);
  return out;
}

// Sniffs the gzip magic and inflates when present.
inline std::vector<std::uint8_t> read_maybe_gzip(const std::string& path) {
  std::vector<std::uint8_t> bytes = read_file_bytes(path);
  if (bytes.size() >= 2 && bytes[0] == 0x1f && bytes[1] == 0x8b)
    return gunzip(bytes, path);
  return bytes;
}

inline std::uint32_t read_be32(const std::vector<std::uint8_t>& b,
                               std::size_t off, const std::string& path) {
  if (off + 4 > b.size())
    throw DataError("'" + path + "': truncated at byte offset " +
                    std::to_string(off));
  return (std::uint32_t(b[off]) << 24) | (std::uint32_t(b[off + 1]) << 16) |
         (std::uint32_t(b[off + 2]) << 8) | std::uint32_t(b[off + 3]);
}

struct IdxArray {
  std::vector<std::uint32_t> dims;
  const std::uint8_t* payload;
  std::size_t payload_size;
};

// IDX layout: big-endian magic (0x0000 08 <ndim>), ndim big-endian u32 dim
// sizes, then unsigned-byte payload.
inline IdxArray parse_idx(const std::vector<std::uint8_t>& bytes,
                          std::uint32_t expected_magic,
                          const std::string& path) {
  std::uint32_t magic = read_be32(bytes, 0, path);
  if (magic != expected_magic) {
    char msg[160];
    std::snprintf(msg, sizeof(msg),
                  "'%s': bad IDX magic 0x%08x at byte offset 0, expected 0x%08x",
                  path.c_str(), magic, expected_magic);
    throw DataError(msg);
  }
  std::size_t ndim = magic & 0xff;
  IdxArray a;
  std::size_t off = 4;
  std::size_t total = 1;
  for (std::size_t d = 0; d < ndim; ++d, off += 4) {
    a.dims.push_back(read_be32(bytes, off, path));
    total *= a.dims.back();
  }
  if (off + total > bytes.size())
    throw DataError("'" + path + "': payload truncated, need " +
                    std::to_string(total) + " bytes at byte offset " +
                    std::to_string(off) + ", have " +
                    std::to_string(bytes.size() - off));
  a.payload = bytes.data() + off;
  a.payload_size = total;
  return a;
}

}  // namespace detail

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

inline Dataset load_idx(const std::string& images_path,
                        const std::string& labels_path) {
  auto ibytes = detail::read_maybe_gzip(images_path);
  auto lbytes = detail::read_maybe_gzip(labels_path);
  detail::IdxArray img = detail::parse_idx(ibytes, kIdxImagesMagic, images_path);
  detail::IdxArray lab = detail::parse_idx(lbytes, kIdxLabelsMagic, labels_path);
  if (img.dims.size() != 3)
    throw DataError("'" + images_path + "': expected 3 dims [n,H,W]");
  if (lab.dims.size() != 1)
    throw DataError("'" + labels_path + "': expected 1 dim [n]");
  if (img.dims[0] != lab.dims[0])
    throw DataError("image/label count mismatch: " +
                    std::to_string(img.dims[0]) + " images vs " +
                    std::to_string(lab.dims[0]) + " labels");
  const std::size_t n = img.dims[0], H = img.dims[1], W = img.dims[2];
  Dataset ds;
  ds.images = Tensor({n, 1, H, W});
  for (std::size_t i = 0; i < n * H * W; ++i)
    ds.images[i] = static_cast<double>(img.payload[i]) / 255.0;
  ds.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    ds.labels[i] = static_cast<int>(lab.payload[i]);
  return ds;
}

// Writes the dataset back out as a pair of IDX files (pixels scaled to
// bytes). Exact round-trip for pixel values of the form k/255.
inline void save_idx(const Dataset& ds, const std::string& images_path,
                     const std::string& labels_path) {
  auto write_be32 = [](std::ofstream& f, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v)};
    f.write(reinterpret_cast<const char*>(b), 4);
  };
  const std::size_t n = ds.size(), H = ds.images.dim(2), W = ds.images.dim(3);
  std::ofstream fi(images_path, std::ios::binary);
  if (!fi) throw DataError("cannot write '" + images_path + "'");
  write_be32(fi, kIdxImagesMagic);
  write_be32(fi, static_cast<std::uint32_t>(n));
  write_be32(fi, static_cast<std::uint32_t>(H));
  write_be32(fi, static_cast<std::uint32_t>(W));
  for (std::size_t i = 0; i < n * H * W; ++i) {
    double v = std::clamp(ds.images[i], 0.0, 1.0) * 255.0;
    unsigned char b = static_cast<unsigned char>(v + 0.5);
    fi.write(reinterpret_cast<const char*>(&b), 1);
  }
  std::ofstream fl(labels_path, std::ios::binary);
  if (!fl) throw DataError("cannot write '" + labels_path + "'");
  write_be32(fl, kIdxLabelsMagic);
  write_be32(fl, static_cast<std::uint32_t>(n));
  for (std::size_t i = 0; i < n; ++i) {
    unsigned char b = static_cast<unsigned char>(ds.labels[i]);
    fl.write(reinterpret_cast<const char*>(&b), 1);
  }
}

inline Dataset select(const Dataset& ds, const std::vector<std::size_t>& idx) {
  const std::size_t m = ds.sample_numel();
  Shape shape = ds.images.shape();
  shape[0] = idx.size();
  Dataset out;
  out.images = Tensor(shape);
  out.labels.resize(idx.size());
  out.split = ds.split;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const double* src = ds.images.data() + idx[i] * m;
    double* dst = out.images.data() + i * m;
    std::copy(src, src + m, dst);
    out.labels[i] = ds.labels[idx[i]];
  }
  return out;
}

// Deterministic class-stratified sample without replacement. Per-class quotas
// are proportional (largest remainder, ties to the lower class index), so a
// balanced source with divisible n yields exactly equal counts.
inline Dataset subset(const Dataset& ds, std::size_t n, std::uint64_t seed) {
  if (n > ds.size())
    throw DataError("subset size " + std::to_string(n) +
                    " exceeds dataset size " + std::to_string(ds.size()));
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < ds.size(); ++i) by_class[ds.labels[i]].push_back(i);

  struct Quota {
    int cls;
    std::size_t whole;
    double frac;
  };
  std::vector<Quota> quotas;
  std::size_t assigned = 0;
  for (auto& [cls, idx] : by_class) {
    double exact = static_cast<double>(n) * static_cast<double>(idx.size()) /
                   static_cast<double>(ds.size());
    Quota q{cls, static_cast<std::size_t>(exact), 0.0};
    q.frac = exact - static_cast<double>(q.whole);
    assigned += q.whole;
    quotas.push_back(q);
  }
  std::stable_sort(quotas.begin(), quotas.end(), [](const Quota& a, const Quota& b) {
    if (a.frac != b.frac) return a.frac > b.frac;
    return a.cls < b.cls;
  });
  for (std::size_t i = 0; assigned < n; ++i, ++assigned)
    quotas[i % quotas.size()].whole += 1;

  Rng rng(mix_seed(seed, 0x5b5e7));
  std::vector<std::size_t> chosen;
  chosen.reserve(n);
  std::sort(quotas.begin(), quotas.end(),
            [](const Quota& a, const Quota& b) { return a.cls < b.cls; });
  for (const Quota& q : quotas) {
    std::vector<std::size_t>& pool = by_class[q.cls];
    std::size_t take = std::min<std::size_t>(q.whole, pool.size());
    rng.shuffle(pool);
    chosen.insert(chosen.end(), pool.begin(), pool.begin() + take);
  }
  rng.shuffle(chosen);
  return select(ds, chosen);
}

// Validation split helper: shuffles indices with the given seed and holds out
// the last `val_size` samples.
struct DataSplit {
  Dataset train;
  Dataset val;
};

inline DataSplit split_train_val(const Dataset& ds, std::size_t val_size,
                                 std::uint64_t seed) {
  if (val_size >= ds.size())
    throw DataError("validation size " + std::to_string(val_size) +
                    " leaves no training data");
  std::vector<std::size_t> idx(ds.size());
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(mix_seed(seed, 0x5411d));
  rng.shuffle(idx);
  std::vector<std::size_t> tr(idx.begin(), idx.end() - val_size);
  std::vector<std::size_t> va(idx.end() - val_size, idx.end());
  DataSplit split;
  split.train = select(ds, tr);
  split.train.split = "train";
  split.val = select(ds, va);
  split.val.split = "val";
  return split;
}

// Fixed per-class mean for the synthetic blobs: `spacing` at coordinate
// (class mod dim), zero elsewhere. Linearly separable when dim >= classes.
inline std::vector<double> blob_mean(int cls, int dim, double spacing) {
  std::vector<double> m(dim, 0.0);
  m[cls % dim] = spacing;
  return m;
}

inline Dataset synth_blobs(int classes, int n_per_class, int dim,
                           std::uint64_t seed, double spacing = 5.0) {
  if (classes <= 0 || n_per_class <= 0 || dim <= 0)
    throw DataError("synth_blobs: all counts must be positive");
  const std::size_t n = static_cast<std::size_t>(classes) * n_per_class;
  Dataset ds;
  ds.images = Tensor({n, 1, 1, static_cast<std::size_t>(dim)});
  ds.labels.resize(n);
  Rng rng(mix_seed(seed, 0xb10b5));
  for (std::size_t i = 0; i < n; ++i) {
    int cls = static_cast<int>(i) % classes;
    std::vector<double> mean = blob_mean(cls, dim, spacing);
    for (int d = 0; d < dim; ++d)
      ds.images[i * dim + d] = mean[d] + rng.normal();
    ds.labels[i] = cls;
  }
  return ds;
}

}  // namespace admmq
