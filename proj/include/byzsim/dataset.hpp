#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>

#include "byzsim/core.hpp"

namespace byzsim {

/// In-memory labeled dataset. Features are row vectors in [0,1] for image
/// data; labels are class indices.
struct Dataset {
  std::vector<Vec> features;
  std::vector<int> labels;
  int num_classes = 10;

  std::size_t size() const { return features.size(); }
  std::size_t feature_dim() const { return features.empty() ? 0 : features[0].size(); }
};

namespace detail {

inline std::uint32_t read_be32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw std::runtime_error("idx: truncated file");
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
         (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

inline void write_be32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<char*>(b), 4);
}

}  // namespace detail

/// Parse IDX image/label file pair (magic 0x00000803 / 0x00000801). Pixels
/// are scaled to [0,1]; image and label counts must match.
inline Dataset ingest_idx(const std::filesystem::path& images_path,
                          const std::filesystem::path& labels_path) {
  std::ifstream img(images_path, std::ios::binary);
  if (!img) throw std::runtime_error("idx: cannot open " + images_path.string());
  std::ifstream lbl(labels_path, std::ios::binary);
  if (!lbl) throw std::runtime_error("idx: cannot open " + labels_path.string());

  if (detail::read_be32(img) != 0x00000803u) throw std::runtime_error("idx: bad magic (images)");
  const std::uint32_t n_img = detail::read_be32(img);
  const std::uint32_t rows = detail::read_be32(img);
  const std::uint32_t cols = detail::read_be32(img);

  if (detail::read_be32(lbl) != 0x00000801u) throw std::runtime_error("idx: bad magic (labels)");
  const std::uint32_t n_lbl = detail::read_be32(lbl);
  if (n_img != n_lbl) throw std::runtime_error("idx: image/label count mismatch");

  Dataset ds;
  ds.features.reserve(n_img);
  ds.labels.reserve(n_img);
  const std::size_t px = static_cast<std::size_t>(rows) * cols;
  std::vector<unsigned char> buf(px);
  for (std::uint32_t i = 0; i < n_img; ++i) {
    img.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(px));
    if (!img) throw std::runtime_error("idx: truncated file");
    Vec row(px);
    for (std::size_t k = 0; k < px; ++k) row[k] = buf[k] / 255.0;
    ds.features.push_back(std::move(row));
    unsigned char y = 0;
    lbl.read(reinterpret_cast<char*>(&y), 1);
    if (!lbl) throw std::runtime_error("idx: truncated file");
    if (y >= 10) throw std::runtime_error("idx: label out of range");
    ds.labels.push_back(static_cast<int>(y));
  }
  return ds;
}

/// Write a dataset as an IDX image/label file pair (inverse of ingest_idx
/// up to pixel quantization).
inline void write_idx(const Dataset& ds, std::uint32_t rows, std::uint32_t cols,
                      const std::filesystem::path& images_path,
                      const std::filesystem::path& labels_path) {
  std::ofstream img(images_path, std::ios::binary);
  std::ofstream lbl(labels_path, std::ios::binary);
  detail::write_be32(img, 0x00000803u);
  detail::write_be32(img, static_cast<std::uint32_t>(ds.size()));
  detail::write_be32(img, rows);
  detail::write_be32(img, cols);
  detail::write_be32(lbl, 0x00000801u);
  detail::write_be32(lbl, static_cast<std::uint32_t>(ds.size()));
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (double v : ds.features[i]) {
      const auto b = static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
      img.write(reinterpret_cast<const char*>(&b), 1);
    }
    const auto y = static_cast<unsigned char>(ds.labels[i]);
    lbl.write(reinterpret_cast<const char*>(&y), 1);
  }
}

/// Label-sorted contiguous equal chunks, one per good worker; a short final
/// chunk is padded with samples from itself, then each shard is shuffled.
inline std::vector<Dataset> partition_heterogeneous(const Dataset& ds,
                                                    std::size_t n_good,
                                                    const SeededRng& rng) {
  if (n_good < 1) throw std::invalid_argument("partition: n_good must be >= 1");
  if (ds.size() == 0) throw std::invalid_argument("partition: empty dataset");

  std::vector<std::size_t> order(ds.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return ds.labels[a] < ds.labels[b];
  });

  const std::size_t chunk = (ds.size() + n_good - 1) / n_good;
  std::vector<Dataset> shards(n_good);
  for (std::size_t w = 0; w < n_good; ++w) {
    Dataset& sh = shards[w];
    sh.num_classes = ds.num_classes;
    const std::size_t lo = w * chunk;
    const std::size_t hi = std::min(ds.size(), lo + chunk);
    std::vector<std::size_t> idx(order.begin() + static_cast<long>(lo),
                                 order.begin() + static_cast<long>(hi));
    // augment a short final chunk with samples from itself
    auto pad_rng = rng.stream(RngPurpose::data, w, 1);
    while (idx.size() < chunk && !idx.empty()) {
      std::uniform_int_distribution<std::size_t> pick(0, idx.size() - 1);
      idx.push_back(idx[pick(pad_rng)]);
    }
    auto shuf_rng = rng.stream(RngPurpose::data, w, 2);
    std::shuffle(idx.begin(), idx.end(), shuf_rng);
    for (std::size_t i : idx) {
      sh.features.push_back(ds.features[i]);
      sh.labels.push_back(ds.labels[i]);
    }
  }
  return shards;
}

/// Long-tail subsampling: class i keeps a gamma^i fraction (floor rule),
/// uniformly without replacement.
inline Dataset long_tail_subsample(const Dataset& ds, double gamma,
                                   const SeededRng& rng) {
  if (!(gamma > 0.0 && gamma <= 1.0))
    throw std::invalid_argument("long_tail: gamma in (0,1]");
  if (gamma == 1.0) return ds;

  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < ds.size(); ++i) by_class[ds.labels[i]].push_back(i);

  std::vector<std::size_t> keep;
  for (auto& [cls, idx] : by_class) {
    const auto target = static_cast<std::size_t>(
        std::floor(static_cast<double>(idx.size()) * std::pow(gamma, cls)));
    if (target == 0) throw std::runtime_error("long_tail: class emptied");
    auto cls_rng = rng.stream(RngPurpose::data, static_cast<std::uint64_t>(cls), 3);
    std::shuffle(idx.begin(), idx.end(), cls_rng);
    keep.insert(keep.end(), idx.begin(), idx.begin() + static_cast<long>(target));
  }
  std::sort(keep.begin(), keep.end());

  Dataset out;
  out.num_classes = ds.num_classes;
  for (std::size_t i : keep) {
    out.features.push_back(ds.features[i]);
    out.labels.push_back(ds.labels[i]);
  }
  return out;
}

/// Gaussian-blob classification data: one spherical cluster per class, unit
/// class-mean norm, noise sigma per coordinate.
inline Dataset make_synthetic_classification(int num_classes, std::size_t per_class,
                                             std::size_t dim, double noise_sigma,
                                             const SeededRng& rng) {
  Dataset ds;
  ds.num_classes = num_classes;
  auto gen = rng.stream(RngPurpose::data, 99, 0);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::vector<Vec> means(static_cast<std::size_t>(num_classes));
  for (auto& m : means) {
    m.resize(dim);
    for (double& v : m) v = nd(gen);
    m = scale(m, 1.0 / std::max(1e-12, norm(m)));
  }
  for (int c = 0; c < num_classes; ++c) {
    for (std::size_t i = 0; i < per_class; ++i) {
      Vec x = means[static_cast<std::size_t>(c)];
      for (double& v : x) v += noise_sigma * nd(gen);
      ds.features.push_back(std::move(x));
      ds.labels.push_back(c);
    }
  }
  return ds;
}

}  // namespace byzsim
