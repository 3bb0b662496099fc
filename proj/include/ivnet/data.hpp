#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "ivnet/tensor.hpp"

namespace ivnet {

struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Feature rows scaled to [0,1], integer labels, and a split tag. No
/// augmentation or normalization is ever applied.
struct Dataset {
    Tensor features;
    std::vector<int> labels;
    std::size_t n_classes{0};
    std::string split;

    std::size_t size() const { return labels.size(); }
    std::size_t dim() const { return features.shape.size() == 2 ? features.shape[1] : 0; }

    void validate() const {
        if (features.shape.size() != 2 || features.shape[0] != labels.size())
            throw DataError("dataset: feature/label count mismatch");
        for (int y : labels)
            if (y < 0 || std::size_t(y) >= n_classes) throw DataError("dataset: label out of range");
        for (double v : features.data)
            if (!(v >= 0.0 && v <= 1.0)) throw DataError("dataset: feature outside [0,1]");
    }
};

namespace detail {

inline std::vector<unsigned char> read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open file: " + path);
    f.seekg(0, std::ios::end);
    const std::streamoff len = f.tellg();
    f.seekg(0, std::ios::beg);
    std::vector<unsigned char> buf(static_cast<std::size_t>(len));
    if (len > 0) f.read(reinterpret_cast<char*>(buf.data()), len);
    if (!f) throw DataError("read failed: " + path);
    return buf;
}

inline std::uint32_t be32(const std::vector<unsigned char>& b, std::size_t off) {
    if (off + 4 > b.size()) throw DataError("truncated IDX header");
    return (std::uint32_t(b[off]) << 24) | (std::uint32_t(b[off + 1]) << 16) |
           (std::uint32_t(b[off + 2]) << 8) | std::uint32_t(b[off + 3]);
}

inline void put_be32(std::ofstream& f, std::uint32_t v) {
    unsigned char b[4] = {(unsigned char)(v >> 24), (unsigned char)(v >> 16),
                          (unsigned char)(v >> 8), (unsigned char)v};
    f.write(reinterpret_cast<char*>(b), 4);
}

}  // namespace detail

/// Parses the IDX pair (big-endian, magic 0x803 for images and 0x801 for
/// labels), scaling pixels by 1/255.
inline Dataset load_idx(const std::string& images_path, const std::string& labels_path,
                        std::string split = "train") {
    const auto img = detail::read_file(images_path);
    const auto lab = detail::read_file(labels_path);
    if (detail::be32(img, 0) != 0x00000803u)
        throw DataError("bad magic in image file (want 0x00000803): " + images_path);
    if (detail::be32(lab, 0) != 0x00000801u)
        throw DataError("bad magic in label file (want 0x00000801): " + labels_path);
    const std::uint32_t n = detail::be32(img, 4);
    const std::uint32_t rows = detail::be32(img, 8);
    const std::uint32_t cols = detail::be32(img, 12);
    const std::uint32_t nl = detail::be32(lab, 4);
    if (n != nl)
        throw DataError("image/label count mismatch: " + std::to_string(n) + " vs " +
                        std::to_string(nl));
    const std::size_t d = std::size_t(rows) * cols;
    if (img.size() < 16 + std::size_t(n) * d) throw DataError("truncated image file: " + images_path);
    if (lab.size() < 8 + std::size_t(n)) throw DataError("truncated label file: " + labels_path);
    Dataset ds;
    ds.split = std::move(split);
    ds.features = Tensor({n, d});
    ds.labels.resize(n);
    constexpr double scale = 1.0 / 255.0;
    for (std::size_t i = 0; i < std::size_t(n) * d; ++i)
        ds.features[i] = double(img[16 + i]) * scale;
    int maxlab = -1;
    for (std::size_t i = 0; i < n; ++i) {
        ds.labels[i] = int(lab[8 + i]);
        maxlab = std::max(maxlab, ds.labels[i]);
    }
    ds.n_classes = std::size_t(maxlab + 1);
    return ds;
}

/// Writes the dataset as an IDX pair, quantizing features to bytes.
/// Feature rows are stored as 1 x d images unless rows*cols is given.
inline void write_idx(const Dataset& ds, const std::string& images_path,
                      const std::string& labels_path, std::size_t rows = 0,
                      std::size_t cols = 0) {
    if (rows == 0 || cols == 0) {
        rows = 1;
        cols = ds.dim();
    }
    if (rows * cols != ds.dim()) throw DataError("write_idx: rows*cols != feature dim");
    std::ofstream fi(images_path, std::ios::binary);
    std::ofstream fl(labels_path, std::ios::binary);
    if (!fi || !fl) throw DataError("write_idx: cannot open output files");
    detail::put_be32(fi, 0x00000803u);
    detail::put_be32(fi, std::uint32_t(ds.size()));
    detail::put_be32(fi, std::uint32_t(rows));
    detail::put_be32(fi, std::uint32_t(cols));
    for (double v : ds.features.data) {
        const long q = std::lround(v * 255.0);
        const unsigned char b = (unsigned char)std::min(255L, std::max(0L, q));
        fi.write(reinterpret_cast<const char*>(&b), 1);
    }
    detail::put_be32(fl, 0x00000801u);
    detail::put_be32(fl, std::uint32_t(ds.size()));
    for (int y : ds.labels) {
        const unsigned char b = (unsigned char)y;
        fl.write(reinterpret_cast<const char*>(&b), 1);
    }
    if (!fi || !fl) throw DataError("write_idx: write failed");
}

/// Gaussian blobs at seeded centers. `separation` scales the gap between
/// centers relative to the blob spread; 10 is comfortably linearly
/// separable, 1 overlaps. Values are clipped to [0,1].
inline Dataset synth_blobs(std::size_t n_classes, std::size_t n_per_class, std::size_t d,
                           double separation, std::uint64_t seed, std::string split = "train") {
    if (n_classes == 0 || n_per_class == 0 || d == 0)
        throw DataError("synth_blobs: empty dataset requested");
    if (!(separation > 0.0)) throw DataError("synth_blobs: separation must be positive");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ucenter(0.2, 0.8);
    double rmin = 0.5 / std::ceil(std::sqrt(double(n_classes)));
    std::vector<std::vector<double>> centers;
    while (centers.size() < n_classes) {
        bool placed = false;
        for (int attempt = 0; attempt < 10000 && !placed; ++attempt) {
            std::vector<double> c(d);
            for (auto& v : c) v = ucenter(rng);
            bool ok = true;
            for (const auto& o : centers) {
                double dist2 = 0.0;
                for (std::size_t k = 0; k < d; ++k) dist2 += (c[k] - o[k]) * (c[k] - o[k]);
                if (dist2 < rmin * rmin) {
                    ok = false;
                    break;
                }
            }
            if (ok) {
                centers.push_back(std::move(c));
                placed = true;
            }
        }
        if (!placed) {
            rmin *= 0.8;
            centers.clear();
        }
    }
    const double sigma = rmin / (2.0 * separation);
    std::normal_distribution<double> noise(0.0, sigma);
    Dataset ds;
    ds.split = std::move(split);
    ds.n_classes = n_classes;
    ds.features = Tensor({n_classes * n_per_class, d});
    ds.labels.resize(n_classes * n_per_class);
    std::size_t row = 0;
    for (std::size_t c = 0; c < n_classes; ++c)
        for (std::size_t i = 0; i < n_per_class; ++i, ++row) {
            for (std::size_t k = 0; k < d; ++k) {
                double v = centers[c][k] + noise(rng);
                ds.features[row * d + k] = std::min(1.0, std::max(0.0, v));
            }
            ds.labels[row] = int(c);
        }
    return ds;
}

/// CIFAR-10 binary batches: per record one label byte then 3072 channel-major
/// pixels. Full-scale CIFAR experiments are outside this engine's targets;
/// the loader exists for format completeness and is gated at the CLI.
inline Dataset load_cifar10(const std::vector<std::string>& batch_paths,
                            std::string split = "train") {
    constexpr std::size_t kRecord = 1 + 3072;
    Dataset ds;
    ds.split = std::move(split);
    ds.n_classes = 10;
    std::size_t total = 0;
    std::vector<std::vector<unsigned char>> bufs;
    for (const auto& p : batch_paths) {
        bufs.push_back(detail::read_file(p));
        if (bufs.back().size() % kRecord != 0)
            throw DataError("cifar batch has partial records: " + p);
        total += bufs.back().size() / kRecord;
    }
    if (total == 0) throw DataError("cifar: no records");
    ds.features = Tensor({total, std::size_t(3072)});
    ds.labels.resize(total);
    constexpr double scale = 1.0 / 255.0;
    std::size_t row = 0;
    for (const auto& buf : bufs)
        for (std::size_t off = 0; off < buf.size(); off += kRecord, ++row) {
            const int y = int(buf[off]);
            if (y > 9) throw DataError("cifar: label out of range");
            ds.labels[row] = y;
            for (std::size_t i = 0; i < 3072; ++i)
                ds.features[row * 3072 + i] = double(buf[off + 1 + i]) * scale;
        }
    return ds;
}

}  // namespace ivnet
