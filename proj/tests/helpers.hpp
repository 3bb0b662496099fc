#pragma once

#include <cstdlib>
#include <filesystem>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "ivnet/data.hpp"
#include "ivnet/interval.hpp"
#include "ivnet/tensor.hpp"

namespace ivtest {

inline std::string mnist_dir() {
    if (const char* env = std::getenv("IVNET_MNIST_DIR")) return env;
    return "/root/data/mnist";
}

inline bool mnist_available() {
    namespace fs = std::filesystem;
    const fs::path d(mnist_dir());
    return fs::exists(d / "train-images-idx3-ubyte") && fs::exists(d / "train-labels-idx1-ubyte") &&
           fs::exists(d / "t10k-images-idx3-ubyte") && fs::exists(d / "t10k-labels-idx1-ubyte");
}

inline std::string temp_dir(const std::string& tag) {
    namespace fs = std::filesystem;
    const fs::path p = fs::temp_directory_path() / ("ivnet_test_" + tag);
    fs::create_directories(p);
    return p.string();
}

inline ivnet::Tensor random_tensor(const ivnet::Shape& shape, std::mt19937_64& rng,
                                   double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    ivnet::Tensor t(shape);
    for (std::size_t i = 0; i < t.numel(); ++i) t[i] = u(rng);
    return t;
}

inline ivnet::IntervalTensor random_interval(const ivnet::Shape& shape, std::mt19937_64& rng,
                                             double center_mag = 1.0, double max_radius = 1.0) {
    std::uniform_real_distribution<double> uc(-center_mag, center_mag);
    std::uniform_real_distribution<double> ur(0.0, max_radius);
    ivnet::Tensor lo(shape), hi(shape);
    for (std::size_t i = 0; i < lo.numel(); ++i) {
        const double c = uc(rng), r = ur(rng);
        lo[i] = c - r;
        hi[i] = c + r;
    }
    return ivnet::IntervalTensor(std::move(lo), std::move(hi));
}

inline ivnet::Tensor sample_within(const ivnet::IntervalTensor& iv, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    ivnet::Tensor t(iv.shape());
    for (std::size_t i = 0; i < t.numel(); ++i)
        t[i] = iv.lower[i] + u(rng) * (iv.upper[i] - iv.lower[i]);
    return t;
}

/// Exact interval dot product by brute force over per-coordinate corner
/// choices; usable up to ~12 interval scalars (2^n corners).
inline ivnet::Interval corner_dot(const ivnet::IntervalTensor& w, const ivnet::IntervalTensor& x) {
    const std::size_t n = w.lower.numel();
    double best_lo = 0.0, best_hi = 0.0;
    const std::size_t corners = std::size_t(1) << (2 * n);
    for (std::size_t mask = 0; mask < corners; ++mask) {
        double s = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            const double wv = (mask >> (2 * k)) & 1 ? w.upper[k] : w.lower[k];
            const double xv = (mask >> (2 * k + 1)) & 1 ? x.upper[k] : x.lower[k];
            s += wv * xv;
        }
        if (mask == 0 || s < best_lo) best_lo = s;
        if (mask == 0 || s > best_hi) best_hi = s;
    }
    return ivnet::Interval(best_lo, best_hi);
}

/// Train/test blob splits sharing class centers: one generation call, rows
/// sliced per class block so the splits are disjoint.
inline std::pair<ivnet::Dataset, ivnet::Dataset> blob_pair(std::size_t n_classes,
                                                           std::size_t train_per,
                                                           std::size_t test_per, std::size_t d,
                                                           double separation,
                                                           std::uint64_t seed) {
    const std::size_t per = train_per + test_per;
    const ivnet::Dataset all = ivnet::synth_blobs(n_classes, per, d, separation, seed, "all");
    auto slice = [&](std::size_t lo, std::size_t hi, std::string split) {
        ivnet::Dataset out;
        out.split = std::move(split);
        out.n_classes = n_classes;
        const std::size_t rows = (hi - lo) * n_classes;
        out.features = ivnet::Tensor({rows, d});
        out.labels.reserve(rows);
        std::size_t r = 0;
        for (std::size_t cls = 0; cls < n_classes; ++cls)
            for (std::size_t i = lo; i < hi; ++i, ++r) {
                const std::size_t src = cls * per + i;
                for (std::size_t k = 0; k < d; ++k)
                    out.features[r * d + k] = all.features[src * d + k];
                out.labels.push_back(all.labels[src]);
            }
        return out;
    };
    return {slice(0, train_per, "train"), slice(train_per, per, "test")};
}

}  // namespace ivtest
