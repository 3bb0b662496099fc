#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>

#include "ivnet/tensor.hpp"

namespace ivnet {

/// Closed interval [lower, upper] over doubles. Construction enforces
/// lower <= upper and finiteness, so a constructed Interval is always valid.
struct Interval {
    double lower;
    double upper;

    Interval(double lo, double hi) : lower(lo), upper(hi) {
        if (!std::isfinite(lo) || !std::isfinite(hi))
            throw std::invalid_argument("Interval: bounds must be finite");
        if (lo > hi)
            throw std::invalid_argument("Interval: lower > upper");
    }

    static Interval point(double v) { return Interval(v, v); }

    double width() const { return upper - lower; }
    double mid() const { return 0.5 * (lower + upper); }
    bool contains(double v) const { return lower <= v && v <= upper; }
    bool contains(const Interval& o) const { return lower <= o.lower && o.upper <= upper; }
};

/// Elementwise interval bounds over a dense tensor; lower and upper share one shape.
struct IntervalTensor {
    Tensor lower;
    Tensor upper;

    IntervalTensor() = default;

    IntervalTensor(Tensor lo, Tensor hi) : lower(std::move(lo)), upper(std::move(hi)) {
        check_same_shape(lower, upper, "IntervalTensor");
        for (std::size_t i = 0; i < lower.numel(); ++i) {
            if (!std::isfinite(lower[i]) || !std::isfinite(upper[i]))
                throw std::invalid_argument("IntervalTensor: bounds must be finite");
            if (lower[i] > upper[i])
                throw std::invalid_argument("IntervalTensor: lower > upper at index " +
                                            std::to_string(i));
        }
    }

    static IntervalTensor point(const Tensor& t) { return IntervalTensor(t, t); }

    static IntervalTensor from_center_radius(const Tensor& center, const Tensor& radius) {
        check_same_shape(center, radius, "from_center_radius");
        Tensor lo(center.shape), hi(center.shape);
        for (std::size_t i = 0; i < center.numel(); ++i) {
            lo[i] = center[i] - radius[i];
            hi[i] = center[i] + radius[i];
        }
        return IntervalTensor(std::move(lo), std::move(hi));
    }

    const Shape& shape() const { return lower.shape; }
    std::size_t numel() const { return lower.numel(); }
    Interval at(std::size_t i) const { return Interval(lower[i], upper[i]); }

    bool contains_point(const Tensor& t) const {
        if (!lower.same_shape(t)) return false;
        for (std::size_t i = 0; i < t.numel(); ++i)
            if (t[i] < lower[i] || t[i] > upper[i]) return false;
        return true;
    }

    bool contains(const IntervalTensor& o) const {
        if (!lower.same_shape(o.lower)) return false;
        for (std::size_t i = 0; i < numel(); ++i)
            if (o.lower[i] < lower[i] || o.upper[i] > upper[i]) return false;
        return true;
    }
};

inline Interval iv_add(const Interval& a, const Interval& b) {
    return Interval(a.lower + b.lower, a.upper + b.upper);
}

/// Exact product hull: min/max over the four corner products.
inline Interval iv_mul(const Interval& a, const Interval& b) {
    const double p1 = a.lower * b.lower;
    const double p2 = a.lower * b.upper;
    const double p3 = a.upper * b.lower;
    const double p4 = a.upper * b.upper;
    return Interval(std::min(std::min(p1, p2), std::min(p3, p4)),
                    std::max(std::max(p1, p2), std::max(p3, p4)));
}

namespace detail {

// Accumulates the exact dot-product bounds over index k in a fixed
// left-to-right order; each scalar appears in exactly one product, so the
// per-term corner hull sums to the exact hull of the dot product.
inline void iv_dot_accumulate(const double* wl, const double* wu, const double* xl,
                              const double* xu, std::size_t n, double& lo, double& hi) {
    double acc_lo = 0.0, acc_hi = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double p1 = wl[k] * xl[k];
        const double p2 = wl[k] * xu[k];
        const double p3 = wu[k] * xl[k];
        const double p4 = wu[k] * xu[k];
        acc_lo += std::min(std::min(p1, p2), std::min(p3, p4));
        acc_hi += std::max(std::max(p1, p2), std::max(p3, p4));
    }
    lo = acc_lo;
    hi = acc_hi;
}

}  // namespace detail

inline Interval iv_dot(const IntervalTensor& w, const IntervalTensor& x) {
    if (w.shape().size() != 1 || x.shape().size() != 1)
        throw std::invalid_argument("iv_dot: expects 1-D tensors");
    if (w.numel() != x.numel())
        throw std::invalid_argument("iv_dot: length mismatch " + std::to_string(w.numel()) +
                                    " vs " + std::to_string(x.numel()));
    double lo, hi;
    detail::iv_dot_accumulate(w.lower.data.data(), w.upper.data.data(), x.lower.data.data(),
                              x.upper.data.data(), w.numel(), lo, hi);
    return Interval(lo, hi);
}

/// Interval dense layer: W [out x in], b [out], x [in] -> [out].
inline IntervalTensor iv_affine(const IntervalTensor& W, const IntervalTensor& b,
                                const IntervalTensor& x) {
    if (W.shape().size() != 2)
        throw std::invalid_argument("iv_affine: W must be 2-D");
    const std::size_t out = W.shape()[0], in = W.shape()[1];
    if (b.shape() != Shape{out} || x.shape() != Shape{in})
        throw std::invalid_argument("iv_affine: shape mismatch, W " + shape_str(W.shape()) +
                                    ", b " + shape_str(b.shape()) + ", x " + shape_str(x.shape()));
    Tensor lo({out}), hi({out});
    for (std::size_t i = 0; i < out; ++i) {
        double l, h;
        detail::iv_dot_accumulate(W.lower.data.data() + i * in, W.upper.data.data() + i * in,
                                  x.lower.data.data(), x.upper.data.data(), in, l, h);
        lo[i] = l + b.lower[i];
        hi[i] = h + b.upper[i];
    }
    return IntervalTensor(std::move(lo), std::move(hi));
}

/// Interval 2-D convolution over NCHW input. W [O x C x kh x kw], b [O],
/// x [N x C x H x W]. Zero padding contributes nothing to the receptive-field
/// sums. Each output element is an exact interval dot over its field.
inline IntervalTensor iv_conv2d(const IntervalTensor& W, const IntervalTensor& b,
                                const IntervalTensor& x, std::size_t stride,
                                std::size_t padding) {
    if (W.shape().size() != 4 || x.shape().size() != 4)
        throw std::invalid_argument("iv_conv2d: W and x must be 4-D (NCHW)");
    if (stride == 0) throw std::invalid_argument("iv_conv2d: stride must be positive");
    const std::size_t O = W.shape()[0], C = W.shape()[1], kh = W.shape()[2], kw = W.shape()[3];
    const std::size_t N = x.shape()[0], H = x.shape()[2], Wd = x.shape()[3];
    if (x.shape()[1] != C)
        throw std::invalid_argument("iv_conv2d: channel mismatch");
    if (b.shape() != Shape{O})
        throw std::invalid_argument("iv_conv2d: bias shape mismatch");
    if (H + 2 * padding < kh || Wd + 2 * padding < kw)
        throw std::invalid_argument("iv_conv2d: kernel larger than padded input");
    const std::size_t Ho = (H + 2 * padding - kh) / stride + 1;
    const std::size_t Wo = (Wd + 2 * padding - kw) / stride + 1;

    Tensor lo({N, O, Ho, Wo}), hi({N, O, Ho, Wo});
    auto xidx = [&](std::size_t n, std::size_t c, std::size_t i, std::size_t j) {
        return ((n * C + c) * H + i) * Wd + j;
    };
    std::size_t out_pos = 0;
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t o = 0; o < O; ++o)
            for (std::size_t oi = 0; oi < Ho; ++oi)
                for (std::size_t oj = 0; oj < Wo; ++oj, ++out_pos) {
                    double acc_lo = 0.0, acc_hi = 0.0;
                    for (std::size_t c = 0; c < C; ++c)
                        for (std::size_t ki = 0; ki < kh; ++ki)
                            for (std::size_t kj = 0; kj < kw; ++kj) {
                                const long ii = long(oi * stride + ki) - long(padding);
                                const long jj = long(oj * stride + kj) - long(padding);
                                if (ii < 0 || jj < 0 || ii >= long(H) || jj >= long(Wd)) continue;
                                const std::size_t xi = xidx(n, c, std::size_t(ii), std::size_t(jj));
                                const std::size_t wi = ((o * C + c) * kh + ki) * kw + kj;
                                const double p1 = W.lower[wi] * x.lower[xi];
                                const double p2 = W.lower[wi] * x.upper[xi];
                                const double p3 = W.upper[wi] * x.lower[xi];
                                const double p4 = W.upper[wi] * x.upper[xi];
                                acc_lo += std::min(std::min(p1, p2), std::min(p3, p4));
                                acc_hi += std::max(std::max(p1, p2), std::max(p3, p4));
                            }
                    lo[out_pos] = acc_lo + b.lower[o];
                    hi[out_pos] = acc_hi + b.upper[o];
                }
    return IntervalTensor(std::move(lo), std::move(hi));
}

/// Propagates a nondecreasing elementwise map: lower' = f(lower), upper' = f(upper).
template <typename F>
IntervalTensor iv_monotone(F&& f, const IntervalTensor& x) {
    Tensor lo(x.shape()), hi(x.shape());
    for (std::size_t i = 0; i < x.numel(); ++i) {
        lo[i] = f(x.lower[i]);
        hi[i] = f(x.upper[i]);
    }
    return IntervalTensor(std::move(lo), std::move(hi));
}

inline double relu(double v) { return v > 0.0 ? v : 0.0; }

inline double sigmoid(double v) {
    if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
}

}  // namespace ivnet
