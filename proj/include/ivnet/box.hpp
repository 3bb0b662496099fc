#pragma once

#include <algorithm>
#include <optional>
#include <random>
#include <stdexcept>
#include <vector>

#include "ivnet/tensor.hpp"

namespace ivnet {

/// Centers and radii for one intervalized layer.
struct LayerBox {
    Tensor W;
    Tensor b;
    Tensor eps_w;
    Tensor eps_b;

    void validate() const {
        check_same_shape(W, eps_w, "LayerBox W/eps_w");
        check_same_shape(b, eps_b, "LayerBox b/eps_b");
        for (std::size_t i = 0; i < eps_w.numel(); ++i)
            if (!(eps_w[i] >= 0.0)) throw std::invalid_argument("LayerBox: negative weight radius");
        for (std::size_t i = 0; i < eps_b.numel(); ++i)
            if (!(eps_b[i] >= 0.0)) throw std::invalid_argument("LayerBox: negative bias radius");
    }
};

/// The hyperrectangle of admissible parameters: per-parameter centers and
/// radii for every intervalized layer of the network.
struct ParamBox {
    std::vector<LayerBox> layers;

    void validate() const {
        for (const auto& l : layers) l.validate();
    }

    bool congruent(const ParamBox& o) const {
        if (layers.size() != o.layers.size()) return false;
        for (std::size_t i = 0; i < layers.size(); ++i)
            if (!layers[i].W.same_shape(o.layers[i].W) || !layers[i].b.same_shape(o.layers[i].b))
                return false;
        return true;
    }
};

namespace detail {

inline bool contains_1d(const Tensor& wo, const Tensor& eo, const Tensor& wi, const Tensor& ei) {
    for (std::size_t k = 0; k < wo.numel(); ++k) {
        if (wi[k] - ei[k] < wo[k] - eo[k]) return false;
        if (wi[k] + ei[k] > wo[k] + eo[k]) return false;
    }
    return true;
}

}  // namespace detail

/// Exact float containment: [W_i - e_i, W_i + e_i] inside [W_o - e_o, W_o + e_o]
/// elementwise, with bounds evaluated in double and compared with no tolerance.
inline bool box_contains(const ParamBox& outer, const ParamBox& inner) {
    if (!outer.congruent(inner)) throw std::invalid_argument("box_contains: shape mismatch");
    for (std::size_t l = 0; l < outer.layers.size(); ++l) {
        const auto& o = outer.layers[l];
        const auto& i = inner.layers[l];
        if (!detail::contains_1d(o.W, o.eps_w, i.W, i.eps_w)) return false;
        if (!detail::contains_1d(o.b, o.eps_b, i.b, i.eps_b)) return false;
    }
    return true;
}

inline std::optional<ParamBox> box_intersect(const ParamBox& a, const ParamBox& b) {
    if (!a.congruent(b)) throw std::invalid_argument("box_intersect: shape mismatch");
    ParamBox r;
    r.layers.reserve(a.layers.size());
    auto meet = [](const Tensor& wa, const Tensor& ea, const Tensor& wb, const Tensor& eb,
                   Tensor& w, Tensor& e) -> bool {
        w = Tensor(wa.shape);
        e = Tensor(wa.shape);
        for (std::size_t k = 0; k < wa.numel(); ++k) {
            const double lo = std::max(wa[k] - ea[k], wb[k] - eb[k]);
            const double hi = std::min(wa[k] + ea[k], wb[k] + eb[k]);
            if (lo > hi) return false;
            w[k] = 0.5 * (lo + hi);
            e[k] = hi - w[k];
            if (e[k] < 0.0) e[k] = 0.0;
        }
        return true;
    };
    for (std::size_t l = 0; l < a.layers.size(); ++l) {
        LayerBox lb;
        if (!meet(a.layers[l].W, a.layers[l].eps_w, b.layers[l].W, b.layers[l].eps_w, lb.W,
                  lb.eps_w))
            return std::nullopt;
        if (!meet(a.layers[l].b, a.layers[l].eps_b, b.layers[l].b, b.layers[l].eps_b, lb.b,
                  lb.eps_b))
            return std::nullopt;
        r.layers.push_back(std::move(lb));
    }
    return r;
}

/// Sum of all radii over the intervalized parameters.
inline double region_size(const ParamBox& box) {
    double s = 0.0;
    for (const auto& l : box.layers) {
        for (std::size_t i = 0; i < l.eps_w.numel(); ++i) s += l.eps_w[i];
        for (std::size_t i = 0; i < l.eps_b.numel(); ++i) s += l.eps_b[i];
    }
    return s;
}

inline std::size_t box_param_count(const ParamBox& box) {
    std::size_t n = 0;
    for (const auto& l : box.layers) n += l.W.numel() + l.b.numel();
    return n;
}

/// Uniform draw from the box, returned as a degenerate box (radii zero) so it
/// plugs into the plain forward pass. Draws are clamped into the source
/// bounds so membership is exact in float.
inline ParamBox sample_point(const ParamBox& box, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    ParamBox p;
    p.layers.reserve(box.layers.size());
    auto draw = [&](const Tensor& w, const Tensor& e, Tensor& out) {
        out = Tensor(w.shape);
        for (std::size_t k = 0; k < w.numel(); ++k) {
            const double lo = w[k] - e[k], hi = w[k] + e[k];
            out[k] = std::clamp(lo + u(rng) * (hi - lo), lo, hi);
        }
    };
    for (const auto& l : box.layers) {
        LayerBox lb;
        draw(l.W, l.eps_w, lb.W);
        draw(l.b, l.eps_b, lb.b);
        lb.eps_w = Tensor(l.eps_w.shape);
        lb.eps_b = Tensor(l.eps_b.shape);
        p.layers.push_back(std::move(lb));
    }
    return p;
}

}  // namespace ivnet
