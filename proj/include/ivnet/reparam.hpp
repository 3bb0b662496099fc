#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "ivnet/box.hpp"
#include "ivnet/interval.hpp"
#include "ivnet/tensor.hpp"

namespace ivnet {

/// Free variables for one intervalized layer.
struct LayerReparam {
    Tensor mu_w;
    Tensor nu_w;
    Tensor mu_b;
    Tensor nu_b;
};

/// Unconstrained training variables (mu, nu) plus the frozen previous-task
/// box (W*, eps*). The realized box is nested inside the frozen box by
/// construction: W = W* + tanh(mu) eps*, eps = sigmoid(nu) min of the two
/// distances from W to the frozen faces.
struct ReparamState {
    std::vector<LayerReparam> layers;
    ParamBox frozen;

    void check_shapes() const {
        if (layers.size() != frozen.layers.size())
            throw std::invalid_argument("ReparamState: layer count mismatch");
        for (std::size_t l = 0; l < layers.size(); ++l) {
            check_same_shape(layers[l].mu_w, frozen.layers[l].W, "ReparamState mu_w");
            check_same_shape(layers[l].nu_w, frozen.layers[l].W, "ReparamState nu_w");
            check_same_shape(layers[l].mu_b, frozen.layers[l].b, "ReparamState mu_b");
            check_same_shape(layers[l].nu_b, frozen.layers[l].b, "ReparamState nu_b");
        }
    }
};

namespace detail {

// Elementwise realization with a float-exactness fixup: the realized bounds
// W - eps and W + eps, evaluated in double, must not escape the frozen
// bounds evaluated in double, since containment checks compare at tolerance
// zero. The center never escapes (|tanh| <= 1 and rounding is monotone);
// eps is stepped down by ulps in the rare case W +- eps rounds outside.
inline void realize_group(const Tensor& mu, const Tensor& nu, const Tensor& Ws, const Tensor& es,
                          Tensor& W, Tensor& eps) {
    W = Tensor(Ws.shape);
    eps = Tensor(Ws.shape);
    for (std::size_t i = 0; i < Ws.numel(); ++i) {
        const double ub = Ws[i] + es[i];
        const double lb = Ws[i] - es[i];
        double w = Ws[i] + std::tanh(mu[i]) * es[i];
        if (w > ub) w = ub;
        if (w < lb) w = lb;
        const double m = std::min(ub - w, w - lb);
        double e = sigmoid(nu[i]) * m;
        while (w + e > ub || w - e < lb) e = std::nextafter(e, 0.0);
        W[i] = w;
        eps[i] = e;
    }
}

}  // namespace detail

/// Realizes the current free variables into a parameter box.
inline ParamBox realize(const ReparamState& s) {
    s.check_shapes();
    ParamBox out;
    out.layers.resize(s.layers.size());
    for (std::size_t l = 0; l < s.layers.size(); ++l) {
        detail::realize_group(s.layers[l].mu_w, s.layers[l].nu_w, s.frozen.layers[l].W,
                              s.frozen.layers[l].eps_w, out.layers[l].W, out.layers[l].eps_w);
        detail::realize_group(s.layers[l].mu_b, s.layers[l].nu_b, s.frozen.layers[l].b,
                              s.frozen.layers[l].eps_b, out.layers[l].b, out.layers[l].eps_b);
    }
    return out;
}

/// Fresh state over a frozen box: mu = 0 (centers keep), nu = nu_reset.
inline ReparamState initial_state(ParamBox frozen, double nu_reset) {
    ReparamState s;
    s.layers.resize(frozen.layers.size());
    for (std::size_t l = 0; l < frozen.layers.size(); ++l) {
        s.layers[l].mu_w = Tensor(frozen.layers[l].W.shape);
        s.layers[l].mu_b = Tensor(frozen.layers[l].b.shape);
        s.layers[l].nu_w = Tensor::full(frozen.layers[l].W.shape, nu_reset);
        s.layers[l].nu_b = Tensor::full(frozen.layers[l].b.shape, nu_reset);
    }
    s.frozen = std::move(frozen);
    return s;
}

inline void reset_nu(ReparamState& s, double nu_reset) {
    for (auto& l : s.layers) {
        for (std::size_t i = 0; i < l.nu_w.numel(); ++i) l.nu_w[i] = nu_reset;
        for (std::size_t i = 0; i < l.nu_b.numel(); ++i) l.nu_b[i] = nu_reset;
    }
}

}  // namespace ivnet
