#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "ivnet/interval.hpp"
#include "ivnet/network.hpp"
#include "ivnet/tape.hpp"
#include "ivnet/tensor.hpp"

namespace ivnet {

/// Mean cross-entropy over the batch, max-shifted log-sum-exp.
inline double cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
    if (logits.shape.size() != 2) throw std::invalid_argument("cross_entropy: logits must be 2-D");
    const std::size_t B = logits.shape[0], C = logits.shape[1];
    if (labels.size() != B) throw std::invalid_argument("cross_entropy: label count mismatch");
    double total = 0.0;
    for (std::size_t b = 0; b < B; ++b) {
        const int y = labels[b];
        if (y < 0 || std::size_t(y) >= C) throw std::out_of_range("cross_entropy: label range");
        double m = logits.at(b, 0);
        for (std::size_t c = 1; c < C; ++c) m = std::max(m, logits.at(b, c));
        double s = 0.0;
        for (std::size_t c = 0; c < C; ++c) s += std::exp(logits.at(b, c) - m);
        total += (m + std::log(s)) - logits.at(b, std::size_t(y));
    }
    return total / double(B);
}

/// Fraction of rows whose argmax (first maximum on ties) equals the label.
inline double accuracy(const Tensor& logits, const std::vector<int>& labels) {
    if (logits.shape.size() != 2) throw std::invalid_argument("accuracy: logits must be 2-D");
    const std::size_t B = logits.shape[0], C = logits.shape[1];
    if (labels.size() != B) throw std::invalid_argument("accuracy: label count mismatch");
    std::size_t hits = 0;
    for (std::size_t b = 0; b < B; ++b) {
        std::size_t best = 0;
        for (std::size_t c = 1; c < C; ++c)
            if (logits.at(b, c) > logits.at(b, best)) best = c;
        if (int(best) == labels[b]) ++hits;
    }
    return double(hits) / double(B);
}

/// Worst-case logit rows: upper bound everywhere except the lower bound at
/// the true class. Cross-entropy of this row upper-bounds the cross-entropy
/// of every logit vector in the bounds.
inline Tensor worst_case_logits(const IntervalTensor& bounds, const std::vector<int>& labels) {
    if (bounds.shape().size() != 2)
        throw std::invalid_argument("worst_case_logits: bounds must be 2-D");
    const std::size_t B = bounds.shape()[0], C = bounds.shape()[1];
    if (labels.size() != B)
        throw std::invalid_argument("worst_case_logits: label count mismatch");
    Tensor z({B, C});
    for (std::size_t b = 0; b < B; ++b) {
        const int y = labels[b];
        if (y < 0 || std::size_t(y) >= C)
            throw std::out_of_range("worst_case_logits: label range");
        for (std::size_t c = 0; c < C; ++c)
            z.at(b, c) = (std::size_t(y) == c) ? bounds.lower.at(b, c) : bounds.upper.at(b, c);
    }
    return z;
}

inline Tensor worst_case_logits(const IntervalTensor& bounds, int label) {
    if (bounds.shape().size() != 1)
        throw std::invalid_argument("worst_case_logits: expected 1-D bounds");
    IntervalTensor row(Tensor({std::size_t(1), bounds.shape()[0]}, bounds.lower.data),
                       Tensor({std::size_t(1), bounds.shape()[0]}, bounds.upper.data));
    Tensor z = worst_case_logits(row, std::vector<int>{label});
    return Tensor({bounds.shape()[0]}, z.data);
}

/// Fraction of rows guaranteed correct for every parameter vector in the
/// box: lower[y] strictly above upper[i] for all i != y. Ties do not count.
inline double worst_case_accuracy_from(const IntervalTensor& bounds,
                                       const std::vector<int>& labels) {
    if (bounds.shape().size() != 2)
        throw std::invalid_argument("worst_case_accuracy: bounds must be 2-D");
    const std::size_t B = bounds.shape()[0], C = bounds.shape()[1];
    if (labels.size() != B)
        throw std::invalid_argument("worst_case_accuracy: label count mismatch");
    std::size_t hits = 0;
    for (std::size_t b = 0; b < B; ++b) {
        const int y = labels[b];
        if (y < 0 || std::size_t(y) >= C)
            throw std::out_of_range("worst_case_accuracy: label range");
        bool ok = true;
        for (std::size_t c = 0; c < C && ok; ++c)
            if (c != std::size_t(y) && !(bounds.lower.at(b, std::size_t(y)) > bounds.upper.at(b, c)))
                ok = false;
        if (ok) ++hits;
    }
    return double(hits) / double(B);
}

inline double worst_case_loss_from(const IntervalTensor& bounds,
                                   const std::vector<int>& labels) {
    return cross_entropy(worst_case_logits(bounds, labels), labels);
}

// ---- net-level wrappers ----

inline double worst_case_loss(const Network& net, const ParamBox& box, const Tensor& X,
                              const std::vector<int>& labels, std::size_t task = 0) {
    return worst_case_loss_from(forward_interval(net, box, X, task), labels);
}

inline double worst_case_accuracy(const Network& net, const ParamBox& box, const Tensor& X,
                                  const std::vector<int>& labels, std::size_t task = 0) {
    return worst_case_accuracy_from(forward_interval(net, box, X, task), labels);
}

/// Same quantities through the live reparameterization (the training-time
/// objective, before the realize() float fixup).
inline IntervalTensor forward_interval(const Network& net, const ReparamState& s,
                                       const Tensor& X, std::size_t task = 0) {
    Tape t;
    ParamVars pv = tape_params_from_state(t, s, false, false, true);
    VarId x = t.leaf(X);
    IvVar z = tape_interval_logits(t, net, pv, {x, x}, task);
    return IntervalTensor(t.val(z.lo), t.val(z.hi));
}

inline double worst_case_loss(const Network& net, const ReparamState& s, const Tensor& X,
                              const std::vector<int>& labels, std::size_t task = 0) {
    return worst_case_loss_from(forward_interval(net, s, X, task), labels);
}

inline double worst_case_accuracy(const Network& net, const ReparamState& s, const Tensor& X,
                                  const std::vector<int>& labels, std::size_t task = 0) {
    return worst_case_accuracy_from(forward_interval(net, s, X, task), labels);
}

}  // namespace ivnet
