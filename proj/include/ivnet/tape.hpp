#pragma once

#define EIGEN_DONT_PARALLELIZE

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <stdexcept>
#include <vector>

#include "ivnet/interval.hpp"
#include "ivnet/tensor.hpp"

namespace ivnet {

using VarId = std::uint32_t;

/// Lower/upper bound variables of one interval quantity. When lo == hi the
/// quantity is structurally a point (both bounds are the same variable).
struct IvVar {
    VarId lo{0};
    VarId hi{0};
    bool point() const { return lo == hi; }
};

namespace eg {
using RM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<RM>;
using CMapRM = Eigen::Map<const RM>;
using CMapRow = Eigen::Map<const Eigen::RowVectorXd>;

inline CMapRM cmat(const Tensor& t, std::size_t r, std::size_t c) {
    return CMapRM(t.data.data(), long(r), long(c));
}
inline MapRM mat(Tensor& t, std::size_t r, std::size_t c) {
    return MapRM(t.data.data(), long(r), long(c));
}
}  // namespace eg

/// Reverse-mode tape over dense tensors. Values are computed eagerly at op
/// recording time; backward() replays the recorded closures in reverse
/// creation order, which is a topological order by construction.
///
/// With record_margins enabled, every op with a gradient discontinuity logs
/// its distance to the nearest switching boundary (ReLU zero crossings,
/// interval corner ties, elementwise-min ties, weight sign changes) and
/// interval affine ops take the per-term corner-selection path. margin()
/// then reports the smallest distance seen, which callers use to reject
/// finite-difference checks too close to a boundary.
class Tape {
  public:
    explicit Tape(bool record_margins = false) : record_margins_(record_margins) {}

    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    VarId leaf(Tensor v, bool requires_grad = false) {
        return push(std::move(v), requires_grad, {});
    }

    const Tensor& val(VarId id) const { return vals_.at(id); }
    const Tensor& grad(VarId id) const {
        if (!rg_[id]) throw std::logic_error("Tape::grad: variable does not require grad");
        return grads_[id];
    }
    bool requires_grad(VarId id) const { return rg_.at(id); }
    std::size_t size() const { return vals_.size(); }
    double margin() const { return margin_; }
    bool recording_margins() const { return record_margins_; }

    // ---- elementwise ----

    VarId add(VarId a, VarId b) {
        check_same_shape(vals_[a], vals_[b], "Tape::add");
        Tensor out(vals_[a].shape);
        for (std::size_t i = 0; i < out.numel(); ++i) out[i] = vals_[a][i] + vals_[b][i];
        VarId y = push(std::move(out), rg_[a] || rg_[b], {});
        if (rg_[y])
            set_back(y, [this, a, b, y] {
                const Tensor& g = grads_[y];
                acc_eltwise(a, g, nullptr);
                acc_eltwise(b, g, nullptr);
            });
        return y;
    }

    VarId sub(VarId a, VarId b) {
        check_same_shape(vals_[a], vals_[b], "Tape::sub");
        Tensor out(vals_[a].shape);
        for (std::size_t i = 0; i < out.numel(); ++i) out[i] = vals_[a][i] - vals_[b][i];
        VarId y = push(std::move(out), rg_[a] || rg_[b], {});
        if (rg_[y])
            set_back(y, [this, a, b, y] {
                const Tensor& g = grads_[y];
                acc_eltwise(a, g, nullptr);
                if (rg_[b])
                    for (std::size_t i = 0; i < g.numel(); ++i) grads_[b][i] -= g[i];
                if (rg_[b]) touched_[b] = true;
            });
        return y;
    }

    VarId mul(VarId a, VarId b) {
        check_same_shape(vals_[a], vals_[b], "Tape::mul");
        Tensor out(vals_[a].shape);
        for (std::size_t i = 0; i < out.numel(); ++i) out[i] = vals_[a][i] * vals_[b][i];
        VarId y = push(std::move(out), rg_[a] || rg_[b], {});
        if (rg_[y])
            set_back(y, [this, a, b, y] {
                const Tensor& g = grads_[y];
                acc_eltwise(a, g, &vals_[b]);
                acc_eltwise(b, g, &vals_[a]);
            });
        return y;
    }

    VarId scale(VarId a, double s) {
        Tensor out(vals_[a].shape);
        for (std::size_t i = 0; i < out.numel(); ++i) out[i] = s * vals_[a][i];
        VarId y = push(std::move(out), rg_[a], {});
        if (rg_[y])
            set_back(y, [this, a, y, s] {
                const Tensor& g = grads_[y];
                if (!rg_[a]) return;
                for (std::size_t i = 0; i < g.numel(); ++i) grads_[a][i] += s * g[i];
                touched_[a] = true;
            });
        return y;
    }

    VarId tanh_op(VarId a) {
        Tensor out(vals_[a].shape);
        for (std::size_t i = 0; i < out.numel(); ++i) out[i] = std::tanh(vals_[a][i]);
        VarId y = push(std::move(out), rg_[a], {});
        if (rg_[y])
            set_back(y, [this, a, y] {
                if (!rg_[a]) return;
                const Tensor& g = grads_[y];
                const Tensor& t = vals_[y];
                for (std::size_t i = 0; i < g.numel(); ++i)
                    grads_[a][i] += g[i] * (1.0 - t[i] * t[i]);
                touched_[a] = true;
            });
        return y;
    }

    VarId sigmoid_op(VarId a) {
        Tensor out(vals_[a].shape);
        for (std::size_t i = 0; i < out.numel(); ++i) out[i] = sigmoid(vals_[a][i]);
        VarId y = push(std::move(out), rg_[a], {});
        if (rg_[y])
            set_back(y, [this, a, y] {
                if (!rg_[a]) return;
                const Tensor& g = grads_[y];
                const Tensor& s = vals_[y];
                for (std::size_t i = 0; i < g.numel(); ++i)
                    grads_[a][i] += g[i] * s[i] * (1.0 - s[i]);
                touched_[a] = true;
            });
        return y;
    }

    VarId relu(VarId a) {
        Tensor out(vals_[a].shape);
        for (std::size_t i = 0; i < out.numel(); ++i) {
            const double v = vals_[a][i];
            out[i] = v > 0.0 ? v : 0.0;
            if (record_margins_) note_margin(std::abs(v));
        }
        VarId y = push(std::move(out), rg_[a], {});
        if (rg_[y])
            set_back(y, [this, a, y] {
                if (!rg_[a]) return;
                const Tensor& g = grads_[y];
                for (std::size_t i = 0; i < g.numel(); ++i)
                    if (vals_[a][i] > 0.0) grads_[a][i] += g[i];
                touched_[a] = true;
            });
        return y;
    }

    /// Elementwise minimum; ties route the gradient to the first argument.
    VarId emin(VarId a, VarId b) {
        check_same_shape(vals_[a], vals_[b], "Tape::emin");
        Tensor out(vals_[a].shape);
        for (std::size_t i = 0; i < out.numel(); ++i) {
            const double av = vals_[a][i], bv = vals_[b][i];
            out[i] = av <= bv ? av : bv;
            if (record_margins_) note_margin(std::abs(av - bv));
        }
        VarId y = push(std::move(out), rg_[a] || rg_[b], {});
        if (rg_[y])
            set_back(y, [this, a, b, y] {
                const Tensor& g = grads_[y];
                for (std::size_t i = 0; i < g.numel(); ++i) {
                    if (vals_[a][i] <= vals_[b][i]) {
                        if (rg_[a]) grads_[a][i] += g[i];
                    } else {
                        if (rg_[b]) grads_[b][i] += g[i];
                    }
                }
                if (rg_[a]) touched_[a] = true;
                if (rg_[b]) touched_[b] = true;
            });
        return y;
    }

    VarId reshape(VarId a, Shape s) {
        if (numel_of(s) != vals_[a].numel())
            throw std::invalid_argument("Tape::reshape: element count mismatch");
        Tensor out(std::move(s), vals_[a].data);
        VarId y = push(std::move(out), rg_[a], {});
        if (rg_[y])
            set_back(y, [this, a, y] {
                if (!rg_[a]) return;
                const Tensor& g = grads_[y];
                for (std::size_t i = 0; i < g.numel(); ++i) grads_[a][i] += g[i];
                touched_[a] = true;
            });
        return y;
    }

    // ---- dense layers ----

    /// Point affine map X[Bxin] -> X W^T + b, computed as the sign-split sum
    /// X max(W,0)^T + X min(W,0)^T + b so that a degenerate interval affine
    /// (equal bounds everywhere) reproduces it bit for bit.
    VarId affine(VarId W, VarId b, VarId X) {
        auto [out, in, B] = affine_dims(W, b, X);
        Tensor y({B, out});
        {
            eg::RM wp = eg::cmat(vals_[W], out, in).cwiseMax(0.0);
            eg::RM wn = eg::cmat(vals_[W], out, in).cwiseMin(0.0);
            auto Xm = eg::cmat(vals_[X], B, in);
            auto Y = eg::mat(y, B, out);
            Y.noalias() = Xm * wp.transpose();
            Y.noalias() += Xm * wn.transpose();
            Y.rowwise() += eg::CMapRow(vals_[b].data.data(), long(out));
        }
        VarId yid = push(std::move(y), rg_[W] || rg_[b] || rg_[X], {});
        if (rg_[yid])
            set_back(yid, [this, W, b, X, yid, out, in, B] {
                auto G = eg::cmat(grads_[yid], B, out);
                if (rg_[X]) {
                    eg::mat(grads_[X], B, in).noalias() += G * eg::cmat(vals_[W], out, in);
                    touched_[X] = true;
                }
                if (rg_[W]) {
                    eg::mat(grads_[W], out, in).noalias() +=
                        G.transpose() * eg::cmat(vals_[X], B, in);
                    touched_[W] = true;
                }
                if (rg_[b]) {
                    Eigen::Map<Eigen::RowVectorXd>(grads_[b].data.data(), long(out)) +=
                        G.colwise().sum();
                    touched_[b] = true;
                }
            });
        return yid;
    }

    /// Interval affine with interval weights, biases, and inputs.
    /// Takes the 4-GEMM sign-split path when all input lower bounds are
    /// nonnegative (exact there: per-term corner selection reduces to the
    /// sign of the weight bound); otherwise falls back to the per-term
    /// corner-selection path, which is exact everywhere. Margin recording
    /// forces the per-term path.
    IvVar iv_affine(IvVar W, IvVar b, IvVar X) {
        auto [out, in, B] = affine_dims(W.lo, b.lo, X.lo);
        check_same_shape(vals_[W.lo], vals_[W.hi], "Tape::iv_affine W");
        check_same_shape(vals_[b.lo], vals_[b.hi], "Tape::iv_affine b");
        check_same_shape(vals_[X.lo], vals_[X.hi], "Tape::iv_affine X");
        bool nonneg = true;
        for (std::size_t i = 0; i < vals_[X.lo].numel() && nonneg; ++i)
            if (vals_[X.lo][i] < 0.0) nonneg = false;
        if (nonneg && !record_margins_) return iv_affine_fast(W, b, X, out, in, B);
        return iv_affine_scalar(W, b, X, out, in, B);
    }

    /// Interval affine with point weights (task heads). Exact for any input
    /// signs: per term the extremum sits at xl or xu by the sign of w.
    IvVar pw_affine(VarId W, VarId b, IvVar X) {
        auto [out, in, B] = affine_dims(W, b, X.lo);
        check_same_shape(vals_[X.lo], vals_[X.hi], "Tape::pw_affine X");
        if (record_margins_)
            for (std::size_t i = 0; i < vals_[W].numel(); ++i)
                note_margin(std::abs(vals_[W][i]));
        Tensor ylo({B, out}), yhi({B, out});
        {
            eg::RM wp = eg::cmat(vals_[W], out, in).cwiseMax(0.0);
            eg::RM wn = eg::cmat(vals_[W], out, in).cwiseMin(0.0);
            auto Xl = eg::cmat(vals_[X.lo], B, in);
            auto Xu = eg::cmat(vals_[X.hi], B, in);
            auto Yl = eg::mat(ylo, B, out);
            auto Yh = eg::mat(yhi, B, out);
            Yl.noalias() = Xl * wp.transpose();
            Yl.noalias() += Xu * wn.transpose();
            Yh.noalias() = Xu * wp.transpose();
            Yh.noalias() += Xl * wn.transpose();
            eg::CMapRow bv(vals_[b].data.data(), long(out));
            Yl.rowwise() += bv;
            Yh.rowwise() += bv;
        }
        const bool rg = rg_[W] || rg_[b] || rg_[X.lo] || rg_[X.hi];
        VarId lo = push(std::move(ylo), rg, {});
        VarId hi = push(std::move(yhi), rg, {});
        if (rg)
            set_back(hi, [this, W, b, X, lo, hi, out, in, B] {
                const bool tl = touched_[lo], th = touched_[hi];
                if (!tl && !th) return;
                eg::RM wp = eg::cmat(vals_[W], out, in).cwiseMax(0.0);
                eg::RM wn = eg::cmat(vals_[W], out, in).cwiseMin(0.0);
                auto Gl = eg::cmat(grads_[lo], B, out);
                auto Gh = eg::cmat(grads_[hi], B, out);
                if (rg_[X.lo]) {
                    auto D = eg::mat(grads_[X.lo], B, in);
                    if (tl) D.noalias() += Gl * wp;
                    if (th) D.noalias() += Gh * wn;
                    touched_[X.lo] = true;
                }
                if (rg_[X.hi]) {
                    auto D = eg::mat(grads_[X.hi], B, in);
                    if (tl) D.noalias() += Gl * wn;
                    if (th) D.noalias() += Gh * wp;
                    touched_[X.hi] = true;
                }
                if (rg_[W]) {
                    eg::RM dl = eg::RM::Zero(long(out), long(in));
                    eg::RM dh = eg::RM::Zero(long(out), long(in));
                    auto Xl = eg::cmat(vals_[X.lo], B, in);
                    auto Xu = eg::cmat(vals_[X.hi], B, in);
                    if (tl) dl.noalias() = Gl.transpose() * Xl;
                    if (th) dl.noalias() += Gh.transpose() * Xu;
                    if (tl) dh.noalias() = Gl.transpose() * Xu;
                    if (th) dh.noalias() += Gh.transpose() * Xl;
                    auto Wm = eg::cmat(vals_[W], out, in);
                    auto DW = eg::mat(grads_[W], out, in);
                    DW.array() += (Wm.array() >= 0.0).select(dl, dh).array();
                    touched_[W] = true;
                }
                if (rg_[b]) {
                    Eigen::Map<Eigen::RowVectorXd> db(grads_[b].data.data(), long(out));
                    if (tl) db += Gl.colwise().sum();
                    if (th) db += Gh.colwise().sum();
                    touched_[b] = true;
                }
            });
        return {lo, hi};
    }

    // ---- convolution / pooling (direct loops; NCHW) ----

    VarId conv2d(VarId W, VarId b, VarId X, std::size_t stride, std::size_t padding) {
        ConvDims d = conv_dims(vals_[W].shape, vals_[X].shape, vals_[b].shape, stride, padding);
        Tensor y({d.N, d.O, d.Ho, d.Wo});
        conv_forward_point(vals_[W], vals_[b], vals_[X], d, y);
        VarId yid = push(std::move(y), rg_[W] || rg_[b] || rg_[X], {});
        if (rg_[yid])
            set_back(yid, [this, W, b, X, yid, d] {
                conv_backward_point(W, b, X, yid, d);
            });
        return yid;
    }

    IvVar iv_conv2d(IvVar W, IvVar b, IvVar X, std::size_t stride, std::size_t padding) {
        check_same_shape(vals_[W.lo], vals_[W.hi], "Tape::iv_conv2d W");
        check_same_shape(vals_[X.lo], vals_[X.hi], "Tape::iv_conv2d X");
        check_same_shape(vals_[b.lo], vals_[b.hi], "Tape::iv_conv2d b");
        ConvDims d = conv_dims(vals_[W.lo].shape, vals_[X.lo].shape, vals_[b.lo].shape, stride,
                               padding);
        Tensor ylo({d.N, d.O, d.Ho, d.Wo}), yhi({d.N, d.O, d.Ho, d.Wo});
        const bool rg = rg_[W.lo] || rg_[W.hi] || rg_[b.lo] || rg_[b.hi] || rg_[X.lo] || rg_[X.hi];
        auto sel_lo = std::make_shared<std::vector<std::uint8_t>>();
        auto sel_hi = std::make_shared<std::vector<std::uint8_t>>();
        iv_conv_forward(W, b, X, d, ylo, yhi, rg ? sel_lo.get() : nullptr,
                        rg ? sel_hi.get() : nullptr);
        VarId lo = push(std::move(ylo), rg, {});
        VarId hi = push(std::move(yhi), rg, {});
        if (rg)
            set_back(hi, [this, W, b, X, lo, hi, d, sel_lo, sel_hi] {
                iv_conv_backward(W, b, X, lo, hi, d, *sel_lo, *sel_hi);
            });
        return {lo, hi};
    }

    VarId maxpool2d(VarId X, std::size_t k, std::size_t stride) {
        PoolDims d = pool_dims(vals_[X].shape, k, stride);
        Tensor y({d.N, d.C, d.Ho, d.Wo});
        auto arg = std::make_shared<std::vector<std::uint32_t>>(y.numel());
        const Tensor& x = vals_[X];
        std::size_t p = 0;
        for (std::size_t n = 0; n < d.N; ++n)
            for (std::size_t c = 0; c < d.C; ++c)
                for (std::size_t oi = 0; oi < d.Ho; ++oi)
                    for (std::size_t oj = 0; oj < d.Wo; ++oj, ++p) {
                        double best = -std::numeric_limits<double>::infinity();
                        double second = best;
                        std::uint32_t bi = 0;
                        for (std::size_t ki = 0; ki < d.k; ++ki)
                            for (std::size_t kj = 0; kj < d.k; ++kj) {
                                const std::size_t xi =
                                    ((n * d.C + c) * d.H + oi * d.stride + ki) * d.W +
                                    oj * d.stride + kj;
                                const double v = x[xi];
                                if (v > best) {
                                    second = best;
                                    best = v;
                                    bi = std::uint32_t(xi);
                                } else if (v > second) {
                                    second = v;
                                }
                            }
                        y[p] = best;
                        (*arg)[p] = bi;
                        if (record_margins_ && std::isfinite(second))
                            note_margin(best - second);
                    }
        VarId yid = push(std::move(y), rg_[X], {});
        if (rg_[yid])
            set_back(yid, [this, X, yid, arg] {
                if (!rg_[X]) return;
                const Tensor& g = grads_[yid];
                for (std::size_t i = 0; i < g.numel(); ++i) grads_[X][(*arg)[i]] += g[i];
                touched_[X] = true;
            });
        return yid;
    }

    IvVar iv_maxpool2d(IvVar X, std::size_t k, std::size_t stride) {
        return {maxpool2d(X.lo, k, stride), maxpool2d(X.hi, k, stride)};
    }

    VarId avgpool2d(VarId X, std::size_t k, std::size_t stride) {
        PoolDims d = pool_dims(vals_[X].shape, k, stride);
        const double inv = 1.0 / double(k * k);
        Tensor y({d.N, d.C, d.Ho, d.Wo});
        const Tensor& x = vals_[X];
        std::size_t p = 0;
        for (std::size_t n = 0; n < d.N; ++n)
            for (std::size_t c = 0; c < d.C; ++c)
                for (std::size_t oi = 0; oi < d.Ho; ++oi)
                    for (std::size_t oj = 0; oj < d.Wo; ++oj, ++p) {
                        double acc = 0.0;
                        for (std::size_t ki = 0; ki < d.k; ++ki)
                            for (std::size_t kj = 0; kj < d.k; ++kj)
                                acc += x[((n * d.C + c) * d.H + oi * d.stride + ki) * d.W +
                                         oj * d.stride + kj];
                        y[p] = acc * inv;
                    }
        VarId yid = push(std::move(y), rg_[X], {});
        if (rg_[yid])
            set_back(yid, [this, X, yid, d, inv] {
                if (!rg_[X]) return;
                const Tensor& g = grads_[yid];
                std::size_t p = 0;
                for (std::size_t n = 0; n < d.N; ++n)
                    for (std::size_t c = 0; c < d.C; ++c)
                        for (std::size_t oi = 0; oi < d.Ho; ++oi)
                            for (std::size_t oj = 0; oj < d.Wo; ++oj, ++p)
                                for (std::size_t ki = 0; ki < d.k; ++ki)
                                    for (std::size_t kj = 0; kj < d.k; ++kj)
                                        grads_[X][((n * d.C + c) * d.H + oi * d.stride + ki) *
                                                      d.W +
                                                  oj * d.stride + kj] += g[p] * inv;
                touched_[X] = true;
            });
        return yid;
    }

    IvVar iv_avgpool2d(IvVar X, std::size_t k, std::size_t stride) {
        return {avgpool2d(X.lo, k, stride), avgpool2d(X.hi, k, stride)};
    }

    // ---- losses ----

    /// Worst-case logit assembly: for each row take the upper bound on every
    /// class except the label, and the lower bound on the label.
    VarId wc_select(IvVar logits, const std::vector<int>& labels) {
        const Tensor& lo = vals_[logits.lo];
        const Tensor& hi = vals_[logits.hi];
        check_same_shape(lo, hi, "Tape::wc_select");
        if (lo.shape.size() != 2) throw std::invalid_argument("Tape::wc_select: logits must be 2-D");
        const std::size_t B = lo.shape[0], C = lo.shape[1];
        if (labels.size() != B) throw std::invalid_argument("Tape::wc_select: label count mismatch");
        Tensor z({B, C});
        for (std::size_t bi = 0; bi < B; ++bi) {
            const int y = labels[bi];
            if (y < 0 || std::size_t(y) >= C)
                throw std::out_of_range("Tape::wc_select: label out of range");
            for (std::size_t c = 0; c < C; ++c)
                z.at(bi, c) = (std::size_t(y) == c) ? lo.at(bi, c) : hi.at(bi, c);
        }
        const bool rg = rg_[logits.lo] || rg_[logits.hi];
        VarId yid = push(std::move(z), rg, {});
        if (rg)
            set_back(yid, [this, logits, yid, labels, B, C] {
                const Tensor& g = grads_[yid];
                for (std::size_t bi = 0; bi < B; ++bi)
                    for (std::size_t c = 0; c < C; ++c) {
                        const VarId tgt = (std::size_t(labels[bi]) == c) ? logits.lo : logits.hi;
                        if (rg_[tgt]) {
                            grads_[tgt].at(bi, c) += g.at(bi, c);
                            touched_[tgt] = true;
                        }
                    }
            });
        return yid;
    }

    /// Mean cross-entropy over the batch via max-shifted log-sum-exp.
    VarId cross_entropy(VarId logits, const std::vector<int>& labels) {
        const Tensor& z = vals_[logits];
        if (z.shape.size() != 2)
            throw std::invalid_argument("Tape::cross_entropy: logits must be 2-D");
        const std::size_t B = z.shape[0], C = z.shape[1];
        if (labels.size() != B)
            throw std::invalid_argument("Tape::cross_entropy: label count mismatch");
        auto probs = std::make_shared<Tensor>(Shape{B, C});
        double total = 0.0;
        for (std::size_t bi = 0; bi < B; ++bi) {
            const int y = labels[bi];
            if (y < 0 || std::size_t(y) >= C)
                throw std::out_of_range("Tape::cross_entropy: label out of range");
            double m = z.at(bi, 0);
            for (std::size_t c = 1; c < C; ++c) m = std::max(m, z.at(bi, c));
            double s = 0.0;
            for (std::size_t c = 0; c < C; ++c) {
                const double e = std::exp(z.at(bi, c) - m);
                probs->at(bi, c) = e;
                s += e;
            }
            const double inv = 1.0 / s;
            for (std::size_t c = 0; c < C; ++c) probs->at(bi, c) *= inv;
            total += (m + std::log(s)) - z.at(bi, std::size_t(y));
        }
        Tensor out({1});
        out[0] = total / double(B);
        VarId yid = push(std::move(out), rg_[logits], {});
        if (rg_[yid])
            set_back(yid, [this, logits, yid, labels, probs, B, C] {
                if (!rg_[logits]) return;
                const double g = grads_[yid][0] / double(B);
                for (std::size_t bi = 0; bi < B; ++bi)
                    for (std::size_t c = 0; c < C; ++c) {
                        double d = probs->at(bi, c);
                        if (std::size_t(labels[bi]) == c) d -= 1.0;
                        grads_[logits].at(bi, c) += g * d;
                    }
                touched_[logits] = true;
            });
        return yid;
    }

    // ---- backward ----

    void backward(VarId root) {
        if (ran_backward_) throw std::logic_error("Tape::backward: already ran on this tape");
        if (vals_[root].numel() != 1)
            throw std::invalid_argument("Tape::backward: root must be scalar");
        if (!rg_[root])
            throw std::invalid_argument("Tape::backward: root does not depend on any parameter");
        ran_backward_ = true;
        grads_[root][0] = 1.0;
        touched_[root] = true;
        for (std::size_t i = root + 1; i-- > 0;)
            if (backs_[i]) backs_[i]();
    }

  private:
    struct ConvDims {
        std::size_t N, C, H, W, O, kh, kw, Ho, Wo, stride, padding;
    };
    struct PoolDims {
        std::size_t N, C, H, W, k, stride, Ho, Wo;
    };

    VarId push(Tensor v, bool rg, std::function<void()> back) {
        vals_.push_back(std::move(v));
        rg_.push_back(rg);
        grads_.emplace_back(rg ? Tensor(vals_.back().shape) : Tensor());
        touched_.push_back(false);
        backs_.push_back(std::move(back));
        return VarId(vals_.size() - 1);
    }

    void set_back(VarId id, std::function<void()> fn) { backs_[id] = std::move(fn); }

    void acc_eltwise(VarId dst, const Tensor& g, const Tensor* factor) {
        if (!rg_[dst]) return;
        if (factor)
            for (std::size_t i = 0; i < g.numel(); ++i) grads_[dst][i] += g[i] * (*factor)[i];
        else
            for (std::size_t i = 0; i < g.numel(); ++i) grads_[dst][i] += g[i];
        touched_[dst] = true;
    }

    void note_margin(double m) {
        if (m < margin_) margin_ = m;
    }

    std::tuple<std::size_t, std::size_t, std::size_t> affine_dims(VarId W, VarId b,
                                                                  VarId X) const {
        const Tensor& w = vals_[W];
        const Tensor& bv = vals_[b];
        const Tensor& x = vals_[X];
        if (w.shape.size() != 2 || x.shape.size() != 2 || bv.shape.size() != 1)
            throw std::invalid_argument("affine: W/X must be 2-D, b 1-D");
        const std::size_t out = w.shape[0], in = w.shape[1], B = x.shape[0];
        if (x.shape[1] != in || bv.shape[0] != out)
            throw std::invalid_argument("affine: shape mismatch, W " + shape_str(w.shape) +
                                        ", b " + shape_str(bv.shape) + ", X " +
                                        shape_str(x.shape));
        return {out, in, B};
    }

    IvVar iv_affine_fast(IvVar W, IvVar b, IvVar X, std::size_t out, std::size_t in,
                         std::size_t B) {
        Tensor ylo({B, out}), yhi({B, out});
        {
            eg::RM al = eg::cmat(vals_[W.lo], out, in).cwiseMax(0.0);
            eg::RM bl = eg::cmat(vals_[W.lo], out, in).cwiseMin(0.0);
            eg::RM au = eg::cmat(vals_[W.hi], out, in).cwiseMax(0.0);
            eg::RM bu = eg::cmat(vals_[W.hi], out, in).cwiseMin(0.0);
            auto Xl = eg::cmat(vals_[X.lo], B, in);
            auto Xu = eg::cmat(vals_[X.hi], B, in);
            auto Yl = eg::mat(ylo, B, out);
            auto Yh = eg::mat(yhi, B, out);
            Yl.noalias() = Xl * al.transpose();
            Yl.noalias() += Xu * bl.transpose();
            Yh.noalias() = Xu * au.transpose();
            Yh.noalias() += Xl * bu.transpose();
            Yl.rowwise() += eg::CMapRow(vals_[b.lo].data.data(), long(out));
            Yh.rowwise() += eg::CMapRow(vals_[b.hi].data.data(), long(out));
        }
        const bool rg = rg_[W.lo] || rg_[W.hi] || rg_[b.lo] || rg_[b.hi] || rg_[X.lo] || rg_[X.hi];
        VarId lo = push(std::move(ylo), rg, {});
        VarId hi = push(std::move(yhi), rg, {});
        if (rg)
            set_back(hi, [this, W, b, X, lo, hi, out, in, B] {
                const bool tl = touched_[lo], th = touched_[hi];
                if (!tl && !th) return;
                eg::RM al = eg::cmat(vals_[W.lo], out, in).cwiseMax(0.0);
                eg::RM blm = eg::cmat(vals_[W.lo], out, in).cwiseMin(0.0);
                eg::RM au = eg::cmat(vals_[W.hi], out, in).cwiseMax(0.0);
                eg::RM bum = eg::cmat(vals_[W.hi], out, in).cwiseMin(0.0);
                auto Gl = eg::cmat(grads_[lo], B, out);
                auto Gh = eg::cmat(grads_[hi], B, out);
                auto Xl = eg::cmat(vals_[X.lo], B, in);
                auto Xu = eg::cmat(vals_[X.hi], B, in);
                if (rg_[X.lo]) {
                    auto D = eg::mat(grads_[X.lo], B, in);
                    if (tl) D.noalias() += Gl * al;
                    if (th) D.noalias() += Gh * bum;
                    touched_[X.lo] = true;
                }
                if (rg_[X.hi]) {
                    auto D = eg::mat(grads_[X.hi], B, in);
                    if (tl) D.noalias() += Gl * blm;
                    if (th) D.noalias() += Gh * au;
                    touched_[X.hi] = true;
                }
                if (rg_[W.lo] && tl) {
                    eg::RM dxl = Gl.transpose() * Xl;
                    eg::RM dxu = Gl.transpose() * Xu;
                    auto Wm = eg::cmat(vals_[W.lo], out, in);
                    eg::mat(grads_[W.lo], out, in).array() +=
                        (Wm.array() >= 0.0).select(dxl, dxu).array();
                    touched_[W.lo] = true;
                }
                if (rg_[W.hi] && th) {
                    eg::RM dxu = Gh.transpose() * Xu;
                    eg::RM dxl = Gh.transpose() * Xl;
                    auto Wm = eg::cmat(vals_[W.hi], out, in);
                    eg::mat(grads_[W.hi], out, in).array() +=
                        (Wm.array() >= 0.0).select(dxu, dxl).array();
                    touched_[W.hi] = true;
                }
                if (rg_[b.lo] && tl) {
                    Eigen::Map<Eigen::RowVectorXd>(grads_[b.lo].data.data(), long(out)) +=
                        Gl.colwise().sum();
                    touched_[b.lo] = true;
                }
                if (rg_[b.hi] && th) {
                    Eigen::Map<Eigen::RowVectorXd>(grads_[b.hi].data.data(), long(out)) +=
                        Gh.colwise().sum();
                    touched_[b.hi] = true;
                }
            });
        return {lo, hi};
    }

    // Corner codes: 0 = wl*xl, 1 = wl*xu, 2 = wu*xl, 3 = wu*xu; selection
    // scans that order and keeps the first extremum, so ties resolve to the
    // earliest corner. Structurally degenerate operands (the same variable
    // on both bounds) collapse the candidate set instead of producing a
    // permanent fake tie.
    IvVar iv_affine_scalar(IvVar W, IvVar b, IvVar X, std::size_t out, std::size_t in,
                           std::size_t B) {
        const bool rg = rg_[W.lo] || rg_[W.hi] || rg_[b.lo] || rg_[b.hi] || rg_[X.lo] || rg_[X.hi];
        const bool wdeg = W.point(), xdeg = X.point();
        Tensor ylo({B, out}), yhi({B, out});
        auto sel_lo = std::make_shared<std::vector<std::uint8_t>>();
        auto sel_hi = std::make_shared<std::vector<std::uint8_t>>();
        if (rg) {
            sel_lo->resize(B * out * in);
            sel_hi->resize(B * out * in);
        }
        const Tensor &wl = vals_[W.lo], &wu = vals_[W.hi], &xl = vals_[X.lo], &xu = vals_[X.hi];
        for (std::size_t bi = 0; bi < B; ++bi)
            for (std::size_t o = 0; o < out; ++o) {
                double acc_lo = 0.0, acc_hi = 0.0;
                const std::size_t base = (bi * out + o) * in;
                for (std::size_t k = 0; k < in; ++k) {
                    double c[4];
                    c[0] = wl.at(o, k) * xl.at(bi, k);
                    c[1] = wl.at(o, k) * xu.at(bi, k);
                    c[2] = wu.at(o, k) * xl.at(bi, k);
                    c[3] = wu.at(o, k) * xu.at(bi, k);
                    int nc = 4;
                    int cand[4] = {0, 1, 2, 3};
                    if (wdeg && xdeg) {
                        nc = 1;
                    } else if (wdeg) {
                        nc = 2;
                        cand[1] = 1;
                    } else if (xdeg) {
                        nc = 2;
                        cand[1] = 2;
                    }
                    int slo = cand[0], shi = cand[0];
                    for (int t = 1; t < nc; ++t) {
                        if (c[cand[t]] < c[slo]) slo = cand[t];
                        if (c[cand[t]] > c[shi]) shi = cand[t];
                    }
                    if (record_margins_ && nc > 1) {
                        // Exact corner ties are structural (zero products under
                        // a clamped activation, or value-equal bounds) and do
                        // not move under perturbation; the distance to a
                        // selection flip is the smallest strictly positive gap.
                        double gap_lo = std::numeric_limits<double>::infinity();
                        double gap_hi = gap_lo;
                        for (int t = 0; t < nc; ++t) {
                            const double dl = c[cand[t]] - c[slo];
                            const double dh = c[shi] - c[cand[t]];
                            if (cand[t] != slo && dl > 0.0) gap_lo = std::min(gap_lo, dl);
                            if (cand[t] != shi && dh > 0.0) gap_hi = std::min(gap_hi, dh);
                        }
                        note_margin(gap_lo);
                        note_margin(gap_hi);
                    }
                    acc_lo += c[slo];
                    acc_hi += c[shi];
                    if (rg) {
                        (*sel_lo)[base + k] = std::uint8_t(slo);
                        (*sel_hi)[base + k] = std::uint8_t(shi);
                    }
                }
                ylo.at(bi, o) = acc_lo + vals_[b.lo][o];
                yhi.at(bi, o) = acc_hi + vals_[b.hi][o];
            }
        VarId lo = push(std::move(ylo), rg, {});
        VarId hi = push(std::move(yhi), rg, {});
        if (rg)
            set_back(hi, [this, W, b, X, lo, hi, out, in, B, sel_lo, sel_hi] {
                const bool tl = touched_[lo], th = touched_[hi];
                if (!tl && !th) return;
                const Tensor &wl = vals_[W.lo], &wu = vals_[W.hi];
                const Tensor &xl = vals_[X.lo], &xu = vals_[X.hi];
                auto route = [&](VarId wv, VarId xv, double wval, double xval, double g,
                                 std::size_t o, std::size_t k, std::size_t bi) {
                    if (rg_[wv]) {
                        grads_[wv].at(o, k) += g * xval;
                        touched_[wv] = true;
                    }
                    if (rg_[xv]) {
                        grads_[xv].at(bi, k) += g * wval;
                        touched_[xv] = true;
                    }
                };
                for (std::size_t bi = 0; bi < B; ++bi)
                    for (std::size_t o = 0; o < out; ++o) {
                        const std::size_t base = (bi * out + o) * in;
                        const double glo = tl ? grads_[lo].at(bi, o) : 0.0;
                        const double ghi = th ? grads_[hi].at(bi, o) : 0.0;
                        for (std::size_t k = 0; k < in; ++k) {
                            if (glo != 0.0) {
                                const std::uint8_t s = (*sel_lo)[base + k];
                                const VarId wv = (s < 2) ? W.lo : W.hi;
                                const VarId xv = (s % 2 == 0) ? X.lo : X.hi;
                                const double wval = (s < 2) ? wl.at(o, k) : wu.at(o, k);
                                const double xval = (s % 2 == 0) ? xl.at(bi, k) : xu.at(bi, k);
                                route(wv, xv, wval, xval, glo, o, k, bi);
                            }
                            if (ghi != 0.0) {
                                const std::uint8_t s = (*sel_hi)[base + k];
                                const VarId wv = (s < 2) ? W.lo : W.hi;
                                const VarId xv = (s % 2 == 0) ? X.lo : X.hi;
                                const double wval = (s < 2) ? wl.at(o, k) : wu.at(o, k);
                                const double xval = (s % 2 == 0) ? xl.at(bi, k) : xu.at(bi, k);
                                route(wv, xv, wval, xval, ghi, o, k, bi);
                            }
                        }
                        if (tl && rg_[b.lo]) {
                            grads_[b.lo][o] += grads_[lo].at(bi, o);
                            touched_[b.lo] = true;
                        }
                        if (th && rg_[b.hi]) {
                            grads_[b.hi][o] += grads_[hi].at(bi, o);
                            touched_[b.hi] = true;
                        }
                    }
            });
        return {lo, hi};
    }

    static ConvDims conv_dims(const Shape& w, const Shape& x, const Shape& b, std::size_t stride,
                              std::size_t padding) {
        if (w.size() != 4 || x.size() != 4)
            throw std::invalid_argument("conv2d: W and X must be 4-D (NCHW)");
        if (stride == 0) throw std::invalid_argument("conv2d: stride must be positive");
        ConvDims d;
        d.O = w[0];
        d.C = w[1];
        d.kh = w[2];
        d.kw = w[3];
        d.N = x[0];
        d.H = x[2];
        d.W = x[3];
        d.stride = stride;
        d.padding = padding;
        if (x[1] != d.C) throw std::invalid_argument("conv2d: channel mismatch");
        if (b != Shape{d.O}) throw std::invalid_argument("conv2d: bias shape mismatch");
        if (d.H + 2 * padding < d.kh || d.W + 2 * padding < d.kw)
            throw std::invalid_argument("conv2d: kernel larger than padded input");
        d.Ho = (d.H + 2 * padding - d.kh) / stride + 1;
        d.Wo = (d.W + 2 * padding - d.kw) / stride + 1;
        return d;
    }

    static PoolDims pool_dims(const Shape& x, std::size_t k, std::size_t stride) {
        if (x.size() != 4) throw std::invalid_argument("pool2d: X must be 4-D (NCHW)");
        if (k == 0 || stride == 0) throw std::invalid_argument("pool2d: k and stride positive");
        if (x[2] < k || x[3] < k) throw std::invalid_argument("pool2d: window exceeds input");
        return PoolDims{x[0], x[1], x[2], x[3], k, stride,
                        (x[2] - k) / stride + 1, (x[3] - k) / stride + 1};
    }

    static void conv_forward_point(const Tensor& w, const Tensor& b, const Tensor& x,
                                   const ConvDims& d, Tensor& y) {
        std::size_t p = 0;
        for (std::size_t n = 0; n < d.N; ++n)
            for (std::size_t o = 0; o < d.O; ++o)
                for (std::size_t oi = 0; oi < d.Ho; ++oi)
                    for (std::size_t oj = 0; oj < d.Wo; ++oj, ++p) {
                        double acc = 0.0;
                        for (std::size_t c = 0; c < d.C; ++c)
                            for (std::size_t ki = 0; ki < d.kh; ++ki)
                                for (std::size_t kj = 0; kj < d.kw; ++kj) {
                                    const long ii = long(oi * d.stride + ki) - long(d.padding);
                                    const long jj = long(oj * d.stride + kj) - long(d.padding);
                                    if (ii < 0 || jj < 0 || ii >= long(d.H) || jj >= long(d.W))
                                        continue;
                                    acc += w[((o * d.C + c) * d.kh + ki) * d.kw + kj] *
                                           x[((n * d.C + c) * d.H + std::size_t(ii)) * d.W +
                                             std::size_t(jj)];
                                }
                        y[p] = acc + b[o];
                    }
    }

    void conv_backward_point(VarId W, VarId b, VarId X, VarId yid, const ConvDims& d) {
        const Tensor& g = grads_[yid];
        const Tensor& w = vals_[W];
        const Tensor& x = vals_[X];
        std::size_t p = 0;
        for (std::size_t n = 0; n < d.N; ++n)
            for (std::size_t o = 0; o < d.O; ++o)
                for (std::size_t oi = 0; oi < d.Ho; ++oi)
                    for (std::size_t oj = 0; oj < d.Wo; ++oj, ++p) {
                        const double gv = g[p];
                        if (gv == 0.0) continue;
                        if (rg_[b]) grads_[b][o] += gv;
                        for (std::size_t c = 0; c < d.C; ++c)
                            for (std::size_t ki = 0; ki < d.kh; ++ki)
                                for (std::size_t kj = 0; kj < d.kw; ++kj) {
                                    const long ii = long(oi * d.stride + ki) - long(d.padding);
                                    const long jj = long(oj * d.stride + kj) - long(d.padding);
                                    if (ii < 0 || jj < 0 || ii >= long(d.H) || jj >= long(d.W))
                                        continue;
                                    const std::size_t wi = ((o * d.C + c) * d.kh + ki) * d.kw + kj;
                                    const std::size_t xi =
                                        ((n * d.C + c) * d.H + std::size_t(ii)) * d.W +
                                        std::size_t(jj);
                                    if (rg_[W]) grads_[W][wi] += gv * x[xi];
                                    if (rg_[X]) grads_[X][xi] += gv * w[wi];
                                }
                    }
        if (rg_[b]) touched_[b] = true;
        if (rg_[W]) touched_[W] = true;
        if (rg_[X]) touched_[X] = true;
    }

    void iv_conv_forward(IvVar W, IvVar b, IvVar X, const ConvDims& d, Tensor& ylo, Tensor& yhi,
                         std::vector<std::uint8_t>* sel_lo, std::vector<std::uint8_t>* sel_hi) {
        const bool wdeg = W.point(), xdeg = X.point();
        const Tensor &wl = vals_[W.lo], &wu = vals_[W.hi], &xl = vals_[X.lo], &xu = vals_[X.hi];
        const std::size_t field = d.C * d.kh * d.kw;
        if (sel_lo) {
            sel_lo->resize(ylo.numel() * field);
            sel_hi->resize(ylo.numel() * field);
        }
        std::size_t p = 0;
        for (std::size_t n = 0; n < d.N; ++n)
            for (std::size_t o = 0; o < d.O; ++o)
                for (std::size_t oi = 0; oi < d.Ho; ++oi)
                    for (std::size_t oj = 0; oj < d.Wo; ++oj, ++p) {
                        double acc_lo = 0.0, acc_hi = 0.0;
                        std::size_t f = 0;
                        for (std::size_t c = 0; c < d.C; ++c)
                            for (std::size_t ki = 0; ki < d.kh; ++ki)
                                for (std::size_t kj = 0; kj < d.kw; ++kj, ++f) {
                                    const long ii = long(oi * d.stride + ki) - long(d.padding);
                                    const long jj = long(oj * d.stride + kj) - long(d.padding);
                                    if (ii < 0 || jj < 0 || ii >= long(d.H) || jj >= long(d.W))
                                        continue;
                                    const std::size_t wi = ((o * d.C + c) * d.kh + ki) * d.kw + kj;
                                    const std::size_t xi =
                                        ((n * d.C + c) * d.H + std::size_t(ii)) * d.W +
                                        std::size_t(jj);
                                    double cv[4];
                                    cv[0] = wl[wi] * xl[xi];
                                    cv[1] = wl[wi] * xu[xi];
                                    cv[2] = wu[wi] * xl[xi];
                                    cv[3] = wu[wi] * xu[xi];
                                    int nc = 4;
                                    int cand[4] = {0, 1, 2, 3};
                                    if (wdeg && xdeg) {
                                        nc = 1;
                                    } else if (wdeg) {
                                        nc = 2;
                                        cand[1] = 1;
                                    } else if (xdeg) {
                                        nc = 2;
                                        cand[1] = 2;
                                    }
                                    int slo = cand[0], shi = cand[0];
                                    for (int t = 1; t < nc; ++t) {
                                        if (cv[cand[t]] < cv[slo]) slo = cand[t];
                                        if (cv[cand[t]] > cv[shi]) shi = cand[t];
                                    }
                                    if (record_margins_ && nc > 1) {
                                        for (int t = 0; t < nc; ++t) {
                                            if (cand[t] != slo)
                                                note_margin(cv[cand[t]] - cv[slo]);
                                            if (cand[t] != shi)
                                                note_margin(cv[shi] - cv[cand[t]]);
                                        }
                                    }
                                    acc_lo += cv[slo];
                                    acc_hi += cv[shi];
                                    if (sel_lo) {
                                        (*sel_lo)[p * field + f] = std::uint8_t(slo);
                                        (*sel_hi)[p * field + f] = std::uint8_t(shi);
                                    }
                                }
                        ylo[p] = acc_lo + vals_[b.lo][o];
                        yhi[p] = acc_hi + vals_[b.hi][o];
                    }
    }

    void iv_conv_backward(IvVar W, IvVar b, IvVar X, VarId lo, VarId hi, const ConvDims& d,
                          const std::vector<std::uint8_t>& sel_lo,
                          const std::vector<std::uint8_t>& sel_hi) {
        const bool tl = touched_[lo], th = touched_[hi];
        if (!tl && !th) return;
        const Tensor &wl = vals_[W.lo], &wu = vals_[W.hi], &xl = vals_[X.lo], &xu = vals_[X.hi];
        const std::size_t field = d.C * d.kh * d.kw;
        auto route = [&](std::uint8_t s, std::size_t wi, std::size_t xi, double g) {
            const VarId wv = (s < 2) ? W.lo : W.hi;
            const VarId xv = (s % 2 == 0) ? X.lo : X.hi;
            const double wval = (s < 2) ? wl[wi] : wu[wi];
            const double xval = (s % 2 == 0) ? xl[xi] : xu[xi];
            if (rg_[wv]) {
                grads_[wv][wi] += g * xval;
                touched_[wv] = true;
            }
            if (rg_[xv]) {
                grads_[xv][xi] += g * wval;
                touched_[xv] = true;
            }
        };
        std::size_t p = 0;
        for (std::size_t n = 0; n < d.N; ++n)
            for (std::size_t o = 0; o < d.O; ++o)
                for (std::size_t oi = 0; oi < d.Ho; ++oi)
                    for (std::size_t oj = 0; oj < d.Wo; ++oj, ++p) {
                        const double glo = tl ? grads_[lo][p] : 0.0;
                        const double ghi = th ? grads_[hi][p] : 0.0;
                        if (glo != 0.0 && rg_[b.lo]) {
                            grads_[b.lo][o] += glo;
                            touched_[b.lo] = true;
                        }
                        if (ghi != 0.0 && rg_[b.hi]) {
                            grads_[b.hi][o] += ghi;
                            touched_[b.hi] = true;
                        }
                        if (glo == 0.0 && ghi == 0.0) continue;
                        std::size_t f = 0;
                        for (std::size_t c = 0; c < d.C; ++c)
                            for (std::size_t ki = 0; ki < d.kh; ++ki)
                                for (std::size_t kj = 0; kj < d.kw; ++kj, ++f) {
                                    const long ii = long(oi * d.stride + ki) - long(d.padding);
                                    const long jj = long(oj * d.stride + kj) - long(d.padding);
                                    if (ii < 0 || jj < 0 || ii >= long(d.H) || jj >= long(d.W))
                                        continue;
                                    const std::size_t wi = ((o * d.C + c) * d.kh + ki) * d.kw + kj;
                                    const std::size_t xi =
                                        ((n * d.C + c) * d.H + std::size_t(ii)) * d.W +
                                        std::size_t(jj);
                                    if (glo != 0.0) route(sel_lo[p * field + f], wi, xi, glo);
                                    if (ghi != 0.0) route(sel_hi[p * field + f], wi, xi, ghi);
                                }
                    }
    }

    bool record_margins_;
    bool ran_backward_{false};
    double margin_{std::numeric_limits<double>::infinity()};
    std::vector<Tensor> vals_;
    std::vector<Tensor> grads_;
    std::vector<bool> rg_;
    std::vector<char> touched_;
    std::vector<std::function<void()>> backs_;
};

/// Max over parameters of |analytic - central difference| / max(1, |a|, |n|).
/// f must rebuild its computation from scratch at the given parameter values.
inline double gradcheck(const std::function<double(const std::vector<Tensor>&)>& f,
                        std::vector<Tensor> at, const std::vector<Tensor>& analytic,
                        double step = 1e-5) {
    if (at.size() != analytic.size())
        throw std::invalid_argument("gradcheck: parameter/gradient count mismatch");
    double worst = 0.0;
    for (std::size_t p = 0; p < at.size(); ++p) {
        check_same_shape(at[p], analytic[p], "gradcheck");
        for (std::size_t i = 0; i < at[p].numel(); ++i) {
            const double keep = at[p][i];
            at[p][i] = keep + step;
            const double fp = f(at);
            at[p][i] = keep - step;
            const double fm = f(at);
            at[p][i] = keep;
            const double num = (fp - fm) / (2.0 * step);
            const double ana = analytic[p][i];
            const double err =
                std::abs(ana - num) / std::max({1.0, std::abs(ana), std::abs(num)});
            worst = std::max(worst, err);
        }
    }
    return worst;
}

}  // namespace ivnet
