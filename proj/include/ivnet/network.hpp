#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "ivnet/box.hpp"
#include "ivnet/reparam.hpp"
#include "ivnet/tape.hpp"
#include "ivnet/tensor.hpp"

namespace ivnet {

enum class Scenario { IncrementalTask, IncrementalDomain, IncrementalClass };
enum class Activation { ReLU, Tanh, Sigmoid };

inline std::string to_string(Scenario s) {
    switch (s) {
        case Scenario::IncrementalTask: return "incremental_task";
        case Scenario::IncrementalDomain: return "incremental_domain";
        case Scenario::IncrementalClass: return "incremental_class";
    }
    return "?";
}

inline std::string to_string(Activation a) {
    switch (a) {
        case Activation::ReLU: return "relu";
        case Activation::Tanh: return "tanh";
        case Activation::Sigmoid: return "sigmoid";
    }
    return "?";
}

inline Scenario scenario_from_string(const std::string& s) {
    if (s == "incremental_task") return Scenario::IncrementalTask;
    if (s == "incremental_domain") return Scenario::IncrementalDomain;
    if (s == "incremental_class") return Scenario::IncrementalClass;
    throw std::invalid_argument("unknown scenario: " + s);
}

inline Activation activation_from_string(const std::string& s) {
    if (s == "relu") return Activation::ReLU;
    if (s == "tanh") return Activation::Tanh;
    if (s == "sigmoid") return Activation::Sigmoid;
    throw std::invalid_argument("unknown activation: " + s);
}

struct LayerSpec {
    enum class Kind { Dense, Conv2d, MaxPool2d, AvgPool2d, Flatten, BatchNorm };
    Kind kind{Kind::Dense};
    std::size_t out{0};
    std::size_t k{0};
    std::size_t stride{1};
    std::size_t pad{0};

    static LayerSpec dense(std::size_t units) { return {Kind::Dense, units, 0, 1, 0}; }
    static LayerSpec conv(std::size_t ch, std::size_t k, std::size_t stride = 1,
                          std::size_t pad = 0) {
        return {Kind::Conv2d, ch, k, stride, pad};
    }
    static LayerSpec maxpool(std::size_t k, std::size_t stride) {
        return {Kind::MaxPool2d, 0, k, stride, 0};
    }
    static LayerSpec avgpool(std::size_t k, std::size_t stride) {
        return {Kind::AvgPool2d, 0, k, stride, 0};
    }
    static LayerSpec flatten() { return {Kind::Flatten, 0, 0, 1, 0}; }
};

/// Architecture + scenario description. The body lists the shared layers;
/// the output layer is implied by the scenario: per-task plain heads in
/// incremental-task mode, one intervalized output layer otherwise.
struct ArchitectureDescriptor {
    std::size_t input_dim{0};
    std::size_t in_ch{0}, in_h{0}, in_w{0};
    std::vector<LayerSpec> body;
    Activation activation{Activation::ReLU};
    Scenario scenario{Scenario::IncrementalTask};
    std::size_t n_tasks{1};
    std::size_t classes_per_task{2};
    std::size_t n_classes{2};

    bool spatial_input() const { return in_h > 0; }

    std::size_t head_out() const {
        return scenario == Scenario::IncrementalClass ? n_classes : classes_per_task;
    }
    std::size_t head_count() const {
        return scenario == Scenario::IncrementalTask ? n_tasks : 1;
    }
    bool head_intervalized() const { return scenario != Scenario::IncrementalTask; }

    static ArchitectureDescriptor mlp(std::size_t input_dim, std::vector<std::size_t> hidden,
                                      Scenario sc, std::size_t n_tasks,
                                      std::size_t classes_per_task, std::size_t n_classes,
                                      Activation act = Activation::ReLU) {
        ArchitectureDescriptor d;
        d.input_dim = input_dim;
        for (auto h : hidden) d.body.push_back(LayerSpec::dense(h));
        d.activation = act;
        d.scenario = sc;
        d.n_tasks = n_tasks;
        d.classes_per_task = classes_per_task;
        d.n_classes = n_classes;
        return d;
    }

    void validate() const;
};

/// Resolved per-layer input geometry, computed once per descriptor.
struct NetPlan {
    struct Body {
        LayerSpec spec;
        std::size_t in_feat{0};
        std::size_t Cin{0}, Hin{0}, Win{0};
        bool intervalized() const {
            return spec.kind == LayerSpec::Kind::Dense || spec.kind == LayerSpec::Kind::Conv2d;
        }
    };
    std::vector<Body> body;
    std::size_t body_out{0};
    std::vector<std::pair<Shape, Shape>> param_shapes;
};

inline NetPlan plan_of(const ArchitectureDescriptor& d) {
    NetPlan p;
    bool spatial = d.spatial_input();
    std::size_t feat = d.input_dim;
    std::size_t C = d.in_ch, H = d.in_h, W = d.in_w;
    if (spatial) {
        if (C == 0 || W == 0) throw std::invalid_argument("descriptor: bad spatial input dims");
        if (d.input_dim != 0 && d.input_dim != C * H * W)
            throw std::invalid_argument("descriptor: input_dim disagrees with spatial dims");
        feat = C * H * W;
    }
    if (feat == 0) throw std::invalid_argument("descriptor: input dimension is zero");
    for (const auto& spec : d.body) {
        NetPlan::Body bl;
        bl.spec = spec;
        switch (spec.kind) {
            case LayerSpec::Kind::BatchNorm:
                throw std::invalid_argument(
                    "descriptor: batch normalization is not representable with interval "
                    "parameters and is rejected");
            case LayerSpec::Kind::Dense:
                if (spatial)
                    throw std::invalid_argument("descriptor: dense layer on spatial input "
                                                "(insert flatten)");
                if (spec.out == 0) throw std::invalid_argument("descriptor: dense width zero");
                bl.in_feat = feat;
                p.param_shapes.push_back({Shape{spec.out, feat}, Shape{spec.out}});
                feat = spec.out;
                break;
            case LayerSpec::Kind::Conv2d: {
                if (!spatial) throw std::invalid_argument("descriptor: conv on flat input");
                if (spec.out == 0 || spec.k == 0 || spec.stride == 0)
                    throw std::invalid_argument("descriptor: bad conv parameters");
                if (H + 2 * spec.pad < spec.k || W + 2 * spec.pad < spec.k)
                    throw std::invalid_argument("descriptor: conv kernel exceeds input");
                bl.Cin = C;
                bl.Hin = H;
                bl.Win = W;
                p.param_shapes.push_back({Shape{spec.out, C, spec.k, spec.k}, Shape{spec.out}});
                H = (H + 2 * spec.pad - spec.k) / spec.stride + 1;
                W = (W + 2 * spec.pad - spec.k) / spec.stride + 1;
                C = spec.out;
                break;
            }
            case LayerSpec::Kind::MaxPool2d:
            case LayerSpec::Kind::AvgPool2d:
                if (!spatial) throw std::invalid_argument("descriptor: pool on flat input");
                if (spec.k == 0 || spec.stride == 0 || H < spec.k || W < spec.k)
                    throw std::invalid_argument("descriptor: bad pool parameters");
                bl.Cin = C;
                bl.Hin = H;
                bl.Win = W;
                H = (H - spec.k) / spec.stride + 1;
                W = (W - spec.k) / spec.stride + 1;
                break;
            case LayerSpec::Kind::Flatten:
                if (!spatial) throw std::invalid_argument("descriptor: flatten on flat input");
                bl.Cin = C;
                bl.Hin = H;
                bl.Win = W;
                spatial = false;
                feat = C * H * W;
                break;
        }
        p.body.push_back(bl);
    }
    if (spatial) throw std::invalid_argument("descriptor: output head needs a flat input "
                                             "(insert flatten)");
    p.body_out = feat;
    if (d.head_out() == 0 || d.n_tasks == 0)
        throw std::invalid_argument("descriptor: empty head");
    if (d.head_intervalized())
        p.param_shapes.push_back({Shape{d.head_out(), feat}, Shape{d.head_out()}});
    return p;
}

inline void ArchitectureDescriptor::validate() const { (void)plan_of(*this); }

struct HeadParams {
    Tensor W;
    Tensor b;
};

/// A network under training: the architecture, the reparameterized
/// intervalized parameters, and (incremental-task mode) the per-task plain
/// heads, which carry no mu or nu.
struct Network {
    ArchitectureDescriptor desc;
    NetPlan plan;
    ReparamState state;
    std::vector<HeadParams> heads;
};

/// Deterministic sub-seed for (run seed, stream index), splitmix64 mixing.
inline std::uint64_t subseed(std::uint64_t seed, std::uint64_t idx) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (idx + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline Network make_network(const ArchitectureDescriptor& desc, double initial_radius,
                            double nu_reset, std::uint64_t seed) {
    if (!(initial_radius > 0.0))
        throw std::invalid_argument("make_network: initial_radius must be positive");
    Network net;
    net.desc = desc;
    net.plan = plan_of(desc);
    std::mt19937_64 rng(subseed(seed, 0));
    ParamBox frozen;
    for (const auto& [wshape, bshape] : net.plan.param_shapes) {
        LayerBox lb;
        lb.W = Tensor(wshape);
        lb.b = Tensor(bshape);
        const std::size_t fan_in = wshape.size() == 2
                                       ? wshape[1]
                                       : wshape[1] * wshape[2] * wshape[3];
        const double bound = 1.0 / std::sqrt(double(fan_in));
        fill_uniform(lb.W, bound, rng);
        fill_uniform(lb.b, bound, rng);
        lb.eps_w = Tensor::full(wshape, initial_radius);
        lb.eps_b = Tensor::full(bshape, initial_radius);
        frozen.layers.push_back(std::move(lb));
    }
    net.state = initial_state(std::move(frozen), nu_reset);
    for (std::size_t t = 0; t < desc.head_count() && !desc.head_intervalized(); ++t) {
        HeadParams h;
        h.W = Tensor({desc.head_out(), net.plan.body_out});
        h.b = Tensor({desc.head_out()});
        const double bound = 1.0 / std::sqrt(double(net.plan.body_out));
        fill_uniform(h.W, bound, rng);
        fill_uniform(h.b, bound, rng);
        net.heads.push_back(std::move(h));
    }
    return net;
}

/// Tape variables for the intervalized parameters, either reparameterized
/// from (mu, nu) over the frozen box or taken directly from a realized box.
struct ParamVars {
    std::vector<VarId> mu_w, mu_b, nu_w, nu_b;
    std::vector<VarId> W, b;
    std::vector<IvVar> Wiv, biv;
    bool has_box{false};
};

inline ParamVars tape_params_from_state(Tape& t, const ReparamState& s, bool grad_mu,
                                        bool grad_nu, bool build_box) {
    s.check_shapes();
    ParamVars pv;
    pv.has_box = build_box;
    auto group = [&](const Tensor& mu, const Tensor& nu, const Tensor& Ws, const Tensor& es,
                     std::vector<VarId>& mu_out, std::vector<VarId>& nu_out,
                     std::vector<VarId>& W_out, std::vector<IvVar>& iv_out) {
        VarId m = t.leaf(mu, grad_mu);
        VarId ws = t.leaf(Ws);
        VarId e = t.leaf(es);
        VarId W = t.add(ws, t.mul(t.tanh_op(m), e));
        mu_out.push_back(m);
        W_out.push_back(W);
        if (build_box) {
            VarId n = t.leaf(nu, grad_nu);
            Tensor ubv(Ws.shape), lbv(Ws.shape);
            for (std::size_t i = 0; i < Ws.numel(); ++i) {
                ubv[i] = Ws[i] + es[i];
                lbv[i] = Ws[i] - es[i];
            }
            VarId ub = t.leaf(std::move(ubv));
            VarId lb = t.leaf(std::move(lbv));
            VarId slack = t.emin(t.sub(ub, W), t.sub(W, lb));
            VarId eps = t.mul(t.sigmoid_op(n), slack);
            nu_out.push_back(n);
            iv_out.push_back({t.sub(W, eps), t.add(W, eps)});
        }
    };
    for (std::size_t l = 0; l < s.layers.size(); ++l) {
        group(s.layers[l].mu_w, s.layers[l].nu_w, s.frozen.layers[l].W, s.frozen.layers[l].eps_w,
              pv.mu_w, pv.nu_w, pv.W, pv.Wiv);
        group(s.layers[l].mu_b, s.layers[l].nu_b, s.frozen.layers[l].b, s.frozen.layers[l].eps_b,
              pv.mu_b, pv.nu_b, pv.b, pv.biv);
    }
    return pv;
}

inline ParamVars tape_params_from_box(Tape& t, const ParamBox& box, bool grad_centers = false) {
    ParamVars pv;
    pv.has_box = true;
    for (const auto& l : box.layers) {
        auto group = [&](const Tensor& W, const Tensor& e, std::vector<VarId>& W_out,
                         std::vector<IvVar>& iv_out) {
            Tensor lo(W.shape), hi(W.shape);
            for (std::size_t i = 0; i < W.numel(); ++i) {
                lo[i] = W[i] - e[i];
                hi[i] = W[i] + e[i];
            }
            W_out.push_back(t.leaf(W, grad_centers));
            iv_out.push_back({t.leaf(std::move(lo)), t.leaf(std::move(hi))});
        };
        group(l.W, l.eps_w, pv.W, pv.Wiv);
        group(l.b, l.eps_b, pv.b, pv.biv);
    }
    return pv;
}

namespace detail {

inline VarId apply_act(Tape& t, Activation a, VarId x) {
    switch (a) {
        case Activation::ReLU: return t.relu(x);
        case Activation::Tanh: return t.tanh_op(x);
        case Activation::Sigmoid: return t.sigmoid_op(x);
    }
    throw std::logic_error("apply_act");
}

inline IvVar apply_act(Tape& t, Activation a, IvVar x) {
    if (x.point()) {
        VarId y = apply_act(t, a, x.lo);
        return {y, y};
    }
    return {apply_act(t, a, x.lo), apply_act(t, a, x.hi)};
}

}  // namespace detail

struct HeadVars {
    VarId W{0};
    VarId b{0};
    bool present{false};
};

/// Builds the plain forward chain to logits at the box centers.
/// X is [B x input]; task selects the head in incremental-task mode.
inline VarId tape_center_logits(Tape& t, const Network& net, const ParamVars& pv, VarId X,
                                std::size_t task, bool grad_head = false,
                                HeadVars* head_vars = nullptr) {
    const auto& plan = net.plan;
    VarId cur = X;
    if (net.desc.spatial_input())
        cur = t.reshape(cur, {t.val(X).shape[0], net.desc.in_ch, net.desc.in_h, net.desc.in_w});
    std::size_t pi = 0;
    for (const auto& bl : plan.body) {
        switch (bl.spec.kind) {
            case LayerSpec::Kind::Dense:
                cur = t.affine(pv.W[pi], pv.b[pi], cur);
                ++pi;
                cur = detail::apply_act(t, net.desc.activation, cur);
                break;
            case LayerSpec::Kind::Conv2d:
                cur = t.conv2d(pv.W[pi], pv.b[pi], cur, bl.spec.stride, bl.spec.pad);
                ++pi;
                cur = detail::apply_act(t, net.desc.activation, cur);
                break;
            case LayerSpec::Kind::MaxPool2d:
                cur = t.maxpool2d(cur, bl.spec.k, bl.spec.stride);
                break;
            case LayerSpec::Kind::AvgPool2d:
                cur = t.avgpool2d(cur, bl.spec.k, bl.spec.stride);
                break;
            case LayerSpec::Kind::Flatten:
                cur = t.reshape(cur, {t.val(cur).shape[0], bl.Cin * bl.Hin * bl.Win});
                break;
            case LayerSpec::Kind::BatchNorm:
                throw std::logic_error("unreachable: batchnorm rejected at planning");
        }
    }
    if (net.desc.head_intervalized()) {
        return t.affine(pv.W[pi], pv.b[pi], cur);
    }
    if (task >= net.heads.size())
        throw std::invalid_argument("tape_center_logits: missing task head " +
                                    std::to_string(task));
    VarId hw = t.leaf(net.heads[task].W, grad_head);
    VarId hb = t.leaf(net.heads[task].b, grad_head);
    if (head_vars) *head_vars = {hw, hb, true};
    return t.affine(hw, hb, cur);
}

/// Builds the interval forward chain to logit bounds. The input is taken as
/// a degenerate interval when X.lo == X.hi.
inline IvVar tape_interval_logits(Tape& t, const Network& net, const ParamVars& pv, IvVar X,
                                  std::size_t task) {
    if (!pv.has_box)
        throw std::invalid_argument("tape_interval_logits: ParamVars built without bounds");
    const auto& plan = net.plan;
    IvVar cur = X;
    if (net.desc.spatial_input()) {
        Shape s{t.val(X.lo).shape[0], net.desc.in_ch, net.desc.in_h, net.desc.in_w};
        if (cur.point()) {
            VarId r = t.reshape(cur.lo, s);
            cur = {r, r};
        } else {
            cur = {t.reshape(cur.lo, s), t.reshape(cur.hi, s)};
        }
    }
    std::size_t pi = 0;
    for (const auto& bl : plan.body) {
        switch (bl.spec.kind) {
            case LayerSpec::Kind::Dense:
                cur = t.iv_affine(pv.Wiv[pi], pv.biv[pi], cur);
                ++pi;
                cur = detail::apply_act(t, net.desc.activation, cur);
                break;
            case LayerSpec::Kind::Conv2d:
                cur = t.iv_conv2d(pv.Wiv[pi], pv.biv[pi], cur, bl.spec.stride, bl.spec.pad);
                ++pi;
                cur = detail::apply_act(t, net.desc.activation, cur);
                break;
            case LayerSpec::Kind::MaxPool2d:
                cur = t.iv_maxpool2d(cur, bl.spec.k, bl.spec.stride);
                break;
            case LayerSpec::Kind::AvgPool2d:
                cur = t.iv_avgpool2d(cur, bl.spec.k, bl.spec.stride);
                break;
            case LayerSpec::Kind::Flatten: {
                Shape s{t.val(cur.lo).shape[0], bl.Cin * bl.Hin * bl.Win};
                if (cur.point()) {
                    VarId r = t.reshape(cur.lo, s);
                    cur = {r, r};
                } else {
                    cur = {t.reshape(cur.lo, s), t.reshape(cur.hi, s)};
                }
                break;
            }
            case LayerSpec::Kind::BatchNorm:
                throw std::logic_error("unreachable: batchnorm rejected at planning");
        }
    }
    if (net.desc.head_intervalized()) {
        return t.iv_affine(pv.Wiv[pi], pv.biv[pi], cur);
    }
    if (task >= net.heads.size())
        throw std::invalid_argument("tape_interval_logits: missing task head " +
                                    std::to_string(task));
    VarId hw = t.leaf(net.heads[task].W);
    VarId hb = t.leaf(net.heads[task].b);
    return t.pw_affine(hw, hb, cur);
}

/// Plain forward pass at the box centers; radii are ignored entirely.
inline Tensor forward_center(const Network& net, const ParamBox& box, const Tensor& X,
                             std::size_t task = 0) {
    Tape t;
    ParamVars pv = tape_params_from_box(t, box);
    VarId x = t.leaf(X);
    return t.val(tape_center_logits(t, net, pv, x, task));
}

/// Interval forward pass: logit bounds over all parameter vectors in the box.
inline IntervalTensor forward_interval(const Network& net, const ParamBox& box, const Tensor& X,
                                       std::size_t task = 0) {
    Tape t;
    ParamVars pv = tape_params_from_box(t, box);
    VarId x = t.leaf(X);
    IvVar z = tape_interval_logits(t, net, pv, {x, x}, task);
    return IntervalTensor(t.val(z.lo), t.val(z.hi));
}

/// Plain forward pass at an arbitrary parameter vector given as a box'
/// center layout (radii ignored); used by sampling-based falsification.
inline Tensor forward_at(const Network& net, const ParamBox& point, const Tensor& X,
                         std::size_t task = 0) {
    return forward_center(net, point, X, task);
}

}  // namespace ivnet
