#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "ivnet/data.hpp"
#include "ivnet/loss.hpp"
#include "ivnet/network.hpp"
#include "ivnet/reparam.hpp"
#include "ivnet/tensor.hpp"

namespace ivnet {

struct TrainConfig {
    std::size_t center_epochs{30};
    std::size_t radii_epochs{30};
    std::size_t batch_size{128};
    double lr_center{1.0};
    double lr_radii{100.0};
    double acc_thresh{0.9};
    double initial_radius{1.0};
    std::size_t running_window{10};
    double nu_reset{5.0};
    std::uint64_t seed{1};

    void validate() const {
        if (batch_size == 0) throw std::invalid_argument("TrainConfig: batch_size must be positive");
        if (running_window == 0)
            throw std::invalid_argument("TrainConfig: running_window must be positive");
        if (!(lr_center > 0.0) || !(lr_radii > 0.0))
            throw std::invalid_argument("TrainConfig: learning rates must be positive");
        if (!(acc_thresh >= 0.0 && acc_thresh <= 1.0))
            throw std::invalid_argument("TrainConfig: acc_thresh must be in [0,1]");
        if (!(initial_radius > 0.0))
            throw std::invalid_argument("TrainConfig: initial_radius must be positive");
    }
};

/// Paired per-batch (accuracy, guaranteed accuracy) over a fixed window of
/// the most recent batches. Means are defined only once the window is full.
class RunningStats {
  public:
    explicit RunningStats(std::size_t window) : acc_(window), wc_(window) {
        if (window == 0) throw std::invalid_argument("RunningStats: window must be positive");
    }

    void push(double acc, double wc) {
        acc_[next_] = acc;
        wc_[next_] = wc;
        next_ = (next_ + 1) % acc_.size();
        if (count_ < acc_.size()) ++count_;
    }

    bool full() const { return count_ == acc_.size(); }

    double mean_acc() const {
        require_full();
        return std::accumulate(acc_.begin(), acc_.end(), 0.0) / double(acc_.size());
    }

    double mean_wc() const {
        require_full();
        return std::accumulate(wc_.begin(), wc_.end(), 0.0) / double(wc_.size());
    }

  private:
    void require_full() const {
        if (!full()) throw std::logic_error("RunningStats: window not full yet");
    }
    std::vector<double> acc_, wc_;
    std::size_t next_{0}, count_{0};
};

inline void sgd_step(Tensor& p, const Tensor& g, double lr) {
    check_same_shape(p, g, "sgd_step");
    for (std::size_t i = 0; i < p.numel(); ++i) p[i] -= lr * g[i];
}

/// Indices into one dataset plus remapped labels for one task.
struct TaskView {
    std::vector<std::size_t> indices;
    std::vector<int> labels;

    std::size_t size() const { return indices.size(); }
};

inline std::pair<Tensor, std::vector<int>> gather(const Dataset& ds, const TaskView& view,
                                                  const std::vector<std::size_t>& order,
                                                  std::size_t first, std::size_t count) {
    const std::size_t d = ds.dim();
    Tensor X({count, d});
    std::vector<int> y(count);
    for (std::size_t r = 0; r < count; ++r) {
        const std::size_t vi = order[first + r];
        const std::size_t row = view.indices[vi];
        for (std::size_t k = 0; k < d; ++k) X[r * d + k] = ds.features[row * d + k];
        y[r] = view.labels[vi];
    }
    return {std::move(X), std::move(y)};
}

struct EvalStats {
    double acc{0};
    double wc_acc{0};
    double wc_loss{0};
};

inline const ParamBox& center_box_of(const ParamBox& b) { return b; }
inline ParamBox center_box_of(const ReparamState& s) { return realize(s); }

/// Full-view evaluation in fixed-order chunks; loss is the sample-weighted
/// mean of chunk means.
template <typename Params>
EvalStats eval_task(const Network& net, const Params& params, const Dataset& ds,
                    const TaskView& view, std::size_t task, bool interval_stats,
                    std::size_t chunk = 512) {
    std::vector<std::size_t> order(view.size());
    std::iota(order.begin(), order.end(), 0);
    EvalStats st;
    double hits = 0.0, wc_hits = 0.0, loss_sum = 0.0;
    decltype(auto) cbox = center_box_of(params);
    for (std::size_t first = 0; first < view.size(); first += chunk) {
        const std::size_t count = std::min(chunk, view.size() - first);
        auto [X, y] = gather(ds, view, order, first, count);
        if (interval_stats) {
            IntervalTensor z = forward_interval(net, params, X, task);
            wc_hits += worst_case_accuracy_from(z, y) * double(count);
            loss_sum += worst_case_loss_from(z, y) * double(count);
        }
        Tensor c = forward_center(net, cbox, X, task);
        hits += accuracy(c, y) * double(count);
    }
    const double n = double(view.size());
    st.acc = hits / n;
    st.wc_acc = wc_hits / n;
    st.wc_loss = loss_sum / n;
    return st;
}

struct EpochStats {
    std::size_t task{0};
    std::string phase;
    std::size_t epoch{0};
    double train_acc{0};
    double wc_acc{0};
    double wc_loss{0};
    double region_size{0};
};

using EpochHook = std::function<void(const EpochStats&)>;

struct TaskReport {
    std::size_t task{0};
    double final_train_acc{0};
    double final_wc_acc{0};
    double final_wc_loss{0};
    std::size_t center_epochs_run{0};
    std::size_t radii_epochs_run{0};
    std::size_t radii_steps{0};
    bool threshold_met{false};
    std::vector<double> region_trace;
};

/// Two-phase training of one task. Phase 1 runs center_epochs of minibatch
/// SGD on mu (and, in incremental-task mode, the active head) minimizing
/// plain cross-entropy. Phase 2 resets nu and runs SGD on nu minimizing the
/// worst-case loss, stopping early once the running-window mean of the
/// guaranteed accuracy reaches acc_thresh times the running-window mean of
/// the center accuracy; radii_epochs caps the phase if the threshold is
/// never met.
inline TaskReport train_task(Network& net, const Dataset& data, const TaskView& view,
                             std::size_t task, const TrainConfig& cfg,
                             const EpochHook& hook = {}) {
    cfg.validate();
    if (view.size() == 0) throw std::invalid_argument("train_task: empty task dataset");
    const bool has_heads = !net.desc.head_intervalized();
    TaskReport report;
    report.task = task;

    std::mt19937_64 rng(subseed(cfg.seed, 1 + task));
    std::vector<std::size_t> order(view.size());
    std::iota(order.begin(), order.end(), 0);

    auto emit = [&](const char* phase, std::size_t epoch, double train_acc, double wc_acc,
                    double wc_loss) {
        const double rs = region_size(realize(net.state));
        report.region_trace.push_back(rs);
        if (hook) hook(EpochStats{task, phase, epoch, train_acc, wc_acc, wc_loss, rs});
    };

    for (std::size_t epoch = 0; epoch < cfg.center_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double hits = 0.0;
        for (std::size_t first = 0; first < view.size(); first += cfg.batch_size) {
            const std::size_t count = std::min(cfg.batch_size, view.size() - first);
            auto [X, y] = gather(data, view, order, first, count);
            Tape t;
            ParamVars pv = tape_params_from_state(t, net.state, true, false, false);
            VarId x = t.leaf(std::move(X));
            HeadVars hv;
            VarId logits = tape_center_logits(t, net, pv, x, task, has_heads, &hv);
            VarId loss = t.cross_entropy(logits, y);
            hits += accuracy(t.val(logits), y) * double(count);
            t.backward(loss);
            for (std::size_t l = 0; l < net.state.layers.size(); ++l) {
                sgd_step(net.state.layers[l].mu_w, t.grad(pv.mu_w[l]), cfg.lr_center);
                sgd_step(net.state.layers[l].mu_b, t.grad(pv.mu_b[l]), cfg.lr_center);
            }
            if (has_heads && hv.present) {
                sgd_step(net.heads[task].W, t.grad(hv.W), cfg.lr_center);
                sgd_step(net.heads[task].b, t.grad(hv.b), cfg.lr_center);
            }
        }
        ++report.center_epochs_run;
        {
            const std::size_t count = std::min(cfg.batch_size, view.size());
            auto [X, y] = gather(data, view, order, view.size() - count, count);
            const IntervalTensor z = forward_interval(net, net.state, X, task);
            emit("center", epoch, hits / double(view.size()), worst_case_accuracy_from(z, y),
                 worst_case_loss_from(z, y));
        }
    }

    reset_nu(net.state, cfg.nu_reset);

    RunningStats window(cfg.running_window);
    bool stop = false;
    for (std::size_t epoch = 0; epoch < cfg.radii_epochs && !stop; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double hits = 0.0, wc_hits = 0.0, wc_loss_sum = 0.0, seen = 0.0;
        for (std::size_t first = 0; first < view.size() && !stop; first += cfg.batch_size) {
            const std::size_t count = std::min(cfg.batch_size, view.size() - first);
            auto [X, y] = gather(data, view, order, first, count);
            Tape t;
            ParamVars pv = tape_params_from_state(t, net.state, false, true, true);
            VarId x = t.leaf(std::move(X));
            IvVar ivz = tape_interval_logits(t, net, pv, {x, x}, task);
            VarId z = t.wc_select(ivz, y);
            VarId lhat = t.cross_entropy(z, y);
            VarId clogits = tape_center_logits(t, net, pv, x, task);
            const double batch_acc = accuracy(t.val(clogits), y);
            const double batch_wc =
                worst_case_accuracy_from(IntervalTensor(t.val(ivz.lo), t.val(ivz.hi)), y);
            hits += batch_acc * double(count);
            wc_hits += batch_wc * double(count);
            wc_loss_sum += t.val(lhat)[0] * double(count);
            seen += double(count);
            t.backward(lhat);
            for (std::size_t l = 0; l < net.state.layers.size(); ++l) {
                sgd_step(net.state.layers[l].nu_w, t.grad(pv.nu_w[l]), cfg.lr_radii);
                sgd_step(net.state.layers[l].nu_b, t.grad(pv.nu_b[l]), cfg.lr_radii);
            }
            ++report.radii_steps;
            window.push(batch_acc, batch_wc);
            if (window.full() && window.mean_wc() >= window.mean_acc() * cfg.acc_thresh) {
                stop = true;
                report.threshold_met = true;
            }
        }
        ++report.radii_epochs_run;
        emit("radii", epoch, hits / seen, wc_hits / seen, wc_loss_sum / seen);
    }

    const EvalStats fin = eval_task(net, net.state, data, view, task, true);
    report.final_train_acc = fin.acc;
    report.final_wc_acc = fin.wc_acc;
    report.final_wc_loss = fin.wc_loss;
    return report;
}

/// Realizes the current variables into the next frozen box and resets the
/// free variables (mu = 0, nu = nu_reset). The new frozen box is contained
/// in the old one by construction.
inline void freeze_task(ReparamState& state, double nu_reset) {
    state = initial_state(realize(state), nu_reset);
}

}  // namespace ivnet
