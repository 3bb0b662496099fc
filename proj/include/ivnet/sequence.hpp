#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "ivnet/box.hpp"
#include "ivnet/loss.hpp"
#include "ivnet/metrics.hpp"
#include "ivnet/network.hpp"
#include "ivnet/stream.hpp"
#include "ivnet/train.hpp"

namespace ivnet {

/// What was promised when a task's box was frozen: guaranteed accuracy and
/// worst-case loss over the frozen box on that task's full training split.
struct GuaranteeRecord {
    std::size_t task{0};
    double wc_acc{0};
    double wc_loss{0};
    double train_acc{0};
    double acc_thresh{0};
    double region_size{0};
    bool threshold_met{false};
};

struct SequenceReport {
    std::vector<GuaranteeRecord> records;
    std::vector<std::vector<double>> acc_matrix;
    std::vector<TaskReport> task_reports;
    double avg_accuracy{0};
};

struct SequenceResult {
    Network net;
    std::vector<ParamBox> chain;
    std::vector<GuaranteeRecord> records;
    SequenceReport report;

    const ParamBox& final_box() const { return chain.back(); }
};

namespace detail {

template <typename Params>
inline std::vector<double> eval_seen_tasks(const Network& net, const Params& params,
                                           const Dataset& test_ds, const TaskStream& stream,
                                           std::size_t upto) {
    std::vector<double> accs;
    const ParamBox box = [&] {
        if constexpr (std::is_same_v<Params, ParamBox>)
            return params;
        else
            return realize(params);
    }();
    for (std::size_t j = 0; j <= upto && j < stream.n_tasks; ++j)
        accs.push_back(eval_task(net, box, test_ds, stream.test[j], j, false).acc);
    return accs;
}

}  // namespace detail

/// Trains the task stream in order, freezing the parameter box after each
/// task. Emits one metrics record per (task, phase, epoch); evaluates the
/// test split of every seen task after each task boundary into acc_matrix.
inline SequenceResult run_sequence(const ArchitectureDescriptor& desc, const TaskStream& stream,
                                   const Dataset& train_ds, const Dataset& test_ds,
                                   const TrainConfig& cfg, MetricsWriter* metrics = nullptr) {
    cfg.validate();
    SequenceResult res;
    res.net = make_network(desc, cfg.initial_radius, cfg.nu_reset, cfg.seed);
    res.chain.push_back(res.net.state.frozen);

    for (std::size_t k = 0; k < stream.n_tasks; ++k) {
        EpochHook hook = [&](const EpochStats& es) {
            if (!metrics) return;
            MetricsRecord r;
            r.task = es.task;
            r.phase = es.phase;
            r.epoch = es.epoch;
            r.train_acc = es.train_acc;
            r.wc_acc = es.wc_acc;
            r.wc_loss = es.wc_loss;
            r.region_size = es.region_size;
            r.eval_acc_per_seen_task =
                detail::eval_seen_tasks(res.net, res.net.state, test_ds, stream, k);
            metrics->write(r);
        };
        TaskReport tr = train_task(res.net, train_ds, stream.train[k], k, cfg, hook);
        freeze_task(res.net.state, cfg.nu_reset);
        res.chain.push_back(res.net.state.frozen);

        GuaranteeRecord g;
        g.task = k;
        g.wc_acc = tr.final_wc_acc;
        g.wc_loss = tr.final_wc_loss;
        g.train_acc = tr.final_train_acc;
        g.acc_thresh = cfg.acc_thresh;
        g.region_size = region_size(res.net.state.frozen);
        g.threshold_met = tr.threshold_met;
        res.records.push_back(g);

        res.report.task_reports.push_back(std::move(tr));
        res.report.acc_matrix.push_back(
            detail::eval_seen_tasks(res.net, res.net.state.frozen, test_ds, stream, k));
    }
    res.report.records = res.records;
    if (!res.report.acc_matrix.empty()) {
        const auto& last = res.report.acc_matrix.back();
        double s = 0.0;
        for (double a : last) s += a;
        res.report.avg_accuracy = s / double(last.size());
    }
    return res;
}

struct BaselineResult {
    Network net;
    ParamBox params;
    SequenceReport report;
};

/// Plain SGD on the same architecture and task order, no interval
/// constraints: the forgetting control.
inline BaselineResult baseline_sgd_sequence(const ArchitectureDescriptor& desc,
                                            const TaskStream& stream, const Dataset& train_ds,
                                            const Dataset& test_ds, const TrainConfig& cfg,
                                            MetricsWriter* metrics = nullptr) {
    cfg.validate();
    BaselineResult res;
    res.net = make_network(desc, cfg.initial_radius, cfg.nu_reset, cfg.seed);
    res.params = res.net.state.frozen;
    for (auto& l : res.params.layers) {
        l.eps_w = Tensor(l.eps_w.shape);
        l.eps_b = Tensor(l.eps_b.shape);
    }
    const bool has_heads = !desc.head_intervalized();

    for (std::size_t k = 0; k < stream.n_tasks; ++k) {
        const TaskView& view = stream.train[k];
        if (view.size() == 0) throw std::invalid_argument("baseline_sgd_sequence: empty task");
        std::mt19937_64 rng(subseed(cfg.seed, 1 + k));
        std::vector<std::size_t> order(view.size());
        std::iota(order.begin(), order.end(), 0);

        for (std::size_t epoch = 0; epoch < cfg.center_epochs; ++epoch) {
            std::shuffle(order.begin(), order.end(), rng);
            double hits = 0.0, loss_sum = 0.0;
            for (std::size_t first = 0; first < view.size(); first += cfg.batch_size) {
                const std::size_t count = std::min(cfg.batch_size, view.size() - first);
                auto [X, y] = gather(train_ds, view, order, first, count);
                Tape t;
                ParamVars pv = tape_params_from_box(t, res.params, true);
                VarId x = t.leaf(std::move(X));
                HeadVars hv;
                VarId logits = tape_center_logits(t, res.net, pv, x, k, has_heads, &hv);
                VarId loss = t.cross_entropy(logits, y);
                hits += accuracy(t.val(logits), y) * double(count);
                loss_sum += t.val(loss)[0] * double(count);
                t.backward(loss);
                for (std::size_t l = 0; l < res.params.layers.size(); ++l) {
                    sgd_step(res.params.layers[l].W, t.grad(pv.W[l]), cfg.lr_center);
                    sgd_step(res.params.layers[l].b, t.grad(pv.b[l]), cfg.lr_center);
                }
                if (has_heads && hv.present) {
                    sgd_step(res.net.heads[k].W, t.grad(hv.W), cfg.lr_center);
                    sgd_step(res.net.heads[k].b, t.grad(hv.b), cfg.lr_center);
                }
            }
            if (metrics) {
                MetricsRecord r;
                r.task = k;
                r.phase = "sgd";
                r.epoch = epoch;
                r.train_acc = hits / double(view.size());
                r.wc_acc = r.train_acc;
                r.wc_loss = loss_sum / double(view.size());
                r.region_size = 0.0;
                r.eval_acc_per_seen_task =
                    detail::eval_seen_tasks(res.net, res.params, test_ds, stream, k);
                metrics->write(r);
            }
        }
        res.report.acc_matrix.push_back(
            detail::eval_seen_tasks(res.net, res.params, test_ds, stream, k));
    }
    if (!res.report.acc_matrix.empty()) {
        const auto& last = res.report.acc_matrix.back();
        double s = 0.0;
        for (double a : last) s += a;
        res.report.avg_accuracy = s / double(last.size());
    }
    return res;
}

struct Violation {
    std::string kind;
    std::size_t task{0};
    std::string detail;
};

struct VerificationReport {
    std::vector<Violation> violations;
    std::vector<double> recomputed_wc_acc;
    std::vector<double> recomputed_wc_loss;
    std::vector<double> center_acc;
    std::size_t samples{0};
    std::size_t eval_rows{0};

    bool ok() const { return violations.empty(); }
};

namespace detail {

inline std::string containment_violation(const ParamBox& outer, const ParamBox& inner) {
    auto scan = [](const Tensor& wo, const Tensor& eo, const Tensor& wi, const Tensor& ei,
                   std::size_t layer, const char* group) -> std::string {
        for (std::size_t k = 0; k < wo.numel(); ++k) {
            const double ol = wo[k] - eo[k], oh = wo[k] + eo[k];
            const double il = wi[k] - ei[k], ih = wi[k] + ei[k];
            if (il < ol || ih > oh) {
                std::ostringstream os;
                os << "layer " << layer << ' ' << group << '[' << k << "]: inner [" << il << ", "
                   << ih << "] outer [" << ol << ", " << oh << ']';
                return os.str();
            }
        }
        return {};
    };
    for (std::size_t l = 0; l < outer.layers.size(); ++l) {
        std::string s = scan(outer.layers[l].W, outer.layers[l].eps_w, inner.layers[l].W,
                             inner.layers[l].eps_w, l, "W");
        if (!s.empty()) return s;
        s = scan(outer.layers[l].b, outer.layers[l].eps_b, inner.layers[l].b, inner.layers[l].eps_b,
                 l, "b");
        if (!s.empty()) return s;
    }
    return {};
}

inline TaskView capped_view(const TaskView& v, std::size_t cap) {
    if (cap == 0 || cap >= v.size()) return v;
    TaskView out;
    out.indices.assign(v.indices.begin(), v.indices.begin() + std::ptrdiff_t(cap));
    out.labels.assign(v.labels.begin(), v.labels.begin() + std::ptrdiff_t(cap));
    return out;
}

}  // namespace detail

/// Checks every guarantee the training run recorded. For each task: the
/// guaranteed accuracy is recomputed at the final box and the center must
/// meet it; sampled parameter vectors from the final box must meet it and
/// stay under the recomputed worst-case loss; frozen boxes must form an
/// exact containment chain. eval_cap > 0 restricts per-task evaluation to a
/// deterministic prefix of the training split (every check remains sound on
/// a subset); the recorded-at-freeze guarantee is compared only when the
/// full split is evaluated.
inline VerificationReport verify_guarantees(const Network& net, const std::vector<ParamBox>& chain,
                                            const std::vector<GuaranteeRecord>& records,
                                            const TaskStream& stream, const Dataset& train_ds,
                                            std::size_t samples = 500, std::size_t eval_cap = 2048,
                                            std::uint64_t seed = 0) {
    if (records.size() > stream.n_tasks)
        throw std::invalid_argument("verify_guarantees: checkpoint has more tasks than the stream");
    if (chain.size() != records.size() + 1)
        throw std::invalid_argument("verify_guarantees: chain/record count mismatch");
    VerificationReport rep;
    rep.samples = samples;

    for (std::size_t i = 0; i + 1 < chain.size(); ++i) {
        const std::string s = detail::containment_violation(chain[i], chain[i + 1]);
        if (!s.empty()) rep.violations.push_back({"chain_containment", i + 1, s});
    }

    const ParamBox& final_box = chain.back();
    const std::size_t n_tasks = records.size();
    std::vector<TaskView> views;
    std::vector<bool> full_view;
    for (std::size_t j = 0; j < n_tasks; ++j) {
        views.push_back(detail::capped_view(stream.train[j], eval_cap));
        full_view.push_back(views.back().size() == stream.train[j].size());
        rep.eval_rows += views.back().size();
    }

    for (std::size_t j = 0; j < n_tasks; ++j) {
        const EvalStats st = eval_task(net, final_box, train_ds, views[j], j, true);
        rep.recomputed_wc_acc.push_back(st.wc_acc);
        rep.recomputed_wc_loss.push_back(st.wc_loss);
        rep.center_acc.push_back(st.acc);
        if (st.acc < st.wc_acc) {
            std::ostringstream os;
            os << "center accuracy " << st.acc << " below guaranteed " << st.wc_acc;
            rep.violations.push_back({"center_below_guarantee", j, os.str()});
        }
        if (full_view[j] && st.wc_acc < records[j].wc_acc) {
            std::ostringstream os;
            os << "guaranteed accuracy at final box " << st.wc_acc
               << " below value recorded at freeze " << records[j].wc_acc;
            rep.violations.push_back({"guarantee_regressed", j, os.str()});
        }
    }

    std::mt19937_64 rng(subseed(seed, 777));
    constexpr double loss_tol = 1e-9;
    for (std::size_t s = 0; s < samples; ++s) {
        const ParamBox theta = sample_point(final_box, rng);
        for (std::size_t j = 0; j < n_tasks; ++j) {
            std::vector<std::size_t> order(views[j].size());
            std::iota(order.begin(), order.end(), 0);
            double hits = 0.0, loss_sum = 0.0;
            for (std::size_t first = 0; first < views[j].size(); first += 512) {
                const std::size_t count = std::min<std::size_t>(512, views[j].size() - first);
                auto [X, y] = gather(train_ds, views[j], order, first, count);
                const Tensor z = forward_center(net, theta, X, j);
                hits += accuracy(z, y) * double(count);
                loss_sum += cross_entropy(z, y) * double(count);
            }
            const double acc = hits / double(views[j].size());
            const double loss = loss_sum / double(views[j].size());
            if (acc < rep.recomputed_wc_acc[j]) {
                std::ostringstream os;
                os << "sample " << s << " accuracy " << acc << " below guaranteed "
                   << rep.recomputed_wc_acc[j];
                rep.violations.push_back({"sampled_accuracy", j, os.str()});
            }
            if (loss > rep.recomputed_wc_loss[j] + loss_tol) {
                std::ostringstream os;
                os << "sample " << s << " loss " << loss << " above worst case "
                   << rep.recomputed_wc_loss[j];
                rep.violations.push_back({"sampled_loss", j, os.str()});
            }
        }
    }
    return rep;
}

}  // namespace ivnet
