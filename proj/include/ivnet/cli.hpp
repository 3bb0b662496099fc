#pragma once

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ivnet/checkpoint.hpp"
#include "ivnet/config.hpp"
#include "ivnet/data.hpp"
#include "ivnet/metrics.hpp"
#include "ivnet/sequence.hpp"
#include "ivnet/stream.hpp"

namespace ivnet {

inline constexpr int kExitOk = 0;
inline constexpr int kExitViolation = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitInternal = 4;

namespace detail {

inline std::string join_path(const std::string& a, const std::string& b) {
    return (std::filesystem::path(a) / b).string();
}

/// One generator call covers both splits so they share class centers; rows
/// are class-contiguous, so slicing per class keeps the splits disjoint.
inline std::pair<Dataset, Dataset> blob_splits(const RunConfig& c) {
    const std::size_t per = c.blob_train_per_class + c.blob_test_per_class;
    const Dataset all = synth_blobs(c.n_classes(), per, c.blob_dim, c.blob_separation,
                                    subseed(c.train.seed, 9000), "all");
    auto slice = [&](std::size_t lo, std::size_t hi, std::string split) {
        Dataset out;
        out.split = std::move(split);
        out.n_classes = all.n_classes;
        const std::size_t rows = (hi - lo) * c.n_classes();
        out.features = Tensor({rows, c.blob_dim});
        out.labels.reserve(rows);
        std::size_t r = 0;
        for (std::size_t cls = 0; cls < c.n_classes(); ++cls)
            for (std::size_t i = lo; i < hi; ++i, ++r) {
                const std::size_t src = cls * per + i;
                for (std::size_t k = 0; k < c.blob_dim; ++k)
                    out.features[r * c.blob_dim + k] = all.features[src * c.blob_dim + k];
                out.labels.push_back(all.labels[src]);
            }
        return out;
    };
    return {slice(0, c.blob_train_per_class, "train"),
            slice(c.blob_train_per_class, per, "test")};
}

inline std::pair<Dataset, Dataset> load_datasets(const RunConfig& c) {
    if (c.dataset == "mnist") {
        if (c.data_dir.empty()) throw ConfigError("dataset mnist requires data_dir");
        return {load_idx(join_path(c.data_dir, "train-images-idx3-ubyte"),
                         join_path(c.data_dir, "train-labels-idx1-ubyte"), "train"),
                load_idx(join_path(c.data_dir, "t10k-images-idx3-ubyte"),
                         join_path(c.data_dir, "t10k-labels-idx1-ubyte"), "test")};
    }
    if (c.dataset == "idx") {
        if (c.train_images.empty() || c.train_labels.empty() || c.test_images.empty() ||
            c.test_labels.empty())
            throw ConfigError("dataset idx requires train_images/train_labels/test_images/"
                              "test_labels");
        return {load_idx(c.train_images, c.train_labels, "train"),
                load_idx(c.test_images, c.test_labels, "test")};
    }
    if (c.dataset == "blobs") return blob_splits(c);
    if (c.dataset == "cifar10") {
        if (c.data_dir.empty()) throw ConfigError("dataset cifar10 requires data_dir");
        std::vector<std::string> train_batches;
        for (int i = 1; i <= 5; ++i)
            train_batches.push_back(join_path(c.data_dir, "data_batch_" + std::to_string(i) +
                                                              ".bin"));
        return {load_cifar10(train_batches, "train"),
                load_cifar10({join_path(c.data_dir, "test_batch.bin")}, "test")};
    }
    throw ConfigError("unknown dataset: " + c.dataset);
}

inline nlohmann::json report_to_json(const SequenceReport& rep) {
    nlohmann::json recs = nlohmann::json::array();
    for (const auto& r : rep.records)
        recs.push_back({{"task", r.task},
                        {"wc_acc", r.wc_acc},
                        {"wc_loss", r.wc_loss},
                        {"train_acc", r.train_acc},
                        {"acc_thresh", r.acc_thresh},
                        {"region_size", r.region_size},
                        {"threshold_met", r.threshold_met}});
    nlohmann::json tasks = nlohmann::json::array();
    for (const auto& t : rep.task_reports)
        tasks.push_back({{"task", t.task},
                         {"final_train_acc", t.final_train_acc},
                         {"final_wc_acc", t.final_wc_acc},
                         {"final_wc_loss", t.final_wc_loss},
                         {"center_epochs_run", t.center_epochs_run},
                         {"radii_epochs_run", t.radii_epochs_run},
                         {"radii_steps", t.radii_steps},
                         {"threshold_met", t.threshold_met},
                         {"region_trace", t.region_trace}});
    return {{"acc_matrix", rep.acc_matrix},
            {"avg_accuracy", rep.avg_accuracy},
            {"records", recs},
            {"task_reports", tasks}};
}

inline void write_json_file(const std::string& path, const nlohmann::json& j) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open " + path);
    os << j.dump(2) << '\n';
}

template <typename Fn>
int guard(Fn&& fn) {
    try {
        return fn();
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInternal;
    }
}

inline Checkpoint load_checkpoint_or_data_error(const std::string& path) {
    try {
        return load_checkpoint(path);
    } catch (const std::exception& e) {
        throw DataError(e.what());
    }
}

/// Full accuracy matrix from the frozen-box chain: row k evaluates every
/// stream task at the box frozen after task k.
inline std::vector<std::vector<double>> full_matrix(const Checkpoint& ckpt,
                                                    const TaskStream& stream,
                                                    const Dataset& test_ds) {
    Network net = network_from_checkpoint(ckpt);
    std::vector<std::vector<double>> m;
    for (std::size_t k = 0; k < ckpt.records.size(); ++k) {
        std::vector<double> row;
        for (std::size_t j = 0; j < stream.n_tasks; ++j)
            row.push_back(
                eval_task(net, ckpt.chain[k + 1], test_ds, stream.test[j], j, false).acc);
        m.push_back(std::move(row));
    }
    return m;
}

}  // namespace detail

inline int cmd_train(const std::string& config_path, const std::vector<std::string>& sets) {
    return detail::guard([&]() -> int {
        const RunConfig cfg = load_run_config(config_path, sets);
        if (cfg.threads > 1)
            std::cerr << "note: threads=" << cfg.threads
                      << " requested; this build runs single-threaded\n";
        auto [train_ds, test_ds] = detail::load_datasets(cfg);
        const ArchitectureDescriptor desc = descriptor_from(cfg, train_ds.dim());
        const TaskStream stream =
            build_stream(train_ds, test_ds, cfg.scenario, cfg.n_tasks, cfg.classes_per_task);

        std::filesystem::create_directories(cfg.out_dir);
        MetricsWriter metrics(detail::join_path(cfg.out_dir, "metrics.jsonl"));
        metrics.set_echo(&std::cerr);

        nlohmann::json out;
        if (cfg.method == "interval") {
            SequenceResult res =
                run_sequence(desc, stream, train_ds, test_ds, cfg.train, &metrics);
            const std::string ckpt_path = detail::join_path(cfg.out_dir, "checkpoint.ivn");
            const std::string tmp_path = ckpt_path + ".tmp";
            save_checkpoint(tmp_path, make_checkpoint(res, cfg.train.seed, cfg.train.nu_reset));
            std::filesystem::rename(tmp_path, ckpt_path);
            out = detail::report_to_json(res.report);
            out["checkpoint"] = ckpt_path;
            std::cout << "avg_accuracy " << res.report.avg_accuracy << '\n';
        } else {
            BaselineResult res =
                baseline_sgd_sequence(desc, stream, train_ds, test_ds, cfg.train, &metrics);
            out = detail::report_to_json(res.report);
            std::cout << "avg_accuracy " << res.report.avg_accuracy << '\n';
        }
        out["method"] = cfg.method;
        out["scenario"] = to_string(cfg.scenario);
        out["seed"] = cfg.train.seed;
        detail::write_json_file(detail::join_path(cfg.out_dir, "report.json"), out);
        return kExitOk;
    });
}

inline int cmd_eval(const std::string& ckpt_path, const std::string& config_path,
                    const std::vector<std::string>& sets) {
    return detail::guard([&]() -> int {
        const RunConfig cfg = load_run_config(config_path, sets);
        const Checkpoint ckpt = detail::load_checkpoint_or_data_error(ckpt_path);
        auto [train_ds, test_ds] = detail::load_datasets(cfg);
        const TaskStream stream = build_stream(train_ds, test_ds, ckpt.desc.scenario,
                                               ckpt.desc.n_tasks, ckpt.desc.classes_per_task);
        const auto matrix = detail::full_matrix(ckpt, stream, test_ds);

        std::cout.precision(17);
        double avg = 0.0;
        for (std::size_t k = 0; k < matrix.size(); ++k) {
            std::cout << "after_task " << k << ":";
            for (double a : matrix[k]) std::cout << ' ' << a;
            std::cout << '\n';
        }
        if (!matrix.empty()) {
            double s = 0.0;
            for (double a : matrix.back()) s += a;
            avg = s / double(matrix.back().size());
        }
        std::cout << "avg_accuracy " << avg << '\n';

        std::filesystem::create_directories(cfg.out_dir);
        detail::write_json_file(detail::join_path(cfg.out_dir, "eval.json"),
                                {{"acc_matrix", matrix}, {"avg_accuracy", avg}});
        return kExitOk;
    });
}

inline int cmd_verify(const std::string& ckpt_path, const std::string& config_path,
                      const std::vector<std::string>& sets, long long samples_override = -1) {
    return detail::guard([&]() -> int {
        const RunConfig cfg = load_run_config(config_path, sets);
        const Checkpoint ckpt = detail::load_checkpoint_or_data_error(ckpt_path);
        auto [train_ds, test_ds] = detail::load_datasets(cfg);
        const TaskStream stream = build_stream(train_ds, test_ds, ckpt.desc.scenario,
                                               ckpt.desc.n_tasks, ckpt.desc.classes_per_task);
        if (ckpt.records.size() > stream.n_tasks)
            throw DataError("verify: checkpoint has more tasks than the configured stream");
        const std::size_t samples =
            samples_override < 0 ? cfg.verify_samples : std::size_t(samples_override);

        const Network net = network_from_checkpoint(ckpt);
        const VerificationReport rep =
            verify_guarantees(net, ckpt.chain, ckpt.records, stream, train_ds, samples,
                              cfg.verify_eval_cap, cfg.train.seed);

        nlohmann::json viol = nlohmann::json::array();
        for (const auto& v : rep.violations)
            viol.push_back({{"kind", v.kind}, {"task", v.task}, {"detail", v.detail}});
        std::filesystem::create_directories(cfg.out_dir);
        detail::write_json_file(detail::join_path(cfg.out_dir, "verification.json"),
                                {{"violations", viol},
                                 {"recomputed_wc_acc", rep.recomputed_wc_acc},
                                 {"recomputed_wc_loss", rep.recomputed_wc_loss},
                                 {"center_acc", rep.center_acc},
                                 {"samples", rep.samples},
                                 {"eval_rows", rep.eval_rows}});
        if (!rep.ok()) {
            for (const auto& v : rep.violations)
                std::cerr << "violation [" << v.kind << "] task " << v.task << ": " << v.detail
                          << '\n';
            std::cout << "verify: " << rep.violations.size() << " violation(s)\n";
            return kExitViolation;
        }
        std::cout << "verify: ok (" << rep.samples << " samples, " << rep.eval_rows
                  << " eval rows)\n";
        return kExitOk;
    });
}

inline int cmd_synth(const std::string& config_path, const std::vector<std::string>& sets) {
    return detail::guard([&]() -> int {
        const RunConfig cfg = load_run_config(config_path, sets);
        auto [train_ds, test_ds] = detail::blob_splits(cfg);
        std::filesystem::create_directories(cfg.out_dir);
        const std::string ti = detail::join_path(cfg.out_dir, "blobs-train-images-idx3-ubyte");
        const std::string tl = detail::join_path(cfg.out_dir, "blobs-train-labels-idx1-ubyte");
        const std::string vi = detail::join_path(cfg.out_dir, "blobs-test-images-idx3-ubyte");
        const std::string vl = detail::join_path(cfg.out_dir, "blobs-test-labels-idx1-ubyte");
        write_idx(train_ds, ti, tl);
        write_idx(test_ds, vi, vl);
        std::cout << "wrote " << ti << '\n'
                  << "wrote " << tl << '\n'
                  << "wrote " << vi << '\n'
                  << "wrote " << vl << '\n';
        return kExitOk;
    });
}

}  // namespace ivnet
