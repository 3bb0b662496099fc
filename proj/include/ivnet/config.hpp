#pragma once

#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ivnet/network.hpp"
#include "ivnet/train.hpp"

namespace ivnet {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return {};
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

}  // namespace detail

/// Flat key=value config text: one assignment per line, '#' starts a
/// comment, blank lines ignored. Later assignments win.
inline std::map<std::string, std::string> parse_config_text(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
        kv[key] = value;
    }
    return kv;
}

inline void apply_overrides(std::map<std::string, std::string>& kv,
                            const std::vector<std::string>& sets) {
    for (const auto& s : sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw ConfigError("--set expects key=value, got: " + s);
        kv[detail::trim(s.substr(0, eq))] = detail::trim(s.substr(eq + 1));
    }
}

struct RunConfig {
    Scenario scenario{Scenario::IncrementalTask};
    std::string dataset{"mnist"};
    std::string data_dir;
    std::string train_images, train_labels, test_images, test_labels;
    std::vector<std::string> cifar_train_batches;
    std::string cifar_test_batch;
    bool experimental_cifar{false};

    std::vector<std::size_t> hidden{400, 400};
    Activation activation{Activation::ReLU};
    std::size_t n_tasks{5};
    std::size_t classes_per_task{2};

    TrainConfig train;
    std::string method{"interval"};
    std::string out_dir{"."};
    std::size_t threads{1};
    std::size_t verify_samples{500};
    std::size_t verify_eval_cap{2048};

    std::size_t blob_dim{16};
    std::size_t blob_train_per_class{200};
    std::size_t blob_test_per_class{100};
    double blob_separation{4.0};

    std::size_t n_classes() const { return n_tasks * classes_per_task; }
};

namespace detail {

inline std::size_t to_size(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const unsigned long long x = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return std::size_t(x);
    } catch (const std::exception&) {
        throw ConfigError("config key " + key + ": expected a non-negative integer, got '" + v +
                          "'");
    }
}

inline double to_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const double x = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ConfigError("config key " + key + ": expected a number, got '" + v + "'");
    }
}

inline bool to_bool(const std::string& key, const std::string& v) {
    if (v == "1" || v == "true" || v == "yes") return true;
    if (v == "0" || v == "false" || v == "no") return false;
    throw ConfigError("config key " + key + ": expected a boolean, got '" + v + "'");
}

inline std::vector<std::size_t> to_size_list(const std::string& key, const std::string& v) {
    std::vector<std::size_t> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        out.push_back(to_size(key, item));
    }
    return out;
}

}  // namespace detail

inline RunConfig run_config_from(const std::map<std::string, std::string>& kv) {
    static const std::set<std::string> known = {
        "scenario",       "dataset",         "data_dir",
        "train_images",   "train_labels",    "test_images",
        "test_labels",    "experimental_cifar",
        "hidden",         "activation",      "n_tasks",
        "classes_per_task",
        "center_epochs",  "radii_epochs",    "batch_size",
        "lr_center",      "lr_radii",        "acc_thresh",
        "initial_radius", "running_window",  "nu_reset",
        "seed",           "method",          "out_dir",
        "threads",        "verify_samples",  "verify_eval_cap",
        "blob_dim",       "blob_train_per_class", "blob_test_per_class",
        "blob_separation"};
    for (const auto& [k, v] : kv)
        if (!known.count(k)) throw ConfigError("unknown config key: " + k);

    RunConfig c;
    auto str = [&](const char* k, const std::string& dflt) {
        auto it = kv.find(k);
        return it == kv.end() ? dflt : it->second;
    };
    auto size = [&](const char* k, std::size_t dflt) {
        auto it = kv.find(k);
        return it == kv.end() ? dflt : detail::to_size(k, it->second);
    };
    auto real = [&](const char* k, double dflt) {
        auto it = kv.find(k);
        return it == kv.end() ? dflt : detail::to_double(k, it->second);
    };

    try {
        c.scenario = scenario_from_string(str("scenario", "incremental_task"));
        c.activation = activation_from_string(str("activation", "relu"));
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    c.dataset = str("dataset", "mnist");
    if (c.dataset != "mnist" && c.dataset != "blobs" && c.dataset != "idx" &&
        c.dataset != "cifar10")
        throw ConfigError("config key dataset: expected mnist|blobs|idx|cifar10, got '" +
                          c.dataset + "'");
    c.data_dir = str("data_dir", "");
    c.train_images = str("train_images", "");
    c.train_labels = str("train_labels", "");
    c.test_images = str("test_images", "");
    c.test_labels = str("test_labels", "");
    if (auto it = kv.find("experimental_cifar"); it != kv.end())
        c.experimental_cifar = detail::to_bool("experimental_cifar", it->second);
    if (auto it = kv.find("hidden"); it != kv.end())
        c.hidden = detail::to_size_list("hidden", it->second);
    c.n_tasks = size("n_tasks", 5);
    c.classes_per_task = size("classes_per_task", 2);

    c.train.center_epochs = size("center_epochs", 30);
    c.train.radii_epochs = size("radii_epochs", 30);
    c.train.batch_size = size("batch_size", 128);
    c.train.lr_center = real("lr_center", 1.0);
    c.train.lr_radii = real("lr_radii", 100.0);
    c.train.acc_thresh = real("acc_thresh", 0.9);
    c.train.initial_radius = real("initial_radius", 1.0);
    c.train.running_window = size("running_window", 10);
    c.train.nu_reset = real("nu_reset", 5.0);
    c.train.seed = size("seed", 1);

    c.method = str("method", "interval");
    if (c.method != "interval" && c.method != "sgd_baseline")
        throw ConfigError("config key method: expected interval|sgd_baseline, got '" + c.method +
                          "'");
    c.out_dir = str("out_dir", ".");
    c.threads = size("threads", 1);
    c.verify_samples = size("verify_samples", 500);
    c.verify_eval_cap = size("verify_eval_cap", 2048);

    c.blob_dim = size("blob_dim", 16);
    c.blob_train_per_class = size("blob_train_per_class", 200);
    c.blob_test_per_class = size("blob_test_per_class", 100);
    c.blob_separation = real("blob_separation", 4.0);

    if (c.n_tasks == 0 || c.classes_per_task == 0)
        throw ConfigError("n_tasks and classes_per_task must be positive");
    if (c.dataset == "cifar10" && !c.experimental_cifar)
        throw ConfigError("dataset cifar10 requires experimental_cifar=1");
    try {
        c.train.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    return c;
}

inline RunConfig load_run_config(const std::string& path, const std::vector<std::string>& sets) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    auto kv = parse_config_text(ss.str());
    apply_overrides(kv, sets);
    return run_config_from(kv);
}

inline ArchitectureDescriptor descriptor_from(const RunConfig& c, std::size_t input_dim) {
    ArchitectureDescriptor d = ArchitectureDescriptor::mlp(input_dim, c.hidden, c.scenario,
                                                           c.n_tasks, c.classes_per_task,
                                                           c.n_classes(), c.activation);
    d.validate();
    return d;
}

}  // namespace ivnet
