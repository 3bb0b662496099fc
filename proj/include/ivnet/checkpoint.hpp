#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "ivnet/network.hpp"
#include "ivnet/sequence.hpp"

namespace ivnet {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

struct Checkpoint {
    ArchitectureDescriptor desc;
    std::uint64_t seed{0};
    double nu_reset{5.0};
    std::vector<GuaranteeRecord> records;
    std::vector<ParamBox> chain;
    std::vector<HeadParams> heads;

    const ParamBox& final_box() const {
        if (chain.empty()) throw std::logic_error("Checkpoint: empty chain");
        return chain.back();
    }
};

namespace detail {

constexpr char kCkptMagic[8] = {'I', 'V', 'N', 'E', 'T', 'C', 'K', 'P'};
constexpr std::uint32_t kCkptVersion = 1;

inline std::string kind_to_string(LayerSpec::Kind k) {
    switch (k) {
        case LayerSpec::Kind::Dense: return "dense";
        case LayerSpec::Kind::Conv2d: return "conv2d";
        case LayerSpec::Kind::MaxPool2d: return "maxpool2d";
        case LayerSpec::Kind::AvgPool2d: return "avgpool2d";
        case LayerSpec::Kind::Flatten: return "flatten";
        case LayerSpec::Kind::BatchNorm: return "batchnorm";
    }
    throw std::logic_error("kind_to_string: bad kind");
}

inline LayerSpec::Kind kind_from_string(const std::string& s) {
    if (s == "dense") return LayerSpec::Kind::Dense;
    if (s == "conv2d") return LayerSpec::Kind::Conv2d;
    if (s == "maxpool2d") return LayerSpec::Kind::MaxPool2d;
    if (s == "avgpool2d") return LayerSpec::Kind::AvgPool2d;
    if (s == "flatten") return LayerSpec::Kind::Flatten;
    if (s == "batchnorm") return LayerSpec::Kind::BatchNorm;
    throw std::runtime_error("checkpoint: unknown layer kind " + s);
}

inline nlohmann::json descriptor_to_json(const ArchitectureDescriptor& d) {
    nlohmann::json body = nlohmann::json::array();
    for (const auto& l : d.body)
        body.push_back({{"kind", kind_to_string(l.kind)},
                        {"out", l.out},
                        {"k", l.k},
                        {"stride", l.stride},
                        {"pad", l.pad}});
    return {{"input_dim", d.input_dim}, {"in_ch", d.in_ch},
            {"in_h", d.in_h},           {"in_w", d.in_w},
            {"body", body},             {"activation", to_string(d.activation)},
            {"scenario", to_string(d.scenario)},
            {"n_tasks", d.n_tasks},     {"classes_per_task", d.classes_per_task},
            {"n_classes", d.n_classes}};
}

inline ArchitectureDescriptor descriptor_from_json(const nlohmann::json& j) {
    ArchitectureDescriptor d;
    d.input_dim = j.at("input_dim").get<std::size_t>();
    d.in_ch = j.at("in_ch").get<std::size_t>();
    d.in_h = j.at("in_h").get<std::size_t>();
    d.in_w = j.at("in_w").get<std::size_t>();
    for (const auto& l : j.at("body")) {
        LayerSpec s;
        s.kind = kind_from_string(l.at("kind").get<std::string>());
        s.out = l.at("out").get<std::size_t>();
        s.k = l.at("k").get<std::size_t>();
        s.stride = l.at("stride").get<std::size_t>();
        s.pad = l.at("pad").get<std::size_t>();
        d.body.push_back(s);
    }
    d.activation = activation_from_string(j.at("activation").get<std::string>());
    d.scenario = scenario_from_string(j.at("scenario").get<std::string>());
    d.n_tasks = j.at("n_tasks").get<std::size_t>();
    d.classes_per_task = j.at("classes_per_task").get<std::size_t>();
    d.n_classes = j.at("n_classes").get<std::size_t>();
    return d;
}

inline void write_doubles(std::ofstream& os, const Tensor& t) {
    os.write(reinterpret_cast<const char*>(t.data.data()),
             std::streamsize(t.numel() * sizeof(double)));
}

inline Tensor read_doubles(std::ifstream& is, const Shape& shape) {
    Tensor t(shape);
    is.read(reinterpret_cast<char*>(t.data.data()), std::streamsize(t.numel() * sizeof(double)));
    if (!is) throw std::runtime_error("checkpoint: truncated parameter data");
    return t;
}

}  // namespace detail

inline void save_checkpoint(const std::string& path, const Checkpoint& c) {
    c.desc.validate();
    const NetPlan plan = plan_of(c.desc);
    for (const auto& box : c.chain) {
        box.validate();
        if (box.layers.size() != plan.param_shapes.size())
            throw std::invalid_argument("save_checkpoint: box does not match descriptor");
    }
    nlohmann::json meta;
    meta["format"] = "ivnet-checkpoint";
    meta["descriptor"] = detail::descriptor_to_json(c.desc);
    meta["seed"] = c.seed;
    meta["nu_reset"] = c.nu_reset;
    meta["chain_len"] = c.chain.size();
    meta["head_count"] = c.heads.size();
    nlohmann::json recs = nlohmann::json::array();
    for (const auto& r : c.records)
        recs.push_back({{"task", r.task},
                        {"wc_acc", r.wc_acc},
                        {"wc_loss", r.wc_loss},
                        {"train_acc", r.train_acc},
                        {"acc_thresh", r.acc_thresh},
                        {"region_size", r.region_size},
                        {"threshold_met", r.threshold_met}});
    meta["records"] = recs;
    const std::string meta_str = meta.dump();

    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("save_checkpoint: cannot open " + path);
    os.write(detail::kCkptMagic, sizeof(detail::kCkptMagic));
    const std::uint32_t version = detail::kCkptVersion;
    os.write(reinterpret_cast<const char*>(&version), sizeof(version));
    const std::uint64_t len = meta_str.size();
    os.write(reinterpret_cast<const char*>(&len), sizeof(len));
    os.write(meta_str.data(), std::streamsize(meta_str.size()));
    for (const auto& box : c.chain) {
        for (const auto& l : box.layers) {
            detail::write_doubles(os, l.W);
            detail::write_doubles(os, l.eps_w);
            detail::write_doubles(os, l.b);
            detail::write_doubles(os, l.eps_b);
        }
    }
    for (const auto& h : c.heads) {
        detail::write_doubles(os, h.W);
        detail::write_doubles(os, h.b);
    }
    if (!os) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("load_checkpoint: cannot open " + path);
    char magic[8];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, detail::kCkptMagic, sizeof(magic)) != 0)
        throw std::runtime_error("load_checkpoint: not a checkpoint file");
    std::uint32_t version = 0;
    is.read(reinterpret_cast<char*>(&version), sizeof(version));
    if (!is || version != detail::kCkptVersion)
        throw std::runtime_error("load_checkpoint: unsupported version " +
                                 std::to_string(version));
    std::uint64_t len = 0;
    is.read(reinterpret_cast<char*>(&len), sizeof(len));
    if (!is) throw std::runtime_error("load_checkpoint: truncated header");
    std::string meta_str(len, '\0');
    is.read(meta_str.data(), std::streamsize(len));
    if (!is) throw std::runtime_error("load_checkpoint: truncated metadata");
    nlohmann::json meta = nlohmann::json::parse(meta_str, nullptr, false);
    if (meta.is_discarded() || meta.value("format", "") != "ivnet-checkpoint")
        throw std::runtime_error("load_checkpoint: bad metadata");

    Checkpoint c;
    c.desc = detail::descriptor_from_json(meta.at("descriptor"));
    c.desc.validate();
    c.seed = meta.at("seed").get<std::uint64_t>();
    c.nu_reset = meta.at("nu_reset").get<double>();
    for (const auto& r : meta.at("records")) {
        GuaranteeRecord g;
        g.task = r.at("task").get<std::size_t>();
        g.wc_acc = r.at("wc_acc").get<double>();
        g.wc_loss = r.at("wc_loss").get<double>();
        g.train_acc = r.at("train_acc").get<double>();
        g.acc_thresh = r.at("acc_thresh").get<double>();
        g.region_size = r.at("region_size").get<double>();
        g.threshold_met = r.at("threshold_met").get<bool>();
        c.records.push_back(g);
    }
    const NetPlan plan = plan_of(c.desc);
    const std::size_t chain_len = meta.at("chain_len").get<std::size_t>();
    const std::size_t head_count = meta.at("head_count").get<std::size_t>();
    for (std::size_t i = 0; i < chain_len; ++i) {
        ParamBox box;
        for (const auto& [wshape, bshape] : plan.param_shapes) {
            LayerBox l;
            l.W = detail::read_doubles(is, wshape);
            l.eps_w = detail::read_doubles(is, wshape);
            l.b = detail::read_doubles(is, bshape);
            l.eps_b = detail::read_doubles(is, bshape);
            box.layers.push_back(std::move(l));
        }
        box.validate();
        c.chain.push_back(std::move(box));
    }
    for (std::size_t i = 0; i < head_count; ++i) {
        HeadParams h;
        h.W = detail::read_doubles(is, Shape{c.desc.head_out(), plan.body_out});
        h.b = detail::read_doubles(is, Shape{c.desc.head_out()});
        c.heads.push_back(std::move(h));
    }
    is.peek();
    if (!is.eof()) throw std::runtime_error("load_checkpoint: trailing data");
    if (c.chain.empty()) throw std::runtime_error("load_checkpoint: empty chain");
    if (c.records.size() + 1 != c.chain.size())
        throw std::runtime_error("load_checkpoint: record/chain count mismatch");
    return c;
}

inline Checkpoint make_checkpoint(const SequenceResult& res, std::uint64_t seed,
                                  double nu_reset) {
    Checkpoint c;
    c.desc = res.net.desc;
    c.seed = seed;
    c.nu_reset = nu_reset;
    c.records = res.records;
    c.chain = res.chain;
    c.heads = res.net.heads;
    return c;
}

/// Rebuilds a network positioned at the checkpoint's final box, ready for
/// evaluation or further training.
inline Network network_from_checkpoint(const Checkpoint& c) {
    Network net;
    net.desc = c.desc;
    net.plan = plan_of(c.desc);
    net.state = initial_state(c.final_box(), c.nu_reset);
    net.heads = c.heads;
    return net;
}

}  // namespace ivnet
