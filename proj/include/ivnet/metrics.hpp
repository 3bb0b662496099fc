#pragma once

#include <fstream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace ivnet {

struct MetricsRecord {
    std::size_t task{0};
    std::string phase;
    std::size_t epoch{0};
    double train_acc{0};
    double wc_acc{0};
    double wc_loss{0};
    double region_size{0};
    std::vector<double> eval_acc_per_seen_task;
};

inline nlohmann::json to_json(const MetricsRecord& r) {
    return nlohmann::json{{"task", r.task},
                          {"phase", r.phase},
                          {"epoch", r.epoch},
                          {"train_acc", r.train_acc},
                          {"wc_acc", r.wc_acc},
                          {"wc_loss", r.wc_loss},
                          {"region_size", r.region_size},
                          {"eval_acc_per_seen_task", r.eval_acc_per_seen_task}};
}

/// JSON-lines metrics log, one record per line, flushed per line so partial
/// runs stay readable. Optionally echoes a terse line to another stream.
class MetricsWriter {
  public:
    MetricsWriter() = default;
    explicit MetricsWriter(const std::string& path) : out_(path, std::ios::trunc) {
        if (!out_) throw std::runtime_error("MetricsWriter: cannot open " + path);
    }

    void set_echo(std::ostream* echo) { echo_ = echo; }

    void write(const MetricsRecord& r) {
        if (out_.is_open()) {
            out_ << to_json(r).dump() << '\n';
            out_.flush();
        }
        if (echo_) {
            (*echo_) << "task " << r.task << " " << r.phase << " epoch " << r.epoch
                     << "  acc " << r.train_acc << "  wc_acc " << r.wc_acc << "  wc_loss "
                     << r.wc_loss << "  region " << r.region_size << std::endl;
        }
    }

    bool open() const { return out_.is_open(); }

  private:
    std::ofstream out_;
    std::ostream* echo_{nullptr};
};

/// Reads a JSONL metrics file, skipping a trailing partial line.
inline std::vector<MetricsRecord> read_metrics(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_metrics: cannot open " + path);
    std::vector<MetricsRecord> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded()) continue;
        MetricsRecord r;
        r.task = j.at("task").get<std::size_t>();
        r.phase = j.at("phase").get<std::string>();
        r.epoch = j.at("epoch").get<std::size_t>();
        r.train_acc = j.at("train_acc").get<double>();
        r.wc_acc = j.at("wc_acc").get<double>();
        r.wc_loss = j.at("wc_loss").get<double>();
        r.region_size = j.at("region_size").get<double>();
        r.eval_acc_per_seen_task = j.at("eval_acc_per_seen_task").get<std::vector<double>>();
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace ivnet
