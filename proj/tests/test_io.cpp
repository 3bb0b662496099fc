#include <catch2/catch_amalgamated.hpp>

#include <fstream>
#include <string>
#include <vector>

#include "helpers.hpp"
#include "ivnet/checkpoint.hpp"
#include "ivnet/config.hpp"
#include "ivnet/metrics.hpp"
#include "ivnet/sequence.hpp"
#include "ivnet/stream.hpp"

using namespace ivnet;

namespace {

std::vector<char> slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    REQUIRE(f);
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

void spit(const std::string& path, const std::vector<char>& bytes) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    f.write(bytes.data(), std::streamsize(bytes.size()));
}

SequenceResult tiny_run() {
    auto [train, test] = ivtest::blob_pair(4, 40, 20, 5, 8.0, 23);
    auto desc = ArchitectureDescriptor::mlp(5, {8}, Scenario::IncrementalTask, 2, 2, 4);
    TaskStream stream = build_stream(train, test, Scenario::IncrementalTask, 2, 2);
    TrainConfig cfg;
    cfg.center_epochs = 2;
    cfg.radii_epochs = 2;
    cfg.batch_size = 32;
    cfg.lr_center = 0.3;
    cfg.lr_radii = 500.0;
    cfg.acc_thresh = 0.5;
    cfg.running_window = 5;
    cfg.seed = 23;
    return run_sequence(desc, stream, train, test, cfg);
}

}  // namespace

TEST_CASE("checkpoint round-trips a trained sequence") {
    const std::string dir = ivtest::temp_dir("ckpt");
    const std::string path = dir + "/run.ckpt";

    SequenceResult res = tiny_run();
    Checkpoint c = make_checkpoint(res, 23, 5.0);
    save_checkpoint(path, c);
    Checkpoint back = load_checkpoint(path);

    CHECK(back.seed == 23);
    CHECK(back.nu_reset == 5.0);
    CHECK(back.desc.input_dim == 5);
    CHECK(back.desc.scenario == Scenario::IncrementalTask);
    CHECK(back.desc.n_tasks == 2);
    CHECK(back.desc.classes_per_task == 2);
    CHECK(back.desc.n_classes == 4);
    REQUIRE(back.desc.body.size() == 1);
    CHECK(back.desc.body[0].kind == LayerSpec::Kind::Dense);
    CHECK(back.desc.body[0].out == 8);

    REQUIRE(back.records.size() == res.records.size());
    for (std::size_t k = 0; k < back.records.size(); ++k) {
        CHECK(back.records[k].task == res.records[k].task);
        CHECK(back.records[k].wc_acc == res.records[k].wc_acc);
        CHECK(back.records[k].wc_loss == res.records[k].wc_loss);
        CHECK(back.records[k].train_acc == res.records[k].train_acc);
        CHECK(back.records[k].acc_thresh == res.records[k].acc_thresh);
        CHECK(back.records[k].region_size == res.records[k].region_size);
        CHECK(back.records[k].threshold_met == res.records[k].threshold_met);
    }

    REQUIRE(back.chain.size() == res.chain.size());
    for (std::size_t i = 0; i < back.chain.size(); ++i) {
        REQUIRE(back.chain[i].layers.size() == res.chain[i].layers.size());
        for (std::size_t l = 0; l < back.chain[i].layers.size(); ++l) {
            CHECK(back.chain[i].layers[l].W.data == res.chain[i].layers[l].W.data);
            CHECK(back.chain[i].layers[l].eps_w.data == res.chain[i].layers[l].eps_w.data);
            CHECK(back.chain[i].layers[l].b.data == res.chain[i].layers[l].b.data);
            CHECK(back.chain[i].layers[l].eps_b.data == res.chain[i].layers[l].eps_b.data);
        }
    }

    REQUIRE(back.heads.size() == res.net.heads.size());
    for (std::size_t h = 0; h < back.heads.size(); ++h) {
        CHECK(back.heads[h].W.data == res.net.heads[h].W.data);
        CHECK(back.heads[h].b.data == res.net.heads[h].b.data);
    }

    Network net = network_from_checkpoint(back);
    REQUIRE(net.state.frozen.layers.size() == back.final_box().layers.size());
    for (std::size_t l = 0; l < net.state.frozen.layers.size(); ++l)
        CHECK(net.state.frozen.layers[l].W.data == back.final_box().layers[l].W.data);
    CHECK(net.heads.size() == back.heads.size());
}

TEST_CASE("checkpoint loader rejects corrupted files") {
    const std::string dir = ivtest::temp_dir("ckptbad");
    const std::string path = dir + "/run.ckpt";
    SequenceResult res = tiny_run();
    save_checkpoint(path, make_checkpoint(res, 23, 5.0));
    const std::vector<char> good = slurp(path);

    SECTION("missing file") {
        CHECK_THROWS_WITH(load_checkpoint(dir + "/absent.ckpt"),
                          Catch::Matchers::ContainsSubstring("cannot open"));
    }
    SECTION("bad magic") {
        auto bytes = good;
        bytes[0] = 'X';
        spit(path, bytes);
        CHECK_THROWS_WITH(load_checkpoint(path),
                          Catch::Matchers::ContainsSubstring("not a checkpoint"));
    }
    SECTION("unsupported version") {
        auto bytes = good;
        bytes[8] = 99;
        spit(path, bytes);
        CHECK_THROWS_WITH(load_checkpoint(path),
                          Catch::Matchers::ContainsSubstring("unsupported version"));
    }
    SECTION("truncated metadata") {
        auto bytes = good;
        bytes.resize(24);
        spit(path, bytes);
        CHECK_THROWS_WITH(load_checkpoint(path),
                          Catch::Matchers::ContainsSubstring("truncated metadata"));
    }
    SECTION("truncated parameters") {
        auto bytes = good;
        bytes.resize(bytes.size() - 16);
        spit(path, bytes);
        CHECK_THROWS_WITH(load_checkpoint(path),
                          Catch::Matchers::ContainsSubstring("truncated parameter"));
    }
    SECTION("trailing bytes") {
        auto bytes = good;
        bytes.push_back(0);
        spit(path, bytes);
        CHECK_THROWS_WITH(load_checkpoint(path),
                          Catch::Matchers::ContainsSubstring("trailing data"));
    }
}

TEST_CASE("checkpoint writer validates shape agreement") {
    const std::string dir = ivtest::temp_dir("ckptshape");
    SequenceResult res = tiny_run();

    Checkpoint c = make_checkpoint(res, 23, 5.0);
    c.chain.back().layers.pop_back();
    CHECK_THROWS_AS(save_checkpoint(dir + "/bad.ckpt", c), std::invalid_argument);

    Checkpoint neg = make_checkpoint(res, 23, 5.0);
    neg.chain[0].layers[0].eps_w[0] = -1.0;
    CHECK_THROWS_AS(save_checkpoint(dir + "/neg.ckpt", neg), std::invalid_argument);
}

TEST_CASE("config text parsing") {
    auto kv = parse_config_text("# comment\n"
                                "  seed = 4   # trailing comment\n"
                                "\n"
                                "hidden=100,100\n"
                                "seed=9\n");
    CHECK(kv.size() == 2);
    CHECK(kv["seed"] == "9");
    CHECK(kv["hidden"] == "100,100");

    CHECK_THROWS_AS(parse_config_text("novalue\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("=5\n"), ConfigError);

    apply_overrides(kv, {"seed=12", "lr_center=0.5"});
    CHECK(kv["seed"] == "12");
    CHECK(kv["lr_center"] == "0.5");
    CHECK_THROWS_AS(apply_overrides(kv, {"broken"}), ConfigError);
}

TEST_CASE("run config defaults match the reference recipe") {
    RunConfig c = run_config_from({});
    CHECK(c.scenario == Scenario::IncrementalTask);
    CHECK(c.dataset == "mnist");
    CHECK(c.hidden == std::vector<std::size_t>{400, 400});
    CHECK(c.n_tasks == 5);
    CHECK(c.classes_per_task == 2);
    CHECK(c.n_classes() == 10);
    CHECK(c.train.center_epochs == 30);
    CHECK(c.train.radii_epochs == 30);
    CHECK(c.train.batch_size == 128);
    CHECK(c.train.lr_center == 1.0);
    CHECK(c.train.lr_radii == 100.0);
    CHECK(c.train.acc_thresh == 0.9);
    CHECK(c.train.initial_radius == 1.0);
    CHECK(c.train.running_window == 10);
    CHECK(c.train.nu_reset == 5.0);
    CHECK(c.train.seed == 1);
    CHECK(c.method == "interval");
    CHECK(c.verify_samples == 500);
    CHECK(c.verify_eval_cap == 2048);
}

TEST_CASE("run config rejects unknown keys and bad values") {
    CHECK_THROWS_WITH(run_config_from({{"typo_key", "1"}}),
                      Catch::Matchers::ContainsSubstring("unknown config key"));
    CHECK_THROWS_AS(run_config_from({{"seed", "abc"}}), ConfigError);
    CHECK_THROWS_AS(run_config_from({{"seed", "1.5"}}), ConfigError);
    CHECK_THROWS_AS(run_config_from({{"lr_center", "fast"}}), ConfigError);
    CHECK_THROWS_AS(run_config_from({{"scenario", "sideways"}}), ConfigError);
    CHECK_THROWS_AS(run_config_from({{"activation", "gelu"}}), ConfigError);
    CHECK_THROWS_AS(run_config_from({{"dataset", "imagenet"}}), ConfigError);
    CHECK_THROWS_AS(run_config_from({{"method", "magic"}}), ConfigError);
    CHECK_THROWS_AS(run_config_from({{"n_tasks", "0"}}), ConfigError);
    CHECK_THROWS_AS(run_config_from({{"acc_thresh", "1.5"}}), ConfigError);
    CHECK_THROWS_AS(run_config_from({{"batch_size", "0"}}), ConfigError);
    CHECK_THROWS_AS(run_config_from({{"dataset", "cifar10"}}), ConfigError);
    CHECK_THROWS_AS(run_config_from({{"experimental_cifar", "maybe"}}), ConfigError);

    RunConfig ok = run_config_from({{"dataset", "cifar10"}, {"experimental_cifar", "1"}});
    CHECK(ok.experimental_cifar);

    RunConfig blobs = run_config_from({{"dataset", "blobs"},
                                       {"hidden", "32, 16"},
                                       {"scenario", "incremental_class"},
                                       {"blob_separation", "8"}});
    CHECK(blobs.hidden == std::vector<std::size_t>{32, 16});
    CHECK(blobs.scenario == Scenario::IncrementalClass);
    CHECK(blobs.blob_separation == 8.0);
}

TEST_CASE("config files load with overrides") {
    const std::string dir = ivtest::temp_dir("cfg");
    {
        std::ofstream f(dir + "/a.cfg");
        f << "dataset = blobs\n"
          << "n_tasks = 3\n"
          << "seed = 4\n";
    }
    RunConfig c = load_run_config(dir + "/a.cfg", {"seed=11", "lr_radii=250"});
    CHECK(c.dataset == "blobs");
    CHECK(c.n_tasks == 3);
    CHECK(c.train.seed == 11);
    CHECK(c.train.lr_radii == 250.0);

    CHECK_THROWS_AS(load_run_config(dir + "/missing.cfg", {}), ConfigError);

    ArchitectureDescriptor d = descriptor_from(c, 16);
    CHECK(d.input_dim == 16);
    CHECK(d.n_tasks == 3);
    CHECK(d.head_count() == 3);
}

TEST_CASE("metrics log round-trips and survives a torn tail") {
    const std::string dir = ivtest::temp_dir("metrics");
    const std::string path = dir + "/m.jsonl";

    std::vector<MetricsRecord> recs;
    for (std::size_t i = 0; i < 3; ++i) {
        MetricsRecord r;
        r.task = i;
        r.phase = i % 2 ? "radii" : "center";
        r.epoch = 10 + i;
        r.train_acc = 0.5 + 0.125 * double(i);
        r.wc_acc = 0.25 * double(i);
        r.wc_loss = 1.5 - 0.25 * double(i);
        r.region_size = 100.0 - double(i);
        r.eval_acc_per_seen_task = std::vector<double>(i + 1, 0.75);
        recs.push_back(r);
    }
    {
        MetricsWriter w(path);
        REQUIRE(w.open());
        for (const auto& r : recs) w.write(r);
    }

    auto back = read_metrics(path);
    REQUIRE(back.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(back[i].task == recs[i].task);
        CHECK(back[i].phase == recs[i].phase);
        CHECK(back[i].epoch == recs[i].epoch);
        CHECK(back[i].train_acc == recs[i].train_acc);
        CHECK(back[i].wc_acc == recs[i].wc_acc);
        CHECK(back[i].wc_loss == recs[i].wc_loss);
        CHECK(back[i].region_size == recs[i].region_size);
        CHECK(back[i].eval_acc_per_seen_task == recs[i].eval_acc_per_seen_task);
    }

    {
        std::ofstream f(path, std::ios::app);
        f << "{\"task\": 9, \"pha";
    }
    CHECK(read_metrics(path).size() == 3);

    CHECK_THROWS_AS(read_metrics(dir + "/none.jsonl"), std::runtime_error);
    CHECK_THROWS_AS(MetricsWriter(dir + "/no/such/dir/m.jsonl"), std::runtime_error);

    MetricsWriter closed;
    CHECK_FALSE(closed.open());
    closed.write(recs[0]);
}
