#include <catch2/catch_amalgamated.hpp>

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "helpers.hpp"
#include "ivnet/data.hpp"

using namespace ivnet;

namespace {

void app32(std::vector<unsigned char>& b, std::uint32_t v) {
    b.push_back((unsigned char)(v >> 24));
    b.push_back((unsigned char)(v >> 16));
    b.push_back((unsigned char)(v >> 8));
    b.push_back((unsigned char)v);
}

void write_bytes(const std::string& path, const std::vector<unsigned char>& b) {
    std::ofstream f(path, std::ios::binary);
    f.write(reinterpret_cast<const char*>(b.data()), std::streamsize(b.size()));
}

struct IdxPair {
    std::string images, labels;
};

IdxPair tiny_idx(const std::string& dir) {
    std::vector<unsigned char> img;
    app32(img, 0x00000803u);
    app32(img, 2);
    app32(img, 2);
    app32(img, 2);
    for (unsigned char p : {0, 128, 255, 64, 10, 20, 30, 40}) img.push_back(p);

    std::vector<unsigned char> lab;
    app32(lab, 0x00000801u);
    app32(lab, 2);
    lab.push_back(3);
    lab.push_back(1);

    IdxPair p{dir + "/img.idx", dir + "/lab.idx"};
    write_bytes(p.images, img);
    write_bytes(p.labels, lab);
    return p;
}

}  // namespace

TEST_CASE("idx loader parses headers and scales pixels") {
    const std::string dir = ivtest::temp_dir("idx");
    IdxPair p = tiny_idx(dir);

    Dataset ds = load_idx(p.images, p.labels, "test");
    CHECK(ds.size() == 2);
    CHECK(ds.dim() == 4);
    CHECK(ds.split == "test");
    CHECK(ds.n_classes == 4);
    REQUIRE(ds.labels == std::vector<int>{3, 1});

    const double scale = 1.0 / 255.0;
    const unsigned char px[] = {0, 128, 255, 64, 10, 20, 30, 40};
    for (std::size_t i = 0; i < 8; ++i) CHECK(ds.features[i] == double(px[i]) * scale);
    CHECK(ds.features[2] == 1.0);
    ds.validate();
}

TEST_CASE("idx loader rejects malformed files") {
    const std::string dir = ivtest::temp_dir("idxbad");
    IdxPair p = tiny_idx(dir);

    SECTION("missing file") {
        CHECK_THROWS_AS(load_idx(dir + "/nope.idx", p.labels), DataError);
    }
    SECTION("wrong image magic") {
        std::vector<unsigned char> img;
        app32(img, 0x00000802u);
        app32(img, 2);
        app32(img, 2);
        app32(img, 2);
        img.resize(img.size() + 8, 0);
        write_bytes(p.images, img);
        CHECK_THROWS_AS(load_idx(p.images, p.labels), DataError);
    }
    SECTION("wrong label magic") {
        std::vector<unsigned char> lab;
        app32(lab, 0x00000803u);
        app32(lab, 2);
        lab.push_back(0);
        lab.push_back(1);
        write_bytes(p.labels, lab);
        CHECK_THROWS_AS(load_idx(p.images, p.labels), DataError);
    }
    SECTION("image/label count mismatch") {
        std::vector<unsigned char> lab;
        app32(lab, 0x00000801u);
        app32(lab, 3);
        lab.push_back(0);
        lab.push_back(1);
        lab.push_back(0);
        write_bytes(p.labels, lab);
        CHECK_THROWS_AS(load_idx(p.images, p.labels), DataError);
    }
    SECTION("truncated pixel payload") {
        std::vector<unsigned char> img;
        app32(img, 0x00000803u);
        app32(img, 2);
        app32(img, 2);
        app32(img, 2);
        img.resize(img.size() + 7, 0);
        write_bytes(p.images, img);
        CHECK_THROWS_AS(load_idx(p.images, p.labels), DataError);
    }
    SECTION("truncated label payload") {
        std::vector<unsigned char> lab;
        app32(lab, 0x00000801u);
        app32(lab, 2);
        lab.push_back(0);
        write_bytes(p.labels, lab);
        CHECK_THROWS_AS(load_idx(p.images, p.labels), DataError);
    }
}

TEST_CASE("idx write and reload round-trips up to byte quantization") {
    const std::string dir = ivtest::temp_dir("idxrt");
    Dataset ds = synth_blobs(3, 20, 5, 6.0, 9);

    write_idx(ds, dir + "/i.idx", dir + "/l.idx");
    Dataset back = load_idx(dir + "/i.idx", dir + "/l.idx");

    REQUIRE(back.size() == ds.size());
    REQUIRE(back.dim() == ds.dim());
    CHECK(back.labels == ds.labels);
    CHECK(back.n_classes == ds.n_classes);

    const double scale = 1.0 / 255.0;
    for (std::size_t i = 0; i < ds.features.data.size(); ++i) {
        const long q = std::lround(ds.features[i] * 255.0);
        CHECK(back.features[i] == double(q) * scale);
    }

    SECTION("explicit image geometry") {
        write_idx(ds, dir + "/i5.idx", dir + "/l5.idx", 5, 1);
        Dataset again = load_idx(dir + "/i5.idx", dir + "/l5.idx");
        CHECK(again.features.data == back.features.data);
    }
    SECTION("geometry must cover the feature dim") {
        CHECK_THROWS_AS(write_idx(ds, dir + "/x.idx", dir + "/y.idx", 2, 2), DataError);
    }
}

TEST_CASE("synthetic blobs are deterministic and class-contiguous") {
    Dataset a = synth_blobs(4, 15, 3, 5.0, 42);
    Dataset b = synth_blobs(4, 15, 3, 5.0, 42);
    Dataset c = synth_blobs(4, 15, 3, 5.0, 43);

    CHECK(a.features.data == b.features.data);
    CHECK(a.labels == b.labels);
    CHECK(a.features.data != c.features.data);

    REQUIRE(a.size() == 60);
    for (std::size_t r = 0; r < a.size(); ++r) CHECK(a.labels[r] == int(r / 15));
    a.validate();

    CHECK_THROWS_AS(synth_blobs(0, 5, 2, 5.0, 1), DataError);
    CHECK_THROWS_AS(synth_blobs(2, 0, 2, 5.0, 1), DataError);
    CHECK_THROWS_AS(synth_blobs(2, 5, 0, 5.0, 1), DataError);
    CHECK_THROWS_AS(synth_blobs(2, 5, 2, 0.0, 1), DataError);
}

TEST_CASE("well-separated blobs are nearest-centroid separable") {
    Dataset ds = synth_blobs(2, 100, 2, 10.0, 5);
    std::vector<std::vector<double>> mean(2, std::vector<double>(2, 0.0));
    std::vector<double> cnt(2, 0.0);
    for (std::size_t r = 0; r < ds.size(); ++r) {
        const int y = ds.labels[r];
        cnt[y] += 1.0;
        for (std::size_t k = 0; k < 2; ++k) mean[y][k] += ds.features[r * 2 + k];
    }
    for (int y = 0; y < 2; ++y)
        for (std::size_t k = 0; k < 2; ++k) mean[y][k] /= cnt[y];

    std::size_t hits = 0;
    for (std::size_t r = 0; r < ds.size(); ++r) {
        double d0 = 0.0, d1 = 0.0;
        for (std::size_t k = 0; k < 2; ++k) {
            const double v = ds.features[r * 2 + k];
            d0 += (v - mean[0][k]) * (v - mean[0][k]);
            d1 += (v - mean[1][k]) * (v - mean[1][k]);
        }
        const int pred = d0 <= d1 ? 0 : 1;
        if (pred == ds.labels[r]) ++hits;
    }
    CHECK(hits == ds.size());
}

TEST_CASE("blob train/test splits share centers but not rows") {
    auto [train, test] = ivtest::blob_pair(3, 12, 6, 4, 6.0, 77);
    CHECK(train.size() == 36);
    CHECK(test.size() == 18);
    CHECK(train.split == "train");
    CHECK(test.split == "test");
    train.validate();
    test.validate();

    // Same generation stream: the train split of the pair equals the prefix
    // rows of the underlying per-class blocks.
    Dataset all = synth_blobs(3, 18, 4, 6.0, 77, "all");
    for (std::size_t cls = 0; cls < 3; ++cls)
        for (std::size_t i = 0; i < 12; ++i)
            for (std::size_t k = 0; k < 4; ++k)
                CHECK(train.features[(cls * 12 + i) * 4 + k] ==
                      all.features[(cls * 18 + i) * 4 + k]);
    for (std::size_t cls = 0; cls < 3; ++cls)
        for (std::size_t i = 0; i < 6; ++i)
            for (std::size_t k = 0; k < 4; ++k)
                CHECK(test.features[(cls * 6 + i) * 4 + k] ==
                      all.features[(cls * 18 + 12 + i) * 4 + k]);
}

TEST_CASE("cifar batches load with labels and scaling") {
    const std::string dir = ivtest::temp_dir("cifar");
    auto record = [](unsigned char label, unsigned char fill) {
        std::vector<unsigned char> r(1 + 3072, fill);
        r[0] = label;
        return r;
    };

    std::vector<unsigned char> b1 = record(7, 10);
    auto r2 = record(2, 200);
    b1.insert(b1.end(), r2.begin(), r2.end());
    write_bytes(dir + "/batch1.bin", b1);
    write_bytes(dir + "/batch2.bin", record(0, 255));

    Dataset ds = load_cifar10({dir + "/batch1.bin", dir + "/batch2.bin"}, "train");
    REQUIRE(ds.size() == 3);
    CHECK(ds.dim() == 3072);
    CHECK(ds.labels == std::vector<int>{7, 2, 0});
    CHECK(ds.n_classes == 10);
    const double scale = 1.0 / 255.0;
    CHECK(ds.features[0] == 10.0 * scale);
    CHECK(ds.features[3072] == 200.0 * scale);
    CHECK(ds.features[2 * 3072] == 1.0);
    ds.validate();

    SECTION("partial record") {
        b1.pop_back();
        write_bytes(dir + "/bad.bin", b1);
        CHECK_THROWS_AS(load_cifar10({dir + "/bad.bin"}), DataError);
    }
    SECTION("label out of range") {
        write_bytes(dir + "/badlab.bin", record(12, 1));
        CHECK_THROWS_AS(load_cifar10({dir + "/badlab.bin"}), DataError);
    }
    SECTION("no records") {
        write_bytes(dir + "/empty.bin", {});
        CHECK_THROWS_AS(load_cifar10({dir + "/empty.bin"}), DataError);
        CHECK_THROWS_AS(load_cifar10({}), DataError);
    }
}
