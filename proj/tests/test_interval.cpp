#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "ivnet/interval.hpp"
#include "helpers.hpp"

using namespace ivnet;
using ivtest::corner_dot;
using ivtest::random_interval;
using ivtest::sample_within;

TEST_CASE("interval construction enforces ordering and finiteness") {
    CHECK_THROWS_AS(Interval(2.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(Interval(0.0, std::nan("")), std::invalid_argument);
    CHECK_THROWS_AS(Interval(-INFINITY, 0.0), std::invalid_argument);
    const Interval p = Interval::point(3.0);
    CHECK(p.lower == 3.0);
    CHECK(p.upper == 3.0);
    CHECK(p.width() == 0.0);
    CHECK(Interval(1.0, 3.0).mid() == 2.0);
    CHECK(Interval(1.0, 3.0).contains(2.5));
    CHECK_FALSE(Interval(1.0, 3.0).contains(3.5));

    Tensor lo({2}), hi({2});
    lo[0] = 0.0; lo[1] = 5.0;
    hi[0] = 1.0; hi[1] = 4.0;
    CHECK_THROWS_AS(IntervalTensor(lo, hi), std::invalid_argument);
    Tensor other({3});
    CHECK_THROWS_AS(IntervalTensor(lo, other), std::invalid_argument);
}

TEST_CASE("iv_add endpoint arithmetic") {
    const Interval r = iv_add(Interval(1, 2), Interval(3, 5));
    CHECK(r.lower == 4.0);
    CHECK(r.upper == 7.0);

    const Interval id = iv_add(Interval(0, 0), Interval(-2.5, 3.25));
    CHECK(id.lower == -2.5);
    CHECK(id.upper == 3.25);

    const Interval m = iv_add(Interval(-1, 1), Interval(-2, 3));
    CHECK(m.lower == -3.0);
    CHECK(m.upper == 4.0);
}

TEST_CASE("iv_mul corner hull") {
    const Interval a = iv_mul(Interval(1, 2), Interval(-3, 4));
    CHECK(a.lower == -6.0);
    CHECK(a.upper == 8.0);

    const Interval z = iv_mul(Interval(0, 0), Interval(-9, 9));
    CHECK(z.lower == 0.0);
    CHECK(z.upper == 0.0);

    const Interval s = iv_mul(Interval(-1, 1), Interval(-1, 1));
    CHECK(s.lower == -1.0);
    CHECK(s.upper == 1.0);
}

TEST_CASE("iv_add and iv_mul are sound under sampling") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 1000; ++i) {
        const IntervalTensor a = random_interval({1}, rng, 2.0, 1.5);
        const IntervalTensor b = random_interval({1}, rng, 2.0, 1.5);
        const Interval ia = a.at(0), ib = b.at(0);
        const double xa = ia.lower + u(rng) * ia.width();
        const double xb = ib.lower + u(rng) * ib.width();
        CHECK(iv_add(ia, ib).contains(xa + xb));
        CHECK(iv_mul(ia, ib).contains(xa * xb));
    }
}

TEST_CASE("iv_dot on degenerate and single-term inputs") {
    Tensor wl({2}), wu({2}), xl({2}), xu({2});
    wl[0] = 1; wl[1] = 2; wu = wl;
    xl[0] = 1; xl[1] = 1; xu = xl;
    const Interval d = iv_dot(IntervalTensor(wl, wu), IntervalTensor(xl, xu));
    CHECK(d.lower == 3.0);
    CHECK(d.upper == 3.0);

    Tensor sl({1}), su({1}), tl({1}), tu({1});
    sl[0] = 0; su[0] = 1;
    tl[0] = -1; tu[0] = 1;
    const Interval s = iv_dot(IntervalTensor(sl, su), IntervalTensor(tl, tu));
    CHECK(s.lower == -1.0);
    CHECK(s.upper == 1.0);
}

TEST_CASE("iv_dot matches exhaustive corner enumeration bit-exactly") {
    std::mt19937_64 rng(17);
    for (int rep = 0; rep < 50; ++rep) {
        const IntervalTensor w = random_interval({5}, rng);
        const IntervalTensor x = random_interval({5}, rng);
        const Interval got = iv_dot(w, x);
        const Interval want = corner_dot(w, x);
        CHECK(got.lower == want.lower);
        CHECK(got.upper == want.upper);
    }
}

TEST_CASE("iv_dot rejects mismatched operands") {
    std::mt19937_64 rng(3);
    CHECK_THROWS_AS(iv_dot(random_interval({3}, rng), random_interval({4}, rng)),
                    std::invalid_argument);
    CHECK_THROWS_AS(iv_dot(random_interval({2, 2}, rng), random_interval({4}, rng)),
                    std::invalid_argument);
}

TEST_CASE("iv_affine single corner pair") {
    Tensor Wl({1, 1}), Wu({1, 1}), bl({1}), bu({1}), xl({1}), xu({1});
    Wl[0] = 0.5; Wu[0] = 1.5;
    bl[0] = 0.0; bu[0] = 0.0;
    xl[0] = 2.0; xu[0] = 2.0;
    const IntervalTensor y =
        iv_affine(IntervalTensor(Wl, Wu), IntervalTensor(bl, bu), IntervalTensor(xl, xu));
    CHECK(y.lower[0] == 1.0);
    CHECK(y.upper[0] == 3.0);
}

TEST_CASE("iv_affine degenerate collapse equals the plain affine map") {
    std::mt19937_64 rng(23);
    const Tensor W = ivtest::random_tensor({4, 3}, rng);
    const Tensor b = ivtest::random_tensor({4}, rng);
    const Tensor x = ivtest::random_tensor({3}, rng);
    const IntervalTensor y =
        iv_affine(IntervalTensor::point(W), IntervalTensor::point(b), IntervalTensor::point(x));
    for (std::size_t i = 0; i < 4; ++i) {
        double want = 0.0;
        for (std::size_t k = 0; k < 3; ++k) want += W.at(i, k) * x[k];
        want += b[i];
        CHECK(y.lower[i] == want);
        CHECK(y.lower[i] == y.upper[i]);
    }
}

TEST_CASE("iv_affine matches per-output corner enumeration") {
    std::mt19937_64 rng(29);
    for (int rep = 0; rep < 20; ++rep) {
        const IntervalTensor W = random_interval({3, 4}, rng);
        const IntervalTensor b = random_interval({3}, rng);
        const IntervalTensor x = random_interval({4}, rng);
        const IntervalTensor y = iv_affine(W, b, x);
        for (std::size_t i = 0; i < 3; ++i) {
            IntervalTensor row(Tensor({4}), Tensor({4}));
            for (std::size_t k = 0; k < 4; ++k) {
                row.lower[k] = W.lower[i * 4 + k];
                row.upper[k] = W.upper[i * 4 + k];
            }
            const Interval want = corner_dot(row, x);
            CHECK(y.lower[i] == want.lower + b.lower[i]);
            CHECK(y.upper[i] == want.upper + b.upper[i]);
        }
    }
}

TEST_CASE("iv_affine bounds hold for sampled operands") {
    std::mt19937_64 rng(31);
    for (int rep = 0; rep < 100; ++rep) {
        const IntervalTensor W = random_interval({4, 6}, rng);
        const IntervalTensor b = random_interval({4}, rng);
        const IntervalTensor x = random_interval({6}, rng);
        const IntervalTensor y = iv_affine(W, b, x);
        for (int s = 0; s < 10; ++s) {
            const Tensor Ws = sample_within(W, rng);
            const Tensor bs = sample_within(b, rng);
            const Tensor xs = sample_within(x, rng);
            for (std::size_t i = 0; i < 4; ++i) {
                double v = 0.0;
                for (std::size_t k = 0; k < 6; ++k) v += Ws.at(i, k) * xs[k];
                v += bs[i];
                CHECK(y.lower[i] <= v);
                CHECK(v <= y.upper[i]);
            }
        }
    }
}

namespace {

Tensor plain_conv(const Tensor& W, const Tensor& b, const Tensor& x, std::size_t stride,
                  std::size_t pad) {
    const std::size_t O = W.shape[0], C = W.shape[1], kh = W.shape[2], kw = W.shape[3];
    const std::size_t N = x.shape[0], H = x.shape[2], Wd = x.shape[3];
    const std::size_t Ho = (H + 2 * pad - kh) / stride + 1;
    const std::size_t Wo = (Wd + 2 * pad - kw) / stride + 1;
    Tensor y({N, O, Ho, Wo});
    std::size_t pos = 0;
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t o = 0; o < O; ++o)
            for (std::size_t oi = 0; oi < Ho; ++oi)
                for (std::size_t oj = 0; oj < Wo; ++oj, ++pos) {
                    double acc = 0.0;
                    for (std::size_t c = 0; c < C; ++c)
                        for (std::size_t ki = 0; ki < kh; ++ki)
                            for (std::size_t kj = 0; kj < kw; ++kj) {
                                const long ii = long(oi * stride + ki) - long(pad);
                                const long jj = long(oj * stride + kj) - long(pad);
                                if (ii < 0 || jj < 0 || ii >= long(H) || jj >= long(Wd)) continue;
                                acc += W[((o * C + c) * kh + ki) * kw + kj] *
                                       x[((n * C + c) * H + std::size_t(ii)) * Wd +
                                         std::size_t(jj)];
                            }
                    y[pos] = acc + b[o];
                }
    return y;
}

}  // namespace

TEST_CASE("iv_conv2d with 1x1 kernel and zero radii equals plain convolution") {
    std::mt19937_64 rng(37);
    const Tensor W = ivtest::random_tensor({3, 2, 1, 1}, rng);
    const Tensor b = ivtest::random_tensor({3}, rng);
    const Tensor x = ivtest::random_tensor({2, 2, 4, 4}, rng);
    const IntervalTensor y = iv_conv2d(IntervalTensor::point(W), IntervalTensor::point(b),
                                       IntervalTensor::point(x), 1, 0);
    const Tensor want = plain_conv(W, b, x, 1, 0);
    REQUIRE(y.shape() == want.shape);
    for (std::size_t i = 0; i < want.numel(); ++i) {
        CHECK(y.lower[i] == want[i]);
        CHECK(y.upper[i] == want[i]);
    }
}

TEST_CASE("iv_conv2d on an all-zero input box returns the bias interval") {
    std::mt19937_64 rng(41);
    const IntervalTensor W = random_interval({2, 1, 3, 3}, rng);
    const IntervalTensor b = random_interval({2}, rng);
    const Tensor zero({1, 1, 5, 5});
    const IntervalTensor y = iv_conv2d(W, b, IntervalTensor::point(zero), 1, 0);
    for (std::size_t n = 0; n < y.numel(); ++n) {
        const std::size_t o = (n / 9) % 2;
        CHECK(y.lower[n] == b.lower[o]);
        CHECK(y.upper[n] == b.upper[o]);
    }
}

TEST_CASE("iv_conv2d matches iv_affine on unrolled operands") {
    std::mt19937_64 rng(43);
    const std::size_t C = 2, H = 5, Wd = 5, kh = 3, kw = 3, O = 3;
    const IntervalTensor W = random_interval({O, C, kh, kw}, rng);
    const IntervalTensor b = random_interval({O}, rng);
    const IntervalTensor x = random_interval({1, C, H, Wd}, rng);
    const IntervalTensor y = iv_conv2d(W, b, x, 1, 0);

    const std::size_t Ho = H - kh + 1, Wo = Wd - kw + 1;
    const std::size_t field = C * kh * kw;
    for (std::size_t oi = 0; oi < Ho; ++oi)
        for (std::size_t oj = 0; oj < Wo; ++oj) {
            IntervalTensor patch(Tensor({field}), Tensor({field}));
            std::size_t f = 0;
            for (std::size_t c = 0; c < C; ++c)
                for (std::size_t ki = 0; ki < kh; ++ki)
                    for (std::size_t kj = 0; kj < kw; ++kj, ++f) {
                        const std::size_t xi = (c * H + oi + ki) * Wd + oj + kj;
                        patch.lower[f] = x.lower[xi];
                        patch.upper[f] = x.upper[xi];
                    }
            IntervalTensor Wmat(Tensor({O, field}), Tensor({O, field}));
            for (std::size_t o = 0; o < O; ++o)
                for (std::size_t k = 0; k < field; ++k) {
                    Wmat.lower[o * field + k] = W.lower[o * field + k];
                    Wmat.upper[o * field + k] = W.upper[o * field + k];
                }
            const IntervalTensor want = iv_affine(Wmat, b, patch);
            for (std::size_t o = 0; o < O; ++o) {
                const std::size_t yi = (o * Ho + oi) * Wo + oj;
                CHECK(y.lower[yi] == want.lower[o]);
                CHECK(y.upper[yi] == want.upper[o]);
            }
        }
}

TEST_CASE("iv_conv2d bounds hold for sampled operands") {
    std::mt19937_64 rng(47);
    for (int rep = 0; rep < 20; ++rep) {
        const IntervalTensor W = random_interval({2, 2, 3, 3}, rng, 0.5, 0.3);
        const IntervalTensor b = random_interval({2}, rng, 0.5, 0.3);
        const IntervalTensor x = random_interval({1, 2, 5, 5}, rng, 0.5, 0.3);
        const IntervalTensor y = iv_conv2d(W, b, x, 2, 1);
        for (int s = 0; s < 25; ++s) {
            const Tensor Ws = sample_within(W, rng);
            const Tensor bs = sample_within(b, rng);
            const Tensor xs = sample_within(x, rng);
            const Tensor v = plain_conv(Ws, bs, xs, 2, 1);
            for (std::size_t i = 0; i < v.numel(); ++i) {
                CHECK(y.lower[i] <= v[i]);
                CHECK(v[i] <= y.upper[i]);
            }
        }
    }
}

TEST_CASE("iv_monotone propagates endpoint images") {
    Tensor lo({1}), hi({1});
    lo[0] = -2; hi[0] = 3;
    IntervalTensor r = iv_monotone([](double v) { return relu(v); }, IntervalTensor(lo, hi));
    CHECK(r.lower[0] == 0.0);
    CHECK(r.upper[0] == 3.0);

    lo[0] = -5; hi[0] = -1;
    r = iv_monotone([](double v) { return relu(v); }, IntervalTensor(lo, hi));
    CHECK(r.lower[0] == 0.0);
    CHECK(r.upper[0] == 0.0);

    lo[0] = 0; hi[0] = 0;
    r = iv_monotone([](double v) { return sigmoid(v); }, IntervalTensor(lo, hi));
    CHECK(r.lower[0] == 0.5);
    CHECK(r.upper[0] == 0.5);
}

TEST_CASE("interval ops preserve containment under operand shrinking") {
    std::mt19937_64 rng(53);
    for (int rep = 0; rep < 50; ++rep) {
        const IntervalTensor w = random_interval({6}, rng);
        const IntervalTensor x = random_interval({6}, rng);
        IntervalTensor ws(w.lower, w.upper), xs(x.lower, x.upper);
        for (std::size_t i = 0; i < 6; ++i) {
            const double wc = 0.5 * (w.lower[i] + w.upper[i]);
            const double xc = 0.5 * (x.lower[i] + x.upper[i]);
            ws.lower[i] = wc - 0.25 * (w.upper[i] - w.lower[i]);
            ws.upper[i] = wc + 0.25 * (w.upper[i] - w.lower[i]);
            xs.lower[i] = xc - 0.25 * (x.upper[i] - x.lower[i]);
            xs.upper[i] = xc + 0.25 * (x.upper[i] - x.lower[i]);
        }
        const Interval big = iv_dot(w, x);
        const Interval small = iv_dot(ws, xs);
        CHECK(big.contains(small));
    }
}

TEST_CASE("interval outputs stay finite on finite inputs") {
    std::mt19937_64 rng(59);
    for (int rep = 0; rep < 200; ++rep) {
        const IntervalTensor w = random_interval({8}, rng, 100.0, 50.0);
        const IntervalTensor x = random_interval({8}, rng, 100.0, 50.0);
        const Interval d = iv_dot(w, x);
        CHECK(std::isfinite(d.lower));
        CHECK(std::isfinite(d.upper));
        CHECK(d.lower <= d.upper);
    }
}
