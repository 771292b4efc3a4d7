#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "evfl/optimizers.hpp"
#include "support.hpp"

using namespace evfl;

namespace {

Mlp tiny_mlp(std::uint64_t seed) {
    Rng rng(seed);
    return make_mlp({2, 3, 2}, true, true, false, rng);
}

} // namespace

TEST_CASE("grad buffer: construction and validation") {
    CHECK_THROWS_AS(GradBuffer(0, 0.5), DimError);
    CHECK_THROWS_AS(GradBuffer(3, 0.0), DimError);
    CHECK_THROWS_AS(GradBuffer(3, 1.2), DimError);
    GradBuffer ok(3, 1.0);  // alpha = 1 is allowed at the buffer level
    CHECK(ok.normalizer() == 3.0);

    GradBuffer b(3, 0.5);
    // W = 1 + 0.5 + 0.25
    CHECK(b.normalizer() == 1.75);
    CHECK(b.capacity() == 3);
    CHECK(b.size() == 0);
    CHECK_THROWS_AS(b.smoothed(), DimError);
}

TEST_CASE("grad buffer: smoothed hand value") {
    GradBuffer b(2, 0.5);
    b.push({0, 3});
    b.push({3, 0});
    // ((3,0) * 1 + (0,3) * 0.5) / 1.5 = (2, 1)
    CHECK(b.smoothed() == Vector{2, 1});
}

TEST_CASE("grad buffer: warm-up divides by the full-window normalizer") {
    GradBuffer b(2, 0.5);
    b.push({3, 0});
    // One entry, but W stays 1.5: (3,0)/1.5 = (2,0).
    CHECK(b.smoothed() == Vector{2, 0});
}

TEST_CASE("grad buffer: explicit passive zero averages in") {
    GradBuffer b(2, 0.5);
    b.push_zero(2);
    b.push({3.0, -1.5});
    Vector s = b.smoothed();
    // (g * 1 + 0 * 0.5) / 1.5 = g / 1.5
    CHECK(std::fabs(s[0] - 2.0) < 1e-12);
    CHECK(std::fabs(s[1] - (-1.0)) < 1e-12);
}

TEST_CASE("grad buffer: FIFO eviction beyond capacity") {
    GradBuffer b(2, 0.5);
    b.push({1, 0});  // a (evicted below)
    b.push({0, 2});  // b
    b.push({4, 0});  // c
    CHECK(b.size() == 2);
    REQUIRE(b.entries().size() == 2);
    CHECK(b.entries()[0] == Vector{4, 0});  // newest first
    CHECK(b.entries()[1] == Vector{0, 2});
    // (c + 0.5 b) / 1.5 = ((4,1)) / 1.5
    Vector s = b.smoothed();
    CHECK(s[0] == doctest::Approx(4.0 / 1.5).epsilon(1e-15));
    CHECK(s[1] == doctest::Approx(1.0 / 1.5).epsilon(1e-15));
}

TEST_CASE("grad buffer: dimension mismatch rejected") {
    GradBuffer b(2, 0.5);
    b.push({1, 2});
    CHECK_THROWS_AS(b.push({1, 2, 3}), DimError);
}

TEST_CASE("ogd step") {
    Mlp m = tiny_mlp(5);
    Vector before = flatten(m);
    Vector g(before.size(), 2.0);
    ogd_step(m, g, 0.25);
    Vector after = flatten(m);
    for (std::size_t i = 0; i < before.size(); ++i)
        CHECK(after[i] == before[i] - 0.5);
}

TEST_CASE("dlr with l = 1 is bitwise identical to ogd") {
    Mlp a = tiny_mlp(6), b = tiny_mlp(6);
    REQUIRE(flatten(a) == flatten(b));
    GradBuffer buf(1, 0.95);
    Rng rng(9);
    for (int t = 0; t < 200; ++t) {
        Vector g(flatten(a).size());
        for (double& v : g) v = rng.next_uniform(-1, 1);
        ogd_step(a, g, 0.1);
        dlr_participant_step(b, buf, g, 0.1);
        REQUIRE(flatten(a) == flatten(b));  // exact, not approximate
    }
}

TEST_CASE("dlr step uses the smoothed gradient") {
    Mlp m = tiny_mlp(7);
    Vector before = flatten(m);
    GradBuffer buf(2, 0.5);
    const std::size_t n = before.size();
    dlr_participant_step(m, buf, Vector(n, 3.0), 1.0);
    Vector after = flatten(m);
    // First step: g / 1.5 = 2.0 off each coordinate.
    for (std::size_t i = 0; i < n; ++i)
        CHECK(after[i] == doctest::Approx(before[i] - 2.0).epsilon(1e-15));
    dlr_participant_step(m, buf, Vector(n, 0.0), 1.0);
    Vector after2 = flatten(m);
    // Buffer now (0, g): smoothed = 0.5 * 3 / 1.5 = 1.
    for (std::size_t i = 0; i < n; ++i)
        CHECK(after2[i] == doctest::Approx(after[i] - 1.0).epsilon(1e-15));
}

TEST_CASE("eta schedule") {
    OptimizerSpec spec;
    spec.eta_schedule = "constant";
    CHECK(spec.eta_at(0.5, 100) == 0.5);
    spec.eta_schedule = "inv_sqrt";
    CHECK(spec.eta_at(0.5, 4) == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(spec.eta_at(0.5, 1) == 0.5);
}

TEST_CASE("optimizer kind names") {
    CHECK(to_string(OptKind::OGD) == "ogd");
    CHECK(to_string(OptKind::SLR) == "slr");
    CHECK(to_string(OptKind::DLR) == "dlr");
}

TEST_CASE("slr window gradient equals the average of per-sample composite grads") {
    SplitModel sm;
    {
        Rng rng(20);
        sm.server = make_mlp({4, 3}, true, true, false, rng);
        sm.clients.push_back(make_mlp({2, 2}, true, true, true, rng));
        sm.clients.push_back(make_mlp({3, 2}, true, true, true, rng));
    }
    Rng rng(21);
    auto sample = [&](std::uint64_t t) {
        StreamSample s;
        s.t = t;
        s.parts = {{rng.next_uniform(-1, 1), rng.next_uniform(-1, 1)},
                   {rng.next_uniform(-1, 1), rng.next_uniform(-1, 1), rng.next_uniform(-1, 1)}};
        s.label = static_cast<int>(t % 3);
        return s;
    };
    StreamSample newest = sample(3), mid = sample(2), oldest = sample(1);
    std::deque<StreamSample> window{newest, mid, oldest};  // newest first

    // Reference: average the full composite gradients sample by sample.
    const std::size_t sp = sm.server.param_count();
    const std::size_t c1 = sm.clients[0].param_count();
    const std::size_t c2 = sm.clients[1].param_count();
    Vector ref_server(sp, 0.0), ref_c1(c1, 0.0), ref_c2(c2, 0.0);
    for (const StreamSample& s : window) {
        CompositeGrad cg = composite_gradient(sm, s.parts, s.label);
        for (std::size_t i = 0; i < sp; ++i) ref_server[i] += cg.grad[i] / 3.0;
        for (std::size_t i = 0; i < c1; ++i) ref_c1[i] += cg.grad[sp + i] / 3.0;
        for (std::size_t i = 0; i < c2; ++i) ref_c2[i] += cg.grad[sp + c1 + i] / 3.0;
    }

    // Seed grads: the newest sample's gradients, as the session would have them.
    CompositeGrad seed = composite_gradient(sm, newest.parts, newest.label);
    Vector seed_server(seed.grad.begin(), seed.grad.begin() + sp);
    std::vector<Vector> seed_clients{
        Vector(seed.grad.begin() + sp, seed.grad.begin() + sp + c1),
        Vector(seed.grad.begin() + sp + c1, seed.grad.end())};

    PassCounters passes;
    passes.client_fwd.assign(2, 0);
    passes.client_bwd.assign(2, 0);
    SlrWindowGrads got = slr_window_gradient(sm.server, sm.clients, window, {0, 1},
                                             seed_server, seed_clients, &passes);
    REQUIRE(got.server.size() == sp);
    REQUIRE(got.clients.size() == 2);
    for (std::size_t i = 0; i < sp; ++i)
        CHECK(got.server[i] == doctest::Approx(ref_server[i]).epsilon(1e-12));
    for (std::size_t i = 0; i < c1; ++i)
        CHECK(got.clients[0][i] == doctest::Approx(ref_c1[i]).epsilon(1e-12));
    for (std::size_t i = 0; i < c2; ++i)
        CHECK(got.clients[1][i] == doctest::Approx(ref_c2[i]).epsilon(1e-12));

    // Two replayed samples beyond the seeded one.
    CHECK(passes.server_fwd == 2);
    CHECK(passes.server_bwd == 2);
    CHECK(passes.client_fwd == std::vector<std::uint64_t>{2, 2});
    CHECK(passes.client_bwd == std::vector<std::uint64_t>{2, 2});
}

TEST_CASE("slr window gradient: non-listed clients are skipped") {
    SplitModel sm;
    {
        Rng rng(30);
        sm.server = make_mlp({2, 2}, true, true, false, rng);
        sm.clients.push_back(make_mlp({1, 1}, true, true, true, rng));
        sm.clients.push_back(make_mlp({1, 1}, true, true, true, rng));
    }
    std::deque<StreamSample> window;
    Rng rng(31);
    for (int i = 2; i >= 1; --i) {
        StreamSample s;
        s.t = i;
        s.parts = {{rng.next_uniform(-1, 1)}, {rng.next_uniform(-1, 1)}};
        s.label = i % 2;
        window.push_back(s);
    }
    CompositeGrad seed = composite_gradient(sm, window.front().parts, window.front().label);
    const std::size_t sp = sm.server.param_count();
    const std::size_t c1 = sm.clients[0].param_count();
    Vector seed_server(seed.grad.begin(), seed.grad.begin() + sp);
    std::vector<Vector> seed_clients{
        Vector(seed.grad.begin() + sp, seed.grad.begin() + sp + c1),
        Vector(seed.grad.begin() + sp + c1, seed.grad.end())};

    PassCounters passes;
    passes.client_fwd.assign(2, 0);
    passes.client_bwd.assign(2, 0);
    SlrWindowGrads got = slr_window_gradient(sm.server, sm.clients, window, {1},
                                             seed_server, seed_clients, &passes);
    CHECK(got.clients[0].empty());       // client 0 not requested
    CHECK(!got.clients[1].empty());
    CHECK(passes.client_fwd == std::vector<std::uint64_t>{1, 1});  // forward still needed
    CHECK(passes.client_bwd == std::vector<std::uint64_t>{0, 1});  // backward only for 1
}

TEST_CASE("slr window of size one returns the seed gradients unchanged") {
    SplitModel sm;
    {
        Rng rng(40);
        sm.server = make_mlp({2, 2}, true, true, false, rng);
        sm.clients.push_back(make_mlp({2, 2}, true, true, true, rng));
    }
    StreamSample s;
    s.t = 1;
    s.parts = {{0.3, -0.7}};
    s.label = 1;
    std::deque<StreamSample> window{s};
    CompositeGrad seed = composite_gradient(sm, s.parts, s.label);
    const std::size_t sp = sm.server.param_count();
    Vector seed_server(seed.grad.begin(), seed.grad.begin() + sp);
    std::vector<Vector> seed_clients{Vector(seed.grad.begin() + sp, seed.grad.end())};

    SlrWindowGrads got = slr_window_gradient(sm.server, sm.clients, window, {0},
                                             seed_server, seed_clients, nullptr);
    // Dividing by a window of 1 must be bitwise identity.
    CHECK(got.server == seed_server);
    CHECK(got.clients[0] == seed_clients[0]);
}
