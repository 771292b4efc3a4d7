#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "evfl/models.hpp"
#include "support.hpp"

using namespace evfl;
using test_support::TempDir;
using test_support::gradient_fd;

namespace {

Mlp hand_mlp(bool relu_last) {
    Mlp m;
    m.relu_hidden = true;
    m.relu_after_last = relu_last;
    AffineLayer l;
    l.W = DenseMatrix(2, 2, {1, 2, 3, -4});
    l.b = Vector{0.0, 0.0};
    m.layers.push_back(l);
    return m;
}

Mlp random_mlp(const std::vector<std::size_t>& widths, bool bias, bool relu_last,
               std::uint64_t seed) {
    Rng rng(seed);
    return make_mlp(widths, bias, /*relu_hidden=*/true, relu_last, rng);
}

} // namespace

TEST_CASE("make_mlp: shapes, init bounds, determinism") {
    Rng rng(3);
    Mlp m = make_mlp({5, 7, 3}, true, true, false, rng);
    REQUIRE(m.layers.size() == 2);
    CHECK(m.layers[0].W.rows() == 7);
    CHECK(m.layers[0].W.cols() == 5);
    CHECK(m.layers[0].b.size() == 7);
    CHECK(m.layers[1].W.rows() == 3);
    CHECK(m.layers[1].W.cols() == 7);
    CHECK(m.input_dim() == 5);
    CHECK(m.output_dim() == 3);
    CHECK(m.param_count() == 7 * 5 + 7 + 3 * 7 + 3);

    const double bound0 = std::sqrt(1.0 / 5.0), bound1 = std::sqrt(1.0 / 7.0);
    for (std::size_t i = 0; i < m.layers[0].W.size(); ++i)
        CHECK(std::fabs(m.layers[0].W.data()[i]) <= bound0);
    for (std::size_t i = 0; i < m.layers[1].W.size(); ++i)
        CHECK(std::fabs(m.layers[1].W.data()[i]) <= bound1);

    Rng rng2(3);
    Mlp m2 = make_mlp({5, 7, 3}, true, true, false, rng2);
    CHECK(flatten(m) == flatten(m2));

    Rng rng3(3);
    Mlp nb = make_mlp({5, 3}, false, true, false, rng3);
    CHECK(nb.layers[0].b.empty());
    CHECK(nb.param_count() == 15);
}

TEST_CASE("mlp forward: hand values with and without output relu") {
    Mlp lin = hand_mlp(false);
    // W (1,1) = (3, -1); no output relu keeps the negative.
    CHECK(mlp_forward(lin, {1, 1}) == Vector{3, -1});
    Mlp rect = hand_mlp(true);
    CHECK(mlp_forward(rect, {1, 1}) == Vector{3, 0});

    MlpTrace tr;
    mlp_forward(rect, {1, 1}, &tr);
    REQUIRE(tr.inputs.size() == 1);
    REQUIRE(tr.preacts.size() == 1);
    CHECK(tr.inputs[0] == Vector{1, 1});
    CHECK(tr.preacts[0] == Vector{3, -1});
}

TEST_CASE("flatten / unflatten round trip and axpy") {
    Mlp m = random_mlp({3, 4, 2}, true, false, 11);
    Vector flat = flatten(m);
    CHECK(flat.size() == m.param_count());
    Mlp copy = m;
    Vector g(flat.size(), 0.0);
    g[0] = 1.0;
    g.back() = -2.0;
    axpy_params(copy, 0.5, g);
    Vector flat2 = flatten(copy);
    CHECK(flat2[0] == flat[0] + 0.5);
    CHECK(flat2.back() == flat.back() - 1.0);

    unflatten(copy, flat);
    CHECK(flatten(copy) == flat);
    Vector bad(flat.size() + 1, 0.0);
    CHECK_THROWS_AS(unflatten(copy, bad), DimError);
}

TEST_CASE("mlp backward matches coordinate finite differences") {
    for (bool relu_last : {false, true}) {
        CAPTURE(relu_last);
        Mlp m = random_mlp({3, 4, 2}, true, relu_last, 21 + relu_last);
        Rng rng(5);
        Vector x(3), u(2);
        for (double& v : x) v = rng.next_uniform(-1, 1);
        for (double& v : u) v = rng.next_uniform(-1, 1);

        MlpTrace tr;
        Vector out = mlp_forward(m, x, &tr);
        (void)out;
        MlpGrads an = mlp_backward(m, tr, u);

        const Vector theta = flatten(m);
        auto f_params = [&](const Vector& p) {
            Mlp mm = m;
            unflatten(mm, p);
            return dot(mlp_forward(mm, x), u);
        };
        Vector fd = gradient_fd(f_params, theta);
        REQUIRE(fd.size() == an.gparams.size());
        for (std::size_t i = 0; i < fd.size(); ++i)
            CHECK(test_support::rel_err(an.gparams[i], fd[i]) < 1e-6);

        auto f_input = [&](const Vector& xx) { return dot(mlp_forward(m, xx), u); };
        Vector fdx = gradient_fd(f_input, x);
        for (std::size_t i = 0; i < x.size(); ++i)
            CHECK(test_support::rel_err(an.gx[i], fdx[i]) < 1e-6);
    }
}

TEST_CASE("server forward/backward: slices and finite differences") {
    Mlp head = random_mlp({5, 4, 3}, true, false, 31);
    Rng rng(8);
    Vector e1(2), e2(3);
    for (double& v : e1) v = rng.next_uniform(-1, 1);
    for (double& v : e2) v = rng.next_uniform(-1, 1);
    const int label = 2;

    ServerEval ev = server_forward(head, {e1, e2}, label);
    CHECK(ev.concat.size() == 5);
    CHECK(std::isfinite(ev.loss));
    ServerGrads gr = server_backward(head, ev, {2, 3});
    REQUIRE(gr.v.size() == 2);
    CHECK(gr.v[0].size() == 2);
    CHECK(gr.v[1].size() == 3);

    // Head parameter gradient vs FD.
    const Vector theta = flatten(head);
    auto f_params = [&](const Vector& p) {
        Mlp hh = head;
        unflatten(hh, p);
        return server_forward(hh, {e1, e2}, label).loss;
    };
    Vector fd = gradient_fd(f_params, theta);
    for (std::size_t i = 0; i < fd.size(); ++i)
        CHECK(test_support::rel_err(gr.gparams[i], fd[i]) < 1e-6);

    // Embedding gradients vs FD, per client slice.
    auto f_e1 = [&](const Vector& e) { return server_forward(head, {e, e2}, label).loss; };
    Vector fd1 = gradient_fd(f_e1, e1);
    for (std::size_t i = 0; i < e1.size(); ++i)
        CHECK(test_support::rel_err(gr.v[0][i], fd1[i]) < 1e-6);
    auto f_e2 = [&](const Vector& e) { return server_forward(head, {e1, e}, label).loss; };
    Vector fd2 = gradient_fd(f_e2, e2);
    for (std::size_t i = 0; i < e2.size(); ++i)
        CHECK(test_support::rel_err(gr.v[1][i], fd2[i]) < 1e-6);

    CHECK_THROWS_AS(server_forward(head, {e1, e1}, label), DimError);
}

TEST_CASE("composite gradient matches finite differences end to end") {
    SplitModel sm;
    sm.server = random_mlp({4, 3}, true, false, 41);
    sm.clients.push_back(random_mlp({2, 3, 2}, true, true, 42));
    sm.clients.push_back(random_mlp({2, 2}, false, true, 43));
    Rng rng(9);
    std::vector<Vector> parts{{rng.next_uniform(-1, 1), rng.next_uniform(-1, 1)},
                              {rng.next_uniform(-1, 1), rng.next_uniform(-1, 1)}};
    const int label = 1;

    CompositeGrad cg = composite_gradient(sm, parts, label);
    CHECK(cg.loss == doctest::Approx(composite_loss(sm, parts, label)).epsilon(1e-15));
    REQUIRE(cg.grad.size() == total_params(sm));

    const Vector theta = flatten_all(sm);
    auto f = [&](const Vector& p) {
        SplitModel mm = sm;
        unflatten_all(mm, p);
        return composite_loss(mm, parts, label);
    };
    Vector fd = gradient_fd(f, theta);
    for (std::size_t i = 0; i < fd.size(); ++i)
        CHECK(test_support::rel_err(cg.grad[i], fd[i]) < 1e-6);
}

TEST_CASE("flat layout is server first, then clients in order") {
    SplitModel sm;
    sm.server = random_mlp({2, 2}, false, false, 51);
    sm.clients.push_back(random_mlp({1, 1}, false, true, 52));
    Vector flat = flatten_all(sm);
    REQUIRE(flat.size() == 5);
    Vector sflat = flatten(sm.server);
    for (std::size_t i = 0; i < 4; ++i) CHECK(flat[i] == sflat[i]);
    CHECK(flat[4] == flatten(sm.clients[0])[0]);
}

TEST_CASE("checkpoint save/load round trip is bitwise") {
    TempDir tmp;
    Mlp m = random_mlp({3, 5, 2}, true, true, 61);
    const std::string path = tmp.file("model.ckpt");
    save_checkpoint(path, 7, m);
    std::uint32_t participant = 0;
    Mlp back = load_checkpoint(path, &participant);
    CHECK(participant == 7);
    CHECK(back.relu_after_last == m.relu_after_last);
    CHECK(back.relu_hidden == m.relu_hidden);
    REQUIRE(back.layers.size() == m.layers.size());
    CHECK(flatten(back) == flatten(m));
    CHECK(back.layers[0].W == m.layers[0].W);
}

TEST_CASE("checkpoint load rejects corrupt files") {
    TempDir tmp;
    const std::string bad = tmp.file("bad.ckpt");
    {
        std::ofstream out(bad, std::ios::binary);
        out << "NOTACKPTxxxxxxxxxxxxxxxx";
    }
    CHECK_THROWS_AS(load_checkpoint(bad), FormatError);

    Mlp m = random_mlp({3, 2}, true, false, 62);
    const std::string good = tmp.file("good.ckpt");
    save_checkpoint(good, 1, m);
    // Truncate the file.
    std::filesystem::resize_file(good, 20);
    CHECK_THROWS(load_checkpoint(good));
    CHECK_THROWS_AS(load_checkpoint(tmp.file("missing.ckpt")), IoError);
}
