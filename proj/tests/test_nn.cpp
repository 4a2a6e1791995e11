#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "cpg/error.hpp"
#include "cpg/nn.hpp"
#include "support.hpp"

using namespace cpg;
using namespace cpg::nn;

namespace {

std::vector<LayerSpec> mlp_4_8_3() { return {dense(4, 8), relu(8), dense(8, 3)}; }

}  // namespace

TEST_CASE("build_network counts parameters and validates the chain") {
    const std::vector<LayerSpec> two = {dense(4, 8), dense(8, 3)};
    CHECK(build_network(two, 1).param_count() == 67);
    CHECK(build_network(mlp_4_8_3(), 1).param_count() == 67);

    CHECK_THROWS_AS(build_network(std::vector<LayerSpec>{}, 1), DimensionError);
    CHECK_THROWS_AS(build_network(std::vector<LayerSpec>{dense(4, 0)}, 1), DimensionError);
    CHECK_THROWS_AS(build_network(std::vector<LayerSpec>{dense(4, 8), dense(7, 3)}, 1), DimensionError);
    CHECK_THROWS_AS(build_network(std::vector<LayerSpec>{head(4, 8), dense(8, 3)}, 1), DimensionError);
    CHECK_THROWS_AS(build_network(std::vector<LayerSpec>{{LayerKind::relu, 4, 5, false}}, 1), DimensionError);
}

TEST_CASE("build_network is deterministic per seed and uses the bounded uniform scheme") {
    const auto a = build_network(mlp_4_8_3(), 42);
    const auto b = build_network(mlp_4_8_3(), 42);
    const auto c = build_network(mlp_4_8_3(), 43);
    CHECK(testing::bit_equal(a.params(), b.params()));
    CHECK_FALSE(testing::bit_equal(a.params(), c.params()));

    const float bound0 = std::sqrt(6.0f / 12.0f);
    for (std::size_t r = 0; r < 8; ++r) {
        for (std::size_t col = 0; col < 4; ++col) CHECK(std::fabs(a.params()[a.weight_index(0, r, col)]) <= bound0);
        CHECK(a.params()[a.bias_index(0, r)] == 0.0f);
    }
}

TEST_CASE("canonical index map is layer-major then row-major") {
    const auto net = build_network(mlp_4_8_3(), 1);
    CHECK(net.weight_index(0, 0, 0) == 0);
    CHECK(net.weight_index(0, 1, 0) == 4);
    CHECK(net.bias_index(0, 0) == 32);
    CHECK(net.weight_index(2, 0, 0) == 40);
    CHECK(net.bias_index(2, 2) == 66);
    CHECK_THROWS_AS(net.weight_index(1, 0, 0), DimensionError);
}

TEST_CASE("forward on trivial weights") {
    const auto net = build_network(mlp_4_8_3(), 1);
    std::mt19937_64 rng(5);
    const auto batch = testing::random_batch(6, 4, rng);
    const std::vector<float> zeros(net.param_count(), 0.0f);
    const auto out = forward(net, zeros, batch);
    for (float v : out.data) CHECK(v == 0.0f);

    const std::vector<LayerSpec> id = {dense(2, 2)};
    const auto idnet = build_network(id, 0);
    std::vector<float> w(idnet.param_count(), 0.0f);
    w[idnet.weight_index(0, 0, 0)] = 1.0f;
    w[idnet.weight_index(0, 1, 1)] = 1.0f;
    const auto y = forward(idnet, w, Tensor({1, 2}, {3.0f, 5.0f}));
    CHECK(y.data == std::vector<float>{3.0f, 5.0f});
}

TEST_CASE("forward matches a naive matrix product") {
    const std::vector<LayerSpec> spec = {dense(2, 2)};
    const auto net = build_network(spec, 9);
    std::vector<float> w = net.params();
    w[net.bias_index(0, 0)] = 0.25f;
    w[net.bias_index(0, 1)] = -0.5f;
    std::mt19937_64 rng(11);
    const auto batch = testing::random_batch(3, 2, rng);
    const auto y = forward(net, w, batch);
    for (std::size_t s = 0; s < 3; ++s) {
        const auto x = batch.row(s);
        for (std::size_t o = 0; o < 2; ++o) {
            const double expect = double(w[net.bias_index(0, o)]) + double(w[net.weight_index(0, o, 0)]) * x[0] +
                                  double(w[net.weight_index(0, o, 1)]) * x[1];
            CHECK(y.row(s)[o] == doctest::Approx(expect).epsilon(1e-6));
        }
    }
}

TEST_CASE("forward rejects bad input") {
    const auto net = build_network(mlp_4_8_3(), 1);
    std::mt19937_64 rng(1);
    auto batch = testing::random_batch(2, 4, rng);
    CHECK_THROWS_AS(forward(net, std::vector<float>(10), batch), DimensionError);
    CHECK_THROWS_AS(forward(net, net.params(), testing::random_batch(2, 5, rng)), DimensionError);
    batch.data[3] = std::nanf("");
    CHECK_THROWS_AS(forward(net, net.params(), batch), DimensionError);
}

TEST_CASE("loss of uniform logits is ln C") {
    const std::vector<LayerSpec> spec = {dense(3, 6), relu(6), head(6, 5)};
    const auto net = build_network(spec, 2);
    std::mt19937_64 rng(3);
    const auto batch = testing::random_batch(4, 3, rng);
    const std::vector<float> zeros(net.param_count(), 0.0f);
    const auto lg = loss_and_grad(net, zeros, batch, std::vector<int>{0, 1, 4, 2});
    CHECK(lg.loss == doctest::Approx(std::log(5.0)).epsilon(1e-6));
    CHECK(lg.grad.size() == net.param_count());
    CHECK_THROWS_AS(loss_and_grad(net, zeros, batch, std::vector<int>{0, 1, 5, 2}), DimensionError);
    CHECK_THROWS_AS(loss_and_grad(net, zeros, batch, std::vector<int>{0, 1, -1, 2}), DimensionError);
}

TEST_CASE("gradient matches central finite differences") {
    std::mt19937_64 rng(2024);
    int checked = 0;
    for (int trial = 0; checked < 10 && trial < 100; ++trial) {
        const std::vector<LayerSpec> spec = {dense(3, 5), relu(5), dense(5, 4), relu(4), head(4, 3)};
        const auto net = build_network(spec, static_cast<std::uint64_t>(trial));
        auto w = net.params();
        std::normal_distribution<float> bias(0.0f, 0.3f);
        for (std::size_t l : {0u, 2u, 4u})
            for (std::size_t r = 0; r < spec[l].out_width; ++r) w[net.bias_index(l, r)] = bias(rng);
        const auto batch = testing::random_batch(4, 3, rng);
        const auto labels = testing::random_labels(4, 3, rng);

        std::vector<double> margin;
        std::vector<double> wd(w.begin(), w.end());
        testing::naive_forward(net, wd, batch, &margin);
        if (margin[0] < 0.01) continue;  // a step of 1e-3 could cross a ReLU kink

        const auto lg = loss_and_grad(net, w, batch, labels);
        const auto fd = testing::finite_difference_grad(net, w, batch, labels);
        double worst = 0.0;
        for (std::size_t i = 0; i < w.size(); ++i) worst = std::max(worst, testing::relative_error(lg.grad[i], fd[i]));
        CHECK(worst < 1e-4);
        ++checked;
    }
    CHECK(checked == 10);
}

TEST_CASE("gradient of identical samples equals the single-sample gradient") {
    const std::vector<LayerSpec> spec = {dense(3, 4), relu(4), head(4, 2)};
    const auto net = build_network(spec, 8);
    std::mt19937_64 rng(8);
    const auto one = testing::random_batch(1, 3, rng);
    std::vector<float> rep;
    for (int i = 0; i < 5; ++i) rep.insert(rep.end(), one.data.begin(), one.data.end());
    const auto single = loss_and_grad(net, net.params(), one, std::vector<int>{1});
    const auto many = loss_and_grad(net, net.params(), Tensor({5, 3}, rep), std::vector<int>(5, 1));
    CHECK(many.loss == doctest::Approx(single.loss).epsilon(1e-6));
    for (std::size_t i = 0; i < single.grad.size(); ++i)
        CHECK(many.grad[i] == doctest::Approx(single.grad[i]).epsilon(1e-6));
}

TEST_CASE("sgd_step") {
    std::vector<float> w = {1.0f, -2.0f, 0.5f};
    const std::vector<float> g = {0.5f, 1.0f, -4.0f};
    std::vector<float> v(3, 0.0f);

    SUBCASE("plain SGD on unmasked entries") {
        sgd_step(w, g, std::vector<std::uint8_t>{1, 0, 1}, 0.1f, v, 0.0f);
        CHECK(w[0] == 1.0f - 0.1f * 0.5f);
        CHECK(w[1] == -2.0f);
        CHECK(w[2] == 0.5f - 0.1f * -4.0f);
    }
    SUBCASE("all-zero mask leaves params and velocity bit-identical") {
        const auto before = w;
        for (int i = 0; i < 100; ++i) sgd_step(w, g, std::vector<std::uint8_t>(3, 0), 0.3f, v, 0.9f);
        CHECK(testing::bit_equal(w, before));
        CHECK(v == std::vector<float>(3, 0.0f));
    }
    SUBCASE("two momentum steps follow the unrolled recurrence") {
        const std::vector<float> g2 = {-1.0f, 0.25f, 2.0f};
        const float lr = 0.1f, mu = 0.9f;
        const std::vector<std::uint8_t> all(3, 1);
        const auto w0 = w;
        sgd_step(w, g, all, lr, v, mu);
        sgd_step(w, g2, all, lr, v, mu);
        for (std::size_t i = 0; i < 3; ++i) {
            const float v1 = g[i];
            const float v2 = mu * v1 + g2[i];
            const float expect = (w0[i] - lr * v1) - lr * v2;
            CHECK(w[i] == expect);
        }
    }
    CHECK_THROWS_AS(sgd_step(w, std::vector<float>(2), std::vector<std::uint8_t>(3, 1), 0.1f, v, 0.0f),
                    DimensionError);
    CHECK_THROWS_AS(sgd_step(w, g, std::vector<std::uint8_t>(3, 1), INFINITY, v, 0.0f), DimensionError);
}

TEST_CASE("grow appends without renumbering") {
    auto net = build_network(mlp_4_8_3(), 3);
    std::vector<std::size_t> before_w, before_b;
    for (std::size_t r = 0; r < 8; ++r)
        for (std::size_t c = 0; c < 4; ++c) before_w.push_back(net.weight_index(0, r, c));
    for (std::size_t r = 0; r < 3; ++r)
        for (std::size_t c = 0; c < 8; ++c) before_w.push_back(net.weight_index(2, r, c));
    for (std::size_t r = 0; r < 3; ++r) before_b.push_back(net.bias_index(2, r));
    const auto old_params = net.params();

    const std::vector<std::size_t> inc = {2, 0, 0};
    // 67 + (2*4 + 2) new rows and biases + (2*3) new head columns
    CHECK(param_count_after_growth(net, inc) == 67 + (2 * 4 + 2) + 2 * 3);
    CHECK(grow(net, inc) == 16);
    CHECK(net.param_count() == 83);
    CHECK(net.layers()[0].out_width == 10);
    CHECK(net.layers()[1].in_width == 10);
    CHECK(net.layers()[2].in_width == 10);

    std::size_t k = 0;
    for (std::size_t r = 0; r < 8; ++r)
        for (std::size_t c = 0; c < 4; ++c) CHECK(net.weight_index(0, r, c) == before_w[k++]);
    for (std::size_t r = 0; r < 3; ++r)
        for (std::size_t c = 0; c < 8; ++c) CHECK(net.weight_index(2, r, c) == before_w[k++]);
    for (std::size_t r = 0; r < 3; ++r) CHECK(net.bias_index(2, r) == before_b[r]);
    for (std::size_t i = 0; i < 67; ++i) CHECK(net.params()[i] == old_params[i]);
    for (std::size_t i = 67; i < 83; ++i) CHECK(net.params()[i] == 0.0f);
    CHECK(net.weight_index(2, 0, 9) >= 67);

    const std::vector<std::size_t> none = {0, 0, 0};
    CHECK(grow(net, none) == 0);
    CHECK(net.param_count() == 83);
    CHECK_THROWS_AS(grow(net, std::vector<std::size_t>{0, 1, 0}), DimensionError);
    CHECK_THROWS_AS(grow(net, std::vector<std::size_t>{1, 0}), DimensionError);
}

TEST_CASE("zero extension leaves outputs bit-identical") {
    std::mt19937_64 rng(77);
    for (int trial = 0; trial < 20; ++trial) {
        const std::vector<LayerSpec> spec = {dense(5, 6), relu(6), dense(6, 4), relu(4), head(4, 3)};
        auto net = build_network(spec, static_cast<std::uint64_t>(trial));
        const auto batch = testing::random_batch(7, 5, rng);
        const auto before = forward(net, net.params(), batch);
        std::uniform_int_distribution<std::size_t> d(0, 3);
        grow(net, std::vector<std::size_t>{d(rng), 0, d(rng), 0, 0});
        const auto after = forward(net, net.params(), batch);
        CHECK(testing::bit_equal(before.data, after.data));
    }
}

TEST_CASE("outputs are bit-reproducible") {
    const std::vector<LayerSpec> spec = {dense(5, 6), relu(6), head(6, 3)};
    std::mt19937_64 r1(4), r2(4);
    const auto b1 = testing::random_batch(9, 5, r1);
    const auto b2 = testing::random_batch(9, 5, r2);
    const auto n1 = build_network(spec, 12);
    const auto n2 = build_network(spec, 12);
    CHECK(testing::bit_equal(forward(n1, n1.params(), b1).data, forward(n2, n2.params(), b2).data));
    const auto labels = std::vector<int>{0, 1, 2, 0, 1, 2, 0, 1, 2};
    CHECK(testing::bit_equal(loss_and_grad(n1, n1.params(), b1, labels).grad,
                             loss_and_grad(n2, n2.params(), b2, labels).grad));
}

TEST_CASE("with_head places head parameters after the backbone") {
    const std::vector<LayerSpec> spec = {dense(4, 6), relu(6)};
    const auto backbone = build_network(spec, 1);
    const auto net = with_head(backbone, 3);
    CHECK(net.param_count() == backbone.param_count() + 6 * 3 + 3);
    CHECK(net.weight_index(2, 0, 0) == backbone.param_count());
    CHECK(net.weight_index(2, 1, 0) == backbone.param_count() + 6);
    CHECK(net.bias_index(2, 0) == backbone.param_count() + 18);
    CHECK(net.layers().back().kind == LayerKind::head);
    CHECK_THROWS_AS(with_head(net, 2), DimensionError);
}

TEST_CASE("from_parts rejects a broken index map") {
    const auto net = build_network(mlp_4_8_3(), 1);
    auto tables = net.index_tables();
    CHECK_NOTHROW(Network::from_parts(net.layers(), tables, net.params()));
    tables[0].weights[1] = tables[0].weights[0];
    CHECK_THROWS_AS(Network::from_parts(net.layers(), tables, net.params()), DimensionError);
}
