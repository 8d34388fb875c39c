#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "darec/nn.hpp"

using namespace darec;

TEST_CASE("init_normal with zero stddev gives an all-zero matrix") {
    const auto m = nn::init_normal(2, 3, 0.0, 42);
    REQUIRE(m.rows == 2);
    REQUIRE(m.cols == 3);
    for (double v : m.data) CHECK(v == 0.0);
}

TEST_CASE("init_normal is deterministic per seed") {
    const auto a = nn::init_normal(4, 5, 0.01, 123);
    const auto b = nn::init_normal(4, 5, 0.01, 123);
    REQUIRE(a.data == b.data);
    const auto c = nn::init_normal(4, 5, 0.01, 124);
    CHECK(a.data != c.data);
}

TEST_CASE("init_normal sample mean is near zero over many redraws") {
    // 1e4 redraws of a 2x3 matrix: the mean of 6e4 i.i.d. normal(0, 0.01^2)
    // draws stays within 5 sigma / sqrt(n) of zero.
    const std::size_t redraws = 10000;
    double sum = 0.0;
    for (std::size_t r = 0; r < redraws; ++r) {
        const auto m = nn::init_normal(2, 3, 0.01, nn::splitmix64(999 + r));
        for (double v : m.data) sum += v;
    }
    const double n = 6.0 * static_cast<double>(redraws);
    const double mean = sum / n;
    CHECK(std::abs(mean) < 5.0 * 0.01 / std::sqrt(n));
}

TEST_CASE("init_normal rejects bad arguments") {
    CHECK_THROWS_AS(nn::init_normal(0, 3, 0.01, 1), std::invalid_argument);
    CHECK_THROWS_AS(nn::init_normal(3, 0, 0.01, 1), std::invalid_argument);
    CHECK_THROWS_AS(nn::init_normal(2, 2, -0.5, 1), std::invalid_argument);
}

TEST_CASE("sigmoid stays strictly inside (0,1) even at saturation") {
    for (double z : {-800.0, -40.0, -1.0, 0.0, 1.0, 40.0, 800.0}) {
        const double s = nn::sigmoid(z);
        CHECK(s > 0.0);
        CHECK(s < 1.0);
    }
    CHECK(nn::sigmoid(0.0) == 0.5);
}

namespace {

nn::MLP identity_layer_net(nn::DenseMatrix w) {
    nn::MLP net;
    net.add_layer(std::move(w), nn::DenseMatrix(1, 2), nn::Activation::Identity);
    return net;
}

}  // namespace

TEST_CASE("mlp_forward through an identity layer is the identity map") {
    nn::DenseMatrix w(2, 2);
    w(0, 0) = 1.0;
    w(1, 1) = 1.0;
    const auto net = identity_layer_net(std::move(w));
    const nn::Vector y = net.forward({1.0, 2.0});
    CHECK(y == nn::Vector{1.0, 2.0});
}

TEST_CASE("mlp_forward with zero weights and sigmoid emits 0.5 everywhere") {
    nn::MLP net;
    net.add_layer(nn::DenseMatrix(3, 2), nn::DenseMatrix(1, 3), nn::Activation::Sigmoid);
    const nn::Vector y = net.forward({7.0, -4.0});
    REQUIRE(y.size() == 3);
    for (double v : y) CHECK(v == 0.5);
}

TEST_CASE("mlp_forward hand case: sigmoid(ln 3) = 0.75") {
    nn::DenseMatrix w(1, 1);
    w(0, 0) = std::log(3.0);
    nn::MLP net;
    net.add_layer(std::move(w), nn::DenseMatrix(1, 1), nn::Activation::Sigmoid);
    const nn::Vector y = net.forward({1.0});
    CHECK_THAT(y[0], Catch::Matchers::WithinAbs(0.75, 1e-15));
}

TEST_CASE("mlp_forward rejects wrong input length") {
    nn::MLP net;
    net.add_layer(nn::DenseMatrix(3, 2), nn::DenseMatrix(1, 3), nn::Activation::Sigmoid);
    CHECK_THROWS_AS(net.forward({1.0, 2.0, 3.0}), std::invalid_argument);
}

TEST_CASE("mlp forward is pure") {
    auto net = nn::make_mlp({4, 6, 3}, {nn::Activation::Sigmoid, nn::Activation::Identity},
                            0.5, 77);
    const nn::Vector x = {0.3, -1.2, 2.0, 0.05};
    CHECK(net.forward(x) == net.forward(x));
}

TEST_CASE("mlp layer chaining is enforced") {
    nn::MLP net;
    net.add_layer(nn::DenseMatrix(3, 2), nn::DenseMatrix(1, 3), nn::Activation::Sigmoid);
    CHECK_THROWS_AS(
        net.add_layer(nn::DenseMatrix(2, 4), nn::DenseMatrix(1, 2), nn::Activation::Identity),
        std::invalid_argument);
}

TEST_CASE("mlp_backward through an identity layer returns W^T g") {
    nn::DenseMatrix w(2, 2);
    w(0, 0) = 1.0;
    w(0, 1) = 2.0;
    w(1, 0) = 3.0;
    w(1, 1) = 4.0;
    auto net = identity_layer_net(std::move(w));
    nn::MLP::Cache cache;
    net.forward({1.0, 1.0}, &cache);
    const nn::Vector g = {5.0, 7.0};
    const nn::Vector dx = net.backward(cache, g);
    // W^T g = (1*5 + 3*7, 2*5 + 4*7)
    CHECK(dx == nn::Vector{26.0, 38.0});
}

TEST_CASE("mlp_backward with zero upstream leaves gradients unchanged") {
    auto net = nn::make_mlp({3, 4, 2}, {nn::Activation::Sigmoid, nn::Activation::Identity},
                            0.3, 5);
    nn::MLP::Cache cache;
    net.forward({1.0, -2.0, 0.5}, &cache);
    net.backward(cache, nn::Vector{0.0, 0.0});
    for (auto* p : net.parameters())
        for (double gv : p->grad.data) CHECK(gv == 0.0);
}

TEST_CASE("mlp gradients match finite differences on a masked square loss") {
    auto net = nn::make_mlp({5, 7, 4}, {nn::Activation::Sigmoid, nn::Activation::Sigmoid},
                            0.4, 11);
    const nn::Vector x = {0.2, -0.7, 1.3, 0.0, -0.4};
    const nn::Vector target = {0.9, 0.1, 0.5, 0.3};
    const std::vector<int> mask = {1, 0, 1, 1};

    auto loss_fn = [&] {
        const nn::Vector y = net.forward(x);
        double l = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i)
            if (mask[i]) l += (y[i] - target[i]) * (y[i] - target[i]);
        return l;
    };
    net.zero_grads();
    nn::MLP::Cache cache;
    const nn::Vector y = net.forward(x, &cache);
    nn::Vector d(y.size(), 0.0);
    for (std::size_t i = 0; i < y.size(); ++i)
        if (mask[i]) d[i] = 2.0 * (y[i] - target[i]);
    net.backward(cache, std::move(d));

    CHECK(nn::grad_check(loss_fn, net.parameters(), 1e-5) < 1e-4);
}

TEST_CASE("relu forward and backward away from the kink") {
    nn::DenseMatrix w(2, 2);
    w(0, 0) = 1.0;
    w(1, 1) = -1.0;
    nn::MLP net;
    net.add_layer(std::move(w), nn::DenseMatrix(1, 2), nn::Activation::Relu);
    nn::MLP::Cache cache;
    const nn::Vector y = net.forward({2.0, 3.0}, &cache);
    CHECK(y == nn::Vector{2.0, 0.0});  // second pre-activation is -3
    const nn::Vector dx = net.backward(cache, nn::Vector{1.0, 1.0});
    CHECK(dx == nn::Vector{1.0, 0.0});  // gradient blocked on the dead unit
}

TEST_CASE("adam first step matches the bias-corrected hand evaluation") {
    nn::ParamTensor p(nn::DenseMatrix(1, 1));
    p.value(0, 0) = 1.0;
    p.grad(0, 0) = 0.1;
    std::vector<nn::ParamTensor*> params = {&p};
    nn::AdamState st(params, 0.001);
    nn::adam_step(params, st);
    CHECK(st.t == 1);
    // m_hat = g, v_hat = g^2 after bias correction on step one, so
    // delta = -lr * g / (|g| + eps).
    const double expected_delta = -0.001 * 0.1 / (0.1 + 1e-8);
    CHECK_THAT(p.value(0, 0) - 1.0, Catch::Matchers::WithinAbs(expected_delta, 1e-15));
    CHECK(p.grad(0, 0) == 0.1);  // gradient left intact
}

TEST_CASE("adam with zero gradients from a fresh state is a fixed point") {
    nn::ParamTensor p(nn::DenseMatrix(2, 2));
    p.value.fill(3.25);
    std::vector<nn::ParamTensor*> params = {&p};
    nn::AdamState st(params, 0.01);
    for (int i = 0; i < 5; ++i) nn::adam_step(params, st);
    for (double v : p.value.data) CHECK(v == 3.25);
}

TEST_CASE("adam gives identical deltas to parameters with equal gradients") {
    nn::ParamTensor a(nn::DenseMatrix(1, 3));
    nn::ParamTensor b(nn::DenseMatrix(1, 3));
    a.value.fill(2.0);
    b.value.fill(2.0);
    a.grad.fill(-0.37);
    b.grad.fill(-0.37);
    std::vector<nn::ParamTensor*> params = {&a, &b};
    nn::AdamState st(params, 0.005);
    nn::adam_step(params, st);
    CHECK(a.value.data == b.value.data);
}

TEST_CASE("adam rejects a mismatched state") {
    nn::ParamTensor a(nn::DenseMatrix(1, 3));
    std::vector<nn::ParamTensor*> params = {&a};
    nn::AdamState st(params, 0.01);
    nn::ParamTensor b(nn::DenseMatrix(1, 3));
    std::vector<nn::ParamTensor*> both = {&a, &b};
    CHECK_THROWS_AS(nn::adam_step(both, st), std::invalid_argument);
}

TEST_CASE("grad_check on a quadratic loss") {
    nn::ParamTensor theta(nn::DenseMatrix(1, 1));
    theta.value(0, 0) = 3.0;
    theta.grad(0, 0) = 3.0;  // d/dtheta of 0.5 theta^2
    auto loss = [&] { return 0.5 * theta.value(0, 0) * theta.value(0, 0); };
    CHECK(nn::grad_check(loss, {&theta}, 1e-5) < 1e-9);
}

TEST_CASE("grad_check on a constant loss reports zero error") {
    nn::ParamTensor theta(nn::DenseMatrix(1, 2));
    auto loss = [] { return 5.0; };
    CHECK(nn::grad_check(loss, {&theta}, 1e-5) == 0.0);
}

TEST_CASE("grad_check rejects non-finite losses and bad h") {
    nn::ParamTensor theta(nn::DenseMatrix(1, 1));
    auto bad = [] { return std::numeric_limits<double>::infinity(); };
    CHECK_THROWS_AS(nn::grad_check(bad, {&theta}, 1e-5), std::runtime_error);
    auto fine = [] { return 1.0; };
    CHECK_THROWS_AS(nn::grad_check(fine, {&theta}, 0.0), std::invalid_argument);
}

TEST_CASE("derive_seed separates streams and indices") {
    const auto a = nn::derive_seed(1, nn::SeedStream::Init, 0);
    const auto b = nn::derive_seed(1, nn::SeedStream::Shuffle, 0);
    const auto c = nn::derive_seed(1, nn::SeedStream::Init, 1);
    const auto d = nn::derive_seed(2, nn::SeedStream::Init, 0);
    CHECK(a != b);
    CHECK(a != c);
    CHECK(a != d);
    CHECK(a == nn::derive_seed(1, nn::SeedStream::Init, 0));
}
