#include <doctest.h>

#include <cmath>
#include <sstream>

#include "imvc/error.hpp"
#include "imvc/nn.hpp"
#include "oracles.hpp"

using namespace imvc;
using namespace imvc::nn;

namespace {

Mlp random_net(std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out,
               std::uint64_t seed) {
    Rng rng(seed);
    return make_mlp(in, hidden, out, rng);
}

// scalar loss sum(c .* f(x)) with fixed random c, exercising every output
double weighted_output_loss(const Mlp& net, const Matrix& x, const Matrix& c,
                            ForwardCache* cache = nullptr, MlpGrad* grad = nullptr) {
    ForwardCache local;
    const Matrix y = mlp_forward(net, x, cache ? cache : &local);
    double loss = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) loss += c.data()[i] * y.data()[i];
    if (grad) mlp_backward(net, cache ? *cache : local, c, *grad);
    return loss;
}

} // namespace

TEST_SUITE_BEGIN("nn");

TEST_CASE("identity linear layer passes input through") {
    Mlp net;
    DenseLayer layer;
    layer.weights = Matrix::identity(3);
    layer.bias.assign(3, 0.0);
    net.layers.push_back(layer);

    const auto x = Matrix::from_rows({{1, -2, 3}, {0.5, 0, -0.25}});
    CHECK(mlp_forward(net, x) == x);
}

TEST_CASE("relu cutoff") {
    Mlp net;
    DenseLayer layer;
    layer.weights = Matrix::from_rows({{1}});
    layer.bias = {-1.0};
    layer.activation = Activation::relu;
    net.layers.push_back(layer);

    const auto y = mlp_forward(net, Matrix::from_rows({{0.5}}));
    CHECK(y(0, 0) == 0.0);
    const auto y2 = mlp_forward(net, Matrix::from_rows({{1.5}}));
    CHECK(y2(0, 0) == doctest::Approx(0.5));
}

TEST_CASE("two-layer forward matches the naive recomputation") {
    const auto net = random_net(5, {7}, 3, 21);
    Rng rng(22);
    Matrix x(4, 5);
    for (double& v : x.data()) v = rng.normal();
    const auto fast = mlp_forward(net, x);
    const auto slow = oracle::naive_mlp_forward(net, x);
    REQUIRE(fast.rows() == slow.rows());
    for (std::size_t i = 0; i < fast.size(); ++i)
        CHECK(fast.data()[i] == doctest::Approx(slow.data()[i]).epsilon(1e-12));
}

TEST_CASE("forward determinism: identical runs, identical bits") {
    const auto net = random_net(6, {8, 4}, 2, 5);
    Rng rng(6);
    Matrix x(3, 6);
    for (double& v : x.data()) v = rng.normal();
    CHECK(mlp_forward(net, x) == mlp_forward(net, x));
}

TEST_CASE("shape mismatch raises a contract error") {
    const auto net = random_net(4, {}, 2, 1);
    CHECK_THROWS_AS(mlp_forward(net, Matrix(3, 5)), ContractError);
}

TEST_CASE("stale cache is rejected") {
    const auto net_a = random_net(3, {}, 2, 1);
    const auto net_b = random_net(3, {}, 2, 2);
    ForwardCache cache;
    mlp_forward(net_a, Matrix(2, 3), &cache);
    MlpGrad grad = MlpGrad::zeros_like(net_b);
    CHECK_THROWS_AS(mlp_backward(net_b, cache, Matrix(2, 2), grad), ContractError);
}

TEST_CASE("linear layer bias gradient is the column sum of grad_out") {
    const auto net = random_net(3, {}, 2, 9);
    const std::size_t batch = 4;
    Rng rng(10);
    Matrix x(batch, 3);
    for (double& v : x.data()) v = rng.normal();
    ForwardCache cache;
    mlp_forward(net, x, &cache);
    MlpGrad grad = MlpGrad::zeros_like(net);
    mlp_backward(net, cache, Matrix(batch, 2, 1.0), grad);
    CHECK(grad.d_bias[0][0] == doctest::Approx(static_cast<double>(batch)));
    CHECK(grad.d_bias[0][1] == doctest::Approx(static_cast<double>(batch)));
}

TEST_CASE("dead relu blocks the input gradient") {
    Mlp net;
    DenseLayer layer;
    layer.weights = Matrix::from_rows({{1.0, 0.0}, {0.0, 1.0}});
    layer.bias = {-10.0, -10.0}; // all pre-activations negative
    layer.activation = Activation::relu;
    net.layers.push_back(layer);

    ForwardCache cache;
    mlp_forward(net, Matrix::from_rows({{1.0, 2.0}}), &cache);
    MlpGrad grad = MlpGrad::zeros_like(net);
    const Matrix dx = mlp_backward(net, cache, Matrix(1, 2, 1.0), grad);
    CHECK(dx(0, 0) == 0.0);
    CHECK(dx(0, 1) == 0.0);
}

TEST_CASE("backward gradients match central differences on random nets") {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        Mlp net = random_net(4, {6, 5}, 3, seed);
        Rng rng(100 + seed);
        Matrix x(3, 4), c(3, 3);
        for (double& v : x.data()) v = rng.normal();
        for (double& v : c.data()) v = rng.normal();

        ForwardCache cache;
        MlpGrad grad = MlpGrad::zeros_like(net);
        weighted_output_loss(net, x, c, &cache, &grad);

        const auto coords = parameter_coords(net);
        const auto flat = flatten_grad(grad);
        Rng pick(seed);
        const auto report = grad_check(
            [&]() { return weighted_output_loss(net, x, c); }, coords, flat, 1e-5, 1e-5,
            pick, 150);
        CHECK(report.passed);
        CHECK(report.max_rel_error < 1e-5);
    }
}

TEST_CASE("grad_check on a quadratic is exact to roundoff") {
    std::vector<double> p{0.5, -1.25, 2.0, 0.0};
    std::vector<double*> coords;
    for (double& v : p) coords.push_back(&v);
    auto loss = [&]() {
        double s = 0.0;
        for (double v : p) s += v * v;
        return s;
    };
    std::vector<double> analytic;
    for (double v : p) analytic.push_back(2.0 * v);
    Rng rng(5);
    const auto report = grad_check(loss, coords, analytic, 1e-5, 1e-8, rng);
    CHECK(report.coords_checked == 4);
    CHECK(report.max_rel_error < 1e-8);
}

TEST_CASE("grad_check with no parameters reports cleanly") {
    Rng rng(5);
    const auto report = grad_check([]() { return 1.0; }, {}, {}, 1e-5, 1e-8, rng);
    CHECK(report.coords_checked == 0);
    CHECK(report.passed);
}

TEST_CASE("adam: zero gradient is a parameter no-op and increments t") {
    Mlp net = random_net(3, {4}, 2, 7);
    const Mlp before = net;
    AdamState state = AdamState::for_net(net, {});
    adam_step(net, MlpGrad::zeros_like(net), state, "net");
    CHECK(net == before);
    CHECK(state.t == 1);
}

TEST_CASE("adam single step matches the update formula") {
    // one parameter, gradient 1: m=0.1, v=0.001, bias-corrected step = lr/(1+eps)
    Mlp net;
    DenseLayer layer;
    layer.weights = Matrix::from_rows({{1.0}});
    layer.bias = {0.0};
    net.layers.push_back(layer);

    AdamConfig cfg;
    cfg.lr = 0.1;
    AdamState state = AdamState::for_net(net, cfg);
    MlpGrad grad = MlpGrad::zeros_like(net);
    grad.d_weights[0](0, 0) = 1.0;
    adam_step(net, grad, state, "net");

    const double expected = 1.0 - 0.1 * 1.0 / (1.0 + 1e-8);
    CHECK(net.layers[0].weights(0, 0) == doctest::Approx(expected).epsilon(1e-12));

    SUBCASE("second identical step follows the formula too") {
        adam_step(net, grad, state, "net");
        const double m2 = 0.9 * 0.1 + 0.1 * 1.0;
        const double v2 = 0.999 * 0.001 + 0.001 * 1.0;
        const double m_hat = m2 / (1.0 - 0.9 * 0.9);
        const double v_hat = v2 / (1.0 - 0.999 * 0.999);
        const double expected2 = expected - 0.1 * m_hat / (std::sqrt(v_hat) + 1e-8);
        CHECK(net.layers[0].weights(0, 0) == doctest::Approx(expected2).epsilon(1e-12));
        CHECK(state.t == 2);
    }
}

TEST_CASE("adam rejects non-finite gradients with the parameter name") {
    Mlp net = random_net(2, {}, 1, 3);
    AdamState state = AdamState::for_net(net, {});
    MlpGrad grad = MlpGrad::zeros_like(net);
    grad.d_weights[0](0, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_WITH_AS(adam_step(net, grad, state, "encoder"),
                         doctest::Contains("encoder"), TrainingError);
}

TEST_CASE("checkpoint round trip is bit exact") {
    const Mlp net = random_net(5, {4, 3}, 2, 77);
    std::stringstream buf;
    save_mlp(net, buf);
    const Mlp back = load_mlp(buf);
    CHECK(back == net);
}

TEST_SUITE_END();
