#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "slafc/neuralnet.hpp"
#include "slafc/rng.hpp"
#include "slafc/slaloss.hpp"

using namespace slafc;

namespace {

void zero_params(ModelParams& params) {
    visit_params(params, [](double& x) { x = 0.0; });
}

std::vector<double> flatten(const ModelParams& params) {
    std::vector<double> flat;
    visit_params(params, [&](double v) { flat.push_back(v); });
    return flat;
}

Tensor3 random_inputs(const NetConfig& config, int batch, std::uint64_t key) {
    Tensor3 t;
    t.resize(batch, config.window, config.group_channels[0]);
    Rng rng(key);
    for (auto& v : t.v) v = rng.normal();
    return t;
}

double scalar_sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

} // namespace

TEST_SUITE("neuralnet") {

TEST_CASE("init_params is deterministic and respects its bounds") {
    NetConfig config{{3}, 5, 6, 77};
    const auto a = init_params(config);
    const auto b = init_params(config);
    CHECK(flatten(a) == flatten(b));

    NetConfig small{{1}, 1, 1, 9};
    const auto params = init_params(small);
    const double wx_bound = std::sqrt(6.0 / 2.0);
    for (int gate = 0; gate < kGateCount; ++gate) {
        REQUIRE(params.lstm[0].wx[gate].size() == 1);
        CHECK(std::abs(params.lstm[0].wx[gate][0]) <= wx_bound);
        CHECK(std::abs(params.lstm[0].wh[gate][0]) <= wx_bound);
    }

    // Forget-gate bias is exactly 1, other biases exactly 0.
    for (int h = 0; h < config.hidden; ++h) {
        CHECK(a.lstm[0].b[kGateForget][h] == 1.0);
        CHECK(a.lstm[0].b[kGateInput][h] == 0.0);
        CHECK(a.lstm[0].b[kGateCell][h] == 0.0);
        CHECK(a.lstm[0].b[kGateOutput][h] == 0.0);
    }
    CHECK(a.head[0].b == 0.0);
}

TEST_CASE("zero network predicts its head bias") {
    NetConfig config{{2}, 4, 8, 5};
    auto params = init_params(config);
    zero_params(params);
    params.head[0].b = -2.75;
    const auto inputs = random_inputs(config, 3, stream_key(1, "zero-net"));
    const auto preds = forward(config, params, {inputs}, nullptr);
    REQUIRE(preds.size() == 3);
    for (double p : preds) CHECK(p == -2.75);
}

TEST_CASE("scalar network matches a hand-evaluated recurrence") {
    NetConfig config{{1}, 1, 2, 0};
    auto params = init_params(config);
    // Hand-set scalar weights.
    params.lstm[0].wx[kGateInput][0] = 0.3;
    params.lstm[0].wx[kGateForget][0] = -0.2;
    params.lstm[0].wx[kGateCell][0] = 0.7;
    params.lstm[0].wx[kGateOutput][0] = 0.5;
    params.lstm[0].wh[kGateInput][0] = 0.11;
    params.lstm[0].wh[kGateForget][0] = -0.13;
    params.lstm[0].wh[kGateCell][0] = 0.17;
    params.lstm[0].wh[kGateOutput][0] = 0.19;
    params.lstm[0].b[kGateInput][0] = 0.05;
    params.lstm[0].b[kGateForget][0] = 1.0;
    params.lstm[0].b[kGateCell][0] = -0.02;
    params.lstm[0].b[kGateOutput][0] = 0.04;
    params.head[0].w[0] = 1.4;
    params.head[0].b = 0.6;

    Tensor3 inputs;
    inputs.resize(1, 2, 1);
    inputs.at(0, 0, 0) = 0.9;
    inputs.at(0, 1, 0) = -0.4;

    // Reference evaluation with plain scalars.
    double h = 0.0, c = 0.0;
    for (double x : {0.9, -0.4}) {
        const double i = scalar_sigmoid(0.3 * x + 0.11 * h + 0.05);
        const double f = scalar_sigmoid(-0.2 * x - 0.13 * h + 1.0);
        const double g = std::tanh(0.7 * x + 0.17 * h - 0.02);
        const double o = scalar_sigmoid(0.5 * x + 0.19 * h + 0.04);
        c = f * c + i * g;
        h = o * std::tanh(c);
    }
    const double expected = 1.4 * h + 0.6;

    const auto preds = forward(config, params, {inputs}, nullptr);
    CHECK(preds[0] == doctest::Approx(expected).epsilon(1e-15));
}

TEST_CASE("identical windows in a batch give identical predictions") {
    NetConfig config{{3}, 6, 12, 42};
    const auto params = init_params(config);
    auto one = random_inputs(config, 1, stream_key(2, "dup"));
    Tensor3 two;
    two.resize(2, config.window, 3);
    std::copy(one.v.begin(), one.v.end(), two.v.begin());
    std::copy(one.v.begin(), one.v.end(), two.v.begin() + one.v.size());
    const auto preds = forward(config, params, {two}, nullptr);
    CHECK(preds[0] == preds[1]);
}

TEST_CASE("forward is bit-deterministic") {
    NetConfig config{{4}, 8, 10, 3};
    const auto params = init_params(config);
    const auto inputs = random_inputs(config, 5, stream_key(3, "det"));
    const auto a = forward(config, params, {inputs}, nullptr);
    const auto b = forward(config, params, {inputs}, nullptr);
    CHECK(a == b);
}

TEST_CASE("backward basics") {
    NetConfig config{{2}, 3, 4, 11};
    const auto params = init_params(config);
    const auto inputs = random_inputs(config, 3, stream_key(4, "bw"));
    ForwardCache cache;
    forward(config, params, {inputs}, &cache);

    SUBCASE("zero upstream gradient zeroes everything") {
        const auto grads = backward(config, params, cache, std::vector<double>(3, 0.0));
        for (double g : flatten(grads)) CHECK(g == 0.0);
    }
    SUBCASE("gradients are linear in the upstream gradient") {
        std::vector<double> d{0.3, -0.7, 1.1};
        const auto g1 = flatten(backward(config, params, cache, d));
        for (auto& v : d) v *= 2.0;
        const auto g2 = flatten(backward(config, params, cache, d));
        REQUIRE(g1.size() == g2.size());
        for (std::size_t i = 0; i < g1.size(); ++i) {
            CHECK(g2[i] == doctest::Approx(2.0 * g1[i]).epsilon(1e-12));
        }
    }
}

TEST_CASE("analytic gradients match central differences") {
    // Mean offset prediction loss keeps the check independent of the wMAE
    // kink handling exercised separately by grad_check.
    NetConfig config{{2}, 3, 5, 13};
    auto params = init_params(config);
    const auto inputs = random_inputs(config, 4, stream_key(5, "fd"));

    auto loss_of = [&](const ModelParams& p) {
        const auto preds = forward(config, p, {inputs}, nullptr);
        double total = 0.0;
        for (double v : preds) total += 0.5 * v * v;
        return total / static_cast<double>(preds.size());
    };

    ForwardCache cache;
    const auto preds = forward(config, params, {inputs}, &cache);
    std::vector<double> dpred(preds.size());
    for (std::size_t i = 0; i < preds.size(); ++i) {
        dpred[i] = preds[i] / static_cast<double>(preds.size());
    }
    const auto analytic = flatten(backward(config, params, cache, dpred));

    const double eps = 1e-5;
    std::size_t idx = 0;
    double max_rel = 0.0;
    visit_params(params, [&](double& p) {
        const double saved = p;
        p = saved + eps;
        const double up = loss_of(params);
        p = saved - eps;
        const double down = loss_of(params);
        p = saved;
        const double numeric = (up - down) / (2 * eps);
        const double scale = std::max({std::abs(analytic[idx]), std::abs(numeric), 1e-3});
        max_rel = std::max(max_rel, std::abs(analytic[idx] - numeric) / scale);
        ++idx;
    });
    CHECK(max_rel < 1e-4);
}

TEST_CASE("grad_check stays under 1e-4 for the wMAE loss") {
    for (std::uint64_t seed : {101ull, 102ull, 103ull}) {
        NetConfig config{{3}, 4, 5, seed};
        CHECK(grad_check(config, 1.0, 4) < 1e-4);
        CHECK(grad_check(config, 8.0, 4) < 1e-4);
    }
    // A two-group, two-head configuration exercises the concatenation path.
    NetConfig multi{{2, 3}, 4, 5, 207};
    CHECK(grad_check(multi, 3.0, 3) < 1e-4);
}

TEST_CASE("zero-weight network: gradients vanish exactly where predictions are constant") {
    NetConfig config{{2}, 3, 4, 15};
    auto params = init_params(config);
    zero_params(params);
    const auto inputs = random_inputs(config, 3, stream_key(6, "zero-grad"));
    ForwardCache cache;
    const auto preds = forward(config, params, {inputs}, &cache);
    for (double p : preds) CHECK(p == 0.0);

    const auto grads = backward(config, params, cache, std::vector<double>(3, 1.0));
    // Head weights are zero, so every LSTM gradient is exactly zero; the head
    // bias collects the upstream gradient.
    for (int gate = 0; gate < kGateCount; ++gate) {
        for (double g : grads.lstm[0].wx[gate]) CHECK(g == 0.0);
        for (double g : grads.lstm[0].wh[gate]) CHECK(g == 0.0);
        for (double g : grads.lstm[0].b[gate]) CHECK(g == 0.0);
    }
    for (double g : grads.head[0].w) CHECK(g == 0.0); // final hidden is identically zero
    CHECK(grads.head[0].b == 3.0);
}

TEST_CASE("optimizer_step") {
    NetConfig config{{1}, 1, 1, 1};
    auto params = init_params(config);

    SUBCASE("zero gradients leave parameters unchanged") {
        const auto before = flatten(params);
        auto grads = params;
        zero_params(grads);
        OptState state;
        optimizer_step(config, params, grads, state, 1e-3);
        CHECK(flatten(params) == before);
        CHECK(state.step == 1);
    }
    SUBCASE("one step matches the hand-computed update") {
        auto grads = params;
        zero_params(grads);
        grads.head[0].b = 0.5;
        const double before = params.head[0].b;
        OptState state;
        optimizer_step(config, params, grads, state, 1e-3);

        const double m = 0.1 * 0.5;
        const double v = 0.001 * 0.25;
        const double m_hat = m / (1.0 - 0.9);
        const double v_hat = v / (1.0 - 0.999);
        const double expected = before - 1e-3 * m_hat / (std::sqrt(v_hat) + 1e-8);
        CHECK(params.head[0].b == doctest::Approx(expected).epsilon(1e-15));
    }
    SUBCASE("non-finite gradients are rejected") {
        auto grads = params;
        zero_params(grads);
        grads.head[0].w[0] = std::nan("");
        OptState state;
        CHECK_THROWS_AS(optimizer_step(config, params, grads, state, 1e-3), Error);
    }
}

TEST_CASE("fifty optimizer steps halve the training wMAE") {
    for (double w : {1.0, 3.0}) {
        std::vector<double> improvements;
        for (std::uint64_t seed : {1ull, 2ull, 3ull, 4ull, 5ull}) {
            NetConfig config{{1}, 8, 8, seed};
            auto params = init_params(config);
            const auto inputs = random_inputs(config, 16, stream_key(seed, "fit-x"));
            std::vector<double> targets(16);
            Rng ry(stream_key(seed, "fit-y"));
            for (auto& t : targets) t = ry.normal();

            const LossSpec spec{LossKind::WMae, w, 1.0};
            auto loss_of = [&](const ModelParams& p) {
                const auto preds = forward(config, p, {inputs}, nullptr);
                double total = 0.0;
                for (std::size_t i = 0; i < preds.size(); ++i) {
                    total += loss_value(spec, preds[i] - targets[i]);
                }
                return total / static_cast<double>(preds.size());
            };

            const double initial = loss_of(params);
            OptState state;
            for (int step = 0; step < 50; ++step) {
                ForwardCache cache;
                const auto preds = forward(config, params, {inputs}, &cache);
                std::vector<double> dpred(preds.size());
                for (std::size_t i = 0; i < preds.size(); ++i) {
                    dpred[i] = loss_grad(spec, preds[i] - targets[i]) /
                               static_cast<double>(preds.size());
                }
                const auto grads = backward(config, params, cache, dpred);
                optimizer_step(config, params, grads, state, 0.05);
            }
            improvements.push_back(loss_of(params) / initial);
        }
        std::sort(improvements.begin(), improvements.end());
        CHECK(improvements[2] <= 0.5); // median across seeds
    }
}

TEST_CASE("shape mismatches are rejected") {
    NetConfig config{{2}, 3, 4, 1};
    const auto params = init_params(config);
    Tensor3 wrong;
    wrong.resize(2, 4, 3); // 3 channels instead of 2
    CHECK_THROWS_AS(forward(config, params, {wrong}, nullptr), Error);
    CHECK_THROWS_AS(forward(config, params, {}, nullptr), Error);

    const auto inputs = random_inputs(config, 2, 7);
    ForwardCache cache;
    forward(config, params, {inputs}, &cache);
    CHECK_THROWS_AS(backward(config, params, cache, std::vector<double>(5, 0.0)), Error);
}

} // TEST_SUITE
