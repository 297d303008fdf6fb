#include <doctest.h>

#include <cmath>
#include <vector>

#include "slafc/error.hpp"
#include "slafc/rng.hpp"
#include "slafc/slaloss.hpp"

using namespace slafc;

TEST_SUITE("slaloss") {

TEST_CASE("wMAE penalizes underprovisioning by w") {
    CHECK(loss_value(LossSpec::wmae(3.0), -2.0) == 6.0);
    CHECK(loss_value(LossSpec::wmae(3.0), 2.0) == 2.0);
    CHECK(loss_value(LossSpec::wmae(7.0), 2.0) == 2.0);
    CHECK(loss_value(LossSpec::wmae(5.0), 0.0) == 0.0);
}

TEST_CASE("wMAE with w=1 equals MAE") {
    Rng rng(stream_key(11, "wmae-mae"));
    for (int i = 0; i < 1000; ++i) {
        const double e = rng.uniform(-50.0, 50.0);
        CHECK(loss_value(LossSpec::wmae(1.0), e) == loss_value(LossSpec::mae(), e));
    }
}

TEST_CASE("wMAE relates to MAE by the weight on the violation side") {
    Rng rng(stream_key(12, "wmae-split"));
    for (int i = 0; i < 1000; ++i) {
        const double w = rng.uniform(1.0, 16.0);
        const double e = rng.uniform(-20.0, 20.0);
        const double wmae = loss_value(LossSpec::wmae(w), e);
        const double mae = loss_value(LossSpec::mae(), e);
        if (e < 0) {
            CHECK(wmae == doctest::Approx(w * mae).epsilon(1e-12));
        } else {
            CHECK(wmae == mae);
        }
    }
}

TEST_CASE("pointwise gradients") {
    CHECK(loss_grad(LossSpec::wmae(5.0), -0.1) == -5.0);
    CHECK(loss_grad(LossSpec::wmae(5.0), 0.1) == 1.0);
    CHECK(loss_grad(LossSpec::wmae(5.0), 0.0) == 0.0);
    CHECK(loss_grad(LossSpec::mse(), 3.0) == 6.0);
    CHECK(loss_grad(LossSpec::mae(), -2.0) == -1.0);
    CHECK(loss_grad(LossSpec::huber(1.0), 0.4) == doctest::Approx(0.4));
    CHECK(loss_grad(LossSpec::huber(1.0), 2.5) == doctest::Approx(1.0));
    CHECK(loss_grad(LossSpec::logcosh(), 0.7) == doctest::Approx(std::tanh(0.7)));
}

TEST_CASE("gradients match central differences away from kinks") {
    const LossSpec specs[] = {LossSpec::wmae(4.0), LossSpec::mae(), LossSpec::mse(),
                              LossSpec::huber(0.8), LossSpec::logcosh()};
    Rng rng(stream_key(13, "loss-fd"));
    const double eps = 1e-6;
    for (const auto& spec : specs) {
        for (int i = 0; i < 200; ++i) {
            double e = rng.uniform(-5.0, 5.0);
            if (std::abs(e) < 1e-3) e += 0.01;                       // wMAE/MAE kink
            if (spec.kind == LossKind::Huber &&
                std::abs(std::abs(e) - spec.delta) < 1e-3) {
                e += 0.01; // Huber joins are only C1
            }
            const double numeric =
                (loss_value(spec, e + eps) - loss_value(spec, e - eps)) / (2 * eps);
            CHECK(loss_grad(spec, e) == doctest::Approx(numeric).epsilon(1e-8));
        }
    }
}

TEST_CASE("violation rate counts strictly negative errors") {
    CHECK(sla_violation_rate(std::vector<double>{-1, 1, 1, 1}) == 0.25);
    CHECK(sla_violation_rate(std::vector<double>{2, 3, 0.5}) == 0.0);
    CHECK(sla_violation_rate(std::vector<double>{0.0, 0.0}) == 0.0);
    CHECK(sla_violation_rate(std::vector<double>{-1, -2}) == 1.0);
    CHECK_THROWS_AS(sla_violation_rate({}), Error);
}

TEST_CASE("overprovisioning volume averages the positive errors") {
    CHECK(overprovisioning_volume(std::vector<double>{2, 4, -1}) == 3.0);
    CHECK(overprovisioning_volume(std::vector<double>{-2, -4}) == 0.0);
    CHECK(overprovisioning_volume(std::vector<double>{5}) == 5.0);
    CHECK_THROWS_AS(overprovisioning_volume({}), Error);
}

TEST_CASE("SLA-based loss is the mean wMAE") {
    CHECK(sla_based_loss(std::vector<double>{-1, 1}, 3.0) == 2.0);
    CHECK(sla_based_loss(std::vector<double>{0, 0, 0}, 7.0) == 0.0);

    Rng rng(stream_key(14, "sla-loss"));
    std::vector<double> errors;
    for (int i = 0; i < 64; ++i) errors.push_back(rng.uniform(-3.0, 3.0));
    double mae = 0.0;
    for (double e : errors) mae += std::abs(e);
    mae /= static_cast<double>(errors.size());
    CHECK(sla_based_loss(errors, 1.0) == doctest::Approx(mae).epsilon(1e-12));
}

TEST_CASE("SLA-based loss is non-decreasing in w when violations exist") {
    Rng rng(stream_key(15, "monotone-w"));
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> errors;
        for (int i = 0; i < 32; ++i) errors.push_back(rng.uniform(-2.0, 2.0));
        errors.push_back(-0.5); // at least one violation
        double prev = sla_based_loss(errors, 1.0);
        for (double w : {1.5, 2.0, 4.0, 8.0, 16.0}) {
            const double cur = sla_based_loss(errors, w);
            CHECK(cur > prev);
            prev = cur;
        }
    }
}

TEST_CASE("metric ranges") {
    Rng rng(stream_key(16, "ranges"));
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> errors;
        const int n = 1 + rng.uniform_int(0, 40);
        for (int i = 0; i < n; ++i) errors.push_back(rng.uniform(-10.0, 10.0));
        const double rate = sla_violation_rate(errors);
        CHECK(rate >= 0.0);
        CHECK(rate <= 1.0);
        CHECK(overprovisioning_volume(errors) >= 0.0);
    }
}

TEST_CASE("spec validation") {
    CHECK_THROWS_AS(LossSpec::wmae(0.5), Error);
    CHECK_THROWS_AS(LossSpec::huber(0.0), Error);
    CHECK(parse_loss_kind("logcosh") == LossKind::LogCosh);
    CHECK(!parse_loss_kind("quantile"));
}

} // TEST_SUITE
