#include "slafc/slaloss.hpp"

#include <cmath>

#include "slafc/error.hpp"

namespace slafc {

std::string_view loss_kind_name(LossKind kind) {
    switch (kind) {
    case LossKind::WMae: return "wmae";
    case LossKind::Mae: return "mae";
    case LossKind::Mse: return "mse";
    case LossKind::Huber: return "huber";
    case LossKind::LogCosh: return "logcosh";
    }
    return "wmae";
}

std::optional<LossKind> parse_loss_kind(std::string_view text) {
    if (text == "wmae") return LossKind::WMae;
    if (text == "mae") return LossKind::Mae;
    if (text == "mse") return LossKind::Mse;
    if (text == "huber") return LossKind::Huber;
    if (text == "logcosh") return LossKind::LogCosh;
    return std::nullopt;
}

LossSpec LossSpec::wmae(double w) {
    if (!(w >= 1.0)) fail(Errc::ConfigError, "wMAE weight must be >= 1");
    return {LossKind::WMae, w, 1.0};
}

LossSpec LossSpec::huber(double delta) {
    if (!(delta > 0.0)) fail(Errc::ConfigError, "Huber delta must be > 0");
    return {LossKind::Huber, 1.0, delta};
}

double loss_value(const LossSpec& spec, double e) {
    switch (spec.kind) {
    case LossKind::WMae:
        return e <= 0.0 ? spec.weight * std::abs(e) : e;
    case LossKind::Mae:
        return std::abs(e);
    case LossKind::Mse:
        return e * e;
    case LossKind::Huber: {
        const double a = std::abs(e);
        return a <= spec.delta ? 0.5 * e * e : spec.delta * (a - 0.5 * spec.delta);
    }
    case LossKind::LogCosh: {
        // log(cosh(e)) computed without overflow for large |e|.
        const double a = std::abs(e);
        return a + std::log1p(std::exp(-2.0 * a)) - std::log(2.0);
    }
    }
    return 0.0;
}

double loss_grad(const LossSpec& spec, double e) {
    switch (spec.kind) {
    case LossKind::WMae:
        if (e < 0.0) return -spec.weight;
        if (e > 0.0) return 1.0;
        return 0.0; // subgradient at the kink
    case LossKind::Mae:
        if (e < 0.0) return -1.0;
        if (e > 0.0) return 1.0;
        return 0.0;
    case LossKind::Mse:
        return 2.0 * e;
    case LossKind::Huber:
        if (e > spec.delta) return spec.delta;
        if (e < -spec.delta) return -spec.delta;
        return e;
    case LossKind::LogCosh:
        return std::tanh(e);
    }
    return 0.0;
}

double sla_violation_rate(std::span<const double> errors) {
    if (errors.empty()) fail(Errc::EmptyInput, "sla_violation_rate on empty error set");
    std::size_t violations = 0;
    for (double e : errors) {
        if (e < 0.0) ++violations;
    }
    return static_cast<double>(violations) / static_cast<double>(errors.size());
}

double overprovisioning_volume(std::span<const double> errors) {
    if (errors.empty()) fail(Errc::EmptyInput, "overprovisioning_volume on empty error set");
    double sum = 0.0;
    std::size_t positives = 0;
    for (double e : errors) {
        if (e > 0.0) {
            sum += e;
            ++positives;
        }
    }
    return positives == 0 ? 0.0 : sum / static_cast<double>(positives);
}

double sla_based_loss(std::span<const double> errors, double weight) {
    if (errors.empty()) fail(Errc::EmptyInput, "sla_based_loss on empty error set");
    const LossSpec spec{LossKind::WMae, weight, 1.0};
    double sum = 0.0;
    for (double e : errors) sum += loss_value(spec, e);
    return sum / static_cast<double>(errors.size());
}

} // namespace slafc
