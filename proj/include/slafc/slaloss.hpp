#ifndef SLAFC_SLALOSS_HPP
#define SLAFC_SLALOSS_HPP

#include <optional>
#include <span>
#include <string>

namespace slafc {

// Loss families available for training. WMae is the toolkit's native
// objective; the rest form the comparison set.
enum class LossKind { WMae, Mae, Mse, Huber, LogCosh };

std::string_view loss_kind_name(LossKind kind);
std::optional<LossKind> parse_loss_kind(std::string_view text);

struct LossSpec {
    LossKind kind = LossKind::WMae;
    double weight = 1.0; // w >= 1, WMae only
    double delta = 1.0;  // Huber only, > 0

    static LossSpec wmae(double w);
    static LossSpec mae() { return {LossKind::Mae, 1.0, 1.0}; }
    static LossSpec mse() { return {LossKind::Mse, 1.0, 1.0}; }
    static LossSpec huber(double delta);
    static LossSpec logcosh() { return {LossKind::LogCosh, 1.0, 1.0}; }
};

// Prediction error convention throughout: e = predicted - actual.
// Negative e is an SLA violation (underprovisioning), positive e is
// overprovisioning.

// Pointwise loss. WMae: w*|e| for e <= 0, e for e > 0.
double loss_value(const LossSpec& spec, double e);

// d loss / d prediction. WMae: -w for e < 0, +1 for e > 0, 0 at the kink.
double loss_grad(const LossSpec& spec, double e);

// Fraction of samples with e < 0; e == 0 counts as a non-violation.
double sla_violation_rate(std::span<const double> errors);

// Mean of the strictly positive errors; 0 when none exist.
double overprovisioning_volume(std::span<const double> errors);

// Mean weighted-MAE over the samples, the headline test metric. Callers pass
// denormalized (physical-unit) errors.
double sla_based_loss(std::span<const double> errors, double weight);

} // namespace slafc

#endif // SLAFC_SLALOSS_HPP
