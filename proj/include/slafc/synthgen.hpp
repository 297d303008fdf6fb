#ifndef SLAFC_SYNTHGEN_HPP
#define SLAFC_SYNTHGEN_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "slafc/telemetry.hpp"

namespace slafc {

enum class Regularity { Regular, Bursty };

// Shape parameters for one generated (cell, slice) series. Volume units are
// arbitrary; only the qualitative structure matters.
struct CellProfile {
    double base_load = 100.0;       // units/hour, > 0
    double daily_amplitude = 0.0;   // units
    double weekend_factor = 1.0;    // (0, 1]
    double spike_rate = 0.0;        // expected spikes/day
    double spike_magnitude = 1.0;   // multiplier applied during a spike
    double noise_std = 0.0;         // units
    Regularity regularity = Regularity::Regular;
};

struct HandoverSpec {
    CellId src;
    CellId dst;
    double rate_percent = 0.0;
    double coupling = 0.0; // fraction of the scaled neighbor deviation moved over
};

// Deterministic additive deviation injected into one series at one hour
// (offset from the scenario start). Lets tests plant known disturbances.
struct Impulse {
    CellId cell;
    SliceKind slice = SliceKind::Total;
    std::int64_t hour = 0;
    double delta = 0.0;
};

struct ScenarioConfig {
    // Each cell carries either a single Total profile or per-slice profiles
    // (any subset of voice/data/fwa); in the latter case the Total series is
    // generated as the exact sum of the slices.
    std::vector<std::pair<CellId, std::map<SliceKind, CellProfile>>> cells;
    int weeks = 1;
    std::vector<HandoverSpec> handover_edges;
    double aux_feature_noise = 0.0;
    std::uint64_t seed = 0;
    std::vector<Impulse> impulses;

    // All scenarios start on a fixed Monday 00:00 UTC so calendar structure
    // is reproducible.
    static EpochHour start_hour();

    std::int64_t total_hours() const { return static_cast<std::int64_t>(weeks) * 168; }
};

// Validates the config; throws Error(ConfigError) naming the offending field.
void validate_scenario(const ScenarioConfig& config);

TelemetryStore generate_scenario(const ScenarioConfig& config);

// Pearson coefficient between the given channel and F0 of one series,
// computed by the features module. Throws Error(UnknownLabel) when the
// channel is absent.
double planted_correlation_check(const TelemetryStore& store, const CellId& cell,
                                 SliceKind slice, FeatureLabel label);

// JSON round-trip used by the `gen` subcommand; rejects unknown keys.
ScenarioConfig scenario_from_json(const std::string& text);
std::string scenario_to_json(const ScenarioConfig& config);

} // namespace slafc

#endif // SLAFC_SYNTHGEN_HPP
