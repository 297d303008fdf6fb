#include "slafc/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "slafc/features.hpp"
#include "slafc/rng.hpp"
#include "json_util.hpp"

namespace slafc {

namespace {

// Evening-peak daily shape: low 00-06, rising 07-11, plateau 12-18,
// peak 19-22, falling 23.
constexpr std::array<double, 24> kDailyTemplate = {
    0.05, 0.03, 0.02, 0.02, 0.03, 0.05, 0.10,      // 00-06
    0.25, 0.40, 0.52, 0.62, 0.70,                  // 07-11
    0.74, 0.73, 0.72, 0.73, 0.74, 0.76, 0.78,      // 12-18
    0.92, 1.00, 0.97, 0.88,                        // 19-22
    0.45,                                          // 23
};

// Positive affine maps for the planted F-RAN channels (index 1..4).
constexpr std::array<double, 5> kAffineScale = {0.0, 0.80, 0.55, 0.35, 0.08};
constexpr std::array<double, 5> kAffineShift = {0.0, 2.00, 1.50, 1.00, 0.50};

// Stream identifiers within one (cell, slice).
enum StreamId : std::uint64_t {
    kStreamSpike = 1,
    kStreamNoise = 2,
    kStreamBurst = 3,
    kStreamAuxBase = 100, // + feature index
};

Rng make_stream(const ScenarioConfig& config, const CellId& cell, SliceKind slice,
                std::uint64_t channel) {
    std::uint64_t key = stream_key(config.seed, "synthgen");
    key = mix_key(key, cell.base_station);
    key = mix_key(key, static_cast<std::uint64_t>(cell.cell_index));
    key = mix_key(key, slice_name(slice));
    key = mix_key(key, channel);
    return Rng(key);
}

int slice_channel_count(SliceKind slice) {
    return slice == SliceKind::Total ? FeatureLabel::kCount : 3;
}

struct SeriesDraft {
    std::vector<double> baseline;  // s(t)
    std::vector<double> deviation; // spikes + noise + impulses
    std::vector<double> transfer;  // coupled-in neighbor deviation
    std::vector<double> f0;        // final
};

using DraftKey = std::pair<CellId, SliceKind>;

} // namespace

EpochHour ScenarioConfig::start_hour() {
    // 2023-01-02T00:00:00Z, a Monday.
    static const EpochHour start = parse_hour_iso8601("2023-01-02T00:00:00Z");
    return start;
}

void validate_scenario(const ScenarioConfig& config) {
    if (config.weeks < 1) fail(Errc::ConfigError, "weeks must be >= 1");
    if (config.aux_feature_noise < 0) fail(Errc::ConfigError, "aux_feature_noise must be >= 0");
    if (config.cells.empty()) fail(Errc::ConfigError, "cells must be non-empty");

    std::map<CellId, const std::map<SliceKind, CellProfile>*> by_cell;
    for (const auto& [cell, profiles] : config.cells) {
        validate_cell_id(cell);
        if (by_cell.count(cell)) fail(Errc::ConfigError, "duplicate cell " + cell.str());
        if (profiles.empty()) fail(Errc::ConfigError, cell.str() + ": no profiles");
        const bool has_total = profiles.count(SliceKind::Total) > 0;
        if (has_total && profiles.size() > 1) {
            fail(Errc::ConfigError,
                 cell.str() + ": a total profile cannot be combined with slice profiles "
                              "(total is generated as the slice sum)");
        }
        for (const auto& [slice, profile] : profiles) {
            const std::string where = cell.str() + "/" + std::string(slice_name(slice));
            if (!(profile.base_load > 0)) fail(Errc::ConfigError, where + ": base_load must be > 0");
            if (profile.daily_amplitude < 0)
                fail(Errc::ConfigError, where + ": daily_amplitude must be >= 0");
            if (!(profile.weekend_factor > 0 && profile.weekend_factor <= 1))
                fail(Errc::ConfigError, where + ": weekend_factor must be in (0,1]");
            if (profile.spike_rate < 0) fail(Errc::ConfigError, where + ": spike_rate must be >= 0");
            if (profile.spike_magnitude < 1)
                fail(Errc::ConfigError, where + ": spike_magnitude must be >= 1");
            if (profile.noise_std < 0) fail(Errc::ConfigError, where + ": noise_std must be >= 0");
        }
        by_cell[cell] = &profiles;
    }

    for (const auto& edge : config.handover_edges) {
        validate_cell_id(edge.src);
        validate_cell_id(edge.dst);
        if (edge.src == edge.dst) fail(Errc::ConfigError, "self edge on " + edge.src.str());
        if (!(edge.rate_percent >= 0 && edge.rate_percent <= 100))
            fail(Errc::ConfigError, "rate_percent must be in [0,100] on " + edge.src.str() + "->" +
                                        edge.dst.str());
        if (!(edge.coupling >= 0 && edge.coupling <= 1))
            fail(Errc::ConfigError, "coupling must be in [0,1] on " + edge.src.str() + "->" +
                                        edge.dst.str());
        const auto src_it = by_cell.find(edge.src);
        const auto dst_it = by_cell.find(edge.dst);
        if (src_it == by_cell.end() || dst_it == by_cell.end()) {
            fail(Errc::ConfigError,
                 "handover edge references unknown cell " +
                     (src_it == by_cell.end() ? edge.src.str() : edge.dst.str()));
        }
        if (edge.coupling > 0) {
            // Coupled deviations are transferred slice-to-slice.
            for (const auto& [slice, _] : *dst_it->second) {
                if (!src_it->second->count(slice)) {
                    fail(Errc::ConfigError, "coupled edge " + edge.src.str() + "->" +
                                                edge.dst.str() +
                                                " requires matching slice profiles");
                }
            }
        }
    }

    for (const auto& impulse : config.impulses) {
        const auto it = by_cell.find(impulse.cell);
        if (it == by_cell.end() || !it->second->count(impulse.slice)) {
            fail(Errc::ConfigError, "impulse targets ungenerated series " + impulse.cell.str() +
                                        "/" + std::string(slice_name(impulse.slice)));
        }
        if (impulse.hour < 0 || impulse.hour >= config.total_hours()) {
            fail(Errc::ConfigError, "impulse hour out of range");
        }
    }
}

TelemetryStore generate_scenario(const ScenarioConfig& config) {
    validate_scenario(config);

    const std::int64_t hours = config.total_hours();
    const EpochHour start = ScenarioConfig::start_hour();

    // Impulses grouped per series.
    std::map<DraftKey, std::vector<std::pair<std::int64_t, double>>> impulses;
    for (const auto& imp : config.impulses) {
        impulses[{imp.cell, imp.slice}].emplace_back(imp.hour, imp.delta);
    }

    // Pass 1: per-series baseline and local deviation (spikes, noise, impulses).
    std::map<DraftKey, SeriesDraft> drafts;
    for (const auto& [cell, profiles] : config.cells) {
        for (const auto& [slice, profile] : profiles) {
            SeriesDraft draft;
            draft.baseline.resize(hours);
            draft.deviation.assign(hours, 0.0);
            draft.transfer.assign(hours, 0.0);

            // Baseline: daily template or piecewise-constant levels.
            if (profile.regularity == Regularity::Bursty) {
                Rng burst = make_stream(config, cell, slice, kStreamBurst);
                std::int64_t t = 0;
                while (t < hours) {
                    const double level = burst.uniform01() * profile.daily_amplitude;
                    const int dwell = burst.uniform_int(6, 48);
                    for (int i = 0; i < dwell && t < hours; ++i, ++t) {
                        const double scale =
                            is_weekend(start + t) ? profile.weekend_factor : 1.0;
                        draft.baseline[t] = (profile.base_load + level) * scale;
                    }
                }
            } else {
                for (std::int64_t t = 0; t < hours; ++t) {
                    const EpochHour h = start + t;
                    const double scale = is_weekend(h) ? profile.weekend_factor : 1.0;
                    draft.baseline[t] =
                        (profile.base_load +
                         profile.daily_amplitude * kDailyTemplate[hour_of_day(h)]) *
                        scale;
                }
            }

            // Spikes: Poisson-timed starts, multiplicative, 1-3 hours long.
            {
                Rng spikes = make_stream(config, cell, slice, kStreamSpike);
                const double start_prob = profile.spike_rate / 24.0;
                int remaining = 0;
                for (std::int64_t t = 0; t < hours; ++t) {
                    const double roll = spikes.uniform01();
                    if (remaining == 0 && roll < start_prob) {
                        remaining = spikes.uniform_int(1, 3);
                    }
                    if (remaining > 0) {
                        draft.deviation[t] +=
                            draft.baseline[t] * (profile.spike_magnitude - 1.0);
                        --remaining;
                    }
                }
            }

            if (profile.noise_std > 0) {
                Rng noise = make_stream(config, cell, slice, kStreamNoise);
                for (std::int64_t t = 0; t < hours; ++t) {
                    draft.deviation[t] += profile.noise_std * noise.normal();
                }
            }

            if (const auto it = impulses.find({cell, slice}); it != impulses.end()) {
                for (const auto& [hour, delta] : it->second) draft.deviation[hour] += delta;
            }

            drafts.emplace(DraftKey{cell, slice}, std::move(draft));
        }
    }

    // Pass 2: move coupled neighbor deviations in with a 1-hour lag. The
    // observable deviation of the source is clamped the same way its final
    // series is, so transfers never exceed what the neighbor actually shows.
    for (const auto& edge : config.handover_edges) {
        if (edge.coupling <= 0 || edge.rate_percent <= 0) continue;
        for (auto& [key, draft] : drafts) {
            if (key.first != edge.dst) continue;
            const auto src_it = drafts.find({edge.src, key.second});
            if (src_it == drafts.end()) continue;
            const SeriesDraft& src = src_it->second;
            const double factor = edge.coupling * edge.rate_percent / 100.0;
            for (std::int64_t t = 1; t < hours; ++t) {
                const double observable =
                    std::max(0.0, src.baseline[t - 1] + src.deviation[t - 1]) -
                    src.baseline[t - 1];
                draft.transfer[t] += factor * observable;
            }
        }
    }

    for (auto& [key, draft] : drafts) {
        draft.f0.resize(hours);
        for (std::int64_t t = 0; t < hours; ++t) {
            draft.f0[t] =
                std::max(0.0, draft.baseline[t] + draft.deviation[t] + draft.transfer[t]);
        }
    }

    // Pass 3: emit series with auxiliary channels.
    TelemetryStore store;
    auto emit_series = [&](const CellId& cell, SliceKind slice, std::vector<double> f0) {
        CellSeries series;
        series.cell = cell;
        series.slice = slice;
        series.hours.resize(hours);
        for (std::int64_t t = 0; t < hours; ++t) series.hours[t] = start + t;

        const int channels = slice_channel_count(slice);
        const int planted = std::min(channels - 1, 4);
        for (int k = 1; k <= planted; ++k) {
            Rng aux = make_stream(config, cell, slice, kStreamAuxBase + k);
            auto& column = series.features[k];
            column.resize(hours);
            for (std::int64_t t = 0; t < hours; ++t) {
                double v = kAffineScale[k] * f0[t] + kAffineShift[k];
                if (config.aux_feature_noise > 0) v += config.aux_feature_noise * aux.normal();
                column[t] = v;
            }
        }
        for (int k = 5; k < channels; ++k) {
            Rng aux = make_stream(config, cell, slice, kStreamAuxBase + k);
            auto& column = series.features[k];
            column.resize(hours);
            const double level = 20.0 + 5.0 * k;
            for (std::int64_t t = 0; t < hours; ++t) {
                double v = level;
                if (config.aux_feature_noise > 0) v += config.aux_feature_noise * aux.normal();
                column[t] = v;
            }
        }
        series.features[0] = std::move(f0);
        store.insert(std::move(series));
    };

    for (const auto& [cell, profiles] : config.cells) {
        if (profiles.count(SliceKind::Total)) {
            emit_series(cell, SliceKind::Total, drafts.at({cell, SliceKind::Total}).f0);
            continue;
        }
        std::vector<double> total(hours, 0.0);
        for (const auto& [slice, _] : profiles) {
            const auto& f0 = drafts.at({cell, slice}).f0;
            for (std::int64_t t = 0; t < hours; ++t) total[t] += f0[t];
            emit_series(cell, slice, f0);
        }
        emit_series(cell, SliceKind::Total, std::move(total));
    }

    for (const auto& edge : config.handover_edges) {
        store.handovers.add(edge.src, edge.dst, edge.rate_percent);
    }

    return store;
}

double planted_correlation_check(const TelemetryStore& store, const CellId& cell,
                                 SliceKind slice, FeatureLabel label) {
    const CellSeries* series = store.find(cell, slice);
    if (series == nullptr) {
        fail(Errc::UnknownLabel,
             "no series for " + cell.str() + "/" + std::string(slice_name(slice)));
    }
    if (!series->has(label)) {
        fail(Errc::UnknownLabel, label.name() + " absent from " + cell.str());
    }
    return pearson_correlation(series->values(FeatureLabel::f0()), series->values(label));
}

// ---------------------------------------------------------------------------
// JSON round-trip
// ---------------------------------------------------------------------------

namespace {

CellProfile profile_from_json(const Json& j, const std::string& context) {
    check_keys(j,
               {"base_load", "daily_amplitude", "weekend_factor", "spike_rate",
                "spike_magnitude", "noise_std", "regularity"},
               context);
    CellProfile p;
    p.base_load = get_or(j, "base_load", p.base_load);
    p.daily_amplitude = get_or(j, "daily_amplitude", p.daily_amplitude);
    p.weekend_factor = get_or(j, "weekend_factor", p.weekend_factor);
    p.spike_rate = get_or(j, "spike_rate", p.spike_rate);
    p.spike_magnitude = get_or(j, "spike_magnitude", p.spike_magnitude);
    p.noise_std = get_or(j, "noise_std", p.noise_std);
    const std::string reg = get_or<std::string>(j, "regularity", "regular");
    if (reg == "regular") {
        p.regularity = Regularity::Regular;
    } else if (reg == "bursty") {
        p.regularity = Regularity::Bursty;
    } else {
        fail(Errc::ConfigError, context + ": regularity must be 'regular' or 'bursty'");
    }
    return p;
}

Json profile_to_json(const CellProfile& p) {
    return Json{{"base_load", p.base_load},
                {"daily_amplitude", p.daily_amplitude},
                {"weekend_factor", p.weekend_factor},
                {"spike_rate", p.spike_rate},
                {"spike_magnitude", p.spike_magnitude},
                {"noise_std", p.noise_std},
                {"regularity", p.regularity == Regularity::Bursty ? "bursty" : "regular"}};
}

SliceKind slice_from_json(const Json& j, const std::string& context) {
    const auto slice = parse_slice(j.get<std::string>());
    if (!slice) fail(Errc::ConfigError, context + ": bad slice '" + j.get<std::string>() + "'");
    return *slice;
}

} // namespace

ScenarioConfig scenario_from_json(const std::string& text) {
    const Json j = parse_json(text, "scenario config");
    check_keys(j, {"seed", "weeks", "aux_feature_noise", "cells", "handover_edges", "impulses"},
               "scenario config");

    ScenarioConfig config;
    config.seed = get_or<std::uint64_t>(j, "seed", 0);
    config.weeks = get_required<int>(j, "weeks", "scenario config");
    config.aux_feature_noise = get_or(j, "aux_feature_noise", 0.0);

    if (!j.contains("cells") || !j.at("cells").is_array()) {
        fail(Errc::ConfigError, "scenario config: 'cells' must be an array");
    }
    for (const auto& jc : j.at("cells")) {
        check_keys(jc, {"base_station", "cell_index", "profiles"}, "cell entry");
        CellId cell{get_required<std::string>(jc, "base_station", "cell entry"),
                    get_required<int>(jc, "cell_index", "cell entry")};
        std::map<SliceKind, CellProfile> profiles;
        const Json& jp = jc.contains("profiles") ? jc.at("profiles") : Json::object();
        check_keys(jp, {"total", "voice", "data", "fwa"}, cell.str() + " profiles");
        for (const auto& [name, jprof] : jp.items()) {
            profiles[*parse_slice(name)] = profile_from_json(jprof, cell.str() + "/" + name);
        }
        config.cells.emplace_back(std::move(cell), std::move(profiles));
    }

    if (j.contains("handover_edges")) {
        for (const auto& je : j.at("handover_edges")) {
            check_keys(je,
                       {"src_base", "src_index", "dst_base", "dst_index", "rate_percent",
                        "coupling"},
                       "handover edge");
            HandoverSpec edge;
            edge.src = {get_required<std::string>(je, "src_base", "handover edge"),
                        get_required<int>(je, "src_index", "handover edge")};
            edge.dst = {get_required<std::string>(je, "dst_base", "handover edge"),
                        get_required<int>(je, "dst_index", "handover edge")};
            edge.rate_percent = get_required<double>(je, "rate_percent", "handover edge");
            edge.coupling = get_or(je, "coupling", 0.0);
            config.handover_edges.push_back(std::move(edge));
        }
    }

    if (j.contains("impulses")) {
        for (const auto& ji : j.at("impulses")) {
            check_keys(ji, {"base_station", "cell_index", "slice", "hour", "delta"}, "impulse");
            Impulse imp;
            imp.cell = {get_required<std::string>(ji, "base_station", "impulse"),
                        get_required<int>(ji, "cell_index", "impulse")};
            imp.slice = slice_from_json(ji.at("slice"), "impulse");
            imp.hour = get_required<std::int64_t>(ji, "hour", "impulse");
            imp.delta = get_required<double>(ji, "delta", "impulse");
            config.impulses.push_back(std::move(imp));
        }
    }

    validate_scenario(config);
    return config;
}

std::string scenario_to_json(const ScenarioConfig& config) {
    Json cells = Json::array();
    for (const auto& [cell, profiles] : config.cells) {
        Json jp = Json::object();
        for (const auto& [slice, profile] : profiles) {
            jp[std::string(slice_name(slice))] = profile_to_json(profile);
        }
        cells.push_back(Json{{"base_station", cell.base_station},
                             {"cell_index", cell.cell_index},
                             {"profiles", jp}});
    }
    Json edges = Json::array();
    for (const auto& e : config.handover_edges) {
        edges.push_back(Json{{"src_base", e.src.base_station},
                             {"src_index", e.src.cell_index},
                             {"dst_base", e.dst.base_station},
                             {"dst_index", e.dst.cell_index},
                             {"rate_percent", e.rate_percent},
                             {"coupling", e.coupling}});
    }
    Json imps = Json::array();
    for (const auto& imp : config.impulses) {
        imps.push_back(Json{{"base_station", imp.cell.base_station},
                            {"cell_index", imp.cell.cell_index},
                            {"slice", std::string(slice_name(imp.slice))},
                            {"hour", imp.hour},
                            {"delta", imp.delta}});
    }
    const Json j{{"seed", config.seed},
                 {"weeks", config.weeks},
                 {"aux_feature_noise", config.aux_feature_noise},
                 {"cells", cells},
                 {"handover_edges", edges},
                 {"impulses", imps}};
    return j.dump(2) + "\n";
}

} // namespace slafc
