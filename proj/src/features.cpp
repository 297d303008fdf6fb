#include "slafc/features.hpp"

#include <algorithm>
#include <cmath>

namespace slafc {

std::string_view model_kind_name(ModelKind kind) {
    switch (kind) {
    case ModelKind::Univariate: return "univariate";
    case ModelKind::MvRan: return "mv_ran";
    case ModelKind::MvPeak: return "mv_peak";
    case ModelKind::MvHandover: return "mv_handover";
    case ModelKind::MvAll: return "mv_all";
    }
    return "univariate";
}

std::optional<ModelKind> parse_model_kind(std::string_view text) {
    if (text == "univariate") return ModelKind::Univariate;
    if (text == "mv_ran") return ModelKind::MvRan;
    if (text == "mv_peak") return ModelKind::MvPeak;
    if (text == "mv_handover") return ModelKind::MvHandover;
    if (text == "mv_all") return ModelKind::MvAll;
    return std::nullopt;
}

std::string ChannelRef::name() const {
    switch (kind) {
    case Kind::Ran: return label.name();
    case Kind::PeakHourFlag: return "peak_hour";
    case Kind::DayOfWeekFlag: return "day_of_week";
    case Kind::McIn: return "mc_in";
    case Kind::McOut: return "mc_out";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// Feature extraction
// ---------------------------------------------------------------------------

double pearson_correlation(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) {
        fail(Errc::DegenerateInput, "pearson_correlation: length mismatch");
    }
    const std::size_t n = x.size();
    if (n < 2) fail(Errc::DegenerateInput, "pearson_correlation: need at least 2 points");

    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);

    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) {
        fail(Errc::DegenerateInput, "pearson_correlation: constant sequence");
    }
    return sxy / std::sqrt(sxx * syy);
}

namespace {

// Values of one column over the union of the (disjoint, sorted) intervals.
std::vector<double> gather(const std::vector<double>& column,
                           const std::vector<IndexRange>& ranges) {
    std::vector<double> out;
    for (const auto& r : ranges) {
        for (std::int64_t i = r.begin; i < r.end; ++i) {
            out.push_back(column[static_cast<std::size_t>(i)]);
        }
    }
    return out;
}

void check_ranges(const std::vector<IndexRange>& ranges, std::size_t length,
                  const char* what) {
    for (const auto& r : ranges) {
        if (r.begin < 0 || r.end > static_cast<std::int64_t>(length) || r.begin > r.end) {
            fail(Errc::InconsistentDurations,
                 std::string(what) + " range outside the series (length " +
                     std::to_string(length) + ")");
        }
    }
}

} // namespace

std::vector<FeatureLabel> select_features(const TelemetryStore& store, const CellId& cell,
                                          SliceKind slice, double threshold,
                                          const std::vector<IndexRange>& train_ranges) {
    if (!(threshold > 0.0 && threshold <= 1.0)) {
        fail(Errc::ConfigError, "correlation threshold must be in (0,1]");
    }
    const CellSeries* series = store.find(cell, slice);
    if (series == nullptr) {
        fail(Errc::EmptyDataset,
             "no series for " + cell.str() + "/" + std::string(slice_name(slice)));
    }
    check_ranges(train_ranges, series->size(), "train");

    const auto f0 = gather(series->values(FeatureLabel::f0()), train_ranges);
    // Per-slice RAN measurements stop at F-RAN2.
    const int candidate_max = slice == SliceKind::Total ? FeatureLabel::kCount - 1 : 2;

    std::vector<FeatureLabel> selected;
    for (int k = 1; k <= candidate_max; ++k) {
        const FeatureLabel label = FeatureLabel::ran(k);
        if (!series->has(label)) continue;
        const auto column = gather(series->values(label), train_ranges);
        double r = 0.0;
        try {
            r = pearson_correlation(f0, column);
        } catch (const Error& e) {
            if (e.code() == Errc::DegenerateInput) continue; // constant channel: skip
            throw;
        }
        if (r >= threshold) selected.push_back(label);
    }
    return selected;
}

PeakTable label_peak_hours(const CellSeries& series,
                           const std::vector<IndexRange>& train_ranges, double ratio) {
    if (!(ratio > 0.0 && ratio < 1.0)) {
        fail(Errc::ConfigError, "peak ratio must be in (0,1)");
    }
    check_ranges(train_ranges, series.size(), "train");
    std::int64_t total = 0;
    for (const auto& r : train_ranges) total += r.length();
    if (total == 0) fail(Errc::DegenerateInput, "label_peak_hours: empty training span");

    const auto& f0 = series.values(FeatureLabel::f0());
    std::array<double, 24> sum{};
    std::array<std::int64_t, 24> count{};
    for (const auto& r : train_ranges) {
        for (std::int64_t i = r.begin; i < r.end; ++i) {
            const int hod = hour_of_day(series.hours[static_cast<std::size_t>(i)]);
            sum[hod] += f0[static_cast<std::size_t>(i)];
            count[hod] += 1;
        }
    }

    std::array<double, 24> mean{};
    double peak = 0.0;
    for (int h = 0; h < 24; ++h) {
        mean[h] = count[h] > 0 ? sum[h] / static_cast<double>(count[h]) : 0.0;
        peak = std::max(peak, mean[h]);
    }

    PeakTable flags{};
    for (int h = 0; h < 24; ++h) {
        flags[h] = mean[h] > ratio * peak; // all-zero span: 0 > 0 is false
    }
    return flags;
}

std::vector<bool> day_of_week_flags(std::span<const EpochHour> timestamps) {
    std::vector<bool> flags;
    flags.reserve(timestamps.size());
    for (EpochHour h : timestamps) flags.push_back(!is_weekend(h));
    return flags;
}

std::vector<double> mobility_aggregate(const TelemetryStore& store, const CellId& target,
                                       Direction direction, IndexRange range) {
    const auto neighbors = direction == Direction::Incoming ? store.handovers.incoming(target)
                                                            : store.handovers.outgoing(target);
    if (neighbors.empty()) {
        fail(Errc::NoNeighbors,
             target.str() + " has no " +
                 (direction == Direction::Incoming ? "incoming" : "outgoing") + " edges");
    }

    // Neighbor traffic is always the Total series; handover counters are not
    // slice-resolved. All participating series must share the same timeline.
    std::vector<const CellSeries*> columns;
    double weight_sum = 0.0;
    EpochHour anchor = 0;
    for (const auto& [neighbor, rate] : neighbors) {
        const CellSeries* series = store.find(neighbor, SliceKind::Total);
        if (series == nullptr) {
            fail(Errc::MissingNeighborSeries, "no Total series for neighbor " + neighbor.str());
        }
        if (range.begin < 0 || range.end > static_cast<std::int64_t>(series->size())) {
            fail(Errc::MissingNeighborSeries,
                 "neighbor " + neighbor.str() + " does not cover the requested range");
        }
        if (columns.empty()) {
            anchor = series->start();
        } else if (series->start() != anchor) {
            fail(Errc::ShapeMismatch, "neighbor series of " + target.str() + " are misaligned");
        }
        columns.push_back(series);
        weight_sum += rate;
    }
    if (weight_sum <= 0.0) {
        fail(Errc::NoNeighbors, target.str() + ": all neighbor weights are zero");
    }

    std::vector<double> out(static_cast<std::size_t>(range.length()), 0.0);
    for (std::size_t c = 0; c < columns.size(); ++c) {
        const auto& f0 = columns[c]->values(FeatureLabel::f0());
        const double w = neighbors[c].second / weight_sum;
        for (std::int64_t t = range.begin; t < range.end; ++t) {
            out[static_cast<std::size_t>(t - range.begin)] += w * f0[static_cast<std::size_t>(t)];
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Supervised datasets
// ---------------------------------------------------------------------------

ChannelMatrix assemble_channels(const TelemetryStore& store, const CellSeries& series,
                                const FeatureSet& channels, const PeakTable& peak) {
    const std::size_t len = series.size();
    ChannelMatrix matrix;
    matrix.columns.reserve(channels.size());
    for (const auto& channel : channels) {
        switch (channel.kind) {
        case ChannelRef::Kind::Ran:
            matrix.columns.push_back(series.values(channel.label));
            break;
        case ChannelRef::Kind::PeakHourFlag: {
            std::vector<double> col(len);
            for (std::size_t t = 0; t < len; ++t) {
                col[t] = peak[hour_of_day(series.hours[t])] ? 1.0 : 0.0;
            }
            matrix.columns.push_back(std::move(col));
            break;
        }
        case ChannelRef::Kind::DayOfWeekFlag: {
            std::vector<double> col(len);
            for (std::size_t t = 0; t < len; ++t) {
                col[t] = is_weekend(series.hours[t]) ? 0.0 : 1.0;
            }
            matrix.columns.push_back(std::move(col));
            break;
        }
        case ChannelRef::Kind::McIn:
            matrix.columns.push_back(mobility_aggregate(
                store, series.cell, Direction::Incoming, {0, static_cast<std::int64_t>(len)}));
            break;
        case ChannelRef::Kind::McOut:
            matrix.columns.push_back(mobility_aggregate(
                store, series.cell, Direction::Outgoing, {0, static_cast<std::int64_t>(len)}));
            break;
        }
    }
    return matrix;
}

namespace {

FeatureSet compose_channels(ModelKind kind, const std::vector<FeatureLabel>& selected) {
    FeatureSet channels;
    channels.push_back({ChannelRef::Kind::Ran, FeatureLabel::f0()});
    const bool ran = kind == ModelKind::MvRan || kind == ModelKind::MvAll;
    const bool calendar = kind == ModelKind::MvPeak || kind == ModelKind::MvAll;
    const bool handover = kind == ModelKind::MvHandover || kind == ModelKind::MvAll;
    if (ran) {
        for (const auto& label : selected) channels.push_back({ChannelRef::Kind::Ran, label});
    }
    if (calendar) {
        channels.push_back({ChannelRef::Kind::PeakHourFlag, {}});
        channels.push_back({ChannelRef::Kind::DayOfWeekFlag, {}});
    }
    if (handover) {
        channels.push_back({ChannelRef::Kind::McIn, {}});
        channels.push_back({ChannelRef::Kind::McOut, {}});
    }
    return channels;
}

std::vector<ChannelStats> train_stats(const ChannelMatrix& matrix, const FeatureSet& channels,
                                      const std::vector<IndexRange>& train_ranges) {
    std::vector<ChannelStats> stats(channels.size());
    for (std::size_t c = 0; c < channels.size(); ++c) {
        if (channels[c].is_flag()) {
            stats[c] = {0.0, 1.0, false};
            continue;
        }
        const auto values = gather(matrix.columns[c], train_ranges);
        if (values.empty()) {
            fail(Errc::EmptyDataset, "empty training span for normalization statistics");
        }
        double mean = 0.0;
        for (double v : values) mean += v;
        mean /= static_cast<double>(values.size());
        double var = 0.0;
        for (double v : values) var += (v - mean) * (v - mean);
        var /= static_cast<double>(values.size());
        double std = std::sqrt(var);
        if (std == 0.0) std = 1.0; // constant channel: centering only
        stats[c] = {mean, std, true};
    }
    return stats;
}

SupervisedDataset make_windows(const ChannelMatrix& matrix,
                               const std::vector<ChannelStats>& stats, const CellSeries& series,
                               const std::vector<IndexRange>& ranges, int window,
                               const char* what) {
    const std::size_t channel_count = matrix.columns.size();
    std::int64_t span = 0;
    std::size_t samples = 0;
    for (const auto& r : ranges) {
        span += r.length();
        samples += static_cast<std::size_t>(std::max<std::int64_t>(0, r.length() - window));
    }
    if (span > 0 && samples == 0) {
        fail(Errc::WindowTooLong, std::string(what) + " span of " + std::to_string(span) +
                                      " hours yields no " + std::to_string(window) +
                                      "-hour windows");
    }

    SupervisedDataset ds;
    ds.window = window;
    ds.inputs.resize(samples, static_cast<std::size_t>(window), channel_count);
    ds.targets.resize(samples);
    ds.target_hours.resize(samples);

    const auto norm = [&](std::size_t c, double v) {
        return stats[c].normalized ? (v - stats[c].mean) / stats[c].std : v;
    };

    std::size_t n = 0;
    for (const auto& r : ranges) {
        for (std::int64_t i = r.begin; i + window < r.end; ++i, ++n) {
            for (int t = 0; t < window; ++t) {
                const auto row = static_cast<std::size_t>(i + t);
                for (std::size_t c = 0; c < channel_count; ++c) {
                    ds.inputs.at(n, t, c) = norm(c, matrix.columns[c][row]);
                }
            }
            const auto target_row = static_cast<std::size_t>(i + window);
            ds.targets[n] = norm(0, matrix.columns[0][target_row]);
            ds.target_hours[n] = series.hours[target_row];
        }
    }
    return ds;
}

} // namespace

DatasetBundle build_dataset(const TelemetryStore& store, const CellId& cell, SliceKind slice,
                            ModelKind kind, const FoldSplit& split, int window,
                            double threshold, double peak_ratio) {
    if (window < 1) fail(Errc::ConfigError, "window must be >= 1");
    const CellSeries* series = store.find(cell, slice);
    if (series == nullptr) {
        fail(Errc::EmptyDataset,
             "no series for " + cell.str() + "/" + std::string(slice_name(slice)));
    }
    const auto report = validate_series(*series);
    if (!report.gap_indices.empty()) {
        std::string msg = cell.str() + "/" + std::string(slice_name(slice)) + " has " +
                          std::to_string(report.gap_count()) + " gap(s) at hour offsets";
        for (std::size_t i = 0; i < std::min<std::size_t>(report.gap_indices.size(), 8); ++i) {
            msg += ' ' + std::to_string(report.gap_indices[i]);
        }
        fail(Errc::GapInSeries, msg);
    }
    check_ranges(split.train, series->size(), "train");
    check_ranges({split.validation, split.test}, series->size(), "split");

    DatasetBundle bundle;
    bundle.schema.cell = cell;
    bundle.schema.slice = slice;
    bundle.schema.kind = kind;
    bundle.fold = split;

    if (kind == ModelKind::MvRan || kind == ModelKind::MvAll) {
        bundle.schema.selected = select_features(store, cell, slice, threshold, split.train);
    }
    if (kind == ModelKind::MvPeak || kind == ModelKind::MvAll) {
        bundle.schema.peak = label_peak_hours(*series, split.train, peak_ratio);
        bundle.schema.has_peak = true;
    }
    bundle.schema.channels = compose_channels(kind, bundle.schema.selected);

    const ChannelMatrix matrix =
        assemble_channels(store, *series, bundle.schema.channels, bundle.schema.peak);
    bundle.schema.stats = train_stats(matrix, bundle.schema.channels, split.train);

    bundle.train = make_windows(matrix, bundle.schema.stats, *series, split.train, window, "train");
    bundle.validation =
        make_windows(matrix, bundle.schema.stats, *series, {split.validation}, window, "validation");
    bundle.test = make_windows(matrix, bundle.schema.stats, *series, {split.test}, window, "test");
    return bundle;
}

DatasetBundle build_dataset_with_schema(const TelemetryStore& store, const GroupSchema& schema,
                                        const FoldSplit& split, int window) {
    if (window < 1) fail(Errc::ConfigError, "window must be >= 1");
    const CellSeries* series = store.find(schema.cell, schema.slice);
    if (series == nullptr) {
        fail(Errc::EmptyDataset, "no series for " + schema.cell.str() + "/" +
                                     std::string(slice_name(schema.slice)));
    }
    if (!series->contiguous()) {
        fail(Errc::GapInSeries, schema.cell.str() + " series has gaps");
    }
    check_ranges(split.train, series->size(), "train");
    check_ranges({split.validation, split.test}, series->size(), "split");

    DatasetBundle bundle;
    bundle.schema = schema;
    bundle.fold = split;

    const ChannelMatrix matrix =
        assemble_channels(store, *series, schema.channels, schema.peak);
    bundle.train = make_windows(matrix, schema.stats, *series, split.train, window, "train");
    bundle.validation =
        make_windows(matrix, schema.stats, *series, {split.validation}, window, "validation");
    bundle.test = make_windows(matrix, schema.stats, *series, {split.test}, window, "test");
    return bundle;
}

} // namespace slafc
