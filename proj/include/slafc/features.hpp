#ifndef SLAFC_FEATURES_HPP
#define SLAFC_FEATURES_HPP

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "slafc/telemetry.hpp"

namespace slafc {

// Input feature families per model, mirroring the multivariate LSTM variants.
enum class ModelKind { Univariate, MvRan, MvPeak, MvHandover, MvAll };

std::string_view model_kind_name(ModelKind kind);
std::optional<ModelKind> parse_model_kind(std::string_view text);

enum class Direction { Incoming, Outgoing };

// One input channel of a supervised dataset.
struct ChannelRef {
    enum class Kind { Ran, PeakHourFlag, DayOfWeekFlag, McIn, McOut };

    Kind kind = Kind::Ran;
    FeatureLabel label{}; // meaningful for Kind::Ran only

    bool is_flag() const { return kind == Kind::PeakHourFlag || kind == Kind::DayOfWeekFlag; }
    std::string name() const;

    auto operator<=>(const ChannelRef&) const = default;
};

// Ordered channel list; the first channel is always RAN(F0).
using FeatureSet = std::vector<ChannelRef>;

// Train-split normalization statistics for one channel. Boolean flags are
// kept raw (normalized == false). A constant channel gets std 1 so z-scoring
// degrades to centering.
struct ChannelStats {
    double mean = 0.0;
    double std = 1.0;
    bool normalized = true;

    auto operator<=>(const ChannelStats&) const = default;
};

// Hour-of-day peak flags learned from the training split.
using PeakTable = std::array<bool, 24>;

// ---------------------------------------------------------------------------
// Feature extraction
// ---------------------------------------------------------------------------

// Standard Pearson coefficient. Throws Error(DegenerateInput) for sequences
// shorter than 2, mismatched lengths, or a constant argument.
double pearson_correlation(std::span<const double> x, std::span<const double> y);

// Labels (excluding F0) whose correlation with F0 over the training hours
// reaches `threshold`, in label order. Slice series only offer F-RAN1/F-RAN2.
// Constant channels are skipped rather than fatal.
std::vector<FeatureLabel> select_features(const TelemetryStore& store, const CellId& cell,
                                          SliceKind slice, double threshold,
                                          const std::vector<IndexRange>& train_ranges);

// Flags hour-of-day bins whose mean F0 over the training hours exceeds
// ratio x (max over bins). An all-zero training span flags nothing.
PeakTable label_peak_hours(const CellSeries& series,
                           const std::vector<IndexRange>& train_ranges, double ratio);

// 1 for Monday-Friday, 0 for Saturday/Sunday.
std::vector<bool> day_of_week_flags(std::span<const EpochHour> timestamps);

// Weighted average of neighbor Total F0 over `range`, weights = handover
// rate of each edge in the requested direction. Slice-agnostic by design:
// handover counters are not slice-resolved.
std::vector<double> mobility_aggregate(const TelemetryStore& store, const CellId& target,
                                       Direction direction, IndexRange range);

// ---------------------------------------------------------------------------
// Supervised datasets
// ---------------------------------------------------------------------------

// Dense sample-major tensor: N samples x T hours x C channels.
struct Tensor3 {
    std::vector<double> v;
    std::size_t n = 0;
    std::size_t rows = 0;
    std::size_t cols = 0;

    void resize(std::size_t n_, std::size_t rows_, std::size_t cols_) {
        n = n_;
        rows = rows_;
        cols = cols_;
        v.assign(n * rows * cols, 0.0);
    }

    double& at(std::size_t i, std::size_t t, std::size_t c) {
        return v[(i * rows + t) * cols + c];
    }
    double at(std::size_t i, std::size_t t, std::size_t c) const {
        return v[(i * rows + t) * cols + c];
    }

    // Pointer to sample i's T x C block.
    double* sample(std::size_t i) { return v.data() + i * rows * cols; }
    const double* sample(std::size_t i) const { return v.data() + i * rows * cols; }
};

// Normalized sliding windows for one split range. Targets are the next-hour
// normalized F0; target_hours keeps the absolute hour of each target so
// multi-group architectures can check alignment.
struct SupervisedDataset {
    Tensor3 inputs;                      // N x window x C
    std::vector<double> targets;         // N
    std::vector<EpochHour> target_hours; // N
    int window = 0;

    std::size_t size() const { return targets.size(); }
    std::size_t channel_count() const { return inputs.cols; }
};

// Training-split artifacts that fully describe how one input group's channels
// are derived and normalized. Checkpoints persist this so evaluation never
// recomputes selection, statistics, or peak flags.
struct GroupSchema {
    CellId cell;
    SliceKind slice = SliceKind::Total;
    ModelKind kind = ModelKind::Univariate;

    FeatureSet channels;
    std::vector<ChannelStats> stats;    // per channel
    std::vector<FeatureLabel> selected; // MvRan/MvAll selection result
    PeakTable peak{};                   // valid when has_peak
    bool has_peak = false;

    std::size_t channel_count() const { return channels.size(); }
    const ChannelStats& f0_stats() const { return stats.front(); }
};

struct DatasetBundle {
    GroupSchema schema;
    FoldSplit fold;

    SupervisedDataset train;
    SupervisedDataset validation;
    SupervisedDataset test;
};

// Assembles the windowed datasets for one model kind. Channel composition:
//   Univariate:  {F0}
//   MvRan:       {F0} + selected RAN labels
//   MvPeak:      {F0, PeakHourFlag, DayOfWeekFlag}
//   MvHandover:  {F0, MC-In, MC-Out}
//   MvAll:       union of the above, in that order
// Continuous channels are z-scored with train statistics; flags stay raw.
// The series must be gapless; gaps are a hard Error(GapInSeries).
DatasetBundle build_dataset(const TelemetryStore& store, const CellId& cell, SliceKind slice,
                            ModelKind kind, const FoldSplit& split, int window,
                            double threshold, double peak_ratio = 0.70);

// Rebuilds the windowed datasets from a persisted schema (checkpoint load
// path). Nothing is recomputed from the data beyond the raw channel values.
DatasetBundle build_dataset_with_schema(const TelemetryStore& store, const GroupSchema& schema,
                                        const FoldSplit& split, int window);

// Raw (unnormalized) per-channel values over the full series length.
struct ChannelMatrix {
    std::vector<std::vector<double>> columns;
};

ChannelMatrix assemble_channels(const TelemetryStore& store, const CellSeries& series,
                                const FeatureSet& channels, const PeakTable& peak);

} // namespace slafc

#endif // SLAFC_FEATURES_HPP
