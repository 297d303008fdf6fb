#ifndef SLAFC_TELEMETRY_HPP
#define SLAFC_TELEMETRY_HPP

#include <array>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "slafc/error.hpp"
#include "slafc/hours.hpp"

namespace slafc {

// ---------------------------------------------------------------------------
// Identifiers
// ---------------------------------------------------------------------------

// One cell of a base station, e.g. ("A", 2) printed as "A2". Base station
// names must not end in a digit so the printed form stays unambiguous.
struct CellId {
    std::string base_station;
    int cell_index = 0;

    std::string str() const { return base_station + std::to_string(cell_index); }

    auto operator<=>(const CellId&) const = default;
};

// Validates the CellId invariants; throws Error(ConfigError).
void validate_cell_id(const CellId& id);

enum class SliceKind { Total, Voice, Data, Fwa };

std::string_view slice_name(SliceKind s);
std::optional<SliceKind> parse_slice(std::string_view text);

// Feature channel label: F0 (downlink traffic volume) or F-RAN1..F-RAN19.
class FeatureLabel {
public:
    static constexpr int kCount = 20;

    constexpr FeatureLabel() = default;

    static constexpr FeatureLabel f0() { return FeatureLabel(0); }
    static FeatureLabel ran(int k);          // k in 1..19
    static FeatureLabel from_index(int i);   // i in 0..19
    static std::optional<FeatureLabel> parse(std::string_view text);

    constexpr int index() const { return index_; }
    constexpr bool is_f0() const { return index_ == 0; }
    std::string name() const;

    auto operator<=>(const FeatureLabel&) const = default;

private:
    constexpr explicit FeatureLabel(int i) : index_(i) {}
    int index_ = 0;
};

// ---------------------------------------------------------------------------
// Series and store
// ---------------------------------------------------------------------------

// Hourly multivariate telemetry for one (cell, slice) pair. `hours` is sorted
// and duplicate-free; gaps are representable (validate_series reports them,
// dataset construction rejects them). Slice series carry only F0/F-RAN1/F-RAN2.
struct CellSeries {
    CellId cell;
    SliceKind slice = SliceKind::Total;
    std::vector<EpochHour> hours;
    std::array<std::vector<double>, FeatureLabel::kCount> features; // empty = absent

    std::size_t size() const { return hours.size(); }
    EpochHour start() const { return hours.empty() ? 0 : hours.front(); }

    bool has(FeatureLabel label) const { return !features[label.index()].empty(); }
    const std::vector<double>& values(FeatureLabel label) const;

    // True when hours run start, start+1, ... with no gaps.
    bool contiguous() const;
};

// Directed handover rates between cells, in percent of the source cell's
// handovers. Only the operator's top neighbors are listed, so per-cell rates
// need not sum to 100.
class HandoverMatrix {
public:
    void add(const CellId& src, const CellId& dst, double rate_percent);

    bool empty() const { return rates_.empty(); }
    std::size_t size() const { return rates_.size(); }

    // Neighbors with an edge toward `target` (incoming) paired with the rate.
    std::vector<std::pair<CellId, double>> incoming(const CellId& target) const;
    // Neighbors `target` hands over to (outgoing).
    std::vector<std::pair<CellId, double>> outgoing(const CellId& target) const;

    const std::map<std::pair<CellId, CellId>, double>& entries() const { return rates_; }

private:
    std::map<std::pair<CellId, CellId>, double> rates_;
};

struct TelemetryStore {
    std::vector<CellSeries> series;
    HandoverMatrix handovers;

    const CellSeries* find(const CellId& cell, SliceKind slice) const;
    CellSeries* find(const CellId& cell, SliceKind slice);

    // Inserts a series, enforcing one series per (cell, slice).
    void insert(CellSeries s);
};

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

struct ValidationReport {
    std::size_t length = 0;
    // Hour offsets from the series start that are missing.
    std::vector<std::int64_t> gap_indices;
    // Positions (into the stored rows) holding negative F0 values.
    std::vector<std::size_t> negative_indices;

    std::size_t gap_count() const { return gap_indices.size(); }
    std::size_t negative_count() const { return negative_indices.size(); }
    bool clean() const { return gap_indices.empty() && negative_indices.empty(); }
};

ValidationReport validate_series(const CellSeries& series);

// ---------------------------------------------------------------------------
// Folds
// ---------------------------------------------------------------------------

// Half-open interval of hourly indices into a series.
struct IndexRange {
    std::int64_t begin = 0;
    std::int64_t end = 0;

    std::int64_t length() const { return end - begin; }
    bool empty() const { return end <= begin; }
    bool contains(std::int64_t i) const { return i >= begin && i < end; }

    auto operator<=>(const IndexRange&) const = default;
};

// One rotation of the rolling train/validation split. Training may be the
// union of up to two intervals when the validation segment sits mid-span.
struct FoldSplit {
    std::vector<IndexRange> train;
    IndexRange validation;
    IndexRange test;

    std::int64_t train_hours() const;
};

// Splits `total_hours` into `fold_count` rotations: the pre-test span is cut
// into fold_count contiguous segments of segment_weeks each; fold i validates
// on segment i and trains on the rest. The final test_weeks weeks are the test
// range of every fold. Requires
//   total_hours == (fold_count * segment_weeks + test_weeks) * 168.
std::vector<FoldSplit> split_folds(std::int64_t total_hours, int fold_count,
                                   int segment_weeks, int test_weeks);

// ---------------------------------------------------------------------------
// CSV interfaces
// ---------------------------------------------------------------------------

// telemetry CSV header:
//   timestamp,base_station,cell_index,slice,F0,F-RAN1,...,F-RAN19
// handover CSV header:
//   src_base,src_index,dst_base,dst_index,rate_percent
TelemetryStore load_telemetry(const std::filesystem::path& telemetry_csv,
                              const std::optional<std::filesystem::path>& handover_csv = {});

void save_telemetry(const TelemetryStore& store,
                    const std::filesystem::path& telemetry_csv,
                    const std::optional<std::filesystem::path>& handover_csv = {});

} // namespace slafc

#endif // SLAFC_TELEMETRY_HPP
