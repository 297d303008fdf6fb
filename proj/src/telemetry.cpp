#include "slafc/telemetry.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>

#include "text_util.hpp"

namespace slafc {

namespace {

constexpr int kSliceFeatureCount = 3; // slice rows carry F0, F-RAN1, F-RAN2 only

std::string telemetry_header() {
    std::string h = "timestamp,base_station,cell_index,slice";
    for (int i = 0; i < FeatureLabel::kCount; ++i) {
        h += ',';
        h += FeatureLabel::from_index(i).name();
    }
    return h;
}

constexpr std::string_view kHandoverHeader = "src_base,src_index,dst_base,dst_index,rate_percent";

} // namespace

// ---------------------------------------------------------------------------
// Identifiers
// ---------------------------------------------------------------------------

void validate_cell_id(const CellId& id) {
    if (id.base_station.empty()) {
        fail(Errc::ConfigError, "base_station must be non-empty");
    }
    if (std::isdigit(static_cast<unsigned char>(id.base_station.back()))) {
        fail(Errc::ConfigError,
             "base_station '" + id.base_station + "' must not end in a digit");
    }
    if (id.cell_index <= 0) {
        fail(Errc::ConfigError, "cell_index must be positive for " + id.base_station);
    }
}

std::string_view slice_name(SliceKind s) {
    switch (s) {
    case SliceKind::Total: return "total";
    case SliceKind::Voice: return "voice";
    case SliceKind::Data: return "data";
    case SliceKind::Fwa: return "fwa";
    }
    return "total";
}

std::optional<SliceKind> parse_slice(std::string_view text) {
    if (text == "total") return SliceKind::Total;
    if (text == "voice") return SliceKind::Voice;
    if (text == "data") return SliceKind::Data;
    if (text == "fwa") return SliceKind::Fwa;
    return std::nullopt;
}

FeatureLabel FeatureLabel::ran(int k) {
    if (k < 1 || k >= kCount) fail(Errc::UnknownLabel, "F-RAN" + std::to_string(k));
    return FeatureLabel(k);
}

FeatureLabel FeatureLabel::from_index(int i) {
    if (i < 0 || i >= kCount) fail(Errc::UnknownLabel, "feature index " + std::to_string(i));
    return FeatureLabel(i);
}

std::optional<FeatureLabel> FeatureLabel::parse(std::string_view text) {
    if (text == "F0") return f0();
    if (text.substr(0, 5) == "F-RAN") {
        const auto k = parse_int(text.substr(5));
        if (k && *k >= 1 && *k < kCount) return FeatureLabel(*k);
    }
    return std::nullopt;
}

std::string FeatureLabel::name() const {
    return index_ == 0 ? "F0" : "F-RAN" + std::to_string(index_);
}

// ---------------------------------------------------------------------------
// Series and store
// ---------------------------------------------------------------------------

const std::vector<double>& CellSeries::values(FeatureLabel label) const {
    const auto& column = features[label.index()];
    if (column.empty()) {
        fail(Errc::UnknownLabel,
             label.name() + " absent from " + cell.str() + "/" + std::string(slice_name(slice)));
    }
    return column;
}

bool CellSeries::contiguous() const {
    for (std::size_t i = 1; i < hours.size(); ++i) {
        if (hours[i] != hours[i - 1] + 1) return false;
    }
    return true;
}

void HandoverMatrix::add(const CellId& src, const CellId& dst, double rate_percent) {
    if (src == dst) {
        fail(Errc::MalformedRow, "self handover edge for " + src.str());
    }
    if (!(rate_percent >= 0.0 && rate_percent <= 100.0)) {
        fail(Errc::MalformedRow, "handover rate out of [0,100] for " + src.str() + "->" + dst.str());
    }
    auto [it, inserted] = rates_.emplace(std::make_pair(src, dst), rate_percent);
    if (!inserted) {
        fail(Errc::MalformedRow, "duplicate handover edge " + src.str() + "->" + dst.str());
    }
}

std::vector<std::pair<CellId, double>> HandoverMatrix::incoming(const CellId& target) const {
    std::vector<std::pair<CellId, double>> out;
    for (const auto& [edge, rate] : rates_) {
        if (edge.second == target) out.emplace_back(edge.first, rate);
    }
    return out;
}

std::vector<std::pair<CellId, double>> HandoverMatrix::outgoing(const CellId& target) const {
    std::vector<std::pair<CellId, double>> out;
    for (const auto& [edge, rate] : rates_) {
        if (edge.first == target) out.emplace_back(edge.second, rate);
    }
    return out;
}

const CellSeries* TelemetryStore::find(const CellId& cell, SliceKind slice) const {
    for (const auto& s : series) {
        if (s.cell == cell && s.slice == slice) return &s;
    }
    return nullptr;
}

CellSeries* TelemetryStore::find(const CellId& cell, SliceKind slice) {
    return const_cast<CellSeries*>(std::as_const(*this).find(cell, slice));
}

void TelemetryStore::insert(CellSeries s) {
    if (find(s.cell, s.slice) != nullptr) {
        fail(Errc::DuplicateTimestamp,
             "series already present for " + s.cell.str() + "/" + std::string(slice_name(s.slice)));
    }
    series.push_back(std::move(s));
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

ValidationReport validate_series(const CellSeries& series) {
    ValidationReport report;
    report.length = series.size();
    if (!series.hours.empty()) {
        const EpochHour start = series.hours.front();
        for (std::size_t i = 1; i < series.hours.size(); ++i) {
            for (EpochHour h = series.hours[i - 1] + 1; h < series.hours[i]; ++h) {
                report.gap_indices.push_back(h - start);
            }
        }
    }
    if (series.has(FeatureLabel::f0())) {
        const auto& f0 = series.values(FeatureLabel::f0());
        for (std::size_t i = 0; i < f0.size(); ++i) {
            if (f0[i] < 0.0) report.negative_indices.push_back(i);
        }
    }
    return report;
}

// ---------------------------------------------------------------------------
// Folds
// ---------------------------------------------------------------------------

std::int64_t FoldSplit::train_hours() const {
    std::int64_t total = 0;
    for (const auto& r : train) total += r.length();
    return total;
}

std::vector<FoldSplit> split_folds(std::int64_t total_hours, int fold_count,
                                   int segment_weeks, int test_weeks) {
    if (fold_count < 1 || segment_weeks < 1 || test_weeks < 0) {
        fail(Errc::InconsistentDurations, "fold_count and segment_weeks must be >= 1");
    }
    const std::int64_t expected =
        (static_cast<std::int64_t>(fold_count) * segment_weeks + test_weeks) * 168;
    if (total_hours != expected) {
        fail(Errc::InconsistentDurations,
             "total_hours " + std::to_string(total_hours) + " != (" +
                 std::to_string(fold_count) + " folds x " + std::to_string(segment_weeks) +
                 " weeks + " + std::to_string(test_weeks) + " test weeks) x 168 = " +
                 std::to_string(expected));
    }

    const std::int64_t segment = static_cast<std::int64_t>(segment_weeks) * 168;
    const std::int64_t pre_test = static_cast<std::int64_t>(fold_count) * segment;

    std::vector<FoldSplit> folds;
    folds.reserve(fold_count);
    for (int i = 0; i < fold_count; ++i) {
        FoldSplit fold;
        fold.validation = {i * segment, (i + 1) * segment};
        if (fold.validation.begin > 0) {
            fold.train.push_back({0, fold.validation.begin});
        }
        if (fold.validation.end < pre_test) {
            fold.train.push_back({fold.validation.end, pre_test});
        }
        fold.test = {pre_test, total_hours};
        folds.push_back(std::move(fold));
    }
    return folds;
}

// ---------------------------------------------------------------------------
// CSV ingestion
// ---------------------------------------------------------------------------

namespace {

struct RawRow {
    EpochHour hour;
    std::array<double, FeatureLabel::kCount> values;
    int value_count; // 20 for total rows, 3 for slice rows
};

using SeriesKey = std::pair<CellId, SliceKind>;

void parse_telemetry_line(std::string_view line, std::size_t line_no,
                          std::map<SeriesKey, std::vector<RawRow>>& grouped) {
    const auto fields = split_csv_line(line);
    if (fields.size() != 4 + FeatureLabel::kCount) {
        fail(Errc::MalformedRow,
             "line " + std::to_string(line_no) + ": expected " +
                 std::to_string(4 + FeatureLabel::kCount) + " fields, got " +
                 std::to_string(fields.size()));
    }

    RawRow row{};
    row.hour = parse_hour_iso8601(fields[0]);

    CellId cell;
    cell.base_station = std::string(fields[1]);
    const auto index = parse_int(fields[2]);
    if (!index) {
        fail(Errc::MalformedRow, "line " + std::to_string(line_no) + ": bad cell_index");
    }
    cell.cell_index = *index;
    try {
        validate_cell_id(cell);
    } catch (const Error& e) {
        fail(Errc::MalformedRow, "line " + std::to_string(line_no) + ": " + e.what());
    }

    const auto slice = parse_slice(fields[3]);
    if (!slice) {
        fail(Errc::MalformedRow,
             "line " + std::to_string(line_no) + ": bad slice '" + std::string(fields[3]) + "'");
    }

    const bool is_total = *slice == SliceKind::Total;
    row.value_count = is_total ? FeatureLabel::kCount : kSliceFeatureCount;
    for (int i = 0; i < FeatureLabel::kCount; ++i) {
        const auto field = fields[4 + i];
        if (field.empty()) {
            if (i < row.value_count) {
                fail(Errc::MalformedRow,
                     "line " + std::to_string(line_no) + ": missing value for " +
                         FeatureLabel::from_index(i).name());
            }
            continue;
        }
        if (!is_total && i >= kSliceFeatureCount) {
            fail(Errc::MixedSliceSchema,
                 "line " + std::to_string(line_no) + ": slice row carries " +
                     FeatureLabel::from_index(i).name());
        }
        const auto value = parse_double(field);
        if (!value) {
            fail(Errc::MalformedRow,
                 "line " + std::to_string(line_no) + ": bad number '" + std::string(field) + "'");
        }
        row.values[i] = *value;
    }

    grouped[{cell, *slice}].push_back(row);
}

} // namespace

TelemetryStore load_telemetry(const std::filesystem::path& telemetry_csv,
                              const std::optional<std::filesystem::path>& handover_csv) {
    std::ifstream in(telemetry_csv);
    if (!in) fail(Errc::IoError, "cannot open " + telemetry_csv.string());

    std::string line;
    if (!std::getline(in, line)) fail(Errc::MalformedRow, "empty telemetry file (no header)");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != telemetry_header()) {
        fail(Errc::MalformedRow, "telemetry header mismatch in " + telemetry_csv.string());
    }

    std::map<SeriesKey, std::vector<RawRow>> grouped;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        parse_telemetry_line(line, line_no, grouped);
    }

    TelemetryStore store;
    for (auto& [key, rows] : grouped) {
        std::stable_sort(rows.begin(), rows.end(),
                         [](const RawRow& a, const RawRow& b) { return a.hour < b.hour; });
        for (std::size_t i = 1; i < rows.size(); ++i) {
            if (rows[i].hour == rows[i - 1].hour) {
                fail(Errc::DuplicateTimestamp,
                     key.first.str() + "/" + std::string(slice_name(key.second)) + " at " +
                         format_hour_iso8601(rows[i].hour));
            }
        }

        CellSeries series;
        series.cell = key.first;
        series.slice = key.second;
        series.hours.reserve(rows.size());
        const int channels = rows.front().value_count;
        for (int c = 0; c < channels; ++c) series.features[c].reserve(rows.size());
        for (const auto& row : rows) {
            series.hours.push_back(row.hour);
            for (int c = 0; c < channels; ++c) series.features[c].push_back(row.values[c]);
        }
        store.insert(std::move(series));
    }

    if (handover_csv) {
        std::ifstream hin(*handover_csv);
        if (!hin) fail(Errc::IoError, "cannot open " + handover_csv->string());
        if (!std::getline(hin, line)) fail(Errc::MalformedRow, "empty handover file (no header)");
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line != kHandoverHeader) {
            fail(Errc::MalformedRow, "handover header mismatch in " + handover_csv->string());
        }
        line_no = 1;
        while (std::getline(hin, line)) {
            ++line_no;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty()) continue;
            const auto fields = split_csv_line(line);
            if (fields.size() != 5) {
                fail(Errc::MalformedRow,
                     "handover line " + std::to_string(line_no) + ": expected 5 fields");
            }
            const auto src_index = parse_int(fields[1]);
            const auto dst_index = parse_int(fields[3]);
            const auto rate = parse_double(fields[4]);
            if (!src_index || !dst_index || !rate) {
                fail(Errc::MalformedRow, "handover line " + std::to_string(line_no));
            }
            store.handovers.add({std::string(fields[0]), *src_index},
                                {std::string(fields[2]), *dst_index}, *rate);
        }
    }

    return store;
}

void save_telemetry(const TelemetryStore& store,
                    const std::filesystem::path& telemetry_csv,
                    const std::optional<std::filesystem::path>& handover_csv) {
    std::ofstream out(telemetry_csv);
    if (!out) fail(Errc::IoError, "cannot write " + telemetry_csv.string());
    out << telemetry_header() << '\n';

    // Stable row order: (cell, slice), then hour.
    std::vector<const CellSeries*> ordered;
    ordered.reserve(store.series.size());
    for (const auto& s : store.series) ordered.push_back(&s);
    std::sort(ordered.begin(), ordered.end(), [](const CellSeries* a, const CellSeries* b) {
        return std::tie(a->cell, a->slice) < std::tie(b->cell, b->slice);
    });

    for (const CellSeries* series : ordered) {
        const bool is_total = series->slice == SliceKind::Total;
        const int channels = is_total ? FeatureLabel::kCount : kSliceFeatureCount;
        for (std::size_t i = 0; i < series->size(); ++i) {
            out << format_hour_iso8601(series->hours[i]) << ',' << series->cell.base_station
                << ',' << series->cell.cell_index << ',' << slice_name(series->slice);
            for (int c = 0; c < FeatureLabel::kCount; ++c) {
                out << ',';
                if (c < channels && !series->features[c].empty()) {
                    out << format_double(series->features[c][i]);
                }
            }
            out << '\n';
        }
    }
    if (!out) fail(Errc::IoError, "write failure on " + telemetry_csv.string());

    if (handover_csv) {
        std::ofstream hout(*handover_csv);
        if (!hout) fail(Errc::IoError, "cannot write " + handover_csv->string());
        hout << kHandoverHeader << '\n';
        for (const auto& [edge, rate] : store.handovers.entries()) {
            hout << edge.first.base_station << ',' << edge.first.cell_index << ','
                 << edge.second.base_station << ',' << edge.second.cell_index << ','
                 << format_double(rate) << '\n';
        }
        if (!hout) fail(Errc::IoError, "write failure on " + handover_csv->string());
    }
}

} // namespace slafc
