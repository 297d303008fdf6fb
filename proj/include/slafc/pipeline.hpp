#ifndef SLAFC_PIPELINE_HPP
#define SLAFC_PIPELINE_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "slafc/features.hpp"
#include "slafc/neuralnet.hpp"
#include "slafc/slaloss.hpp"

namespace slafc {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

// Target SLA violation fraction, e.g. 0.03 or 0.05.
struct SlaTarget {
    double rate = 0.05;

    void validate() const; // rate in (0, 0.5)
};

// Fold construction parameters (see split_folds).
struct FoldSpec {
    int fold_count = 1;
    int segment_weeks = 8;
    int test_weeks = 4;

    std::int64_t expected_hours() const {
        return static_cast<std::int64_t>(fold_count) * segment_weeks * 168 +
               static_cast<std::int64_t>(test_weeks) * 168;
    }
    std::vector<FoldSplit> make(std::int64_t total_hours) const;
};

enum class ArchKind { SingleCell, MultiCell, SingleSlice, MultiSlice };

std::string_view arch_kind_name(ArchKind kind);
std::optional<ArchKind> parse_arch_kind(std::string_view text);

// What to train: the architecture family, its input groups, and the per-head
// SLA targets. Single-cell/single-slice are the one-group case.
struct ArchitectureSpec {
    ArchKind kind = ArchKind::SingleCell;
    CellId cell;                    // target cell (all kinds except MultiCell)
    std::vector<CellId> cells;      // MultiCell input groups
    SliceKind slice = SliceKind::Total; // SingleSlice
    std::vector<SliceKind> slices;  // MultiSlice input groups
    ModelKind model_kind = ModelKind::Univariate;
    std::vector<SlaTarget> head_targets; // one per head

    // Resolved (cell, slice) per input group / head.
    std::vector<std::pair<CellId, SliceKind>> group_keys() const;
    int head_count() const { return static_cast<int>(group_keys().size()); }

    void validate() const; // throws Error(ConfigError)
};

struct TrainConfig {
    int epochs_max = 60;
    int patience = 8;
    int batch = 32;
    double lr = 1e-3;
    int window = 24;
    int hidden = 32;
    std::uint64_t seed = 0;

    void validate() const;
};

// ---------------------------------------------------------------------------
// Trained models
// ---------------------------------------------------------------------------

struct HeadCalibration {
    double weight = 1.0; // calibrated w
    double target_rate = 0.0; // 0 = no target attached
    bool unmet = false;
};

struct TrainedModel {
    NetConfig net;
    ModelParams params;

    ArchKind arch = ArchKind::SingleCell;
    ModelKind model_kind = ModelKind::Univariate;
    std::vector<GroupSchema> groups; // per input group
    std::vector<HeadCalibration> heads;
    LossSpec trained_loss;

    FoldSpec fold_spec;
    int fold_index = 0;
    FoldSplit fold;

    int head_count() const { return static_cast<int>(groups.size()); }
};

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

// Mini-batch gradient descent on the training split with early stopping on
// the validation metric (SLA-based loss for WMae, the plain loss otherwise).
// Keeps the best-validation parameters. Deterministic per (seed, config).
TrainedModel train_single(const DatasetBundle& bundle, const LossSpec& loss,
                          const TrainConfig& config);

// One LSTM per input group, heads read the concatenated final hidden states,
// total loss is the unweighted mean of per-head weighted-MAE losses with the
// supplied per-head weights. Groups must be sample-aligned.
TrainedModel train_multihead(const std::vector<DatasetBundle>& groups,
                             const ArchitectureSpec& arch,
                             std::span<const double> head_weights, const TrainConfig& config);

// ---------------------------------------------------------------------------
// Weight calibration
// ---------------------------------------------------------------------------

inline constexpr std::array<double, 8> kDefaultWeightGrid = {1.0, 1.5, 2.0, 3.0,
                                                             4.0, 6.0, 8.0, 12.0};

struct LineSearchResult {
    double weight = 1.0;
    bool unmet = false;
    int chosen_index = 0;
    std::vector<double> grid;
    std::vector<double> validation_rates; // per grid point
    std::vector<TrainedModel> models;     // per grid point, same seed
};

// Trains one model per grid point and returns the smallest w whose validation
// violation rate meets the target, falling back to the grid maximum with the
// unmet flag set. The chosen model is models[chosen_index] with its head
// calibration filled in.
LineSearchResult weight_line_search(const DatasetBundle& bundle, SlaTarget target,
                                    const TrainConfig& config, std::span<const double> grid);

struct MultiheadCalibration {
    std::vector<double> weights;     // per head
    std::vector<bool> unmet;         // per head
    std::vector<double> grid;
    std::vector<std::vector<double>> validation_rates; // [grid point][head]
};

// Per-head line search for multi-head architectures: each grid point trains
// one joint model with all heads at that w; each head then picks the smallest
// qualifying w against its own target.
MultiheadCalibration calibrate_multihead(const std::vector<DatasetBundle>& groups,
                                         const ArchitectureSpec& arch, const TrainConfig& config,
                                         std::span<const double> grid);

// ---------------------------------------------------------------------------
// Prediction and evaluation
// ---------------------------------------------------------------------------

// Recursive multi-step rollout: each step's predicted (normalized) F0 is
// appended to its group's window, calendar flags are recomputed from the
// future timestamps, and remaining channels hold their last observed value.
// seed_windows: one row-major window x C_g block per group (normalized).
// future_hours: `horizon` timestamps, the hours being predicted.
// Returns horizon x heads denormalized predictions, row-major.
std::vector<double> predict_multi_step(const TrainedModel& model,
                                       const std::vector<std::vector<double>>& seed_windows,
                                       int horizon, std::span<const EpochHour> future_hours);

struct HeadEval {
    CellId cell;
    SliceKind slice = SliceKind::Total;
    int horizon = 1;
    double sla_loss = 0.0;
    double violation_rate = 0.0;
    double overprov_volume = 0.0;
    std::size_t count = 0;
    double weight = 1.0;
    double target_rate = 0.0;
    bool unmet = false;
};

struct EvalReport {
    std::vector<HeadEval> rows; // per horizon per head
};

// Evaluates the model on the groups' test datasets: every test hour is an
// origin, with a full recursive rollout per horizon. Errors are denormalized
// before the metrics.
EvalReport evaluate(const TrainedModel& model, const std::vector<DatasetBundle>& groups,
                    std::span<const int> horizons);

// ---------------------------------------------------------------------------
// Experiments
// ---------------------------------------------------------------------------

struct ExperimentConfig {
    FoldSpec fold;
    std::vector<int> folds; // subset of fold indices to run; empty = all
    TrainConfig train;
    ArchitectureSpec arch;
    std::vector<ModelKind> model_kinds;
    std::vector<LossSpec> losses{LossSpec::wmae(1.0)}; // comparison set; WMae is calibrated
    std::vector<double> sla_targets{0.05};             // single-head archs
    std::vector<double> weight_grid{kDefaultWeightGrid.begin(), kDefaultWeightGrid.end()};
    std::vector<int> horizons{1};
    double correlation_threshold = 0.90;
    double peak_ratio = 0.70;
    int parallel = 1;

    void validate() const;
};

// One line of the report CSV:
// arch,model_kind,cell,slice,sla_target,horizon,fold,sla_loss,violation_rate,
// overprov_volume,weight_w,flag_unmet
struct ReportRow {
    std::string arch;
    std::string model_kind; // feature kind; baseline-trained models append "@<loss>"
    std::string cell;
    std::string slice;
    double sla_target = 0.0;
    int horizon = 1;
    std::string fold; // fold index or "mean"
    double sla_loss = 0.0;
    double violation_rate = 0.0;
    double overprov_volume = 0.0;
    double weight_w = 1.0;
    bool flag_unmet = false;
};

struct ExperimentResult {
    std::vector<ReportRow> rows; // per-fold rows plus "mean" aggregates
    std::vector<TrainedModel> models;
    std::vector<std::string> model_names; // stable checkpoint stems
};

// Full sweep: folds x model kinds x losses x targets. Rows are emitted in a
// deterministic order; aggregation over folds is the arithmetic mean.
ExperimentResult run_experiment(const TelemetryStore& store, const ExperimentConfig& config);

std::string report_csv(const std::vector<ReportRow>& rows);
std::string summary_table(const std::vector<ReportRow>& rows);

// JSON round-trip for the experiment config; rejects unknown keys.
ExperimentConfig experiment_from_json(const std::string& text);
std::string experiment_to_json(const ExperimentConfig& config);

} // namespace slafc

#endif // SLAFC_PIPELINE_HPP
