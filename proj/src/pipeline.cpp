#include "slafc/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>

#include "slafc/rng.hpp"
#include "json_util.hpp"
#include "text_util.hpp"

namespace slafc {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

void SlaTarget::validate() const {
    if (!(rate > 0.0 && rate < 0.5)) {
        fail(Errc::ConfigError, "SLA target rate must be in (0, 0.5)");
    }
}

std::vector<FoldSplit> FoldSpec::make(std::int64_t total_hours) const {
    return split_folds(total_hours, fold_count, segment_weeks, test_weeks);
}

std::string_view arch_kind_name(ArchKind kind) {
    switch (kind) {
    case ArchKind::SingleCell: return "single_cell";
    case ArchKind::MultiCell: return "multi_cell";
    case ArchKind::SingleSlice: return "single_slice";
    case ArchKind::MultiSlice: return "multi_slice";
    }
    return "single_cell";
}

std::optional<ArchKind> parse_arch_kind(std::string_view text) {
    if (text == "single_cell") return ArchKind::SingleCell;
    if (text == "multi_cell") return ArchKind::MultiCell;
    if (text == "single_slice") return ArchKind::SingleSlice;
    if (text == "multi_slice") return ArchKind::MultiSlice;
    return std::nullopt;
}

std::vector<std::pair<CellId, SliceKind>> ArchitectureSpec::group_keys() const {
    std::vector<std::pair<CellId, SliceKind>> keys;
    switch (kind) {
    case ArchKind::SingleCell:
        keys.emplace_back(cell, SliceKind::Total);
        break;
    case ArchKind::SingleSlice:
        keys.emplace_back(cell, slice);
        break;
    case ArchKind::MultiCell:
        for (const auto& c : cells) keys.emplace_back(c, SliceKind::Total);
        break;
    case ArchKind::MultiSlice:
        for (const auto& s : slices) keys.emplace_back(cell, s);
        break;
    }
    return keys;
}

void ArchitectureSpec::validate() const {
    switch (kind) {
    case ArchKind::SingleCell:
        validate_cell_id(cell);
        break;
    case ArchKind::SingleSlice:
        validate_cell_id(cell);
        break;
    case ArchKind::MultiCell: {
        if (cells.size() < 2) fail(Errc::ConfigError, "multi_cell needs >= 2 cells");
        std::set<CellId> unique(cells.begin(), cells.end());
        if (unique.size() != cells.size()) fail(Errc::ConfigError, "multi_cell cells must differ");
        for (const auto& c : cells) validate_cell_id(c);
        break;
    }
    case ArchKind::MultiSlice: {
        validate_cell_id(cell);
        if (slices.size() < 2) fail(Errc::ConfigError, "multi_slice needs >= 2 slices");
        std::set<SliceKind> unique(slices.begin(), slices.end());
        if (unique.size() != slices.size()) fail(Errc::ConfigError, "multi_slice slices must differ");
        for (SliceKind s : slices) {
            if (s == SliceKind::Total) {
                fail(Errc::ConfigError, "multi_slice groups are service slices, not total");
            }
        }
        break;
    }
    }
    if (!head_targets.empty()) {
        if (static_cast<int>(head_targets.size()) != head_count()) {
            fail(Errc::ConfigError, "head_targets must cover every head");
        }
        for (const auto& t : head_targets) t.validate();
    }
}

void TrainConfig::validate() const {
    if (epochs_max < 0) fail(Errc::ConfigError, "epochs_max must be >= 0");
    if (patience < 0 || (epochs_max > 0 && patience >= epochs_max)) {
        fail(Errc::ConfigError, "patience must be in [0, epochs_max)");
    }
    if (batch < 1) fail(Errc::ConfigError, "batch must be >= 1");
    if (!(lr > 0.0)) fail(Errc::ConfigError, "lr must be > 0");
    if (window < 1) fail(Errc::ConfigError, "window must be >= 1");
    if (hidden < 1) fail(Errc::ConfigError, "hidden must be >= 1");
}

// ---------------------------------------------------------------------------
// Shared training core
// ---------------------------------------------------------------------------

namespace {

void check_group_alignment(const std::vector<DatasetBundle>& groups) {
    const auto& first = groups.front();
    for (const auto& g : groups) {
        if (g.train.size() != first.train.size() ||
            g.validation.size() != first.validation.size() ||
            g.test.size() != first.test.size() ||
            g.train.target_hours != first.train.target_hours ||
            g.validation.target_hours != first.validation.target_hours ||
            g.test.target_hours != first.test.target_hours) {
            fail(Errc::MisalignedGroups, "input groups are not sample-aligned");
        }
        if (g.train.window != first.train.window) {
            fail(Errc::MisalignedGroups, "input groups use different windows");
        }
    }
}

// Gathers the selected samples of each group's dataset into batch tensors.
std::vector<Tensor3> gather_batch(const std::vector<DatasetBundle>& groups,
                                  const SupervisedDataset DatasetBundle::*split,
                                  std::span<const std::size_t> indices) {
    std::vector<Tensor3> tensors(groups.size());
    for (std::size_t g = 0; g < groups.size(); ++g) {
        const SupervisedDataset& ds = groups[g].*split;
        tensors[g].resize(indices.size(), ds.inputs.rows, ds.inputs.cols);
        const std::size_t block = ds.inputs.rows * ds.inputs.cols;
        for (std::size_t i = 0; i < indices.size(); ++i) {
            std::copy_n(ds.inputs.sample(indices[i]), block, tensors[g].sample(i));
        }
    }
    return tensors;
}

// Per-head denormalized errors over one split, evaluated in fixed-size chunks.
std::vector<std::vector<double>> split_errors(const NetConfig& net,
                                              const ModelParams& params,
                                              const std::vector<DatasetBundle>& groups,
                                              const SupervisedDataset DatasetBundle::*split) {
    const std::size_t n = (groups.front().*split).size();
    const std::size_t heads = groups.size();
    std::vector<std::vector<double>> errors(heads);
    for (auto& e : errors) e.reserve(n);

    constexpr std::size_t kChunk = 1024;
    std::vector<std::size_t> indices;
    for (std::size_t begin = 0; begin < n; begin += kChunk) {
        const std::size_t end = std::min(n, begin + kChunk);
        indices.resize(end - begin);
        for (std::size_t i = begin; i < end; ++i) indices[i - begin] = i;
        const auto tensors = gather_batch(groups, split, indices);
        const auto preds = forward(net, params, tensors, nullptr);
        for (std::size_t i = 0; i < indices.size(); ++i) {
            for (std::size_t k = 0; k < heads; ++k) {
                const double sigma = groups[k].schema.f0_stats().std;
                const double e_norm =
                    preds[i * heads + k] - (groups[k].*split).targets[indices[i]];
                errors[k].push_back(e_norm * sigma);
            }
        }
    }
    return errors;
}

double validation_metric(const std::vector<std::vector<double>>& errors,
                         const std::vector<LossSpec>& head_losses) {
    double total = 0.0;
    for (std::size_t k = 0; k < errors.size(); ++k) {
        const auto& spec = head_losses[k];
        if (spec.kind == LossKind::WMae) {
            total += sla_based_loss(errors[k], spec.weight);
        } else {
            double sum = 0.0;
            for (double e : errors[k]) sum += loss_value(spec, e);
            total += sum / static_cast<double>(errors[k].size());
        }
    }
    return total / static_cast<double>(errors.size());
}

void shuffle_indices(std::vector<std::size_t>& order, Rng& rng) {
    for (std::size_t i = order.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(i) - 1));
        std::swap(order[i - 1], order[j]);
    }
}

TrainedModel train_core(const std::vector<DatasetBundle>& groups,
                        const std::vector<LossSpec>& head_losses, const TrainConfig& config,
                        ArchKind arch_kind) {
    config.validate();
    check_group_alignment(groups);
    for (const auto& g : groups) {
        if (g.train.size() == 0) fail(Errc::EmptyDataset, "empty training dataset");
        if (g.validation.size() == 0) fail(Errc::EmptyDataset, "empty validation dataset");
    }

    NetConfig net;
    for (const auto& g : groups) {
        net.group_channels.push_back(static_cast<int>(g.train.channel_count()));
    }
    net.hidden = config.hidden;
    net.window = config.window;
    net.seed = config.seed;
    net.validate();
    if (groups.front().train.window != config.window) {
        fail(Errc::ShapeMismatch, "dataset window does not match the training configuration");
    }

    const std::size_t heads = groups.size();
    ModelParams params = init_params(net);
    OptState opt;

    auto metric_of = [&](const ModelParams& p) {
        return validation_metric(
            split_errors(net, p, groups, &DatasetBundle::validation), head_losses);
    };

    ModelParams best = params;
    double best_metric = metric_of(params);
    if (!std::isfinite(best_metric)) fail(Errc::NonFiniteLoss, "validation metric not finite");

    const std::size_t n_train = groups.front().train.size();
    std::vector<std::size_t> order(n_train);
    for (std::size_t i = 0; i < n_train; ++i) order[i] = i;

    int since_best = 0;
    for (int epoch = 1; epoch <= config.epochs_max; ++epoch) {
        Rng shuffle_rng(mix_key(stream_key(config.seed, "epoch-shuffle"),
                                static_cast<std::uint64_t>(epoch)));
        shuffle_indices(order, shuffle_rng);

        for (std::size_t begin = 0; begin < n_train; begin += config.batch) {
            const std::size_t end = std::min(n_train, begin + config.batch);
            const std::span<const std::size_t> batch_idx(order.data() + begin, end - begin);
            const auto tensors = gather_batch(groups, &DatasetBundle::train, batch_idx);

            ForwardCache cache;
            const auto preds = forward(net, params, tensors, &cache);

            const double denom = static_cast<double>(batch_idx.size() * heads);
            std::vector<double> dpred(preds.size());
            double batch_loss = 0.0;
            for (std::size_t i = 0; i < batch_idx.size(); ++i) {
                for (std::size_t k = 0; k < heads; ++k) {
                    const double e =
                        preds[i * heads + k] - groups[k].train.targets[batch_idx[i]];
                    batch_loss += loss_value(head_losses[k], e);
                    dpred[i * heads + k] = loss_grad(head_losses[k], e) / denom;
                }
            }
            if (!std::isfinite(batch_loss)) {
                fail(Errc::NonFiniteLoss, "training loss diverged");
            }

            const ModelParams grads = backward(net, params, cache, dpred);
            optimizer_step(net, params, grads, opt, config.lr);
        }

        const double metric = metric_of(params);
        if (!std::isfinite(metric)) fail(Errc::NonFiniteLoss, "validation metric not finite");
        if (metric < best_metric) {
            best_metric = metric;
            best = params;
            since_best = 0;
        } else {
            ++since_best;
            if (since_best >= config.patience && config.patience > 0) break;
        }
    }

    TrainedModel model;
    model.net = net;
    model.params = std::move(best);
    model.arch = arch_kind;
    model.model_kind = groups.front().schema.kind;
    model.trained_loss = head_losses.front();
    model.fold = groups.front().fold;
    model.heads.resize(heads);
    for (std::size_t k = 0; k < heads; ++k) {
        model.groups.push_back(groups[k].schema);
        model.heads[k].weight =
            head_losses[k].kind == LossKind::WMae ? head_losses[k].weight : 1.0;
    }
    return model;
}

} // namespace

TrainedModel train_single(const DatasetBundle& bundle, const LossSpec& loss,
                          const TrainConfig& config) {
    const ArchKind kind = bundle.schema.slice == SliceKind::Total ? ArchKind::SingleCell
                                                                  : ArchKind::SingleSlice;
    return train_core({bundle}, {loss}, config, kind);
}

TrainedModel train_multihead(const std::vector<DatasetBundle>& groups,
                             const ArchitectureSpec& arch,
                             std::span<const double> head_weights, const TrainConfig& config) {
    if (groups.size() < 2) {
        fail(Errc::MisalignedGroups, "multihead training needs >= 2 groups (use train_single)");
    }
    if (head_weights.size() != groups.size()) {
        fail(Errc::ShapeMismatch, "one head weight per group required");
    }
    std::vector<LossSpec> losses;
    for (double w : head_weights) losses.push_back(LossSpec::wmae(w));
    TrainedModel model = train_core(groups, losses, config, arch.kind);
    for (std::size_t k = 0; k < groups.size(); ++k) {
        if (k < arch.head_targets.size()) {
            model.heads[k].target_rate = arch.head_targets[k].rate;
        }
    }
    return model;
}

// ---------------------------------------------------------------------------
// Weight calibration
// ---------------------------------------------------------------------------

namespace {

void check_grid(std::span<const double> grid) {
    if (grid.empty()) fail(Errc::EmptyGrid, "weight grid is empty");
    if (grid.front() != 1.0) fail(Errc::ConfigError, "weight grid must start at 1");
    for (std::size_t i = 1; i < grid.size(); ++i) {
        if (grid[i] <= grid[i - 1]) fail(Errc::ConfigError, "weight grid must ascend");
    }
}

double model_validation_rate(const TrainedModel& model, const std::vector<DatasetBundle>& groups,
                             std::size_t head) {
    const auto errors = split_errors(model.net, model.params, groups,
                                     &DatasetBundle::validation);
    return sla_violation_rate(errors[head]);
}

} // namespace

LineSearchResult weight_line_search(const DatasetBundle& bundle, SlaTarget target,
                                    const TrainConfig& config, std::span<const double> grid) {
    target.validate();
    check_grid(grid);

    LineSearchResult result;
    result.grid.assign(grid.begin(), grid.end());
    for (double w : grid) {
        TrainedModel model = train_single(bundle, LossSpec::wmae(w), config);
        result.validation_rates.push_back(model_validation_rate(model, {bundle}, 0));
        result.models.push_back(std::move(model));
    }

    result.chosen_index = static_cast<int>(grid.size()) - 1;
    result.unmet = true;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (result.validation_rates[i] <= target.rate) {
            result.chosen_index = static_cast<int>(i);
            result.unmet = false;
            break;
        }
    }
    result.weight = grid[result.chosen_index];

    auto& chosen = result.models[result.chosen_index];
    chosen.heads[0].weight = result.weight;
    chosen.heads[0].target_rate = target.rate;
    chosen.heads[0].unmet = result.unmet;
    return result;
}

MultiheadCalibration calibrate_multihead(const std::vector<DatasetBundle>& groups,
                                         const ArchitectureSpec& arch, const TrainConfig& config,
                                         std::span<const double> grid) {
    check_grid(grid);
    if (static_cast<int>(arch.head_targets.size()) != static_cast<int>(groups.size())) {
        fail(Errc::ConfigError, "per-head SLA targets must cover every head");
    }
    for (const auto& t : arch.head_targets) t.validate();

    MultiheadCalibration calib;
    calib.grid.assign(grid.begin(), grid.end());
    for (double w : grid) {
        const std::vector<double> weights(groups.size(), w);
        const TrainedModel model = train_multihead(groups, arch, weights, config);
        const auto errors =
            split_errors(model.net, model.params, groups, &DatasetBundle::validation);
        std::vector<double> rates;
        rates.reserve(groups.size());
        for (const auto& head_errors : errors) rates.push_back(sla_violation_rate(head_errors));
        calib.validation_rates.push_back(std::move(rates));
    }

    calib.weights.resize(groups.size());
    calib.unmet.assign(groups.size(), true);
    for (std::size_t k = 0; k < groups.size(); ++k) {
        calib.weights[k] = grid.back();
        for (std::size_t i = 0; i < grid.size(); ++i) {
            if (calib.validation_rates[i][k] <= arch.head_targets[k].rate) {
                calib.weights[k] = grid[i];
                calib.unmet[k] = false;
                break;
            }
        }
    }
    return calib;
}

// ---------------------------------------------------------------------------
// Prediction and evaluation
// ---------------------------------------------------------------------------

namespace {

// Advances one batch of rollout windows a single hour: shift time up, write
// the predicted (normalized) F0, recompute calendar flags for `hour`, and
// hold every other channel at its previous last value.
void roll_windows(std::vector<Tensor3>& windows, const TrainedModel& model,
                  const std::vector<double>& preds_norm,
                  const std::vector<EpochHour>& hours) {
    const std::size_t heads = model.groups.size();
    for (std::size_t g = 0; g < windows.size(); ++g) {
        Tensor3& w = windows[g];
        const GroupSchema& schema = model.groups[g];
        const std::size_t u = w.rows;
        const std::size_t c_count = w.cols;
        for (std::size_t i = 0; i < w.n; ++i) {
            double* block = w.sample(i);
            std::copy(block + c_count, block + u * c_count, block);
            double* last = block + (u - 1) * c_count;
            // `last` currently holds a copy of the previous last row.
            for (std::size_t c = 0; c < c_count; ++c) {
                const auto& channel = schema.channels[c];
                switch (channel.kind) {
                case ChannelRef::Kind::Ran:
                    if (c == 0) last[c] = preds_norm[i * heads + g];
                    break; // aux RAN channels hold their last observation
                case ChannelRef::Kind::PeakHourFlag:
                    last[c] = schema.peak[hour_of_day(hours[i])] ? 1.0 : 0.0;
                    break;
                case ChannelRef::Kind::DayOfWeekFlag:
                    last[c] = is_weekend(hours[i]) ? 0.0 : 1.0;
                    break;
                case ChannelRef::Kind::McIn:
                case ChannelRef::Kind::McOut:
                    break; // held at last observation
                }
            }
        }
    }
}

} // namespace

std::vector<double> predict_multi_step(const TrainedModel& model,
                                       const std::vector<std::vector<double>>& seed_windows,
                                       int horizon, std::span<const EpochHour> future_hours) {
    if (horizon < 1) fail(Errc::HorizonZero, "horizon must be >= 1");
    if (static_cast<int>(future_hours.size()) < horizon) {
        fail(Errc::ConfigError, "future_hours must cover the horizon");
    }
    if (seed_windows.size() != model.groups.size()) {
        fail(Errc::ShapeMismatch, "one seed window per group required");
    }

    const std::size_t u = static_cast<std::size_t>(model.net.window);
    std::vector<Tensor3> windows(model.groups.size());
    for (std::size_t g = 0; g < windows.size(); ++g) {
        const auto c_count = static_cast<std::size_t>(model.net.group_channels[g]);
        if (seed_windows[g].size() != u * c_count) {
            fail(Errc::ShapeMismatch, "seed window for group " + std::to_string(g) +
                                          " must be window x channels");
        }
        windows[g].resize(1, u, c_count);
        std::copy(seed_windows[g].begin(), seed_windows[g].end(), windows[g].v.begin());
    }

    const std::size_t heads = model.groups.size();
    std::vector<double> out(static_cast<std::size_t>(horizon) * heads, 0.0);
    std::vector<EpochHour> hour(1);
    for (int step = 0; step < horizon; ++step) {
        const auto preds = forward(model.net, model.params, windows, nullptr);
        for (std::size_t k = 0; k < heads; ++k) {
            const auto& stats = model.groups[k].f0_stats();
            out[static_cast<std::size_t>(step) * heads + k] =
                preds[k] * stats.std + stats.mean;
        }
        hour[0] = future_hours[step];
        roll_windows(windows, model, preds, hour);
    }
    return out;
}

EvalReport evaluate(const TrainedModel& model, const std::vector<DatasetBundle>& groups,
                    std::span<const int> horizons) {
    if (groups.size() != model.groups.size()) {
        fail(Errc::ShapeMismatch, "one dataset bundle per group required");
    }
    check_group_alignment(groups);
    const std::size_t n = groups.front().test.size();
    if (n == 0) fail(Errc::EmptyDataset, "empty test dataset");
    for (int h : horizons) {
        if (h < 1) fail(Errc::HorizonZero, "horizon must be >= 1");
    }

    const int max_horizon = *std::max_element(horizons.begin(), horizons.end());
    const std::size_t heads = groups.size();

    // Batched recursive rollout: every test hour is an origin; all origins
    // advance in lockstep.
    std::vector<Tensor3> windows(groups.size());
    for (std::size_t g = 0; g < groups.size(); ++g) {
        windows[g] = groups[g].test.inputs;
    }
    std::vector<EpochHour> hours(n);

    // preds_norm[step] is the normalized prediction for hour target+step.
    std::vector<std::vector<double>> preds_norm(max_horizon);
    for (int step = 0; step < max_horizon; ++step) {
        preds_norm[step] = forward(model.net, model.params, windows, nullptr);
        for (std::size_t i = 0; i < n; ++i) {
            hours[i] = groups.front().test.target_hours[i] + step;
        }
        if (step + 1 < max_horizon) {
            roll_windows(windows, model, preds_norm[step], hours);
        }
    }

    EvalReport report;
    for (int h : horizons) {
        if (static_cast<std::size_t>(h) > n) continue; // no origin has h true hours left
        const std::size_t count = n - static_cast<std::size_t>(h) + 1;
        for (std::size_t k = 0; k < heads; ++k) {
            const auto& stats = groups[k].schema.f0_stats();
            std::vector<double> errors(count);
            for (std::size_t i = 0; i < count; ++i) {
                const double pred_norm = preds_norm[h - 1][i * heads + k];
                const double actual_norm = groups[k].test.targets[i + h - 1];
                errors[i] = (pred_norm - actual_norm) * stats.std;
            }
            HeadEval row;
            row.cell = groups[k].schema.cell;
            row.slice = groups[k].schema.slice;
            row.horizon = h;
            row.weight = model.heads[k].weight;
            row.target_rate = model.heads[k].target_rate;
            row.unmet = model.heads[k].unmet;
            row.count = count;
            row.sla_loss = sla_based_loss(errors, row.weight);
            row.violation_rate = sla_violation_rate(errors);
            row.overprov_volume = overprovisioning_volume(errors);
            report.rows.push_back(std::move(row));
        }
    }
    return report;
}

// ---------------------------------------------------------------------------
// Experiments
// ---------------------------------------------------------------------------

void ExperimentConfig::validate() const {
    train.validate();
    arch.validate();
    if (model_kinds.empty()) fail(Errc::ConfigError, "model_kinds must be non-empty");
    if (losses.empty()) fail(Errc::ConfigError, "losses must be non-empty");
    if (horizons.empty()) fail(Errc::ConfigError, "horizons must be non-empty");
    for (int h : horizons) {
        if (h < 1) fail(Errc::ConfigError, "horizons must be >= 1");
    }
    check_grid(weight_grid);
    const bool multi = arch.kind == ArchKind::MultiCell || arch.kind == ArchKind::MultiSlice;
    if (multi) {
        if (arch.head_targets.empty()) {
            fail(Errc::ConfigError, "multi-head architectures need head_targets");
        }
    } else {
        if (sla_targets.empty()) fail(Errc::ConfigError, "sla_targets must be non-empty");
        for (double t : sla_targets) SlaTarget{t}.validate();
    }
    if (!(correlation_threshold > 0.0 && correlation_threshold < 1.0)) {
        fail(Errc::ConfigError, "correlation_threshold must be in (0,1)");
    }
    if (!(peak_ratio > 0.0 && peak_ratio < 1.0)) {
        fail(Errc::ConfigError, "peak_ratio must be in (0,1)");
    }
    if (parallel < 1) fail(Errc::ConfigError, "parallel must be >= 1");
    for (int f : folds) {
        if (f < 0 || f >= fold.fold_count) fail(Errc::ConfigError, "fold index out of range");
    }
}

namespace {

void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& fn) {
    if (threads <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto worker = [&]() {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= count) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    const int n_threads = std::min<int>(threads, static_cast<int>(count));
    pool.reserve(n_threads);
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

std::string format_target(double target) {
    // 0.05 -> "sla5", 0.03 -> "sla3", 0.015 -> "sla1.5"
    const double percent = target * 100.0;
    const double rounded = std::round(percent);
    if (std::abs(percent - rounded) < 1e-9) {
        return "sla" + std::to_string(static_cast<int>(rounded));
    }
    return "sla" + format_double(percent);
}

struct UnitOutput {
    std::vector<ReportRow> rows;
    std::vector<TrainedModel> models;
    std::vector<std::string> names;
};

ReportRow make_row(const ExperimentConfig& config, const std::string& model_kind,
                   const HeadEval& eval, int fold_index, double target) {
    ReportRow row;
    row.arch = std::string(arch_kind_name(config.arch.kind));
    row.model_kind = model_kind;
    row.cell = eval.cell.str();
    row.slice = std::string(slice_name(eval.slice));
    row.sla_target = target;
    row.horizon = eval.horizon;
    row.fold = std::to_string(fold_index);
    row.sla_loss = eval.sla_loss;
    row.violation_rate = eval.violation_rate;
    row.overprov_volume = eval.overprov_volume;
    row.weight_w = eval.weight;
    row.flag_unmet = eval.unmet;
    return row;
}

// One (fold, model kind) work unit of an experiment.
UnitOutput run_unit(const TelemetryStore& store, const ExperimentConfig& config,
                    int fold_index, const FoldSplit& split, ModelKind kind) {
    UnitOutput out;
    const bool multi =
        config.arch.kind == ArchKind::MultiCell || config.arch.kind == ArchKind::MultiSlice;

    const auto keys = config.arch.group_keys();
    std::vector<DatasetBundle> groups;
    groups.reserve(keys.size());
    for (const auto& [cell, slice] : keys) {
        groups.push_back(build_dataset(store, cell, slice, kind, split, config.train.window,
                                       config.correlation_threshold, config.peak_ratio));
    }

    const std::string kind_name(model_kind_name(kind));
    const std::string arch_name(arch_kind_name(config.arch.kind));

    auto emit = [&](const TrainedModel& model, const std::string& model_label,
                    const std::string& name_stem, double target) {
        const EvalReport report = evaluate(model, groups, config.horizons);
        for (const auto& eval : report.rows) {
            const double row_target = multi ? eval.target_rate : target;
            out.rows.push_back(make_row(config, model_label, eval, fold_index, row_target));
        }
        out.models.push_back(model);
        out.names.push_back(name_stem);
    };

    if (multi) {
        const MultiheadCalibration calib =
            calibrate_multihead(groups, config.arch, config.train, config.weight_grid);
        TrainedModel model =
            train_multihead(groups, config.arch, calib.weights, config.train);
        for (std::size_t k = 0; k < groups.size(); ++k) {
            model.heads[k].weight = calib.weights[k];
            model.heads[k].target_rate = config.arch.head_targets[k].rate;
            model.heads[k].unmet = calib.unmet[k];
        }
        model.fold_spec = config.fold;
        model.fold_index = fold_index;
        std::string stem = arch_name + "_" + kind_name + "_" + keys.front().first.str();
        if (config.arch.kind == ArchKind::MultiCell) {
            stem += "x" + std::to_string(keys.size());
        }
        emit(model, kind_name, stem + "_fold" + std::to_string(fold_index), 0.0);
        return out;
    }

    const auto& [cell, slice] = keys.front();
    const std::string series_stem = cell.str() + "_" + std::string(slice_name(slice));

    // Grid models are shared by every target: train once per grid point.
    std::vector<TrainedModel> grid_models;
    std::vector<double> grid_rates;
    for (double w : config.weight_grid) {
        TrainedModel model = train_single(groups.front(), LossSpec::wmae(w), config.train);
        grid_rates.push_back(model_validation_rate(model, groups, 0));
        grid_models.push_back(std::move(model));
    }

    std::vector<double> chosen_weights;
    for (double target : config.sla_targets) {
        std::size_t chosen = config.weight_grid.size() - 1;
        bool unmet = true;
        for (std::size_t i = 0; i < config.weight_grid.size(); ++i) {
            if (grid_rates[i] <= target) {
                chosen = i;
                unmet = false;
                break;
            }
        }
        chosen_weights.push_back(config.weight_grid[chosen]);

        TrainedModel model = grid_models[chosen];
        model.heads[0].weight = config.weight_grid[chosen];
        model.heads[0].target_rate = target;
        model.heads[0].unmet = unmet;
        model.fold_spec = config.fold;
        model.fold_index = fold_index;

        const bool wmae_wanted =
            std::any_of(config.losses.begin(), config.losses.end(),
                        [](const LossSpec& l) { return l.kind == LossKind::WMae; });
        if (wmae_wanted) {
            emit(model, kind_name,
                 arch_name + "_" + kind_name + "_" + series_stem + "_" +
                     format_target(target) + "_fold" + std::to_string(fold_index),
                 target);
        }
    }

    // Baseline losses: trained once, evaluated at each target's chosen w.
    for (const auto& loss : config.losses) {
        if (loss.kind == LossKind::WMae) continue;
        TrainedModel model = train_single(groups.front(), loss, config.train);
        model.fold_spec = config.fold;
        model.fold_index = fold_index;
        const std::string label = kind_name + "@" + std::string(loss_kind_name(loss.kind));
        for (std::size_t t = 0; t < config.sla_targets.size(); ++t) {
            TrainedModel scored = model;
            scored.heads[0].weight = chosen_weights[t];
            scored.heads[0].target_rate = config.sla_targets[t];
            emit(scored, label,
                 arch_name + "_" + kind_name + "-" + std::string(loss_kind_name(loss.kind)) +
                     "_" + series_stem + "_" + format_target(config.sla_targets[t]) + "_fold" +
                     std::to_string(fold_index),
                 config.sla_targets[t]);
        }
    }
    return out;
}

} // namespace

ExperimentResult run_experiment(const TelemetryStore& store, const ExperimentConfig& config) {
    config.validate();

    const auto keys = config.arch.group_keys();
    for (const auto& [cell, slice] : keys) {
        const CellSeries* series = store.find(cell, slice);
        if (series == nullptr) {
            fail(Errc::EmptyDataset,
                 "no series for " + cell.str() + "/" + std::string(slice_name(slice)));
        }
        const auto report = validate_series(*series);
        if (report.gap_count() > 0) {
            std::string msg = cell.str() + "/" + std::string(slice_name(slice)) + " has " +
                              std::to_string(report.gap_count()) + " gap(s) at hour offsets";
            for (std::size_t i = 0; i < std::min<std::size_t>(report.gap_indices.size(), 8);
                 ++i) {
                msg += ' ' + std::to_string(report.gap_indices[i]);
            }
            fail(Errc::GapInSeries, msg);
        }
        if (report.negative_count() > 0) {
            fail(Errc::MalformedRow,
                 cell.str() + "/" + std::string(slice_name(slice)) + " has " +
                     std::to_string(report.negative_count()) + " negative F0 value(s)");
        }
    }
    const CellSeries* anchor = store.find(keys.front().first, keys.front().second);
    const auto splits = config.fold.make(static_cast<std::int64_t>(anchor->size()));

    std::vector<int> fold_indices = config.folds;
    if (fold_indices.empty()) {
        for (int i = 0; i < config.fold.fold_count; ++i) fold_indices.push_back(i);
    }

    struct Unit {
        int fold_index;
        ModelKind kind;
    };
    std::vector<Unit> units;
    for (int f : fold_indices) {
        for (ModelKind kind : config.model_kinds) units.push_back({f, kind});
    }

    std::vector<UnitOutput> outputs(units.size());
    parallel_for(units.size(), config.parallel, [&](std::size_t i) {
        outputs[i] = run_unit(store, config, units[i].fold_index,
                              splits[units[i].fold_index], units[i].kind);
    });

    ExperimentResult result;
    for (auto& out : outputs) {
        result.rows.insert(result.rows.end(), out.rows.begin(), out.rows.end());
        for (std::size_t i = 0; i < out.models.size(); ++i) {
            result.models.push_back(std::move(out.models[i]));
            result.model_names.push_back(std::move(out.names[i]));
        }
    }

    // Aggregate over folds: arithmetic mean per (model, cell, slice, target,
    // horizon) group, in first-seen order.
    struct Agg {
        ReportRow row;
        double loss = 0, rate = 0, volume = 0, weight = 0;
        int count = 0;
        bool unmet = false;
    };
    std::vector<Agg> aggs;
    for (const auto& row : result.rows) {
        const auto key = std::tie(row.arch, row.model_kind, row.cell, row.slice,
                                  row.sla_target, row.horizon);
        auto it = std::find_if(aggs.begin(), aggs.end(), [&](const Agg& a) {
            return std::tie(a.row.arch, a.row.model_kind, a.row.cell, a.row.slice,
                            a.row.sla_target, a.row.horizon) == key;
        });
        if (it == aggs.end()) {
            aggs.push_back({row, 0, 0, 0, 0, 0, false});
            it = std::prev(aggs.end());
        }
        it->loss += row.sla_loss;
        it->rate += row.violation_rate;
        it->volume += row.overprov_volume;
        it->weight += row.weight_w;
        it->unmet = it->unmet || row.flag_unmet;
        it->count += 1;
    }
    for (const auto& agg : aggs) {
        ReportRow row = agg.row;
        row.fold = "mean";
        row.sla_loss = agg.loss / agg.count;
        row.violation_rate = agg.rate / agg.count;
        row.overprov_volume = agg.volume / agg.count;
        row.weight_w = agg.weight / agg.count;
        row.flag_unmet = agg.unmet;
        result.rows.push_back(std::move(row));
    }
    return result;
}

std::string report_csv(const std::vector<ReportRow>& rows) {
    std::string out = "arch,model_kind,cell,slice,sla_target,horizon,fold,sla_loss,"
                      "violation_rate,overprov_volume,weight_w,flag_unmet\n";
    for (const auto& r : rows) {
        out += r.arch;
        out += ',';
        out += r.model_kind;
        out += ',';
        out += r.cell;
        out += ',';
        out += r.slice;
        out += ',';
        out += format_double(r.sla_target);
        out += ',';
        out += std::to_string(r.horizon);
        out += ',';
        out += r.fold;
        out += ',';
        out += format_double(r.sla_loss);
        out += ',';
        out += format_double(r.violation_rate);
        out += ',';
        out += format_double(r.overprov_volume);
        out += ',';
        out += format_double(r.weight_w);
        out += ',';
        out += r.flag_unmet ? '1' : '0';
        out += '\n';
    }
    return out;
}

std::string summary_table(const std::vector<ReportRow>& rows) {
    std::ostringstream out;
    out << "model             arch          cell   slice  target  horizon  fold  "
           "sla_loss   rate    volume    w\n";
    for (const auto& r : rows) {
        if (r.fold != "mean") continue;
        char line[200];
        std::snprintf(line, sizeof(line),
                      "%-17s %-13s %-6s %-6s %5.3f %8d  mean  %8.4f  %5.3f  %8.4f  %4.2g%s\n",
                      r.model_kind.c_str(), r.arch.c_str(), r.cell.c_str(), r.slice.c_str(),
                      r.sla_target, r.horizon, r.sla_loss, r.violation_rate, r.overprov_volume,
                      r.weight_w, r.flag_unmet ? "  [target unmet]" : "");
        out << line;
    }
    return out.str();
}

// ---------------------------------------------------------------------------
// Experiment config JSON
// ---------------------------------------------------------------------------

ExperimentConfig experiment_from_json(const std::string& text) {
    const Json j = parse_json(text, "experiment config");
    check_keys(j,
               {"fold", "folds", "train", "architecture", "model_kinds", "losses",
                "sla_targets", "weight_grid", "horizons", "correlation_threshold",
                "peak_ratio", "parallel"},
               "experiment config");

    ExperimentConfig config;

    const Json& jf = j.contains("fold") ? j.at("fold") : Json::object();
    check_keys(jf, {"fold_count", "segment_weeks", "test_weeks"}, "fold");
    config.fold.fold_count = get_or(jf, "fold_count", config.fold.fold_count);
    config.fold.segment_weeks = get_or(jf, "segment_weeks", config.fold.segment_weeks);
    config.fold.test_weeks = get_or(jf, "test_weeks", config.fold.test_weeks);
    config.folds = get_or(j, "folds", std::vector<int>{});

    const Json& jt = j.contains("train") ? j.at("train") : Json::object();
    check_keys(jt, {"epochs_max", "patience", "batch", "lr", "window", "hidden", "seed"},
               "train");
    config.train.epochs_max = get_or(jt, "epochs_max", config.train.epochs_max);
    config.train.patience = get_or(jt, "patience", config.train.patience);
    config.train.batch = get_or(jt, "batch", config.train.batch);
    config.train.lr = get_or(jt, "lr", config.train.lr);
    config.train.window = get_or(jt, "window", config.train.window);
    config.train.hidden = get_or(jt, "hidden", config.train.hidden);
    config.train.seed = get_or<std::uint64_t>(jt, "seed", config.train.seed);

    const Json& ja = get_required<Json>(j, "architecture", "experiment config");
    check_keys(ja,
               {"kind", "base_station", "cell_index", "slice", "cells", "slices",
                "head_targets"},
               "architecture");
    const auto kind = parse_arch_kind(get_required<std::string>(ja, "kind", "architecture"));
    if (!kind) fail(Errc::ConfigError, "architecture: unknown kind");
    config.arch.kind = *kind;
    if (ja.contains("base_station")) {
        config.arch.cell = {get_required<std::string>(ja, "base_station", "architecture"),
                            get_required<int>(ja, "cell_index", "architecture")};
    }
    if (ja.contains("slice")) {
        const auto slice = parse_slice(get_required<std::string>(ja, "slice", "architecture"));
        if (!slice) fail(Errc::ConfigError, "architecture: bad slice");
        config.arch.slice = *slice;
    }
    if (ja.contains("cells")) {
        for (const auto& jc : ja.at("cells")) {
            check_keys(jc, {"base_station", "cell_index"}, "architecture cell");
            config.arch.cells.push_back(
                {get_required<std::string>(jc, "base_station", "architecture cell"),
                 get_required<int>(jc, "cell_index", "architecture cell")});
        }
    }
    if (ja.contains("slices")) {
        for (const auto& js : ja.at("slices")) {
            const auto slice = parse_slice(js.get<std::string>());
            if (!slice) fail(Errc::ConfigError, "architecture: bad slice list entry");
            config.arch.slices.push_back(*slice);
        }
    }
    if (ja.contains("head_targets")) {
        for (const auto& jt2 : ja.at("head_targets")) {
            config.arch.head_targets.push_back(SlaTarget{jt2.get<double>()});
        }
    }

    config.model_kinds.clear();
    for (const auto& jk : get_required<Json>(j, "model_kinds", "experiment config")) {
        const auto mk = parse_model_kind(jk.get<std::string>());
        if (!mk) fail(Errc::ConfigError, "unknown model kind '" + jk.get<std::string>() + "'");
        config.model_kinds.push_back(*mk);
    }

    if (j.contains("losses")) {
        config.losses.clear();
        for (const auto& jl : j.at("losses")) {
            check_keys(jl, {"kind", "delta"}, "loss");
            const auto lk = parse_loss_kind(get_required<std::string>(jl, "kind", "loss"));
            if (!lk) fail(Errc::ConfigError, "unknown loss kind");
            LossSpec spec;
            spec.kind = *lk;
            spec.delta = get_or(jl, "delta", 1.0);
            if (*lk == LossKind::Huber) spec = LossSpec::huber(spec.delta);
            config.losses.push_back(spec);
        }
    }

    config.sla_targets = get_or(j, "sla_targets", config.sla_targets);
    config.weight_grid = get_or(j, "weight_grid", config.weight_grid);
    config.horizons = get_or(j, "horizons", config.horizons);
    config.correlation_threshold =
        get_or(j, "correlation_threshold", config.correlation_threshold);
    config.peak_ratio = get_or(j, "peak_ratio", config.peak_ratio);
    config.parallel = get_or(j, "parallel", config.parallel);

    config.validate();
    return config;
}

std::string experiment_to_json(const ExperimentConfig& config) {
    Json ja{{"kind", std::string(arch_kind_name(config.arch.kind))}};
    if (!config.arch.cell.base_station.empty()) {
        ja["base_station"] = config.arch.cell.base_station;
        ja["cell_index"] = config.arch.cell.cell_index;
    }
    ja["slice"] = std::string(slice_name(config.arch.slice));
    if (!config.arch.cells.empty()) {
        Json cells = Json::array();
        for (const auto& c : config.arch.cells) {
            cells.push_back(Json{{"base_station", c.base_station}, {"cell_index", c.cell_index}});
        }
        ja["cells"] = cells;
    }
    if (!config.arch.slices.empty()) {
        Json slices = Json::array();
        for (SliceKind s : config.arch.slices) slices.push_back(std::string(slice_name(s)));
        ja["slices"] = slices;
    }
    if (!config.arch.head_targets.empty()) {
        Json targets = Json::array();
        for (const auto& t : config.arch.head_targets) targets.push_back(t.rate);
        ja["head_targets"] = targets;
    }

    Json losses = Json::array();
    for (const auto& l : config.losses) {
        Json jl{{"kind", std::string(loss_kind_name(l.kind))}};
        if (l.kind == LossKind::Huber) jl["delta"] = l.delta;
        losses.push_back(jl);
    }
    Json kinds = Json::array();
    for (ModelKind k : config.model_kinds) kinds.push_back(std::string(model_kind_name(k)));

    const Json j{
        {"fold",
         Json{{"fold_count", config.fold.fold_count},
              {"segment_weeks", config.fold.segment_weeks},
              {"test_weeks", config.fold.test_weeks}}},
        {"folds", config.folds},
        {"train",
         Json{{"epochs_max", config.train.epochs_max},
              {"patience", config.train.patience},
              {"batch", config.train.batch},
              {"lr", config.train.lr},
              {"window", config.train.window},
              {"hidden", config.train.hidden},
              {"seed", config.train.seed}}},
        {"architecture", ja},
        {"model_kinds", kinds},
        {"losses", losses},
        {"sla_targets", config.sla_targets},
        {"weight_grid", config.weight_grid},
        {"horizons", config.horizons},
        {"correlation_threshold", config.correlation_threshold},
        {"peak_ratio", config.peak_ratio},
        {"parallel", config.parallel},
    };
    return j.dump(2) + "\n";
}

} // namespace slafc
