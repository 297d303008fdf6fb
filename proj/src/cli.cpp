#include "cli.hpp"

#include <chrono>
#include <fstream>
#include <iostream>
#include <map>

#include <CLI11.hpp>

#include "slafc/checkpoint.hpp"
#include "slafc/pipeline.hpp"
#include "slafc/synthgen.hpp"
#include "json_util.hpp"

namespace slafc {

namespace {

namespace fs = std::filesystem;

int exit_code_for(Errc code) {
    switch (code) {
    case Errc::ConfigError:
    case Errc::EmptyGrid:
    case Errc::HorizonZero:
        return 2;
    case Errc::IoError:
        return 3;
    case Errc::NonFiniteLoss:
    case Errc::NonFiniteGradient:
        return 5;
    case Errc::CheckpointMismatch:
        return 6;
    default:
        return 4; // data validation failures
    }
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(Errc::IoError, "cannot open " + path.string());
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(Errc::IoError, "cannot write " + path.string());
    out << content;
    if (!out) fail(Errc::IoError, "write failure on " + path.string());
}

std::string fnv1a64_hex(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    char buf[19];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// Wall-clock stage timing plus the input digests recorded in manifest.json.
class Manifest {
public:
    Manifest(fs::path dir, std::string command, std::uint64_t seed, Json config_echo)
        : path_(std::move(dir) / "manifest.json"), start_(Clock::now()) {
        doc_["toolkit_version"] = kToolkitVersion;
        doc_["command"] = std::move(command);
        doc_["seed"] = seed;
        doc_["config"] = std::move(config_echo);
        doc_["inputs"] = Json::object();
        doc_["durations_ms"] = Json::object();
        doc_["status"] = "running";
        write_file(path_, doc_.dump(2) + "\n");
    }

    void add_input(const fs::path& file) {
        doc_["inputs"][file.filename().string()] = "fnv1a64:" + fnv1a64_hex(read_file(file));
    }

    void stage_done(const std::string& stage) {
        const auto now = Clock::now();
        doc_["durations_ms"][stage] =
            std::chrono::duration_cast<std::chrono::milliseconds>(now - mark_).count();
        mark_ = now;
    }

    void finalize() {
        doc_["durations_ms"]["total"] =
            std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - start_)
                .count();
        doc_["status"] = "complete";
        write_file(path_, doc_.dump(2) + "\n");
    }

private:
    using Clock = std::chrono::steady_clock;
    fs::path path_;
    Json doc_;
    Clock::time_point start_;
    Clock::time_point mark_ = Clock::now();
};

TelemetryStore load_data_dir(const fs::path& data_dir, Manifest* manifest) {
    const fs::path telemetry = data_dir / "telemetry.csv";
    const fs::path handover = data_dir / "handover.csv";
    std::optional<fs::path> handover_arg;
    if (fs::exists(handover)) handover_arg = handover;
    if (manifest != nullptr) {
        manifest->add_input(telemetry);
        if (handover_arg) manifest->add_input(*handover_arg);
    }
    return load_telemetry(telemetry, handover_arg);
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

int cmd_gen(const std::string& config_path, const std::string& out_dir) {
    const ScenarioConfig config = scenario_from_json(read_file(config_path));
    fs::create_directories(out_dir);

    Manifest manifest(out_dir, "gen", config.seed,
                      parse_json(scenario_to_json(config), "scenario echo"));
    const TelemetryStore store = generate_scenario(config);
    manifest.stage_done("generate");

    save_telemetry(store, fs::path(out_dir) / "telemetry.csv",
                   store.handovers.empty()
                       ? std::optional<fs::path>{}
                       : std::optional<fs::path>{fs::path(out_dir) / "handover.csv"});
    write_file(fs::path(out_dir) / "scenario.json", scenario_to_json(config));
    manifest.stage_done("write");
    manifest.finalize();

    std::cout << "generated " << store.series.size() << " series x "
              << (store.series.empty() ? 0 : store.series.front().size()) << " hours into "
              << out_dir << "\n";
    return 0;
}

int cmd_features(const std::string& config_path, const std::string& data_dir,
                 const std::string& out_file) {
    const ExperimentConfig config = experiment_from_json(read_file(config_path));
    const TelemetryStore store = load_data_dir(data_dir, nullptr);

    const int fold_index = config.folds.empty() ? 0 : config.folds.front();

    Json cells = Json::array();
    for (const auto& series : store.series) {
        if (series.slice != SliceKind::Total) continue;
        const auto splits = config.fold.make(static_cast<std::int64_t>(series.size()));
        const FoldSplit& split = splits.at(fold_index);

        Json entry{{"cell", series.cell.str()}, {"fold", fold_index}};

        Json selected = Json::array();
        const auto f0 = series.values(FeatureLabel::f0());
        for (const auto& label : select_features(store, series.cell, SliceKind::Total,
                                                 config.correlation_threshold, split.train)) {
            // Recompute the coefficient over the same training hours for the report.
            std::vector<double> a, b;
            for (const auto& r : split.train) {
                for (std::int64_t i = r.begin; i < r.end; ++i) {
                    a.push_back(f0[static_cast<std::size_t>(i)]);
                    b.push_back(series.values(label)[static_cast<std::size_t>(i)]);
                }
            }
            selected.push_back(
                Json{{"label", label.name()}, {"coefficient", pearson_correlation(a, b)}});
        }
        entry["selected"] = selected;

        const PeakTable peak = label_peak_hours(series, split.train, config.peak_ratio);
        Json flags = Json::array();
        for (bool f : peak) flags.push_back(f ? 1 : 0);
        entry["peak_hours"] = flags;

        for (const auto& [direction, name] :
             std::initializer_list<std::pair<Direction, const char*>>{
                 {Direction::Incoming, "incoming"}, {Direction::Outgoing, "outgoing"}}) {
            const auto neighbors = direction == Direction::Incoming
                                       ? store.handovers.incoming(series.cell)
                                       : store.handovers.outgoing(series.cell);
            double total = 0.0;
            for (const auto& [_, rate] : neighbors) total += rate;
            Json list = Json::array();
            for (const auto& [neighbor, rate] : neighbors) {
                list.push_back(Json{{"cell", neighbor.str()},
                                    {"rate_percent", rate},
                                    {"weight", total > 0 ? rate / total : 0.0}});
            }
            entry["neighbors"][name] = list;
        }
        cells.push_back(std::move(entry));
    }

    write_file(out_file, Json{{"cells", cells}}.dump(2) + "\n");
    std::cout << "feature report for " << cells.size() << " cells written to " << out_file
              << "\n";
    return 0;
}

int cmd_train(const std::string& config_path, const std::string& data_dir,
              const std::string& out_dir, int parallel_override) {
    ExperimentConfig config = experiment_from_json(read_file(config_path));
    if (parallel_override > 0) config.parallel = parallel_override;
    fs::create_directories(out_dir);
    fs::create_directories(fs::path(out_dir) / "checkpoints");

    Manifest manifest(out_dir, "train", config.train.seed,
                      parse_json(experiment_to_json(config), "experiment echo"));
    manifest.add_input(config_path);
    const TelemetryStore store = load_data_dir(data_dir, &manifest);
    manifest.stage_done("load");

    const ExperimentResult result = run_experiment(store, config);
    manifest.stage_done("train");

    for (std::size_t i = 0; i < result.models.size(); ++i) {
        save_checkpoint(result.models[i],
                        fs::path(out_dir) / "checkpoints" / (result.model_names[i] + ".json"));
    }
    write_file(fs::path(out_dir) / "report.csv", report_csv(result.rows));
    manifest.stage_done("write");
    manifest.finalize();

    std::cout << summary_table(result.rows);
    return 0;
}

int cmd_eval(const std::string& checkpoint_path, const std::string& data_dir,
             const std::vector<int>& horizons, const std::string& out_file) {
    const TrainedModel model = load_checkpoint(checkpoint_path);
    const TelemetryStore store = load_data_dir(data_dir, nullptr);

    std::vector<DatasetBundle> groups;
    try {
        for (const auto& schema : model.groups) {
            groups.push_back(
                build_dataset_with_schema(store, schema, model.fold, model.net.window));
        }
    } catch (const Error& e) {
        // The checkpoint does not describe this dataset.
        fail(Errc::CheckpointMismatch, e.what());
    }

    const EvalReport report = evaluate(model, groups, horizons);

    std::string label(model_kind_name(model.model_kind));
    if (model.trained_loss.kind != LossKind::WMae) {
        label += "@" + std::string(loss_kind_name(model.trained_loss.kind));
    }
    std::vector<ReportRow> rows;
    for (const auto& eval : report.rows) {
        ReportRow row;
        row.arch = std::string(arch_kind_name(model.arch));
        row.model_kind = label;
        row.cell = eval.cell.str();
        row.slice = std::string(slice_name(eval.slice));
        row.sla_target = eval.target_rate;
        row.horizon = eval.horizon;
        row.fold = std::to_string(model.fold_index);
        row.sla_loss = eval.sla_loss;
        row.violation_rate = eval.violation_rate;
        row.overprov_volume = eval.overprov_volume;
        row.weight_w = eval.weight;
        row.flag_unmet = eval.unmet;
        rows.push_back(std::move(row));
    }

    write_file(out_file, report_csv(rows));

    std::cout << "cell   slice  horizon  sla_loss   rate    volume\n";
    for (const auto& r : rows) {
        char line[120];
        std::snprintf(line, sizeof(line), "%-6s %-6s %7d  %8.4f  %5.3f  %8.4f\n",
                      r.cell.c_str(), r.slice.c_str(), r.horizon, r.sla_loss,
                      r.violation_rate, r.overprov_volume);
        std::cout << line;
    }
    return 0;
}

} // namespace

int cli_main(int argc, char** argv) {
    CLI::App app{"SLA-constrained cellular traffic forecasting toolkit"};
    app.require_subcommand(1);

    std::string config_path, data_dir, out_path, checkpoint_path;
    int parallel = 0;
    std::vector<int> horizons{1};

    auto* gen = app.add_subcommand("gen", "Generate a synthetic telemetry scenario");
    gen->add_option("--config", config_path, "Scenario config JSON")->required();
    gen->add_option("--out", out_path, "Output directory")->required();

    auto* features = app.add_subcommand("features", "Emit the per-cell feature report");
    features->add_option("--config", config_path, "Experiment config JSON")->required();
    features->add_option("--data", data_dir, "Data directory (telemetry.csv, handover.csv)")
        ->required();
    features->add_option("--out", out_path, "Output JSON file")->required();

    auto* train = app.add_subcommand("train", "Train and calibrate models");
    train->add_option("--config", config_path, "Experiment config JSON")->required();
    train->add_option("--data", data_dir, "Data directory")->required();
    train->add_option("--out", out_path, "Output directory")->required();
    train->add_option("--parallel", parallel, "Fan out independent tasks over N threads");

    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on its test range");
    eval->add_option("--checkpoint", checkpoint_path, "Checkpoint JSON")->required();
    eval->add_option("--data", data_dir, "Data directory")->required();
    eval->add_option("--horizons", horizons, "Prediction horizons (hours)")->delimiter(',');
    eval->add_option("--out", out_path, "Output report CSV")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (gen->parsed()) return cmd_gen(config_path, out_path);
        if (features->parsed()) return cmd_features(config_path, data_dir, out_path);
        if (train->parsed()) return cmd_train(config_path, data_dir, out_path, parallel);
        if (eval->parsed()) return cmd_eval(checkpoint_path, data_dir, horizons, out_path);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}

} // namespace slafc
