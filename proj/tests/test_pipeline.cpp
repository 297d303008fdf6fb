#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "slafc/pipeline.hpp"
#include "slafc/synthgen.hpp"
#include "test_util.hpp"

using namespace slafc;
using namespace slafc_test;

namespace {

// 3-week scenario split as 2 one-week segments + 1 test week; fold 1 trains
// on week 0 and validates on week 1.
FoldSplit small_fold() {
    return split_folds(3 * 168, 2, 1, 1)[1];
}

TrainConfig fast_config(std::uint64_t seed) {
    TrainConfig config;
    config.epochs_max = 25;
    config.patience = 6;
    config.batch = 32;
    config.lr = 5e-3;
    config.window = 24;
    config.hidden = 8;
    config.seed = seed;
    return config;
}

DatasetBundle constant_bundle() {
    ScenarioConfig scenario;
    scenario.weeks = 3;
    scenario.seed = 2;
    CellProfile profile;
    profile.base_load = 100.0;
    profile.daily_amplitude = 0.0;
    scenario.cells.push_back({CellId{"A", 1}, {{SliceKind::Total, profile}}});
    const auto store = generate_scenario(scenario);
    return build_dataset(store, {"A", 1}, SliceKind::Total, ModelKind::Univariate,
                         small_fold(), 24, 0.9);
}

// Zero network with a fixed head bias: predicts `bias` (normalized) always.
TrainedModel bias_model(const DatasetBundle& bundle, double bias, double weight) {
    TrainedModel model;
    model.net = NetConfig{{static_cast<int>(bundle.train.channel_count())}, 2, 24, 0};
    model.params = init_params(model.net);
    visit_params(model.params, [](double& x) { x = 0.0; });
    model.params.head[0].b = bias;
    model.arch = ArchKind::SingleCell;
    model.model_kind = bundle.schema.kind;
    model.groups = {bundle.schema};
    model.heads = {{weight, 0.0, false}};
    model.fold = bundle.fold;
    return model;
}

std::vector<double> validation_errors(const TrainedModel& model, const DatasetBundle& bundle) {
    const auto preds =
        forward(model.net, model.params, {bundle.validation.inputs}, nullptr);
    std::vector<double> errors(preds.size());
    const double sigma = bundle.schema.f0_stats().std;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        errors[i] = (preds[i] - bundle.validation.targets[i]) * sigma;
    }
    return errors;
}

} // namespace

TEST_SUITE("pipeline") {

TEST_CASE("fold spec arithmetic") {
    FoldSpec spec{2, 1, 1};
    CHECK(spec.expected_hours() == 3 * 168);
    CHECK(spec.make(3 * 168).size() == 2);
    CHECK_THROWS_AS(spec.make(400), Error);
}

TEST_CASE("train_single fits a constant-target dataset") {
    const auto bundle = constant_bundle();
    const auto model = train_single(bundle, LossSpec::wmae(1.0), fast_config(3));
    const auto errors = validation_errors(model, bundle);
    double mae = 0.0;
    for (double e : errors) mae += std::abs(e);
    mae /= static_cast<double>(errors.size());
    CHECK(mae < 1e-2);
}

TEST_CASE("training improves the validation metric on structured traffic") {
    const auto store = generate_scenario(basic_scenario(3, 44));
    const auto bundle = build_dataset(store, {"A", 1}, SliceKind::Total,
                                      ModelKind::Univariate, small_fold(), 24, 0.9);
    const auto config = fast_config(4);

    const auto trained = train_single(bundle, LossSpec::wmae(1.0), config);
    TrainedModel untrained = trained;
    untrained.params = init_params(trained.net);

    const auto trained_errors = validation_errors(trained, bundle);
    const auto init_errors = validation_errors(untrained, bundle);
    CHECK(sla_based_loss(trained_errors, 1.0) < sla_based_loss(init_errors, 1.0));
}

TEST_CASE("epochs_max of zero returns the initialized model") {
    const auto bundle = constant_bundle();
    auto config = fast_config(5);
    config.epochs_max = 0;
    config.patience = 0;
    const auto model = train_single(bundle, LossSpec::wmae(1.0), config);

    NetConfig net{{1}, config.hidden, config.window, config.seed};
    const auto reference = init_params(net);
    std::vector<double> a, b;
    visit_params(model.params, [&](double v) { a.push_back(v); });
    visit_params(reference, [&](double v) { b.push_back(v); });
    CHECK(a == b);
}

TEST_CASE("training is deterministic per seed") {
    const auto store = generate_scenario(basic_scenario(3, 45));
    const auto bundle = build_dataset(store, {"A", 1}, SliceKind::Total,
                                      ModelKind::Univariate, small_fold(), 24, 0.9);
    auto config = fast_config(6);
    config.epochs_max = 5;
    config.patience = 4;
    const auto m1 = train_single(bundle, LossSpec::wmae(2.0), config);
    const auto m2 = train_single(bundle, LossSpec::wmae(2.0), config);
    std::vector<double> a, b;
    visit_params(m1.params, [&](double v) { a.push_back(v); });
    visit_params(m2.params, [&](double v) { b.push_back(v); });
    CHECK(a == b);
}

TEST_CASE("empty datasets are rejected") {
    const auto store = generate_scenario(basic_scenario(3, 46));
    FoldSplit fold = small_fold();
    fold.validation = {168, 168}; // empty
    const auto bundle = build_dataset(store, {"A", 1}, SliceKind::Total,
                                      ModelKind::Univariate, fold, 24, 0.9);
    CHECK_THROWS_AS(train_single(bundle, LossSpec::wmae(1.0), fast_config(1)), Error);
}

TEST_CASE("multihead training") {
    const auto store = generate_scenario(basic_scenario(5, 47));
    const FoldSplit fold = split_folds(5 * 168, 2, 2, 1)[1];
    const auto bundle = build_dataset(store, {"A", 1}, SliceKind::Total,
                                      ModelKind::Univariate, fold, 24, 0.9);

    ArchitectureSpec arch;
    arch.kind = ArchKind::MultiCell;
    arch.cells = {{"A", 1}, {"A", 1}}; // two identical groups for the symmetry check
    arch.model_kind = ModelKind::Univariate;
    arch.head_targets = {SlaTarget{0.05}, SlaTarget{0.05}};

    SUBCASE("identical groups reach nearly identical validation losses") {
        const std::vector<DatasetBundle> groups{bundle, bundle};
        const std::vector<double> weights{2.0, 2.0};
        auto config = fast_config(7);
        config.epochs_max = 60;
        config.patience = 12;
        const auto model = train_multihead(groups, arch, weights, config);

        const auto preds =
            forward(model.net, model.params,
                    {groups[0].validation.inputs, groups[1].validation.inputs}, nullptr);
        const double sigma = bundle.schema.f0_stats().std;
        std::vector<double> e0, e1;
        for (std::size_t i = 0; i < groups[0].validation.size(); ++i) {
            e0.push_back((preds[i * 2 + 0] - groups[0].validation.targets[i]) * sigma);
            e1.push_back((preds[i * 2 + 1] - groups[1].validation.targets[i]) * sigma);
        }
        const double l0 = sla_based_loss(e0, 2.0);
        const double l1 = sla_based_loss(e1, 2.0);
        CHECK(std::abs(l0 - l1) / std::max(l0, l1) < 0.05);
    }
    SUBCASE("a single group must use train_single") {
        try {
            train_multihead({bundle}, arch, std::vector<double>{1.0}, fast_config(8));
            FAIL("expected an error");
        } catch (const Error& e) {
            CHECK(e.code() == Errc::MisalignedGroups);
        }
    }
    SUBCASE("misaligned groups are rejected") {
        auto other = bundle;
        other.train.target_hours[0] += 1;
        CHECK_THROWS_AS(train_multihead({bundle, other}, arch, std::vector<double>{1.0, 1.0},
                                        fast_config(9)),
                        Error);
    }
    SUBCASE("evaluate produces one row per horizon per head") {
        const std::vector<DatasetBundle> groups{bundle, bundle};
        auto config = fast_config(7);
        config.epochs_max = 2;
        config.patience = 1;
        const auto model =
            train_multihead(groups, arch, std::vector<double>{2.0, 2.0}, config);
        const std::vector<int> horizons{1, 3};
        const auto report = evaluate(model, groups, horizons);
        REQUIRE(report.rows.size() == 4);
        CHECK(report.rows[0].horizon == 1);
        CHECK(report.rows[1].horizon == 1);
        CHECK(report.rows[2].horizon == 3);
        CHECK(report.rows[0].count == groups[0].test.size());
        CHECK(report.rows[2].count == groups[0].test.size() - 2);
        // Identical groups, identical windows: both heads see the same data,
        // so per-head metrics stay finite and the weights echo the training w.
        CHECK(report.rows[0].weight == 2.0);
    }
}

TEST_CASE("weight line search falls back to the grid maximum when unmet") {
    const auto store = generate_scenario(basic_scenario(3, 48));
    const auto bundle = build_dataset(store, {"A", 1}, SliceKind::Total,
                                      ModelKind::Univariate, small_fold(), 24, 0.9);
    auto config = fast_config(10);
    config.epochs_max = 2;
    config.patience = 1;

    const std::vector<double> grid{1.0};
    const auto result = weight_line_search(bundle, SlaTarget{0.01}, config, grid);
    CHECK(result.weight == 1.0);
    CHECK(result.unmet);
    CHECK(result.models.size() == 1);
    CHECK(result.models[0].heads[0].unmet);

    CHECK_THROWS_AS(weight_line_search(bundle, SlaTarget{0.05}, config, {}), Error);
    const std::vector<double> bad{2.0, 3.0};
    CHECK_THROWS_AS(weight_line_search(bundle, SlaTarget{0.05}, config, bad), Error);
}

TEST_CASE("multi-step prediction") {
    const auto bundle = constant_bundle();

    SUBCASE("zero-weight network predicts its bias at every step") {
        const auto model = bias_model(bundle, 0.25, 1.0);
        const std::vector<double> window(24, 0.0);
        std::vector<EpochHour> future;
        for (int i = 0; i < 2; ++i) future.push_back(bundle.test.target_hours[0] + i);
        const auto preds = predict_multi_step(model, {window}, 2, future);
        REQUIRE(preds.size() == 2);
        const auto& stats = bundle.schema.f0_stats();
        CHECK(preds[0] == doctest::Approx(0.25 * stats.std + stats.mean));
        CHECK(preds[1] == doctest::Approx(0.25 * stats.std + stats.mean));
    }
    SUBCASE("horizon one equals the single-step prediction") {
        const auto store = generate_scenario(basic_scenario(3, 49));
        const auto real = build_dataset(store, {"A", 1}, SliceKind::Total, ModelKind::MvPeak,
                                        small_fold(), 24, 0.9);
        auto config = fast_config(11);
        config.epochs_max = 3;
        config.patience = 2;
        const auto model = train_single(real, LossSpec::wmae(1.0), config);

        const std::size_t block = real.test.inputs.rows * real.test.inputs.cols;
        std::vector<double> window(real.test.inputs.sample(0),
                                   real.test.inputs.sample(0) + block);
        const std::vector<EpochHour> future{real.test.target_hours[0]};
        const auto rollout = predict_multi_step(model, {window}, 1, future);

        Tensor3 one;
        one.resize(1, real.test.inputs.rows, real.test.inputs.cols);
        std::copy(window.begin(), window.end(), one.v.begin());
        const auto direct = forward(model.net, model.params, {one}, nullptr);
        const auto& stats = real.schema.f0_stats();
        CHECK(rollout[0] == doctest::Approx(direct[0] * stats.std + stats.mean)
                                .epsilon(1e-12));
    }
    SUBCASE("zero horizon is rejected") {
        const auto model = bias_model(bundle, 0.0, 1.0);
        CHECK_THROWS_AS(predict_multi_step(model, {std::vector<double>(24, 0.0)}, 0, {}),
                        Error);
    }
}

TEST_CASE("evaluate computes the SLA metrics from denormalized errors") {
    const auto bundle = constant_bundle();
    const auto& stats = bundle.schema.f0_stats();
    // Constant series: std collapses to 1, targets normalize to 0.
    REQUIRE(stats.std == 1.0);
    const std::vector<int> horizons{1, 2, 4};

    SUBCASE("perfect predictions") {
        const auto model = bias_model(bundle, 0.0, 3.0);
        const auto report = evaluate(model, {bundle}, horizons);
        REQUIRE(report.rows.size() == 3);
        for (const auto& row : report.rows) {
            CHECK(row.sla_loss == 0.0);
            CHECK(row.violation_rate == 0.0);
            CHECK(row.overprov_volume == 0.0);
        }
        CHECK(report.rows[0].count == bundle.test.size());
        CHECK(report.rows[1].count == bundle.test.size() - 1);
    }
    SUBCASE("predictions one unit high") {
        const auto model = bias_model(bundle, 1.0, 5.0);
        const auto report = evaluate(model, {bundle}, horizons);
        for (const auto& row : report.rows) {
            CHECK(row.sla_loss == doctest::Approx(1.0).epsilon(1e-12));
            CHECK(row.violation_rate == 0.0);
            CHECK(row.overprov_volume == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
    SUBCASE("predictions one unit low at w=3") {
        const auto model = bias_model(bundle, -1.0, 3.0);
        const auto report = evaluate(model, {bundle}, horizons);
        for (const auto& row : report.rows) {
            CHECK(row.sla_loss == doctest::Approx(3.0).epsilon(1e-12));
            CHECK(row.violation_rate == 1.0);
            CHECK(row.overprov_volume == 0.0);
        }
    }
    SUBCASE("empty test dataset is rejected") {
        auto fold = small_fold();
        fold.test = {504, 504};
        ScenarioConfig scenario;
        scenario.weeks = 3;
        scenario.seed = 2;
        CellProfile profile;
        profile.base_load = 100.0;
        scenario.cells.push_back({CellId{"A", 1}, {{SliceKind::Total, profile}}});
        const auto store = generate_scenario(scenario);
        const auto no_test = build_dataset(store, {"A", 1}, SliceKind::Total,
                                           ModelKind::Univariate, fold, 24, 0.9);
        const auto model = bias_model(no_test, 0.0, 1.0);
        CHECK_THROWS_AS(evaluate(model, {no_test}, horizons), Error);
    }
}

TEST_CASE("run_experiment aggregates folds by arithmetic mean") {
    const auto store = generate_scenario(basic_scenario(3, 50));

    ExperimentConfig config;
    config.fold = {2, 1, 1};
    config.train = fast_config(12);
    config.train.epochs_max = 3;
    config.train.patience = 2;
    config.arch.kind = ArchKind::SingleCell;
    config.arch.cell = {"A", 1};
    config.model_kinds = {ModelKind::Univariate};
    config.losses = {LossSpec::wmae(1.0), LossSpec::mae()};
    config.sla_targets = {0.05};
    config.weight_grid = {1.0, 2.0};
    config.horizons = {1};

    const auto result = run_experiment(store, config);

    std::vector<const ReportRow*> fold_rows;
    const ReportRow* mean_row = nullptr;
    for (const auto& row : result.rows) {
        if (row.model_kind != "univariate") continue; // calibrated rows only
        if (row.fold == "mean") {
            mean_row = &row;
        } else {
            fold_rows.push_back(&row);
        }
    }
    REQUIRE(fold_rows.size() == 2);
    REQUIRE(mean_row != nullptr);
    CHECK(mean_row->sla_loss ==
          (fold_rows[0]->sla_loss + fold_rows[1]->sla_loss) / 2);
    CHECK(mean_row->violation_rate ==
          (fold_rows[0]->violation_rate + fold_rows[1]->violation_rate) / 2);
    CHECK(mean_row->overprov_volume ==
          (fold_rows[0]->overprov_volume + fold_rows[1]->overprov_volume) / 2);

    CHECK(result.models.size() == 4); // per fold: one calibrated + one baseline
    CHECK(result.model_names.size() == 4);

    const std::string csv = report_csv(result.rows);
    CHECK(csv.find("arch,model_kind,cell,slice,sla_target,horizon,fold,sla_loss,"
                   "violation_rate,overprov_volume,weight_w,flag_unmet") == 0);
    CHECK(csv.find("single_cell,univariate,A1,total") != std::string::npos);
    // Baseline-trained rows carry the loss in the model_kind column and are
    // scored at the calibrated weight.
    CHECK(csv.find("single_cell,univariate@mae,A1,total") != std::string::npos);
}

TEST_CASE("parallel fan-out matches the single-threaded result") {
    const auto store = generate_scenario(basic_scenario(3, 51));

    ExperimentConfig config;
    config.fold = {2, 1, 1};
    config.train = fast_config(13);
    config.train.epochs_max = 2;
    config.train.patience = 1;
    config.arch.kind = ArchKind::SingleCell;
    config.arch.cell = {"A", 1};
    config.model_kinds = {ModelKind::Univariate, ModelKind::MvPeak};
    config.losses = {LossSpec::wmae(1.0)};
    config.sla_targets = {0.05};
    config.weight_grid = {1.0};
    config.horizons = {1};

    const auto serial = run_experiment(store, config);
    config.parallel = 4;
    const auto parallel = run_experiment(store, config);
    CHECK(report_csv(serial.rows) == report_csv(parallel.rows));
}

TEST_CASE("experiment config JSON") {
    const std::string text = R"({
        "fold": {"fold_count": 2, "segment_weeks": 1, "test_weeks": 1},
        "folds": [1],
        "train": {"epochs_max": 4, "patience": 2, "batch": 16, "lr": 0.005,
                  "window": 24, "hidden": 8, "seed": 3},
        "architecture": {"kind": "single_cell", "base_station": "A", "cell_index": 1},
        "model_kinds": ["univariate", "mv_all"],
        "losses": [{"kind": "wmae"}, {"kind": "mae"}],
        "sla_targets": [0.03, 0.05],
        "weight_grid": [1, 2, 4],
        "horizons": [1, 2],
        "correlation_threshold": 0.9,
        "peak_ratio": 0.7
    })";
    const auto config = experiment_from_json(text);
    CHECK(config.fold.fold_count == 2);
    CHECK(config.folds == std::vector<int>{1});
    CHECK(config.train.epochs_max == 4);
    CHECK(config.model_kinds.size() == 2);
    CHECK(config.losses.size() == 2);
    CHECK(config.sla_targets == std::vector<double>{0.03, 0.05});

    // Round-trip through the serializer.
    const auto again = experiment_from_json(experiment_to_json(config));
    CHECK(experiment_to_json(again) == experiment_to_json(config));

    CHECK_THROWS_AS(experiment_from_json(R"({"architecture": {"kind": "single_cell",
        "base_station": "A", "cell_index": 1}, "model_kinds": ["univariate"],
        "unknown_key": 1})"),
                    Error);
    CHECK_THROWS_AS(experiment_from_json("{not json"), Error);
}

TEST_CASE("architecture validation") {
    ArchitectureSpec arch;
    arch.kind = ArchKind::MultiCell;
    arch.cells = {{"A", 1}};
    CHECK_THROWS_AS(arch.validate(), Error);

    arch.kind = ArchKind::MultiSlice;
    arch.cell = {"A", 1};
    arch.slices = {SliceKind::Voice, SliceKind::Voice};
    CHECK_THROWS_AS(arch.validate(), Error);

    arch.slices = {SliceKind::Voice, SliceKind::Data, SliceKind::Fwa};
    arch.head_targets = {SlaTarget{0.03}, SlaTarget{0.05}};
    CHECK_THROWS_AS(arch.validate(), Error); // targets must cover every head

    arch.head_targets = {SlaTarget{0.03}, SlaTarget{0.05}, SlaTarget{0.10}};
    CHECK_NOTHROW(arch.validate());
}

TEST_CASE("train config validation") {
    TrainConfig config = fast_config(1);
    config.patience = config.epochs_max;
    CHECK_THROWS_AS(config.validate(), Error);
    config = fast_config(1);
    config.batch = 0;
    CHECK_THROWS_AS(config.validate(), Error);
    config = fast_config(1);
    config.lr = 0.0;
    CHECK_THROWS_AS(config.validate(), Error);
}

} // TEST_SUITE
