#include "slafc/checkpoint.hpp"

#include <fstream>

#include "json_util.hpp"

namespace slafc {

namespace {

constexpr const char* kFormatName = "slafc-checkpoint";

Json channels_to_json(const FeatureSet& channels) {
    Json out = Json::array();
    for (const auto& c : channels) {
        switch (c.kind) {
        case ChannelRef::Kind::Ran:
            out.push_back(Json{{"kind", "ran"}, {"label", c.label.name()}});
            break;
        case ChannelRef::Kind::PeakHourFlag:
            out.push_back(Json{{"kind", "peak_hour"}});
            break;
        case ChannelRef::Kind::DayOfWeekFlag:
            out.push_back(Json{{"kind", "day_of_week"}});
            break;
        case ChannelRef::Kind::McIn:
            out.push_back(Json{{"kind", "mc_in"}});
            break;
        case ChannelRef::Kind::McOut:
            out.push_back(Json{{"kind", "mc_out"}});
            break;
        }
    }
    return out;
}

FeatureSet channels_from_json(const Json& j) {
    FeatureSet channels;
    for (const auto& jc : j) {
        const std::string kind = jc.at("kind").get<std::string>();
        if (kind == "ran") {
            const auto label = FeatureLabel::parse(jc.at("label").get<std::string>());
            if (!label) fail(Errc::CheckpointMismatch, "bad channel label");
            channels.push_back({ChannelRef::Kind::Ran, *label});
        } else if (kind == "peak_hour") {
            channels.push_back({ChannelRef::Kind::PeakHourFlag, {}});
        } else if (kind == "day_of_week") {
            channels.push_back({ChannelRef::Kind::DayOfWeekFlag, {}});
        } else if (kind == "mc_in") {
            channels.push_back({ChannelRef::Kind::McIn, {}});
        } else if (kind == "mc_out") {
            channels.push_back({ChannelRef::Kind::McOut, {}});
        } else {
            fail(Errc::CheckpointMismatch, "unknown channel kind '" + kind + "'");
        }
    }
    return channels;
}

Json group_to_json(const GroupSchema& schema) {
    Json stats = Json::array();
    for (const auto& s : schema.stats) {
        stats.push_back(Json{{"mean", s.mean}, {"std", s.std}, {"normalized", s.normalized}});
    }
    Json selected = Json::array();
    for (const auto& label : schema.selected) selected.push_back(label.name());
    Json j{{"base_station", schema.cell.base_station},
           {"cell_index", schema.cell.cell_index},
           {"slice", std::string(slice_name(schema.slice))},
           {"model_kind", std::string(model_kind_name(schema.kind))},
           {"channels", channels_to_json(schema.channels)},
           {"stats", stats},
           {"selected", selected},
           {"has_peak", schema.has_peak}};
    if (schema.has_peak) {
        Json peak = Json::array();
        for (bool b : schema.peak) peak.push_back(b ? 1 : 0);
        j["peak"] = peak;
    }
    return j;
}

GroupSchema group_from_json(const Json& j) {
    GroupSchema schema;
    schema.cell = {j.at("base_station").get<std::string>(), j.at("cell_index").get<int>()};
    const auto slice = parse_slice(j.at("slice").get<std::string>());
    if (!slice) fail(Errc::CheckpointMismatch, "bad slice in checkpoint");
    schema.slice = *slice;
    const auto kind = parse_model_kind(j.at("model_kind").get<std::string>());
    if (!kind) fail(Errc::CheckpointMismatch, "bad model kind in checkpoint");
    schema.kind = *kind;
    schema.channels = channels_from_json(j.at("channels"));
    for (const auto& js : j.at("stats")) {
        schema.stats.push_back({js.at("mean").get<double>(), js.at("std").get<double>(),
                                js.at("normalized").get<bool>()});
    }
    for (const auto& jl : j.at("selected")) {
        const auto label = FeatureLabel::parse(jl.get<std::string>());
        if (!label) fail(Errc::CheckpointMismatch, "bad selected label");
        schema.selected.push_back(*label);
    }
    schema.has_peak = j.at("has_peak").get<bool>();
    if (schema.has_peak) {
        const auto& peak = j.at("peak");
        if (peak.size() != 24) fail(Errc::CheckpointMismatch, "peak table must have 24 entries");
        for (int h = 0; h < 24; ++h) schema.peak[h] = peak.at(h).get<int>() != 0;
    }
    if (schema.stats.size() != schema.channels.size()) {
        fail(Errc::CheckpointMismatch, "stats/channels size mismatch");
    }
    return schema;
}

Json range_to_json(const IndexRange& r) { return Json{{"begin", r.begin}, {"end", r.end}}; }

IndexRange range_from_json(const Json& j) {
    return {j.at("begin").get<std::int64_t>(), j.at("end").get<std::int64_t>()};
}

} // namespace

std::string checkpoint_to_json(const TrainedModel& model) {
    Json lstm = Json::array();
    for (const auto& layer : model.params.lstm) {
        lstm.push_back(Json{{"wx_i", layer.wx[kGateInput]},
                            {"wx_f", layer.wx[kGateForget]},
                            {"wx_g", layer.wx[kGateCell]},
                            {"wx_o", layer.wx[kGateOutput]},
                            {"wh_i", layer.wh[kGateInput]},
                            {"wh_f", layer.wh[kGateForget]},
                            {"wh_g", layer.wh[kGateCell]},
                            {"wh_o", layer.wh[kGateOutput]},
                            {"b_i", layer.b[kGateInput]},
                            {"b_f", layer.b[kGateForget]},
                            {"b_g", layer.b[kGateCell]},
                            {"b_o", layer.b[kGateOutput]}});
    }
    Json heads = Json::array();
    for (const auto& head : model.params.head) {
        heads.push_back(Json{{"w", head.w}, {"b", head.b}});
    }
    Json calibrations = Json::array();
    for (const auto& h : model.heads) {
        calibrations.push_back(
            Json{{"weight", h.weight}, {"target_rate", h.target_rate}, {"unmet", h.unmet}});
    }
    Json groups = Json::array();
    for (const auto& g : model.groups) groups.push_back(group_to_json(g));

    Json train_loss{{"kind", std::string(loss_kind_name(model.trained_loss.kind))},
                    {"weight", model.trained_loss.weight},
                    {"delta", model.trained_loss.delta}};

    const Json j{
        {"format", kFormatName},
        {"version", kCheckpointVersion},
        {"toolkit_version", kToolkitVersion},
        {"net",
         Json{{"group_channels", model.net.group_channels},
              {"hidden", model.net.hidden},
              {"window", model.net.window},
              {"seed", model.net.seed}}},
        {"arch", std::string(arch_kind_name(model.arch))},
        {"model_kind", std::string(model_kind_name(model.model_kind))},
        {"groups", groups},
        {"heads", calibrations},
        {"trained_loss", train_loss},
        {"fold",
         Json{{"fold_count", model.fold_spec.fold_count},
              {"segment_weeks", model.fold_spec.segment_weeks},
              {"test_weeks", model.fold_spec.test_weeks},
              {"index", model.fold_index},
              {"train", [&] {
                   Json ranges = Json::array();
                   for (const auto& r : model.fold.train) ranges.push_back(range_to_json(r));
                   return ranges;
               }()},
              {"validation", range_to_json(model.fold.validation)},
              {"test", range_to_json(model.fold.test)}}},
        {"params", Json{{"lstm", lstm}, {"heads", heads}}},
    };
    return j.dump() + "\n";
}

TrainedModel checkpoint_from_json(const std::string& text) {
    Json j = Json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        fail(Errc::CheckpointMismatch, "checkpoint is not valid JSON");
    }
    try {
        if (j.at("format").get<std::string>() != kFormatName) {
            fail(Errc::CheckpointMismatch, "unrecognized checkpoint format");
        }
        if (j.at("version").get<int>() != kCheckpointVersion) {
            fail(Errc::CheckpointMismatch, "unsupported checkpoint version");
        }

        TrainedModel model;
        const Json& jn = j.at("net");
        model.net.group_channels = jn.at("group_channels").get<std::vector<int>>();
        model.net.hidden = jn.at("hidden").get<int>();
        model.net.window = jn.at("window").get<int>();
        model.net.seed = jn.at("seed").get<std::uint64_t>();
        model.net.validate();

        const auto arch = parse_arch_kind(j.at("arch").get<std::string>());
        if (!arch) fail(Errc::CheckpointMismatch, "bad architecture kind");
        model.arch = *arch;
        const auto kind = parse_model_kind(j.at("model_kind").get<std::string>());
        if (!kind) fail(Errc::CheckpointMismatch, "bad model kind");
        model.model_kind = *kind;

        for (const auto& jg : j.at("groups")) model.groups.push_back(group_from_json(jg));
        for (const auto& jh : j.at("heads")) {
            model.heads.push_back({jh.at("weight").get<double>(),
                                   jh.at("target_rate").get<double>(),
                                   jh.at("unmet").get<bool>()});
        }

        const Json& jl = j.at("trained_loss");
        const auto loss_kind = parse_loss_kind(jl.at("kind").get<std::string>());
        if (!loss_kind) fail(Errc::CheckpointMismatch, "bad loss kind");
        model.trained_loss.kind = *loss_kind;
        model.trained_loss.weight = jl.at("weight").get<double>();
        model.trained_loss.delta = jl.at("delta").get<double>();

        const Json& jf = j.at("fold");
        model.fold_spec.fold_count = jf.at("fold_count").get<int>();
        model.fold_spec.segment_weeks = jf.at("segment_weeks").get<int>();
        model.fold_spec.test_weeks = jf.at("test_weeks").get<int>();
        model.fold_index = jf.at("index").get<int>();
        for (const auto& jr : jf.at("train")) model.fold.train.push_back(range_from_json(jr));
        model.fold.validation = range_from_json(jf.at("validation"));
        model.fold.test = range_from_json(jf.at("test"));

        const Json& jp = j.at("params");
        for (const auto& jlayer : jp.at("lstm")) {
            LstmParams layer;
            layer.wx[kGateInput] = jlayer.at("wx_i").get<std::vector<double>>();
            layer.wx[kGateForget] = jlayer.at("wx_f").get<std::vector<double>>();
            layer.wx[kGateCell] = jlayer.at("wx_g").get<std::vector<double>>();
            layer.wx[kGateOutput] = jlayer.at("wx_o").get<std::vector<double>>();
            layer.wh[kGateInput] = jlayer.at("wh_i").get<std::vector<double>>();
            layer.wh[kGateForget] = jlayer.at("wh_f").get<std::vector<double>>();
            layer.wh[kGateCell] = jlayer.at("wh_g").get<std::vector<double>>();
            layer.wh[kGateOutput] = jlayer.at("wh_o").get<std::vector<double>>();
            layer.b[kGateInput] = jlayer.at("b_i").get<std::vector<double>>();
            layer.b[kGateForget] = jlayer.at("b_f").get<std::vector<double>>();
            layer.b[kGateCell] = jlayer.at("b_g").get<std::vector<double>>();
            layer.b[kGateOutput] = jlayer.at("b_o").get<std::vector<double>>();
            model.params.lstm.push_back(std::move(layer));
        }
        for (const auto& jh : jp.at("heads")) {
            model.params.head.push_back(
                {jh.at("w").get<std::vector<double>>(), jh.at("b").get<double>()});
        }

        // Shape cross-checks.
        const std::size_t groups = model.net.group_channels.size();
        if (model.params.lstm.size() != groups || model.groups.size() != groups ||
            model.heads.size() != groups || model.params.head.size() != groups) {
            fail(Errc::CheckpointMismatch, "checkpoint shape mismatch");
        }
        const std::size_t h = static_cast<std::size_t>(model.net.hidden);
        for (std::size_t g = 0; g < groups; ++g) {
            const auto c = static_cast<std::size_t>(model.net.group_channels[g]);
            const auto& layer = model.params.lstm[g];
            for (int gate = 0; gate < kGateCount; ++gate) {
                if (layer.wx[gate].size() != c * h || layer.wh[gate].size() != h * h ||
                    layer.b[gate].size() != h) {
                    fail(Errc::CheckpointMismatch, "LSTM parameter shape mismatch");
                }
            }
            if (model.params.head[g].w.size() != groups * h) {
                fail(Errc::CheckpointMismatch, "head parameter shape mismatch");
            }
            if (model.groups[g].channel_count() != c) {
                fail(Errc::CheckpointMismatch, "schema channel count mismatch");
            }
        }
        return model;
    } catch (const Json::exception& e) {
        fail(Errc::CheckpointMismatch, std::string("malformed checkpoint: ") + e.what());
    }
}

void save_checkpoint(const TrainedModel& model, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) fail(Errc::IoError, "cannot write " + path.string());
    out << checkpoint_to_json(model);
    if (!out) fail(Errc::IoError, "write failure on " + path.string());
}

TrainedModel load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(Errc::IoError, "cannot open " + path.string());
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return checkpoint_from_json(text);
}

} // namespace slafc
