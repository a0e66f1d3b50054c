#include "rspt/io/replay.hpp"

#include <fstream>

#include <json.hpp>

namespace rspt {

using nlohmann::json;

namespace {

json mat_to_json(const Mat& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

Mat mat_from_json(const json& j) {
    const auto rows = static_cast<Eigen::Index>(j.size());
    if (rows == 0) return {};
    const auto cols = static_cast<Eigen::Index>(j[0].size());
    Mat m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index c = 0; c < cols; ++c)
            m(i, c) = j[static_cast<size_t>(i)][static_cast<size_t>(c)].get<Scalar>();
    return m;
}

}  // namespace

struct ReplayWriter::Impl {
    std::ofstream out;
};

ReplayWriter::ReplayWriter(const std::string& path, const World& world,
                           const PipelineConfig& pipe)
    : impl_(std::make_unique<Impl>()) {
    impl_->out.open(path);
    if (!impl_->out) throw Error("cannot open replay log " + path + " for writing");
    json header;
    header["type"] = "rspt_replay";
    header["version"] = 1;
    header["world"] = json::parse(world_to_json(world));
    header["history"] = pipe.history;
    header["horizon"] = pipe.horizon;
    header["expected_distance"] = pipe.reward.expected_distance;
    impl_->out << header.dump() << "\n";
}

ReplayWriter::~ReplayWriter() = default;

void ReplayWriter::record(const EpisodeStepInfo& info) {
    json j;
    j["step"] = info.step;
    j["tracker"] = {info.tracker.pose.x, info.tracker.pose.y, info.tracker.pose.heading};
    j["target"] = {info.target.pose.x, info.target.pose.y, info.target.pose.heading};
    j["a0"] = static_cast<int>(info.tracker_action);
    j["a1"] = static_cast<int>(info.target_action);
    j["r0"] = info.reward;
    j["found"] = info.obs.vis.found;
    j["rel"] = {info.obs.vis.rel_pos.x, info.obs.vis.rel_pos.y};
    j["last_seen"] = {info.obs.vis.last_seen.x, info.obs.vis.last_seen.y};
    j["lost_count"] = info.obs.vis.lost_count;
    j["visible"] = info.target_visible;

    const GridSnapshot snap = GridSnapshot::of(info.obs.grid);
    j["grid"] = json(snap.cells);
    j["target_cell"] = {snap.target_row, snap.target_col};

    j["forecast"] = {{"w", mat_to_json(info.obs.forecast.weights)},
                     {"mx", mat_to_json(info.obs.forecast.mean_x)},
                     {"my", mat_to_json(info.obs.forecast.mean_y)},
                     {"sx", mat_to_json(info.obs.forecast.std_x)},
                     {"sy", mat_to_json(info.obs.forecast.std_y)}};
    j["window"] = mat_to_json(info.obs.window.samples);
    json valid = json::array();
    for (Eigen::Index i = 0; i < info.obs.window.valid.size(); ++i)
        valid.push_back(static_cast<bool>(info.obs.window.valid[i]));
    j["window_valid"] = std::move(valid);
    impl_->out << j.dump() << "\n";
}

StepHook ReplayWriter::hook() {
    return [this](const EpisodeStepInfo& info) { record(info); };
}

Replay read_replay(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open replay log " + path);
    std::string line;
    if (!std::getline(in, line)) throw Error(path + ": empty replay log");
    Replay replay;
    {
        json header = json::parse(line);
        if (header.value("type", "") != "rspt_replay")
            throw Error(path + ": not a replay log");
        replay.version = header["version"].get<int>();
        replay.world = world_from_json(header["world"].dump());
        replay.history = header["history"].get<int>();
        replay.horizon = header["horizon"].get<int>();
    }
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error&) {
            replay.truncated = true;
            break;
        }
        ReplayStep s;
        s.step = j["step"].get<int>();
        s.tracker = {j["tracker"][0].get<Scalar>(), j["tracker"][1].get<Scalar>(),
                     j["tracker"][2].get<Scalar>()};
        s.target = {j["target"][0].get<Scalar>(), j["target"][1].get<Scalar>(),
                    j["target"][2].get<Scalar>()};
        s.action_tracker = j["a0"].get<int>();
        s.action_target = j["a1"].get<int>();
        s.reward = j["r0"].get<Scalar>();
        s.found = j["found"].get<bool>();
        s.rel_pos = {j["rel"][0].get<Scalar>(), j["rel"][1].get<Scalar>()};
        s.last_seen = {j["last_seen"][0].get<Scalar>(), j["last_seen"][1].get<Scalar>()};
        s.lost_count = j["lost_count"].get<int>();
        s.visible = j["visible"].get<bool>();
        s.grid.cells = j["grid"].get<std::vector<uint8_t>>();
        s.grid.target_row = static_cast<int16_t>(j["target_cell"][0].get<int>());
        s.grid.target_col = static_cast<int16_t>(j["target_cell"][1].get<int>());
        s.forecast.weights = mat_from_json(j["forecast"]["w"]);
        s.forecast.mean_x = mat_from_json(j["forecast"]["mx"]);
        s.forecast.mean_y = mat_from_json(j["forecast"]["my"]);
        s.forecast.std_x = mat_from_json(j["forecast"]["sx"]);
        s.forecast.std_y = mat_from_json(j["forecast"]["sy"]);
        s.window_samples = mat_from_json(j["window"]);
        const auto& valid = j["window_valid"];
        s.window_valid.resize(static_cast<Eigen::Index>(valid.size()));
        for (size_t i = 0; i < valid.size(); ++i)
            s.window_valid[static_cast<Eigen::Index>(i)] = valid[i].get<bool>();
        replay.steps.push_back(std::move(s));
    }
    return replay;
}

}  // namespace rspt
