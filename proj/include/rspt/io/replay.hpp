#pragma once

#include <string>

#include "rspt/evalharness.hpp"

namespace rspt {

/// Line-delimited episode replay: a header line (version, world, sensor and
/// reward settings) followed by one record per step with poses, actions,
/// rewards, the detection state, the forecast and the ego-grid snapshot.
class ReplayWriter {
public:
    ReplayWriter(const std::string& path, const World& world, const PipelineConfig& pipe);
    ~ReplayWriter();

    ReplayWriter(const ReplayWriter&) = delete;
    ReplayWriter& operator=(const ReplayWriter&) = delete;

    void record(const EpisodeStepInfo& info);
    StepHook hook();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

struct ReplayStep {
    int step = 0;
    Pose2 tracker, target;
    int action_tracker = 0, action_target = 0;
    Scalar reward = 0;
    bool found = false;
    RelPos rel_pos, last_seen;
    int lost_count = 0;
    bool visible = false;
    GridSnapshot grid;
    MixtureForecast forecast;
    Mat window_samples;
    Eigen::Array<bool, Eigen::Dynamic, 1> window_valid;
};

struct Replay {
    int version = 1;
    World world;
    int history = 10, horizon = 5;
    std::vector<ReplayStep> steps;
    bool truncated = false;  // a trailing partial line was dropped
};

Replay read_replay(const std::string& path);

}  // namespace rspt
