#pragma once

#include "rspt/sensor.hpp"

namespace rspt {

/// Output of the simulated detector standing in for the video tracker.
struct Detection {
    bool found = false;
    int ray_index = 0;   // valid iff found
    Scalar depth = 0;    // valid iff found
};

struct DetectionNoise {
    Scalar miss_rate = 0.05;       // probability of missing a visible target
    Scalar bearing_std_rays = 1.0; // Gaussian bearing noise, in ray spacings
    Scalar depth_std = 0.1;        // Gaussian depth noise, meters

    static DetectionNoise none() { return {0, 0, 0}; }
};

/// Visibility state of the target: current relative position (zeros when not
/// found), last observed position carried in the tracker frame, and the count
/// of consecutive not-found steps.
struct VisState {
    RelPos rel_pos;
    RelPos last_seen;
    int lost_count = 0;
    bool found = false;

    static VisState initial(const RelPos& spawn_relative) {
        VisState v;
        v.last_seen = spawn_relative;
        return v;
    }
};

/// Simulated detector: misses occluded/out-of-fan targets always, visible
/// targets with the configured miss rate; otherwise reports the nearest ray to
/// the (noisy) target bearing and the (noisy) range to the target body.
Detection detect(const World& world, const Pose2& tracker_pose, const AgentState& target,
                 const SensorModel& sensor, const DetectionNoise& noise, RandomStream& rng);

/// Fold one detection into the visibility state. The previous last-seen
/// position is re-expressed in the new tracker frame first.
VisState update_vis_state(const VisState& prev, const Detection& det,
                          const SensorModel& sensor, const TrackerMotion& tracker_motion);

}  // namespace rspt
