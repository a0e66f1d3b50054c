#include "rspt/perception.hpp"

namespace rspt {

Detection detect(const World& world, const Pose2& tracker_pose, const AgentState& target,
                 const SensorModel& sensor, const DetectionNoise& noise, RandomStream& rng) {
    if (!target_visible(world, tracker_pose, target.pose, sensor)) return {};
    if (noise.miss_rate > 0 && rng.uniform() < noise.miss_rate) return {};

    const RelPos rel = to_tracker_frame(target.pose.position(), tracker_pose);
    Scalar bearing = rel.bearing();
    if (noise.bearing_std_rays > 0)
        bearing += rng.normal(0, noise.bearing_std_rays * sensor.spacing());

    Scalar depth = std::max(rel.norm() - target.radius, Scalar(1e-3));
    if (noise.depth_std > 0) depth += rng.normal(0, noise.depth_std);
    depth = std::clamp(depth, Scalar(1e-3), sensor.max_range);

    Detection det;
    det.found = true;
    det.ray_index = sensor.nearest_ray(bearing);
    det.depth = depth;
    return det;
}

VisState update_vis_state(const VisState& prev, const Detection& det,
                          const SensorModel& sensor, const TrackerMotion& tracker_motion) {
    VisState next;
    if (det.found) {
        next.found = true;
        next.lost_count = 0;
        next.rel_pos = ct_detection_to_relpos(sensor, det.ray_index, det.depth);
        next.last_seen = next.rel_pos;
    } else {
        next.found = false;
        next.lost_count = prev.lost_count + 1;
        next.rel_pos = {0, 0};
        next.last_seen = reexpress(prev.last_seen, tracker_motion);
    }
    return next;
}

}  // namespace rspt
