#pragma once

#include <vector>

#include "rspt/agent.hpp"

namespace rspt {

/// One fan of range readings, clamped to the sensor's max range.
struct DepthScan {
    SensorModel sensor;
    std::vector<Scalar> ranges;
};

/// Distance along a ray to the first hit on an obstacle, infinity if none.
Scalar ray_hit_distance(const Vec2& origin, const Vec2& dir, const Obstacle& obstacle);

/// Distance along a ray (from inside) to the bounding walls.
Scalar ray_exit_distance(const Vec2& origin, const Vec2& dir, const Bounds& bounds);

/// Cast the sensor fan from the tracker pose. The target body occludes and is
/// hit like any obstacle. Readings clamp to max_range.
DepthScan cast_scan(const World& world, const Pose2& tracker_pose,
                    const SensorModel& sensor, const AgentState& target);

/// Whether a segment from a to b crosses any obstacle.
bool segment_blocked(const World& world, const Vec2& a, const Vec2& b);

/// Fan membership (range and bearing) plus unoccluded line of sight to the
/// target center.
bool target_visible(const World& world, const Pose2& tracker_pose,
                    const Pose2& target_pose, const SensorModel& sensor = {});

}  // namespace rspt
