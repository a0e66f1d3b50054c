#pragma once

#include <cmath>

#include "rspt/common.hpp"

namespace rspt {

/// Planar pose in the world frame (x east, y north), heading in (-pi, pi]
/// measured counter-clockwise from +x.
struct Pose2 {
    Scalar x = 0;
    Scalar y = 0;
    Scalar heading = 0;

    Pose2() = default;
    Pose2(Scalar x_, Scalar y_, Scalar heading_)
        : x(x_), y(y_), heading(normalize_angle(heading_)) {}

    Vec2 position() const { return {x, y}; }
    Vec2 forward() const { return {std::cos(heading), std::sin(heading)}; }
    Vec2 right() const { return {std::sin(heading), -std::cos(heading)}; }

    bool is_finite() const {
        return std::isfinite(x) && std::isfinite(y) && std::isfinite(heading);
    }

    friend bool operator==(const Pose2&, const Pose2&) = default;
};

/// Position relative to the tracker body: x lateral (positive right),
/// y longitudinal (positive ahead).
struct RelPos {
    Scalar x = 0;
    Scalar y = 0;

    RelPos() = default;
    RelPos(Scalar x_, Scalar y_) : x(x_), y(y_) {}

    Vec2 vec() const { return {x, y}; }
    Scalar norm() const { return std::hypot(x, y); }
    /// Bearing from the forward axis, positive to the right.
    Scalar bearing() const { return std::atan2(x, y); }

    friend bool operator==(const RelPos&, const RelPos&) = default;
};

/// Fan-shaped range sensor: evenly spaced ray bearings on [-fov/2, +fov/2].
struct SensorModel {
    Scalar fov = kPi / 2;
    int ray_count = 90;
    Scalar max_range = 7.5;

    Scalar spacing() const { return fov / static_cast<Scalar>(ray_count - 1); }

    /// Bearing of ray i, positive to the tracker's right.
    Scalar bearing(int ray_index) const {
        return -fov / 2 + spacing() * static_cast<Scalar>(ray_index);
    }

    /// Nearest ray index to a bearing, clamped into range.
    int nearest_ray(Scalar b) const {
        int i = static_cast<int>(std::lround((b + fov / 2) / spacing()));
        return std::clamp(i, 0, ray_count - 1);
    }

    bool valid() const { return ray_count >= 2 && max_range > 0 && fov > 0; }
};

inline RelPos to_tracker_frame(const Vec2& world_pt, const Pose2& tracker) {
    const Vec2 d = world_pt - tracker.position();
    return {d.dot(tracker.right()), d.dot(tracker.forward())};
}

inline Vec2 from_tracker_frame(const RelPos& rel, const Pose2& tracker) {
    return tracker.position() + rel.x * tracker.right() + rel.y * tracker.forward();
}

/// Convert a detection (ray index + depth) into a tracker-relative position.
/// Throws on an out-of-range ray or non-positive depth.
inline RelPos ct_detection_to_relpos(const SensorModel& sensor, int ray_index,
                                     Scalar depth) {
    if (ray_index < 0 || ray_index >= sensor.ray_count)
        throw Error("invalid detection: ray index " + std::to_string(ray_index) +
                    " outside [0, " + std::to_string(sensor.ray_count) + ")");
    if (!(depth > 0) || depth > sensor.max_range)
        throw Error("invalid detection: depth " + std::to_string(depth) +
                    " outside (0, " + std::to_string(sensor.max_range) + "]");
    const Scalar b = sensor.bearing(ray_index);
    return {depth * std::sin(b), depth * std::cos(b)};
}

/// Rigid motion of the tracker between two steps, expressed in the body frame
/// before the motion: translation of the new origin plus heading change.
struct TrackerMotion {
    RelPos translation;
    Scalar rotation = 0;
};

inline TrackerMotion motion_between(const Pose2& before, const Pose2& after) {
    return {to_tracker_frame(after.position(), before),
            normalize_angle(after.heading - before.heading)};
}

/// Re-express a body-frame point after the tracker moves.
inline RelPos reexpress(const RelPos& p, const TrackerMotion& m) {
    const Scalar ux = p.x - m.translation.x;
    const Scalar uy = p.y - m.translation.y;
    const Scalar c = std::cos(m.rotation), s = std::sin(m.rotation);
    return {c * ux + s * uy, -s * ux + c * uy};
}

}  // namespace rspt
