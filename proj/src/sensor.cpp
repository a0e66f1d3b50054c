#include "rspt/sensor.hpp"

namespace rspt {

namespace {

Scalar ray_circle(const Vec2& origin, const Vec2& dir, const Circle& c) {
    const Vec2 oc = origin - c.center;
    const Scalar b = oc.dot(dir);
    const Scalar c0 = oc.squaredNorm() - c.radius * c.radius;
    const Scalar disc = b * b - c0;
    if (disc < 0) return std::numeric_limits<Scalar>::infinity();
    const Scalar sq = std::sqrt(disc);
    const Scalar t0 = -b - sq;
    if (t0 >= 0) return t0;
    const Scalar t1 = -b + sq;
    if (t1 >= 0) return 0;  // origin inside
    return std::numeric_limits<Scalar>::infinity();
}

Scalar ray_rect(const Vec2& origin, const Vec2& dir, const AARect& r) {
    const Vec2 lo = r.center - r.half, hi = r.center + r.half;
    Scalar t_in = -std::numeric_limits<Scalar>::infinity();
    Scalar t_out = std::numeric_limits<Scalar>::infinity();
    for (int ax = 0; ax < 2; ++ax) {
        if (std::abs(dir[ax]) < 1e-15) {
            if (origin[ax] < lo[ax] || origin[ax] > hi[ax])
                return std::numeric_limits<Scalar>::infinity();
            continue;
        }
        Scalar t1 = (lo[ax] - origin[ax]) / dir[ax];
        Scalar t2 = (hi[ax] - origin[ax]) / dir[ax];
        if (t1 > t2) std::swap(t1, t2);
        t_in = std::max(t_in, t1);
        t_out = std::min(t_out, t2);
    }
    if (t_in > t_out || t_out < 0) return std::numeric_limits<Scalar>::infinity();
    return std::max(t_in, Scalar(0));
}

}  // namespace

Scalar ray_hit_distance(const Vec2& origin, const Vec2& dir, const Obstacle& obstacle) {
    if (const auto* c = std::get_if<Circle>(&obstacle.shape)) return ray_circle(origin, dir, *c);
    return ray_rect(origin, dir, std::get<AARect>(obstacle.shape));
}

Scalar ray_exit_distance(const Vec2& origin, const Vec2& dir, const Bounds& bounds) {
    Scalar t = std::numeric_limits<Scalar>::infinity();
    for (int ax = 0; ax < 2; ++ax) {
        if (dir[ax] > 1e-15) {
            t = std::min(t, (bounds.max[ax] - origin[ax]) / dir[ax]);
        } else if (dir[ax] < -1e-15) {
            t = std::min(t, (bounds.min[ax] - origin[ax]) / dir[ax]);
        }
    }
    return std::max(t, Scalar(0));
}

DepthScan cast_scan(const World& world, const Pose2& tracker_pose,
                    const SensorModel& sensor, const AgentState& target) {
    DepthScan scan;
    scan.sensor = sensor;
    scan.ranges.resize(static_cast<size_t>(sensor.ray_count));
    const Vec2 origin = tracker_pose.position();
    const Circle target_body{target.pose.position(), target.radius};
    for (int i = 0; i < sensor.ray_count; ++i) {
        const Scalar b = sensor.bearing(i);
        // Positive bearing is to the tracker's right.
        const Vec2 dir = std::cos(b) * tracker_pose.forward() + std::sin(b) * tracker_pose.right();
        Scalar range = ray_exit_distance(origin, dir, world.bounds);
        for (const auto& o : world.obstacles)
            range = std::min(range, ray_hit_distance(origin, dir, o));
        range = std::min(range, ray_circle(origin, dir, target_body));
        scan.ranges[static_cast<size_t>(i)] = std::min(range, sensor.max_range);
    }
    return scan;
}

bool segment_blocked(const World& world, const Vec2& a, const Vec2& b) {
    const Scalar len = (b - a).norm();
    if (len < 1e-12) {
        for (const auto& o : world.obstacles)
            if (contains(o, a)) return true;
        return false;
    }
    const Vec2 dir = (b - a) / len;
    for (const auto& o : world.obstacles) {
        if (ray_hit_distance(a, dir, o) <= len) return true;
    }
    return false;
}

bool target_visible(const World& world, const Pose2& tracker_pose,
                    const Pose2& target_pose, const SensorModel& sensor) {
    const RelPos rel = to_tracker_frame(target_pose.position(), tracker_pose);
    if (rel.norm() > sensor.max_range) return false;
    if (std::abs(rel.bearing()) > sensor.fov / 2) return false;
    return !segment_blocked(world, tracker_pose.position(), target_pose.position());
}

}  // namespace rspt
