#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "rspt/geometry.hpp"

namespace rspt {

struct Circle {
    Vec2 center;
    Scalar radius = 0;
};

/// Axis-aligned rectangle given by center and half extents.
struct AARect {
    Vec2 center;
    Vec2 half;
};

struct Obstacle {
    std::variant<Circle, AARect> shape;
};

/// Signed distance: negative inside, zero on the boundary.
inline Scalar signed_distance(const Vec2& p, const Circle& c) {
    return (p - c.center).norm() - c.radius;
}

inline Scalar signed_distance(const Vec2& p, const AARect& r) {
    const Scalar dx = std::abs(p.x() - r.center.x()) - r.half.x();
    const Scalar dy = std::abs(p.y() - r.center.y()) - r.half.y();
    if (dx > 0 || dy > 0)
        return std::hypot(std::max(dx, Scalar(0)), std::max(dy, Scalar(0)));
    return std::max(dx, dy);
}

inline Scalar signed_distance(const Vec2& p, const Obstacle& o) {
    return std::visit([&](const auto& s) { return signed_distance(p, s); }, o.shape);
}

inline bool contains(const Obstacle& o, const Vec2& p) {
    return signed_distance(p, o) < 0;
}

inline Scalar area(const Obstacle& o) {
    if (const auto* c = std::get_if<Circle>(&o.shape)) return kPi * c->radius * c->radius;
    const auto& r = std::get<AARect>(o.shape);
    return 4 * r.half.x() * r.half.y();
}

struct Bounds {
    Vec2 min{-10, -10};
    Vec2 max{10, 10};

    Vec2 extent() const { return max - min; }
    Scalar area() const { return extent().x() * extent().y(); }
    bool contains(const Vec2& p, Scalar margin = 0) const {
        return p.x() >= min.x() + margin && p.x() <= max.x() - margin &&
               p.y() >= min.y() + margin && p.y() <= max.y() - margin;
    }
    /// Distance from an interior point to the nearest wall.
    Scalar wall_clearance(const Vec2& p) const {
        return std::min(std::min(p.x() - min.x(), max.x() - p.x()),
                        std::min(p.y() - min.y(), max.y() - p.y()));
    }
};

struct World {
    Bounds bounds;
    std::vector<Obstacle> obstacles;
    uint64_t seed = 0;
    Pose2 tracker_spawn;
    Pose2 target_spawn;

    /// Clearance from a point to the nearest obstacle or wall.
    Scalar clearance(const Vec2& p) const {
        Scalar d = bounds.wall_clearance(p);
        for (const auto& o : obstacles) d = std::min(d, signed_distance(p, o));
        return d;
    }
};

struct GenerationConfig {
    Vec2 extent{20, 20};        // bounds size, centered on the origin
    int obstacle_count = 8;
    Scalar rect_fraction = 0.5; // remaining obstacles are circles
    Scalar min_size = 0.3;      // circle radius / rect half extent
    Scalar max_size = 1.2;
    Scalar agent_radius = 0.2;  // clearance used for connectivity and spawning
    Scalar spawn_distance = 2.5;
    Scalar spawn_margin = 0.1;
    int max_attempts = 64;

    friend bool operator==(const GenerationConfig&, const GenerationConfig&) = default;
};

/// Generate a random world. Deterministic in (config, seed). Free space is
/// connected at a 0.25 m rasterization and the target spawns inside the
/// tracker's visibility fan. Throws GenerationError after max_attempts.
World generate_world(const GenerationConfig& config, uint64_t seed);

/// Whether free space (clearance >= radius) is connected on a grid of the
/// given resolution. Exposed for reuse by generation and tools.
bool free_space_connected(const World& world, Scalar radius, Scalar resolution);

std::string world_to_json(const World& world);
World world_from_json(const std::string& text);
void save_world(const World& world, const std::string& path);
World load_world(const std::string& path);

}  // namespace rspt
