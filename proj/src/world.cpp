#include "rspt/world.hpp"

#include <fstream>
#include <queue>

#include <json.hpp>

#include "rspt/sensor.hpp"

namespace rspt {

bool free_space_connected(const World& world, Scalar radius, Scalar resolution) {
    const Vec2 ext = world.bounds.extent();
    const int nx = std::max(1, static_cast<int>(std::ceil(ext.x() / resolution)));
    const int ny = std::max(1, static_cast<int>(std::ceil(ext.y() / resolution)));
    std::vector<uint8_t> free(static_cast<size_t>(nx) * ny, 0);
    auto at = [&](int i, int j) -> uint8_t& { return free[static_cast<size_t>(j) * nx + i]; };

    int total_free = 0;
    int si = -1, sj = -1;
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            const Vec2 p = world.bounds.min +
                           Vec2((i + Scalar(0.5)) * resolution, (j + Scalar(0.5)) * resolution);
            if (world.bounds.contains(p) && world.clearance(p) >= radius) {
                at(i, j) = 1;
                ++total_free;
                if (si < 0) { si = i; sj = j; }
            }
        }
    }
    if (total_free == 0) return false;

    std::vector<uint8_t> seen(free.size(), 0);
    std::queue<std::pair<int, int>> q;
    q.push({si, sj});
    seen[static_cast<size_t>(sj) * nx + si] = 1;
    int reached = 0;
    const int dx[4] = {1, -1, 0, 0};
    const int dy[4] = {0, 0, 1, -1};
    while (!q.empty()) {
        auto [i, j] = q.front();
        q.pop();
        ++reached;
        for (int k = 0; k < 4; ++k) {
            const int ni = i + dx[k], nj = j + dy[k];
            if (ni < 0 || nj < 0 || ni >= nx || nj >= ny) continue;
            const size_t idx = static_cast<size_t>(nj) * nx + ni;
            if (free[idx] && !seen[idx]) {
                seen[idx] = 1;
                q.push({ni, nj});
            }
        }
    }
    return reached == total_free;
}

namespace {

std::vector<Obstacle> sample_obstacles(const GenerationConfig& cfg, const Bounds& bounds,
                                       RandomStream& rng) {
    std::vector<Obstacle> obstacles;
    obstacles.reserve(static_cast<size_t>(cfg.obstacle_count));
    for (int i = 0; i < cfg.obstacle_count; ++i) {
        const bool rect = rng.uniform() < cfg.rect_fraction;
        if (rect) {
            const Scalar hx = rng.uniform(cfg.min_size, cfg.max_size);
            const Scalar hy = rng.uniform(cfg.min_size, cfg.max_size);
            const Vec2 c{rng.uniform(bounds.min.x() + hx, bounds.max.x() - hx),
                         rng.uniform(bounds.min.y() + hy, bounds.max.y() - hy)};
            obstacles.push_back({AARect{c, {hx, hy}}});
        } else {
            const Scalar r = rng.uniform(cfg.min_size, cfg.max_size);
            const Vec2 c{rng.uniform(bounds.min.x() + r, bounds.max.x() - r),
                         rng.uniform(bounds.min.y() + r, bounds.max.y() - r)};
            obstacles.push_back({Circle{c, r}});
        }
    }
    return obstacles;
}

bool sample_spawns(World& world, const GenerationConfig& cfg, RandomStream& rng) {
    const SensorModel sensor;
    const Scalar margin = cfg.agent_radius + cfg.spawn_margin;
    const Scalar d_lo = std::max(Scalar(1.0), cfg.spawn_distance * Scalar(0.6));
    const Scalar d_hi = std::min(cfg.spawn_distance * Scalar(1.6), sensor.max_range - Scalar(0.5));
    for (int attempt = 0; attempt < 256; ++attempt) {
        const Pose2 tracker{rng.uniform(world.bounds.min.x() + margin, world.bounds.max.x() - margin),
                            rng.uniform(world.bounds.min.y() + margin, world.bounds.max.y() - margin),
                            rng.uniform(-kPi, kPi)};
        if (world.clearance(tracker.position()) < margin) continue;
        const Scalar bearing = rng.uniform(-(sensor.fov / 2 - Scalar(0.15)),
                                           sensor.fov / 2 - Scalar(0.15));
        const Scalar dist = rng.uniform(d_lo, std::max(d_lo, d_hi));
        const Vec2 tpos = from_tracker_frame({dist * std::sin(bearing), dist * std::cos(bearing)},
                                             tracker);
        const Pose2 target{tpos.x(), tpos.y(), rng.uniform(-kPi, kPi)};
        if (!world.bounds.contains(tpos, margin)) continue;
        if (world.clearance(tpos) < margin) continue;
        if (!target_visible(world, tracker, target, sensor)) continue;
        world.tracker_spawn = tracker;
        world.target_spawn = target;
        return true;
    }
    return false;
}

}  // namespace

World generate_world(const GenerationConfig& cfg, uint64_t seed) {
    if (cfg.obstacle_count < 0) throw GenerationError("negative obstacle count");
    if (cfg.min_size <= 0 || cfg.max_size < cfg.min_size)
        throw GenerationError("invalid obstacle size range");

    Bounds bounds{-cfg.extent / 2, cfg.extent / 2};
    for (int attempt = 0; attempt < cfg.max_attempts; ++attempt) {
        RandomStream rng(derive_seed(seed, static_cast<uint64_t>(attempt)));
        World world;
        world.bounds = bounds;
        world.seed = seed;
        world.obstacles = sample_obstacles(cfg, bounds, rng);

        Scalar total_area = 0;
        for (const auto& o : world.obstacles) total_area += area(o);
        if (total_area > Scalar(0.4) * bounds.area()) continue;

        if (!free_space_connected(world, cfg.agent_radius, Scalar(0.25))) continue;
        if (!sample_spawns(world, cfg, rng)) continue;
        return world;
    }
    throw GenerationError("world generation failed after " +
                          std::to_string(cfg.max_attempts) + " attempts");
}

std::string world_to_json(const World& world) {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["seed"] = world.seed;
    j["bounds"] = {{"min", {world.bounds.min.x(), world.bounds.min.y()}},
                   {"max", {world.bounds.max.x(), world.bounds.max.y()}}};
    nlohmann::json obs = nlohmann::json::array();
    for (const auto& o : world.obstacles) {
        if (const auto* c = std::get_if<Circle>(&o.shape)) {
            obs.push_back({{"type", "circle"},
                           {"center", {c->center.x(), c->center.y()}},
                           {"radius", c->radius}});
        } else {
            const auto& r = std::get<AARect>(o.shape);
            obs.push_back({{"type", "rect"},
                           {"center", {r.center.x(), r.center.y()}},
                           {"half", {r.half.x(), r.half.y()}}});
        }
    }
    j["obstacles"] = std::move(obs);
    j["tracker_spawn"] = {world.tracker_spawn.x, world.tracker_spawn.y, world.tracker_spawn.heading};
    j["target_spawn"] = {world.target_spawn.x, world.target_spawn.y, world.target_spawn.heading};
    return j.dump(2);
}

World world_from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    if (!j.contains("schema_version") || j["schema_version"].get<int>() != 1)
        throw Error("unsupported world schema version");
    World world;
    world.seed = j["seed"].get<uint64_t>();
    world.bounds.min = {j["bounds"]["min"][0].get<Scalar>(), j["bounds"]["min"][1].get<Scalar>()};
    world.bounds.max = {j["bounds"]["max"][0].get<Scalar>(), j["bounds"]["max"][1].get<Scalar>()};
    for (const auto& o : j["obstacles"]) {
        const std::string type = o["type"].get<std::string>();
        if (type == "circle") {
            world.obstacles.push_back(
                {Circle{{o["center"][0].get<Scalar>(), o["center"][1].get<Scalar>()},
                        o["radius"].get<Scalar>()}});
        } else if (type == "rect") {
            world.obstacles.push_back(
                {AARect{{o["center"][0].get<Scalar>(), o["center"][1].get<Scalar>()},
                        {o["half"][0].get<Scalar>(), o["half"][1].get<Scalar>()}}});
        } else {
            throw Error("unknown obstacle type: " + type);
        }
    }
    auto pose = [](const nlohmann::json& a) {
        return Pose2{a[0].get<Scalar>(), a[1].get<Scalar>(), a[2].get<Scalar>()};
    };
    world.tracker_spawn = pose(j["tracker_spawn"]);
    world.target_spawn = pose(j["target_spawn"]);
    return world;
}

void save_world(const World& world, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open " + path + " for writing");
    out << world_to_json(world) << "\n";
}

World load_world(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return world_from_json(text);
}

}  // namespace rspt
