#include "rspt/mapping.hpp"

namespace rspt {

OccupancyField OccupancyField::for_bounds(const Bounds& bounds) {
    OccupancyField f;
    f.origin = bounds.min;
    f.cols = std::max(1, static_cast<int>(std::ceil(bounds.extent().x() / kResolution)));
    f.rows = std::max(1, static_cast<int>(std::ceil(bounds.extent().y() / kResolution)));
    f.log_odds = Eigen::ArrayXXd::Zero(f.rows, f.cols);
    f.visited = Eigen::Array<uint8_t, Eigen::Dynamic, Eigen::Dynamic>::Zero(f.rows, f.cols);
    f.free_stamp = Eigen::ArrayXXi::Constant(f.rows, f.cols, -1);
    f.hit_stamp = Eigen::ArrayXXi::Constant(f.rows, f.cols, -1);
    return f;
}

namespace {

/// Visit the cells a segment passes through, in order (Amanatides & Woo).
template <typename Fn>
void walk_cells(const OccupancyField& field, const Vec2& start, const Vec2& dir,
                Scalar length, Fn&& visit) {
    constexpr Scalar res = OccupancyField::kResolution;
    int col = static_cast<int>(std::floor((start.x() - field.origin.x()) / res));
    int row = static_cast<int>(std::floor((start.y() - field.origin.y()) / res));

    const int step_col = dir.x() > 0 ? 1 : -1;
    const int step_row = dir.y() > 0 ? 1 : -1;
    auto boundary_t = [&](Scalar coord, Scalar o, int cell, int step) {
        const Scalar edge = o + (cell + (step > 0 ? 1 : 0)) * res;
        return (edge - coord);
    };
    Scalar t_max_x = std::abs(dir.x()) < 1e-15
                         ? std::numeric_limits<Scalar>::infinity()
                         : boundary_t(start.x(), field.origin.x(), col, step_col) / dir.x();
    Scalar t_max_y = std::abs(dir.y()) < 1e-15
                         ? std::numeric_limits<Scalar>::infinity()
                         : boundary_t(start.y(), field.origin.y(), row, step_row) / dir.y();
    const Scalar t_delta_x =
        std::abs(dir.x()) < 1e-15 ? std::numeric_limits<Scalar>::infinity() : res / std::abs(dir.x());
    const Scalar t_delta_y =
        std::abs(dir.y()) < 1e-15 ? std::numeric_limits<Scalar>::infinity() : res / std::abs(dir.y());

    Scalar t = 0;
    // Bounded iteration: a segment of length L crosses at most ~2L/res + 2 cells.
    const int max_cells = static_cast<int>(length / res) * 2 + 4;
    for (int n = 0; n < max_cells && t <= length; ++n) {
        visit(row, col);
        if (t_max_x < t_max_y) {
            t = t_max_x;
            t_max_x += t_delta_x;
            col += step_col;
        } else {
            t = t_max_y;
            t_max_y += t_delta_y;
            row += step_row;
        }
    }
}

}  // namespace

void integrate_scan(OccupancyField& field, const DepthScan& scan, const Pose2& pose_estimate) {
    const int stamp = field.scan_counter++;
    const Vec2 origin = pose_estimate.position();
    const Vec2 fwd = pose_estimate.forward();
    const Vec2 right = pose_estimate.right();
    const Scalar no_hit_threshold = scan.sensor.max_range - Scalar(1e-9);

    struct Ray {
        Vec2 dir;
        Scalar range;
        bool hit;
    };
    std::vector<Ray> rays(scan.ranges.size());
    for (size_t i = 0; i < scan.ranges.size(); ++i) {
        const Scalar b = scan.sensor.bearing(static_cast<int>(i));
        rays[i].dir = std::cos(b) * fwd + std::sin(b) * right;
        rays[i].range = scan.ranges[i];
        rays[i].hit = scan.ranges[i] < no_hit_threshold;
    }

    // Hits first so occupied evidence wins over free within one scan.
    for (const auto& ray : rays) {
        if (!ray.hit) continue;
        const Vec2 end = origin + ray.range * ray.dir;
        if (auto cell = field.cell_of(end)) {
            auto& st = field.hit_stamp((*cell)[0], (*cell)[1]);
            if (st != stamp) {
                st = stamp;
                auto& l = field.log_odds((*cell)[0], (*cell)[1]);
                l = std::min(l + OccupancyField::kHitIncrement, OccupancyField::kLogOddsMax);
                field.visited((*cell)[0], (*cell)[1]) = 1;
            }
        }
    }
    for (const auto& ray : rays) {
        // Stop the free-space segment just short of a hit cell.
        const Scalar free_len = ray.hit ? std::max(ray.range - Scalar(1e-9), Scalar(0)) : ray.range;
        walk_cells(field, origin, ray.dir, free_len, [&](int row, int col) {
            if (!field.in_field(row, col)) return;
            if (field.hit_stamp(row, col) == stamp) return;
            auto& st = field.free_stamp(row, col);
            if (st == stamp) return;
            st = stamp;
            auto& l = field.log_odds(row, col);
            l = std::max(l - OccupancyField::kFreeDecrement, OccupancyField::kLogOddsMin);
            field.visited(row, col) = 1;
        });
    }
}

EgoGrid extract_ego_grid(const OccupancyField& field, const Pose2& pose_estimate) {
    EgoGrid grid;
    for (int row = 0; row < EgoGrid::kSize; ++row) {
        for (int col = 0; col < EgoGrid::kSize; ++col) {
            const Vec2 world_pt = from_tracker_frame(EgoGrid::rel_of_cell(row, col), pose_estimate);
            const auto cell = field.cell_of(world_pt);
            if (!cell || !field.visited((*cell)[0], (*cell)[1])) continue;
            grid.explored(row, col) = 1;
            grid.prob(row, col) = field.probability((*cell)[0], (*cell)[1]);
        }
    }
    const int c = EgoGrid::center_index();
    grid.prob(c, c) = std::min(grid.prob(c, c), Scalar(0.5));
    return grid;
}

void mark_target(EgoGrid& grid, const VisState& vis) {
    if (!vis.found) return;
    if (auto cell = EgoGrid::cell_of(vis.rel_pos)) grid.target_cell = *cell;
}

Eigen::RowVectorXd grid_to_input(const EgoGrid& grid) {
    Eigen::RowVectorXd out = Eigen::RowVectorXd::Zero(kGridInputSize);
    constexpr int n = EgoGrid::kSize;
    for (int row = 0; row < n; ++row)
        for (int col = 0; col < n; ++col)
            if (grid.explored(row, col)) out[row * n + col] = 2 * grid.prob(row, col) - 1;
    if (grid.target_cell[0] >= 0)
        out[n * n + grid.target_cell[0] * n + grid.target_cell[1]] = 1;
    return out;
}

GridSnapshot GridSnapshot::of(const EgoGrid& grid) {
    GridSnapshot snap;
    constexpr int n = EgoGrid::kSize;
    snap.cells.resize(static_cast<size_t>(n) * n);
    for (int row = 0; row < n; ++row) {
        for (int col = 0; col < n; ++col) {
            snap.cells[static_cast<size_t>(row) * n + col] =
                grid.explored(row, col)
                    ? static_cast<uint8_t>(std::lround(grid.prob(row, col) * 254))
                    : uint8_t{255};
        }
    }
    snap.target_row = static_cast<int16_t>(grid.target_cell[0]);
    snap.target_col = static_cast<int16_t>(grid.target_cell[1]);
    return snap;
}

EgoGrid GridSnapshot::to_grid() const {
    EgoGrid grid;
    constexpr int n = EgoGrid::kSize;
    for (int row = 0; row < n; ++row) {
        for (int col = 0; col < n; ++col) {
            const uint8_t v = cells[static_cast<size_t>(row) * n + col];
            if (v == 255) continue;
            grid.explored(row, col) = 1;
            grid.prob(row, col) = static_cast<Scalar>(v) / 254;
        }
    }
    grid.target_cell = {target_row, target_col};
    return grid;
}

void GridSnapshot::write_input(Eigen::Ref<Eigen::RowVectorXd> out) const {
    constexpr int n = EgoGrid::kSize;
    out.setZero();
    for (int i = 0; i < n * n; ++i) {
        const uint8_t v = cells[static_cast<size_t>(i)];
        if (v != 255) out[i] = 2 * (static_cast<Scalar>(v) / 254) - 1;
    }
    if (target_row >= 0) out[n * n + target_row * n + target_col] = 1;
}

}  // namespace rspt
