#pragma once

#include <optional>
#include <vector>

#include "rspt/perception.hpp"

namespace rspt {

/// Persistent world-frame occupancy field with additive log-odds evidence.
/// Cells never touched by a scan stay at log-odds 0 and unvisited.
struct OccupancyField {
    static constexpr Scalar kResolution = 0.5;
    static constexpr Scalar kLogOddsMin = -4.0;
    static constexpr Scalar kLogOddsMax = 4.0;
    static constexpr Scalar kHitIncrement = 0.85;
    static constexpr Scalar kFreeDecrement = 0.4;

    Vec2 origin;  // world position of the (0, 0) cell corner
    int cols = 0; // x axis
    int rows = 0; // y axis
    Eigen::ArrayXXd log_odds;                               // (rows, cols)
    Eigen::Array<uint8_t, Eigen::Dynamic, Eigen::Dynamic> visited;
    Eigen::ArrayXXi free_stamp, hit_stamp;                  // per-scan dedupe
    int scan_counter = 0;

    static OccupancyField for_bounds(const Bounds& bounds);

    bool in_field(int row, int col) const {
        return row >= 0 && row < rows && col >= 0 && col < cols;
    }
    /// Cell containing a world point, or nullopt outside the field.
    std::optional<Vec2i> cell_of(const Vec2& p) const {
        const int col = static_cast<int>(std::floor((p.x() - origin.x()) / kResolution));
        const int row = static_cast<int>(std::floor((p.y() - origin.y()) / kResolution));
        if (!in_field(row, col)) return std::nullopt;
        return Vec2i{row, col};
    }
    Scalar probability(int row, int col) const {
        return Scalar(1) / (Scalar(1) + std::exp(-log_odds(row, col)));
    }
};

/// Fold one scan into the field at the given pose estimate. Cells traversed
/// before a hit get the free decrement, hit cells the occupied increment; each
/// cell is updated at most once per scan and hits take precedence.
void integrate_scan(OccupancyField& field, const DepthScan& scan, const Pose2& pose_estimate);

/// Tracker-centric 40x40 window spanning [-10, 10] m in both body axes.
/// Rows follow the tracker heading (longitudinal), columns the lateral axis.
struct EgoGrid {
    static constexpr int kSize = 40;
    static constexpr Scalar kCellSize = 0.5;
    static constexpr Scalar kHalfExtent = 10.0;

    Eigen::ArrayXXd prob;  // occupancy probability, 0.5 where unexplored
    Eigen::Array<uint8_t, Eigen::Dynamic, Eigen::Dynamic> explored;
    Vec2i target_cell{-1, -1};

    EgoGrid()
        : prob(Eigen::ArrayXXd::Constant(kSize, kSize, 0.5)),
          explored(Eigen::Array<uint8_t, Eigen::Dynamic, Eigen::Dynamic>::Zero(kSize, kSize)) {}

    /// Body-frame coordinates of a cell center.
    static RelPos rel_of_cell(int row, int col) {
        return {-kHalfExtent + (col + Scalar(0.5)) * kCellSize,
                -kHalfExtent + (row + Scalar(0.5)) * kCellSize};
    }
    /// Cell containing a body-frame point, or nullopt beyond the extent.
    static std::optional<Vec2i> cell_of(const RelPos& rel) {
        const int col = static_cast<int>(std::floor((rel.x + kHalfExtent) / kCellSize));
        const int row = static_cast<int>(std::floor((rel.y + kHalfExtent) / kCellSize));
        if (row < 0 || row >= kSize || col < 0 || col >= kSize) return std::nullopt;
        return Vec2i{row, col};
    }
    static constexpr int center_index() { return kSize / 2; }
};

/// Resample the world field into the tracker frame (nearest cell, no
/// interpolation). Cells outside the field stay unexplored; the tracker's own
/// cell is never occupied.
EgoGrid extract_ego_grid(const OccupancyField& field, const Pose2& pose_estimate);

/// Tag the cell containing the detected target. No-op when the target is not
/// found or beyond the grid extent.
void mark_target(EgoGrid& grid, const VisState& vis);

inline constexpr int kGridInputSize = 2 * EgoGrid::kSize * EgoGrid::kSize;

/// Flatten a grid into the network input encoding: an occupancy plane
/// (2p - 1 where explored, 0 elsewhere) then a target one-hot plane, both in
/// row-major cell order.
Eigen::RowVectorXd grid_to_input(const EgoGrid& grid);

/// Byte-compact grid for logs and datasets (probability quantized to 8 bits).
struct GridSnapshot {
    std::vector<uint8_t> cells;  // 255 = unexplored, else round(p * 254)
    int16_t target_row = -1;
    int16_t target_col = -1;

    static GridSnapshot of(const EgoGrid& grid);
    EgoGrid to_grid() const;
    void write_input(Eigen::Ref<Eigen::RowVectorXd> out) const;
};

}  // namespace rspt
