#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "shield/barrier.hpp"
#include "shield/rom.hpp"

namespace shield {

struct Cell {
    int col = 0;
    int row = 0;
    bool operator==(const Cell&) const = default;
};

/// Occupancy grid over an axis-aligned rectangle. A cell is blocked when
/// its center lies inside any obstacle disc (radius already includes the
/// robot margin).
class GridMap {
public:
    GridMap(double resolution, const Eigen::Vector2d& lower, const Eigen::Vector2d& upper,
            std::span<const Obstacle> obstacles = {});

    int cols() const { return cols_; }
    int rows() const { return rows_; }
    double resolution() const { return resolution_; }

    bool inside(const Cell& c) const { return c.col >= 0 && c.row >= 0 && c.col < cols_ && c.row < rows_; }
    bool blocked(const Cell& c) const { return blocked_[index(c)] != 0; }
    void set_blocked(const Cell& c, bool value) { blocked_[index(c)] = value ? 1 : 0; }

    std::size_t index(const Cell& c) const {
        return static_cast<std::size_t>(c.row) * static_cast<std::size_t>(cols_) + static_cast<std::size_t>(c.col);
    }
    Cell cell_of(const Eigen::Vector2d& p) const;
    Eigen::Vector2d center(const Cell& c) const;

private:
    double resolution_;
    Eigen::Vector2d lower_;
    int cols_;
    int rows_;
    std::vector<std::uint8_t> blocked_;
};

/// 8-connected shortest path (diagonal steps cost sqrt 2, no corner cutting)
/// under the octile heuristic. Ties break on (f, h, cell index). Throws
/// Unreachable when start or goal is blocked/outside or no path exists.
std::vector<Cell> astar(const GridMap& map, const Cell& start, const Cell& goal);

/// Sum of step lengths in cell units.
double path_length(const std::vector<Cell>& path);

std::vector<Eigen::Vector2d> to_world(const GridMap& map, const std::vector<Cell>& path);

inline constexpr double kWaypointRadius = 0.15;

/// Constant-speed command toward the first node past the closest one that
/// lies farther than `accept_radius`. Zero once the goal is within reach.
Command nominal_velocity(const RomState& x, std::span<const Eigen::Vector2d> path, double speed,
                         double accept_radius = kWaypointRadius);

}  // namespace shield
