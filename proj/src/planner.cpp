#include "shield/planner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <tuple>

#include "shield/errors.hpp"

namespace shield {

GridMap::GridMap(double resolution, const Eigen::Vector2d& lower, const Eigen::Vector2d& upper,
                 std::span<const Obstacle> obstacles)
    : resolution_(resolution), lower_(lower) {
    if (!(resolution > 0.0)) throw InvalidArgument("grid: resolution must be positive");
    if (!(upper.array() > lower.array()).all()) throw InvalidArgument("grid: empty bounds");
    cols_ = static_cast<int>(std::ceil((upper.x() - lower.x()) / resolution));
    rows_ = static_cast<int>(std::ceil((upper.y() - lower.y()) / resolution));
    blocked_.assign(static_cast<std::size_t>(cols_) * static_cast<std::size_t>(rows_), 0);
    for (int r = 0; r < rows_; ++r)
        for (int c = 0; c < cols_; ++c) {
            const Eigen::Vector2d p = center({c, r});
            for (const auto& o : obstacles)
                if ((p - o.center).norm() < o.radius) {
                    set_blocked({c, r}, true);
                    break;
                }
        }
}

Cell GridMap::cell_of(const Eigen::Vector2d& p) const {
    return {static_cast<int>(std::floor((p.x() - lower_.x()) / resolution_)),
            static_cast<int>(std::floor((p.y() - lower_.y()) / resolution_))};
}

Eigen::Vector2d GridMap::center(const Cell& c) const {
    return lower_ + resolution_ * Eigen::Vector2d(c.col + 0.5, c.row + 0.5);
}

namespace {

constexpr double kSqrt2 = 1.4142135623730951;

double octile(const Cell& a, const Cell& b) {
    const double dx = std::abs(a.col - b.col);
    const double dy = std::abs(a.row - b.row);
    return (dx + dy) + (kSqrt2 - 2.0) * std::min(dx, dy);
}

}  // namespace

std::vector<Cell> astar(const GridMap& map, const Cell& start, const Cell& goal) {
    if (!map.inside(start) || !map.inside(goal)) throw Unreachable("astar: start or goal outside the map");
    if (map.blocked(start) || map.blocked(goal)) throw Unreachable("astar: start or goal is blocked");

    const std::size_t n = static_cast<std::size_t>(map.cols()) * static_cast<std::size_t>(map.rows());
    std::vector<double> g(n, std::numeric_limits<double>::infinity());
    std::vector<std::size_t> parent(n, n);
    std::vector<std::uint8_t> closed(n, 0);

    // (f, h, index)
    using Entry = std::tuple<double, double, std::size_t>;
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
    const std::size_t s = map.index(start);
    g[s] = 0.0;
    open.emplace(octile(start, goal), octile(start, goal), s);
    const std::size_t target = map.index(goal);

    auto cell_at = [&](std::size_t i) {
        return Cell{static_cast<int>(i % static_cast<std::size_t>(map.cols())),
                    static_cast<int>(i / static_cast<std::size_t>(map.cols()))};
    };

    while (!open.empty()) {
        const auto [f, h, cur] = open.top();
        open.pop();
        if (closed[cur]) continue;
        closed[cur] = 1;
        if (cur == target) break;
        const Cell c = cell_at(cur);
        for (int dr = -1; dr <= 1; ++dr)
            for (int dc = -1; dc <= 1; ++dc) {
                if (dr == 0 && dc == 0) continue;
                const Cell nb{c.col + dc, c.row + dr};
                if (!map.inside(nb) || map.blocked(nb)) continue;
                if (dr != 0 && dc != 0 && (map.blocked({c.col + dc, c.row}) || map.blocked({c.col, c.row + dr})))
                    continue;
                const std::size_t ni = map.index(nb);
                if (closed[ni]) continue;
                const double cand = g[cur] + ((dr != 0 && dc != 0) ? kSqrt2 : 1.0);
                if (cand < g[ni]) {
                    g[ni] = cand;
                    parent[ni] = cur;
                    const double hn = octile(nb, goal);
                    open.emplace(cand + hn, hn, ni);
                }
            }
    }
    if (!closed[target]) throw Unreachable("astar: no path to goal");

    std::vector<Cell> path;
    for (std::size_t i = target; i != n; i = parent[i]) path.push_back(cell_at(i));
    std::reverse(path.begin(), path.end());
    return path;
}

double path_length(const std::vector<Cell>& path) {
    double len = 0.0;
    for (std::size_t i = 1; i < path.size(); ++i) {
        const bool diag = path[i].col != path[i - 1].col && path[i].row != path[i - 1].row;
        len += diag ? kSqrt2 : 1.0;
    }
    return len;
}

std::vector<Eigen::Vector2d> to_world(const GridMap& map, const std::vector<Cell>& path) {
    std::vector<Eigen::Vector2d> out;
    out.reserve(path.size());
    for (const auto& c : path) out.push_back(map.center(c));
    return out;
}

Command nominal_velocity(const RomState& x, std::span<const Eigen::Vector2d> path, double speed,
                         double accept_radius) {
    if (path.empty()) throw InvalidArgument("nominal_velocity: empty path");
    if (!(speed > 0.0)) throw InvalidArgument("nominal_velocity: speed must be positive");
    const Eigen::Vector2d p = x.position();
    std::size_t nearest = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < path.size(); ++i) {
        const double d = (path[i] - p).norm();
        if (d < best) {
            best = d;
            nearest = i;
        }
    }
    for (std::size_t i = nearest; i < path.size(); ++i) {
        const Eigen::Vector2d to = path[i] - p;
        const double d = to.norm();
        if (d > accept_radius) {
            const Eigen::Vector2d v = speed * to / d;
            return {v.x(), v.y(), 0.0};
        }
    }
    return {0.0, 0.0, 0.0};
}

}  // namespace shield
