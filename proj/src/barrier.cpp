#include "shield/barrier.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "shield/errors.hpp"

namespace shield {

void validate(const BarrierConfig& config) {
    if (!(config.lambda > 0.0) || !std::isfinite(config.lambda))
        throw InvalidArgument("barrier: lambda must be positive and finite");
    if (!(config.gamma > 0.0) || !std::isfinite(config.gamma))
        throw InvalidArgument("barrier: gamma must be positive and finite");
}

void validate(const Obstacle& obstacle) {
    if (!obstacle.center.allFinite()) throw InvalidArgument("obstacle: non-finite center");
    if (!(obstacle.radius > 0.0) || !std::isfinite(obstacle.radius))
        throw InvalidArgument("obstacle: radius must be positive and finite");
}

void DirectionalBarrier::validate() const {
    shield::validate(obstacle);
    shield::validate(config);
    if (!e.allFinite() || std::abs(e.norm() - 1.0) > 1e-9)
        throw InvalidArgument("directional barrier: e must be a unit vector");
}

double sdf(const Eigen::Vector2d& p, std::span<const Obstacle> obstacles) {
    if (obstacles.empty()) throw DomainError("sdf: empty obstacle set");
    double best = std::numeric_limits<double>::infinity();
    for (const auto& o : obstacles) best = std::min(best, (p - o.center).norm() - o.radius);
    return best;
}

double barrier_profile(double distance, const BarrierConfig& config) {
    return -config.lambda * std::expm1(-config.gamma * distance);
}

double h_smooth(const Eigen::Vector2d& p, std::span<const Obstacle> obstacles, const BarrierConfig& config) {
    return barrier_profile(sdf(p, obstacles), config);
}

double h_hat(const Eigen::Vector2d& p, const DirectionalBarrier& b) {
    return barrier_profile(b.projection(p) - b.obstacle.radius, b.config);
}

double h_tilde_of_projection(double s, const DirectionalBarrier& b) {
    const double lam = b.config.lambda;
    const double gam = b.config.gamma;
    const double R = b.obstacle.radius;
    if (s >= 0.0) return barrier_profile(s - R, b.config);
    // tangent line at s = 0
    const double at_switch = -lam * std::expm1(gam * R);
    return at_switch + gam * lam * std::exp(gam * R) * s;
}

double h_tilde_slope(double s, const DirectionalBarrier& b) {
    const double gam = b.config.gamma;
    const double lam = b.config.lambda;
    const double R = b.obstacle.radius;
    return gam * lam * std::exp(-gam * (std::max(s, 0.0) - R));
}

double h_tilde(const Eigen::Vector2d& p, const DirectionalBarrier& b) {
    b.validate();
    return h_tilde_of_projection(b.projection(p), b);
}

double h_tilde_inverse(double v, const DirectionalBarrier& b) {
    const double lam = b.config.lambda;
    const double gam = b.config.gamma;
    const double R = b.obstacle.radius;
    if (!(v < lam)) throw InfeasibleLevel("h_tilde_inverse: level " + std::to_string(v) + " >= lambda");
    const double at_switch = -lam * std::expm1(gam * R);
    if (v >= at_switch) return R - std::log1p(-v / lam) / gam;
    return (v - at_switch) / (gam * lam * std::exp(gam * R));
}

double lambda_max(const DirectionalBarrier& b) {
    const double gam = b.config.gamma;
    return gam * gam * b.config.lambda * std::exp(gam * b.obstacle.radius);
}

double max_slope(const DirectionalBarrier& b) {
    return b.config.gamma * b.config.lambda * std::exp(b.config.gamma * b.obstacle.radius);
}

ClosestObstacle closest_obstacle(const Eigen::Vector2d& p, std::span<const Obstacle> obstacles,
                                 const BarrierConfig& config) {
    if (obstacles.empty()) throw DomainError("closest_obstacle: empty obstacle set");
    ClosestObstacle best;
    best.value = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < obstacles.size(); ++i) {
        const double v = barrier_profile((p - obstacles[i].center).norm() - obstacles[i].radius, config);
        if (v < best.value - 1e-12) {
            best.index = i;
            best.value = v;
        }
    }
    const Eigen::Vector2d diff = p - obstacles[best.index].center;
    const double dist = diff.norm();
    if (!(dist > 0.0)) throw DegenerateDirection("closest_obstacle: position coincides with obstacle center");
    best.e = diff / dist;
    return best;
}

}  // namespace shield
