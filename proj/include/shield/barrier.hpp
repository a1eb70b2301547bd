#pragma once

// Obstacle-avoidance barrier functions.
//
//   sdf(p)      = min_i ||p - rho_i|| - R_i
//   h_smooth(p) = lambda * (1 - exp(-gamma * sdf(p)))
//
// For a single obstacle and a frozen unit direction e, the directional
// barrier h_tilde replaces ||p - rho|| by the projection s = (p - rho)^T e.
// For s >= 0 it follows the smooth curve. For s < 0 it continues along the
// tangent line at s = 0, which keeps it concave and C^1 in p. The Hessian is
// gamma^2 lambda exp(-gamma (s - R)) e e^T on the curved branch and zero on
// the linear one, so its supremum is gamma^2 lambda exp(gamma R).

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "shield/rom.hpp"

namespace shield {

struct Obstacle {
    Eigen::Vector2d center = Eigen::Vector2d::Zero();
    double radius = 0.0;  ///< obstacle radius plus robot margin, > 0
};

using ObstacleSet = std::vector<Obstacle>;

struct BarrierConfig {
    double lambda = 10.0;  ///< supremum of the barrier
    double gamma = 0.5;    ///< 1/m, sharpness
};

/// Single-obstacle barrier along a frozen unit direction.
struct DirectionalBarrier {
    Obstacle obstacle;
    Eigen::Vector2d e = Eigen::Vector2d::UnitX();
    BarrierConfig config;

    /// Throws InvalidArgument unless ||e|| = 1 within 1e-9, R > 0 and the
    /// config is positive.
    void validate() const;
    /// (p - rho)^T e
    double projection(const Eigen::Vector2d& p) const { return (p - obstacle.center).dot(e); }
};

void validate(const BarrierConfig& config);
void validate(const Obstacle& obstacle);

double sdf(const Eigen::Vector2d& p, std::span<const Obstacle> obstacles);
double h_smooth(const Eigen::Vector2d& p, std::span<const Obstacle> obstacles, const BarrierConfig& config);
/// lambda * (1 - exp(-gamma * distance)); the scalar profile shared by all barriers.
double barrier_profile(double distance, const BarrierConfig& config);

/// Curved approximation on both branches (no tangent extension).
double h_hat(const Eigen::Vector2d& p, const DirectionalBarrier& b);
double h_tilde(const Eigen::Vector2d& p, const DirectionalBarrier& b);
inline double h_tilde(const RomState& x, const DirectionalBarrier& b) { return h_tilde(x.position(), b); }

/// h_tilde as a function of the projection s = (p - rho)^T e.
double h_tilde_of_projection(double s, const DirectionalBarrier& b);
/// d h_tilde / d s, strictly positive everywhere.
double h_tilde_slope(double s, const DirectionalBarrier& b);

/// The projection s at which h_tilde equals v. Throws InfeasibleLevel if v >= lambda.
double h_tilde_inverse(double v, const DirectionalBarrier& b);

/// gamma^2 * lambda * exp(gamma * R)
double lambda_max(const DirectionalBarrier& b);

/// Largest slope of h_tilde along e, reached on the linear branch:
/// gamma * lambda * exp(gamma * R). Equals lambda_max / gamma.
double max_slope(const DirectionalBarrier& b);

struct ClosestObstacle {
    std::size_t index = 0;
    double value = 0.0;  ///< h_tilde of the argmin with radial e (equals its h_smooth)
    Eigen::Vector2d e = Eigen::Vector2d::UnitX();
};

/// Argmin obstacle by barrier value; ties within 1e-12 go to the lowest index.
/// Throws DomainError on an empty set and DegenerateDirection if p sits on
/// the argmin's center.
ClosestObstacle closest_obstacle(const Eigen::Vector2d& p, std::span<const Obstacle> obstacles,
                                 const BarrierConfig& config);

}  // namespace shield
