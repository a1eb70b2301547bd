#pragma once

// Stochastic discrete-time CBF safety filter.
//
// For the active (closest) obstacle with radial direction e, the filter
// enforces the Jensen-tightened condition
//
//   h_tilde(x + dt (u + E[d])) - (lambda_max / 2) e^T Cov(x_{k+1}) e >= alpha h_k
//
// where Cov(x_{k+1}) = dt^2 Cov(d). h_tilde is strictly increasing in the
// projection (p - rho)^T e, so the condition is exactly the half-space
// e^T u_xy >= bound. The filter returns the Euclidean projection of the
// disturbance-corrected command onto that half-space intersected with the
// input box. Moments and alpha are refreshed every K steps.

#include <cstddef>
#include <cstdint>
#include <span>

#include <Eigen/Core>

#include "shield/barrier.hpp"
#include "shield/disturbance.hpp"
#include "shield/risk.hpp"
#include "shield/rom.hpp"

namespace shield {

struct InputBox {
    Eigen::Vector3d lo{-1.0, -1.0, -1.0};
    Eigen::Vector3d hi{1.0, 1.0, 1.0};

    void validate() const;
    Eigen::Vector3d clamp(const Eigen::Vector3d& u) const { return u.cwiseMax(lo).cwiseMin(hi); }
    bool contains(const Eigen::Vector3d& u, double tol = 0.0) const {
        return ((u - lo).array() >= -tol).all() && ((hi - u).array() >= -tol).all();
    }
};

struct FilterConfig {
    double dt = 0.01;
    InputBox input_box;
    BarrierConfig barrier;
    RiskBudget risk;
    std::size_t context_len = 4;

    void validate() const;
};

/// a^T u >= bound
struct HalfSpace {
    Eigen::Vector3d a = Eigen::Vector3d::Zero();
    double bound = 0.0;

    double slack(const Eigen::Vector3d& u) const { return a.dot(u) - bound; }
};

/// dt^2 e^T Cov(d)_xy e: variance of the next position along e.
double directional_variance(const DisturbanceMoments& m, const Eigen::Vector2d& e, double dt);

/// Std bound on h_tilde(x_{k+1}): max slope of h_tilde times the largest
/// position standard deviation over all planar directions.
double barrier_sigma(const DisturbanceMoments& m, const DirectionalBarrier& b, double dt);

/// Signed margin of the tightened condition; >= 0 iff it holds.
double tightened_constraint(const RomState& x, const Command& u, const DisturbanceMoments& m,
                            const DirectionalBarrier& b, double alpha, double dt);

/// Half-space equivalent of tightened_constraint >= 0. Throws InfeasibleLevel
/// when the required barrier level reaches lambda.
HalfSpace constraint_halfspace(const RomState& x, const DisturbanceMoments& m, const DirectionalBarrier& b,
                               double alpha, double dt);

/// argmin ||u - u_adj||^2 over box and half-space. Throws InfeasibleProjection
/// when they do not intersect.
Command project(const Command& u_adj, const HalfSpace& hs, const InputBox& box);

/// Box vertex maximizing a^T u; coordinates with a_i = 0 keep clamp(u_adj).
Command max_retreat(const Command& u_adj, const HalfSpace& hs, const InputBox& box);

struct FilterDiagnostics {
    std::uint64_t step = 0;
    double h = 0.0;          ///< h_k of the closest obstacle
    double alpha = 0.0;
    double sigma = 0.0;
    double margin = 0.0;     ///< tightened_constraint at the returned command
    std::size_t obstacle = 0;
    bool refreshed = false;  ///< moments and alpha recomputed this step
    bool active = false;     ///< half-space constraint was binding
    bool infeasible = false; ///< fallback command used
    Command u_adjusted;
};

struct FilterState {
    explicit FilterState(const FilterConfig& cfg);

    HistoryWindow history;
    DisturbanceMoments moments;
    double alpha;
    double sigma = 0.0;
    Eigen::Vector2d e = Eigen::Vector2d::UnitX();
    std::uint64_t k = 0;
    SafetyLedger ledger;
    std::size_t model_queries = 0;
};

struct FilterOutput {
    Command u_safe;
    FilterDiagnostics diag;
};

/// One pass of the deployment loop. Never throws on infeasibility; the
/// fallback is flagged in the diagnostics and ledgered as a violation.
FilterOutput filter_step(FilterState& state, const DisturbanceModel& model, const RomState& x,
                         const Command& u_cmd, std::span<const Obstacle> obstacles, const FilterConfig& cfg);

}  // namespace shield
