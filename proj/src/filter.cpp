#include "shield/filter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Eigenvalues>

#include "shield/errors.hpp"
#include "shield/tracking.hpp"

namespace shield {

void InputBox::validate() const {
    if (!lo.allFinite() || !hi.allFinite()) throw InvalidArgument("input box: non-finite bounds");
    if (!(lo.array() < hi.array()).all()) throw InvalidArgument("input box: need lo < hi per component");
}

void FilterConfig::validate() const {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidArgument("filter: dt must be positive");
    input_box.validate();
    shield::validate(barrier);
    risk.validate();
    if (context_len < 1) throw InvalidArgument("filter: context_len must be >= 1");
}

double directional_variance(const DisturbanceMoments& m, const Eigen::Vector2d& e, double dt) {
    return dt * dt * e.dot(m.cov.topLeftCorner<2, 2>() * e);
}

double barrier_sigma(const DisturbanceMoments& m, const DirectionalBarrier& b, double dt) {
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(m.cov.topLeftCorner<2, 2>());
    const double top = std::max(es.eigenvalues().maxCoeff(), 0.0);
    return max_slope(b) * dt * std::sqrt(top);
}

double tightened_constraint(const RomState& x, const Command& u, const DisturbanceMoments& m,
                            const DirectionalBarrier& b, double alpha, double dt) {
    b.validate();
    const Eigen::Vector2d next = x.position() + dt * (Eigen::Vector2d(u.vx, u.vy) + m.mean.head<2>());
    return h_tilde(next, b) - 0.5 * lambda_max(b) * directional_variance(m, b.e, dt) -
           alpha * h_tilde(x.position(), b);
}

HalfSpace constraint_halfspace(const RomState& x, const DisturbanceMoments& m, const DirectionalBarrier& b,
                               double alpha, double dt) {
    b.validate();
    const double level =
        alpha * h_tilde(x.position(), b) + 0.5 * lambda_max(b) * directional_variance(m, b.e, dt);
    const double s_req = h_tilde_inverse(level, b);
    HalfSpace hs;
    hs.a = Eigen::Vector3d(b.e.x(), b.e.y(), 0.0);
    hs.bound = (s_req - b.projection(x.position())) / dt - b.e.dot(m.mean.head<2>());
    return hs;
}

namespace {

double max_over_box(const HalfSpace& hs, const InputBox& box) {
    double v = 0.0;
    for (int i = 0; i < 3; ++i) v += hs.a[i] * (hs.a[i] > 0.0 ? box.hi[i] : box.lo[i]);
    return v;
}

}  // namespace

Command project(const Command& u_adj, const HalfSpace& hs, const InputBox& box) {
    const Eigen::Vector3d u0 = u_adj.vec();
    const Eigen::Vector3d clamped = box.clamp(u0);
    if (hs.slack(clamped) >= 0.0) return Command::from_vec(clamped);
    if (max_over_box(hs, box) < hs.bound)
        throw InfeasibleProjection("project: box and half-space do not intersect");

    // g(mu) = a^T clamp(u0 + mu a) is nondecreasing and piecewise linear in mu;
    // its kinks are where a coordinate enters or leaves the box.
    std::vector<double> kinks{0.0};
    for (int i = 0; i < 3; ++i) {
        if (hs.a[i] == 0.0) continue;
        for (double edge : {box.lo[i], box.hi[i]}) {
            const double mu = (edge - u0[i]) / hs.a[i];
            if (mu > 0.0) kinks.push_back(mu);
        }
    }
    std::sort(kinks.begin(), kinks.end());
    auto g = [&](double mu) { return hs.a.dot(box.clamp(u0 + mu * hs.a)); };

    double mu_star = kinks.back();
    for (std::size_t j = 0; j + 1 < kinks.size(); ++j) {
        const double g_next = g(kinks[j + 1]);
        if (g_next < hs.bound) continue;
        const double g_here = g(kinks[j]);
        // free coordinates on this segment set the slope
        const double mid = 0.5 * (kinks[j] + kinks[j + 1]);
        const Eigen::Vector3d probe = u0 + mid * hs.a;
        double slope = 0.0;
        for (int i = 0; i < 3; ++i)
            if (probe[i] > box.lo[i] && probe[i] < box.hi[i]) slope += hs.a[i] * hs.a[i];
        mu_star = slope > 0.0 ? kinks[j] + (hs.bound - g_here) / slope : kinks[j + 1];
        mu_star = std::clamp(mu_star, kinks[j], kinks[j + 1]);
        break;
    }
    Eigen::Vector3d u = box.clamp(u0 + mu_star * hs.a);
    // the half-space edge may fall a few ulps short after rounding
    const double short_by = hs.bound - hs.a.dot(u);
    if (short_by > 0.0) u = box.clamp(u + (short_by / hs.a.squaredNorm()) * hs.a);
    return Command::from_vec(u);
}

Command max_retreat(const Command& u_adj, const HalfSpace& hs, const InputBox& box) {
    Eigen::Vector3d u = box.clamp(u_adj.vec());
    for (int i = 0; i < 3; ++i) {
        if (hs.a[i] > 0.0)
            u[i] = box.hi[i];
        else if (hs.a[i] < 0.0)
            u[i] = box.lo[i];
    }
    return Command::from_vec(u);
}

FilterState::FilterState(const FilterConfig& cfg) : history(cfg.context_len), alpha(cfg.risk.alpha) {}

namespace {

struct ActiveObstacle {
    std::size_t index = 0;
    double h = 0.0;
    Eigen::Vector2d e;
};

ActiveObstacle find_active(const Eigen::Vector2d& p, std::span<const Obstacle> obstacles, const BarrierConfig& cfg,
                           const Eigen::Vector2d& previous_e) {
    try {
        const auto c = closest_obstacle(p, obstacles, cfg);
        return {c.index, c.value, c.e};
    } catch (const DegenerateDirection&) {
        // sitting on a center: keep the last direction
        std::size_t best = 0;
        double best_v = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < obstacles.size(); ++i) {
            const double v = barrier_profile((p - obstacles[i].center).norm() - obstacles[i].radius, cfg);
            if (v < best_v - 1e-12) {
                best = i;
                best_v = v;
            }
        }
        return {best, best_v, previous_e};
    }
}

}  // namespace

FilterOutput filter_step(FilterState& st, const DisturbanceModel& model, const RomState& x, const Command& u_cmd,
                         std::span<const Obstacle> obstacles, const FilterConfig& cfg) {
    FilterOutput out;
    auto& diag = out.diag;
    diag.step = st.k;

    // the model conditions on the raw command, never on filtered output
    st.history.push(x, u_cmd);

    const bool any_obstacle = !obstacles.empty();
    ActiveObstacle active{0, cfg.barrier.lambda, st.e};
    if (any_obstacle) active = find_active(x.position(), obstacles, cfg.barrier, st.e);
    diag.h = active.h;
    diag.obstacle = active.index;

    DirectionalBarrier b;
    b.config = cfg.barrier;
    b.e = active.e;
    if (any_obstacle) b.obstacle = obstacles[active.index];

    const auto K = static_cast<std::uint64_t>(cfg.risk.K);
    if (st.k % K == 0) {
        diag.refreshed = true;
        st.moments = model.moments(st.history);
        ++st.model_queries;
        if (cfg.risk.sigma > 0.0) {
            st.sigma = cfg.risk.sigma;
        } else if (any_obstacle) {
            st.sigma = barrier_sigma(st.moments, b, cfg.dt);
        } else {
            // no obstacle: the profile's slope at the zero level
            Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(st.moments.cov.topLeftCorner<2, 2>());
            st.sigma = cfg.barrier.gamma * cfg.barrier.lambda * cfg.dt *
                       std::sqrt(std::max(es.eigenvalues().maxCoeff(), 0.0));
        }
        // sigma must be positive for the bound; a noiseless model gets a floor
        st.sigma = std::max(st.sigma, 1e-9);
        if (active.h < 0.0) {
            st.ledger.record_violation();
            st.ledger.accumulate(1.0);
        } else {
            try {
                const auto sol = solve_alpha_detailed(cfg.risk.P, cfg.risk.K, active.h, cfg.risk.delta, st.sigma);
                st.alpha = sol.alpha;
            } catch (const InfeasibleRisk&) {
                st.alpha = 1.0 - kAlphaEps;
            }
            st.ledger.accumulate(freedman_bound(st.alpha, cfg.risk.K, active.h, cfg.risk.delta, st.sigma));
        }
    }
    diag.alpha = st.alpha;
    diag.sigma = st.sigma;

    const Command u_adj = adjust_command(u_cmd, st.moments.mean_disturbance());
    diag.u_adjusted = u_adj;

    if (!any_obstacle) {
        out.u_safe = Command::from_vec(cfg.input_box.clamp(u_adj.vec()));
        diag.margin = std::numeric_limits<double>::infinity();
        st.e = active.e;
        ++st.k;
        return out;
    }

    HalfSpace hs;
    hs.a = Eigen::Vector3d(b.e.x(), b.e.y(), 0.0);
    try {
        hs = constraint_halfspace(x, st.moments, b, st.alpha, cfg.dt);
        diag.active = hs.slack(cfg.input_box.clamp(u_adj.vec())) < 0.0;
        out.u_safe = project(u_adj, hs, cfg.input_box);
    } catch (const InfeasibleLevel&) {
        diag.infeasible = true;
    } catch (const InfeasibleProjection&) {
        diag.infeasible = true;
    }
    if (diag.infeasible) {
        diag.active = true;
        out.u_safe = max_retreat(u_adj, hs, cfg.input_box);
        st.ledger.record_violation();
    }
    diag.margin = tightened_constraint(x, out.u_safe, st.moments, b, st.alpha, cfg.dt);

    st.e = active.e;
    ++st.k;
    return out;
}

}  // namespace shield
