#include <cmath>
#include <random>

#include "doctest.h"
#include "shield/errors.hpp"
#include "shield/filter.hpp"
#include "support/qp_oracle.hpp"

using namespace shield;

namespace {

class CountingModel final : public DisturbanceModel {
public:
    explicit CountingModel(DisturbanceMoments m) : m_(m) {}
    DisturbanceMoments moments(const HistoryWindow&) const override {
        ++calls;
        return m_;
    }
    Disturbance sample(const HistoryWindow&, Rng&) const override { return m_.mean_disturbance(); }
    mutable int calls = 0;

private:
    DisturbanceMoments m_;
};

DirectionalBarrier radial(const Obstacle& o, const Eigen::Vector2d& p) {
    DirectionalBarrier b;
    b.obstacle = o;
    b.e = (p - o.center).normalized();
    return b;
}

DisturbanceMoments random_moments(std::mt19937_64& rng, double scale) {
    std::normal_distribution<double> n;
    Eigen::Matrix3d L;
    for (int i = 0; i < 9; ++i) L.data()[i] = scale * n(rng);
    DisturbanceMoments m;
    m.cov = L * L.transpose();
    m.mean = Eigen::Vector3d(0.1 * n(rng), 0.1 * n(rng), 0.1 * n(rng));
    return m;
}

}  // namespace

TEST_CASE("tightened_constraint basics") {
    const Obstacle o{{2, 0}, 0.5};
    const RomState x{0, 0, 0};
    const DirectionalBarrier b = radial(o, x.position());
    DisturbanceMoments zero;
    // far away and standing still, alpha < 1 leaves slack
    CHECK(tightened_constraint(x, {}, zero, b, 0.9, 0.01) > 0.0);
    // no noise: plain discrete-time CBF inequality
    const Command u{0.3, 0.2, 0};
    const Eigen::Vector2d next = x.position() + 0.01 * Eigen::Vector2d(u.vx, u.vy);
    CHECK(tightened_constraint(x, u, zero, b, 0.9, 0.01) ==
          doctest::Approx(h_tilde(next, b) - 0.9 * h_tilde(x, b)).epsilon(1e-14));
    // slope -lambda_max/2 in the directional variance
    DisturbanceMoments m1, m2;
    m1.cov = Eigen::Vector3d(0.04, 0.01, 0.0).asDiagonal();
    m2.cov = Eigen::Vector3d(0.09, 0.01, 0.0).asDiagonal();
    const double dv = directional_variance(m2, b.e, 0.01) - directional_variance(m1, b.e, 0.01);
    CHECK(dv > 0.0);
    CHECK(tightened_constraint(x, u, m1, b, 0.9, 0.01) - tightened_constraint(x, u, m2, b, 0.9, 0.01) ==
          doctest::Approx(0.5 * lambda_max(b) * dv).epsilon(1e-9));
}

TEST_CASE("constraint_halfspace agrees with the constraint in sign") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-3, 3), a01(0.05, 0.99), v(-1.5, 1.5);
    int checked = 0;
    for (int i = 0; i < 1000; ++i) {
        const Obstacle o{{u(rng), u(rng)}, 0.3 + 0.2 * std::abs(u(rng))};
        const RomState x{u(rng), u(rng), 0};
        if ((x.position() - o.center).norm() < 1e-3) continue;
        const DirectionalBarrier b = radial(o, x.position());
        const DisturbanceMoments m = random_moments(rng, 0.1);
        const double alpha = a01(rng);
        HalfSpace hs;
        try {
            hs = constraint_halfspace(x, m, b, alpha, 0.01);
        } catch (const InfeasibleLevel&) {
            continue;
        }
        CHECK(hs.a.z() == 0.0);
        for (int j = 0; j < 10; ++j) {
            const Command c{v(rng), v(rng), v(rng)};
            const double margin = tightened_constraint(x, c, m, b, alpha, 0.01);
            const double slack = hs.slack(c.vec());
            if (std::abs(margin) < 1e-9 || std::abs(slack) < 1e-7) continue;
            CHECK((margin > 0) == (slack > 0));
            ++checked;
        }
    }
    CHECK(checked > 5000);
}

TEST_CASE("standing still on the level set is always allowed") {
    const Obstacle o{{0, 0}, 0.5};
    const RomState x{1.5, 0.0, 0};
    const DirectionalBarrier b = radial(o, x.position());
    for (double alpha : {0.1, 0.5, 0.99}) {
        const HalfSpace hs = constraint_halfspace(x, DisturbanceMoments{}, b, alpha, 0.01);
        CHECK(hs.slack(Eigen::Vector3d::Zero()) >= 0.0);
    }
}

TEST_CASE("constraint_halfspace at the barrier ceiling") {
    const Obstacle o{{0, 0}, 0.5};
    const RomState x{100.0, 0.0, 0};
    const DirectionalBarrier b = radial(o, x.position());
    DisturbanceMoments m;
    m.cov = Eigen::Matrix3d::Identity() * 1e6;
    CHECK_THROWS_AS(constraint_halfspace(x, m, b, 0.999, 0.01), InfeasibleLevel);
}

TEST_CASE("project examples") {
    const InputBox box;
    HalfSpace hs;
    hs.a = Eigen::Vector3d(-1, 0, 0);
    hs.bound = -0.2;
    const Command p = project({0.5, 0, 0}, hs, box);
    CHECK(p.vx == doctest::Approx(0.2));
    CHECK(p.vy == 0.0);
    const Command feasible{0.1, 0.3, -0.2};
    CHECK(project(feasible, hs, box) == feasible);
    hs.bound = 5.0;
    CHECK_THROWS_AS(project({0.5, 0, 0}, hs, box), InfeasibleProjection);
}

TEST_CASE("project matches the brute-force QP") {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> u(-2, 2);
    std::normal_distribution<double> n;
    int solved = 0;
    for (int i = 0; i < 1000; ++i) {
        InputBox box;
        for (int k = 0; k < 3; ++k) {
            const double c = 0.5 * u(rng), w = 0.1 + std::abs(u(rng));
            box.lo[k] = c - w;
            box.hi[k] = c + w;
        }
        HalfSpace hs;
        hs.a = Eigen::Vector3d(n(rng), n(rng), i % 3 == 0 ? 0.0 : n(rng)).normalized();
        hs.bound = u(rng);
        const Command u0{2 * u(rng), 2 * u(rng), 2 * u(rng)};
        const auto ref = oracle::box_halfspace_qp(u0.vec(), hs.a, hs.bound, box.lo, box.hi);
        if (!ref) {
            CHECK_THROWS_AS(project(u0, hs, box), InfeasibleProjection);
            continue;
        }
        const Command p = project(u0, hs, box);
        CHECK((p.vec() - u0.vec()).squaredNorm() == doctest::Approx(ref->objective).epsilon(1e-6));
        CHECK(hs.slack(p.vec()) >= -1e-9);
        CHECK(box.contains(p.vec()));
        ++solved;
    }
    CHECK(solved > 500);
}

TEST_CASE("max_retreat picks the box vertex along a") {
    const InputBox box;
    HalfSpace hs;
    hs.a = Eigen::Vector3d(-0.6, 0.8, 0);
    const Command r = max_retreat({0.5, 0.1, 0.3}, hs, box);
    CHECK(r == Command{-1.0, 1.0, 0.3});
}

TEST_CASE("filter passes the command through far from obstacles") {
    FilterConfig cfg;
    GaussianModel zero = GaussianModel::zero();
    FilterState st(cfg);
    const ObstacleSet obs{{{50, 0}, 0.5}};
    const auto out = filter_step(st, zero, {0, 0, 0}, {0.5, 0.1, 0.0}, obs, cfg);
    CHECK(out.u_safe == Command{0.5, 0.1, 0.0});
    CHECK_FALSE(out.diag.active);
    CHECK(out.diag.margin >= 0.0);
}

TEST_CASE("filter with no obstacles clamps only") {
    FilterConfig cfg;
    const GaussianModel biased({0.1, 0, 0}, Eigen::Matrix3d::Zero());
    FilterState st(cfg);
    const auto out = filter_step(st, biased, {0, 0, 0}, {2.0, 0.1, 0.0}, ObstacleSet{}, cfg);
    CHECK(out.u_safe.vx == 1.0);
    CHECK(out.u_safe.vy == doctest::Approx(0.1));
}

TEST_CASE("filter caps the approach speed near an obstacle") {
    FilterConfig cfg;
    const GaussianModel model({0, 0, 0}, Eigen::Vector3d(0.01, 0.01, 0.01).asDiagonal());
    FilterState st(cfg);
    const Obstacle o{{0.51, 0}, 0.5};
    const RomState x{0, 0, 0};
    const auto out = filter_step(st, model, x, {1.0, 0, 0}, ObstacleSet{o}, cfg);
    const DirectionalBarrier b = radial(o, x.position());
    const HalfSpace hs = constraint_halfspace(x, model.moments(HistoryWindow(cfg.context_len)), b, out.diag.alpha, cfg.dt);
    CHECK(out.diag.active);
    CHECK(hs.slack(out.u_safe.vec()) >= -1e-9);
    CHECK(out.u_safe.vx < 1.0);
    CHECK(out.diag.margin >= -1e-9);
}

TEST_CASE("moments and alpha are refreshed once per interval") {
    FilterConfig cfg;
    cfg.risk.K = 5;
    CountingModel model({});
    FilterState st(cfg);
    const ObstacleSet obs{{{3, 0}, 0.5}};
    RomState x{0, 0, 0};
    for (int k = 0; k < 23; ++k) {
        const auto out = filter_step(st, model, x, {0.2, 0, 0}, obs, cfg);
        CHECK(out.diag.refreshed == (k % 5 == 0));
        x = step(x, out.u_safe, {}, cfg.dt);
    }
    CHECK(model.calls == 5);
    CHECK(st.ledger.intervals() == 5);
}

TEST_CASE("filter output is feasible and minimally invasive") {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> u(-2, 2), v(-1, 1);
    FilterConfig cfg;
    int feasible = 0;
    for (int i = 0; i < 300; ++i) {
        const Obstacle o{{u(rng), u(rng)}, 0.3 + 0.3 * std::abs(v(rng))};
        RomState x{u(rng), u(rng), 0};
        if (sdf(x.position(), ObstacleSet{o}) < 0.02) continue;
        const GaussianModel model(Eigen::Vector3d(0.1 * v(rng), 0.1 * v(rng), 0),
                                  Eigen::Vector3d(0.02, 0.02, 0.01).asDiagonal());
        FilterState st(cfg);
        const Command cmd{v(rng), v(rng), v(rng)};
        const auto out = filter_step(st, model, x, cmd, ObstacleSet{o}, cfg);
        if (out.diag.infeasible) continue;
        ++feasible;
        const DirectionalBarrier b = radial(o, x.position());
        const auto mo = model.moments(HistoryWindow(cfg.context_len));
        CHECK(tightened_constraint(x, out.u_safe, mo, b, out.diag.alpha, cfg.dt) >= -1e-9);
        const HalfSpace hs = constraint_halfspace(x, mo, b, out.diag.alpha, cfg.dt);
        const Eigen::Vector3d ua = out.diag.u_adjusted.vec();
        const double d = (out.u_safe.vec() - ua).norm();
        for (int j = 0; j < 100; ++j) {
            const Eigen::Vector3d other(v(rng), v(rng), v(rng));
            if (hs.slack(other) < 0.0 || !cfg.input_box.contains(other)) continue;
            CHECK(d <= (other - ua).norm() + 1e-12);
        }
    }
    CHECK(feasible > 200);
}

TEST_CASE("zero-noise filter follows the plain discrete-time CBF rule") {
    std::mt19937_64 rng(41);
    std::uniform_real_distribution<double> u(-2, 2), v(-1, 1);
    FilterConfig cfg;
    const GaussianModel zero = GaussianModel::zero();
    int n = 0;
    while (n < 1000) {
        const Obstacle o{{u(rng), u(rng)}, 0.4};
        const RomState x{u(rng), u(rng), 0};
        if (sdf(x.position(), ObstacleSet{o}) < 0.01) continue;
        ++n;
        FilterState st(cfg);
        const Command cmd{v(rng), v(rng), 0};
        const auto out = filter_step(st, zero, x, cmd, ObstacleSet{o}, cfg);
        const DirectionalBarrier b = radial(o, x.position());
        const Eigen::Vector2d next = x.position() + cfg.dt * Eigen::Vector2d(cmd.vx, cmd.vy);
        const bool accept = h_tilde(next, b) >= out.diag.alpha * h_tilde(x, b);
        if (accept) {
            CHECK(out.u_safe == cmd);
        } else {
            CHECK_FALSE(out.u_safe == cmd);
            const Eigen::Vector2d got = x.position() + cfg.dt * Eigen::Vector2d(out.u_safe.vx, out.u_safe.vy);
            CHECK(h_tilde(got, b) - out.diag.alpha * h_tilde(x, b) == doctest::Approx(0.0).epsilon(1e-9).scale(1.0));
        }
    }
}

TEST_CASE("infeasible instances fall back to maximal retreat") {
    FilterConfig cfg;
    cfg.input_box.lo = Eigen::Vector3d(-0.01, -0.01, -0.01);
    cfg.input_box.hi = Eigen::Vector3d(0.01, 0.01, 0.01);
    // the bias pushes toward the obstacle faster than the box allows to resist
    const GaussianModel model({0.5, 0, 0}, Eigen::Matrix3d::Zero());
    FilterState st(cfg);
    const Obstacle o{{0.502, 0}, 0.5};
    const auto out = filter_step(st, model, {0, 0, 0}, {0.0, 0, 0}, ObstacleSet{o}, cfg);
    CHECK(out.diag.infeasible);
    CHECK(out.u_safe.vx == -0.01);
    CHECK(st.ledger.violations() >= 1);
}
