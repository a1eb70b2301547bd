#include <cmath>
#include <limits>

#include "doctest.h"
#include "shield/errors.hpp"
#include "shield/rom.hpp"

using namespace shield;

TEST_CASE("step integrates one Euler step") {
    CHECK(step({0, 0, 0}, {1, 0, 0}, {}, 0.01) == RomState{0.01, 0, 0});
    CHECK(step({0, 0, 0}, {}, {}, 0.01) == RomState{0, 0, 0});
}

TEST_CASE("step wraps yaw past 2 pi") {
    // (6.28 + 0.01) mod 2 pi, evaluated with mpmath at 50 digits
    const RomState x = step({0, 0, 6.28}, {0, 0, 1}, {}, 0.01);
    CHECK(x.theta == doctest::Approx(0.006814692820413523).epsilon(1e-12));
}

TEST_CASE("wrap_angle stays in [0, 2 pi)") {
    for (double t : {-1e-300, -0.0, -kTwoPi, kTwoPi, 3 * kTwoPi + 0.5, -7.5, 1e6}) {
        const double w = wrap_angle(t);
        CHECK(w >= 0.0);
        CHECK(w < kTwoPi);
    }
    CHECK(wrap_angle(-0.5) == doctest::Approx(kTwoPi - 0.5));
}

TEST_CASE("step rejects bad input") {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(step({nan, 0, 0}, {}, {}, 0.01), InvalidArgument);
    CHECK_THROWS_AS(step({}, {0, std::numeric_limits<double>::infinity(), 0}, {}, 0.01), InvalidArgument);
    CHECK_THROWS_AS(step({}, {}, {0, 0, nan}, 0.01), InvalidArgument);
    CHECK_THROWS_AS(step({}, {}, {}, 0.0), InvalidArgument);
    CHECK_THROWS_AS(step({}, {}, {}, -0.01), InvalidArgument);
}

TEST_CASE("step is affine in the command") {
    const RomState x{0.3, -1.2, 1.0};
    const Command u1{0.2, -0.1, 0.3}, u2{0.05, 0.4, -0.2};
    const Disturbance d{0.01, 0.02, 0.0};
    const double dt = 0.01;
    const RomState a = step(x, {u1.vx + u2.vx, u1.vy + u2.vy, u1.omega + u2.omega}, d, dt);
    const RomState b = step(x, u1, d, dt);
    CHECK(a.px - b.px == doctest::Approx(dt * u2.vx));
    CHECK(a.py - b.py == doctest::Approx(dt * u2.vy));
    CHECK(a.theta - b.theta == doctest::Approx(dt * u2.omega));
}

TEST_CASE("two half steps equal one full step without disturbance") {
    const RomState x{1.0, 2.0, 0.5};
    const Command u{0.3, -0.7, 0.2};
    const RomState full = step(x, u, {}, 0.02);
    const RomState half = step(step(x, u, {}, 0.01), u, {}, 0.01);
    CHECK(half.px == doctest::Approx(full.px));
    CHECK(half.py == doctest::Approx(full.py));
    CHECK(half.theta == doctest::Approx(full.theta));
}

TEST_CASE("history window is a bounded FIFO") {
    HistoryWindow w(4);
    CHECK(w.empty());
    w = push_history(w, {1, 0, 0}, {});
    CHECK(w.size() == 1);
    for (int i = 2; i <= 5; ++i) w.push({double(i), 0, 0}, {double(i), 0, 0});
    REQUIRE(w.size() == 4);
    CHECK(w.pushed() == 5);
    for (int i = 0; i < 4; ++i) {
        CHECK(w.states()[i].px == i + 2);
        CHECK(w.commands()[i].vx == i + 2);
    }
}

TEST_CASE("push_history leaves its argument alone") {
    HistoryWindow w(2);
    const HistoryWindow w2 = push_history(w, {1, 2, 3}, {4, 5, 6});
    CHECK(w.size() == 0);
    CHECK(w2.size() == 1);
}
