#include "shield/rom.hpp"

#include <cmath>

#include "shield/errors.hpp"

namespace shield {

double wrap_angle(double theta) {
    double w = std::fmod(theta, kTwoPi);
    if (w < 0.0) w += kTwoPi;
    // fmod of a tiny negative value can round back up to exactly 2*pi
    if (w >= kTwoPi) w = 0.0;
    return w;
}

RomState step(const RomState& x, const Command& u, const Disturbance& d, double dt) {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidArgument("step: dt must be positive and finite");
    if (!x.vec().allFinite() || !u.vec().allFinite() || !d.vec().allFinite())
        throw InvalidArgument("step: non-finite state, command or disturbance");
    return {x.px + dt * (u.vx + d.dx),
            x.py + dt * (u.vy + d.dy),
            wrap_angle(x.theta + dt * (u.omega + d.dtheta))};
}

HistoryWindow::HistoryWindow(std::size_t capacity) : capacity_(capacity) {
    if (capacity_ == 0) throw InvalidArgument("HistoryWindow: capacity must be >= 1");
}

void HistoryWindow::push(const RomState& x, const Command& u) {
    states_.push_back(x);
    commands_.push_back(u);
    ++pushed_;
    while (states_.size() > capacity_) {
        states_.pop_front();
        commands_.pop_front();
    }
}

HistoryWindow push_history(HistoryWindow w, const RomState& x, const Command& u) {
    w.push(x, u);
    return w;
}

}  // namespace shield
