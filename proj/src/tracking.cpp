#include "shield/tracking.hpp"

#include <cmath>

#include "shield/errors.hpp"

namespace shield {

Command optimal_command(const RomState& x, const RomState& x_des_next, const Disturbance& mean_d, double dt) {
    if (!(dt > 0.0)) throw InvalidArgument("optimal_command: dt must be positive");
    double dyaw = std::remainder(x_des_next.theta - x.theta, kTwoPi);
    return {(x_des_next.px - x.px) / dt - mean_d.dx,
            (x_des_next.py - x.py) / dt - mean_d.dy,
            dyaw / dt - mean_d.dtheta};
}

Command adjust_command(const Command& u_cmd, const Disturbance& mean_d) {
    return {u_cmd.vx - mean_d.dx, u_cmd.vy - mean_d.dy, u_cmd.omega - mean_d.dtheta};
}

}  // namespace shield
