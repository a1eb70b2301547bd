#pragma once

#include "shield/rom.hpp"

namespace shield {

/// Command minimizing E||x_des_next - x_{k+1}||^2 for the single integrator:
/// (x_des_next - x)/dt - E[d]. The yaw increment is taken along the shorter arc.
Command optimal_command(const RomState& x, const RomState& x_des_next, const Disturbance& mean_d, double dt);

/// u_cmd - E[d]
Command adjust_command(const Command& u_cmd, const Disturbance& mean_d);

}  // namespace shield
