#pragma once

// Planar single-integrator reduced-order model: state (p_x, p_y, theta),
// velocity command (v_x, v_y, omega) and a velocity-level residual d, with
//   x_{k+1} = x_k + dt * (u_k + d_k).

#include <cstddef>
#include <cstdint>
#include <deque>

#include <Eigen/Core>

namespace shield {

inline constexpr double kTwoPi = 6.283185307179586476925286766559;

struct RomState {
    double px = 0.0;
    double py = 0.0;
    double theta = 0.0;  ///< radians, kept in [0, 2*pi)

    Eigen::Vector2d position() const { return {px, py}; }
    Eigen::Vector3d vec() const { return {px, py, theta}; }
    static RomState from_vec(const Eigen::Vector3d& v) { return {v.x(), v.y(), v.z()}; }

    bool operator==(const RomState&) const = default;
};

struct Command {
    double vx = 0.0;
    double vy = 0.0;
    double omega = 0.0;

    Eigen::Vector3d vec() const { return {vx, vy, omega}; }
    static Command from_vec(const Eigen::Vector3d& v) { return {v.x(), v.y(), v.z()}; }

    bool operator==(const Command&) const = default;
};

/// Velocity-level residual between the closed loop and the single integrator.
struct Disturbance {
    double dx = 0.0;
    double dy = 0.0;
    double dtheta = 0.0;

    Eigen::Vector3d vec() const { return {dx, dy, dtheta}; }
    static Disturbance from_vec(const Eigen::Vector3d& v) { return {v.x(), v.y(), v.z()}; }

    bool operator==(const Disturbance&) const = default;
};

/// Wraps an angle into [0, 2*pi).
double wrap_angle(double theta);

/// One Euler step of the single integrator. Throws InvalidArgument on
/// non-finite input or dt <= 0.
RomState step(const RomState& x, const Command& u, const Disturbance& d, double dt);

/// Fixed-capacity FIFO of (state, command) pairs, newest last.
class HistoryWindow {
public:
    explicit HistoryWindow(std::size_t capacity = 4);

    void push(const RomState& x, const Command& u);

    std::size_t capacity() const { return capacity_; }
    std::size_t size() const { return states_.size(); }
    bool empty() const { return states_.empty(); }
    /// Number of pairs ever pushed (the step index of the newest entry + 1).
    std::uint64_t pushed() const { return pushed_; }

    const std::deque<RomState>& states() const { return states_; }
    const std::deque<Command>& commands() const { return commands_; }

private:
    std::size_t capacity_;
    std::uint64_t pushed_ = 0;
    std::deque<RomState> states_;
    std::deque<Command> commands_;
};

/// Value-returning form of HistoryWindow::push.
HistoryWindow push_history(HistoryWindow w, const RomState& x, const Command& u);

}  // namespace shield
