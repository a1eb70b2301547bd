#include "shield/sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <thread>

#include "shield/errors.hpp"
#include "shield/io.hpp"
#include "shield/planner.hpp"
#include "shield/stats.hpp"

namespace shield {

std::unique_ptr<DisturbanceModel> make_model(const DisturbanceSpec& spec) {
    switch (spec.kind) {
        case DisturbanceKind::None:
            return std::make_unique<GaussianModel>(spec.bias, Eigen::Matrix3d::Zero());
        case DisturbanceKind::Gaussian:
            return std::make_unique<GaussianModel>(spec.bias, spec.scale);
        case DisturbanceKind::StudentT:
            return std::make_unique<StudentTModel>(spec.dof, spec.scale, spec.clip_radius, spec.bias);
    }
    throw InvalidArgument("unknown disturbance kind");
}

void SimConfig::validate() const {
    filter.validate();
    if (!(speed > 0.0)) throw InvalidArgument("sim: speed must be positive");
    if (steps < 1) throw InvalidArgument("sim: steps must be >= 1");
    if (trials < 1) throw InvalidArgument("sim: trials must be >= 1");
    if (!(std::abs(direction.norm() - 1.0) < 1e-9)) throw InvalidArgument("sim: direction must be a unit vector");
    if (p_values.empty()) throw InvalidArgument("sim: p_values must not be empty");
    for (double p : p_values)
        if (!(p > 0.0 && p < 1.0)) throw InvalidArgument("sim: every P must lie in (0, 1)");
    if (layout.count_min < 0 || layout.count_max < layout.count_min)
        throw InvalidArgument("sim: obstacle count range is invalid");
    if (!(layout.region_lo.array() <= layout.region_hi.array()).all())
        throw InvalidArgument("sim: obstacle region is invalid");
    if (!(layout.obstacle_radius_min > 0.0) || layout.obstacle_radius_max < layout.obstacle_radius_min ||
        layout.robot_radius_min < 0.0 || layout.robot_radius_max < layout.robot_radius_min || !(layout.min_gap >= 0.0))
        throw InvalidArgument("sim: radius ranges are invalid");
    if (fixed_obstacles)
        for (const auto& o : *fixed_obstacles) shield::validate(o);
    if (filter_model.kind == FilterModelKind::Decoder && filter_model.weights_path.empty())
        throw InvalidArgument("sim: decoder filter model needs a weights path");
    make_model(disturbance);
}

ObstacleSet random_obstacles(const ObstacleRandomization& r, const RomState& start, std::uint64_t seed) {
    Rng rng(seed);
    std::uniform_int_distribution<int> count(r.count_min, r.count_max);
    std::uniform_real_distribution<double> ux(r.region_lo.x(), r.region_hi.x());
    std::uniform_real_distribution<double> uy(r.region_lo.y(), r.region_hi.y());
    std::uniform_real_distribution<double> obstacle_r(r.obstacle_radius_min, r.obstacle_radius_max);
    std::uniform_real_distribution<double> robot_r(r.robot_radius_min, r.robot_radius_max);

    const int n = count(rng);
    const double robot = robot_r(rng);
    ObstacleSet out;
    for (int i = 0; i < n; ++i) {
        for (int attempt = 0; attempt < 1000; ++attempt) {
            Obstacle o{{ux(rng), uy(rng)}, obstacle_r(rng) + robot};
            bool ok = (start.position() - o.center).norm() - o.radius >= r.start_clearance;
            for (const auto& q : out) ok = ok && (q.center - o.center).norm() - q.radius - o.radius >= r.min_gap;
            if (ok) {
                out.push_back(o);
                break;
            }
        }
    }
    return out;
}

Scenario make_scenario(const SimConfig& cfg, std::size_t p_index, std::size_t trial) {
    Scenario s;
    s.obstacles = cfg.fixed_obstacles ? *cfg.fixed_obstacles
                                      : random_obstacles(cfg.layout, cfg.start, derive_seed(cfg.seed, {1, trial}));
    s.start = cfg.start;
    s.direction = cfg.direction;
    s.speed = cfg.speed;
    s.steps = cfg.steps;
    s.filter = cfg.filter;
    s.filter.risk.P = cfg.p_values.at(p_index);
    s.disturbance = cfg.disturbance;
    s.filter_model = cfg.filter_model;
    s.nominal = cfg.nominal;
    s.planner = cfg.planner;
    s.noise_seed = derive_seed(cfg.seed, {2, p_index, trial});
    return s;
}

std::unique_ptr<DisturbanceModel> make_filter_model(const Scenario& s) {
    switch (s.filter_model.kind) {
        case FilterModelKind::Matched:
            return make_model(s.disturbance);
        case FilterModelKind::Zero:
            return std::make_unique<GaussianModel>(GaussianModel::zero());
        case FilterModelKind::Decoder:
            return std::make_unique<DecoderModel>(load_weights(s.filter_model.weights_path), s.filter_model.samples,
                                                  derive_seed(s.noise_seed, {3}));
    }
    throw InvalidArgument("unknown filter model kind");
}

namespace {

std::vector<Eigen::Vector2d> plan_path(const Scenario& s) {
    GridMap map(s.planner.resolution, s.planner.lower, s.planner.upper, s.obstacles);
    try {
        return to_world(map, astar(map, map.cell_of(s.start.position()), map.cell_of(s.planner.goal)));
    } catch (const Unreachable&) {
        // no free path: head straight for the goal and let the filter hold the line
        return {s.planner.goal};
    }
}

}  // namespace

TrialResult run_trial(const Scenario& s, bool keep_log) {
    s.filter.validate();
    const auto truth = make_model(s.disturbance);
    const auto model = make_filter_model(s);
    FilterState state(s.filter);
    Rng rng(s.noise_seed);

    std::vector<Eigen::Vector2d> path;
    if (s.nominal == NominalKind::Planner) path = plan_path(s);

    TrialResult r;
    r.steps = s.steps;
    if (keep_log) r.log.reserve(s.steps);
    RomState x = s.start;
    for (std::size_t k = 0; k < s.steps; ++k) {
        Command u_cmd;
        if (s.nominal == NominalKind::Planner) {
            u_cmd = nominal_velocity(x, path, s.speed, s.planner.waypoint_radius);
        } else {
            u_cmd = {s.speed * s.direction.x(), s.speed * s.direction.y(), 0.0};
        }
        const auto out = filter_step(state, *model, x, u_cmd, s.obstacles, s.filter);
        const Disturbance d = truth->sample(state.history, rng);
        x = step(x, out.u_safe, d, s.filter.dt);
        const double h = s.obstacles.empty() ? s.filter.barrier.lambda
                                             : h_smooth(x.position(), s.obstacles, s.filter.barrier);
        const bool violated = h < 0.0;
        if (violated) ++r.violations;
        if (out.diag.infeasible) ++r.infeasible_steps;
        if (keep_log)
            r.log.push_back({k, x, u_cmd, out.u_safe, h, out.diag.alpha, out.diag.margin, violated, out.diag.active,
                             out.diag.infeasible});
    }
    r.distance = (x.position() - s.start.position()).dot(s.direction);
    r.ledger_total = state.ledger.total();
    r.ledger_intervals = state.ledger.intervals();
    return r;
}

double p_failure(const std::vector<TrialResult>& results) {
    if (results.empty()) throw InvalidArgument("p_failure: no results");
    std::size_t bad = 0;
    std::size_t total = 0;
    for (const auto& r : results) {
        bad += r.violations;
        total += r.steps;
    }
    return total == 0 ? 0.0 : static_cast<double>(bad) / static_cast<double>(total);
}

namespace {

template <class Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn&& fn) {
    if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
    workers = std::min(workers, n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::atomic<bool> failed{false};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n && !failed; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    if (!failed.exchange(true)) error = std::current_exception();
                }
            }
        });
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace

std::vector<TrialResult> run_trials(const SimConfig& cfg, std::size_t p_index, std::size_t trials,
                                    std::size_t parallel, bool keep_log) {
    std::vector<TrialResult> out(trials);
    parallel_for(trials, parallel, [&](std::size_t t) { out[t] = run_trial(make_scenario(cfg, p_index, t), keep_log); });
    return out;
}

std::vector<SweepRow> sweep(const SimConfig& cfg, const std::vector<double>& p_values, std::size_t trials,
                            std::size_t parallel) {
    SimConfig c = cfg;
    c.p_values = p_values;
    c.validate();
    const std::size_t n = p_values.size() * trials;
    std::vector<TrialResult> all(n);
    parallel_for(n, parallel, [&](std::size_t i) {
        all[i] = run_trial(make_scenario(c, i / trials, i % trials), false);
    });

    std::vector<SweepRow> rows;
    for (std::size_t p = 0; p < p_values.size(); ++p) {
        const std::vector<TrialResult> group(all.begin() + static_cast<std::ptrdiff_t>(p * trials),
                                             all.begin() + static_cast<std::ptrdiff_t>((p + 1) * trials));
        rows.push_back(summarize(p_values[p], group));
    }
    return rows;
}

SweepRow summarize(double P, const std::vector<TrialResult>& trials) {
    SweepRow row;
    row.P = P;
    row.p_failure = p_failure(trials);
    std::vector<double> ledger;
    std::size_t exited = 0;
    for (const auto& r : trials) {
        row.distances.push_back(r.distance);
        ledger.push_back(r.ledger_total);
        if (r.violations > 0) ++exited;
    }
    row.mean_distance = mean(row.distances);
    row.stderr_distance = standard_error(row.distances);
    row.mean_ledger_total = mean(ledger);
    row.exit_fraction = static_cast<double>(exited) / static_cast<double>(trials.size());
    return row;
}

std::string trajectory_csv(const TrialResult& r, const std::string& header_comment) {
    std::ostringstream os;
    if (!header_comment.empty()) os << "# " << header_comment << '\n';
    os << "step,x,y,theta,u_cmd_vx,u_cmd_vy,u_cmd_omega,u_safe_vx,u_safe_vy,u_safe_omega,h,alpha,margin,violated\n";
    for (const auto& s : r.log) {
        os << s.step << ',' << format_double(s.x.px) << ',' << format_double(s.x.py) << ','
           << format_double(s.x.theta) << ',' << format_double(s.u_cmd.vx) << ',' << format_double(s.u_cmd.vy) << ','
           << format_double(s.u_cmd.omega) << ',' << format_double(s.u_safe.vx) << ','
           << format_double(s.u_safe.vy) << ',' << format_double(s.u_safe.omega) << ',' << format_double(s.h) << ','
           << format_double(s.alpha) << ',' << format_double(s.margin) << ',' << (s.violated ? 1 : 0) << '\n';
    }
    return os.str();
}

std::string sweep_csv(const std::vector<SweepRow>& rows, const std::string& header_comment) {
    std::ostringstream os;
    if (!header_comment.empty()) os << "# " << header_comment << '\n';
    os << "P,p_failure,mean_distance,stderr_distance\n";
    for (const auto& r : rows)
        os << format_double(r.P) << ',' << format_double(r.p_failure) << ',' << format_double(r.mean_distance) << ','
           << format_double(r.stderr_distance) << '\n';
    return os.str();
}

}  // namespace shield
