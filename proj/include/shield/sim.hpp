#pragma once

// Monte Carlo harness: randomized obstacle fields, closed-loop rollouts of
// nominal command -> safety filter -> single integrator with sampled
// residuals, and the violation-rate / progress metrics.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "shield/barrier.hpp"
#include "shield/disturbance.hpp"
#include "shield/filter.hpp"
#include "shield/planner.hpp"
#include "shield/rom.hpp"

namespace shield {

enum class DisturbanceKind { None, Gaussian, StudentT };

struct DisturbanceSpec {
    DisturbanceKind kind = DisturbanceKind::StudentT;
    double dof = 3.0;
    /// Gaussian covariance or Student-t scale matrix, velocity level.
    Eigen::Matrix3d scale = Eigen::Vector3d(0.04, 0.04, 0.01).asDiagonal();
    double clip_radius = 1.0;
    Eigen::Vector3d bias = Eigen::Vector3d::Zero();
};

std::unique_ptr<DisturbanceModel> make_model(const DisturbanceSpec& spec);

/// How the filter obtains its residual moments.
enum class FilterModelKind { Matched, Zero, Decoder };

struct FilterModelSpec {
    FilterModelKind kind = FilterModelKind::Matched;
    std::string weights_path;  ///< for Decoder
    std::size_t samples = DecoderModel::kDefaultSamples;
};

struct ObstacleRandomization {
    int count_min = 1;
    int count_max = 4;
    Eigen::Vector2d region_lo{1.5, -1.0};
    Eigen::Vector2d region_hi{8.5, 1.0};
    double obstacle_radius_min = 0.2;
    double obstacle_radius_max = 0.5;
    double robot_radius_min = 0.2;
    double robot_radius_max = 0.4;
    double start_clearance = 0.3;  ///< minimum sdf at the start state
    double min_gap = 1.0;          ///< minimum distance between inflated discs
};

enum class NominalKind { Constant, Planner };

struct PlannerSettings {
    Eigen::Vector2d goal{10.0, 0.0};
    Eigen::Vector2d lower{-1.0, -3.0};
    Eigen::Vector2d upper{12.0, 3.0};
    double resolution = 0.1;
    double waypoint_radius = kWaypointRadius;
};

/// Everything needed to generate and run trials.
struct SimConfig {
    FilterConfig filter;
    DisturbanceSpec disturbance;
    FilterModelSpec filter_model;
    ObstacleRandomization layout;
    std::optional<ObstacleSet> fixed_obstacles;
    RomState start;
    Eigen::Vector2d direction{1.0, 0.0};
    double speed = 0.5;
    std::size_t steps = 2000;
    std::size_t trials = 100;
    std::uint64_t seed = 1;
    std::vector<double> p_values{1e-6, 1e-4, 1e-2, 0.1, 0.3};
    NominalKind nominal = NominalKind::Constant;
    PlannerSettings planner;
    std::size_t parallel = 0;  ///< worker threads; 0 = hardware concurrency

    void validate() const;
};

/// A fully determined trial.
struct Scenario {
    ObstacleSet obstacles;
    RomState start;
    Eigen::Vector2d direction{1.0, 0.0};
    double speed = 0.5;
    std::size_t steps = 2000;
    FilterConfig filter;
    DisturbanceSpec disturbance;
    FilterModelSpec filter_model;
    NominalKind nominal = NominalKind::Constant;
    PlannerSettings planner;
    std::uint64_t noise_seed = 0;
};

/// Random obstacle field; the start state keeps `start_clearance` from every disc.
ObstacleSet random_obstacles(const ObstacleRandomization& r, const RomState& start, std::uint64_t seed);

/// Trial `trial` of sweep point `p_index`: layout from (seed, trial), noise from (seed, p_index, trial).
Scenario make_scenario(const SimConfig& cfg, std::size_t p_index, std::size_t trial);

struct StepLog {
    std::size_t step = 0;
    RomState x;  ///< state after applying u_safe
    Command u_cmd;
    Command u_safe;
    double h = 0.0;  ///< h_smooth of x (lambda when there are no obstacles)
    double alpha = 0.0;
    double margin = 0.0;
    bool violated = false;
    bool active = false;
    bool infeasible = false;
};

struct TrialResult {
    std::vector<StepLog> log;
    std::size_t steps = 0;
    std::size_t violations = 0;  ///< steps with h < 0
    double distance = 0.0;       ///< progress along the commanded direction
    double ledger_total = 0.0;
    std::size_t ledger_intervals = 0;
    std::size_t infeasible_steps = 0;
};

/// The filter's model for a scenario (matched analytic, zero, or decoder).
std::unique_ptr<DisturbanceModel> make_filter_model(const Scenario& s);

TrialResult run_trial(const Scenario& s, bool keep_log = true);

/// Violating steps over all steps.
double p_failure(const std::vector<TrialResult>& results);

struct SweepRow {
    double P = 0.0;
    double p_failure = 0.0;
    double mean_distance = 0.0;
    double stderr_distance = 0.0;
    double mean_ledger_total = 0.0;
    double exit_fraction = 0.0;  ///< trials with at least one violation
    std::vector<double> distances;
};

/// Aggregates the trials of one sweep point.
SweepRow summarize(double P, const std::vector<TrialResult>& trials);

/// Runs all trials of all sweep points. Results do not depend on `parallel`.
std::vector<SweepRow> sweep(const SimConfig& cfg, const std::vector<double>& p_values, std::size_t trials,
                            std::size_t parallel);

/// Runs `trials` trials at p_values[p_index]; trial order of the result is fixed.
std::vector<TrialResult> run_trials(const SimConfig& cfg, std::size_t p_index, std::size_t trials,
                                    std::size_t parallel, bool keep_log);

std::string trajectory_csv(const TrialResult& r, const std::string& header_comment = {});
std::string sweep_csv(const std::vector<SweepRow>& rows, const std::string& header_comment = {});

}  // namespace shield
