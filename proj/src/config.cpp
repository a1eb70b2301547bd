#include "shield/config.hpp"

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <limits>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "shield/io.hpp"

namespace shield {

using json = nlohmann::ordered_json;

namespace {

void reject_unknown(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
    if (!j.is_object()) throw ConfigError(where + ": expected an object");
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [key, _] : j.items())
        if (!ok.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
}

double get_number(const json& j, const std::string& where) {
    // infinity is written as the string "inf"
    if (j.is_string() && j.get<std::string>() == "inf") return std::numeric_limits<double>::infinity();
    if (!j.is_number()) throw ConfigError(where + ": expected a number");
    return j.get<double>();
}

json put_number(double v) {
    if (std::isinf(v) && v > 0) return "inf";
    return v;
}

std::uint64_t get_count(const json& j, const std::string& where) {
    if (!j.is_number_unsigned()) throw ConfigError(where + ": expected a non-negative integer");
    return j.get<std::uint64_t>();
}

template <int N>
Eigen::Matrix<double, N, 1> get_vec(const json& j, const std::string& where) {
    if (!j.is_array() || j.size() != N) throw ConfigError(where + ": expected an array of " + std::to_string(N));
    Eigen::Matrix<double, N, 1> v;
    for (int i = 0; i < N; ++i) v[i] = get_number(j[static_cast<std::size_t>(i)], where);
    return v;
}

template <int N>
json put_vec(const Eigen::Matrix<double, N, 1>& v) {
    json a = json::array();
    for (int i = 0; i < N; ++i) a.push_back(put_number(v[i]));
    return a;
}

Eigen::Matrix3d get_mat3(const json& j, const std::string& where) {
    if (!j.is_array() || j.size() != 3) throw ConfigError(where + ": expected a 3x3 array");
    Eigen::Matrix3d m;
    for (int r = 0; r < 3; ++r) m.row(r) = get_vec<3>(j[static_cast<std::size_t>(r)], where).transpose();
    return m;
}

json put_mat3(const Eigen::Matrix3d& m) {
    json a = json::array();
    for (int r = 0; r < 3; ++r) a.push_back(put_vec<3>(m.row(r).transpose()));
    return a;
}

template <class E>
E get_enum(const json& j, const std::string& where, std::initializer_list<std::pair<const char*, E>> names) {
    if (j.is_string())
        for (const auto& [n, e] : names)
            if (j.get<std::string>() == n) return e;
    throw ConfigError(where + ": unrecognized value " + j.dump());
}

const char* disturbance_name(DisturbanceKind k) {
    switch (k) {
        case DisturbanceKind::None: return "none";
        case DisturbanceKind::Gaussian: return "gaussian";
        case DisturbanceKind::StudentT: return "student_t";
    }
    return "?";
}

const char* filter_model_name(FilterModelKind k) {
    switch (k) {
        case FilterModelKind::Matched: return "matched";
        case FilterModelKind::Zero: return "zero";
        case FilterModelKind::Decoder: return "decoder";
    }
    return "?";
}

void read_filter(const json& j, FilterConfig& f) {
    reject_unknown(j, "filter", {"dt", "input_box", "barrier", "risk", "context_len"});
    if (j.contains("dt")) f.dt = get_number(j["dt"], "filter.dt");
    if (j.contains("context_len")) f.context_len = get_count(j["context_len"], "filter.context_len");
    if (j.contains("input_box")) {
        const auto& b = j["input_box"];
        reject_unknown(b, "filter.input_box", {"lo", "hi"});
        if (b.contains("lo")) f.input_box.lo = get_vec<3>(b["lo"], "filter.input_box.lo");
        if (b.contains("hi")) f.input_box.hi = get_vec<3>(b["hi"], "filter.input_box.hi");
    }
    if (j.contains("barrier")) {
        const auto& b = j["barrier"];
        reject_unknown(b, "filter.barrier", {"lambda", "gamma"});
        if (b.contains("lambda")) f.barrier.lambda = get_number(b["lambda"], "filter.barrier.lambda");
        if (b.contains("gamma")) f.barrier.gamma = get_number(b["gamma"], "filter.barrier.gamma");
    }
    if (j.contains("risk")) {
        const auto& r = j["risk"];
        reject_unknown(r, "filter.risk", {"P", "K", "delta", "sigma", "alpha"});
        if (r.contains("P")) f.risk.P = get_number(r["P"], "filter.risk.P");
        if (r.contains("K")) f.risk.K = static_cast<int>(get_count(r["K"], "filter.risk.K"));
        if (r.contains("delta")) f.risk.delta = get_number(r["delta"], "filter.risk.delta");
        if (r.contains("sigma")) f.risk.sigma = get_number(r["sigma"], "filter.risk.sigma");
        if (r.contains("alpha")) f.risk.alpha = get_number(r["alpha"], "filter.risk.alpha");
    }
}

json write_filter(const FilterConfig& f) {
    json j;
    j["dt"] = f.dt;
    j["context_len"] = f.context_len;
    j["input_box"]["lo"] = put_vec<3>(f.input_box.lo);
    j["input_box"]["hi"] = put_vec<3>(f.input_box.hi);
    j["barrier"]["lambda"] = f.barrier.lambda;
    j["barrier"]["gamma"] = f.barrier.gamma;
    j["risk"]["P"] = f.risk.P;
    j["risk"]["K"] = f.risk.K;
    j["risk"]["delta"] = f.risk.delta;
    j["risk"]["sigma"] = f.risk.sigma;
    j["risk"]["alpha"] = f.risk.alpha;
    return j;
}

}  // namespace

SimConfig parse_config(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: malformed JSON: ") + e.what());
    }
    reject_unknown(j, "config",
                   {"schema_version", "seed", "trials", "steps", "parallel", "speed", "direction", "start", "p_values",
                    "nominal", "planner", "filter", "disturbance", "filter_model", "layout", "obstacles"});
    if (!j.contains("schema_version") || j["schema_version"] != kConfigSchema)
        throw ConfigError(std::string("config: schema_version must be \"") + kConfigSchema + "\"");

    SimConfig c;
    try {
        if (j.contains("seed")) c.seed = get_count(j["seed"], "seed");
        if (j.contains("trials")) c.trials = get_count(j["trials"], "trials");
        if (j.contains("steps")) c.steps = get_count(j["steps"], "steps");
        if (j.contains("parallel")) c.parallel = get_count(j["parallel"], "parallel");
        if (j.contains("speed")) c.speed = get_number(j["speed"], "speed");
        if (j.contains("direction")) c.direction = get_vec<2>(j["direction"], "direction");
        if (j.contains("start")) c.start = RomState::from_vec(get_vec<3>(j["start"], "start"));
        if (j.contains("p_values")) {
            if (!j["p_values"].is_array()) throw ConfigError("p_values: expected an array");
            c.p_values.clear();
            for (const auto& p : j["p_values"]) c.p_values.push_back(get_number(p, "p_values"));
        }
        if (j.contains("nominal"))
            c.nominal = get_enum<NominalKind>(j["nominal"], "nominal",
                                              {{"constant", NominalKind::Constant}, {"planner", NominalKind::Planner}});
        if (j.contains("planner")) {
            const auto& p = j["planner"];
            reject_unknown(p, "planner", {"goal", "lower", "upper", "resolution", "waypoint_radius"});
            if (p.contains("goal")) c.planner.goal = get_vec<2>(p["goal"], "planner.goal");
            if (p.contains("lower")) c.planner.lower = get_vec<2>(p["lower"], "planner.lower");
            if (p.contains("upper")) c.planner.upper = get_vec<2>(p["upper"], "planner.upper");
            if (p.contains("resolution")) c.planner.resolution = get_number(p["resolution"], "planner.resolution");
            if (p.contains("waypoint_radius"))
                c.planner.waypoint_radius = get_number(p["waypoint_radius"], "planner.waypoint_radius");
        }
        if (j.contains("filter")) read_filter(j["filter"], c.filter);
        if (j.contains("disturbance")) {
            const auto& d = j["disturbance"];
            reject_unknown(d, "disturbance", {"kind", "dof", "scale", "clip_radius", "bias"});
            if (d.contains("kind"))
                c.disturbance.kind = get_enum<DisturbanceKind>(d["kind"], "disturbance.kind",
                                                               {{"none", DisturbanceKind::None},
                                                                {"gaussian", DisturbanceKind::Gaussian},
                                                                {"student_t", DisturbanceKind::StudentT}});
            if (d.contains("dof")) c.disturbance.dof = get_number(d["dof"], "disturbance.dof");
            if (d.contains("scale")) c.disturbance.scale = get_mat3(d["scale"], "disturbance.scale");
            if (d.contains("clip_radius")) c.disturbance.clip_radius = get_number(d["clip_radius"], "disturbance.clip_radius");
            if (d.contains("bias")) c.disturbance.bias = get_vec<3>(d["bias"], "disturbance.bias");
        }
        if (j.contains("filter_model")) {
            const auto& m = j["filter_model"];
            reject_unknown(m, "filter_model", {"kind", "weights_path", "samples"});
            if (m.contains("kind"))
                c.filter_model.kind = get_enum<FilterModelKind>(m["kind"], "filter_model.kind",
                                                                {{"matched", FilterModelKind::Matched},
                                                                 {"zero", FilterModelKind::Zero},
                                                                 {"decoder", FilterModelKind::Decoder}});
            if (m.contains("weights_path")) {
                if (!m["weights_path"].is_string()) throw ConfigError("filter_model.weights_path: expected a string");
                c.filter_model.weights_path = m["weights_path"].get<std::string>();
            }
            if (m.contains("samples")) c.filter_model.samples = get_count(m["samples"], "filter_model.samples");
        }
        if (j.contains("layout")) {
            const auto& l = j["layout"];
            reject_unknown(l, "layout",
                           {"count_min", "count_max", "region_lo", "region_hi", "obstacle_radius_min",
                            "obstacle_radius_max", "robot_radius_min", "robot_radius_max", "start_clearance", "min_gap"});
            auto& r = c.layout;
            if (l.contains("count_min")) r.count_min = static_cast<int>(get_count(l["count_min"], "layout.count_min"));
            if (l.contains("count_max")) r.count_max = static_cast<int>(get_count(l["count_max"], "layout.count_max"));
            if (l.contains("region_lo")) r.region_lo = get_vec<2>(l["region_lo"], "layout.region_lo");
            if (l.contains("region_hi")) r.region_hi = get_vec<2>(l["region_hi"], "layout.region_hi");
            if (l.contains("obstacle_radius_min"))
                r.obstacle_radius_min = get_number(l["obstacle_radius_min"], "layout.obstacle_radius_min");
            if (l.contains("obstacle_radius_max"))
                r.obstacle_radius_max = get_number(l["obstacle_radius_max"], "layout.obstacle_radius_max");
            if (l.contains("robot_radius_min"))
                r.robot_radius_min = get_number(l["robot_radius_min"], "layout.robot_radius_min");
            if (l.contains("robot_radius_max"))
                r.robot_radius_max = get_number(l["robot_radius_max"], "layout.robot_radius_max");
            if (l.contains("start_clearance"))
                r.start_clearance = get_number(l["start_clearance"], "layout.start_clearance");
            if (l.contains("min_gap")) r.min_gap = get_number(l["min_gap"], "layout.min_gap");
        }
        if (j.contains("obstacles") && !j["obstacles"].is_null()) {
            if (!j["obstacles"].is_array()) throw ConfigError("obstacles: expected an array");
            ObstacleSet obs;
            for (const auto& o : j["obstacles"]) {
                reject_unknown(o, "obstacles[]", {"center", "radius"});
                if (!o.contains("center") || !o.contains("radius"))
                    throw ConfigError("obstacles[]: center and radius are required");
                obs.push_back({get_vec<2>(o["center"], "obstacles[].center"), get_number(o["radius"], "obstacles[].radius")});
            }
            c.fixed_obstacles = std::move(obs);
        }
        c.validate();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return c;
}

SimConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("config: cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string dump_config(const SimConfig& c) {
    json j;
    j["schema_version"] = kConfigSchema;
    j["seed"] = c.seed;
    j["trials"] = c.trials;
    j["steps"] = c.steps;
    j["parallel"] = c.parallel;
    j["speed"] = c.speed;
    j["direction"] = put_vec<2>(c.direction);
    j["start"] = put_vec<3>(c.start.vec());
    j["p_values"] = json::array();
    for (double p : c.p_values) j["p_values"].push_back(p);
    j["nominal"] = c.nominal == NominalKind::Planner ? "planner" : "constant";
    j["planner"]["goal"] = put_vec<2>(c.planner.goal);
    j["planner"]["lower"] = put_vec<2>(c.planner.lower);
    j["planner"]["upper"] = put_vec<2>(c.planner.upper);
    j["planner"]["resolution"] = c.planner.resolution;
    j["planner"]["waypoint_radius"] = c.planner.waypoint_radius;
    j["filter"] = write_filter(c.filter);
    j["disturbance"]["kind"] = disturbance_name(c.disturbance.kind);
    j["disturbance"]["dof"] = put_number(c.disturbance.dof);
    j["disturbance"]["scale"] = put_mat3(c.disturbance.scale);
    j["disturbance"]["clip_radius"] = put_number(c.disturbance.clip_radius);
    j["disturbance"]["bias"] = put_vec<3>(c.disturbance.bias);
    j["filter_model"]["kind"] = filter_model_name(c.filter_model.kind);
    j["filter_model"]["weights_path"] = c.filter_model.weights_path;
    j["filter_model"]["samples"] = c.filter_model.samples;
    const auto& r = c.layout;
    j["layout"]["count_min"] = r.count_min;
    j["layout"]["count_max"] = r.count_max;
    j["layout"]["region_lo"] = put_vec<2>(r.region_lo);
    j["layout"]["region_hi"] = put_vec<2>(r.region_hi);
    j["layout"]["obstacle_radius_min"] = r.obstacle_radius_min;
    j["layout"]["obstacle_radius_max"] = r.obstacle_radius_max;
    j["layout"]["robot_radius_min"] = r.robot_radius_min;
    j["layout"]["robot_radius_max"] = r.robot_radius_max;
    j["layout"]["start_clearance"] = r.start_clearance;
    j["layout"]["min_gap"] = r.min_gap;
    if (c.fixed_obstacles) {
        j["obstacles"] = json::array();
        for (const auto& o : *c.fixed_obstacles) {
            json oj;
            oj["center"] = put_vec<2>(o.center);
            oj["radius"] = o.radius;
            j["obstacles"].push_back(std::move(oj));
        }
    } else {
        j["obstacles"] = nullptr;
    }
    return j.dump(2) + "\n";
}

std::string config_hash(const SimConfig& cfg) { return fnv1a_hex(dump_config(cfg)); }

}  // namespace shield
