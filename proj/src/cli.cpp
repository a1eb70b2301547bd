#include "shield/cli.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "shield/config.hpp"
#include "shield/errors.hpp"
#include "shield/io.hpp"
#include "shield/risk.hpp"
#include "shield/sim.hpp"

namespace shield {

namespace fs = std::filesystem;

namespace {

/// Carries an exit code out of a subcommand.
struct ExitError : std::runtime_error {
    ExitError(int code, const std::string& msg) : std::runtime_error(msg), code(code) {}
    int code;
};

struct CommonOptions {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> trials;
    std::optional<std::size_t> steps;
    std::optional<std::size_t> parallel;
    std::string risk_p;
    std::string out_dir = "out";
};

void add_common(CLI::App* app, CommonOptions& o) {
    app->add_option("--config", o.config, "JSON run configuration (default: $" + std::string(kConfigEnvVar) + ")");
    app->add_option("--seed", o.seed, "Base seed");
    app->add_option("--trials", o.trials, "Trials per risk level");
    app->add_option("--steps", o.steps, "Steps per trial");
    app->add_option("--risk-p", o.risk_p, "Comma-separated target exit probabilities");
    app->add_option("--parallel", o.parallel, "Worker threads (0 = all cores)");
    app->add_option("--out-dir", o.out_dir, "Output directory");
}

std::vector<double> parse_list(const std::string& text, const char* what) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            const double v = std::stod(item, &used);
            if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(item);
            out.push_back(v);
        } catch (const std::exception&) {
            throw ExitError(kExitConfig, std::string(what) + ": cannot parse '" + item + "'");
        }
    }
    if (out.empty()) throw ExitError(kExitConfig, std::string(what) + ": empty list");
    return out;
}

SimConfig resolve_config(const CommonOptions& o) {
    SimConfig cfg;
    try {
        std::string path = o.config;
        if (path.empty())
            if (const char* env = std::getenv(kConfigEnvVar)) path = env;
        if (!path.empty()) cfg = load_config(path);
        if (o.seed) cfg.seed = *o.seed;
        if (o.trials) cfg.trials = *o.trials;
        if (o.steps) cfg.steps = *o.steps;
        if (o.parallel) cfg.parallel = *o.parallel;
        if (!o.risk_p.empty()) cfg.p_values = parse_list(o.risk_p, "--risk-p");
        cfg.validate();
    } catch (const ConfigError& e) {
        throw ExitError(kExitConfig, e.what());
    } catch (const std::invalid_argument& e) {
        throw ExitError(kExitConfig, e.what());
    } catch (const ModelFormatError& e) {
        throw ExitError(kExitConfig, e.what());
    }
    return cfg;
}

std::string provenance(const SimConfig& cfg) {
    return "config_hash=" + config_hash(cfg) + " schema=" + kConfigSchema;
}

void write_out(const fs::path& path, const std::string& content) {
    try {
        if (path.has_parent_path()) fs::create_directories(path.parent_path());
        write_file_atomic(path, content);
    } catch (const std::exception& e) {
        throw ExitError(kExitIo, e.what());
    }
}

/// Runs trials, mapping model-file and argument problems to exit codes.
template <class Fn>
auto guarded(Fn&& fn) {
    try {
        return fn();
    } catch (const MissingFileError& e) {
        throw ExitError(kExitIo, e.what());
    } catch (const ModelFormatError& e) {
        throw ExitError(kExitConfig, e.what());
    } catch (const std::invalid_argument& e) {
        throw ExitError(kExitConfig, e.what());
    }
}

int cmd_simulate(const CommonOptions& o, bool trajectories, std::ostream& out) {
    const SimConfig cfg = resolve_config(o);
    const fs::path dir = o.out_dir;
    const std::string header = provenance(cfg);
    const auto results = guarded([&] { return run_trials(cfg, 0, cfg.trials, cfg.parallel, trajectories); });
    const SweepRow row = summarize(cfg.p_values.front(), results);

    write_out(dir / "config.json", dump_config(cfg));
    if (trajectories) {
        for (std::size_t t = 0; t < results.size(); ++t) {
            std::ostringstream name;
            name << "trial_" << std::setw(4) << std::setfill('0') << t << ".csv";
            write_out(dir / "trajectories" / name.str(), trajectory_csv(results[t], header));
        }
    }
    write_out(dir / "summary.csv", sweep_csv({row}, header));
    out << "P=" << format_double(row.P) << " p_failure=" << format_double(row.p_failure)
        << " mean_distance=" << format_double(row.mean_distance) << '\n';
    return kExitOk;
}

int cmd_sweep(const CommonOptions& o, std::ostream& out) {
    const SimConfig cfg = resolve_config(o);
    const fs::path dir = o.out_dir;
    const auto rows = guarded([&] { return sweep(cfg, cfg.p_values, cfg.trials, cfg.parallel); });
    write_out(dir / "config.json", dump_config(cfg));
    write_out(dir / "sweep.csv", sweep_csv(rows, provenance(cfg)));
    for (const auto& r : rows)
        out << "P=" << format_double(r.P) << " p_failure=" << format_double(r.p_failure)
            << " mean_distance=" << format_double(r.mean_distance) << '\n';
    return kExitOk;
}

struct AlphaTableOptions {
    std::string p_list = "0.0001,0.001,0.01,0.1,0.3";
    std::string sigma_list = "0.001,0.01,0.1";
    int K = 10;
    double h0 = 10.0;
    double delta = 0.01;
    std::string out = "alpha_table.csv";
    std::string curve;
};

int cmd_alpha_table(const AlphaTableOptions& o, std::ostream& err) {
    const auto ps = parse_list(o.p_list, "--p-list");
    const auto sigmas = parse_list(o.sigma_list, "--sigma-list");
    if (o.K < 1 || !(o.h0 >= 0.0) || !(o.delta > 0.0) || !std::isfinite(o.h0) || !std::isfinite(o.delta))
        throw ExitError(kExitConfig, "alpha-table: need K >= 1, finite h0 >= 0 and delta > 0");
    for (double p : ps)
        if (!(p > 0.0 && p < 1.0)) throw ExitError(kExitConfig, "alpha-table: every P must lie in (0, 1)");
    for (double s : sigmas)
        if (!(s > 0.0) || !std::isfinite(s)) throw ExitError(kExitConfig, "alpha-table: every sigma must be > 0");

    std::ostringstream os;
    os << "sigma,P,K,h0,delta,alpha,bound\n";
    for (double s : sigmas) {
        for (double p : ps) {
            os << format_double(s) << ',' << format_double(p) << ',' << o.K << ',' << format_double(o.h0) << ','
               << format_double(o.delta) << ',';
            try {
                const auto sol = solve_alpha_detailed(p, o.K, o.h0, o.delta, s);
                os << format_double(sol.alpha) << ',' << format_double(sol.bound) << '\n';
            } catch (const InfeasibleRisk&) {
                err << "warning: no alpha meets P=" << format_double(p) << " at sigma=" << format_double(s) << '\n';
                os << ",\n";
            }
        }
    }
    write_out(o.out, os.str());

    if (!o.curve.empty()) {
        std::ostringstream cs;
        cs << "sigma,alpha,bound\n";
        constexpr int kPoints = 199;
        for (double s : sigmas)
            for (int i = 1; i <= kPoints; ++i) {
                const double a = static_cast<double>(i) / (kPoints + 1);
                cs << format_double(s) << ',' << format_double(a) << ','
                   << format_double(freedman_bound(a, o.K, o.h0, o.delta, s)) << '\n';
            }
        write_out(o.curve, cs.str());
    }
    return kExitOk;
}

struct ScriptRow {
    double t;
    Command u;
};

std::vector<ScriptRow> parse_script(const std::string& text) {
    std::vector<ScriptRow> rows;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto first = line.find_first_not_of(" \t");
        if (first == std::string::npos || line[first] == '#') continue;
        if (rows.empty() && line.compare(first, 1, "t") == 0) continue;  // header
        std::vector<double> v;
        try {
            v = parse_list(line, "script");
        } catch (const ExitError&) {
            throw ExitError(kExitConfig, "script line " + std::to_string(lineno) + ": malformed");
        }
        if (v.size() != 4) throw ExitError(kExitConfig, "script line " + std::to_string(lineno) + ": expected 4 fields");
        for (double x : v)
            if (!std::isfinite(x)) throw ExitError(kExitConfig, "script line " + std::to_string(lineno) + ": non-finite");
        if (!rows.empty() && v[0] < rows.back().t)
            throw ExitError(kExitConfig, "script line " + std::to_string(lineno) + ": time goes backwards");
        rows.push_back({v[0], {v[1], v[2], v[3]}});
    }
    return rows;
}

int cmd_filter_trace(const CommonOptions& o, const std::string& script_path, std::ostream& out) {
    const SimConfig cfg = resolve_config(o);
    std::string text;
    try {
        text = read_file(script_path);
    } catch (const std::exception& e) {
        throw ExitError(kExitIo, e.what());
    }
    const auto script = parse_script(text);
    const Scenario s = make_scenario(cfg, 0, 0);
    const auto truth = make_model(s.disturbance);
    const auto model = guarded([&] { return make_filter_model(s); });
    FilterState state(s.filter);
    Rng rng(s.noise_seed);

    std::ostringstream os;
    os << "# " << provenance(cfg) << '\n';
    os << "step,t,x,y,theta,u_cmd_vx,u_cmd_vy,u_cmd_omega,u_safe_vx,u_safe_vy,u_safe_omega,h,alpha,margin,active,"
          "infeasible,violated\n";
    RomState x = s.start;
    for (std::size_t k = 0; k < script.size(); ++k) {
        const auto r = filter_step(state, *model, x, script[k].u, s.obstacles, s.filter);
        const bool violated = !s.obstacles.empty() && h_smooth(x.position(), s.obstacles, s.filter.barrier) < 0.0;
        os << k << ',' << format_double(script[k].t) << ',' << format_double(x.px) << ',' << format_double(x.py)
           << ',' << format_double(x.theta) << ',' << format_double(script[k].u.vx) << ','
           << format_double(script[k].u.vy) << ',' << format_double(script[k].u.omega) << ','
           << format_double(r.u_safe.vx) << ',' << format_double(r.u_safe.vy) << ',' << format_double(r.u_safe.omega)
           << ',' << format_double(r.diag.h) << ',' << format_double(r.diag.alpha) << ','
           << format_double(r.diag.margin) << ',' << (r.diag.active ? 1 : 0) << ',' << (r.diag.infeasible ? 1 : 0)
           << ',' << (violated ? 1 : 0) << '\n';
        x = step(x, r.u_safe, truth->sample(state.history, rng), s.filter.dt);
    }
    write_out(fs::path(o.out_dir) / "trace.csv", os.str());
    out << "rows=" << script.size() << '\n';
    return kExitOk;
}

int cmd_validate_weights(const std::string& weights_path, const std::string& probe_path, double tol,
                         std::ostream& out, std::ostream& err) {
    DecoderWeights w;
    try {
        w = load_weights(weights_path);
    } catch (const MissingFileError& e) {
        throw ExitError(kExitIo, e.what());
    } catch (const ModelFormatError& e) {
        throw ExitError(kExitConfig, e.what());
    }

    std::string text;
    try {
        text = read_file(probe_path);
    } catch (const std::exception& e) {
        throw ExitError(kExitIo, e.what());
    }

    std::size_t count = 0;
    double worst = 0.0;
    try {
        const auto j = nlohmann::json::parse(text);
        if (j.at("format_version").get<std::string>() != "shield-cvae-probe-1")
            throw ExitError(kExitConfig, "probe: unsupported format_version");
        for (const auto& p : j.at("probes")) {
            const auto states = p.at("states").get<std::vector<std::array<double, 3>>>();
            const auto commands = p.at("commands").get<std::vector<std::array<double, 3>>>();
            const auto z = p.at("z").get<std::vector<double>>();
            const auto expected = p.at("output").get<std::array<double, 3>>();
            if (states.size() != commands.size()) throw ExitError(kExitConfig, "probe: states/commands length differ");
            HistoryWindow window(w.context_len);
            for (std::size_t i = 0; i < states.size(); ++i)
                window.push({states[i][0], states[i][1], states[i][2]},
                            {commands[i][0], commands[i][1], commands[i][2]});
            const Disturbance d =
                decoder_infer(w, window, Eigen::Map<const Eigen::VectorXd>(z.data(), static_cast<Eigen::Index>(z.size())));
            const double diff = std::max({std::abs(d.dx - expected[0]), std::abs(d.dy - expected[1]),
                                          std::abs(d.dtheta - expected[2])});
            if (!(diff <= tol)) err << "probe " << count << ": max abs error " << format_double(diff) << '\n';
            worst = std::max(worst, std::isnan(diff) ? std::numeric_limits<double>::infinity() : diff);
            ++count;
        }
    } catch (const nlohmann::json::exception& e) {
        throw ExitError(kExitConfig, std::string("probe: ") + e.what());
    } catch (const ModelFormatError& e) {
        throw ExitError(kExitConfig, std::string("probe: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw ExitError(kExitConfig, std::string("probe: ") + e.what());
    }

    out << "probes=" << count << " max_abs_error=" << format_double(worst) << '\n';
    return worst <= tol ? kExitOk : kExitFailure;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Stochastic safety filter simulation harness"};
    app.require_subcommand(1);

    CommonOptions sim_opts, sweep_opts, trace_opts;
    bool no_trajectories = false;
    auto* sim = app.add_subcommand("simulate", "Run trials at the first risk level");
    add_common(sim, sim_opts);
    sim->add_flag("--no-trajectories", no_trajectories, "Skip per-trial trajectory CSVs");

    auto* sw = app.add_subcommand("sweep", "Run trials at every risk level");
    add_common(sw, sweep_opts);

    AlphaTableOptions at;
    auto* alpha = app.add_subcommand("alpha-table", "Tabulate the decay rate over (sigma, P)");
    alpha->add_option("--p-list", at.p_list, "Comma-separated P values");
    alpha->add_option("--sigma-list", at.sigma_list, "Comma-separated sigma values");
    alpha->add_option("--k", at.K, "Interval length K");
    alpha->add_option("--h0", at.h0, "Initial barrier value");
    alpha->add_option("--delta", at.delta, "Jump bound");
    alpha->add_option("--out", at.out, "Output CSV");
    alpha->add_option("--curve", at.curve, "Also write the (alpha, bound) curve to this CSV");

    std::string script;
    auto* trace = app.add_subcommand("filter-trace", "Replay a command script through the filter");
    add_common(trace, trace_opts);
    trace->add_option("--script", script, "CSV of t,vx,vy,omega")->required();

    std::string weights, probe;
    double tol = 1e-5;
    auto* vw = app.add_subcommand("validate-weights", "Check a decoder weight file against a probe set");
    vw->add_option("--weights", weights, "shield-cvae-1 weight file")->required();
    vw->add_option("--probe", probe, "Probe JSON")->required();
    vw->add_option("--tol", tol, "Absolute tolerance");

    std::vector<std::string> rev(args.size() > 1 ? args.begin() + 1 : args.end(), args.end());
    std::reverse(rev.begin(), rev.end());
    try {
        app.parse(rev);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << e.what() << '\n';
        return kExitConfig;
    }

    try {
        if (*sim) return cmd_simulate(sim_opts, !no_trajectories, out);
        if (*sw) return cmd_sweep(sweep_opts, out);
        if (*alpha) return cmd_alpha_table(at, err);
        if (*trace) return cmd_filter_trace(trace_opts, script, out);
        if (*vw) return cmd_validate_weights(weights, probe, tol, out, err);
    } catch (const ExitError& e) {
        err << "error: " << e.what() << '\n';
        return e.code;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitFailure;
    }
    return kExitConfig;
}

}  // namespace shield
