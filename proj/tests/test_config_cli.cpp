#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "doctest.h"
#include "shield/cli.hpp"
#include "shield/config.hpp"
#include "shield/io.hpp"
#include "support/decoders.hpp"

using namespace shield;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "shield_test_cli" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run cli(std::vector<std::string> args) {
    args.insert(args.begin(), "shield_cli");
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> ls;
    std::istringstream in(text);
    for (std::string l; std::getline(in, l);) ls.push_back(l);
    return ls;
}

std::vector<std::string> split(const std::string& s, char sep = ',') {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, sep)) out.push_back(cur);
    if (!s.empty() && s.back() == sep) out.emplace_back();
    return out;
}

SimConfig small_config() {
    SimConfig c;
    c.trials = 2;
    c.steps = 50;
    c.parallel = 1;
    c.p_values = {0.01};
    return c;
}

fs::path write_config(const fs::path& dir, const SimConfig& c) {
    const fs::path p = dir / "config.json";
    write_file_atomic(p, dump_config(c));
    return p;
}

}  // namespace

TEST_CASE("config round trip") {
    SimConfig c;
    c.seed = 99;
    c.p_values = {0.5, 1e-7};
    c.disturbance.kind = DisturbanceKind::Gaussian;
    c.disturbance.scale(0, 1) = c.disturbance.scale(1, 0) = 0.003;
    c.fixed_obstacles = ObstacleSet{{{1.5, -0.25}, 0.3}};
    c.nominal = NominalKind::Planner;
    c.layout.min_gap = 0.25;
    c.filter.risk.K = 7;
    const std::string text = dump_config(c);
    const SimConfig back = parse_config(text);
    CHECK(dump_config(back) == text);
    CHECK(config_hash(back) == config_hash(c));
    CHECK(back.p_values == c.p_values);
    CHECK(back.layout.min_gap == 0.25);
    c.seed = 100;
    CHECK(config_hash(c) != config_hash(back));
}

TEST_CASE("config rejects bad input") {
    CHECK_THROWS_AS(parse_config("{}"), ConfigError);
    CHECK_THROWS_AS(parse_config("{\"schema_version\": \"other\"}"), ConfigError);
    CHECK_THROWS_AS(parse_config("{\"schema_version\": \"shield-config-1\", \"sed\": 1}"), ConfigError);
    CHECK_THROWS_AS(parse_config("{\"schema_version\": \"shield-config-1\", \"filter\": {\"dtt\": 1}}"), ConfigError);
    CHECK_THROWS_AS(parse_config("{\"schema_version\": \"shield-config-1\", \"seed\": -1}"), ConfigError);
    CHECK_THROWS_AS(parse_config("not json"), ConfigError);
    const SimConfig d = parse_config("{\"schema_version\": \"shield-config-1\"}");
    CHECK(dump_config(d) == dump_config(SimConfig{}));
}

TEST_CASE("atomic write replaces the file and leaves no temporaries") {
    const fs::path dir = scratch_dir("atomic");
    write_file_atomic(dir / "a.txt", "one");
    write_file_atomic(dir / "a.txt", "two");
    CHECK(read_file(dir / "a.txt") == "two");
    CHECK(std::distance(fs::directory_iterator(dir), fs::directory_iterator{}) == 1);
    CHECK_THROWS(write_file_atomic(dir / "missing" / "b.txt", "x"));
}

TEST_CASE("cli usage errors") {
    CHECK(cli({}).code == kExitConfig);
    CHECK(cli({"bogus"}).code == kExitConfig);
    CHECK(cli({"--help"}).code == kExitOk);
    CHECK(cli({"simulate", "--config", "/nonexistent/cfg.json"}).code == kExitConfig);
    CHECK(cli({"simulate", "--trials", "abc"}).code == kExitConfig);
    const fs::path dir = scratch_dir("usage");
    write_file_atomic(dir / "bad.json", "{\"schema_version\": \"shield-config-1\", \"trials\": 0}");
    CHECK(cli({"simulate", "--config", (dir / "bad.json").string()}).code == kExitConfig);
}

TEST_CASE("cli binary exit codes") {
    const std::string bin = SHIELD_CLI_PATH;
    CHECK(WEXITSTATUS(std::system((bin + " simulate --config /nonexistent.json >/dev/null 2>&1").c_str())) == 2);
    CHECK(WEXITSTATUS(std::system((bin + " --help >/dev/null 2>&1").c_str())) == 0);
}

TEST_CASE("simulate writes summary, trajectories and config") {
    const fs::path dir = scratch_dir("simulate");
    const fs::path cfg = write_config(dir, small_config());
    const Run r = cli({"simulate", "--config", cfg.string(), "--out-dir", (dir / "out").string()});
    REQUIRE(r.code == kExitOk);
    CHECK(fs::exists(dir / "out" / "summary.csv"));
    CHECK(fs::exists(dir / "out" / "config.json"));
    CHECK(fs::exists(dir / "out" / "trajectories" / "trial_0000.csv"));
    CHECK(fs::exists(dir / "out" / "trajectories" / "trial_0001.csv"));
    const auto summary = lines_of(read_file(dir / "out" / "summary.csv"));
    CHECK(summary.size() == 3);
    const SimConfig back = load_config(dir / "out" / "config.json");
    CHECK(back.trials == 2);

    const Run nt = cli({"simulate", "--config", cfg.string(), "--no-trajectories", "--out-dir",
                        (dir / "out2").string()});
    CHECK(nt.code == kExitOk);
    CHECK_FALSE(fs::exists(dir / "out2" / "trajectories"));
}

TEST_CASE("same seed gives identical files") {
    const fs::path dir = scratch_dir("seed");
    const fs::path cfg = write_config(dir, small_config());
    for (const char* o : {"a", "b"})
        REQUIRE(cli({"sweep", "--config", cfg.string(), "--seed", "7", "--risk-p", "0.001,0.1", "--out-dir",
                     (dir / o).string()})
                    .code == kExitOk);
    const std::string a = read_file(dir / "a" / "sweep.csv");
    CHECK(a == read_file(dir / "b" / "sweep.csv"));
    CHECK(lines_of(a).size() == 4);
    CHECK(read_file(dir / "a" / "config.json") == read_file(dir / "b" / "config.json"));
    CHECK(load_config(dir / "a" / "config.json").seed == 7);
}

TEST_CASE("environment variable supplies the config") {
    const fs::path dir = scratch_dir("env");
    SimConfig c = small_config();
    c.seed = 1234;
    const fs::path cfg = write_config(dir, c);
    ::setenv(kConfigEnvVar, cfg.c_str(), 1);
    const Run r = cli({"simulate", "--no-trajectories", "--out-dir", (dir / "out").string()});
    ::unsetenv(kConfigEnvVar);
    REQUIRE(r.code == kExitOk);
    CHECK(load_config(dir / "out" / "config.json").seed == 1234);
}

TEST_CASE("alpha-table") {
    const fs::path dir = scratch_dir("alpha");
    const fs::path out = dir / "table.csv";
    REQUIRE(cli({"alpha-table", "--out", out.string(), "--curve", (dir / "curve.csv").string()}).code == kExitOk);
    const auto ls = lines_of(read_file(out));
    REQUIRE(ls.size() == 16);
    CHECK(ls[0] == "sigma,P,K,h0,delta,alpha,bound");
    // rows are grouped by sigma with P ascending; a looser budget allows faster decay
    for (std::size_t g = 0; g < 3; ++g) {
        double prev = 2.0;
        for (std::size_t i = 0; i < 5; ++i) {
            const auto f = split(ls[1 + 5 * g + i]);
            REQUIRE(f.size() == 7);
            if (f[5].empty()) continue;
            const double a = std::stod(f[5]);
            CHECK(a <= prev);
            CHECK(std::stod(f[6]) <= std::stod(f[1]) * (1 + 1e-6));
            prev = a;
        }
    }
    CHECK(lines_of(read_file(dir / "curve.csv")).size() == 1 + 3 * 199);

    const fs::path one = dir / "one.csv";
    REQUIRE(cli({"alpha-table", "--p-list", "0.01", "--sigma-list", "0.1", "--out", one.string()}).code == kExitOk);
    CHECK(lines_of(read_file(one)).size() == 2);
    CHECK(cli({"alpha-table", "--p-list", "2", "--out", one.string()}).code == kExitConfig);
}

TEST_CASE("filter-trace") {
    const fs::path dir = scratch_dir("trace");
    SimConfig c = small_config();
    c.disturbance.kind = DisturbanceKind::None;
    c.fixed_obstacles = ObstacleSet{{{0.8, 0.0}, 0.5}};
    const fs::path cfg = write_config(dir, c);
    auto trace = [&](const std::string& script) {
        write_file_atomic(dir / "script.csv", script);
        return cli({"filter-trace", "--config", cfg.string(), "--script", (dir / "script.csv").string(), "--out-dir",
                    (dir / "out").string()});
    };

    REQUIRE(trace("").code == kExitOk);
    auto ls = lines_of(read_file(dir / "out" / "trace.csv"));
    REQUIRE(ls.size() == 2);
    CHECK(ls[0].rfind("# ", 0) == 0);
    CHECK(ls[1].rfind("step,t,x,y,theta,", 0) == 0);

    std::string script = "t,vx,vy,omega\n";
    for (int i = 0; i < 80; ++i) script += std::to_string(0.01 * i) + ",1.0,0.0,0.0\n";
    REQUIRE(trace(script).code == kExitOk);
    ls = lines_of(read_file(dir / "out" / "trace.csv"));
    REQUIRE(ls.size() == 82);
    const auto header = split(ls[1]);
    auto col = [&](const std::string& name) {
        return static_cast<std::size_t>(std::find(header.begin(), header.end(), name) - header.begin());
    };
    bool saw_active = false;
    for (std::size_t i = 2; i < ls.size(); ++i) {
        const auto f = split(ls[i]);
        CHECK(f[col("violated")] == "0");
        if (f[col("active")] == "1") {
            saw_active = true;
            CHECK(std::abs(std::stod(f[col("margin")])) < 1e-9);
            CHECK(std::stod(f[col("u_safe_vx")]) < 1.0);
        }
    }
    CHECK(saw_active);

    CHECK(trace("t,vx,vy,omega\n0,1,2\n").code == kExitConfig);
    CHECK(trace("0,1,0,0\n0.5,x,0,0\n").code == kExitConfig);
    CHECK(trace("0.1,1,0,0\n0.0,1,0,0\n").code == kExitConfig);
    CHECK(cli({"filter-trace", "--config", cfg.string(), "--script", (dir / "none.csv").string(), "--out-dir",
               (dir / "out").string()})
              .code == kExitIo);
}

TEST_CASE("validate-weights") {
    const fs::path dir = scratch_dir("weights");
    const DecoderWeights w = test_support::small_decoder(3);
    save_weights(w, dir / "w.json");

    HistoryWindow win(w.context_len);
    win.push({0.1, 0.2, 0.3}, {0.5, 0.0, -0.1});
    win.push({0.2, 0.1, 0.4}, {0.4, 0.1, 0.0});
    const Eigen::Vector2d z(0.3, -1.2);
    const Disturbance d = decoder_infer(w, win, z);

    nlohmann::json probe;
    probe["format_version"] = "shield-cvae-probe-1";
    nlohmann::json p;
    p["states"] = {{0.1, 0.2, 0.3}, {0.2, 0.1, 0.4}};
    p["commands"] = {{0.5, 0.0, -0.1}, {0.4, 0.1, 0.0}};
    p["z"] = {z.x(), z.y()};
    p["output"] = {d.dx, d.dy, d.dtheta};
    probe["probes"] = {p};
    write_file_atomic(dir / "probe.json", probe.dump());

    const auto run = [&](const std::string& weights, const std::string& probe_file) {
        return cli({"validate-weights", "--weights", weights, "--probe", probe_file});
    };
    const Run ok = run((dir / "w.json").string(), (dir / "probe.json").string());
    CHECK(ok.code == kExitOk);
    CHECK(ok.out.find("probes=1") != std::string::npos);

    probe["probes"][0]["output"][0] = d.dx + 1e-3;
    write_file_atomic(dir / "off.json", probe.dump());
    CHECK(run((dir / "w.json").string(), (dir / "off.json").string()).code == kExitFailure);

    CHECK(run((dir / "missing.json").string(), (dir / "probe.json").string()).code == kExitIo);
    write_file_atomic(dir / "garbage.json", "{\"format_version\": \"shield-cvae-1\"");
    CHECK(run((dir / "garbage.json").string(), (dir / "probe.json").string()).code == kExitConfig);
    write_file_atomic(dir / "badprobe.json", "{\"format_version\": \"nope\", \"probes\": []}");
    CHECK(run((dir / "w.json").string(), (dir / "badprobe.json").string()).code == kExitConfig);
}
