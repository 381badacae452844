#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "netside/cli.hpp"
#include "netside/svm.hpp"
#include "netside/trace.hpp"

using namespace netside;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const char* name) {
    fs::path dir = fs::temp_directory_path() / "netside_cli_tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_profiles(const fs::path& p) {
    std::ofstream out(p);
    out << "[url alpha]\n"
           "in_pkts = 40 0.7\n"
           "out_pkts = 10 0.7\n"
           "in_sizes = 300:0.5 600:0.3 1200:0.2\n"
           "out_sizes = 150:0.7 400:0.3\n"
           "\n"
           "[url bravo]\n"
           "in_pkts = 44 0.7\n"
           "out_pkts = 10 0.7\n"
           "in_sizes = 300:0.5 600:0.3 1200:0.2\n"
           "out_sizes = 150:0.7 400:0.3\n"
           "\n"
           "[noise]\n"
           "rate_pps = 0\n";
}

void write_drive(const fs::path& p, const char* location) {
    std::ofstream out(p);
    out << "[map]\n"
           "jitter = 0\n"
           "\n"
           "[path]\n"
           "origin = 42.36 -71.06\n"
           "direction = east\n"
           "n_steps = 6\n"
           "step_interval_s = 20\n"
           "step_distance_mi = 0.25\n"
           "location = "
        << location << "\n";
}

int cli(std::vector<std::string> args) { return run_cli(args); }

} // namespace

TEST_CASE("usage problems exit with code 1") {
    CHECK(cli({"no-such-command"}) == 1);
    CHECK(cli({"gen-web"}) == 1);                           // missing --profiles
    CHECK(cli({"gen-web", "--bogus-flag", "x"}) == 1);      // unknown flag
    CHECK(cli({"cv", "--trace", "t", "--labels", "l", "--pos", "a", "--neg", "a",
               "--transform", "nonsense"}) == 1);           // bad enum value
    CHECK(cli({}) == 1);                                    // no subcommand
    CHECK(cli({"--help"}) == 0);
}

TEST_CASE("missing input files exit with code 2") {
    fs::path dir = fresh_dir("io");
    CHECK(cli({"gen-web", "--profiles", (dir / "absent.cfg").string()}) == 2);
    CHECK(cli({"extract", "--trace", (dir / "absent.csv").string(), "--labels",
               (dir / "absent2.csv").string()}) == 2);
}

TEST_CASE("schema violations exit with code 3") {
    fs::path dir = fresh_dir("schema");
    fs::path bad = dir / "empty.cfg";
    {
        std::ofstream out(bad);
        out << "[noise]\nrate_pps = 0\n";  // no [url ...] sections at all
    }
    CHECK(cli({"--out", dir.string(), "gen-web", "--profiles", bad.string()}) == 3);
}

TEST_CASE("too little data exits with code 5") {
    fs::path dir = fresh_dir("insufficient");
    fs::create_directories(dir / "empty");
    CHECK(cli({"loc-speed", "--traces", (dir / "empty").string(), "--report",
               (dir / "r.csv").string()}) == 5);
}

TEST_CASE("generation artifacts are byte-identical across reruns") {
    fs::path dir = fresh_dir("rerun");
    fs::path profiles = dir / "profiles.cfg";
    write_profiles(profiles);
    std::vector<std::string> args = {"--seed", "9",
                                     "--out",  dir.string(),
                                     "gen-web", "--profiles", profiles.string(),
                                     "--frames", "5"};
    REQUIRE(cli(args) == 0);
    std::string trace_a = slurp(dir / "web_trace.csv");
    std::string labels_a = slurp(dir / "web_labels.csv");
    REQUIRE(cli(args) == 0);
    CHECK(slurp(dir / "web_trace.csv") == trace_a);
    CHECK(slurp(dir / "web_labels.csv") == labels_a);
    CHECK(!trace_a.empty());

    std::vector<std::string> other = args;
    other[1] = "10";  // different seed
    REQUIRE(cli(other) == 0);
    CHECK(slurp(dir / "web_trace.csv") != trace_a);
}

TEST_CASE("artifact headers carry tool, command, seed and jobs") {
    fs::path dir = fresh_dir("headers");
    fs::path profiles = dir / "profiles.cfg";
    write_profiles(profiles);
    REQUIRE(cli({"--seed", "3", "--out", dir.string(), "gen-web", "--profiles",
                 profiles.string(), "--frames", "2"}) == 0);
    std::ifstream in(dir / "web_trace.csv");
    std::string l1, l2, l3, l4;
    std::getline(in, l1);
    std::getline(in, l2);
    std::getline(in, l3);
    std::getline(in, l4);
    CHECK(l1 == std::string("# tool: ") + kToolVersion);
    CHECK(l2.rfind("# command: netside --seed 3", 0) == 0);
    CHECK(l3 == "# seed: 3");
    CHECK(l4 == "# jobs: 1");
}

TEST_CASE("relative outputs honor NETSIDE_OUT_DIR") {
    fs::path dir = fresh_dir("envout");
    fs::path profiles = dir / "profiles.cfg";
    write_profiles(profiles);
    setenv("NETSIDE_OUT_DIR", dir.string().c_str(), 1);
    int rc = cli({"gen-web", "--profiles", profiles.string(), "--frames", "2"});
    unsetenv("NETSIDE_OUT_DIR");
    REQUIRE(rc == 0);
    CHECK(fs::exists(dir / "web_trace.csv"));
    CHECK(fs::exists(dir / "web_labels.csv"));
}

TEST_CASE("extract, train and cv run off generated corpora") {
    fs::path dir = fresh_dir("pipeline");
    fs::path profiles = dir / "profiles.cfg";
    write_profiles(profiles);
    std::string trace = (dir / "web_trace.csv").string();
    std::string labels = (dir / "web_labels.csv").string();
    REQUIRE(cli({"--seed", "5", "--out", dir.string(), "gen-web", "--profiles",
                 profiles.string(), "--frames", "30"}) == 0);

    REQUIRE(cli({"--out", dir.string(), "extract", "--trace", trace, "--labels", labels,
                 "--transform", "tf_cosine"}) == 0);
    std::ifstream feats(dir / "features.csv");
    std::string line;
    size_t rows = 0;
    while (std::getline(feats, line))
        if (!line.empty() && line[0] != '#' && line.rfind("label", 0) != 0) ++rows;
    CHECK(rows == 60);

    REQUIRE(cli({"--out", dir.string(), "train", "--trace", trace, "--labels", labels,
                 "--pos", "alpha", "--neg", "bravo", "--c", "64", "--gamma", "0.05"}) == 0);
    SvmModel model = load_model_json((dir / "model.json").string());
    CHECK(model.label_pos == "alpha");
    CHECK(!model.support_vectors.empty());

    REQUIRE(cli({"--seed", "5", "--out", dir.string(), "cv", "--trace", trace, "--labels",
                 labels, "--pos", "alpha", "--neg", "bravo", "--c", "64", "--gamma",
                 "0.05"}) == 0);
    std::string report = slurp(dir / "cv_report.csv");
    CHECK(report.find("pos,neg,ccr") != std::string::npos);
    CHECK(report.find("alpha,bravo,") != std::string::npos);
}

TEST_CASE("counter-eval writes a base row and one row per scheme") {
    fs::path dir = fresh_dir("counter");
    fs::path profiles = dir / "profiles.cfg";
    write_profiles(profiles);
    std::string trace = (dir / "web_trace.csv").string();
    std::string labels = (dir / "web_labels.csv").string();
    REQUIRE(cli({"--seed", "5", "--out", dir.string(), "gen-web", "--profiles",
                 profiles.string(), "--frames", "25"}) == 0);
    REQUIRE(cli({"--seed", "5", "--out", dir.string(), "counter-eval", "--trace", trace,
                 "--labels", labels, "--pos", "alpha", "--neg", "bravo", "--scheme",
                 "pad_to_max", "--c", "64", "--gamma", "0.05"}) == 0);
    std::string report = slurp(dir / "counter_eval.csv");
    CHECK(report.find("scheme,ccr") != std::string::npos);
    CHECK(report.find("none,") != std::string::npos);
    CHECK(report.find("pad_to_max,") != std::string::npos);
}

TEST_CASE("drive traces feed the location pipeline end to end") {
    fs::path dir = fresh_dir("drives");
    fs::path urban_cfg = dir / "urban.cfg";
    fs::path rural_cfg = dir / "rural.cfg";
    write_drive(urban_cfg, "boston");
    write_drive(rural_cfg, "wyoming");
    fs::create_directories(dir / "train");
    fs::create_directories(dir / "eval");

    REQUIRE(cli({"--seed", "1", "gen-map", "--config", urban_cfg.string(), "--level", "app",
                 "--still", "10", "--trace", (dir / "train" / "urban.csv").string()}) == 0);
    REQUIRE(cli({"--seed", "2", "gen-map", "--config", rural_cfg.string(), "--level", "app",
                 "--still", "10", "--trace", (dir / "train" / "rural.csv").string()}) == 0);
    REQUIRE(cli({"--seed", "3", "gen-map", "--config", urban_cfg.string(), "--level", "app",
                 "--still", "10", "--trace", (dir / "eval" / "probe.csv").string()}) == 0);

    // 6 steps x 0.25 mi at zero jitter -> exactly 1.5 mi; the boston preset
    // scales the 1000-byte tile by its 1.6 density factor
    REQUIRE(cli({"--out", dir.string(), "loc-distance", "--traces",
                 (dir / "eval").string(), "--tile-bytes", "1600", "--report",
                 "distance.csv"}) == 0);
    std::string dist = slurp(dir / "distance.csv");
    CHECK(dist.find("# within_quarter_mile: 1") != std::string::npos);
    CHECK(dist.find(",1.5,1.5,0") != std::string::npos);

    REQUIRE(cli({"--out", dir.string(), "loc-env", "--train", (dir / "train").string(),
                 "--eval", (dir / "eval").string(), "--report", "env.csv"}) == 0);
    std::string env = slurp(dir / "env.csv");
    CHECK(env.find("# ccr: 1") != std::string::npos);
    CHECK(env.find("urban") != std::string::npos);

    REQUIRE(cli({"--out", dir.string(), "loc-motion", "--trace",
                 (dir / "eval" / "probe.csv").string(), "--report", "motion.csv"}) == 0);
    std::string motion = slurp(dir / "motion.csv");
    CHECK(motion.find("trace,onset_us,true_onset_us") != std::string::npos);
    CHECK(motion.find("0,10000000,10000000") != std::string::npos);

    REQUIRE(cli({"--out", dir.string(), "loc-path", "--labeled", (dir / "train").string(),
                 "--unlabeled", (dir / "eval" / "probe.csv").string(), "--report",
                 "path.csv"}) == 0);
    std::string path_report = slurp(dir / "path.csv");
    CHECK(path_report.find("# label: urban") != std::string::npos);
    CHECK(path_report.find("label,pcc") != std::string::npos);
}

TEST_CASE("loc-speed fits the app-level cadence constant") {
    fs::path dir = fresh_dir("speed");
    fs::create_directories(dir / "drives");
    // same 20 s step interval, three different step lengths -> 27/45/63 mph
    for (int i = 0; i < 3; ++i) {
        fs::path cfg = dir / ("d" + std::to_string(i) + ".cfg");
        {
            std::ofstream out(cfg);
            out << "[map]\njitter = 0\n\n[path]\norigin = 40 -100\ndirection = east\n"
                   "n_steps = 8\nstep_interval_s = 20\nstep_distance_mi = 0."
                << (15 + i * 10) << "\n";
        }
        REQUIRE(cli({"--seed", std::to_string(40 + i), "gen-map", "--config", cfg.string(),
                     "--level", "app", "--still", "10", "--trace",
                     (dir / "drives" / ("d" + std::to_string(i) + ".csv")).string()}) == 0);
    }
    REQUIRE(cli({"--out", dir.string(), "loc-speed", "--traces", (dir / "drives").string(),
                 "--report", "fit.csv"}) == 0);
    std::string fit = slurp(dir / "fit.csv");
    CHECK(fit.find("# unit: seconds_mph_per_tile") != std::string::npos);
    // a = tile_miles * 3600 = 450 for the app-level model
    CHECK(fit.find("# a: 45") != std::string::npos);
}

TEST_CASE("sweep emits one row per grid cell") {
    fs::path dir = fresh_dir("sweep");
    fs::path profiles = dir / "profiles.cfg";
    write_profiles(profiles);
    std::string trace = (dir / "web_trace.csv").string();
    std::string labels = (dir / "web_labels.csv").string();
    REQUIRE(cli({"--seed", "5", "--out", dir.string(), "gen-web", "--profiles",
                 profiles.string(), "--frames", "12"}) == 0);
    REQUIRE(cli({"--seed", "5", "--out", dir.string(), "sweep", "--trace", trace, "--labels",
                 labels, "--pos", "alpha", "--neg", "bravo", "--c-range", "2:6:2",
                 "--gamma-range", "-6:-4"}) == 0);
    std::ifstream grid(dir / "sweep_grid.csv");
    std::string line;
    size_t rows = 0;
    bool header = false;
    while (std::getline(grid, line)) {
        if (line.rfind("c_exp,gamma_exp,c,gamma,ccr", 0) == 0) header = true;
        else if (!line.empty() && line[0] != '#') ++rows;
    }
    CHECK(header);
    CHECK(rows == 9);  // 3 c values x 3 gamma values
    CHECK(cli({"sweep", "--trace", trace, "--labels", labels, "--pos", "alpha", "--neg",
               "bravo", "--c-range", "5:1"}) == 1);  // empty range
}
