#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "thermomag/io.hpp"

using namespace thermomag;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("thermomag_test_" + name);
    fs::remove_all(p);
    return p;
}

std::string config_key_of(const std::string& text) {
    try {
        parse_config_text(text);
    } catch (const ConfigError& e) {
        return e.key();
    }
    return "<none>";
}

}  // namespace

TEST(Config, EmptyGivesReferenceSet) {
    const SimConfig c = parse_config_text("{}");
    EXPECT_EQ(c.material.H_c, 100.0);
    EXPECT_EQ(c.material.h_c, 1.0);
    EXPECT_EQ(c.material.p_par, 0.1);
    EXPECT_EQ(c.material.epsilon, 1e-6);
    EXPECT_EQ(c.theta0, 1300.0);
    EXPECT_EQ(c.material.theta_c, 1388.0);
    EXPECT_EQ(c.material.theta_ext, 1100.0);
    EXPECT_EQ(c.material.b_robin, 0.001);
    EXPECT_EQ(c.material.K_cond, 100.0);
    EXPECT_EQ(c.material.c_v, 420.0);
    EXPECT_EQ(c.material.a0, 1.0);
    EXPECT_EQ(c.material.b0, 1.0);
    EXPECT_EQ(c.n_angles, 12);
    EXPECT_EQ(c.layers.size(), 3u);
    EXPECT_EQ(c.cycles, 8);
    EXPECT_EQ(c.tau, 0.1);
    EXPECT_EQ(c.waveform.scale, 300.0);
    EXPECT_EQ(c.waveform.kind, WaveKind::triangular);
}

TEST(Config, SecondExperiment) {
    const SimConfig c = parse_config_text(R"({"theta_ext": 1500, "b_robin": 0.1})");
    EXPECT_EQ(c.material.theta_ext, 1500.0);
    EXPECT_EQ(c.material.b_robin, 0.1);
    EXPECT_EQ(c.material.b0, 1.0);
}

TEST(Config, FieldScaleFollowsCoercivity) {
    EXPECT_EQ(parse_config_text(R"({"H_c": 50})").waveform.scale, 150.0);
    EXPECT_EQ(parse_config_text(R"({"H_c": 50, "field_scale": 7})").waveform.scale, 7.0);
}

TEST(Config, ErrorsNameTheKey) {
    EXPECT_EQ(config_key_of(R"({"tau": -1})"), "tau");
    EXPECT_EQ(config_key_of(R"({"no_such_key": 1})"), "no_such_key");
    EXPECT_EQ(config_key_of(R"({"cycles": "many"})"), "cycles");
    EXPECT_EQ(config_key_of(R"({"cycles": 2.5})"), "cycles");
    EXPECT_EQ(config_key_of(R"({"layers": []})"), "layers");
    EXPECT_EQ(config_key_of(R"({"waveform": "square"})"), "waveform");
    EXPECT_EQ(config_key_of(R"({"magnet_box": [-2, 0, 0, 0.1]})"), "magnet_box");
    EXPECT_EQ(config_key_of(R"({"c_v": 0})"), "c_v");
    EXPECT_THROW(parse_config_text("{not json"), ConfigError);
    EXPECT_THROW(parse_config_text("[1, 2]"), ConfigError);
}

TEST(Config, MissingFile) {
    try {
        load_config("/nonexistent/dir/cfg.json");
        FAIL();
    } catch (const IoError& e) {
        EXPECT_NE(std::string(e.what()).find("/nonexistent/dir/cfg.json"), std::string::npos);
    }
}

TEST(Config, RoundTrip) {
    SimConfig c = parse_config_text(R"({"n_angles": 7, "layers": [0.9090909090909091, 1, 1.1], "tau": 0.05,
        "waveform": "sinusoidal", "easy_axis": "x", "p_update": "lagged", "field_direction": [0.6, 0.8],
        "smoothing": 0.003, "initial_weights": "aligned", "output_dir": "somewhere"})");
    c.material.theta_c = 1388.123456789012345;
    const SimConfig back = parse_config(to_json(c));
    EXPECT_TRUE(back == c);
    EXPECT_EQ(back.layers, c.layers);
    EXPECT_EQ(back.material.theta_c, c.material.theta_c);
    EXPECT_EQ(to_json(back).dump(), to_json(c).dump());
}

TEST(Config, OutputDirFromEnvironment) {
    ::setenv("THERMOMAG_OUTPUT_DIR", "/tmp/from_env", 1);
    EXPECT_EQ(parse_config_text("{}").output_dir, "/tmp/from_env");
    ::unsetenv("THERMOMAG_OUTPUT_DIR");
    EXPECT_EQ(parse_config_text("{}").output_dir, "output");
}

TEST(Csv, FormatDoubleRoundTrips) {
    for (double v : {0.1, 1.0 / 3.0, -1e-300, 6.633249580710799, 1388.0}) EXPECT_EQ(std::stod(format_double(v)), v);
}

TEST(Csv, GoldenHeader) {
    std::ostringstream os;
    write_timeseries_csv(os, {});
    std::string golden = slurp(fs::path(THERMOMAG_GOLDEN_DIR) / "timeseries_header.csv");
    EXPECT_EQ(os.str(), golden);
}

TEST(Outputs, FilesRowsAndDeterminism) {
    SimConfig c = parse_config_text(R"({"n_angles": 12, "layers": [1], "cycles": 2, "period": 2.0, "snapshot_every": 10})");
    const Simulation sim(c);
    const RunResult r = sim.run();
    const fs::path d1 = scratch_dir("a"), d2 = scratch_dir("b");
    const RunManifest m = write_outputs(sim, r, d1);
    write_outputs(sim, Simulation(c).run(), d2);

    for (const auto& f : m.files) EXPECT_TRUE(fs::exists(d1 / f)) << f;
    const auto doc = nlohmann::json::parse(slurp(d1 / "manifest.json"));
    EXPECT_EQ(doc["files"].size(), m.files.size());
    EXPECT_TRUE(parse_config(doc["config"]) == c);
    EXPECT_EQ(doc["waveform"], "triangular");

    std::istringstream ts(slurp(d1 / "timeseries.csv"));
    std::string line;
    int rows = -1;
    while (std::getline(ts, line)) ++rows;
    EXPECT_EQ(rows, 41);

    for (int cyc : {1, 2}) {
        std::istringstream loop(slurp(d1 / ("loop_cycle" + std::to_string(cyc) + ".csv")));
        std::vector<std::string> hx;
        std::getline(loop, line);
        EXPECT_EQ(line, "h_x,mean_mx");
        while (std::getline(loop, line)) hx.push_back(line.substr(0, line.find(',')));
        ASSERT_EQ(hx.size(), 21u);
        EXPECT_EQ(std::stod(hx.front()), std::stod(hx.back()));
    }
    for (const auto& f : m.files) {
        if (f.ends_with(".csv")) {
            EXPECT_EQ(slurp(d1 / f), slurp(d2 / f)) << f;
        }
    }
    EXPECT_TRUE(fs::exists(d1 / "snapshots" / "step_00020_weights.csv"));
}

TEST(Outputs, FullRunRowCount) {
    // 8 cycles of 100 steps; the simulation itself is replaced by a series of
    // the right length since only the writer is under test here.
    const SimConfig c;
    TimeSeries s(static_cast<std::size_t>(c.num_steps()) + 1);
    for (std::size_t k = 0; k < s.size(); ++k) s[k].step = static_cast<int>(k);
    std::ostringstream os;
    write_timeseries_csv(os, s);
    std::istringstream in(os.str());
    std::string line;
    int rows = -1;
    while (std::getline(in, line)) ++rows;
    EXPECT_EQ(rows, 801);
}

TEST(Outputs, UnwritableDirectory) {
    const fs::path file = scratch_dir("file");
    std::ofstream(file) << "x";
    SimConfig c = parse_config_text(R"({"n_angles": 4, "layers": [1], "cycles": 1, "period": 0.5})");
    const Simulation sim(c);
    EXPECT_THROW(write_outputs(sim, sim.run(), file / "sub"), IoError);
}
