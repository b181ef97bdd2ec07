#pragma once

// JSON configuration (flat keys), CSV time series / loops / snapshots and a
// JSON run manifest.

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "thermomag/driver.hpp"
#include "thermomag/error.hpp"

#ifndef THERMOMAG_VERSION
#define THERMOMAG_VERSION "0.0.0"
#endif

namespace thermomag {

inline constexpr std::string_view output_dir_env = "THERMOMAG_OUTPUT_DIR";

/// Shortest decimal text that reads back to the same double.
inline std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

namespace io_detail {

using nlohmann::json;

inline double number(const json& j, const std::string& key) {
    if (!j.is_number()) throw ConfigError(key, "expected a number");
    return j.get<double>();
}

inline int integer(const json& j, const std::string& key) {
    if (j.is_number_integer() || j.is_number_unsigned()) return j.get<int>();
    if (j.is_number_float()) {
        const double v = j.get<double>();
        if (v == std::floor(v) && std::abs(v) < 1e9) return static_cast<int>(v);
    }
    throw ConfigError(key, "expected an integer");
}

inline bool boolean(const json& j, const std::string& key) {
    if (!j.is_boolean()) throw ConfigError(key, "expected true or false");
    return j.get<bool>();
}

inline std::string text(const json& j, const std::string& key) {
    if (!j.is_string()) throw ConfigError(key, "expected a string");
    return j.get<std::string>();
}

inline std::vector<double> numbers(const json& j, const std::string& key, std::size_t count = 0) {
    if (!j.is_array()) throw ConfigError(key, "expected an array of numbers");
    std::vector<double> out;
    for (const auto& v : j) out.push_back(number(v, key));
    if (count != 0 && out.size() != count) throw ConfigError(key, "expected " + std::to_string(count) + " numbers");
    return out;
}

inline Rect rect(const json& j, const std::string& key) {
    const auto v = numbers(j, key, 4);
    return Rect{v[0], v[1], v[2], v[3]};
}

inline Vec2 vec2(const json& j, const std::string& key) {
    const auto v = numbers(j, key, 2);
    return Vec2(v[0], v[1]);
}

template <class E>
E choice(const json& j, const std::string& key, std::initializer_list<std::pair<std::string_view, E>> options) {
    const std::string s = text(j, key);
    std::string allowed;
    for (const auto& [name, value] : options) {
        if (s == name) return value;
        allowed += (allowed.empty() ? "" : ", ") + std::string(name);
    }
    throw ConfigError(key, "unknown value '" + s + "' (expected one of: " + allowed + ")");
}

inline std::string_view name(WaveKind k) { return k == WaveKind::triangular ? "triangular" : "sinusoidal"; }
inline std::string_view name(EasyAxis a) { return a == EasyAxis::y ? "y" : "x"; }
inline std::string_view name(PUpdate u) { return u == PUpdate::implicit ? "implicit" : "lagged"; }
inline std::string_view name(InitialWeights w) {
    switch (w) {
        case InitialWeights::uniform: return "uniform";
        case InitialWeights::aligned: return "aligned";
        default: return "minimized";
    }
}

using Setter = std::function<void(SimConfig&, const json&, const std::string&)>;

inline const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = [] {
        std::map<std::string, Setter> t;
        auto num = [&](const char* key, double SimConfig::*field) {
            t[key] = [field](SimConfig& c, const json& j, const std::string& k) { c.*field = number(j, k); };
        };
        auto mat = [&](const char* key, double MaterialParams::*field) {
            t[key] = [field](SimConfig& c, const json& j, const std::string& k) { c.material.*field = number(j, k); };
        };
        auto sol = [&](const char* key, double SolverSettings::*field) {
            t[key] = [field](SimConfig& c, const json& j, const std::string& k) { c.solver.*field = number(j, k); };
        };
        t["outer_box"] = [](SimConfig& c, const json& j, const std::string& k) { c.outer = rect(j, k); };
        t["magnet_box"] = [](SimConfig& c, const json& j, const std::string& k) { c.magnet = rect(j, k); };
        t["base_divisions"] = [](SimConfig& c, const json& j, const std::string& k) { c.base_divisions = integer(j, k); };
        t["mesh_level"] = [](SimConfig& c, const json& j, const std::string& k) { c.mesh_level = integer(j, k); };
        t["n_angles"] = [](SimConfig& c, const json& j, const std::string& k) { c.n_angles = integer(j, k); };
        t["layers"] = [](SimConfig& c, const json& j, const std::string& k) { c.layers = numbers(j, k); };
        mat("a0", &MaterialParams::a0);
        mat("b0", &MaterialParams::b0);
        mat("theta_c", &MaterialParams::theta_c);
        mat("H_c", &MaterialParams::H_c);
        mat("h_c", &MaterialParams::h_c);
        mat("epsilon", &MaterialParams::epsilon);
        t["q"] = [](SimConfig& c, const json& j, const std::string& k) { c.material.q = integer(j, k); };
        mat("mu0", &MaterialParams::mu0);
        mat("c_v", &MaterialParams::c_v);
        mat("K_cond", &MaterialParams::K_cond);
        mat("b_robin", &MaterialParams::b_robin);
        mat("theta_ext", &MaterialParams::theta_ext);
        mat("p_par", &MaterialParams::p_par);
        mat("regularization", &MaterialParams::regularization);
        t["easy_axis"] = [](SimConfig& c, const json& j, const std::string& k) {
            c.material.easy_axis = choice<EasyAxis>(j, k, {{"y", EasyAxis::y}, {"x", EasyAxis::x}});
        };
        num("theta0", &SimConfig::theta0);
        t["waveform"] = [](SimConfig& c, const json& j, const std::string& k) {
            c.waveform.kind = choice<WaveKind>(j, k, {{"triangular", WaveKind::triangular}, {"sinusoidal", WaveKind::sinusoidal}});
        };
        t["period"] = [](SimConfig& c, const json& j, const std::string& k) { c.waveform.period = number(j, k); };
        t["amplitude"] = [](SimConfig& c, const json& j, const std::string& k) { c.waveform.amplitude = number(j, k); };
        t["field_scale"] = [](SimConfig& c, const json& j, const std::string& k) { c.waveform.scale = number(j, k); };
        t["field_direction"] = [](SimConfig& c, const json& j, const std::string& k) { c.waveform.direction = vec2(j, k); };
        num("tau", &SimConfig::tau);
        t["cycles"] = [](SimConfig& c, const json& j, const std::string& k) { c.cycles = integer(j, k); };
        t["max_iterations"] = [](SimConfig& c, const json& j, const std::string& k) { c.solver.max_iterations = integer(j, k); };
        sol("armijo_shrink", &SolverSettings::armijo_shrink);
        sol("armijo_slope", &SolverSettings::armijo_slope);
        sol("gradient_tolerance", &SolverSettings::gradient_tolerance);
        sol("stall_tolerance", &SolverSettings::stall_tolerance);
        t["stall_window"] = [](SimConfig& c, const json& j, const std::string& k) { c.solver.stall_window = integer(j, k); };
        sol("smoothing", &SolverSettings::smoothing);
        t["magnetostatics"] = [](SimConfig& c, const json& j, const std::string& k) { c.magnetostatics = boolean(j, k); };
        t["initial_weights"] = [](SimConfig& c, const json& j, const std::string& k) {
            c.initial_weights = choice<InitialWeights>(
                j, k, {{"minimized", InitialWeights::minimized}, {"uniform", InitialWeights::uniform}, {"aligned", InitialWeights::aligned}});
        };
        t["initial_direction"] = [](SimConfig& c, const json& j, const std::string& k) { c.initial_direction = vec2(j, k); };
        t["p_update"] = [](SimConfig& c, const json& j, const std::string& k) {
            c.p_update = choice<PUpdate>(j, k, {{"implicit", PUpdate::implicit}, {"lagged", PUpdate::lagged}});
        };
        num("coupling_tolerance", &SimConfig::coupling_tolerance);
        t["coupling_max_iterations"] = [](SimConfig& c, const json& j, const std::string& k) {
            c.coupling_max_iterations = integer(j, k);
        };
        t["snapshot_every"] = [](SimConfig& c, const json& j, const std::string& k) { c.snapshot_every = integer(j, k); };
        t["output_dir"] = [](SimConfig& c, const json& j, const std::string& k) { c.output_dir = text(j, k); };
        return t;
    }();
    return table;
}

}  // namespace io_detail

/// Default output directory: $THERMOMAG_OUTPUT_DIR if set, else "output".
inline std::string default_output_dir() {
    const char* env = std::getenv(std::string(output_dir_env).c_str());
    return env && *env ? std::string(env) : std::string("output");
}

/// Builds a validated SimConfig from a flat JSON object. Absent keys keep
/// the reference defaults; field_scale defaults to 3 H_c.
inline SimConfig parse_config(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("", "configuration must be a JSON object");
    SimConfig c;
    c.output_dir = default_output_dir();
    const auto& table = io_detail::setters();
    for (const auto& [key, value] : j.items()) {
        const auto it = table.find(key);
        if (it == table.end()) throw ConfigError(key, "unknown key");
        it->second(c, value, key);
    }
    if (!j.contains("field_scale")) c.waveform.scale = 3.0 * c.material.H_c;
    c.validate();
    return c;
}

inline SimConfig parse_config_text(std::string_view text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("", std::string("malformed JSON: ") + e.what());
    }
    return parse_config(j);
}

inline SimConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read config file '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return parse_config_text(ss.str());
    } catch (const ConfigError& e) {
        throw ConfigError::rewrap(e.key(), std::string(e.what()) + " (in " + path.string() + ")");
    }
}

/// Every key of the resolved configuration.
inline nlohmann::json to_json(const SimConfig& c) {
    using io_detail::name;
    const auto& m = c.material;
    const auto& s = c.solver;
    nlohmann::json j;
    j["outer_box"] = {c.outer.xmin, c.outer.xmax, c.outer.ymin, c.outer.ymax};
    j["magnet_box"] = {c.magnet.xmin, c.magnet.xmax, c.magnet.ymin, c.magnet.ymax};
    j["base_divisions"] = c.base_divisions;
    j["mesh_level"] = c.mesh_level;
    j["n_angles"] = c.n_angles;
    j["layers"] = c.layers;
    j["a0"] = m.a0;
    j["b0"] = m.b0;
    j["theta_c"] = m.theta_c;
    j["H_c"] = m.H_c;
    j["h_c"] = m.h_c;
    j["epsilon"] = m.epsilon;
    j["q"] = m.q;
    j["mu0"] = m.mu0;
    j["c_v"] = m.c_v;
    j["K_cond"] = m.K_cond;
    j["b_robin"] = m.b_robin;
    j["theta_ext"] = m.theta_ext;
    j["p_par"] = m.p_par;
    j["regularization"] = m.regularization;
    j["easy_axis"] = name(m.easy_axis);
    j["theta0"] = c.theta0;
    j["waveform"] = name(c.waveform.kind);
    j["period"] = c.waveform.period;
    j["amplitude"] = c.waveform.amplitude;
    j["field_scale"] = c.waveform.scale;
    j["field_direction"] = {c.waveform.direction.x(), c.waveform.direction.y()};
    j["tau"] = c.tau;
    j["cycles"] = c.cycles;
    j["max_iterations"] = s.max_iterations;
    j["armijo_shrink"] = s.armijo_shrink;
    j["armijo_slope"] = s.armijo_slope;
    j["gradient_tolerance"] = s.gradient_tolerance;
    j["stall_tolerance"] = s.stall_tolerance;
    j["stall_window"] = s.stall_window;
    j["smoothing"] = s.smoothing;
    j["magnetostatics"] = c.magnetostatics;
    j["initial_weights"] = name(c.initial_weights);
    j["initial_direction"] = {c.initial_direction.x(), c.initial_direction.y()};
    j["p_update"] = name(c.p_update);
    j["coupling_tolerance"] = c.coupling_tolerance;
    j["coupling_max_iterations"] = c.coupling_max_iterations;
    j["snapshot_every"] = c.snapshot_every;
    j["output_dir"] = c.output_dir;
    return j;
}

inline bool operator==(const SimConfig& a, const SimConfig& b) { return to_json(a) == to_json(b); }

inline void write_timeseries_csv(std::ostream& os, const TimeSeries& series) {
    for (std::size_t i = 0; i < timeseries_columns.size(); ++i) os << (i ? "," : "") << timeseries_columns[i];
    os << '\n';
    for (const auto& r : series) {
        os << r.step << ',' << format_double(r.t) << ',' << format_double(r.h_x) << ',' << format_double(r.mean_mx) << ','
           << format_double(r.mean_my) << ',' << format_double(r.max_abs_m) << ',' << format_double(r.mean_theta) << ','
           << format_double(r.max_theta) << ',' << format_double(r.gibbs) << ',' << format_double(r.magnetostatic_energy)
           << ',' << format_double(r.step_dissipation) << ',' << format_double(r.cumulative_dissipation) << ','
           << format_double(r.external_work) << ',' << format_double(r.magnetic_residual) << ','
           << format_double(r.magnetic_residual_alt) << ',' << format_double(r.thermal_rhs) << ','
           << format_double(r.thermal_residual) << ',' << format_double(r.heat_balance_residual) << ',' << r.iterations
           << ',' << r.coupling_iterations << ',' << format_double(r.coupling_residual) << '\n';
    }
}

/// Steps (c-1)N .. cN of cycle c, so both ends sit at the same field value.
inline void write_loop_csv(std::ostream& os, const TimeSeries& series, int steps_per_cycle, int cycle) {
    os << "h_x,mean_mx\n";
    const std::size_t begin = static_cast<std::size_t>((cycle - 1) * steps_per_cycle);
    for (std::size_t k = begin; k <= begin + static_cast<std::size_t>(steps_per_cycle) && k < series.size(); ++k)
        os << format_double(series[k].h_x) << ',' << format_double(series[k].mean_mx) << '\n';
}

struct RunManifest {
    std::filesystem::path directory;
    std::vector<std::string> files;  // relative to `directory`, in write order
    nlohmann::json document;
};

/// Unit strings for the time-series columns and key parameters.
inline nlohmann::json unit_table() {
    return {{"t", "s"},
            {"h_x", "1 (field = field_scale * h_x * direction, T)"},
            {"mean_mx", "A/m"},
            {"mean_my", "A/m"},
            {"max_abs_m", "A/m"},
            {"mean_theta", "K"},
            {"max_theta", "K"},
            {"gibbs", "J"},
            {"magnetostatic_energy", "J"},
            {"step_dissipation", "J"},
            {"cumulative_dissipation", "J"},
            {"external_work", "J"},
            {"magnetic_residual", "J"},
            {"magnetic_residual_alt", "J"},
            {"thermal_rhs", "J"},
            {"thermal_residual", "J"},
            {"heat_balance_residual", "1"},
            {"coupling_residual", "K"},
            {"w", "J/m^3"},
            {"u", "A"},
            {"H_c", "T"},
            {"h_c", "T m/A"},
            {"a0", "J/(K m A^2)"},
            {"b0", "J m/A^4"},
            {"c_v", "J/(m^3 K)"},
            {"K_cond", "W/(m K)"},
            {"b_robin", "W/(m^2 K)"},
            {"theta0", "K"},
            {"theta_c", "K"},
            {"theta_ext", "K"},
            {"p_par", "A/m"},
            {"tau", "s"}};
}

namespace io_detail {

inline std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot write '" + path.string() + "'");
    return os;
}

inline void check(std::ofstream& os, const std::filesystem::path& path) {
    os.flush();
    if (!os) throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace io_detail

/// Writes timeseries.csv, loop_cycle<N>.csv, snapshot CSVs and manifest.json.
inline RunManifest write_outputs(const Simulation& sim, const RunResult& result, const std::filesystem::path& out_dir) {
    namespace fs = std::filesystem;
    const SimConfig& config = sim.config();
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec || !fs::is_directory(out_dir)) throw IoError("cannot create output directory '" + out_dir.string() + "'");

    RunManifest manifest;
    manifest.directory = out_dir;
    auto write = [&](const std::string& rel, const std::function<void(std::ostream&)>& body) {
        const fs::path path = out_dir / rel;
        if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
        auto os = io_detail::open_out(path);
        body(os);
        io_detail::check(os, path);
        manifest.files.push_back(rel);
    };

    write("timeseries.csv", [&](std::ostream& os) { write_timeseries_csv(os, result.series); });
    const int spc = config.steps_per_cycle();
    const int cycles_done = static_cast<int>((result.series.size() - 1) / static_cast<std::size_t>(spc));
    for (int c = 1; c <= cycles_done; ++c)
        write("loop_cycle" + std::to_string(c) + ".csv", [&](std::ostream& os) { write_loop_csv(os, result.series, spc, c); });

    const double c_v = config.material.c_v;
    auto write_snapshot = [&](const std::string& stem, const Snapshot& s) {
        write(stem + "_weights.csv", [&](std::ostream& os) { write_weights_csv(os, s.weights, sim.atoms()); });
        write(stem + "_enthalpy.csv", [&](std::ostream& os) { write_enthalpy_csv(os, s.enthalpy, c_v); });
        write(stem + "_potential.csv", [&](std::ostream& os) { write_potential_csv(os, s.potential); });
    };
    for (const auto& [k, snap] : result.snapshots) {
        std::ostringstream stem;
        stem << "snapshots/step_" << std::string(k < 10 ? "0000" : k < 100 ? "000" : k < 1000 ? "00" : k < 10000 ? "0" : "") << k;
        write_snapshot(stem.str(), snap);
    }
    write_snapshot("final", result.final_state);
    write("mesh_nodes.csv", [&](std::ostream& os) { write_nodes_csv(os, sim.mesh()); });
    write("mesh_elements.csv", [&](std::ostream& os) { write_elements_csv(os, sim.mesh()); });

    nlohmann::json loops = nlohmann::json::array();
    for (int c = 1; c <= cycles_done; ++c)
        loops.push_back({{"cycle", c}, {"area", loop_area(result.series, spc, c)}, {"mean_theta", cycle_mean_theta(result.series, spc, c)}});
    double max_theta = 0.0;
    for (const auto& r : result.series) max_theta = std::max(max_theta, r.max_theta);

    nlohmann::json doc;
    doc["version"] = THERMOMAG_VERSION;
    doc["config"] = to_json(config);
    doc["units"] = unit_table();
    doc["waveform"] = io_detail::name(config.waveform.kind);
    doc["mesh"] = {{"level", sim.mesh().level},
                   {"nodes", sim.mesh().num_nodes()},
                   {"elements", sim.mesh().num_elements()},
                   {"magnet_nodes", sim.magnet().mesh.num_nodes()},
                   {"magnet_elements", sim.magnet().mesh.num_elements()},
                   {"atoms", sim.atoms().size()}};
    doc["timings"] = {{"wall_seconds", result.wall_seconds}, {"steps", result.series.size() - 1}};
    doc["summary"] = {{"max_theta", max_theta}, {"loops", loops}};
    doc["columns"] = std::vector<std::string>(timeseries_columns.begin(), timeseries_columns.end());
    manifest.files.push_back("manifest.json");
    doc["files"] = manifest.files;
    manifest.document = doc;
    {
        const fs::path path = out_dir / "manifest.json";
        auto os = io_detail::open_out(path);
        os << doc.dump(2) << '\n';
        io_detail::check(os, path);
    }
    return manifest;
}

}  // namespace thermomag
