// thermomag command line: run | verify | export-mesh

#include <CLI11.hpp>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "thermomag/thermomag.hpp"

namespace {

constexpr const char* usage =
    "usage: thermomag <command> [options]\n"
    "\n"
    "commands:\n"
    "  run --config PATH [--out DIR] [--cycles N] [--mesh-level L] [--atoms N] [--layers 1|3]\n"
    "      run a simulation and write CSV + manifest output\n"
    "  verify [--cycles N]\n"
    "      oracle, gradient, magnetostatic, thermal and balance checks; exit 0 iff all pass\n"
    "  export-mesh [--config PATH] [--out DIR] [--mesh-level L]\n"
    "      write mesh_nodes.csv and mesh_elements.csv\n"
    "\n"
    "Run `thermomag <command> --help` for details. The default output\n"
    "directory is $THERMOMAG_OUTPUT_DIR, else ./output.\n";

struct RunArgs {
    std::string config;
    std::string out;
    std::optional<int> cycles, mesh_level, atoms, layers;
};

// --atoms is the total atom count; with --layers 3 it must be divisible by 3.
void apply_overrides(thermomag::SimConfig& c, const RunArgs& a) {
    if (a.cycles) c.cycles = *a.cycles;
    if (a.mesh_level) c.mesh_level = *a.mesh_level;
    if (a.layers) {
        if (*a.layers == 1)
            c.layers = thermomag::middle_sphere();
        else if (*a.layers == 3)
            c.layers = thermomag::three_layers();
        else
            throw thermomag::ConfigError("layers", "--layers must be 1 or 3");
    }
    if (a.atoms) {
        const int nl = static_cast<int>(c.layers.size());
        if (*a.atoms < 2 * nl || *a.atoms % nl != 0)
            throw thermomag::ConfigError("n_angles", "--atoms must be a multiple of the layer count (" + std::to_string(nl) + ")");
        c.n_angles = *a.atoms / nl;
    }
    if (!a.out.empty()) c.output_dir = a.out;
    c.validate();
}

int cmd_run(const RunArgs& a) {
    using namespace thermomag;
    if (!std::filesystem::exists(a.config)) {
        std::cerr << "error: config file not found: " << a.config << '\n';
        return 1;
    }
    SimConfig cfg = load_config(a.config);
    apply_overrides(cfg, a);
    const Simulation sim(cfg);
    std::cout << "mesh level " << cfg.mesh_level << ": " << sim.mesh().num_nodes() << " nodes, " << sim.mesh().num_elements()
              << " elements, " << sim.model().num_elements() << " in the magnet; " << sim.atoms().size() << " atoms; "
              << cfg.num_steps() << " steps\n";
    const int report = std::max(1, cfg.steps_per_cycle());
    const RunResult result = sim.run([&](const StepView& v) {
        if (v.step > 0 && v.step % report == 0)
            std::cout << "cycle " << v.step / report << " done: t=" << v.t << " mean m_x=" << v.record.mean_mx
                      << " mean theta=" << v.record.mean_theta << '\n';
    });
    const RunManifest m = write_outputs(sim, result, cfg.output_dir);
    std::cout << "wrote " << m.files.size() << " files to " << m.directory.string() << " (" << result.wall_seconds << " s)\n";
    return 0;
}

int cmd_verify(int cycles) {
    const auto report = thermomag::verify::run_suite(cycles);
    for (const auto& c : report) std::cout << (c.passed ? "PASS  " : "FAIL  ") << c.name << ": " << c.detail << '\n';
    const bool ok = thermomag::verify::all_passed(report);
    std::cout << (ok ? "all checks passed" : "some checks failed") << '\n';
    return ok ? 0 : 1;
}

int cmd_export_mesh(const RunArgs& a) {
    using namespace thermomag;
    SimConfig cfg;
    cfg.output_dir = default_output_dir();
    if (!a.config.empty()) {
        if (!std::filesystem::exists(a.config)) {
            std::cerr << "error: config file not found: " << a.config << '\n';
            return 1;
        }
        cfg = load_config(a.config);
    }
    apply_overrides(cfg, a);
    const Triangulation mesh = refine_uniform(build_mesh(cfg.outer, cfg.magnet, cfg.base_divisions), cfg.mesh_level);
    const std::filesystem::path dir(cfg.output_dir);
    std::filesystem::create_directories(dir);
    for (const char* name : {"mesh_nodes.csv", "mesh_elements.csv"}) {
        std::ofstream os(dir / name);
        if (!os) throw IoError("cannot write '" + (dir / name).string() + "'");
        if (std::strcmp(name, "mesh_nodes.csv") == 0)
            write_nodes_csv(os, mesh);
        else
            write_elements_csv(os, mesh);
    }
    std::cout << mesh.num_nodes() << " nodes, " << mesh.num_elements() << " elements written to " << dir.string() << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        std::cerr << usage;
        return 2;
    }
    const std::string command = argv[1];
    if (command == "-h" || command == "--help" || command == "help") {
        std::cout << usage;
        return 0;
    }
    if (command != "run" && command != "verify" && command != "export-mesh") {
        std::cerr << "unknown command '" << command << "'\n\n" << usage;
        return 2;
    }

    CLI::App app{"thermo-magnetic hysteresis simulator", "thermomag"};
    app.set_version_flag("--version", std::string(THERMOMAG_VERSION));
    app.require_subcommand(1);

    RunArgs run_args, mesh_args;
    auto* run = app.add_subcommand("run", "run a simulation");
    run->add_option("--config", run_args.config, "JSON configuration file")->required();
    run->add_option("--out", run_args.out, "output directory");
    run->add_option("--cycles", run_args.cycles, "number of field cycles")->check(CLI::PositiveNumber);
    run->add_option("--mesh-level", run_args.mesh_level, "uniform refinements of the base mesh")->check(CLI::Range(0, 6));
    run->add_option("--atoms", run_args.atoms, "total number of atoms");
    run->add_option("--layers", run_args.layers, "spherical layers: 1 (middle sphere) or 3");

    int verify_cycles = 1;
    auto* ver = app.add_subcommand("verify", "run the self-check suite");
    ver->add_option("--cycles", verify_cycles, "cycles of the balance-invariant run")->check(CLI::PositiveNumber);

    auto* mesh = app.add_subcommand("export-mesh", "write the mesh as CSV");
    mesh->add_option("--config", mesh_args.config, "JSON configuration file (geometry keys)");
    mesh->add_option("--out", mesh_args.out, "output directory");
    mesh->add_option("--mesh-level", mesh_args.mesh_level, "uniform refinements")->check(CLI::Range(0, 6));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (*run) return cmd_run(run_args);
        if (*ver) return cmd_verify(verify_cycles);
        return cmd_export_mesh(mesh_args);
    } catch (const thermomag::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
