// Batch driver for the acoustic source reconstruction pipeline.
//
// Subcommands:
//   mesh     build a triangulated disk mesh and write it to CSV
//   forward  generate synthetic observations from the configured phantom
//   invert   reconstruct from an existing observation file
//   run      forward + invert end to end
//   metrics  compare an estimate CSV against a truth CSV
//
// Exit codes: 0 success, 1 configuration error, 2 numerical failure.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "lsenkf/experiment.hpp"

namespace {

int exit_code_for(const std::exception& err) {
    return dynamic_cast<const lsenkf::ConfigError*>(&err) != nullptr ? 1 : 2;
}

// Precedence: --output-dir flag, then LSENKF_OUTPUT_DIR, then the config file.
std::string resolve_output_dir(const std::string& flag_value, const lsenkf::RunConfig& config) {
    if (!flag_value.empty()) return flag_value;
    if (const char* env = std::getenv("LSENKF_OUTPUT_DIR"); env != nullptr && *env != '\0')
        return env;
    return config.output_dir;
}

std::string join_path(const std::string& dir, const std::string& name) {
    return (std::filesystem::path(dir) / name).string();
}

void print_metric(const char* key, double value) {
    std::printf("%s = %.17g\n", key, value);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Reconstruction of piecewise-constant acoustic sources from multi-frequency "
                 "boundary pressure data"};
    app.require_subcommand(1);

    double mesh_radius = 1.0;
    double mesh_target_h = 0.1;
    std::string mesh_out = "mesh.csv";
    CLI::App* cmd_mesh = app.add_subcommand("mesh", "Build a disk mesh and write it to CSV");
    cmd_mesh->add_option("--radius", mesh_radius, "Disk radius")->check(CLI::PositiveNumber);
    cmd_mesh->add_option("--target-h", mesh_target_h, "Target element size")
        ->check(CLI::PositiveNumber);
    cmd_mesh->add_option("--out", mesh_out, "Output CSV path");

    std::string config_path;
    std::string output_dir_flag;
    std::string data_path;
    std::string estimate_path;
    std::string truth_path;

    CLI::App* cmd_forward =
        app.add_subcommand("forward", "Generate synthetic observations for the configured phantom");
    cmd_forward->add_option("--config", config_path, "Run configuration file")->required();
    cmd_forward->add_option("--output-dir", output_dir_flag, "Override the output directory");

    CLI::App* cmd_invert =
        app.add_subcommand("invert", "Reconstruct the source from an observation file");
    cmd_invert->add_option("--config", config_path, "Run configuration file")->required();
    cmd_invert->add_option("--data", data_path,
                           "Observation CSV (default: <output-dir>/data.csv)");
    cmd_invert->add_option("--output-dir", output_dir_flag, "Override the output directory");

    CLI::App* cmd_run = app.add_subcommand("run", "Data generation and inversion end to end");
    cmd_run->add_option("--config", config_path, "Run configuration file")->required();
    cmd_run->add_option("--output-dir", output_dir_flag, "Override the output directory");

    CLI::App* cmd_metrics =
        app.add_subcommand("metrics", "Relative L2 error and Jaccard index of an estimate");
    cmd_metrics->add_option("--config", config_path, "Run configuration file")->required();
    cmd_metrics->add_option("--estimate", estimate_path, "Estimate field CSV")->required();
    cmd_metrics->add_option("--truth", truth_path, "Truth field CSV")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        const int code = app.exit(err);
        return code == 0 ? 0 : 1;
    }

    try {
        if (cmd_mesh->parsed()) {
            const lsenkf::TriMesh mesh = lsenkf::build_disk_mesh(mesh_radius, mesh_target_h);
            lsenkf::check_mesh_invariants(mesh);
            lsenkf::export_mesh(mesh, mesh_out);
            std::printf("wrote %s (%d nodes, %d elements)\n", mesh_out.c_str(), mesh.node_count(),
                        mesh.element_count());
            return 0;
        }

        lsenkf::RunConfig config = lsenkf::load_run_config(config_path);
        const std::string out_dir = resolve_output_dir(output_dir_flag, config);

        if (cmd_forward->parsed()) {
            lsenkf::run_forward_stage(config, out_dir);
            std::printf("wrote observations to %s\n", out_dir.c_str());
        } else if (cmd_invert->parsed()) {
            const std::string src =
                data_path.empty() ? join_path(out_dir, "data.csv") : data_path;
            const lsenkf::ObservationSet data = lsenkf::import_observations(src);
            const lsenkf::FilterResult result =
                lsenkf::run_inversion_stage(config, out_dir, data);
            std::printf("finished after %d iteration(s), outputs in %s\n", result.iterations_run,
                        out_dir.c_str());
        } else if (cmd_run->parsed()) {
            config.output_dir = out_dir;
            lsenkf::ObservationSet data;
            try {
                std::filesystem::create_directories(out_dir);
                std::ofstream echo(join_path(out_dir, "config_echo.txt"), std::ios::binary);
                echo << lsenkf::config_echo_text(config);
                data = lsenkf::run_forward_stage(config, out_dir);
            } catch (const std::exception& err) {
                std::cerr << "lsenkf run: data generation stage failed: " << err.what() << "\n";
                return exit_code_for(err);
            }
            try {
                const lsenkf::FilterResult result =
                    lsenkf::run_inversion_stage(config, out_dir, data);
                std::printf("finished after %d iteration(s), outputs in %s\n",
                            result.iterations_run, out_dir.c_str());
            } catch (const std::exception& err) {
                std::cerr << "lsenkf run: inversion stage failed: " << err.what() << "\n";
                return exit_code_for(err);
            }
        } else if (cmd_metrics->parsed()) {
            const lsenkf::NodalField estimate = lsenkf::import_nodal_field(estimate_path);
            const lsenkf::NodalField truth = lsenkf::import_nodal_field(truth_path);
            const lsenkf::TriMesh mesh =
                lsenkf::build_disk_mesh(config.domain_radius, config.mesh_h_inversion);
            if (estimate.size() != mesh.node_count() || truth.size() != mesh.node_count())
                throw lsenkf::ConfigError(
                    "field CSVs do not match the inversion mesh of this config");
            const lsenkf::Metrics metrics = lsenkf::compute_metrics(
                estimate, truth, mesh, lsenkf::make_threshold_spec(config));
            print_metric("rel_l2_error", metrics.rel_l2_error);
            print_metric("jaccard", metrics.jaccard);
        }
    } catch (const std::exception& err) {
        std::cerr << "lsenkf: error: " << err.what() << "\n";
        return exit_code_for(err);
    }
    return 0;
}
