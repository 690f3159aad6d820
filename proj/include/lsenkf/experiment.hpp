#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "lsenkf/enkf.hpp"
#include "lsenkf/forward_operator.hpp"
#include "lsenkf/level_set.hpp"
#include "lsenkf/mesh.hpp"

namespace lsenkf {

enum class PhantomKind { SingleDisk, TwoDisks, Taichi };

// Ground-truth source region. SingleDisk/TwoDisks use centers/radii pairwise;
// Taichi uses centers[0] and radii[0] as the enclosing disk.
struct Phantom {
    PhantomKind kind = PhantomKind::SingleDisk;
    std::vector<Point2> centers;
    std::vector<double> radii;
    double amplitude = 1.0;
};

bool phantom_contains(const Phantom& phantom, const Point2& p);

// Every phantom must sit inside the domain disk with a 5% radius margin.
void validate_phantom(const Phantom& phantom, double domain_radius);

// Nodal indicator: amplitude inside the region, 0 outside.
NodalField rasterize_phantom(const Phantom& phantom, const TriMesh& mesh);

struct Metrics {
    double rel_l2_error = 0.0;
    double jaccard = 0.0;
};

// |A n B| / |A u B| over the node sets {field >= threshold}; 1 when both
// sets are empty.
double jaccard_index(const NodalField& a, const NodalField& b, double threshold);

// Lumped-area weighted relative L2 distance plus support Jaccard at half the
// largest phase value.
Metrics compute_metrics(const NodalField& f_est, const NodalField& f_true, const TriMesh& mesh,
                        const ThresholdSpec& spec);

// ASCII PGM (P2) raster of the nodal field over the mesh bounding square,
// linear min-max grayscale, 0 outside the disk; a constant field renders as
// uniform mid-gray. Byte-deterministic.
void render_pgm(const NodalField& field, const TriMesh& mesh, int resolution,
                const std::string& path);

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Flat key=value run description; one config fully determines a run.
struct RunConfig {
    double domain_radius = 1.0;
    double mesh_h_data = 0.05;       // fine mesh, data generation
    double mesh_h_inversion = 0.1;   // coarse mesh, inversion
    double receiver_half_side = 2.0;
    int receivers_per_side = 7;
    double freq_min = 50.0;
    double freq_max = 10000.0;
    int freq_count = 10;
    FrequencyUnit freq_unit = FrequencyUnit::Hertz;
    double sound_speed = 343.0;
    int quadrature_order = 2;
    double noise_delta = 0.01;
    double prior_nu = 1.0;
    double prior_length_scale = 0.2;
    double prior_sigma2 = 1.0;
    std::vector<double> cut_levels = {0.0};
    std::vector<double> phase_values = {0.0, 1.0};
    double hj_time_step = 0.1;
    double hj_gradient_floor = 0.0;
    bool hj_cfl_guard = true;
    bool hj_reinit = false;
    FilterAlgorithm algorithm = FilterAlgorithm::AugmentedSource;
    int ensemble_size = 1000;
    int max_iterations = 100;
    double discrepancy_tau = 1.2;
    EstimateVariant primary_estimate = EstimateVariant::MapOfMean;
    bool perturb_observations = false;
    PhantomKind phantom = PhantomKind::SingleDisk;
    std::vector<Point2> phantom_centers;  // empty selects the kind's default
    std::vector<double> phantom_radii;
    double phantom_amplitude = 1.0;
    std::uint64_t seed = 1;
    int threads = 1;
    std::string output_dir = "out";
    int pgm_resolution = 64;
};

// Parses the key=value text (# comments, blank lines allowed); unknown keys
// and malformed values raise ConfigError.
RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::string& path);

// Canonical serialization of the effective config, every key present, fixed
// order. threads and output_dir are excluded so identical science settings
// echo identically regardless of execution environment.
std::string config_echo_text(const RunConfig& config);

// The phantom with kind defaults applied where the config left lists empty.
Phantom make_phantom(const RunConfig& config);

ThresholdSpec make_threshold_spec(const RunConfig& config);
PriorSpec make_prior_spec(const RunConfig& config);
HJConfig make_hj_config(const RunConfig& config);
FilterConfig make_filter_config(const RunConfig& config);

// Data-generation stage: fine mesh, forward assembly, phantom rasterization,
// noisy data. Writes data.csv, f_true.csv, truth.pgm into out_dir.
ObservationSet run_forward_stage(const RunConfig& config, const std::string& out_dir);

// Inversion stage on the coarse mesh. Writes iterations.csv, hj_clamp.csv,
// phi_mean.csv, f_map_of_mean.csv (+ f_mean_of_maps.csv), truth_inversion.csv,
// estimate PGMs and metrics.txt into out_dir. Returns the filter result.
FilterResult run_inversion_stage(const RunConfig& config, const std::string& out_dir,
                                 const ObservationSet& data);

// End-to-end run: config echo, forward stage, inversion stage.
FilterResult run_experiment(const RunConfig& config);

}  // namespace lsenkf
