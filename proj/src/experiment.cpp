#include "lsenkf/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "lsenkf/rng.hpp"

namespace lsenkf {

namespace {

constexpr std::uint64_t kDataNoiseTag = 1ull << 20;

bool inside_disk(const Point2& p, const Point2& c, double r) {
    return std::hypot(p.x - c.x, p.y - c.y) <= r;
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string format_double_list(const std::vector<double>& values) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out += ",";
        out += format_double(values[i]);
    }
    return out;
}

std::string format_point_list(const std::vector<Point2>& points) {
    std::string out;
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (i) out += ";";
        out += format_double(points[i].x) + "," + format_double(points[i].y);
    }
    return out;
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << content;
    if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace

bool phantom_contains(const Phantom& phantom, const Point2& p) {
    switch (phantom.kind) {
        case PhantomKind::SingleDisk:
            return inside_disk(p, phantom.centers.at(0), phantom.radii.at(0));
        case PhantomKind::TwoDisks:
            return inside_disk(p, phantom.centers.at(0), phantom.radii.at(0)) ||
                   inside_disk(p, phantom.centers.at(1), phantom.radii.at(1));
        case PhantomKind::Taichi: {
            const Point2 c = phantom.centers.at(0);
            const double r = phantom.radii.at(0);
            const Point2 q{p.x - c.x, p.y - c.y};
            if (std::hypot(q.x, q.y) > r) return false;
            const Point2 upper{0.0, r / 2.0}, lower{0.0, -r / 2.0};
            const bool in_left = q.x <= 0.0;
            const bool in_upper_lobe = inside_disk(q, upper, r / 2.0);
            const bool in_lower_lobe = inside_disk(q, lower, r / 2.0);
            const bool in_dark_eye = inside_disk(q, lower, r / 8.0);
            const bool in_light_eye = inside_disk(q, upper, r / 8.0);
            // (left half u upper lobe) \ lower lobe, plus the dark eye, minus the light eye
            bool dark = (in_left || in_upper_lobe) && !in_lower_lobe;
            dark = (dark || in_dark_eye) && !in_light_eye;
            return dark;
        }
    }
    return false;
}

void validate_phantom(const Phantom& phantom, double domain_radius) {
    const std::size_t need = phantom.kind == PhantomKind::TwoDisks ? 2 : 1;
    if (phantom.centers.size() != need || phantom.radii.size() != need)
        throw std::invalid_argument("phantom needs " + std::to_string(need) +
                                    " center(s) and radius(/radii)");
    if (!(domain_radius > 0.0)) throw std::invalid_argument("domain radius must be positive");
    for (std::size_t i = 0; i < need; ++i) {
        if (!(phantom.radii[i] > 0.0)) throw std::invalid_argument("phantom radii must be positive");
        const double reach = std::hypot(phantom.centers[i].x, phantom.centers[i].y) + phantom.radii[i];
        if (reach > 0.95 * domain_radius)
            throw std::invalid_argument("phantom escapes the domain margin (5% of radius)");
    }
    if (!std::isfinite(phantom.amplitude)) throw std::invalid_argument("phantom amplitude must be finite");
}

NodalField rasterize_phantom(const Phantom& phantom, const TriMesh& mesh) {
    validate_phantom(phantom, mesh.radius);
    NodalField f(mesh.node_count());
    for (int i = 0; i < mesh.node_count(); ++i)
        f(i) = phantom_contains(phantom, mesh.nodes[i]) ? phantom.amplitude : 0.0;
    return f;
}

double jaccard_index(const NodalField& a, const NodalField& b, double threshold) {
    if (a.size() != b.size()) throw std::invalid_argument("field length mismatch");
    int both = 0, either = 0;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        const bool in_a = a(i) >= threshold, in_b = b(i) >= threshold;
        both += in_a && in_b;
        either += in_a || in_b;
    }
    return either == 0 ? 1.0 : static_cast<double>(both) / either;
}

Metrics compute_metrics(const NodalField& f_est, const NodalField& f_true, const TriMesh& mesh,
                        const ThresholdSpec& spec) {
    validate_threshold_spec(spec);
    if (f_est.size() != mesh.node_count() || f_true.size() != mesh.node_count())
        throw std::invalid_argument("field length mismatch");
    Metrics m;
    m.rel_l2_error = relative_l2_error(f_est, f_true, nodal_lumped_areas(mesh));
    const double w = *std::max_element(spec.phase_values.begin(), spec.phase_values.end());
    m.jaccard = jaccard_index(f_est, f_true, w / 2.0);
    return m;
}

void render_pgm(const NodalField& field, const TriMesh& mesh, int resolution,
                const std::string& path) {
    if (resolution < 16) throw std::invalid_argument("pgm resolution must be >= 16");
    if (field.size() != mesh.node_count()) throw std::invalid_argument("field length mismatch");
    const double r = mesh.radius;
    const double lo = field.minCoeff(), hi = field.maxCoeff();
    const bool degenerate = !(hi > lo);

    std::ostringstream out;
    out << "P2\n" << resolution << " " << resolution << "\n255\n";
    for (int row = 0; row < resolution; ++row) {
        const double y = r - (row + 0.5) * 2.0 * r / resolution;
        for (int col = 0; col < resolution; ++col) {
            const double x = -r + (col + 0.5) * 2.0 * r / resolution;
            int intensity = 0;
            if (degenerate) {
                intensity = 128;
            } else {
                // locate the containing element; outside the mesh stays black
                for (int e = 0; e < mesh.element_count(); ++e) {
                    const auto& el = mesh.elements[e];
                    const Point2 &p0 = mesh.nodes[el[0]], &p1 = mesh.nodes[el[1]],
                                 &p2 = mesh.nodes[el[2]];
                    const double det =
                        (p1.x - p0.x) * (p2.y - p0.y) - (p2.x - p0.x) * (p1.y - p0.y);
                    const double l1 = ((x - p0.x) * (p2.y - p0.y) - (p2.x - p0.x) * (y - p0.y)) / det;
                    const double l2 = ((p1.x - p0.x) * (y - p0.y) - (x - p0.x) * (p1.y - p0.y)) / det;
                    const double l0 = 1.0 - l1 - l2;
                    const double tol = -1e-12;
                    if (l0 >= tol && l1 >= tol && l2 >= tol) {
                        const double v =
                            l0 * field(el[0]) + l1 * field(el[1]) + l2 * field(el[2]);
                        const double t = (v - lo) / (hi - lo);
                        intensity = static_cast<int>(std::lround(255.0 * std::clamp(t, 0.0, 1.0)));
                        break;
                    }
                }
            }
            out << intensity << (col + 1 == resolution ? "" : " ");
        }
        out << "\n";
    }
    write_text_file(path, out.str());
}

namespace {

std::vector<double> parse_double_list(const std::string& value, const std::string& key) {
    std::vector<double> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t pos = 0;
            out.push_back(std::stod(item, &pos));
            while (pos < item.size() && std::isspace(static_cast<unsigned char>(item[pos]))) ++pos;
            if (pos != item.size()) throw std::invalid_argument("");
        } catch (const std::exception&) {
            throw ConfigError("bad number '" + item + "' in " + key);
        }
    }
    if (out.empty()) throw ConfigError("empty list for " + key);
    return out;
}

std::vector<Point2> parse_point_list(const std::string& value, const std::string& key) {
    std::vector<Point2> out;
    std::stringstream ss(value);
    std::string pair;
    while (std::getline(ss, pair, ';')) {
        const auto coords = parse_double_list(pair, key);
        if (coords.size() != 2) throw ConfigError("point in " + key + " must be x,y");
        out.push_back({coords[0], coords[1]});
    }
    if (out.empty()) throw ConfigError("empty list for " + key);
    return out;
}

double parse_double(const std::string& value, const std::string& key) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("bad number '" + value + "' for " + key);
    }
}

long parse_long(const std::string& value, const std::string& key) {
    try {
        std::size_t pos = 0;
        const long v = std::stol(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("bad integer '" + value + "' for " + key);
    }
}

std::uint64_t parse_u64(const std::string& value, const std::string& key) {
    try {
        std::size_t pos = 0;
        const unsigned long long v = std::stoull(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("bad integer '" + value + "' for " + key);
    }
}

bool parse_bool(const std::string& value, const std::string& key) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw ConfigError("bad boolean '" + value + "' for " + key + " (use true/false)");
}

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

}  // namespace

RunConfig parse_run_config(const std::string& text) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        const auto eq = stripped.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno) + " is not key = value");
        const std::string key = trim(stripped.substr(0, eq));
        const std::string value = trim(stripped.substr(eq + 1));
        if (key.empty() || value.empty())
            throw ConfigError("line " + std::to_string(lineno) + " has empty key or value");

        if (key == "domain_radius") cfg.domain_radius = parse_double(value, key);
        else if (key == "mesh_h_data") cfg.mesh_h_data = parse_double(value, key);
        else if (key == "mesh_h_inversion") cfg.mesh_h_inversion = parse_double(value, key);
        else if (key == "receiver_half_side") cfg.receiver_half_side = parse_double(value, key);
        else if (key == "receivers_per_side") cfg.receivers_per_side = static_cast<int>(parse_long(value, key));
        else if (key == "freq_min") cfg.freq_min = parse_double(value, key);
        else if (key == "freq_max") cfg.freq_max = parse_double(value, key);
        else if (key == "freq_count") cfg.freq_count = static_cast<int>(parse_long(value, key));
        else if (key == "freq_unit") {
            if (value == "hz") cfg.freq_unit = FrequencyUnit::Hertz;
            else if (value == "wavenumber") cfg.freq_unit = FrequencyUnit::WaveNumber;
            else throw ConfigError("freq_unit must be hz or wavenumber");
        } else if (key == "sound_speed") cfg.sound_speed = parse_double(value, key);
        else if (key == "quadrature_order") cfg.quadrature_order = static_cast<int>(parse_long(value, key));
        else if (key == "noise_delta") cfg.noise_delta = parse_double(value, key);
        else if (key == "prior_nu") cfg.prior_nu = parse_double(value, key);
        else if (key == "prior_length_scale") cfg.prior_length_scale = parse_double(value, key);
        else if (key == "prior_sigma2") cfg.prior_sigma2 = parse_double(value, key);
        else if (key == "cut_levels") cfg.cut_levels = parse_double_list(value, key);
        else if (key == "phase_values") cfg.phase_values = parse_double_list(value, key);
        else if (key == "hj_time_step") cfg.hj_time_step = parse_double(value, key);
        else if (key == "hj_gradient_floor") cfg.hj_gradient_floor = parse_double(value, key);
        else if (key == "hj_cfl_guard") cfg.hj_cfl_guard = parse_bool(value, key);
        else if (key == "hj_reinit") cfg.hj_reinit = parse_bool(value, key);
        else if (key == "algorithm") {
            if (value == "augmented_source") cfg.algorithm = FilterAlgorithm::AugmentedSource;
            else if (value == "predicted_data") cfg.algorithm = FilterAlgorithm::PredictedData;
            else throw ConfigError("algorithm must be augmented_source or predicted_data");
        } else if (key == "ensemble_size") cfg.ensemble_size = static_cast<int>(parse_long(value, key));
        else if (key == "max_iterations") cfg.max_iterations = static_cast<int>(parse_long(value, key));
        else if (key == "discrepancy_tau") cfg.discrepancy_tau = parse_double(value, key);
        else if (key == "primary_estimate") {
            if (value == "map_of_mean") cfg.primary_estimate = EstimateVariant::MapOfMean;
            else if (value == "mean_of_maps") cfg.primary_estimate = EstimateVariant::MeanOfMaps;
            else throw ConfigError("primary_estimate must be map_of_mean or mean_of_maps");
        } else if (key == "perturb_observations") cfg.perturb_observations = parse_bool(value, key);
        else if (key == "phantom") {
            if (value == "single_disk") cfg.phantom = PhantomKind::SingleDisk;
            else if (value == "two_disks") cfg.phantom = PhantomKind::TwoDisks;
            else if (value == "taichi") cfg.phantom = PhantomKind::Taichi;
            else throw ConfigError("phantom must be single_disk, two_disks or taichi");
        } else if (key == "phantom_centers") cfg.phantom_centers = parse_point_list(value, key);
        else if (key == "phantom_radii") cfg.phantom_radii = parse_double_list(value, key);
        else if (key == "phantom_amplitude") cfg.phantom_amplitude = parse_double(value, key);
        else if (key == "seed") cfg.seed = parse_u64(value, key);
        else if (key == "threads") cfg.threads = static_cast<int>(parse_long(value, key));
        else if (key == "output_dir") cfg.output_dir = value;
        else if (key == "pgm_resolution") cfg.pgm_resolution = static_cast<int>(parse_long(value, key));
        else throw ConfigError("unknown config key '" + key + "'");
    }
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_run_config(buffer.str());
}

std::string config_echo_text(const RunConfig& cfg) {
    const Phantom ph = make_phantom(cfg);
    std::ostringstream out;
    out << "domain_radius = " << format_double(cfg.domain_radius) << "\n"
        << "mesh_h_data = " << format_double(cfg.mesh_h_data) << "\n"
        << "mesh_h_inversion = " << format_double(cfg.mesh_h_inversion) << "\n"
        << "receiver_half_side = " << format_double(cfg.receiver_half_side) << "\n"
        << "receivers_per_side = " << cfg.receivers_per_side << "\n"
        << "freq_min = " << format_double(cfg.freq_min) << "\n"
        << "freq_max = " << format_double(cfg.freq_max) << "\n"
        << "freq_count = " << cfg.freq_count << "\n"
        << "freq_unit = " << (cfg.freq_unit == FrequencyUnit::Hertz ? "hz" : "wavenumber") << "\n"
        << "sound_speed = " << format_double(cfg.sound_speed) << "\n"
        << "quadrature_order = " << cfg.quadrature_order << "\n"
        << "noise_delta = " << format_double(cfg.noise_delta) << "\n"
        << "prior_nu = " << format_double(cfg.prior_nu) << "\n"
        << "prior_length_scale = " << format_double(cfg.prior_length_scale) << "\n"
        << "prior_sigma2 = " << format_double(cfg.prior_sigma2) << "\n"
        << "cut_levels = " << format_double_list(cfg.cut_levels) << "\n"
        << "phase_values = " << format_double_list(cfg.phase_values) << "\n"
        << "hj_time_step = " << format_double(cfg.hj_time_step) << "\n"
        << "hj_gradient_floor = " << format_double(cfg.hj_gradient_floor) << "\n"
        << "hj_cfl_guard = " << (cfg.hj_cfl_guard ? "true" : "false") << "\n"
        << "hj_reinit = " << (cfg.hj_reinit ? "true" : "false") << "\n"
        << "algorithm = "
        << (cfg.algorithm == FilterAlgorithm::AugmentedSource ? "augmented_source"
                                                              : "predicted_data")
        << "\n"
        << "ensemble_size = " << cfg.ensemble_size << "\n"
        << "max_iterations = " << cfg.max_iterations << "\n"
        << "discrepancy_tau = " << format_double(cfg.discrepancy_tau) << "\n"
        << "primary_estimate = "
        << (cfg.primary_estimate == EstimateVariant::MapOfMean ? "map_of_mean" : "mean_of_maps")
        << "\n"
        << "perturb_observations = " << (cfg.perturb_observations ? "true" : "false") << "\n"
        << "phantom = "
        << (cfg.phantom == PhantomKind::SingleDisk
                ? "single_disk"
                : (cfg.phantom == PhantomKind::TwoDisks ? "two_disks" : "taichi"))
        << "\n"
        << "phantom_centers = " << format_point_list(ph.centers) << "\n"
        << "phantom_radii = " << format_double_list(ph.radii) << "\n"
        << "phantom_amplitude = " << format_double(cfg.phantom_amplitude) << "\n"
        << "seed = " << cfg.seed << "\n"
        << "pgm_resolution = " << cfg.pgm_resolution << "\n";
    return out.str();
}

Phantom make_phantom(const RunConfig& cfg) {
    Phantom ph;
    ph.kind = cfg.phantom;
    ph.amplitude = cfg.phantom_amplitude;
    if (!cfg.phantom_centers.empty() || !cfg.phantom_radii.empty()) {
        ph.centers = cfg.phantom_centers;
        ph.radii = cfg.phantom_radii;
    } else {
        switch (cfg.phantom) {
            case PhantomKind::SingleDisk:
                ph.centers = {{0.1, 0.1}};
                ph.radii = {0.45};
                break;
            case PhantomKind::TwoDisks:
                ph.centers = {{-0.4, 0.0}, {0.4, 0.0}};
                ph.radii = {0.25, 0.25};
                break;
            case PhantomKind::Taichi:
                ph.centers = {{0.0, 0.0}};
                ph.radii = {0.5};
                break;
        }
        // scale defaults with the domain so nonunit disks stay valid
        for (auto& c : ph.centers) {
            c.x *= cfg.domain_radius;
            c.y *= cfg.domain_radius;
        }
        for (auto& r : ph.radii) r *= cfg.domain_radius;
    }
    validate_phantom(ph, cfg.domain_radius);
    return ph;
}

ThresholdSpec make_threshold_spec(const RunConfig& cfg) {
    ThresholdSpec spec{cfg.cut_levels, cfg.phase_values};
    validate_threshold_spec(spec);
    return spec;
}

PriorSpec make_prior_spec(const RunConfig& cfg) {
    PriorSpec spec;
    spec.nu = cfg.prior_nu;
    spec.length_scale = cfg.prior_length_scale;
    spec.sigma2 = cfg.prior_sigma2;
    return spec;
}

HJConfig make_hj_config(const RunConfig& cfg) {
    HJConfig hj;
    hj.time_step = cfg.hj_time_step;
    hj.gradient_floor = cfg.hj_gradient_floor;
    hj.cfl_guard = cfg.hj_cfl_guard;
    hj.reinitialize = cfg.hj_reinit;
    return hj;
}

FilterConfig make_filter_config(const RunConfig& cfg) {
    FilterConfig fc;
    fc.ensemble_size = cfg.ensemble_size;
    fc.max_iterations = cfg.max_iterations;
    fc.discrepancy_tau = cfg.discrepancy_tau;
    fc.algorithm = cfg.algorithm;
    fc.primary_estimate = cfg.primary_estimate;
    fc.perturb_observations = cfg.perturb_observations;
    fc.threads = cfg.threads;
    validate_filter_config(fc);
    return fc;
}

namespace {

void validate_run_config(const RunConfig& cfg) {
    if (!(cfg.domain_radius > 0.0)) throw ConfigError("domain_radius must be positive");
    if (!(cfg.mesh_h_data > 0.0 && cfg.mesh_h_data < cfg.domain_radius))
        throw ConfigError("mesh_h_data must be in (0, domain_radius)");
    if (!(cfg.mesh_h_inversion > 0.0 && cfg.mesh_h_inversion < cfg.domain_radius))
        throw ConfigError("mesh_h_inversion must be in (0, domain_radius)");
    if (!(cfg.receiver_half_side > cfg.domain_radius))
        throw ConfigError("receiver_half_side must exceed domain_radius");
    if (cfg.receivers_per_side < 2) throw ConfigError("receivers_per_side must be >= 2");
    if (cfg.freq_count < 1) throw ConfigError("freq_count must be >= 1");
    if (!(cfg.freq_min > 0.0) || !(cfg.freq_max >= cfg.freq_min))
        throw ConfigError("need 0 < freq_min <= freq_max");
    if (!(cfg.sound_speed > 0.0)) throw ConfigError("sound_speed must be positive");
    if (cfg.quadrature_order < 1 || cfg.quadrature_order > 3)
        throw ConfigError("quadrature_order must be 1, 2 or 3");
    if (cfg.noise_delta < 0.0) throw ConfigError("noise_delta must be >= 0");
    if (cfg.pgm_resolution < 16) throw ConfigError("pgm_resolution must be >= 16");
    if (cfg.threads < 0) throw ConfigError("threads must be >= 0");
    try {
        make_threshold_spec(cfg);
        make_filter_config(cfg);
        make_phantom(cfg);
    } catch (const std::invalid_argument& err) {
        throw ConfigError(err.what());
    }
}

std::string join_path(const std::string& dir, const std::string& name) {
    return (std::filesystem::path(dir) / name).string();
}

std::string iteration_log_text(const FilterResult& result, bool augmented) {
    std::ostringstream out;
    out << "iter,misfit,est_variant,l2_error_vs_truth\n";
    auto row = [&out](int iter, double misfit, const char* variant, double err) {
        out << iter << "," << format_double(misfit) << "," << variant << ","
            << (std::isnan(err) ? std::string() : format_double(err)) << "\n";
    };
    for (const auto& rec : result.history) {
        row(rec.iteration, rec.misfit_map_of_mean, "map_of_mean", rec.rel_error_map_of_mean);
        if (augmented)
            row(rec.iteration, rec.misfit_mean_of_maps, "mean_of_maps", rec.rel_error_mean_of_maps);
    }
    return out.str();
}

}  // namespace

ObservationSet run_forward_stage(const RunConfig& cfg, const std::string& out_dir) {
    validate_run_config(cfg);
    std::filesystem::create_directories(out_dir);

    const TriMesh mesh_fine = build_disk_mesh(cfg.domain_radius, cfg.mesh_h_data);
    const ReceiverArray receivers = square_receivers(cfg.receiver_half_side, cfg.receivers_per_side);
    const WaveNumberGrid kgrid = make_wavenumber_grid(cfg.freq_min, cfg.freq_max, cfg.freq_count,
                                                      cfg.freq_unit, cfg.sound_speed);
    const TriQuadRule quad = triangle_quadrature(cfg.quadrature_order);
    const StackedForwardOperator op_fine =
        assemble_forward(mesh_fine, receivers, kgrid, quad, cfg.threads);

    const Phantom phantom = make_phantom(cfg);
    const NodalField f_true = rasterize_phantom(phantom, mesh_fine);
    const NoiseModel noise{cfg.noise_delta};
    ObservationSet data;
    data.receiver_count = op_fine.receiver_count;
    data.values = generate_data(op_fine, f_true, noise, derive_seed(cfg.seed, kDataNoiseTag));

    export_observations(data.values, data.receiver_count, join_path(out_dir, "data.csv"));
    export_nodal_field(mesh_fine, f_true, join_path(out_dir, "f_true.csv"));
    render_pgm(f_true, mesh_fine, cfg.pgm_resolution, join_path(out_dir, "truth.pgm"));
    return data;
}

FilterResult run_inversion_stage(const RunConfig& cfg, const std::string& out_dir,
                                 const ObservationSet& data) {
    validate_run_config(cfg);
    std::filesystem::create_directories(out_dir);

    const int expected_receivers = 4 * (cfg.receivers_per_side - 1);
    if (data.receiver_count != expected_receivers)
        throw ConfigError("data file receiver count does not match the config");
    if (data.values.size() != static_cast<Eigen::Index>(expected_receivers) * cfg.freq_count)
        throw ConfigError("data file frequency count does not match the config");

    const TriMesh mesh = build_disk_mesh(cfg.domain_radius, cfg.mesh_h_inversion);
    const ReceiverArray receivers = square_receivers(cfg.receiver_half_side, cfg.receivers_per_side);
    const WaveNumberGrid kgrid = make_wavenumber_grid(cfg.freq_min, cfg.freq_max, cfg.freq_count,
                                                      cfg.freq_unit, cfg.sound_speed);
    const TriQuadRule quad = triangle_quadrature(cfg.quadrature_order);
    const StackedForwardOperator op = assemble_forward(mesh, receivers, kgrid, quad, cfg.threads);

    InversionProblem problem;
    problem.mesh = &mesh;
    problem.op = &op;
    problem.data = data.values;
    problem.threshold = make_threshold_spec(cfg);
    problem.hj = make_hj_config(cfg);
    problem.prior = make_prior_spec(cfg);
    problem.noise = NoiseModel{cfg.noise_delta};

    // truth re-rasterized on the inversion mesh, used only for metrics
    const NodalField truth = rasterize_phantom(make_phantom(cfg), mesh);
    const FilterConfig fc = make_filter_config(cfg);
    const FilterResult result = run_filter(fc, problem, cfg.seed, &truth);

    const bool augmented = cfg.algorithm == FilterAlgorithm::AugmentedSource;
    write_text_file(join_path(out_dir, "iterations.csv"), iteration_log_text(result, augmented));
    {
        std::ostringstream clamp;
        clamp << "iter,hj_scale_min\n";
        for (const auto& rec : result.history)
            clamp << rec.iteration << "," << format_double(rec.hj_scale_min) << "\n";
        write_text_file(join_path(out_dir, "hj_clamp.csv"), clamp.str());
    }
    export_nodal_field(mesh, result.phi_mean, join_path(out_dir, "phi_mean.csv"));
    export_nodal_field(mesh, result.f_map_of_mean, join_path(out_dir, "f_map_of_mean.csv"));
    export_nodal_field(mesh, truth, join_path(out_dir, "truth_inversion.csv"));
    render_pgm(result.f_map_of_mean, mesh, cfg.pgm_resolution,
               join_path(out_dir, "estimate_map_of_mean.pgm"));
    if (augmented) {
        export_nodal_field(mesh, result.f_mean_of_maps, join_path(out_dir, "f_mean_of_maps.csv"));
        render_pgm(result.f_mean_of_maps, mesh, cfg.pgm_resolution,
                   join_path(out_dir, "estimate_mean_of_maps.pgm"));
    }

    const ThresholdSpec spec = make_threshold_spec(cfg);
    const Metrics initial{result.history.front().rel_error_map_of_mean, 0.0};
    const Metrics final_mom = compute_metrics(result.f_map_of_mean, truth, mesh, spec);
    std::ostringstream metrics;
    metrics << "algorithm = " << (augmented ? "augmented_source" : "predicted_data") << "\n"
            << "iterations_run = " << result.iterations_run << "\n"
            << "stopped_by_discrepancy = " << (result.stopped_by_discrepancy ? "true" : "false")
            << "\n"
            << "data_dim = " << op.real_dim() << "\n"
            << "noise_delta = " << format_double(cfg.noise_delta) << "\n"
            << "initial_rel_l2_map_of_mean = " << format_double(initial.rel_l2_error) << "\n"
            << "final_rel_l2_map_of_mean = " << format_double(final_mom.rel_l2_error) << "\n"
            << "final_jaccard_map_of_mean = " << format_double(final_mom.jaccard) << "\n"
            << "final_misfit_map_of_mean = "
            << format_double(result.history.back().misfit_map_of_mean) << "\n";
    if (augmented) {
        const Metrics final_mean = compute_metrics(result.f_mean_of_maps, truth, mesh, spec);
        const double w =
            *std::max_element(spec.phase_values.begin(), spec.phase_values.end()) / 2.0;
        metrics << "initial_rel_l2_mean_of_maps = "
                << format_double(result.history.front().rel_error_mean_of_maps) << "\n"
                << "final_rel_l2_mean_of_maps = " << format_double(final_mean.rel_l2_error) << "\n"
                << "final_jaccard_mean_of_maps = " << format_double(final_mean.jaccard) << "\n"
                << "final_misfit_mean_of_maps = "
                << format_double(result.history.back().misfit_mean_of_maps) << "\n"
                << "cross_variant_jaccard = "
                << format_double(jaccard_index(result.f_map_of_mean, result.f_mean_of_maps, w))
                << "\n";
    }
    write_text_file(join_path(out_dir, "metrics.txt"), metrics.str());
    return result;
}

FilterResult run_experiment(const RunConfig& cfg) {
    validate_run_config(cfg);
    std::filesystem::create_directories(cfg.output_dir);
    write_text_file(join_path(cfg.output_dir, "config_echo.txt"), config_echo_text(cfg));
    const ObservationSet data = run_forward_stage(cfg, cfg.output_dir);
    return run_inversion_stage(cfg, cfg.output_dir, data);
}

}  // namespace lsenkf
