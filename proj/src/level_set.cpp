#include "lsenkf/level_set.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace lsenkf {

void validate_threshold_spec(const ThresholdSpec& spec) {
    if (spec.phase_values.size() != spec.cut_levels.size() + 1)
        throw std::invalid_argument("need one more phase value than cut levels");
    if (spec.phase_values.size() < 2) throw std::invalid_argument("need at least two phases");
    for (std::size_t i = 0; i + 1 < spec.cut_levels.size(); ++i)
        if (!(spec.cut_levels[i] < spec.cut_levels[i + 1]))
            throw std::invalid_argument("cut levels must be strictly increasing");
    for (double c : spec.cut_levels)
        if (!std::isfinite(c)) throw std::invalid_argument("cut levels must be finite");
    for (double w : spec.phase_values)
        if (!std::isfinite(w)) throw std::invalid_argument("phase values must be finite");
}

NodalField level_set_map(const NodalField& phi, const ThresholdSpec& spec) {
    validate_threshold_spec(spec);
    NodalField f(phi.size());
    for (Eigen::Index i = 0; i < phi.size(); ++i) {
        const auto it =
            std::upper_bound(spec.cut_levels.begin(), spec.cut_levels.end(), phi(i));
        f(i) = spec.phase_values[static_cast<std::size_t>(it - spec.cut_levels.begin())];
    }
    return f;
}

NodalField velocity_field(const StackedForwardOperator& op, const NodalField& f,
                          const Eigen::VectorXcd& b) {
    if (b.size() != op.total_rows()) throw std::invalid_argument("data vector length mismatch");
    return apply_adjoint(op, apply_forward(op, f) - b);
}

NodalField gradient_magnitude(const TriMesh& mesh, const NodalField& phi) {
    if (phi.size() != mesh.node_count()) throw std::invalid_argument("field length mismatch");
    std::vector<double> elem_mag(mesh.element_count());
    for (int e = 0; e < mesh.element_count(); ++e)
        elem_mag[e] = element_gradient(mesh, phi, e).norm();
    NodalField out(mesh.node_count());
    for (int i = 0; i < mesh.node_count(); ++i) {
        const auto& adjacent = mesh.node_elements[i];
        if (adjacent.empty()) throw std::runtime_error("isolated node without adjacent elements");
        double wsum = 0.0, acc = 0.0;
        for (int e : adjacent) {
            const double a = mesh.element_area(e);
            wsum += a;
            acc += a * elem_mag[e];
        }
        out(i) = acc / wsum;
    }
    return out;
}

NodalField hj_step(const TriMesh& mesh, const NodalField& phi, const NodalField& velocity,
                   const HJConfig& cfg, double* scale_out) {
    if (!(cfg.time_step > 0.0)) throw std::invalid_argument("time step must be positive");
    if (cfg.gradient_floor < 0.0) throw std::invalid_argument("gradient floor must be >= 0");
    if (velocity.size() != phi.size() || phi.size() != mesh.node_count())
        throw std::invalid_argument("field length mismatch");
    const NodalField step = velocity.cwiseProduct(gradient_magnitude(mesh, phi));
    double scale = 1.0;
    if (cfg.cfl_guard) {
        const double peak = cfg.time_step * step.cwiseAbs().maxCoeff();
        if (peak > mesh.mesh_size_h) scale = mesh.mesh_size_h / peak;
    }
    if (scale_out) *scale_out = scale;
    return phi - (cfg.time_step * scale) * step;
}

NodalField evolve(const StackedForwardOperator& op, const TriMesh& mesh, NodalField phi,
                  const Eigen::VectorXcd& b, const ThresholdSpec& spec, const HJConfig& cfg,
                  int steps, double* scale_out) {
    if (steps < 0) throw std::invalid_argument("step count must be >= 0");
    double min_scale = 1.0;
    for (int s = 0; s < steps; ++s) {
        const NodalField f = level_set_map(phi, spec);
        const NodalField v = velocity_field(op, f, b);
        double scale = 1.0;
        phi = hj_step(mesh, phi, v, cfg, &scale);
        min_scale = std::min(min_scale, scale);
        if (cfg.reinitialize) phi = reinitialize_signed_distance(mesh, phi);
    }
    if (scale_out) *scale_out = min_scale;
    return phi;
}

namespace {

double point_segment_distance(const Point2& p, const Point2& a, const Point2& b) {
    const double dx = b.x - a.x, dy = b.y - a.y;
    const double len2 = dx * dx + dy * dy;
    double t = 0.0;
    if (len2 > 0.0) t = std::clamp(((p.x - a.x) * dx + (p.y - a.y) * dy) / len2, 0.0, 1.0);
    return std::hypot(p.x - (a.x + t * dx), p.y - (a.y + t * dy));
}

}  // namespace

NodalField reinitialize_signed_distance(const TriMesh& mesh, const NodalField& phi) {
    if (phi.size() != mesh.node_count()) throw std::invalid_argument("field length mismatch");
    // collect the zero-crossing segments of the linear interpolant
    std::vector<std::pair<Point2, Point2>> segments;
    for (const auto& el : mesh.elements) {
        Point2 pts[2];
        int npts = 0;
        for (int i = 0; i < 3 && npts < 2; ++i) {
            const int a = el[i], b = el[(i + 1) % 3];
            const double va = phi(a), vb = phi(b);
            if (va == 0.0) {
                const Point2 cand = mesh.nodes[a];
                bool dup = false;
                for (int q = 0; q < npts; ++q)
                    dup = dup || distance(pts[q], cand) < 1e-14;
                if (!dup) pts[npts++] = cand;
            } else if ((va < 0.0) != (vb < 0.0) && vb != 0.0) {
                const double t = va / (va - vb);
                pts[npts++] = {mesh.nodes[a].x + t * (mesh.nodes[b].x - mesh.nodes[a].x),
                               mesh.nodes[a].y + t * (mesh.nodes[b].y - mesh.nodes[a].y)};
            }
        }
        if (npts == 2) segments.emplace_back(pts[0], pts[1]);
    }
    if (segments.empty()) return phi;
    NodalField out(phi.size());
    for (int i = 0; i < mesh.node_count(); ++i) {
        double d = std::numeric_limits<double>::infinity();
        for (const auto& [a, b] : segments)
            d = std::min(d, point_segment_distance(mesh.nodes[i], a, b));
        out(i) = phi(i) > 0.0 ? d : (phi(i) < 0.0 ? -d : 0.0);
    }
    return out;
}

void export_nodal_field(const TriMesh& mesh, const NodalField& field, const std::string& path) {
    if (field.size() != mesh.node_count()) throw std::invalid_argument("field length mismatch");
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << "node_index,x,y,value\n";
    char line[160];
    for (int i = 0; i < mesh.node_count(); ++i) {
        std::snprintf(line, sizeof line, "%d,%.17g,%.17g,%.17g\n", i, mesh.nodes[i].x,
                      mesh.nodes[i].y, field(i));
        out << line;
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

NodalField import_nodal_field(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string header;
    if (!std::getline(in, header) || header != "node_index,x,y,value")
        throw std::runtime_error("bad nodal CSV header in " + path);
    std::vector<double> values;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        long idx;
        double x, y, v;
        if (std::sscanf(line.c_str(), "%ld,%lf,%lf,%lf", &idx, &x, &y, &v) != 4)
            throw std::runtime_error("unparsable nodal row: " + line);
        if (idx != static_cast<long>(values.size()))
            throw std::runtime_error("nodal rows out of order in " + path);
        values.push_back(v);
    }
    return Eigen::Map<NodalField>(values.data(), static_cast<Eigen::Index>(values.size()));
}

}  // namespace lsenkf
