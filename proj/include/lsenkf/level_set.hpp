#pragma once

#include <string>
#include <vector>

#include "lsenkf/forward_operator.hpp"
#include "lsenkf/mesh.hpp"

namespace lsenkf {

// Thresholding rule: node with level-set value in [c_{l-1}, c_l) gets
// phase_values[l], with implicit c_0 = -inf and c_n = +inf.
struct ThresholdSpec {
    std::vector<double> cut_levels;    // strictly increasing
    std::vector<double> phase_values;  // cut_levels.size() + 1 entries
};

void validate_threshold_spec(const ThresholdSpec& spec);

// f(x) = w_l on the l-th threshold interval of phi(x).
NodalField level_set_map(const NodalField& phi, const ThresholdSpec& spec);

// Normal speed of the interface: the adjoint residual H^*(Hf - b), i.e. the
// steepest-descent direction of the data misfit in f.
NodalField velocity_field(const StackedForwardOperator& op, const NodalField& f,
                          const Eigen::VectorXcd& b);

// Nodal |grad phi|: area-weighted average of element gradients over the
// elements adjacent to each node.
NodalField gradient_magnitude(const TriMesh& mesh, const NodalField& phi);

struct HJConfig {
    double time_step = 0.1;
    double gradient_floor = 0.0;  // reserved for normalized-speed variants
    bool cfl_guard = true;        // rescale the step so max displacement <= mesh_size_h
    bool reinitialize = false;    // rebuild phi as a signed distance after each step
};

// One forward-Euler step phi - dt * velocity .* |grad phi|. With the guard
// enabled the step is uniformly scaled by s = min(1, h / (dt * max |v.g|));
// scale_out receives s.
NodalField hj_step(const TriMesh& mesh, const NodalField& phi, const NodalField& velocity,
                   const HJConfig& cfg, double* scale_out = nullptr);

// steps x the composite (f = threshold(phi); v = adjoint residual; Euler step).
// scale_out receives the smallest guard scale encountered.
NodalField evolve(const StackedForwardOperator& op, const TriMesh& mesh, NodalField phi,
                  const Eigen::VectorXcd& b, const ThresholdSpec& spec, const HJConfig& cfg,
                  int steps, double* scale_out = nullptr);

// Replaces phi by sign(phi) * distance to its zero level set (exact distance
// to the piecewise-linear interface segments). Identity when phi never
// changes sign. Meaningful only for specs with a single cut at 0.
NodalField reinitialize_signed_distance(const TriMesh& mesh, const NodalField& phi);

// Nodal-field CSV: header node_index,x,y,value; exact value round-trip.
void export_nodal_field(const TriMesh& mesh, const NodalField& field, const std::string& path);
NodalField import_nodal_field(const std::string& path);

}  // namespace lsenkf
