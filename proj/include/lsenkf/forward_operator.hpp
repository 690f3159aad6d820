#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "lsenkf/mesh.hpp"

namespace lsenkf {

// Nodal fields (sources, level sets) are plain real vectors over mesh nodes.
using NodalField = Eigen::VectorXd;

enum class FrequencyUnit { Hertz, WaveNumber };

// Log-spaced acquisition frequencies and the wave numbers k = 2*pi*f/c0
// they induce. amplitudes holds the per-frequency kernel scaling A(k),
// defaulting to 1 everywhere.
struct WaveNumberGrid {
    std::vector<double> frequencies_hz;
    std::vector<double> wave_numbers;
    std::vector<double> amplitudes;
    double sound_speed_c0 = 343.0;

    int count() const { return static_cast<int>(wave_numbers.size()); }
};

// lo/hi are interpreted in the given unit: plain Hertz (converted through
// k = 2*pi*f/c0) or raw wave numbers. Grids are log-spaced and strictly
// increasing; count=1 collapses to lo.
WaveNumberGrid make_wavenumber_grid(double lo, double hi, int count, FrequencyUnit unit,
                                    double sound_speed = 343.0);

// Multi-frequency observation map. For each wave number k the dense complex
// matrix maps nodal source coefficients to receiver pressures through the
// single-layer kernel A(k) * H0^(1)(k |x - y|) integrated by quadrature.
struct StackedForwardOperator {
    std::vector<Eigen::MatrixXcd> per_k;  // each receivers x nodes
    std::vector<double> wave_numbers;
    int receiver_count = 0;
    int node_count = 0;

    int frequency_count() const { return static_cast<int>(per_k.size()); }
    int total_rows() const { return receiver_count * frequency_count(); }
    // size of the real-stacked data space (all Re parts, then all Im parts)
    int real_dim() const { return 2 * total_rows(); }
};

// Receivers must lie strictly outside the disk (the kernel is singular at
// zero separation). threads parallelizes over (frequency, receiver) rows.
StackedForwardOperator assemble_forward(const TriMesh& mesh, const ReceiverArray& receivers,
                                        const WaveNumberGrid& kgrid, const TriQuadRule& quad,
                                        int threads = 1);

// b_m = H_{k_m} f, stacked frequency-major (all receivers for k_1, then k_2, ...).
Eigen::VectorXcd apply_forward(const StackedForwardOperator& op, const NodalField& f);

// Re(sum_m H_{k_m}^H r_m): the real adjoint action used as descent velocity.
NodalField apply_adjoint(const StackedForwardOperator& op, const Eigen::VectorXcd& residual);

// Real-stacked representation: [Re(v); Im(v)], dimension 2*N*M.
Eigen::VectorXd real_stack(const Eigen::VectorXcd& v);
Eigen::VectorXcd complex_unstack(const Eigen::VectorXd& v);

// Dense real 2NM x nodes matrix of the real-stacked map f -> [Re(Hf); Im(Hf)];
// the filter's data-space algebra runs on this representation.
Eigen::MatrixXd real_stacked_matrix(const StackedForwardOperator& op);

struct NoiseModel {
    double delta = 0.0;  // per-component noise std deviation on the real-stacked data
};

// b = H f_true + eta with eta drawn i.i.d. N(0, delta^2) on every real and
// imaginary component; deterministic per seed.
Eigen::VectorXcd generate_data(const StackedForwardOperator& op_fine, const NodalField& f_true,
                               const NoiseModel& noise, std::uint64_t seed);

// Observation CSV: header freq_index,receiver_index,re,im then one row per
// entry in lexicographic (freq, receiver) order; round-trips exactly.
void export_observations(const Eigen::VectorXcd& values, int receiver_count,
                         const std::string& path);

struct ObservationSet {
    Eigen::VectorXcd values;
    int receiver_count = 0;
};

ObservationSet import_observations(const std::string& path);

}  // namespace lsenkf
