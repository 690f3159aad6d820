#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <cstdint>
#include <vector>

#include "lsenkf/forward_operator.hpp"
#include "lsenkf/mesh.hpp"
#include "lsenkf/rng.hpp"

namespace lsenkf {

// Whittle-Matern field parameters. The induced covariance is
// C(r) = sigma2 * 2^{1-nu}/Gamma(nu) * (r/l)^nu * K_nu(r/l).
struct PriorSpec {
    double nu = 1.0;
    double length_scale = 0.2;
    double sigma2 = 1.0;
    NodalField mean_field;  // empty means zero mean
};

// P1 mass and stiffness matrices, full and restricted to interior
// (non-boundary) nodes for the homogeneous Dirichlet solve.
struct FemOperators {
    Eigen::SparseMatrix<double> mass_full, stiffness_full;
    Eigen::SparseMatrix<double> mass_interior, stiffness_interior;
    Eigen::VectorXd lumped_mass;        // row sums of mass_full, all nodes
    std::vector<int> interior_nodes;    // interior index -> node index
    std::vector<int> node_to_interior;  // node index -> interior index, -1 on boundary

    int interior_count() const { return static_cast<int>(interior_nodes.size()); }
};

FemOperators assemble_fem(const TriMesh& mesh);

// Analytic covariance at separation r; r=0 returns sigma2. Orders are limited
// to what bessel_k provides (nu in {0.5, 1}).
double matern_covariance(double r, const PriorSpec& spec);

// Scaling of the white-noise load in dimension d=2:
// alpha = sigma2 * 2^d * pi^{d/2} * Gamma(nu + d/2) / Gamma(nu).
double spde_alpha(const PriorSpec& spec);

// Samples the field by solving (M + l^2 S)^p phi = sqrt(alpha l^2) M^{1/2} W
// on interior nodes, p = (nu+1)/2 repeated solves, lumped-mass square root
// for the white-noise load; boundary values are exactly 0. The sparse
// factorization is computed once and shared by all draws.
class MaternSampler {
  public:
    MaternSampler(const TriMesh& mesh, const PriorSpec& spec);

    NodalField sample(std::uint64_t seed) const;
    NodalField sample(NormalStream& stream) const;

    const FemOperators& operators() const { return fem_; }
    const PriorSpec& spec() const { return spec_; }

  private:
    FemOperators fem_;
    PriorSpec spec_;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver_;
    Eigen::VectorXd load_scale_;  // sqrt(alpha l^2 * lumped_i) per interior node
    int power_ = 1;
};

inline NodalField sample_field(const MaternSampler& sampler, std::uint64_t seed) {
    return sampler.sample(seed);
}

}  // namespace lsenkf
