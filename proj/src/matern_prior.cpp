#include "lsenkf/matern_prior.hpp"

#include <cmath>
#include <stdexcept>

#include "lsenkf/special_functions.hpp"

namespace lsenkf {

namespace {

void validate_base(const PriorSpec& spec) {
    if (!(spec.nu > 0.0)) throw std::invalid_argument("smoothness nu must be positive");
    if (!(spec.length_scale > 0.0)) throw std::invalid_argument("length scale must be positive");
    if (!(spec.sigma2 > 0.0)) throw std::invalid_argument("variance must be positive");
}

// sampler restriction: (nu+1)/2 must be a positive integer
int solve_power(double nu) {
    const double p = (nu + 1.0) / 2.0;
    const double rounded = std::round(p);
    if (std::abs(p - rounded) > 1e-12 || rounded < 1.0)
        throw std::invalid_argument("sampler requires nu in {1, 3, 5, ...}");
    return static_cast<int>(rounded);
}

}  // namespace

FemOperators assemble_fem(const TriMesh& mesh) {
    check_mesh_invariants(mesh);
    const int n = mesh.node_count();
    std::vector<Eigen::Triplet<double>> mass_t, stiff_t;
    mass_t.reserve(static_cast<std::size_t>(mesh.element_count()) * 9);
    stiff_t.reserve(mass_t.capacity());
    for (int e = 0; e < mesh.element_count(); ++e) {
        const auto& el = mesh.elements[e];
        const double area = mesh.element_area(e);
        if (!(area > 0.0)) throw std::runtime_error("degenerate element in FEM assembly");
        const Point2 p0 = mesh.nodes[el[0]], p1 = mesh.nodes[el[1]], p2 = mesh.nodes[el[2]];
        // gradient coefficients of the hat functions: lambda_i = (a_i + b_i x + c_i y)/(2A)
        const double b[3] = {p1.y - p2.y, p2.y - p0.y, p0.y - p1.y};
        const double c[3] = {p2.x - p1.x, p0.x - p2.x, p1.x - p0.x};
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                mass_t.emplace_back(el[i], el[j], area / 12.0 * (i == j ? 2.0 : 1.0));
                stiff_t.emplace_back(el[i], el[j], (b[i] * b[j] + c[i] * c[j]) / (4.0 * area));
            }
    }

    FemOperators fem;
    fem.mass_full.resize(n, n);
    fem.mass_full.setFromTriplets(mass_t.begin(), mass_t.end());
    fem.stiffness_full.resize(n, n);
    fem.stiffness_full.setFromTriplets(stiff_t.begin(), stiff_t.end());
    fem.lumped_mass = fem.mass_full * Eigen::VectorXd::Ones(n);

    fem.node_to_interior.assign(n, -1);
    std::vector<bool> on_boundary(n, false);
    for (int bnode : mesh.boundary_nodes) on_boundary[bnode] = true;
    for (int i = 0; i < n; ++i)
        if (!on_boundary[i]) {
            fem.node_to_interior[i] = static_cast<int>(fem.interior_nodes.size());
            fem.interior_nodes.push_back(i);
        }

    const int ni = fem.interior_count();
    std::vector<Eigen::Triplet<double>> mass_i, stiff_i;
    for (int col = 0; col < n; ++col) {
        const int jc = fem.node_to_interior[col];
        if (jc < 0) continue;
        for (Eigen::SparseMatrix<double>::InnerIterator it(fem.mass_full, col); it; ++it) {
            const int jr = fem.node_to_interior[static_cast<int>(it.row())];
            if (jr >= 0) mass_i.emplace_back(jr, jc, it.value());
        }
        for (Eigen::SparseMatrix<double>::InnerIterator it(fem.stiffness_full, col); it; ++it) {
            const int jr = fem.node_to_interior[static_cast<int>(it.row())];
            if (jr >= 0) stiff_i.emplace_back(jr, jc, it.value());
        }
    }
    fem.mass_interior.resize(ni, ni);
    fem.mass_interior.setFromTriplets(mass_i.begin(), mass_i.end());
    fem.stiffness_interior.resize(ni, ni);
    fem.stiffness_interior.setFromTriplets(stiff_i.begin(), stiff_i.end());
    return fem;
}

double matern_covariance(double r, const PriorSpec& spec) {
    validate_base(spec);
    if (r < 0.0) throw std::invalid_argument("separation must be nonnegative");
    if (r == 0.0) return spec.sigma2;
    const double s = r / spec.length_scale;
    const double scale = std::pow(2.0, 1.0 - spec.nu) / std::tgamma(spec.nu);
    return spec.sigma2 * scale * std::pow(s, spec.nu) * bessel_k(spec.nu, s);
}

double spde_alpha(const PriorSpec& spec) {
    validate_base(spec);
    // d = 2: 2^d pi^{d/2} = 4 pi, Gamma(nu+1)/Gamma(nu) = nu
    return spec.sigma2 * 4.0 * M_PI * std::tgamma(spec.nu + 1.0) / std::tgamma(spec.nu);
}

MaternSampler::MaternSampler(const TriMesh& mesh, const PriorSpec& spec)
    : fem_(assemble_fem(mesh)), spec_(spec), power_(solve_power(spec.nu)) {
    validate_base(spec);
    if (spec.mean_field.size() != 0 && spec.mean_field.size() != mesh.node_count())
        throw std::invalid_argument("mean field length mismatch");
    const double l2 = spec.length_scale * spec.length_scale;
    Eigen::SparseMatrix<double> system = fem_.mass_interior + l2 * fem_.stiffness_interior;
    solver_.compute(system);
    if (solver_.info() != Eigen::Success)
        throw std::runtime_error("prior operator factorization failed");
    const double amp2 = spde_alpha(spec) * l2;
    load_scale_.resize(fem_.interior_count());
    for (int i = 0; i < fem_.interior_count(); ++i)
        load_scale_(i) = std::sqrt(amp2 * fem_.lumped_mass(fem_.interior_nodes[i]));
}

NodalField MaternSampler::sample(std::uint64_t seed) const {
    NormalStream stream(seed);
    return sample(stream);
}

NodalField MaternSampler::sample(NormalStream& stream) const {
    const int ni = fem_.interior_count();
    Eigen::VectorXd rhs(ni);
    for (int i = 0; i < ni; ++i) rhs(i) = load_scale_(i) * stream.next();
    Eigen::VectorXd x = solver_.solve(rhs);
    for (int p = 1; p < power_; ++p) x = solver_.solve(fem_.mass_interior * x);
    NodalField field = NodalField::Zero(fem_.node_to_interior.size());
    for (int i = 0; i < ni; ++i) field(fem_.interior_nodes[i]) = x(i);
    if (spec_.mean_field.size() != 0) field += spec_.mean_field;
    return field;
}

}  // namespace lsenkf
