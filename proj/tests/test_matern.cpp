#include <doctest.h>

#include <cmath>

#include "lsenkf/matern_prior.hpp"
#include "lsenkf/rng.hpp"
#include "test_helpers.hpp"

using namespace lsenkf;

namespace {

Eigen::MatrixXd dense(const Eigen::SparseMatrix<double>& m) { return Eigen::MatrixXd(m); }

// exact covariance of the discretized sampler:
// alpha l^2 A^{-1} diag(lumped) A^{-T} on interior nodes, A = M + l^2 S
Eigen::MatrixXd discrete_covariance(const FemOperators& fem, const PriorSpec& spec) {
    const double l2 = spec.length_scale * spec.length_scale;
    const Eigen::MatrixXd a = dense(fem.mass_interior) + l2 * dense(fem.stiffness_interior);
    Eigen::VectorXd lumped_int(fem.interior_count());
    for (int i = 0; i < fem.interior_count(); ++i)
        lumped_int(i) = fem.lumped_mass(fem.interior_nodes[i]);
    const Eigen::MatrixXd ainv = a.fullPivLu().inverse();
    return spde_alpha(spec) * l2 * ainv * lumped_int.asDiagonal() * ainv.transpose();
}

}  // namespace

TEST_CASE("P1 mass and stiffness matrices on the reference triangle") {
    const TriMesh tri = testutil::reference_triangle();
    const FemOperators fem = assemble_fem(tri);

    const double a12 = 0.5 / 12.0;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            CHECK(dense(fem.mass_full)(i, j) ==
                  doctest::Approx(a12 * (i == j ? 2.0 : 1.0)).epsilon(1e-15));

    Eigen::Matrix3d stiff_want;
    stiff_want << 1.0, -0.5, -0.5, -0.5, 0.5, 0.0, -0.5, 0.0, 0.5;
    CHECK((dense(fem.stiffness_full) - stiff_want).norm() <= 1e-15);
}

TEST_CASE("FEM operators on a disk mesh") {
    const TriMesh mesh = build_disk_mesh(1.0, 0.25);
    const FemOperators fem = assemble_fem(mesh);
    const int n = mesh.node_count();

    SUBCASE("stiffness annihilates constants") {
        const Eigen::VectorXd r = dense(fem.stiffness_full) * Eigen::VectorXd::Ones(n);
        CHECK(r.cwiseAbs().maxCoeff() <= 1e-13);
    }
    SUBCASE("lumped mass sums to the mesh area and matches nodal areas") {
        CHECK(fem.lumped_mass.sum() == doctest::Approx(mesh.total_area()).epsilon(1e-12));
        CHECK((fem.lumped_mass - nodal_lumped_areas(mesh)).cwiseAbs().maxCoeff() <= 1e-15);
        CHECK(fem.lumped_mass.minCoeff() > 0.0);
    }
    SUBCASE("mass matrix is symmetric") {
        const Eigen::MatrixXd m = dense(fem.mass_full);
        CHECK((m - m.transpose()).cwiseAbs().maxCoeff() <= 1e-14);
    }
    SUBCASE("interior restriction drops exactly the boundary rows and columns") {
        CHECK(fem.interior_count() + static_cast<int>(mesh.boundary_nodes.size()) == n);
        const Eigen::MatrixXd full = dense(fem.mass_full);
        const Eigen::MatrixXd interior = dense(fem.mass_interior);
        for (int i = 0; i < fem.interior_count(); ++i) {
            CHECK_FALSE(mesh.is_boundary(fem.interior_nodes[i]));
            for (int j = 0; j < fem.interior_count(); ++j)
                CHECK(interior(i, j) == full(fem.interior_nodes[i], fem.interior_nodes[j]));
        }
    }
}

TEST_CASE("FEM assembly rejects degenerate elements") {
    const TriMesh flat =
        testutil::manual_mesh({{0, 0}, {1, 0}, {2, 0}}, {{0, 1, 2}}, {}, 10.0);
    CHECK_THROWS_AS(assemble_fem(flat), std::runtime_error);
}

TEST_CASE("Matern covariance function") {
    PriorSpec spec;
    spec.length_scale = 0.2;

    SUBCASE("zero separation returns the variance") {
        spec.sigma2 = 3.5;
        CHECK(matern_covariance(0.0, spec) == 3.5);
    }
    SUBCASE("nu = 1/2 reduces to the exponential kernel") {
        spec.nu = 0.5;
        CHECK(std::abs(matern_covariance(0.2, spec) - std::exp(-1.0)) <= 1e-9);
        CHECK(std::abs(matern_covariance(0.5, spec) - std::exp(-2.5)) <= 1e-9);
    }
    SUBCASE("nu = 1 at one length scale") {
        // (r/l) K_1(r/l) at r = l, i.e. K_1(1)
        CHECK(std::abs(matern_covariance(0.2, spec) - 0.60190723019723457) <= 1e-6);
    }
    SUBCASE("scales linearly in the variance and decreases in r") {
        spec.sigma2 = 1.0;
        const double base = matern_covariance(0.3, spec);
        spec.sigma2 = 2.0;
        CHECK(matern_covariance(0.3, spec) == doctest::Approx(2.0 * base).epsilon(1e-14));
        spec.sigma2 = 1.0;
        double prev = matern_covariance(0.0, spec);
        for (double r = 0.05; r < 1.0; r += 0.05) {
            const double v = matern_covariance(r, spec);
            CHECK(v < prev);
            CHECK(v > 0.0);
            prev = v;
        }
    }
    SUBCASE("negative separation is rejected") {
        CHECK_THROWS_AS(matern_covariance(-0.1, spec), std::invalid_argument);
    }
}

TEST_CASE("SPDE forcing constant") {
    PriorSpec spec;
    CHECK(spde_alpha(spec) == doctest::Approx(4.0 * M_PI).epsilon(1e-14));
    spec.sigma2 = 2.0;
    CHECK(spde_alpha(spec) == doctest::Approx(8.0 * M_PI).epsilon(1e-14));
    spec.sigma2 = 1.0;
    spec.nu = 3.0;
    CHECK(spde_alpha(spec) == doctest::Approx(12.0 * M_PI).epsilon(1e-14));
}

TEST_CASE("prior sampler basics") {
    const TriMesh mesh = build_disk_mesh(1.0, 0.2);
    PriorSpec spec;
    spec.length_scale = 0.2;
    const MaternSampler sampler(mesh, spec);

    SUBCASE("fixed seed reproduces the field bit for bit") {
        const NodalField a = sampler.sample(12345);
        const NodalField b = sampler.sample(12345);
        const NodalField c = sampler.sample(54321);
        CHECK((a - b).norm() == 0.0);
        CHECK((a - c).norm() > 0.0);
    }
    SUBCASE("samples vanish on the boundary") {
        const NodalField f = sampler.sample(7);
        for (int bnode : mesh.boundary_nodes) CHECK(f(bnode) == 0.0);
        CHECK(f.cwiseAbs().maxCoeff() > 0.0);
    }
    SUBCASE("quadrupling the variance doubles the sample exactly") {
        PriorSpec wide = spec;
        wide.sigma2 = 4.0;
        const MaternSampler sampler4(mesh, wide);
        CHECK((sampler4.sample(99) - 2.0 * sampler.sample(99)).norm() == 0.0);
    }
    SUBCASE("a mean field shifts the sample exactly") {
        PriorSpec shifted = spec;
        shifted.mean_field = NodalField::Constant(mesh.node_count(), 1.5);
        const MaternSampler sampler_m(mesh, shifted);
        CHECK((sampler_m.sample(3) - (sampler.sample(3) + shifted.mean_field)).norm() == 0.0);
    }
    SUBCASE("stream and seed entry points agree") {
        NormalStream stream(2024);
        CHECK((sampler.sample(stream) - sampler.sample(2024)).norm() == 0.0);
    }
    SUBCASE("even smoothness orders are rejected, nu = 3 is accepted") {
        PriorSpec bad = spec;
        bad.nu = 2.0;
        CHECK_THROWS_AS(MaternSampler(mesh, bad), std::invalid_argument);
        PriorSpec smooth = spec;
        smooth.nu = 3.0;
        CHECK_NOTHROW(MaternSampler(mesh, smooth).sample(1));
    }
    SUBCASE("mean field length mismatch is rejected") {
        PriorSpec bad = spec;
        bad.mean_field = NodalField::Zero(3);
        CHECK_THROWS_AS(MaternSampler(mesh, bad), std::invalid_argument);
    }
}

TEST_CASE("sampler realizes the SPDE solve against a dense oracle") {
    const TriMesh mesh = build_disk_mesh(1.0, 0.3);
    const FemOperators fem = assemble_fem(mesh);

    for (double nu : {1.0, 3.0}) {
        PriorSpec spec;
        spec.nu = nu;
        spec.length_scale = 0.25;
        const MaternSampler sampler(mesh, spec);
        const std::uint64_t seed = 777;

        // replicate the white-noise load, then solve densely
        NormalStream stream(seed);
        Eigen::VectorXd load(fem.interior_count());
        const double amp2 = spde_alpha(spec) * spec.length_scale * spec.length_scale;
        for (int i = 0; i < fem.interior_count(); ++i)
            load(i) =
                std::sqrt(amp2 * fem.lumped_mass(fem.interior_nodes[i])) * stream.next();

        const double l2 = spec.length_scale * spec.length_scale;
        const Eigen::MatrixXd a = dense(fem.mass_interior) + l2 * dense(fem.stiffness_interior);
        Eigen::VectorXd x = a.fullPivLu().solve(load);
        const int power = static_cast<int>((nu + 1.0) / 2.0);
        for (int p = 1; p < power; ++p) x = a.fullPivLu().solve(dense(fem.mass_interior) * x);

        const NodalField got = sampler.sample(seed);
        NodalField want = NodalField::Zero(mesh.node_count());
        for (int i = 0; i < fem.interior_count(); ++i) want(fem.interior_nodes[i]) = x(i);
        CHECK((got - want).norm() <= 1e-10 * want.norm());
    }
}

TEST_CASE("sampler second moments match the exact discrete covariance") {
    const TriMesh mesh = build_disk_mesh(1.0, 0.1);
    PriorSpec spec;
    spec.length_scale = 0.2;
    const MaternSampler sampler(mesh, spec);
    const FemOperators& fem = sampler.operators();

    // tracked pair: the center node and an interior node about one length scale away
    const int center = 0;
    int partner = -1;
    double best = 1e9;
    for (int i = 0; i < mesh.node_count(); ++i) {
        if (mesh.is_boundary(i)) continue;
        const double miss = std::abs(distance(mesh.nodes[i], mesh.nodes[center]) - 0.2);
        if (miss < best) {
            best = miss;
            partner = i;
        }
    }
    REQUIRE(partner >= 0);

    const int n = 5000;
    double s1 = 0, s2 = 0, s11 = 0, s22 = 0, s12 = 0;
    double max_abs_mean_num = 0.0;
    Eigen::VectorXd mean_acc = Eigen::VectorXd::Zero(mesh.node_count());
    for (int k = 0; k < n; ++k) {
        const NodalField f = sampler.sample(static_cast<std::uint64_t>(k));
        mean_acc += f;
        const double a = f(center), b = f(partner);
        s1 += a;
        s2 += b;
        s11 += a * a;
        s22 += b * b;
        s12 += a * b;
    }
    const double var1 = s11 / n - (s1 / n) * (s1 / n);
    const double var2 = s22 / n - (s2 / n) * (s2 / n);
    const double cov12 = s12 / n - (s1 / n) * (s2 / n);

    const Eigen::MatrixXd cov = discrete_covariance(fem, spec);
    const int ic = fem.node_to_interior[center];
    const int ip = fem.node_to_interior[partner];
    REQUIRE(ic >= 0);
    REQUIRE(ip >= 0);
    const double want_var1 = cov(ic, ic), want_var2 = cov(ip, ip), want_cov = cov(ic, ip);

    // three Monte-Carlo standard errors for Gaussian moment estimates
    CHECK(std::abs(var1 - want_var1) <= 3.0 * want_var1 * std::sqrt(2.0 / n));
    CHECK(std::abs(var2 - want_var2) <= 3.0 * want_var2 * std::sqrt(2.0 / n));
    CHECK(std::abs(cov12 - want_cov) <=
          3.0 * std::sqrt((want_var1 * want_var2 + want_cov * want_cov) / n));

    // mean-zero check at every interior node
    for (int i = 0; i < mesh.node_count(); ++i)
        if (!mesh.is_boundary(i))
            max_abs_mean_num = std::max(max_abs_mean_num, std::abs(mean_acc(i) / n));
    CHECK(max_abs_mean_num <= 4.0 * std::sqrt(spec.sigma2) / std::sqrt(n));
}
