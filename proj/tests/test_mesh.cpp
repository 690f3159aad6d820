#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "lsenkf/mesh.hpp"
#include "oracles.hpp"
#include "test_helpers.hpp"

using namespace lsenkf;

namespace {

double max_element_diameter(const TriMesh& mesh) {
    double h = 0.0;
    for (const auto& el : mesh.elements)
        for (int i = 0; i < 3; ++i)
            h = std::max(h, distance(mesh.nodes[el[i]], mesh.nodes[el[(i + 1) % 3]]));
    return h;
}

// quadrature of g over a physical triangle
template <typename G>
double quad_integrate(const TriQuadRule& rule, const double vx[3], const double vy[3], G g) {
    const double area = 0.5 * std::abs((vx[1] - vx[0]) * (vy[2] - vy[0]) -
                                       (vx[2] - vx[0]) * (vy[1] - vy[0]));
    double acc = 0.0;
    for (std::size_t q = 0; q < rule.weights.size(); ++q) {
        const auto& lam = rule.barycentric_points[q];
        const double x = lam[0] * vx[0] + lam[1] * vx[1] + lam[2] * vx[2];
        const double y = lam[0] * vy[0] + lam[1] * vy[1] + lam[2] * vy[2];
        acc += rule.weights[q] * g(x, y);
    }
    return area * acc;
}

}  // namespace

TEST_CASE("disk mesh satisfies its invariants and approximates the disk area") {
    const TriMesh coarse = build_disk_mesh(1.0, 0.5);
    CHECK_NOTHROW(check_mesh_invariants(coarse));
    CHECK(coarse.total_area() == doctest::Approx(M_PI).epsilon(0.05));

    const TriMesh fine = build_disk_mesh(1.0, 0.05);
    CHECK_NOTHROW(check_mesh_invariants(fine));
    CHECK(fine.total_area() == doctest::Approx(M_PI).epsilon(0.002));
}

TEST_CASE("disk mesh rejects bad arguments") {
    CHECK_THROWS_AS(build_disk_mesh(1.0, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(build_disk_mesh(-1.0, 0.1), std::invalid_argument);
    CHECK_THROWS_AS(build_disk_mesh(1.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(build_disk_mesh(1.0, -0.2), std::invalid_argument);
}

TEST_CASE("element diameters stay within 1.5x the target size") {
    for (double target : {0.5, 0.2, 0.1, 0.05}) {
        const TriMesh mesh = build_disk_mesh(1.0, target);
        CHECK(max_element_diameter(mesh) <= 1.5 * target);
        CHECK(mesh.mesh_size_h == doctest::Approx(max_element_diameter(mesh)));
    }
}

TEST_CASE("boundary node set matches the circle test") {
    const TriMesh mesh = build_disk_mesh(2.0, 0.4);
    const double tol = 1e-9 * mesh.radius;
    for (int i = 0; i < mesh.node_count(); ++i) {
        const bool on_circle =
            std::abs(std::hypot(mesh.nodes[i].x, mesh.nodes[i].y) - mesh.radius) <= tol;
        CHECK(mesh.is_boundary(i) == on_circle);
    }
    CHECK_FALSE(mesh.boundary_nodes.empty());
}

TEST_CASE("mesh area converges to the disk area at second order") {
    const double e1 = std::abs(M_PI - build_disk_mesh(1.0, 0.2).total_area());
    const double e2 = std::abs(M_PI - build_disk_mesh(1.0, 0.1).total_area());
    const double e3 = std::abs(M_PI - build_disk_mesh(1.0, 0.05).total_area());
    CHECK(e2 < e1);
    CHECK(e3 < e2);
    // halving h should shrink the error by about 4; require at least 2.8
    CHECK(e2 <= e1 / 2.8);
    CHECK(e3 <= e2 / 2.8);
}

TEST_CASE("square receivers enumerate the perimeter without duplicates") {
    SUBCASE("corners only") {
        const ReceiverArray arr = square_receivers(2.0, 2);
        REQUIRE(arr.points.size() == 4);
        for (const auto& p : arr.points) {
            CHECK(std::abs(p.x) == doctest::Approx(2.0));
            CHECK(std::abs(p.y) == doctest::Approx(2.0));
        }
    }
    SUBCASE("seven per side gives 24 points") {
        const ReceiverArray arr = square_receivers(2.0, 7);
        CHECK(arr.points.size() == 24);
    }
    SUBCASE("three per side includes the side midpoints") {
        const ReceiverArray arr = square_receivers(2.0, 3);
        REQUIRE(arr.points.size() == 8);
        auto has = [&](double x, double y) {
            return std::any_of(arr.points.begin(), arr.points.end(), [&](const Point2& p) {
                return std::abs(p.x - x) < 1e-12 && std::abs(p.y - y) < 1e-12;
            });
        };
        CHECK(has(0, 2));
        CHECK(has(0, -2));
        CHECK(has(2, 0));
        CHECK(has(-2, 0));
    }
    SUBCASE("every point lies on the square boundary and points are distinct") {
        const ReceiverArray arr = square_receivers(1.5, 7);
        for (std::size_t i = 0; i < arr.points.size(); ++i) {
            CHECK(std::max(std::abs(arr.points[i].x), std::abs(arr.points[i].y)) ==
                  doctest::Approx(1.5));
            for (std::size_t j = i + 1; j < arr.points.size(); ++j)
                CHECK(distance(arr.points[i], arr.points[j]) > 1e-12);
        }
    }
    SUBCASE("rejects degenerate inputs") {
        CHECK_THROWS_AS(square_receivers(2.0, 1), std::invalid_argument);
        CHECK_THROWS_AS(square_receivers(0.0, 4), std::invalid_argument);
    }
}

TEST_CASE("triangle quadrature rules") {
    SUBCASE("order 1 is the centroid rule") {
        const TriQuadRule rule = triangle_quadrature(1);
        REQUIRE(rule.weights.size() == 1);
        CHECK(rule.weights[0] == doctest::Approx(1.0));
        for (double lam : rule.barycentric_points[0]) CHECK(lam == doctest::Approx(1.0 / 3.0));
    }
    SUBCASE("order 2 integrates lambda1*lambda2 over the reference triangle") {
        const TriQuadRule rule = triangle_quadrature(2);
        REQUIRE(rule.weights.size() == 3);
        // reference triangle (0,0)-(1,0)-(0,1): lambda1 = 1-x-y, lambda2 = x
        const double vx[3] = {0, 1, 0}, vy[3] = {0, 0, 1};
        const double got =
            quad_integrate(rule, vx, vy, [](double x, double y) { return (1 - x - y) * x; });
        CHECK(got == doctest::Approx(1.0 / 24.0).epsilon(1e-14));
    }
    SUBCASE("order 3 integrates x^2 y exactly on a skewed triangle") {
        const TriQuadRule rule = triangle_quadrature(3);
        const double vx[3] = {0.2, 1.7, -0.3}, vy[3] = {-0.5, 0.1, 1.2};
        const double got =
            quad_integrate(rule, vx, vy, [](double x, double y) { return x * x * y; });
        const double want = oracle::triangle_monomial_integral(vx, vy, 2, 1);
        CHECK(got == doctest::Approx(want).epsilon(1e-12));
    }
    SUBCASE("unsupported orders are rejected") {
        CHECK_THROWS_AS(triangle_quadrature(0), std::invalid_argument);
        CHECK_THROWS_AS(triangle_quadrature(4), std::invalid_argument);
    }
    SUBCASE("weights and barycentric points are well formed") {
        for (int order : {1, 2, 3}) {
            const TriQuadRule rule = triangle_quadrature(order);
            double wsum = 0.0;
            for (double w : rule.weights) wsum += w;
            CHECK(std::abs(wsum - 1.0) <= 1e-14);
            for (const auto& lam : rule.barycentric_points) {
                CHECK(lam[0] + lam[1] + lam[2] == doctest::Approx(1.0).epsilon(1e-14));
                for (double l : lam) {
                    CHECK(l >= 0.0);
                    CHECK(l <= 1.0);
                }
            }
        }
    }
    SUBCASE("each rule is exact for all monomials up to its degree on random triangles") {
        testutil::Rng rng(42);
        for (int order : {1, 2, 3}) {
            const TriQuadRule rule = triangle_quadrature(order);
            for (int trial = 0; trial < 5; ++trial) {
                double vx[3], vy[3];
                do {
                    for (int i = 0; i < 3; ++i) {
                        vx[i] = rng.uniform(-2, 2);
                        vy[i] = rng.uniform(-2, 2);
                    }
                } while (std::abs((vx[1] - vx[0]) * (vy[2] - vy[0]) -
                                  (vx[2] - vx[0]) * (vy[1] - vy[0])) < 0.1);
                for (int p = 0; p <= rule.degree; ++p)
                    for (int q = 0; p + q <= rule.degree; ++q) {
                        const double got = quad_integrate(
                            rule, vx, vy,
                            [&](double x, double y) { return std::pow(x, p) * std::pow(y, q); });
                        const double want = oracle::triangle_monomial_integral(vx, vy, p, q);
                        CHECK(std::abs(got - want) <= 1e-12 * std::max(1.0, std::abs(want)));
                    }
            }
        }
    }
}

TEST_CASE("element gradients are exact for affine fields") {
    const TriMesh mesh = build_disk_mesh(1.0, 0.3);
    Eigen::VectorXd constant = Eigen::VectorXd::Constant(mesh.node_count(), 7.5);
    Eigen::VectorXd linear_x(mesh.node_count()), affine(mesh.node_count());
    for (int i = 0; i < mesh.node_count(); ++i) {
        linear_x(i) = mesh.nodes[i].x;
        affine(i) = 3.0 * mesh.nodes[i].x + 4.0 * mesh.nodes[i].y - 2.0;
    }
    for (int e = 0; e < mesh.element_count(); ++e) {
        CHECK(element_gradient(mesh, constant, e).norm() == doctest::Approx(0.0));
        const Eigen::Vector2d gx = element_gradient(mesh, linear_x, e);
        CHECK(gx(0) == doctest::Approx(1.0).epsilon(1e-13));
        CHECK(gx(1) == doctest::Approx(0.0).epsilon(1e-13));
        const Eigen::Vector2d ga = element_gradient(mesh, affine, e);
        CHECK(ga(0) == doctest::Approx(3.0).epsilon(1e-13));
        CHECK(ga(1) == doctest::Approx(4.0).epsilon(1e-13));
    }
}

TEST_CASE("element gradient rejects bad indices and shapes") {
    const TriMesh mesh = build_disk_mesh(1.0, 0.4);
    const Eigen::VectorXd field = Eigen::VectorXd::Zero(mesh.node_count());
    CHECK_THROWS_AS(element_gradient(mesh, field, -1), std::out_of_range);
    CHECK_THROWS_AS(element_gradient(mesh, field, mesh.element_count()), std::out_of_range);
    CHECK_THROWS_AS(element_gradient(mesh, Eigen::VectorXd::Zero(3), 0), std::invalid_argument);
}

TEST_CASE("element gradients of a quadratic converge at first order") {
    auto max_centroid_error = [](double target_h) {
        const TriMesh mesh = build_disk_mesh(1.0, target_h);
        Eigen::VectorXd u(mesh.node_count());
        for (int i = 0; i < mesh.node_count(); ++i)
            u(i) = mesh.nodes[i].x * mesh.nodes[i].x + mesh.nodes[i].y;
        double worst = 0.0;
        for (int e = 0; e < mesh.element_count(); ++e) {
            const Point2 c = mesh.element_centroid(e);
            const Eigen::Vector2d g = element_gradient(mesh, u, e);
            worst = std::max(worst, (g - Eigen::Vector2d(2.0 * c.x, 1.0)).norm());
        }
        return worst;
    };
    const double e1 = max_centroid_error(0.2);
    const double e2 = max_centroid_error(0.1);
    const double e3 = max_centroid_error(0.05);
    CHECK(e2 <= 0.75 * e1);
    CHECK(e3 <= 0.75 * e2);
}

TEST_CASE("nodal lumped areas partition the mesh area") {
    const TriMesh mesh = build_disk_mesh(1.0, 0.2);
    const Eigen::VectorXd w = nodal_lumped_areas(mesh);
    REQUIRE(w.size() == mesh.node_count());
    CHECK(w.minCoeff() > 0.0);
    CHECK(w.sum() == doctest::Approx(mesh.total_area()).epsilon(1e-12));
}

TEST_CASE("mesh export and import round-trip bit-exactly") {
    const TriMesh mesh = build_disk_mesh(1.0, 0.35);
    const std::string dir = testutil::temp_dir("mesh_roundtrip");
    const std::string path1 = dir + "/a.txt", path2 = dir + "/b.txt";
    export_mesh(mesh, path1);
    const TriMesh back = import_mesh(path1);
    export_mesh(back, path2);

    std::ifstream f1(path1), f2(path2);
    std::stringstream s1, s2;
    s1 << f1.rdbuf();
    s2 << f2.rdbuf();
    CHECK(s1.str() == s2.str());

    REQUIRE(back.node_count() == mesh.node_count());
    REQUIRE(back.element_count() == mesh.element_count());
    for (int i = 0; i < mesh.node_count(); ++i) {
        CHECK(back.nodes[i].x == mesh.nodes[i].x);
        CHECK(back.nodes[i].y == mesh.nodes[i].y);
    }
    CHECK(back.elements == mesh.elements);
    CHECK(back.boundary_nodes == mesh.boundary_nodes);
    CHECK_NOTHROW(check_mesh_invariants(back));
}

TEST_CASE("mesh import rejects unreadable input") {
    CHECK_THROWS(import_mesh("/nonexistent/path/mesh.txt"));
}
