#ifndef LSENKF_MESH_HPP
#define LSENKF_MESH_HPP

#include <array>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace lsenkf {

struct Point2 {
    double x = 0.0;
    double y = 0.0;
};

inline double distance(const Point2& a, const Point2& b) {
    return std::hypot(a.x - b.x, a.y - b.y);
}

// Triangulated disk domain. Immutable after construction; element
// orientation is counter-clockwise and boundary_nodes lists exactly the
// nodes on the circle (tolerance 1e-9 * radius).
struct TriMesh {
    std::vector<Point2> nodes;
    std::vector<std::array<int, 3>> elements;
    std::vector<int> boundary_nodes;              // sorted node indices
    std::vector<std::vector<int>> node_elements;  // elements adjacent to each node
    double mesh_size_h = 0.0;                     // max element diameter
    double radius = 0.0;

    int node_count() const { return static_cast<int>(nodes.size()); }
    int element_count() const { return static_cast<int>(elements.size()); }
    double element_area(int e) const;
    Point2 element_centroid(int e) const;
    bool is_boundary(int node) const;
    double total_area() const;
};

// Measurement points on the boundary of the square [-a, a]^2.
struct ReceiverArray {
    std::vector<Point2> points;
    double square_half_side = 0.0;
};

// Quadrature rule on the reference triangle; weights are relative to the
// triangle area and sum to 1.
struct TriQuadRule {
    std::vector<std::array<double, 3>> barycentric_points;
    std::vector<double> weights;
    int degree = 0;  // exact for total degree <= degree
};

// Structured polar-ring triangulation of the disk of the given radius.
// Rings are placed at radii j * radius / nrings with 6j nodes on ring j;
// refinement is chosen so the max element diameter stays below
// 1.5 * target_h. Deterministic; boundary nodes land exactly on the circle.
TriMesh build_disk_mesh(double radius, double target_h);

// N = 4*(per_side - 1) uniformly spaced points on the square perimeter,
// corners counted once, enumerated counter-clockwise from (-a, -a).
ReceiverArray square_receivers(double half_side, int per_side);

TriQuadRule triangle_quadrature(int order);

// Gradient of the P1 interpolant of nodal_field on one element (constant
// per element).
Eigen::Vector2d element_gradient(const TriMesh& mesh, const Eigen::VectorXd& nodal_field,
                                 int element);

// Per-node share of the mesh area: one third of each adjacent element.
// Equals the row sums of the P1 mass matrix; sums to the total area.
Eigen::VectorXd nodal_lumped_areas(const TriMesh& mesh);

// Throws std::runtime_error if any TriMesh invariant is violated.
void check_mesh_invariants(const TriMesh& mesh);

// Plain-text mesh format: "nodes <n> elements <m>" header, then one node
// per line "x y boundary_flag", then one element per line "i j k".
// Round-trips bit-exactly.
void export_mesh(const TriMesh& mesh, const std::string& path);
TriMesh import_mesh(const std::string& path);

}  // namespace lsenkf

#endif
