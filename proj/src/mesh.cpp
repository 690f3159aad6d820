#include "lsenkf/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace lsenkf {

namespace {

double signed_area(const Point2& a, const Point2& b, const Point2& c) {
    return 0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y));
}

double element_diameter(const Point2& a, const Point2& b, const Point2& c) {
    return std::max({distance(a, b), distance(b, c), distance(c, a)});
}

// Shared by builder and importer: derived fields + invariant check.
void finalize_mesh(TriMesh& mesh) {
    const int n = mesh.node_count();
    mesh.node_elements.assign(n, {});
    double h = 0.0;
    for (int e = 0; e < mesh.element_count(); ++e) {
        const auto& el = mesh.elements[e];
        for (int v : el) mesh.node_elements[v].push_back(e);
        h = std::max(h, element_diameter(mesh.nodes[el[0]], mesh.nodes[el[1]], mesh.nodes[el[2]]));
    }
    mesh.mesh_size_h = h;
    double r = 0.0;
    for (const auto& p : mesh.nodes) r = std::max(r, std::hypot(p.x, p.y));
    mesh.radius = r;
    check_mesh_invariants(mesh);
}

}  // namespace

double TriMesh::element_area(int e) const {
    const auto& el = elements.at(e);
    return signed_area(nodes[el[0]], nodes[el[1]], nodes[el[2]]);
}

Point2 TriMesh::element_centroid(int e) const {
    const auto& el = elements.at(e);
    return {(nodes[el[0]].x + nodes[el[1]].x + nodes[el[2]].x) / 3.0,
            (nodes[el[0]].y + nodes[el[1]].y + nodes[el[2]].y) / 3.0};
}

bool TriMesh::is_boundary(int node) const {
    return std::binary_search(boundary_nodes.begin(), boundary_nodes.end(), node);
}

double TriMesh::total_area() const {
    double a = 0.0;
    for (int e = 0; e < element_count(); ++e) a += element_area(e);
    return a;
}

void check_mesh_invariants(const TriMesh& mesh) {
    const int n = mesh.node_count();
    if (n == 0 || mesh.element_count() == 0)
        throw std::runtime_error("mesh: empty node or element list");
    for (const auto& p : mesh.nodes)
        if (!std::isfinite(p.x) || !std::isfinite(p.y))
            throw std::runtime_error("mesh: non-finite node coordinate");
    for (int e = 0; e < mesh.element_count(); ++e) {
        const auto& el = mesh.elements[e];
        if (el[0] == el[1] || el[1] == el[2] || el[0] == el[2])
            throw std::runtime_error("mesh: repeated node index in element");
        for (int v : el)
            if (v < 0 || v >= n) throw std::runtime_error("mesh: element index out of range");
        double a = signed_area(mesh.nodes[el[0]], mesh.nodes[el[1]], mesh.nodes[el[2]]);
        if (a <= 0.0)
            throw std::runtime_error("mesh: element not counter-clockwise or degenerate");
    }
    // boundary set must match the circle test exactly
    const double tol = 1e-9 * mesh.radius;
    std::vector<int> on_circle;
    for (int i = 0; i < n; ++i)
        if (std::abs(std::hypot(mesh.nodes[i].x, mesh.nodes[i].y) - mesh.radius) <= tol)
            on_circle.push_back(i);
    if (on_circle != mesh.boundary_nodes)
        throw std::runtime_error("mesh: boundary_nodes does not match the circle node set");
}

TriMesh build_disk_mesh(double radius, double target_h) {
    if (!(radius > 0.0)) throw std::invalid_argument("build_disk_mesh: radius must be positive");
    if (!(target_h > 0.0) || !(target_h < radius))
        throw std::invalid_argument("build_disk_mesh: need 0 < target_h < radius");

    const int nrings = std::max(2, static_cast<int>(std::ceil(radius / target_h)));
    const double dr = radius / nrings;

    TriMesh mesh;
    mesh.nodes.push_back({0.0, 0.0});
    for (int j = 1; j <= nrings; ++j) {
        const int m = 6 * j;
        const double r = (j == nrings) ? radius : j * dr;
        for (int i = 0; i < m; ++i) {
            double a = 2.0 * M_PI * i / m;
            mesh.nodes.push_back({r * std::cos(a), r * std::sin(a)});
        }
    }

    auto ring_base = [](int j) { return j == 0 ? 0 : 1 + 3 * j * (j - 1); };

    // connect ring j-1 to ring j sector by sector, merging the two node
    // sequences by angular position
    for (int j = 1; j <= nrings; ++j) {
        const int no = 6 * j;            // outer ring node count
        const int ni = 6 * (j - 1);      // inner ring node count (0 => center)
        const int bo = ring_base(j);
        const int bi = ring_base(j - 1);
        for (int s = 0; s < 6; ++s) {
            int a = 0, b = 0;  // local offsets within the sector
            while (a < j || b < j - 1) {
                bool advance_outer;
                if (b == j - 1)
                    advance_outer = true;
                else if (a == j)
                    advance_outer = false;
                else
                    // strict comparison keeps the fan balanced; ties go to the
                    // inner ring so no node collects a long skewed edge
                    advance_outer = (a + 1) * (j - 1) < (b + 1) * j;
                int oa = bo + (s * j + a) % no;
                if (advance_outer) {
                    int oa1 = bo + (s * j + a + 1) % no;
                    int ib = ni == 0 ? 0 : bi + (s * (j - 1) + b) % ni;
                    mesh.elements.push_back({oa, oa1, ib});
                    ++a;
                } else {
                    int ib = bi + (s * (j - 1) + b) % ni;
                    int ib1 = bi + (s * (j - 1) + b + 1) % ni;
                    mesh.elements.push_back({oa, ib1, ib});
                    ++b;
                }
            }
        }
    }

    for (auto& el : mesh.elements) {
        if (signed_area(mesh.nodes[el[0]], mesh.nodes[el[1]], mesh.nodes[el[2]]) < 0.0)
            std::swap(el[1], el[2]);
    }

    const int bbase = ring_base(nrings);
    for (int i = 0; i < 6 * nrings; ++i) mesh.boundary_nodes.push_back(bbase + i);

    finalize_mesh(mesh);
    return mesh;
}

ReceiverArray square_receivers(double half_side, int per_side) {
    if (per_side < 2) throw std::invalid_argument("square_receivers: per_side must be >= 2");
    if (!(half_side > 0.0)) throw std::invalid_argument("square_receivers: half_side must be positive");

    ReceiverArray arr;
    arr.square_half_side = half_side;
    const double a = half_side;
    const int k = per_side - 1;
    const double step = 2.0 * a / k;
    // counter-clockwise: bottom, right, top, left; each side drops its end corner
    for (int i = 0; i < k; ++i) arr.points.push_back({-a + i * step, -a});
    for (int i = 0; i < k; ++i) arr.points.push_back({a, -a + i * step});
    for (int i = 0; i < k; ++i) arr.points.push_back({a - i * step, a});
    for (int i = 0; i < k; ++i) arr.points.push_back({-a, a - i * step});
    return arr;
}

TriQuadRule triangle_quadrature(int order) {
    TriQuadRule rule;
    switch (order) {
        case 1:
            rule.barycentric_points = {{1.0 / 3, 1.0 / 3, 1.0 / 3}};
            rule.weights = {1.0};
            rule.degree = 1;
            break;
        case 2:
            rule.barycentric_points = {{2.0 / 3, 1.0 / 6, 1.0 / 6},
                                       {1.0 / 6, 2.0 / 3, 1.0 / 6},
                                       {1.0 / 6, 1.0 / 6, 2.0 / 3}};
            rule.weights = {1.0 / 3, 1.0 / 3, 1.0 / 3};
            rule.degree = 2;
            break;
        case 3: {
            // 6-point rule with positive weights, exact through degree 4
            const double a = 0.445948490915965;
            const double wa = 0.223381589678011;
            const double b = 0.091576213509771;
            const double wb = 0.109951743655322;
            rule.barycentric_points = {{a, a, 1 - 2 * a}, {a, 1 - 2 * a, a}, {1 - 2 * a, a, a},
                                       {b, b, 1 - 2 * b}, {b, 1 - 2 * b, b}, {1 - 2 * b, b, b}};
            rule.weights = {wa, wa, wa, wb, wb, wb};
            rule.degree = 4;
            break;
        }
        default:
            throw std::invalid_argument("triangle_quadrature: order must be 1, 2 or 3");
    }
    return rule;
}

Eigen::Vector2d element_gradient(const TriMesh& mesh, const Eigen::VectorXd& nodal_field,
                                 int element) {
    if (nodal_field.size() != mesh.node_count())
        throw std::invalid_argument("element_gradient: field length does not match node count");
    if (element < 0 || element >= mesh.element_count())
        throw std::out_of_range("element_gradient: element index out of range");
    const auto& el = mesh.elements[element];
    const Point2& p1 = mesh.nodes[el[0]];
    const Point2& p2 = mesh.nodes[el[1]];
    const Point2& p3 = mesh.nodes[el[2]];
    const double a2 = (p2.x - p1.x) * (p3.y - p1.y) - (p3.x - p1.x) * (p2.y - p1.y);
    // vertex-difference form: constant fields yield an exact zero gradient
    const double d2 = nodal_field[el[1]] - nodal_field[el[0]];
    const double d3 = nodal_field[el[2]] - nodal_field[el[0]];
    Eigen::Vector2d g;
    g[0] = (d2 * (p3.y - p1.y) + d3 * (p1.y - p2.y)) / a2;
    g[1] = (d2 * (p1.x - p3.x) + d3 * (p2.x - p1.x)) / a2;
    return g;
}

Eigen::VectorXd nodal_lumped_areas(const TriMesh& mesh) {
    Eigen::VectorXd w = Eigen::VectorXd::Zero(mesh.node_count());
    for (int e = 0; e < mesh.element_count(); ++e) {
        const double third = mesh.element_area(e) / 3.0;
        for (int i : mesh.elements[e]) w[i] += third;
    }
    return w;
}

void export_mesh(const TriMesh& mesh, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("export_mesh: cannot open " + path);
    out << "nodes " << mesh.node_count() << " elements " << mesh.element_count() << "\n";
    char buf[80];
    for (int i = 0; i < mesh.node_count(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g %.17g %d\n", mesh.nodes[i].x, mesh.nodes[i].y,
                      mesh.is_boundary(i) ? 1 : 0);
        out << buf;
    }
    for (const auto& el : mesh.elements) out << el[0] << " " << el[1] << " " << el[2] << "\n";
    if (!out) throw std::runtime_error("export_mesh: write failure on " + path);
}

TriMesh import_mesh(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("import_mesh: cannot open " + path);
    std::string kw_nodes, kw_elements;
    int n = 0, m = 0;
    in >> kw_nodes >> n >> kw_elements >> m;
    if (!in || kw_nodes != "nodes" || kw_elements != "elements" || n <= 0 || m <= 0)
        throw std::runtime_error("import_mesh: malformed header in " + path);
    TriMesh mesh;
    mesh.nodes.resize(n);
    for (int i = 0; i < n; ++i) {
        int flag = 0;
        in >> mesh.nodes[i].x >> mesh.nodes[i].y >> flag;
        if (flag) mesh.boundary_nodes.push_back(i);
    }
    mesh.elements.resize(m);
    for (int e = 0; e < m; ++e) in >> mesh.elements[e][0] >> mesh.elements[e][1] >> mesh.elements[e][2];
    if (!in) throw std::runtime_error("import_mesh: truncated file " + path);
    finalize_mesh(mesh);
    return mesh;
}

}  // namespace lsenkf
