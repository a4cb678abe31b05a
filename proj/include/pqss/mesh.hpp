#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <numbers>
#include <ostream>
#include <string>
#include <vector>

#include "pqss/error.hpp"

namespace pqss {

enum class DomainKind { Interval, Square, Disk };

inline const char* to_string(DomainKind kind)
{
    switch (kind) {
    case DomainKind::Interval: return "interval";
    case DomainKind::Square: return "square";
    case DomainKind::Disk: return "disk";
    }
    return "unknown";
}

using Point = std::array<double, 2>;
/// Node indices of a segment (first two entries) or a triangle.
using Cell = std::array<int, 3>;

/// Simplicial P1 mesh of one of the supported domains. Immutable after construction;
/// share it through MeshPtr.
class Mesh {
public:
    int dimension() const noexcept { return dim_; }
    DomainKind domain() const noexcept { return domain_; }
    /// Side length of the interval/square or radius of the disk.
    double extent() const noexcept { return extent_; }

    std::size_t num_nodes() const noexcept { return nodes_.size(); }
    std::size_t num_elements() const noexcept { return elements_.size(); }
    int vertices_per_element() const noexcept { return dim_ + 1; }

    const std::vector<Point>& nodes() const noexcept { return nodes_; }
    const std::vector<Cell>& elements() const noexcept { return elements_; }
    const std::vector<int>& boundary_nodes() const noexcept { return boundary_; }
    bool is_boundary(std::size_t node) const noexcept { return on_boundary_[node] != 0; }
    const std::vector<double>& element_measures() const noexcept { return measures_; }

    /// Gradient of the barycentric coordinate of local vertex k on element e (constant per element).
    const Point& basis_gradient(std::size_t e, int k) const noexcept { return gradients_[e][k]; }

    /// Measure of the discretized domain (the inscribed polygon for the disk).
    double domain_measure() const noexcept { return domain_measure_; }
    double inradius() const noexcept { return inradius_; }

    /// Distance of a point to the analytic boundary of the domain.
    double distance_to_boundary(const Point& x) const noexcept
    {
        switch (domain_) {
        case DomainKind::Interval: return std::min(x[0], extent_ - x[0]);
        case DomainKind::Square:
            return std::min({x[0], extent_ - x[0], x[1], extent_ - x[1]});
        case DomainKind::Disk: return extent_ - std::hypot(x[0], x[1]);
        }
        return 0.0;
    }

private:
    Mesh() = default;
    void finalize();

    int dim_ = 1;
    DomainKind domain_ = DomainKind::Interval;
    double extent_ = 1.0;
    std::vector<Point> nodes_;
    std::vector<Cell> elements_;
    std::vector<int> boundary_;
    std::vector<char> on_boundary_;
    std::vector<double> measures_;
    std::vector<std::array<Point, 3>> gradients_;
    double domain_measure_ = 0.0;
    double inradius_ = 0.0;

    friend std::shared_ptr<const Mesh> build_interval_mesh(int n, double length);
    friend std::shared_ptr<const Mesh> build_square_mesh(int n);
    friend std::shared_ptr<const Mesh> build_disk_mesh(int rings, int boundary_vertices);
};

using MeshPtr = std::shared_ptr<const Mesh>;

inline void Mesh::finalize()
{
    on_boundary_.assign(nodes_.size(), 0);
    for (int b : boundary_) on_boundary_[b] = 1;
    std::sort(boundary_.begin(), boundary_.end());

    measures_.resize(elements_.size());
    gradients_.resize(elements_.size());
    for (std::size_t e = 0; e < elements_.size(); ++e) {
        const Cell& c = elements_[e];
        if (dim_ == 1) {
            const double h = nodes_[c[1]][0] - nodes_[c[0]][0];
            measures_[e] = h;
            gradients_[e] = {Point{-1.0 / h, 0.0}, Point{1.0 / h, 0.0}, Point{0.0, 0.0}};
        } else {
            const Point& a = nodes_[c[0]];
            const Point& b = nodes_[c[1]];
            const Point& d = nodes_[c[2]];
            const double det = (b[0] - a[0]) * (d[1] - a[1]) - (d[0] - a[0]) * (b[1] - a[1]);
            measures_[e] = 0.5 * det;
            // grad(lambda_k) = rot90(opposite edge) / det
            gradients_[e] = {Point{(b[1] - d[1]) / det, (d[0] - b[0]) / det},
                             Point{(d[1] - a[1]) / det, (a[0] - d[0]) / det},
                             Point{(a[1] - b[1]) / det, (b[0] - a[0]) / det}};
        }
        if (!(measures_[e] > 0.0))
            throw Error(ErrorKind::InvalidResolution, "element " + std::to_string(e) + " has non-positive measure",
                        "mesh");
    }
}

/// Uniform mesh of (0, length) with n elements.
inline MeshPtr build_interval_mesh(int n, double length = 1.0)
{
    if (n < 2) throw Error(ErrorKind::InvalidResolution, "interval mesh needs n >= 2, got " + std::to_string(n), "mesh");
    auto mesh = std::shared_ptr<Mesh>(new Mesh());
    mesh->dim_ = 1;
    mesh->domain_ = DomainKind::Interval;
    mesh->extent_ = length;
    mesh->nodes_.resize(n + 1);
    for (int i = 0; i <= n; ++i) mesh->nodes_[i] = {length * static_cast<double>(i) / n, 0.0};
    mesh->nodes_[n][0] = length;
    mesh->elements_.resize(n);
    for (int i = 0; i < n; ++i) mesh->elements_[i] = {i, i + 1, -1};
    mesh->boundary_ = {0, n};
    mesh->domain_measure_ = length;
    mesh->inradius_ = 0.5 * length;
    mesh->finalize();
    return mesh;
}

/// Structured triangulation of (0,1)^2: n x n squares, each cut along its (0,0)-(1,1) diagonal.
inline MeshPtr build_square_mesh(int n)
{
    if (n < 2) throw Error(ErrorKind::InvalidResolution, "square mesh needs n >= 2, got " + std::to_string(n), "mesh");
    auto mesh = std::shared_ptr<Mesh>(new Mesh());
    mesh->dim_ = 2;
    mesh->domain_ = DomainKind::Square;
    mesh->extent_ = 1.0;
    const int m = n + 1;
    mesh->nodes_.resize(static_cast<std::size_t>(m) * m);
    for (int j = 0; j < m; ++j)
        for (int i = 0; i < m; ++i) {
            mesh->nodes_[j * m + i] = {static_cast<double>(i) / n, static_cast<double>(j) / n};
            if (i == 0 || j == 0 || i == n || j == n) mesh->boundary_.push_back(j * m + i);
        }
    mesh->elements_.reserve(2 * static_cast<std::size_t>(n) * n);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            const int v00 = j * m + i, v10 = v00 + 1, v01 = v00 + m, v11 = v01 + 1;
            mesh->elements_.push_back({v00, v10, v11});
            mesh->elements_.push_back({v00, v11, v01});
        }
    mesh->domain_measure_ = 1.0;
    mesh->inradius_ = 0.5;
    mesh->finalize();
    return mesh;
}

/// Polygonal approximation of the unit disk: concentric rings stitched into triangles.
/// The outer ring carries `boundary_vertices` nodes placed exactly on the unit circle.
inline MeshPtr build_disk_mesh(int rings, int boundary_vertices = 64)
{
    if (rings < 2) throw Error(ErrorKind::InvalidResolution, "disk mesh needs >= 2 rings", "mesh");
    if (boundary_vertices < 6) throw Error(ErrorKind::InvalidResolution, "disk mesh needs >= 6 boundary vertices", "mesh");
    auto mesh = std::shared_ptr<Mesh>(new Mesh());
    mesh->dim_ = 2;
    mesh->domain_ = DomainKind::Disk;
    mesh->extent_ = 1.0;

    mesh->nodes_.push_back({0.0, 0.0});
    std::vector<int> ring_start{0};
    std::vector<int> ring_count{1};
    for (int j = 1; j <= rings; ++j) {
        const int count = std::max(6, static_cast<int>(std::lround(boundary_vertices * static_cast<double>(j) / rings)));
        const double radius = static_cast<double>(j) / rings;
        ring_start.push_back(static_cast<int>(mesh->nodes_.size()));
        ring_count.push_back(count);
        for (int k = 0; k < count; ++k) {
            const double t = 2.0 * std::numbers::pi * k / count;
            mesh->nodes_.push_back({radius * std::cos(t), radius * std::sin(t)});
            if (j == rings) mesh->boundary_.push_back(static_cast<int>(mesh->nodes_.size()) - 1);
        }
    }

    for (int k = 0; k < ring_count[1]; ++k)
        mesh->elements_.push_back({0, ring_start[1] + k, ring_start[1] + (k + 1) % ring_count[1]});

    // Merge-walk by angle between consecutive rings.
    for (int j = 2; j <= rings; ++j) {
        const int ni = ring_count[j - 1], no = ring_count[j];
        const int si = ring_start[j - 1], so = ring_start[j];
        int a = 0, b = 0;
        while (a < ni || b < no) {
            const double next_inner = static_cast<double>(a + 1) / ni;
            const double next_outer = static_cast<double>(b + 1) / no;
            if (b < no && (a >= ni || next_outer <= next_inner)) {
                mesh->elements_.push_back({si + a % ni, so + b % no, so + (b + 1) % no});
                ++b;
            } else {
                mesh->elements_.push_back({si + a % ni, so + b % no, si + (a + 1) % ni});
                ++a;
            }
        }
    }

    const int outer = ring_count[rings];
    mesh->domain_measure_ = 0.5 * outer * std::sin(2.0 * std::numbers::pi / outer);
    mesh->inradius_ = 1.0;
    mesh->finalize();
    return mesh;
}

/// Node partition into a strip set and its complement.
struct NodeSet {
    std::vector<int> indices;
    std::vector<int> complement_indices;
};

/// Nodes within analytic distance `delta` of the boundary.
inline NodeSet boundary_strip(const Mesh& mesh, double delta)
{
    if (!(delta > 0.0) || !(delta < mesh.inradius()))
        throw Error(ErrorKind::InvalidStrip,
                    "strip width " + std::to_string(delta) + " outside (0, " + std::to_string(mesh.inradius()) + ")",
                    "mesh");
    NodeSet set;
    for (std::size_t i = 0; i < mesh.num_nodes(); ++i) {
        if (mesh.is_boundary(i) || mesh.distance_to_boundary(mesh.nodes()[i]) <= delta)
            set.indices.push_back(static_cast<int>(i));
        else
            set.complement_indices.push_back(static_cast<int>(i));
    }
    return set;
}

/// Plain-text node/element/boundary listing.
inline void write_mesh_text(std::ostream& os, const Mesh& mesh)
{
    os.precision(17);
    os << "# pqss mesh\n";
    os << "domain " << to_string(mesh.domain()) << "\n";
    os << "dimension " << mesh.dimension() << "\n";
    os << "nodes " << mesh.num_nodes() << "\n";
    for (const Point& x : mesh.nodes()) {
        os << x[0];
        if (mesh.dimension() == 2) os << ' ' << x[1];
        os << '\n';
    }
    os << "elements " << mesh.num_elements() << "\n";
    for (const Cell& c : mesh.elements()) {
        for (int k = 0; k < mesh.vertices_per_element(); ++k) os << (k ? " " : "") << c[k];
        os << '\n';
    }
    os << "boundary " << mesh.boundary_nodes().size() << "\n";
    for (std::size_t k = 0; k < mesh.boundary_nodes().size(); ++k)
        os << (k ? " " : "") << mesh.boundary_nodes()[k];
    os << '\n';
}

} // namespace pqss
