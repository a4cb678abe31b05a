#pragma once

#include <cmath>
#include <functional>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>

#include <Eigen/Core>

#include "pqss/error.hpp"
#include "pqss/mesh.hpp"

namespace pqss {

/// Nodal P1 function on a mesh.
struct Field {
    MeshPtr mesh;
    Eigen::VectorXd values;

    Field() = default;
    Field(MeshPtr m, Eigen::VectorXd v) : mesh(std::move(m)), values(std::move(v))
    {
        if (!mesh) throw Error(ErrorKind::MeshMismatch, "field without mesh", "field");
        if (static_cast<std::size_t>(values.size()) != mesh->num_nodes())
            throw Error(ErrorKind::MeshMismatch, "field length does not match node count", "field");
    }

    static Field zeros(const MeshPtr& mesh) { return Field(mesh, Eigen::VectorXd::Zero(mesh->num_nodes())); }
    static Field constant(const MeshPtr& mesh, double c)
    {
        return Field(mesh, Eigen::VectorXd::Constant(mesh->num_nodes(), c));
    }

    std::size_t size() const noexcept { return static_cast<std::size_t>(values.size()); }
    double operator[](std::size_t i) const { return values[static_cast<Eigen::Index>(i)]; }

    double max() const { return values.maxCoeff(); }
    double min() const { return values.minCoeff(); }
    double max_abs() const { return values.size() ? values.cwiseAbs().maxCoeff() : 0.0; }
    bool all_finite() const { return values.allFinite(); }

    Field scaled(double c) const { return Field(mesh, values * c); }
};

inline void require_same_mesh(const Field& a, const Field& b, const char* what = "fields")
{
    if (!a.mesh || a.mesh != b.mesh)
        throw Error(ErrorKind::MeshMismatch, std::string(what) + " live on different meshes", "fem");
}

/// Nodal interpolant of a point function.
inline Field interpolate(const MeshPtr& mesh, const std::function<double(const Point&)>& fn)
{
    Eigen::VectorXd v(mesh->num_nodes());
    for (std::size_t i = 0; i < mesh->num_nodes(); ++i) v[static_cast<Eigen::Index>(i)] = fn(mesh->nodes()[i]);
    return Field(mesh, std::move(v));
}

/// True when every boundary node value is exactly zero.
inline bool vanishes_on_boundary(const Field& f)
{
    for (int b : f.mesh->boundary_nodes())
        if (f.values[b] != 0.0) return false;
    return true;
}

/// Max over interior nodes of |a - b| / max(|b|_inf, floor).
inline double relative_max_distance(const Field& a, const Field& b, double floor = 1e-300)
{
    require_same_mesh(a, b);
    const double scale = std::max({a.max_abs(), b.max_abs(), floor});
    return (a.values - b.values).cwiseAbs().maxCoeff() / scale;
}

/// CSV with header `node,x[,y],value`.
inline void write_field_csv(std::ostream& os, const Field& f)
{
    const bool two_d = f.mesh->dimension() == 2;
    os << (two_d ? "node,x,y,value\n" : "node,x,value\n");
    std::ostringstream line;
    line.precision(17);
    for (std::size_t i = 0; i < f.size(); ++i) {
        line.str({});
        const Point& x = f.mesh->nodes()[i];
        line << i << ',' << x[0];
        if (two_d) line << ',' << x[1];
        line << ',' << f[i] << '\n';
        os << line.str();
    }
}

/// Reads a CSV produced by write_field_csv back onto `mesh`. Coordinates are checked.
inline Field read_field_csv(std::istream& is, const MeshPtr& mesh)
{
    std::string line;
    if (!std::getline(is, line)) throw Error(ErrorKind::Config, "empty field CSV", "field");
    Eigen::VectorXd v = Eigen::VectorXd::Zero(mesh->num_nodes());
    std::vector<char> seen(mesh->num_nodes(), 0);
    const int cols = mesh->dimension() == 2 ? 4 : 3;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<double> parts;
        while (std::getline(ss, cell, ',')) parts.push_back(std::stod(cell));
        if (static_cast<int>(parts.size()) != cols) throw Error(ErrorKind::Config, "malformed field CSV row: " + line, "field");
        const auto node = static_cast<std::size_t>(parts[0]);
        if (node >= mesh->num_nodes()) throw Error(ErrorKind::MeshMismatch, "field CSV node out of range", "field");
        const Point& x = mesh->nodes()[node];
        if (std::abs(parts[1] - x[0]) > 1e-12 || (cols == 4 && std::abs(parts[2] - x[1]) > 1e-12))
            throw Error(ErrorKind::MeshMismatch, "field CSV coordinates do not match mesh", "field");
        v[static_cast<Eigen::Index>(node)] = parts.back();
        seen[node] = 1;
    }
    for (char s : seen)
        if (!s) throw Error(ErrorKind::MeshMismatch, "field CSV misses nodes", "field");
    return Field(mesh, std::move(v));
}

} // namespace pqss
