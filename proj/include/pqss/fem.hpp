#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "pqss/error.hpp"
#include "pqss/field.hpp"
#include "pqss/mesh.hpp"
#include "pqss/nonlinearity.hpp"
#include "pqss/problem.hpp"
#include "pqss/quadrature.hpp"

namespace pqss {

using SparseMatrix = Eigen::SparseMatrix<double>;

struct FemOptions {
    int quadrature_degree = 3;
};

namespace fem {

/// Gradient of a P1 nodal vector on element e.
inline Point element_gradient(const Mesh& mesh, std::size_t e, const Eigen::VectorXd& u)
{
    const Cell& c = mesh.elements()[e];
    Point g{0.0, 0.0};
    for (int k = 0; k < mesh.vertices_per_element(); ++k) {
        const Point& dl = mesh.basis_gradient(e, k);
        g[0] += u[c[k]] * dl[0];
        g[1] += u[c[k]] * dl[1];
    }
    return g;
}

inline double dot(const Point& a, const Point& b) { return a[0] * b[0] + a[1] * b[1]; }

/// (|g|^2 + eps)^{(p-2)/2}, with the 0 * inf case of an exactly vanishing gradient mapped to 0.
inline double flux_coefficient(double grad_sq, double p, double eps)
{
    const double s = grad_sq + eps;
    if (s == 0.0) return p >= 2.0 ? (p == 2.0 ? 1.0 : 0.0) : 0.0;
    return p == 2.0 ? 1.0 : std::pow(s, 0.5 * (p - 2.0));
}

/// |s|^{r-2} s.
inline double signed_power(double s, double r)
{
    if (s == 0.0) return 0.0;
    return r == 2.0 ? s : std::copysign(std::pow(std::abs(s), r - 1.0), s);
}

/// Assembles L_i = sum_e sum_qp w |e| fn(values at qp) xi_i(qp). `fields` are nodal vectors
/// interpolated to each quadrature point; fn receives them in order.
template <std::size_t N, class Fn>
Eigen::VectorXd assemble_load(const Mesh& mesh, const QuadratureRule& rule,
                              const std::array<const Eigen::VectorXd*, N>& fields, Fn&& fn)
{
    Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(mesh.num_nodes()));
    const int nv = mesh.vertices_per_element();
    std::array<double, N> vals{};
    for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
        const Cell& c = mesh.elements()[e];
        const double meas = mesh.element_measures()[e];
        for (std::size_t qp = 0; qp < rule.size(); ++qp) {
            const auto& bary = rule.barycentric[qp];
            for (std::size_t j = 0; j < N; ++j) {
                double s = 0.0;
                for (int k = 0; k < nv; ++k) s += bary[k] * (*fields[j])[c[k]];
                vals[j] = s;
            }
            const double value = fn(vals) * rule.weights[qp] * meas;
            for (int k = 0; k < nv; ++k) out[c[k]] += value * bary[k];
        }
    }
    return out;
}

/// Assembles M_ij = sum_e sum_qp w |e| fn(values at qp) xi_i xi_j.
template <std::size_t N, class Fn>
SparseMatrix assemble_weighted_mass(const Mesh& mesh, const QuadratureRule& rule,
                                    const std::array<const Eigen::VectorXd*, N>& fields, Fn&& fn)
{
    std::vector<Eigen::Triplet<double>> triplets;
    const int nv = mesh.vertices_per_element();
    triplets.reserve(mesh.num_elements() * nv * nv);
    std::array<double, N> vals{};
    for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
        const Cell& c = mesh.elements()[e];
        const double meas = mesh.element_measures()[e];
        double local[3][3] = {};
        for (std::size_t qp = 0; qp < rule.size(); ++qp) {
            const auto& bary = rule.barycentric[qp];
            for (std::size_t j = 0; j < N; ++j) {
                double s = 0.0;
                for (int k = 0; k < nv; ++k) s += bary[k] * (*fields[j])[c[k]];
                vals[j] = s;
            }
            const double value = fn(vals) * rule.weights[qp] * meas;
            for (int i = 0; i < nv; ++i)
                for (int j = 0; j < nv; ++j) local[i][j] += value * bary[i] * bary[j];
        }
        for (int i = 0; i < nv; ++i)
            for (int j = 0; j < nv; ++j) triplets.emplace_back(c[i], c[j], local[i][j]);
    }
    const auto n = static_cast<Eigen::Index>(mesh.num_nodes());
    SparseMatrix m(n, n);
    m.setFromTriplets(triplets.begin(), triplets.end());
    return m;
}

/// A_i = sum_e (|grad u|^2 + eps)^{(p-2)/2} grad u . grad xi_i |e| for every node i.
inline Eigen::VectorXd p_laplacian_vector(const Mesh& mesh, const Eigen::VectorXd& u, double p, double eps)
{
    Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(mesh.num_nodes()));
    for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
        const Point g = element_gradient(mesh, e, u);
        const double coef = flux_coefficient(dot(g, g), p, eps) * mesh.element_measures()[e];
        const Cell& c = mesh.elements()[e];
        for (int k = 0; k < mesh.vertices_per_element(); ++k) out[c[k]] += coef * dot(g, mesh.basis_gradient(e, k));
    }
    return out;
}

/// Tangent (Hessian of the regularized p-energy):
/// (s+eps)^{(p-2)/2} grad xi_i . grad xi_j + (p-2)(s+eps)^{(p-4)/2} (g.grad xi_i)(g.grad xi_j), s = |g|^2.
inline SparseMatrix p_laplacian_tangent(const Mesh& mesh, const Eigen::VectorXd& u, double p, double eps)
{
    std::vector<Eigen::Triplet<double>> triplets;
    const int nv = mesh.vertices_per_element();
    triplets.reserve(mesh.num_elements() * nv * nv);
    for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
        const Point g = element_gradient(mesh, e, u);
        const double s = dot(g, g) + eps;
        const double meas = mesh.element_measures()[e];
        double c1 = 1.0, c2 = 0.0;
        if (p != 2.0) {
            if (s > 0.0) {
                c1 = std::pow(s, 0.5 * (p - 2.0));
                c2 = (p - 2.0) * std::pow(s, 0.5 * (p - 4.0));
            } else {
                c1 = 0.0;
            }
        }
        const Cell& c = mesh.elements()[e];
        for (int i = 0; i < nv; ++i) {
            const Point& gi = mesh.basis_gradient(e, i);
            for (int j = 0; j < nv; ++j) {
                const Point& gj = mesh.basis_gradient(e, j);
                const double v = meas * (c1 * dot(gi, gj) + c2 * dot(g, gi) * dot(g, gj));
                triplets.emplace_back(c[i], c[j], v);
            }
        }
    }
    const auto n = static_cast<Eigen::Index>(mesh.num_nodes());
    SparseMatrix m(n, n);
    m.setFromTriplets(triplets.begin(), triplets.end());
    return m;
}

/// Regularized discrete p-energy sum_e |e| (|grad u|^2 + eps)^{p/2} / p.
inline double p_energy(const Mesh& mesh, const Eigen::VectorXd& u, double p, double eps)
{
    double energy = 0.0;
    for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
        const Point g = element_gradient(mesh, e, u);
        const double s = dot(g, g) + eps;
        energy += mesh.element_measures()[e] * (p == 2.0 ? s : std::pow(s, 0.5 * p)) / p;
    }
    return energy;
}

/// M_i = int |u|^{r-2} u xi_i.
inline Eigen::VectorXd power_mass_vector(const Mesh& mesh, const QuadratureRule& rule, const Eigen::VectorXd& u,
                                         double r)
{
    return assemble_load<1>(mesh, rule, {&u}, [r](const std::array<double, 1>& v) { return signed_power(v[0], r); });
}

} // namespace fem

/// sum_e (|grad u|^2 + eps)^{(p-2)/2} grad u . grad xi |e| with elementwise-constant P1 gradients.
inline double apply_p_laplacian_form(const Field& u, const Field& xi, double p, double eps = 0.0)
{
    require_same_mesh(u, xi);
    const Mesh& mesh = *u.mesh;
    double total = 0.0;
    for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
        const Point gu = fem::element_gradient(mesh, e, u.values);
        const Point gx = fem::element_gradient(mesh, e, xi.values);
        total += fem::flux_coefficient(fem::dot(gu, gu), p, eps) * fem::dot(gu, gx) * mesh.element_measures()[e];
    }
    return total;
}

/// int |u|^{p-2} u xi by Gauss quadrature on each element.
inline double apply_power_mass_form(const Field& u, const Field& xi, double p, const FemOptions& opts = {})
{
    require_same_mesh(u, xi);
    const QuadratureRule rule = quadrature_rule(u.mesh->dimension(), opts.quadrature_degree);
    const Eigen::VectorXd m = fem::power_mass_vector(*u.mesh, rule, u.values, p);
    return m.dot(xi.values);
}

/// Weak-form pieces of both equations tested against every hat function:
/// stiffness (p-Laplacian), power mass |w|^{r-2}w and the nonlinear source.
struct SystemForms {
    Eigen::VectorXd stiffness_u, mass_u, source_u;
    Eigen::VectorXd stiffness_v, mass_v, source_v;
};

namespace fem {

/// lambda1 a f(v) + mu1 alpha h(u) tested against every hat function. Nonlinearity
/// arguments are clamped at 0 (the problem is posed for nonnegative states).
inline Eigen::VectorXd source_u(const ProblemParams& prm, const NonlinearitySet& nl, const QuadratureRule& rule,
                                const Eigen::VectorXd& u, const Eigen::VectorXd& v)
{
    const double l1 = prm.lambda1, m1 = prm.mu1;
    return assemble_load<4>(*prm.mesh(), rule, {&u, &v, &prm.a.values, &prm.alpha.values},
                            [&](const std::array<double, 4>& x) {
                                double s = 0.0;
                                if (l1 != 0.0) s += l1 * x[2] * eval(nl.f, std::max(x[1], 0.0));
                                if (m1 != 0.0) s += m1 * x[3] * eval(nl.h, std::max(x[0], 0.0));
                                return s;
                            });
}

/// lambda2 b g(u) + mu2 beta gamma(v) tested against every hat function.
inline Eigen::VectorXd source_v(const ProblemParams& prm, const NonlinearitySet& nl, const QuadratureRule& rule,
                                const Eigen::VectorXd& u, const Eigen::VectorXd& v)
{
    const double l2 = prm.lambda2, m2 = prm.mu2;
    return assemble_load<4>(*prm.mesh(), rule, {&u, &v, &prm.b.values, &prm.beta.values},
                            [&](const std::array<double, 4>& x) {
                                double s = 0.0;
                                if (l2 != 0.0) s += l2 * x[2] * eval(nl.g, std::max(x[0], 0.0));
                                if (m2 != 0.0) s += m2 * x[3] * eval(nl.gamma, std::max(x[1], 0.0));
                                return s;
                            });
}

} // namespace fem

inline SystemForms system_forms(const Field& u, const Field& v, const ProblemParams& prm, const NonlinearitySet& nl,
                                const FemOptions& opts = {}, double eps = 0.0)
{
    require_same_mesh(u, v);
    if (u.mesh != prm.mesh()) throw Error(ErrorKind::MeshMismatch, "state and weights on different meshes", "fem");
    const Mesh& mesh = *u.mesh;
    const QuadratureRule rule = quadrature_rule(mesh.dimension(), opts.quadrature_degree);
    SystemForms forms;
    forms.stiffness_u = fem::p_laplacian_vector(mesh, u.values, prm.p, eps);
    forms.mass_u = fem::power_mass_vector(mesh, rule, u.values, prm.p);
    forms.source_u = fem::source_u(prm, nl, rule, u.values, v.values);
    forms.stiffness_v = fem::p_laplacian_vector(mesh, v.values, prm.q, eps);
    forms.mass_v = fem::power_mass_vector(mesh, rule, v.values, prm.q);
    forms.source_v = fem::source_v(prm, nl, rule, u.values, v.values);
    return forms;
}

/// Residual of one equation against the interior hat functions.
struct WeakResidual {
    Eigen::VectorXd values; ///< zero at boundary nodes
    double norm = 0.0;      ///< max |entry| over interior nodes
    double scale = 0.0;     ///< max |weak-form term| over interior nodes

    double relative() const { return scale > 0.0 ? norm / scale : norm; }
};

namespace fem {

inline WeakResidual make_residual(const Mesh& mesh, const Eigen::VectorXd& stiffness, const Eigen::VectorXd& mass,
                                  const Eigen::VectorXd& source)
{
    WeakResidual r;
    r.values = stiffness - mass - source;
    for (int b : mesh.boundary_nodes()) r.values[b] = 0.0;
    for (std::size_t i = 0; i < mesh.num_nodes(); ++i) {
        if (mesh.is_boundary(i)) continue;
        const auto k = static_cast<Eigen::Index>(i);
        r.norm = std::max(r.norm, std::abs(r.values[k]));
        r.scale = std::max({r.scale, std::abs(stiffness[k]), std::abs(mass[k]), std::abs(source[k])});
    }
    return r;
}

} // namespace fem

/// Discrete weak residuals of both equations.
inline std::pair<WeakResidual, WeakResidual> weak_residual_system(const Field& u, const Field& v,
                                                                  const ProblemParams& prm, const NonlinearitySet& nl,
                                                                  const FemOptions& opts = {})
{
    if (!vanishes_on_boundary(u) || !vanishes_on_boundary(v))
        throw Error(ErrorKind::BoundaryCondition, "state does not vanish on the boundary", "fem", "u = v = 0 on boundary");
    const SystemForms forms = system_forms(u, v, prm, nl, opts);
    const Mesh& mesh = *u.mesh;
    return {fem::make_residual(mesh, forms.stiffness_u, forms.mass_u, forms.source_u),
            fem::make_residual(mesh, forms.stiffness_v, forms.mass_v, forms.source_v)};
}

enum class Side { Sub, Super };
enum class Component { U, V };

inline const char* to_string(Side s) { return s == Side::Sub ? "sub" : "super"; }
inline const char* to_string(Component c) { return c == Component::U ? "u" : "v"; }

/// Outcome of one weak sub/supersolution inequality.
struct SubSuperReport {
    Side side = Side::Sub;
    Component component = Component::U;
    double violation = 0.0; ///< max signed gap; <= 0 means the inequality holds at every hat function
    double scale = 0.0;     ///< max |weak-form term|, the reference for the relative tolerance
    double tolerance = 0.0; ///< absolute tolerance applied (relative tolerance * scale)
    bool passed = false;
};

/// Tests the weak sub (<=) or super (>=) inequalities against every interior hat function,
/// which are nonnegative and span the discrete test cone.
inline std::vector<SubSuperReport> check_subsuper(const Field& pair_u, const Field& pair_v, Side side,
                                                  const ProblemParams& prm, const NonlinearitySet& nl,
                                                  double relative_tolerance = 1e-8, const FemOptions& opts = {})
{
    const SystemForms forms = system_forms(pair_u, pair_v, prm, nl, opts);
    const Mesh& mesh = *pair_u.mesh;
    const double sign = side == Side::Sub ? 1.0 : -1.0;
    std::vector<SubSuperReport> out;
    const auto one = [&](Component comp, const Eigen::VectorXd& st, const Eigen::VectorXd& ms,
                         const Eigen::VectorXd& src) {
        SubSuperReport rep;
        rep.side = side;
        rep.component = comp;
        rep.violation = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < mesh.num_nodes(); ++i) {
            if (mesh.is_boundary(i)) continue;
            const auto k = static_cast<Eigen::Index>(i);
            rep.violation = std::max(rep.violation, sign * (st[k] - ms[k] - src[k]));
            rep.scale = std::max({rep.scale, std::abs(st[k]), std::abs(ms[k]), std::abs(src[k])});
        }
        if (!std::isfinite(rep.violation)) rep.violation = 0.0;
        rep.tolerance = relative_tolerance * rep.scale;
        rep.passed = rep.violation <= rep.tolerance;
        out.push_back(rep);
    };
    one(Component::U, forms.stiffness_u, forms.mass_u, forms.source_u);
    one(Component::V, forms.stiffness_v, forms.mass_v, forms.source_v);
    return out;
}

/// Integral of a field (P1 quadrature exact).
inline double integrate(const Field& f)
{
    const Mesh& mesh = *f.mesh;
    double total = 0.0;
    for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
        double avg = 0.0;
        const Cell& c = mesh.elements()[e];
        for (int k = 0; k < mesh.vertices_per_element(); ++k) avg += f.values[c[k]];
        total += avg / mesh.vertices_per_element() * mesh.element_measures()[e];
    }
    return total;
}

} // namespace pqss
