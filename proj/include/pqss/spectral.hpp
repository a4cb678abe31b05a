#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "pqss/error.hpp"
#include "pqss/fem.hpp"
#include "pqss/field.hpp"
#include "pqss/mesh.hpp"
#include "pqss/quadrature.hpp"
#include "pqss/solver.hpp"

namespace pqss {

struct EigenOptions {
    double tolerance = 1e-10;   ///< relative change of the quotient between sweeps
    double field_tolerance = 1e-8;
    int max_iterations = 400;
    int restarts = 1;           ///< extra runs from seeded perturbations of the bump
    double perturbation = 0.25;
    std::uint64_t seed = 1;
    SolverOptions solver{};
};

/// First Dirichlet eigenpair of -Delta_r and the strip constants derived from it.
struct EigenData {
    double r = 2.0;
    double sigma = 0.0;
    Field phi;          ///< positive inside, zero on the boundary, max = 1
    double m = 0.0;     ///< min of |grad phi|^r - sigma phi^r over the strip
    double m_linear = 0.0; ///< same with sigma phi instead of sigma phi^r
    double eta = 0.0;   ///< min of phi off the strip
    double delta = 0.0; ///< strip width
    int iterations = 0;
    std::vector<double> restart_sigmas;
};

struct TorsionData {
    double r = 2.0;
    Field omega;
    double nu = 0.0;
};

struct StripConstants {
    double m = 0.0;
    double m_linear = 0.0;
    double eta = 0.0;
    double delta = 0.0;
};

namespace detail {

/// Positive bump vanishing on the boundary.
inline Field positive_bump(const MeshPtr& mesh)
{
    const double L = mesh->extent();
    return interpolate(mesh, [&](const Point& x) {
        switch (mesh->domain()) {
        case DomainKind::Interval: return x[0] * (L - x[0]);
        case DomainKind::Square: return x[0] * (L - x[0]) * x[1] * (L - x[1]);
        case DomainKind::Disk: return std::max(0.0, 1.0 - (x[0] * x[0] + x[1] * x[1]) / (L * L));
        }
        return 0.0;
    });
}

inline double lr_norm(const Mesh& mesh, const QuadratureRule& rule, const Eigen::VectorXd& w, double r)
{
    return std::pow(fem::power_mass_vector(mesh, rule, w, r).dot(w), 1.0 / r);
}

struct EigenRun {
    double sigma = 0.0;
    Eigen::VectorXd w;
    int iterations = 0;
};

/// Nonlinear inverse power iteration on the nonnegative cone:
/// solve -Delta_r y = |w|^{r-2} w, project y onto w >= 0, normalize in L^r.
/// Each sweep does not increase the quotient int|grad w|^r / int|w|^r.
inline EigenRun inverse_power(const MeshPtr& mesh_ptr, double r, Eigen::VectorXd w, const EigenOptions& opts)
{
    const Mesh& mesh = *mesh_ptr;
    const QuadratureRule rule = quadrature_rule(mesh.dimension(), opts.solver.quadrature_degree);
    for (int b : mesh.boundary_nodes()) w[b] = 0.0;
    w = w.cwiseMax(0.0);
    w /= lr_norm(mesh, rule, w, r);

    EigenRun run;
    double sigma_prev = std::numeric_limits<double>::infinity();
    for (int it = 1; it <= opts.max_iterations; ++it) {
        const Eigen::VectorXd load = fem::power_mass_vector(mesh, rule, w, r);
        Field guess(mesh_ptr, w * std::pow(std::max(run.sigma, 1e-300), -1.0 / (r - 1.0)));
        Field y = solve_scalar_dirichlet_load(mesh_ptr, r, load, opts.solver, it > 1 ? &guess : nullptr);
        Eigen::VectorXd next = y.values.cwiseMax(0.0);
        const double norm = lr_norm(mesh, rule, next, r);
        if (!(norm > 0.0) || !std::isfinite(norm))
            throw Error(ErrorKind::DegenerateEigenfunction, "inverse power iterate collapsed", "spectral");
        next /= norm;
        const double sigma = r * fem::p_energy(mesh, next, r, 0.0); // int |grad w|^r with ||w||_r = 1
        const double change = (next - w).cwiseAbs().maxCoeff() / next.cwiseAbs().maxCoeff();
        w = std::move(next);
        run.sigma = sigma;
        run.iterations = it;
        if (std::abs(sigma - sigma_prev) <= opts.tolerance * sigma && change <= opts.field_tolerance) {
            run.w = w;
            return run;
        }
        sigma_prev = sigma;
    }
    Error err(ErrorKind::NonConvergence, "Rayleigh quotient did not stabilize", "spectral");
    err.payload.assign(w.data(), w.data() + w.size());
    throw err;
}

/// Volume-weighted average of the element gradients around each node.
inline std::vector<Point> nodal_gradients(const Mesh& mesh, const Eigen::VectorXd& u)
{
    std::vector<Point> g(mesh.num_nodes(), Point{0.0, 0.0});
    std::vector<double> weight(mesh.num_nodes(), 0.0);
    for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
        const Point ge = fem::element_gradient(mesh, e, u);
        const double meas = mesh.element_measures()[e];
        for (int k = 0; k < mesh.vertices_per_element(); ++k) {
            const int n = mesh.elements()[e][k];
            g[n][0] += meas * ge[0];
            g[n][1] += meas * ge[1];
            weight[n] += meas;
        }
    }
    for (std::size_t i = 0; i < g.size(); ++i)
        if (weight[i] > 0.0) {
            g[i][0] /= weight[i];
            g[i][1] /= weight[i];
        }
    return g;
}

struct StripScan {
    std::vector<double> deltas;
    std::vector<double> strip_term;   ///< |grad phi|^r - sigma phi^r per node
    std::vector<double> linear_term;  ///< |grad phi|^r - sigma phi per node
    std::vector<double> distance;
};

inline StripScan strip_scan(const Mesh& mesh, const Field& phi, double r, double sigma)
{
    StripScan s;
    const auto grads = nodal_gradients(mesh, phi.values);
    for (std::size_t i = 0; i < mesh.num_nodes(); ++i) {
        const double gn = std::pow(std::hypot(grads[i][0], grads[i][1]), r);
        const double ph = std::max(phi[i], 0.0);
        s.strip_term.push_back(gn - sigma * std::pow(ph, r));
        s.linear_term.push_back(gn - sigma * ph);
        s.distance.push_back(mesh.is_boundary(i) ? 0.0 : mesh.distance_to_boundary(mesh.nodes()[i]));
    }
    const double R = mesh.inradius();
    const int count = 64;
    const double lo = std::log(R / 1000.0), hi = std::log(0.9 * R);
    for (int k = 0; k < count; ++k) s.deltas.push_back(std::exp(lo + (hi - lo) * k / (count - 1)));
    return s;
}

/// Strip constants of one field at a given width. Only interior nodes are scanned: they carry the
/// test functions, and at square corners the gradient vanishes on the boundary itself.
inline StripConstants strip_at(const Mesh& mesh, const Field& phi, const StripScan& s, double delta)
{
    StripConstants c;
    c.delta = delta;
    c.m = c.m_linear = c.eta = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < mesh.num_nodes(); ++i) {
        if (mesh.is_boundary(i)) continue;
        if (s.distance[i] <= delta) {
            c.m = std::min(c.m, s.strip_term[i]);
            c.m_linear = std::min(c.m_linear, s.linear_term[i]);
        } else {
            c.eta = std::min(c.eta, phi[i]);
        }
    }
    if (!std::isfinite(c.eta)) c.eta = 0.0;
    if (!std::isfinite(c.m)) c.m = c.m_linear = 0.0;
    return c;
}

inline double strip_objective(const StripConstants& c, double r)
{
    return c.m * std::pow(c.eta, r / (r - 1.0));
}

} // namespace detail

/// Picks delta from 64 log-spaced candidates in (inradius/1000, 0.9 inradius). Among candidates with
/// m > 0 and eta > 0 the one maximizing m * eta^{r/(r-1)} wins: this keeps the strip wide enough for
/// eta to stay away from zero, so the constants are stable under mesh refinement.
inline StripConstants strip_constants(const EigenData& eig, const Mesh& mesh)
{
    if (eig.phi.mesh.get() != &mesh) throw Error(ErrorKind::MeshMismatch, "eigenfunction on another mesh", "spectral");
    const detail::StripScan s = detail::strip_scan(mesh, eig.phi, eig.r, eig.sigma);
    StripConstants best;
    double best_score = -1.0;
    for (double d : s.deltas) {
        const StripConstants c = detail::strip_at(mesh, eig.phi, s, d);
        if (!(c.m > 0.0) || !(c.eta > 0.0)) continue;
        const double score = detail::strip_objective(c, eig.r);
        if (score > best_score) {
            best_score = score;
            best = c;
        }
    }
    if (best_score < 0.0)
        throw Error(ErrorKind::StripFailure, "no strip width with m > 0 and eta > 0 (mesh under-resolved?)", "spectral",
                    "|grad phi|^r - sigma phi^r >= m");
    return best;
}

/// One width for both exponents; m and eta are the smaller of the two.
inline std::pair<StripConstants, StripConstants> common_strip_constants(const EigenData& p, const EigenData& q,
                                                                        const Mesh& mesh)
{
    if (p.phi.mesh.get() != &mesh || q.phi.mesh.get() != &mesh)
        throw Error(ErrorKind::MeshMismatch, "eigenfunctions on another mesh", "spectral");
    const auto sp = detail::strip_scan(mesh, p.phi, p.r, p.sigma);
    const auto sq = detail::strip_scan(mesh, q.phi, q.r, q.sigma);
    std::pair<StripConstants, StripConstants> best;
    double best_score = -1.0;
    for (double d : sp.deltas) {
        const StripConstants cp = detail::strip_at(mesh, p.phi, sp, d);
        const StripConstants cq = detail::strip_at(mesh, q.phi, sq, d);
        if (!(cp.m > 0.0) || !(cp.eta > 0.0) || !(cq.m > 0.0) || !(cq.eta > 0.0)) continue;
        const double score = std::min(cp.m, cq.m) * std::min(std::pow(cp.eta, p.r / (p.r - 1.0)),
                                                              std::pow(cq.eta, q.r / (q.r - 1.0)));
        if (score > best_score) {
            best_score = score;
            best = {cp, cq};
        }
    }
    if (best_score < 0.0)
        throw Error(ErrorKind::StripFailure, "no common strip width with m > 0 and eta > 0", "spectral",
                    "|grad phi|^r - sigma phi^r >= m");
    return best;
}

/// Strip constants evaluated at a prescribed width (no admissibility check).
inline StripConstants strip_constants_at(const EigenData& eig, const Mesh& mesh, double delta)
{
    boundary_strip(mesh, delta); // validates the width
    const auto s = detail::strip_scan(mesh, eig.phi, eig.r, eig.sigma);
    return detail::strip_at(mesh, eig.phi, s, delta);
}

/// First eigenpair of -Delta_r with sup-normalized, nonnegative eigenfunction and strip constants.
inline EigenData first_eigenpair(const MeshPtr& mesh, double r, const EigenOptions& opts = {})
{
    if (!(r > 1.0) || !std::isfinite(r)) throw Error(ErrorKind::Config, "r must exceed 1", "spectral", "1 < p < inf");
    const Field bump = detail::positive_bump(mesh);
    detail::EigenRun best = detail::inverse_power(mesh, r, bump.values, opts);

    EigenData out;
    out.r = r;
    out.restart_sigmas.push_back(best.sigma);
    std::mt19937_64 rng(opts.seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    for (int k = 0; k < opts.restarts; ++k) {
        Eigen::VectorXd start = bump.values;
        for (Eigen::Index i = 0; i < start.size(); ++i) start[i] *= 1.0 + opts.perturbation * unit(rng);
        const detail::EigenRun run = detail::inverse_power(mesh, r, start, opts);
        out.restart_sigmas.push_back(run.sigma);
        if (run.sigma < best.sigma) best = run;
    }
    for (double s : out.restart_sigmas)
        if (std::abs(s - best.sigma) > 1e3 * opts.tolerance * best.sigma)
            throw Error(ErrorKind::NonConvergence, "eigenvalue differs across restarts", "spectral");

    out.sigma = best.sigma;
    out.iterations = best.iterations;
    out.phi = Field(mesh, best.w / best.w.maxCoeff());
    for (std::size_t i = 0; i < mesh->num_nodes(); ++i)
        if (!mesh->is_boundary(i) && !(out.phi[i] > 0.0))
            throw Error(ErrorKind::DegenerateEigenfunction, "eigenfunction vanishes at an interior node", "spectral");

    const StripConstants c = strip_constants(out, *mesh);
    out.m = c.m;
    out.m_linear = c.m_linear;
    out.eta = c.eta;
    out.delta = c.delta;
    return out;
}

/// Solution of -Delta_r w = 1 with zero boundary values.
inline TorsionData torsion_function(const MeshPtr& mesh, double r, const SolverOptions& opts = {})
{
    if (!(r > 1.0) || !std::isfinite(r)) throw Error(ErrorKind::Config, "r must exceed 1", "spectral", "1 < p < inf");
    TorsionData t;
    t.r = r;
    try {
        t.omega = solve_scalar_dirichlet(r, Field::constant(mesh, 1.0), opts);
    } catch (const Error& e) {
        throw e.with_stage("torsion");
    }
    t.nu = t.omega.max();
    return t;
}

/// C1 = max phi_p / phi_q and C2 = max phi_q / phi_p over interior nodes.
inline std::pair<double, double> comparability_constants(const Field& phi_p, const Field& phi_q)
{
    require_same_mesh(phi_p, phi_q, "eigenfunctions");
    const Mesh& mesh = *phi_p.mesh;
    double c1 = 0.0, c2 = 0.0;
    for (std::size_t i = 0; i < mesh.num_nodes(); ++i) {
        if (mesh.is_boundary(i)) continue;
        if (!(phi_p[i] > 0.0) || !(phi_q[i] > 0.0))
            throw Error(ErrorKind::DegenerateEigenfunction, "eigenfunction vanishes at interior node " + std::to_string(i),
                        "spectral");
        c1 = std::max(c1, phi_p[i] / phi_q[i]);
        c2 = std::max(c2, phi_q[i] / phi_p[i]);
    }
    return {c1, c2};
}

} // namespace pqss
