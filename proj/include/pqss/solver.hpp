#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include "pqss/error.hpp"
#include "pqss/fem.hpp"
#include "pqss/field.hpp"
#include "pqss/mesh.hpp"

namespace pqss {

/// Damped-Newton options for the scalar Dirichlet problem -Delta_p w = rhs.
struct SolverOptions {
    double tolerance = 1e-11;       ///< final residual, relative to the load scale
    double abs_tolerance = 1e-14;   ///< absolute residual floor
    double stage_tolerance = 1e-6;  ///< relative residual accepted in intermediate eps stages
    int max_iterations = 400;       ///< Newton steps over all stages
    double eps_start = 1e-2;
    double eps_end = 1e-10;
    int eps_steps = 9;              ///< geometric schedule eps_start -> eps_end
    double armijo_c = 1e-4;
    double armijo_shrink = 0.5;
    int max_backtracks = 60;
    int max_stall = 20;             ///< Newton steps without residual decrease before giving up
    int quadrature_degree = 3;
};

struct SolveStats {
    int newton_iterations = 0;
    double residual = 0.0;                ///< final regularized residual (max norm over interior nodes)
    std::vector<double> energy_history;   ///< energy after every accepted step
    std::vector<double> eps_history;      ///< regularization in force for each entry above
};

namespace detail {

/// Interior-node numbering shared by the Dirichlet solvers.
struct InteriorMap {
    std::vector<int> interior;  ///< reduced -> global
    std::vector<int> reduced;   ///< global -> reduced, -1 on the boundary

    explicit InteriorMap(const Mesh& mesh)
    {
        reduced.assign(mesh.num_nodes(), -1);
        for (std::size_t i = 0; i < mesh.num_nodes(); ++i)
            if (!mesh.is_boundary(i)) {
                reduced[i] = static_cast<int>(interior.size());
                interior.push_back(static_cast<int>(i));
            }
    }

    Eigen::Index size() const { return static_cast<Eigen::Index>(interior.size()); }

    Eigen::VectorXd restrict(const Eigen::VectorXd& full) const
    {
        Eigen::VectorXd r(size());
        for (Eigen::Index k = 0; k < size(); ++k) r[k] = full[interior[static_cast<std::size_t>(k)]];
        return r;
    }

    void prolong_add(const Eigen::VectorXd& reduced_vec, double alpha, Eigen::VectorXd& full) const
    {
        for (Eigen::Index k = 0; k < size(); ++k) full[interior[static_cast<std::size_t>(k)]] += alpha * reduced_vec[k];
    }

    SparseMatrix restrict(const SparseMatrix& m) const
    {
        std::vector<Eigen::Triplet<double>> t;
        t.reserve(static_cast<std::size_t>(m.nonZeros()));
        for (int col = 0; col < m.outerSize(); ++col)
            for (SparseMatrix::InnerIterator it(m, col); it; ++it) {
                const int ri = reduced[static_cast<std::size_t>(it.row())];
                const int ci = reduced[static_cast<std::size_t>(it.col())];
                if (ri >= 0 && ci >= 0) t.emplace_back(ri, ci, it.value());
            }
        SparseMatrix r(size(), size());
        r.setFromTriplets(t.begin(), t.end());
        return r;
    }
};

inline double interior_max_abs(const InteriorMap& map, const Eigen::VectorXd& full)
{
    double m = 0.0;
    for (int i : map.interior) m = std::max(m, std::abs(full[i]));
    return m;
}

} // namespace detail

/// Solves -Delta_p w = b (b a load vector tested against every hat function) with w = 0 on the
/// boundary. Damped Newton on the regularized energy
///   J(w) = sum_e |e| (|grad w|^2 + eps)^{p/2} / p - b.w
/// with Armijo backtracking and a geometric eps continuation; p = 2 is a single linear solve.
inline Field solve_scalar_dirichlet_load(const MeshPtr& mesh_ptr, double p, const Eigen::VectorXd& load,
                                         const SolverOptions& opts = {}, const Field* initial = nullptr,
                                         SolveStats* stats = nullptr)
{
    if (!(p > 1.0)) throw Error(ErrorKind::Config, "p must exceed 1", "solve_scalar_dirichlet", "1 < p < inf");
    if (!load.allFinite()) throw Error(ErrorKind::Domain, "non-finite load", "solve_scalar_dirichlet");
    const Mesh& mesh = *mesh_ptr;
    const detail::InteriorMap map(mesh);
    SolveStats local_stats;
    SolveStats& st = stats ? *stats : local_stats;
    st = SolveStats{};

    Eigen::VectorXd w = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(mesh.num_nodes()));
    if (initial) {
        if (initial->mesh != mesh_ptr) throw Error(ErrorKind::MeshMismatch, "initial guess on another mesh", "solve_scalar_dirichlet");
        w = initial->values;
        for (int b : mesh.boundary_nodes()) w[b] = 0.0;
    }

    const double load_scale = std::max(detail::interior_max_abs(map, load), 1e-300);
    const auto residual_of = [&](const Eigen::VectorXd& x, double eps) {
        Eigen::VectorXd r = fem::p_laplacian_vector(mesh, x, p, eps) - load;
        for (int b : mesh.boundary_nodes()) r[b] = 0.0;
        return r;
    };
    const auto energy_of = [&](const Eigen::VectorXd& x, double eps) { return fem::p_energy(mesh, x, p, eps) - load.dot(x); };
    const auto final_target = [&] { return opts.abs_tolerance + opts.tolerance * load_scale; };

    if (detail::interior_max_abs(map, load) == 0.0 && !initial) {
        return Field(mesh_ptr, w);
    }

    if (p == 2.0) {
        const SparseMatrix k = map.restrict(fem::p_laplacian_tangent(mesh, w, 2.0, 0.0));
        Eigen::SimplicialLDLT<SparseMatrix> ldlt(k);
        if (ldlt.info() != Eigen::Success) throw Error(ErrorKind::NonConvergence, "stiffness factorization failed", "solve_scalar_dirichlet");
        // two passes of iterative refinement keep the residual at rounding level
        Eigen::VectorXd x = Eigen::VectorXd::Zero(map.size());
        for (int pass = 0; pass < 3; ++pass) {
            Eigen::VectorXd full = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(mesh.num_nodes()));
            map.prolong_add(x, 1.0, full);
            const Eigen::VectorXd r = map.restrict(residual_of(full, 0.0));
            if (pass > 0 && r.cwiseAbs().maxCoeff() <= final_target()) break;
            x -= ldlt.solve(r);
            ++st.newton_iterations;
        }
        w.setZero();
        map.prolong_add(x, 1.0, w);
        st.residual = map.restrict(residual_of(w, 0.0)).cwiseAbs().maxCoeff();
        st.energy_history.push_back(energy_of(w, 0.0));
        st.eps_history.push_back(0.0);
        return Field(mesh_ptr, w);
    }

    if (!initial) {
        // Start from the p = 2 solution rescaled to minimize the energy along its ray.
        const SparseMatrix k = map.restrict(fem::p_laplacian_tangent(mesh, w, 2.0, 0.0));
        Eigen::SimplicialLDLT<SparseMatrix> ldlt(k);
        Eigen::VectorXd x = ldlt.solve(map.restrict(load));
        Eigen::VectorXd full = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(mesh.num_nodes()));
        map.prolong_add(x, 1.0, full);
        const double grad_p = p * fem::p_energy(mesh, full, p, 0.0);
        const double work = load.dot(full);
        if (grad_p > 0.0 && work > 0.0) w = full * std::pow(work / grad_p, 1.0 / (p - 1.0));
    }

    std::vector<double> schedule;
    const int steps = std::max(1, opts.eps_steps);
    for (int k = 0; k < steps; ++k) {
        const double t = steps == 1 ? 1.0 : static_cast<double>(k) / (steps - 1);
        schedule.push_back(opts.eps_start * std::pow(opts.eps_end / opts.eps_start, t));
    }

    double best_residual = std::numeric_limits<double>::infinity();
    int stall = 0;
    for (std::size_t stage = 0; stage < schedule.size(); ++stage) {
        const double eps = schedule[stage];
        const bool last = stage + 1 == schedule.size();
        const double target = last ? final_target() : opts.abs_tolerance + opts.stage_tolerance * load_scale;
        double energy = energy_of(w, eps);
        best_residual = std::numeric_limits<double>::infinity();
        stall = 0;
        for (;;) {
            const Eigen::VectorXd r_full = residual_of(w, eps);
            const Eigen::VectorXd r = map.restrict(r_full);
            const double res = r.size() ? r.cwiseAbs().maxCoeff() : 0.0;
            st.residual = res;
            if (res <= target) break;
            if (res < best_residual * (1.0 - 1e-12)) {
                best_residual = res;
                stall = 0;
            } else if (++stall > opts.max_stall) {
                if (last && res <= 1e3 * target) break; // rounding floor
                Error err(ErrorKind::NonConvergence,
                          "Newton stagnated at residual " + std::to_string(res) + " (eps=" + std::to_string(eps) + ")",
                          "solve_scalar_dirichlet");
                err.payload.assign(w.data(), w.data() + w.size());
                throw err;
            }
            if (st.newton_iterations >= opts.max_iterations) {
                Error err(ErrorKind::NonConvergence, "Newton iteration cap reached at residual " + std::to_string(res),
                          "solve_scalar_dirichlet");
                err.payload.assign(w.data(), w.data() + w.size());
                throw err;
            }

            const SparseMatrix h = map.restrict(fem::p_laplacian_tangent(mesh, w, p, eps));
            Eigen::SimplicialLDLT<SparseMatrix> ldlt(h);
            Eigen::VectorXd d;
            if (ldlt.info() == Eigen::Success) d = ldlt.solve(-r);
            if (ldlt.info() != Eigen::Success || !d.allFinite() || d.dot(r) >= 0.0) d = -r;

            const double slope = r.dot(d);
            double alpha = 1.0;
            Eigen::VectorXd trial;
            double trial_energy = energy;
            bool accepted = false;
            for (int bt = 0; bt <= opts.max_backtracks; ++bt) {
                trial = w;
                map.prolong_add(d, alpha, trial);
                trial_energy = energy_of(trial, eps);
                if (trial_energy <= energy + opts.armijo_c * alpha * slope + 1e-15 * std::abs(energy)) {
                    accepted = true;
                    break;
                }
                alpha *= opts.armijo_shrink;
            }
            ++st.newton_iterations;
            if (!accepted) {
                ++stall;
                continue;
            }
            w = trial;
            energy = std::min(trial_energy, energy);
            st.energy_history.push_back(trial_energy);
            st.eps_history.push_back(eps);
        }
    }
    return Field(mesh_ptr, w);
}

/// Load vector of a nodal source (interpolated, integrated with the configured quadrature).
inline Eigen::VectorXd assemble_source_load(const Field& rhs, int quadrature_degree = 3)
{
    const QuadratureRule rule = quadrature_rule(rhs.mesh->dimension(), quadrature_degree);
    return fem::assemble_load<1>(*rhs.mesh, rule, {&rhs.values}, [](const std::array<double, 1>& v) { return v[0]; });
}

/// -Delta_p w = rhs for a nodal source field.
inline Field solve_scalar_dirichlet(double p, const Field& rhs, const SolverOptions& opts = {},
                                    const Field* initial = nullptr, SolveStats* stats = nullptr)
{
    if (!rhs.all_finite()) throw Error(ErrorKind::Domain, "non-finite source", "solve_scalar_dirichlet");
    return solve_scalar_dirichlet_load(rhs.mesh, p, assemble_source_load(rhs, opts.quadrature_degree), opts, initial,
                                       stats);
}

} // namespace pqss
