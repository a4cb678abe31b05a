#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include "pqss/error.hpp"
#include "pqss/fem.hpp"
#include "pqss/field.hpp"
#include "pqss/nonlinearity.hpp"
#include "pqss/problem.hpp"
#include "pqss/solver.hpp"
#include "pqss/spectral.hpp"
#include "pqss/subsuper.hpp"

namespace pqss {

enum class Direction { Up, Down };

inline const char* to_string(Direction d) { return d == Direction::Up ? "up" : "down"; }

struct IterateOptions {
    double step_tol = 1e-10;  ///< relative nodal max-change
    double res_tol = -1.0;    ///< relative weak residual bound; negative selects 1e-8 (p = q = 2) or 1e-6
    int max_iterations = 500;
    double order_tol = 1e-10; ///< monotonicity / containment slack relative to the upper field's max
    int quadrature_degree = 3;
    SolverOptions solver{};
    /// Called with (index, u, v) for the starting pair (index 0) and every iterate.
    std::function<void(int, const Field&, const Field&)> observer;

    double residual_tolerance(double p, double q) const
    {
        if (res_tol > 0.0) return res_tol;
        return p == 2.0 && q == 2.0 ? 1e-8 : 1e-6;
    }
};

struct SolutionBundle {
    Field u, v;
    double residual_u = 0.0, residual_v = 0.0;       ///< max |weak residual| over interior hat functions
    double residual_scale_u = 0.0, residual_scale_v = 0.0;
    int iterations = 0;
    std::vector<double> history;                     ///< relative nodal max-change per iteration
    std::string interval_tag;
    double positivity_min = 0.0;                     ///< min interior value of min(u, v) relative to max
    bool converged = false;

    /// Largest weak residual relative to the largest weak-form term of its equation.
    double residual() const
    {
        const auto rel = [](double r, double s) { return s > 0.0 ? r / s : r; };
        return std::max(rel(residual_u, residual_scale_u), rel(residual_v, residual_scale_v));
    }
    double residual_abs() const { return std::max(residual_u, residual_v); }
    bool positive(double rel = 1e-8) const { return positivity_min > rel; }
};

namespace detail {

inline double interior_min(const Field& f)
{
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < f.size(); ++i)
        if (!f.mesh->is_boundary(i)) m = std::min(m, f[i]);
    return std::isfinite(m) ? m : 0.0;
}

inline void finish_bundle(SolutionBundle& b, const ProblemParams& prm, const NonlinearitySet& nl, int degree)
{
    const auto [ru, rv] = weak_residual_system(b.u, b.v, prm, nl, FemOptions{degree});
    b.residual_u = ru.norm;
    b.residual_v = rv.norm;
    b.residual_scale_u = ru.scale;
    b.residual_scale_v = rv.scale;
    const double pu = b.u.max() > 0.0 ? interior_min(b.u) / b.u.max() : 0.0;
    const double pv = b.v.max() > 0.0 ? interior_min(b.v) / b.v.max() : 0.0;
    b.positivity_min = std::min(pu, pv);
}

inline double relative_change(const Field& next, const Field& prev)
{
    const double scale = std::max(next.max_abs(), 1e-300);
    return (next.values - prev.values).cwiseAbs().maxCoeff() / scale;
}

/// Lagged Picard map with Gauss-Seidel order:
///   u' = S_p(|u|^{p-2}u + l1 a f(v) + m1 alpha h(u)),  v' = S_q(|v|^{q-2}v + l2 b g(u') + m2 beta gamma(v)).
/// The right-hand sides are nondecreasing in (u, v) >= 0 and S_r is order preserving.
class PicardMap {
public:
    PicardMap(const ProblemParams& prm, const NonlinearitySet& nl, const IterateOptions& opts)
        : prm_(prm)
        , nl_(nl)
        , opts_(opts)
        , rule_(quadrature_rule(prm.mesh()->dimension(), opts.quadrature_degree))
    {
    }

    std::pair<Field, Field> operator()(const Field& u, const Field& v) const
    {
        const Mesh& mesh = *prm_.mesh();
        const Eigen::VectorXd load_u =
            fem::power_mass_vector(mesh, rule_, u.values, prm_.p) + fem::source_u(prm_, nl_, rule_, u.values, v.values);
        Field un = solve_scalar_dirichlet_load(prm_.mesh(), prm_.p, load_u, opts_.solver, &u);
        const Eigen::VectorXd load_v =
            fem::power_mass_vector(mesh, rule_, v.values, prm_.q) + fem::source_v(prm_, nl_, rule_, un.values, v.values);
        Field vn = solve_scalar_dirichlet_load(prm_.mesh(), prm_.q, load_v, opts_.solver, &v);
        return {std::move(un), std::move(vn)};
    }

private:
    const ProblemParams& prm_;
    const NonlinearitySet& nl_;
    const IterateOptions& opts_;
    QuadratureRule rule_;
};

} // namespace detail

/// Monotone iteration inside [lower, upper] starting from the lower (up) or upper (down) pair.
/// Every iterate is checked for monotonicity and containment.
inline SolutionBundle monotone_iterate(const Field& lower_u, const Field& lower_v, const Field& upper_u,
                                       const Field& upper_v, const ProblemParams& prm, const NonlinearitySet& nl,
                                       Direction dir, const IterateOptions& opts = {}, std::string tag = {})
{
    const detail::PicardMap map(prm, nl, opts);
    const double tol_u = opts.order_tol * std::max(upper_u.max_abs(), 1e-300);
    const double tol_v = opts.order_tol * std::max(upper_v.max_abs(), 1e-300);
    const double res_tol = opts.residual_tolerance(prm.p, prm.q);

    SolutionBundle b;
    b.interval_tag = tag.empty() ? std::string(to_string(dir)) : std::move(tag);
    Field u = dir == Direction::Up ? lower_u : upper_u;
    Field v = dir == Direction::Up ? lower_v : upper_v;
    const double sign = dir == Direction::Up ? 1.0 : -1.0;
    if (opts.observer) opts.observer(0, u, v);

    for (int it = 1; it <= opts.max_iterations; ++it) {
        auto [un, vn] = map(u, v);
        if (opts.observer) opts.observer(it, un, vn);
        const auto breakdown = [&](const std::string& what) {
            Error err(ErrorKind::MonotonicityBreakdown, what + " at iteration " + std::to_string(it), "iterate",
                      "monotone ordering of iterates");
            err.iteration = it;
            err.payload.assign(un.values.data(), un.values.data() + un.values.size());
            return err;
        };
        if ((sign * (un.values - u.values)).minCoeff() < -tol_u || (sign * (vn.values - v.values)).minCoeff() < -tol_v)
            throw breakdown(std::string("iterates not ") + (dir == Direction::Up ? "nondecreasing" : "nonincreasing"));
        if ((un.values - lower_u.values).minCoeff() < -tol_u || (upper_u.values - un.values).minCoeff() < -tol_u ||
            (vn.values - lower_v.values).minCoeff() < -tol_v || (upper_v.values - vn.values).minCoeff() < -tol_v)
            throw breakdown("iterate left the ordered interval");

        const double change = std::max(detail::relative_change(un, u), detail::relative_change(vn, v));
        b.history.push_back(change);
        u = std::move(un);
        v = std::move(vn);
        b.iterations = it;
        if (change < opts.step_tol) {
            b.u = u;
            b.v = v;
            detail::finish_bundle(b, prm, nl, opts.quadrature_degree);
            if (b.residual() < res_tol) {
                b.converged = true;
                return b;
            }
        }
    }
    b.u = u;
    b.v = v;
    detail::finish_bundle(b, prm, nl, opts.quadrature_degree);
    Error err(ErrorKind::NonConvergence,
              "monotone iteration did not converge in " + std::to_string(opts.max_iterations) +
                  " iterations (last change " + std::to_string(b.history.empty() ? 0.0 : b.history.back()) +
                  ", residual " + std::to_string(b.residual()) + ")",
              "iterate");
    err.iteration = b.iterations;
    err.payload.assign(u.values.data(), u.values.data() + u.values.size());
    throw err;
}

inline SolutionBundle monotone_iterate(const OrderedPair& pair, const ProblemParams& prm, const NonlinearitySet& nl,
                                       Direction dir, const IterateOptions& opts = {})
{
    return monotone_iterate(pair.sub_u, pair.sub_v, pair.super_u, pair.super_v, prm, nl, dir, opts,
                            dir == Direction::Up ? "[sub, super] up" : "[sub, super] down");
}

/// Newton's method on the coupled discrete system, Jacobian factored by SparseLU. Used to polish an
/// approximate solution that is not reachable by monotone iteration.
inline SolutionBundle newton_polish(Field u, Field v, const ProblemParams& prm, const NonlinearitySet& nl,
                                    const IterateOptions& opts = {}, int max_steps = 50, std::string tag = "newton")
{
    const Mesh& mesh = *prm.mesh();
    const detail::InteriorMap map(mesh);
    const QuadratureRule rule = quadrature_rule(mesh.dimension(), opts.quadrature_degree);
    const Eigen::Index n = map.size();
    const double res_tol = opts.residual_tolerance(prm.p, prm.q);
    const double eps_tangent = prm.p == 2.0 && prm.q == 2.0 ? 0.0 : opts.solver.eps_end;

    double rel_u = 1.0, rel_v = 1.0; // residual-to-scale factors of the last evaluation
    const auto residual = [&](const Field& uu, const Field& vv) {
        const SystemForms f = system_forms(uu, vv, prm, nl, FemOptions{opts.quadrature_degree});
        const WeakResidual wu = fem::make_residual(mesh, f.stiffness_u, f.mass_u, f.source_u);
        const WeakResidual wv = fem::make_residual(mesh, f.stiffness_v, f.mass_v, f.source_v);
        rel_u = wu.scale > 0.0 ? 1.0 / wu.scale : 1.0;
        rel_v = wv.scale > 0.0 ? 1.0 / wv.scale : 1.0;
        Eigen::VectorXd r(2 * n);
        r.head(n) = map.restrict(wu.values);
        r.tail(n) = map.restrict(wv.values);
        return r;
    };
    const auto relative = [&](const Eigen::VectorXd& r) {
        return std::max(r.head(n).cwiseAbs().maxCoeff() * rel_u, r.tail(n).cwiseAbs().maxCoeff() * rel_v);
    };
    const auto deriv = [](const NonlinearitySpec& s, double x) { return eval_derivative(s, std::max(x, 0.0)); };

    SolutionBundle b;
    b.interval_tag = std::move(tag);
    Eigen::VectorXd r = residual(u, v);
    for (int step = 0; step < max_steps && relative(r) >= res_tol; ++step) {
        const double l1 = prm.lambda1, m1 = prm.mu1, l2 = prm.lambda2, m2 = prm.mu2;
        const double p = prm.p, q = prm.q;
        const SparseMatrix kuu = fem::p_laplacian_tangent(mesh, u.values, p, eps_tangent) -
                                 fem::assemble_weighted_mass<3>(mesh, rule, {&u.values, &prm.alpha.values, &v.values},
                                                                [&](const std::array<double, 3>& x) {
                                                                    double d = (p - 1.0) * std::pow(std::abs(x[0]), p - 2.0);
                                                                    if (m1 != 0.0) d += m1 * x[1] * deriv(nl.h, x[0]);
                                                                    return d;
                                                                });
        const SparseMatrix kuv = -fem::assemble_weighted_mass<2>(mesh, rule, {&v.values, &prm.a.values},
                                                                 [&](const std::array<double, 2>& x) {
                                                                     return l1 != 0.0 ? l1 * x[1] * deriv(nl.f, x[0]) : 0.0;
                                                                 });
        const SparseMatrix kvu = -fem::assemble_weighted_mass<2>(mesh, rule, {&u.values, &prm.b.values},
                                                                 [&](const std::array<double, 2>& x) {
                                                                     return l2 != 0.0 ? l2 * x[1] * deriv(nl.g, x[0]) : 0.0;
                                                                 });
        const SparseMatrix kvv = fem::p_laplacian_tangent(mesh, v.values, q, eps_tangent) -
                                 fem::assemble_weighted_mass<2>(mesh, rule, {&v.values, &prm.beta.values},
                                                                [&](const std::array<double, 2>& x) {
                                                                    double d = (q - 1.0) * std::pow(std::abs(x[0]), q - 2.0);
                                                                    if (m2 != 0.0) d += m2 * x[1] * deriv(nl.gamma, x[0]);
                                                                    return d;
                                                                });
        std::vector<Eigen::Triplet<double>> t;
        const auto add = [&](const SparseMatrix& blk, Eigen::Index ro, Eigen::Index co) {
            const SparseMatrix rb = map.restrict(blk);
            for (int c = 0; c < rb.outerSize(); ++c)
                for (SparseMatrix::InnerIterator it(rb, c); it; ++it)
                    t.emplace_back(it.row() + ro, it.col() + co, it.value());
        };
        add(kuu, 0, 0);
        add(kuv, 0, n);
        add(kvu, n, 0);
        add(kvv, n, n);
        SparseMatrix J(2 * n, 2 * n);
        J.setFromTriplets(t.begin(), t.end());
        Eigen::SparseLU<SparseMatrix> lu;
        lu.compute(J);
        if (lu.info() != Eigen::Success) break;
        const Eigen::VectorXd d = lu.solve(-r);
        if (!d.allFinite()) break;

        // Backtracking on the residual max-norm.
        const double r0 = r.cwiseAbs().maxCoeff();
        double alpha = 1.0;
        bool accepted = false;
        for (int bt = 0; bt < 30; ++bt, alpha *= 0.5) {
            Eigen::VectorXd un = u.values, vn = v.values;
            map.prolong_add(d.head(n), alpha, un);
            map.prolong_add(d.tail(n), alpha, vn);
            Field uf(u.mesh, un), vf(v.mesh, vn);
            const Eigen::VectorXd rn = residual(uf, vf);
            if (rn.cwiseAbs().maxCoeff() < (1.0 - 1e-4 * alpha) * r0 || bt == 29) {
                u = std::move(uf);
                v = std::move(vf);
                r = rn;
                accepted = true;
                break;
            }
        }
        ++b.iterations;
        b.history.push_back(alpha);
        if (!accepted) break;
    }
    b.u = std::move(u);
    b.v = std::move(v);
    detail::finish_bundle(b, prm, nl, opts.quadrature_degree);
    b.converged = b.residual() < res_tol;
    return b;
}

/// Spectral data for both exponents (computed once when p = q).
struct SpectralData {
    EigenData eig_p, eig_q;
    TorsionData tor_p, tor_q;
};

inline SpectralData compute_spectral(const MeshPtr& mesh, double p, double q, const EigenOptions& eopts = {},
                                     const SolverOptions& sopts = {})
{
    SpectralData s;
    try {
        s.eig_p = first_eigenpair(mesh, p, eopts);
        s.eig_q = q == p ? s.eig_p : first_eigenpair(mesh, q, eopts);
    } catch (const Error& e) {
        throw e.with_stage("eigen");
    }
    s.tor_p = torsion_function(mesh, p, sopts);
    s.tor_q = q == p ? s.tor_p : torsion_function(mesh, q, sopts);
    return s;
}

enum class ParameterMode { Fixed, AutoThreshold };

/// Strip: the eigenfunction-based subsolution. Zero: (0, 0), for sources nonnegative at 0 with fixed parameters.
enum class SubsolutionKind { Strip, Zero };

/// Everything the existence and multiplicity pipelines consume.
struct PipelineInput {
    ProblemParams params;          ///< lambda/mu used as given (Fixed) or as a ratio template (AutoThreshold)
    NonlinearitySet nl;
    ParameterMode mode = ParameterMode::AutoThreshold;
    double threshold_factor = 1.0; ///< parameters = factor * threshold in AutoThreshold mode
    bool check_hypotheses = true;
    SubsolutionKind subsolution = SubsolutionKind::Strip;
    EigenOptions eigen{};
    ConstructionOptions construction{};
    IterateOptions iterate{};
};

struct ExistenceResult {
    SpectralData spectral;
    HypothesisReport hypotheses;
    double k0 = 0.0;
    std::optional<ThresholdResult> threshold;
    ProblemParams params; ///< parameters actually used
    OrderedPair pair;
    SolutionBundle bundle;
};

namespace detail {

template <class Fn>
auto staged(const char* stage, Fn&& fn) -> decltype(fn())
{
    try {
        return fn();
    } catch (const Error& e) {
        throw e.with_stage(stage);
    }
}

inline ProblemParams resolve_parameters(const PipelineInput& in, const SpectralData& sp, const NonlinearitySet& nl,
                                        double k0, std::optional<ThresholdResult>& thr)
{
    if (in.mode == ParameterMode::Fixed) return in.params;
    thr = staged("threshold",
                 [&] { return existence_threshold(in.params, sp.eig_p, sp.eig_q, nl, k0, in.construction); });
    return in.params.with_sums(in.threshold_factor * thr->sum1, in.threshold_factor * thr->sum2);
}

inline void require_hypotheses(const HypothesisReport& rep)
{
    if (rep.all_passed()) return;
    std::string which;
    const std::pair<const char*, const HypothesisCheck*> items[] = {
        {"H1", &rep.h1}, {"H2", &rep.h2}, {"H3", &rep.h3}, {"H4", &rep.h4}};
    for (const auto& [name, chk] : items)
        if (!chk->passed) which += std::string(which.empty() ? "" : ", ") + name;
    throw Error(ErrorKind::HypothesisFailure, "hypotheses failed: " + which, "hypotheses", which);
}

} // namespace detail

/// Eigen/torsion data, k0, parameters, ordered pair and the upward monotone iteration.
inline ExistenceResult solve_existence(const PipelineInput& in, const SpectralData* spectral = nullptr)
{
    ExistenceResult r;
    in.params.validate();
    r.hypotheses = check_hypotheses(in.nl, in.params.lower_bounds(), in.params.p, in.params.q);
    if (in.check_hypotheses) detail::require_hypotheses(r.hypotheses);
    const MeshPtr& mesh = in.params.mesh();
    r.spectral = spectral ? *spectral : compute_spectral(mesh, in.params.p, in.params.q, in.eigen, in.iterate.solver);
    if (in.subsolution == SubsolutionKind::Zero) {
        if (in.mode != ParameterMode::Fixed)
            throw Error(ErrorKind::Config, "the zero subsolution needs fixed parameters", "construct");
        r.params = in.params;
        r.pair = detail::staged("construct", [&] {
            return construct_zero_ordered_pair(r.params, r.spectral.tor_p, r.spectral.tor_q, in.nl, in.construction);
        });
        r.bundle = detail::staged("iterate", [&] { return monotone_iterate(r.pair, r.params, in.nl, Direction::Up, in.iterate); });
        return r;
    }
    r.k0 = detail::staged("k0", [&] { return lower_bound_k0(in.nl, in.params.lower_bounds()); });
    r.params = detail::resolve_parameters(in, r.spectral, in.nl, r.k0, r.threshold);
    r.pair = detail::staged("construct", [&] {
        return construct_ordered_pair(r.params, r.spectral.eig_p, r.spectral.eig_q, r.spectral.tor_p, r.spectral.tor_q,
                                      in.nl, r.k0, in.construction);
    });
    r.bundle = detail::staged("iterate", [&] { return monotone_iterate(r.pair, r.params, in.nl, Direction::Up, in.iterate); });
    return r;
}

struct MultiplicityOptions {
    double distinct_tol = 1e-3;
    double positive_tol = 1e-8;
    int newton_steps = 60;
};

/// Where a candidate sits relative to the strict pair.
struct Localization {
    bool below_zeta = false;  ///< in [0, zeta]
    bool above_omega = false; ///< in [omega, z]
};

struct MultiplicityResult {
    SpectralData spectral;
    HypothesisReport hypotheses;
    double k0_shifted = 0.0;
    std::optional<ThresholdResult> threshold; ///< threshold of the shifted system
    ProblemParams params;
    SolutionBundle omega;                     ///< solution of the shifted system (strict subsolution)
    StrictPair strict;
    Supersolution z;
    std::vector<SolutionBundle> candidates;
    std::vector<Localization> localization;
    std::vector<std::vector<double>> distances; ///< pairwise relative nodal distances
    std::vector<int> positive_distinct;         ///< indices of distinct positive solutions
    double scan_amplitude = 0.0; ///< start amplitude of the Newton run that gave the extra candidate
    int newton_starts = 0;
    bool found = false;
    std::string diagnostics;
};

namespace detail {

inline double pair_distance(const SolutionBundle& a, const SolutionBundle& b)
{
    return std::max(relative_max_distance(a.u, b.u), relative_max_distance(a.v, b.v));
}

inline bool pair_below(const Field& u, const Field& v, const Field& U, const Field& V, double tol = 0.0)
{
    return nodally_below(u, U, tol) && nodally_below(v, V, tol);
}

struct ScanResult {
    std::optional<SolutionBundle> bundle;
    double amplitude = 0.0;
    int newton_starts = 0;
};

/// Coupled Newton started from amp * (omega1, omega2) / max(omega1, omega2) for log-spaced amplitudes
/// (four per decade, ascending from rho / 100). The first converged positive solution farther than
/// distinct_tol from every known solution and from zero is returned.
inline ScanResult amplitude_scan(const ProblemParams& prm, const NonlinearitySet& nl, const StrictPair& sp,
                                 const std::vector<SolutionBundle>& known, const IterateOptions& opts,
                                 const MultiplicityOptions& mopts)
{
    ScanResult out;
    const double top = std::max(sp.omega1.max(), sp.omega2.max());
    const Field w1 = sp.omega1.scaled(1.0 / top), w2 = sp.omega2.scaled(1.0 / top);
    const double start = std::max(sp.rho * 1e-2, 1e-12);
    const int count = static_cast<int>(std::ceil(4.0 * std::log10(top / start))) + 1;
    for (int k = 0; k < count; ++k) {
        const double amp = start * std::pow(10.0, 0.25 * k);
        ++out.newton_starts;
        SolutionBundle c = newton_polish(w1.scaled(amp), w2.scaled(amp), prm, nl, opts, mopts.newton_steps,
                                         "amplitude scan (newton)");
        if (!c.converged || !c.positive(mopts.positive_tol)) continue;
        bool fresh = std::max(c.u.max(), c.v.max()) > 0.0;
        for (const auto& k2 : known)
            if (pair_distance(c, k2) <= mopts.distinct_tol) fresh = false;
        if (!fresh) continue;
        out.bundle = std::move(c);
        out.amplitude = amp;
        return out;
    }
    return out;
}

} // namespace detail

/// Two positive solutions: the large one from the interval [omega, z] (reached upward from omega and
/// downward from z) and an intermediate one outside [0, zeta] and [omega, z], found by the Newton
/// amplitude scan.
inline MultiplicityResult solve_multiplicity(const PipelineInput& in, const MultiplicityOptions& mopts = {},
                                             const SpectralData* spectral = nullptr)
{
    MultiplicityResult r;
    in.params.validate();
    r.hypotheses = check_hypotheses(in.nl, in.params.lower_bounds(), in.params.p, in.params.q);
    if (in.check_hypotheses) detail::require_hypotheses(r.hypotheses);
    const FlatnessReport flat = check_flatness(in.nl, in.params.p, in.params.q);
    if (!flat.passed) throw Error(ErrorKind::FlatnessViolation, flat.detail, "multiplicity", "flatness at 0");

    const MeshPtr& mesh = in.params.mesh();
    r.spectral = spectral ? *spectral : compute_spectral(mesh, in.params.p, in.params.q, in.eigen, in.iterate.solver);
    if (!(r.spectral.eig_p.sigma > 1.0) || !(r.spectral.eig_q.sigma > 1.0))
        throw Error(ErrorKind::SpectralGap, "first eigenvalues must exceed 1", "multiplicity", "sigma_r > 1");

    const NonlinearitySet shifted = shift(in.nl);
    r.k0_shifted = detail::staged("k0", [&] { return lower_bound_k0(shifted, in.params.lower_bounds()); });
    r.params = detail::resolve_parameters(in, r.spectral, shifted, r.k0_shifted, r.threshold);
    const ProblemParams& prm = r.params;
    const SpectralData& sp = r.spectral;

    // Strict subsolution: positive solution of the shifted system.
    const OrderedPair shifted_pair = detail::staged("shifted-system", [&] {
        return construct_ordered_pair(prm, sp.eig_p, sp.eig_q, sp.tor_p, sp.tor_q, shifted, r.k0_shifted,
                                      in.construction);
    });
    r.omega = detail::staged("shifted-system",
                             [&] { return monotone_iterate(shifted_pair, prm, shifted, Direction::Up, in.iterate); });
    r.omega.interval_tag = "shifted system";

    r.strict = detail::staged("strict-pair", [&] {
        return construct_strict_pair(prm, sp.eig_p, sp.eig_q, in.nl, r.omega.u, r.omega.v, in.construction);
    });
    const Field lower_u(mesh, r.omega.u.values.cwiseMax(r.strict.zeta1.values));
    const Field lower_v(mesh, r.omega.v.values.cwiseMax(r.strict.zeta2.values));
    r.z = detail::staged("supersolution", [&] {
        return construct_supersolution(prm, sp.tor_p, sp.tor_q, in.nl, &lower_u, &lower_v, in.construction);
    });

    const Field zero = Field::zeros(mesh);
    r.candidates.push_back(detail::staged("iterate", [&] {
        return monotone_iterate(r.omega.u, r.omega.v, r.z.u, r.z.v, prm, in.nl, Direction::Up, in.iterate,
                                "[omega, z] up");
    }));
    r.candidates.push_back(detail::staged("iterate", [&] {
        return monotone_iterate(zero, zero, r.z.u, r.z.v, prm, in.nl, Direction::Down, in.iterate, "[0, z] down");
    }));

    detail::ScanResult scan = detail::staged("amplitude-scan", [&] {
        return detail::amplitude_scan(prm, in.nl, r.strict, r.candidates, in.iterate, mopts);
    });
    r.newton_starts = scan.newton_starts;
    if (scan.bundle) {
        r.scan_amplitude = scan.amplitude;
        r.candidates.push_back(std::move(*scan.bundle));
    } else {
        r.diagnostics += "amplitude scan found no further positive solution; ";
    }

    const std::size_t n = r.candidates.size();
    r.distances.assign(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) r.distances[i][j] = detail::pair_distance(r.candidates[i], r.candidates[j]);
    for (const auto& c : r.candidates)
        r.localization.push_back({detail::pair_below(c.u, c.v, r.strict.zeta1, r.strict.zeta2, 1e-12),
                                  detail::pair_below(r.omega.u, r.omega.v, c.u, c.v, 1e-12)});

    const double res_tol = in.iterate.residual_tolerance(prm.p, prm.q);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& c = r.candidates[i];
        if (!c.positive(mopts.positive_tol) || !(c.residual() < res_tol)) continue;
        bool fresh = true;
        for (int j : r.positive_distinct)
            if (r.distances[i][static_cast<std::size_t>(j)] <= mopts.distinct_tol) fresh = false;
        if (fresh) r.positive_distinct.push_back(static_cast<int>(i));
    }
    r.found = r.positive_distinct.size() >= 2;
    if (!r.found) r.diagnostics += "fewer than two distinct positive solutions";
    return r;
}

} // namespace pqss
