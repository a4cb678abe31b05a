#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "pqss/error.hpp"
#include "pqss/fem.hpp"
#include "pqss/field.hpp"
#include "pqss/nonlinearity.hpp"
#include "pqss/problem.hpp"
#include "pqss/spectral.hpp"

namespace pqss {

struct ConstructionOptions {
    double relative_tolerance = 1e-8; ///< weak inequality slack, relative to the largest weak-form term
    double order_tolerance = 1e-12;   ///< nodal ordering slack, relative to the upper field's max
    int quadrature_degree = 3;
    double search_start = 1.0;        ///< first value of every doubling search
    double search_cap = 1152921504606846976.0; ///< 2^60, cap of the lambda + mu search
    double super_cap = 1267650600228229401496703205376.0; ///< 2^100, cap of the C search
};

/// Shared strip data for the pair of exponents.
struct CommonStrip {
    double m = 0.0;
    double eta = 0.0;
    double delta = 0.0;
    StripConstants p, q;
};

inline CommonStrip common_strip(const EigenData& eig_p, const EigenData& eig_q)
{
    const auto [cp, cq] = common_strip_constants(eig_p, eig_q, *eig_p.phi.mesh);
    return {std::min(cp.m, cq.m), std::min(cp.eta, cq.eta), cp.delta, cp, cq};
}

struct Subsolution {
    Field u, v;
    double scale_u = 0.0, scale_v = 0.0; ///< max nodal values
    double margin = 0.0;                 ///< min over off-strip nodes of (weighted nonlinearity - bound)
    CommonStrip strip;
    std::vector<SubSuperReport> certificates;
};

struct Supersolution {
    Field u, v;
    double C = 0.0;
    double A = 0.0;       ///< (l1|a| + m1|alpha|) / (1 - nu_p^{p-1})
    double B = 0.0;       ///< (l2|b| + m2|beta|) / (1 - nu_q^{q-1})
    double g_top = 0.0;   ///< g(C A^{1/(p-1)})
    int doublings = 0;
    std::vector<SubSuperReport> certificates;
};

struct OrderedPair {
    Field sub_u, sub_v, super_u, super_v;
    double C = 0.0;
    double k0 = 0.0;
    double sub_margin = 0.0;
    CommonStrip strip;
    std::vector<SubSuperReport> certificates; ///< sub u, sub v, super u, super v
    bool ordered = false;

    bool all_passed() const
    {
        return ordered && std::all_of(certificates.begin(), certificates.end(), [](const auto& c) { return c.passed; });
    }
};

struct ThresholdResult {
    double sum1 = 0.0, sum2 = 0.0;           ///< first passing lambda_i + mu_i
    double fail_sum1 = 0.0, fail_sum2 = 0.0; ///< last failing values (0 when the start passed)
    int doublings = 0;
};

struct StrictPair {
    Field omega1, omega2, zeta1, zeta2;
    double rho = 0.0, theta = 0.0;
    double C1 = 0.0, C2 = 0.0;
    bool noncomparability = false;
    int halvings = 0;
    double G_p_at_rho = 0.0, G_q_at_rho = 0.0;
    std::vector<SubSuperReport> certificates; ///< strict super inequalities for (zeta1, zeta2)
    double margin_u = 0.0, margin_v = 0.0;    ///< min over interior nodes of the strict gap
};

namespace detail {

/// true when lower <= upper at every node up to tol * max|upper|.
inline bool nodally_below(const Field& lower, const Field& upper, double tol)
{
    require_same_mesh(lower, upper);
    const double slack = tol * std::max(upper.max_abs(), 1e-300);
    return ((upper.values - lower.values).array() >= -slack).all();
}

inline double weight_max(const Field& w) { return w.max(); }

} // namespace detail

/// u = [S1 k0 / m]^{1/(p-1)} ((p-1)/p) phi_p^{p/(p-1)} and the q-analogue, with a shared strip.
/// Off the strip every active weighted nonlinearity must exceed (k0/m) max(sigma_p, sigma_q); the
/// weak subsolution inequalities are then verified against every interior hat function.
inline Subsolution construct_subsolution(const ProblemParams& prm, const EigenData& eig_p, const EigenData& eig_q,
                                         const NonlinearitySet& nl, double k0, const ConstructionOptions& opts = {})
{
    const char* cond = "off-strip bound: weighted nonlinearities >= (k0/m) max(sigma_p, sigma_q)";
    if (!(prm.sum1() > 0.0) || !(prm.sum2() > 0.0))
        throw Error(ErrorKind::LambdaTooSmall, "lambda_i + mu_i must be positive", "subsolution", cond);
    const MeshPtr& mesh = prm.mesh();
    if (eig_p.phi.mesh != mesh || eig_q.phi.mesh != mesh)
        throw Error(ErrorKind::MeshMismatch, "eigenfunctions and weights on different meshes", "subsolution");

    Subsolution out;
    out.strip = common_strip(eig_p, eig_q);
    const double m = out.strip.m;
    const double p = prm.p, q = prm.q;
    const double cu = std::pow(prm.sum1() * k0 / m, 1.0 / (p - 1.0)) * (p - 1.0) / p;
    const double cv = std::pow(prm.sum2() * k0 / m, 1.0 / (q - 1.0)) * (q - 1.0) / q;
    out.u = Field(mesh, cu * eig_p.phi.values.cwiseMax(0.0).array().pow(p / (p - 1.0)).matrix());
    out.v = Field(mesh, cv * eig_q.phi.values.cwiseMax(0.0).array().pow(q / (q - 1.0)).matrix());
    out.scale_u = out.u.max();
    out.scale_v = out.v.max();

    const WeightBounds w = prm.lower_bounds();
    const double bound = k0 / m * std::max(eig_p.sigma, eig_q.sigma);
    double margin = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < mesh->num_nodes(); ++i) {
        if (mesh->is_boundary(i) || mesh->distance_to_boundary(mesh->nodes()[i]) <= out.strip.delta) continue;
        const double ui = std::max(out.u[i], 0.0), vi = std::max(out.v[i], 0.0);
        if (prm.lambda1 > 0.0) margin = std::min(margin, w.a1 * eval(nl.f, vi) - bound);
        if (prm.mu1 > 0.0) margin = std::min(margin, w.alpha1 * eval(nl.h, ui) - bound);
        if (prm.lambda2 > 0.0) margin = std::min(margin, w.b1 * eval(nl.g, ui) - bound);
        if (prm.mu2 > 0.0) margin = std::min(margin, w.beta1 * eval(nl.gamma, vi) - bound);
    }
    out.margin = margin;
    if (!(margin >= 0.0)) {
        Error err(ErrorKind::LambdaTooSmall, "off-strip margin " + std::to_string(margin) + " < 0", "subsolution", cond);
        err.payload = {margin};
        throw err;
    }
    out.certificates = check_subsuper(out.u, out.v, Side::Sub, prm, nl, opts.relative_tolerance,
                                      FemOptions{opts.quadrature_degree});
    for (const auto& c : out.certificates)
        if (!c.passed) {
            Error err(ErrorKind::LambdaTooSmall,
                      std::string("weak sub inequality fails for ") + to_string(c.component) + " (violation " +
                          std::to_string(c.violation) + ")",
                      "subsolution", "weak subsolution inequality");
            err.payload = {c.violation};
            throw err;
        }
    return out;
}

/// Doubling search on lambda1 + mu1 = lambda2 + mu2 = S until the subsolution construction succeeds.
/// The ratios lambda_i : mu_i of the template are kept.
inline ThresholdResult existence_threshold(const ProblemParams& tmpl, const EigenData& eig_p, const EigenData& eig_q,
                                           const NonlinearitySet& nl, double k0, const ConstructionOptions& opts = {})
{
    ThresholdResult res;
    for (double s = opts.search_start; s <= opts.search_cap; s *= 2.0, ++res.doublings) {
        try {
            construct_subsolution(tmpl.with_sums(s, s), eig_p, eig_q, nl, k0, opts);
            res.sum1 = res.sum2 = s;
            return res;
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::LambdaTooSmall) throw;
            res.fail_sum1 = res.fail_sum2 = s;
        }
    }
    throw Error(ErrorKind::ThresholdUnreachable, "no feasible lambda + mu up to 2^60", "threshold",
                "lambda_i + mu_i big enough");
}

/// Torsion-based supersolution with a doubling search on C. `lower_u`, `lower_v` (optional) must
/// lie nodally below the result.
inline Supersolution construct_supersolution(const ProblemParams& prm, const TorsionData& tor_p,
                                             const TorsionData& tor_q, const NonlinearitySet& nl,
                                             const Field* lower_u = nullptr, const Field* lower_v = nullptr,
                                             const ConstructionOptions& opts = {})
{
    const double p = prm.p, q = prm.q;
    const double dp = 1.0 - std::pow(tor_p.nu, p - 1.0), dq = 1.0 - std::pow(tor_q.nu, q - 1.0);
    if (!(dp > 0.0) || !(dq > 0.0))
        throw Error(ErrorKind::DomainTooLarge,
                    "torsion maximum too large: nu_p^{p-1} = " + std::to_string(1.0 - dp) +
                        ", nu_q^{q-1} = " + std::to_string(1.0 - dq),
                    "supersolution", "nu_r^{r-1} < 1");
    const double a_inf = detail::weight_max(prm.a), b_inf = detail::weight_max(prm.b);
    const double al_inf = detail::weight_max(prm.alpha), be_inf = detail::weight_max(prm.beta);
    const double top_u = prm.lambda1 * a_inf + prm.mu1 * al_inf;
    const double top_v = prm.lambda2 * b_inf + prm.mu2 * be_inf;

    Supersolution out;
    out.A = top_u / dp;
    out.B = top_v / dq;
    const double a_root = std::pow(out.A, 1.0 / (p - 1.0));
    std::string last_failure = "scale condition";
    for (double C = opts.search_start; C <= opts.super_cap; C *= 2.0, ++out.doublings) {
        const double u_max = C * a_root;
        const double g_top = eval(nl.g, u_max);
        if (!(g_top > 0.0) && out.B > 0.0) {
            last_failure = "g(C A^{1/(p-1)}) <= 0";
            continue;
        }
        const double v_amp = std::pow(std::max(out.B * g_top, 0.0), 1.0 / (q - 1.0));
        const double v_max = v_amp * tor_q.nu;
        // -Delta_p u - u^{p-1} >= (C/nu_p)^{p-1} top_u pointwise, since max u = C A^{1/(p-1)}.
        const double lhs_u = std::pow(C / tor_p.nu, p - 1.0) * top_u;
        const double rhs_u = (prm.lambda1 > 0.0 ? prm.lambda1 * a_inf * eval(nl.f, v_max) : 0.0) +
                             (prm.mu1 > 0.0 ? prm.mu1 * al_inf * eval(nl.h, u_max) : 0.0);
        if (lhs_u < rhs_u) {
            last_failure = "scale condition for u";
            continue;
        }
        if (prm.mu2 > 0.0 && g_top < eval(nl.gamma, v_max)) {
            last_failure = "g(C A^{1/(p-1)}) >= gamma(max v)";
            continue;
        }
        Field u(tor_p.omega.mesh, (C / tor_p.nu) * a_root * tor_p.omega.values);
        Field v(tor_q.omega.mesh, v_amp * tor_q.omega.values);
        if ((lower_u && !detail::nodally_below(*lower_u, u, opts.order_tolerance)) ||
            (lower_v && !detail::nodally_below(*lower_v, v, opts.order_tolerance))) {
            last_failure = "nodal ordering above the lower pair";
            continue;
        }
        auto certs = check_subsuper(u, v, Side::Super, prm, nl, opts.relative_tolerance, FemOptions{opts.quadrature_degree});
        if (!std::all_of(certs.begin(), certs.end(), [](const auto& c) { return c.passed; })) {
            last_failure = "weak supersolution inequality";
            continue;
        }
        out.u = std::move(u);
        out.v = std::move(v);
        out.C = C;
        out.g_top = g_top;
        out.certificates = std::move(certs);
        return out;
    }
    throw Error(ErrorKind::SupersolutionSearchFailure, "no C up to the search cap (last failure: " + last_failure + ")",
                "supersolution", last_failure);
}

/// Ordered pair with the zero subsolution, available when every source term is nonnegative at 0.
/// The supersolution is the torsion construction; no strip or threshold is involved.
inline OrderedPair construct_zero_ordered_pair(const ProblemParams& prm, const TorsionData& tor_p,
                                               const TorsionData& tor_q, const NonlinearitySet& nl,
                                               const ConstructionOptions& opts = {})
{
    const Field zero = Field::zeros(prm.mesh());
    auto sub_certs = check_subsuper(zero, zero, Side::Sub, prm, nl, opts.relative_tolerance, FemOptions{opts.quadrature_degree});
    if (!std::all_of(sub_certs.begin(), sub_certs.end(), [](const auto& c) { return c.passed; }))
        throw Error(ErrorKind::HypothesisFailure, "zero is not a subsolution: a source term is negative at 0",
                    "subsolution", "sources nonnegative at 0");
    const Supersolution sup = construct_supersolution(prm, tor_p, tor_q, nl, &zero, &zero, opts);
    OrderedPair pair;
    pair.sub_u = zero;
    pair.sub_v = zero;
    pair.super_u = sup.u;
    pair.super_v = sup.v;
    pair.C = sup.C;
    pair.certificates = std::move(sub_certs);
    pair.certificates.insert(pair.certificates.end(), sup.certificates.begin(), sup.certificates.end());
    pair.ordered = detail::nodally_below(zero, sup.u, opts.order_tolerance) &&
                   detail::nodally_below(zero, sup.v, opts.order_tolerance);
    return pair;
}

/// Subsolution, supersolution above it, and the four weak certificates.
inline OrderedPair construct_ordered_pair(const ProblemParams& prm, const EigenData& eig_p, const EigenData& eig_q,
                                          const TorsionData& tor_p, const TorsionData& tor_q,
                                          const NonlinearitySet& nl, double k0, const ConstructionOptions& opts = {})
{
    const Subsolution sub = construct_subsolution(prm, eig_p, eig_q, nl, k0, opts);
    const Supersolution sup = construct_supersolution(prm, tor_p, tor_q, nl, &sub.u, &sub.v, opts);
    OrderedPair pair;
    pair.sub_u = sub.u;
    pair.sub_v = sub.v;
    pair.super_u = sup.u;
    pair.super_v = sup.v;
    pair.C = sup.C;
    pair.k0 = k0;
    pair.sub_margin = sub.margin;
    pair.strip = sub.strip;
    pair.certificates = sub.certificates;
    pair.certificates.insert(pair.certificates.end(), sup.certificates.begin(), sup.certificates.end());
    pair.ordered = detail::nodally_below(sub.u, sup.u, opts.order_tolerance) &&
                   detail::nodally_below(sub.v, sup.v, opts.order_tolerance);
    return pair;
}

/// G_p(x) = (sigma_p - 1) x^{p-1} - l1 |a| f(C2 x) - m1 |alpha| h(x).
inline double strict_gap_p(const ProblemParams& prm, const NonlinearitySet& nl, double sigma_p, double C2, double x)
{
    return (sigma_p - 1.0) * std::pow(x, prm.p - 1.0) - prm.lambda1 * prm.a.max() * eval(nl.f, C2 * x) -
           prm.mu1 * prm.alpha.max() * eval(nl.h, x);
}

/// G_q(x) = (sigma_q - 1) x^{q-1} - l2 |b| g(C1 x) - m2 |beta| gamma(x).
inline double strict_gap_q(const ProblemParams& prm, const NonlinearitySet& nl, double sigma_q, double C1, double x)
{
    return (sigma_q - 1.0) * std::pow(x, prm.q - 1.0) - prm.lambda2 * prm.b.max() * eval(nl.g, C1 * x) -
           prm.mu2 * prm.beta.max() * eval(nl.gamma, x);
}

/// Strict supersolution (rho phi_p, rho phi_q) not lying above the strict subsolution (omega1, omega2).
/// theta is the largest point of a 256-point log grid on [1e-8, 1e4] up to which G_p, G_q stay positive;
/// rho halves from theta until some node has omega1 > zeta1 or omega2 > zeta2.
inline StrictPair construct_strict_pair(const ProblemParams& prm, const EigenData& eig_p, const EigenData& eig_q,
                                        const NonlinearitySet& nl, const Field& omega1, const Field& omega2,
                                        const ConstructionOptions& opts = {})
{
    if (!(eig_p.sigma > 1.0) || !(eig_q.sigma > 1.0))
        throw Error(ErrorKind::SpectralGap,
                    "first eigenvalues must exceed 1 (sigma_p = " + std::to_string(eig_p.sigma) +
                        ", sigma_q = " + std::to_string(eig_q.sigma) + ")",
                    "strict-pair", "sigma_r > 1");
    const FlatnessReport flat = check_flatness(nl, prm.p, prm.q);
    if (!flat.passed) throw Error(ErrorKind::FlatnessViolation, flat.detail, "strict-pair", "flatness at 0");

    StrictPair sp;
    sp.omega1 = omega1;
    sp.omega2 = omega2;
    std::tie(sp.C1, sp.C2) = comparability_constants(eig_p.phi, eig_q.phi);

    const int points = 256;
    for (int k = 0; k < points; ++k) {
        const double x = std::pow(10.0, -8.0 + 12.0 * k / (points - 1));
        if (strict_gap_p(prm, nl, eig_p.sigma, sp.C2, x) > 0.0 && strict_gap_q(prm, nl, eig_q.sigma, sp.C1, x) > 0.0)
            sp.theta = x;
        else
            break;
    }
    if (!(sp.theta > 0.0))
        throw Error(ErrorKind::FlatnessViolation, "G_p or G_q is not positive near 0", "strict-pair",
                    "G_p, G_q > 0 on (0, theta]");

    sp.rho = sp.theta;
    const auto witness = [&](double rho) {
        for (std::size_t i = 0; i < omega1.size(); ++i)
            if (omega1[i] > rho * eig_p.phi[i] || omega2[i] > rho * eig_q.phi[i]) return true;
        return false;
    };
    while (!witness(sp.rho)) {
        if (++sp.halvings > 60)
            throw Error(ErrorKind::NoncomparabilityFailure, "no rho with (omega1, omega2) not below (zeta1, zeta2)",
                        "strict-pair", "noncomparability");
        sp.rho *= 0.5;
    }
    sp.noncomparability = true;
    sp.zeta1 = eig_p.phi.scaled(sp.rho);
    sp.zeta2 = eig_q.phi.scaled(sp.rho);
    sp.G_p_at_rho = strict_gap_p(prm, nl, eig_p.sigma, sp.C2, sp.rho);
    sp.G_q_at_rho = strict_gap_q(prm, nl, eig_q.sigma, sp.C1, sp.rho);

    // Strict weak inequalities: the gap must be positive at every interior hat function.
    sp.certificates = check_subsuper(sp.zeta1, sp.zeta2, Side::Super, prm, nl, 0.0, FemOptions{opts.quadrature_degree});
    sp.margin_u = -sp.certificates[0].violation;
    sp.margin_v = -sp.certificates[1].violation;
    for (auto& c : sp.certificates) c.passed = c.violation < 0.0;
    if (!(sp.margin_u > 0.0) || !(sp.margin_v > 0.0))
        throw Error(ErrorKind::NoncomparabilityFailure,
                    "strict supersolution margins not positive (" + std::to_string(sp.margin_u) + ", " +
                        std::to_string(sp.margin_v) + ")",
                    "strict-pair", "strict supersolution inequality");
    return sp;
}

} // namespace pqss
