#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "pqss/error.hpp"

namespace pqss {

enum class NonlinearityKind { PolynomialSum, PiecewisePower, CustomTable };

inline const char* to_string(NonlinearityKind kind)
{
    switch (kind) {
    case NonlinearityKind::PolynomialSum: return "polynomial-sum";
    case NonlinearityKind::PiecewisePower: return "piecewise-power";
    case NonlinearityKind::CustomTable: return "custom-table";
    }
    return "unknown";
}

struct PowerTerm {
    double coefficient = 0.0;
    double exponent = 0.0;
};

/// Declarative description of one of f, g, h, gamma on [0, inf).
///
/// - polynomial-sum:  sum_i c_i s^{e_i} - offset
/// - piecewise-power: s^{inner} for s <= 1, (inner/outer) s^{outer} + (1 - inner/outer) for s > 1, minus offset.
///   The two pieces agree in value and slope at s = 1.
/// - custom-table:    piecewise-linear interpolation of (s, value) samples, extended past the last sample
///   with the last slope, minus offset.
struct NonlinearitySpec {
    NonlinearityKind kind = NonlinearityKind::PolynomialSum;
    std::vector<PowerTerm> terms;
    double offset = 0.0;
    double inner = 1.0;
    double outer = 1.0;
    std::vector<std::pair<double, double>> table;
    bool monotone = true;

    static NonlinearitySpec polynomial(std::vector<PowerTerm> terms, double offset = 0.0)
    {
        NonlinearitySpec s;
        s.kind = NonlinearityKind::PolynomialSum;
        s.terms = std::move(terms);
        s.offset = offset;
        s.validate();
        return s;
    }

    static NonlinearitySpec piecewise(double inner, double outer, double offset = 0.0)
    {
        NonlinearitySpec s;
        s.kind = NonlinearityKind::PiecewisePower;
        s.inner = inner;
        s.outer = outer;
        s.offset = offset;
        s.validate();
        return s;
    }

    static NonlinearitySpec custom_table(std::vector<std::pair<double, double>> points, double offset = 0.0,
                                         bool monotone = true)
    {
        NonlinearitySpec s;
        s.kind = NonlinearityKind::CustomTable;
        s.table = std::move(points);
        s.offset = offset;
        s.monotone = monotone;
        s.validate();
        return s;
    }

    /// Constant that makes the piecewise-power pieces meet at s = 1.
    double matching_constant() const { return 1.0 - inner / outer; }

    /// Whether limits can be decided by exponent arithmetic.
    bool has_exact_exponents() const { return kind != NonlinearityKind::CustomTable; }

    void validate() const
    {
        if (!(offset >= 0.0)) throw Error(ErrorKind::Config, "nonlinearity offset must be >= 0", "nonlinearity");
        switch (kind) {
        case NonlinearityKind::PolynomialSum:
            for (const auto& t : terms)
                if (!(t.coefficient >= 0.0) || !(t.exponent >= 0.0))
                    throw Error(ErrorKind::Config, "polynomial terms need coefficient >= 0 and exponent >= 0",
                                "nonlinearity");
            break;
        case NonlinearityKind::PiecewisePower:
            if (!(inner > 0.0) || !(outer > 0.0))
                throw Error(ErrorKind::Config, "piecewise-power exponents must be positive", "nonlinearity");
            break;
        case NonlinearityKind::CustomTable:
            if (table.size() < 2 || table.front().first != 0.0)
                throw Error(ErrorKind::Config, "custom table needs >= 2 samples starting at s = 0", "nonlinearity");
            for (std::size_t i = 1; i < table.size(); ++i)
                if (!(table[i].first > table[i - 1].first))
                    throw Error(ErrorKind::Config, "custom table abscissae must increase", "nonlinearity");
            break;
        }
    }
};

namespace detail {

inline double power(double s, double e) { return e == 0.0 ? 1.0 : std::pow(s, e); }

inline double table_eval(const std::vector<std::pair<double, double>>& t, double s, bool derivative)
{
    auto it = std::upper_bound(t.begin(), t.end(), s, [](double x, const auto& pt) { return x < pt.first; });
    std::size_t hi = static_cast<std::size_t>(it - t.begin());
    if (hi == 0) hi = 1;
    if (hi >= t.size()) hi = t.size() - 1;
    const auto& [x0, y0] = t[hi - 1];
    const auto& [x1, y1] = t[hi];
    const double slope = (y1 - y0) / (x1 - x0);
    return derivative ? slope : y0 + slope * (s - x0);
}

} // namespace detail

/// Exact evaluation. Throws a domain error for s < 0.
inline double eval(const NonlinearitySpec& spec, double s)
{
    if (!(s >= 0.0)) throw Error(ErrorKind::Domain, "nonlinearity evaluated at s < 0", "nonlinearity");
    double value = 0.0;
    switch (spec.kind) {
    case NonlinearityKind::PolynomialSum:
        for (const auto& t : spec.terms) value += t.coefficient * detail::power(s, t.exponent);
        break;
    case NonlinearityKind::PiecewisePower:
        value = s <= 1.0 ? std::pow(s, spec.inner)
                         : (spec.inner / spec.outer) * std::pow(s, spec.outer) + spec.matching_constant();
        break;
    case NonlinearityKind::CustomTable: value = detail::table_eval(spec.table, s, false); break;
    }
    return value - spec.offset;
}

/// Analytic derivative (one-sided from the left at table breakpoints).
inline double eval_derivative(const NonlinearitySpec& spec, double s)
{
    if (!(s >= 0.0)) throw Error(ErrorKind::Domain, "nonlinearity derivative at s < 0", "nonlinearity");
    double value = 0.0;
    switch (spec.kind) {
    case NonlinearityKind::PolynomialSum:
        for (const auto& t : spec.terms)
            if (t.exponent != 0.0) value += t.coefficient * t.exponent * detail::power(s, t.exponent - 1.0);
        break;
    case NonlinearityKind::PiecewisePower:
        value = s <= 1.0 ? spec.inner * detail::power(s, spec.inner - 1.0)
                         : spec.inner * std::pow(s, spec.outer - 1.0);
        break;
    case NonlinearityKind::CustomTable: value = detail::table_eval(spec.table, s, true); break;
    }
    return value;
}

/// Growth exponent at infinity (exact families only).
inline double leading_exponent(const NonlinearitySpec& spec)
{
    switch (spec.kind) {
    case NonlinearityKind::PolynomialSum: {
        double e = 0.0;
        for (const auto& t : spec.terms)
            if (t.coefficient > 0.0) e = std::max(e, t.exponent);
        return e;
    }
    case NonlinearityKind::PiecewisePower: return spec.outer;
    case NonlinearityKind::CustomTable: break;
    }
    return std::numeric_limits<double>::quiet_NaN();
}

inline double leading_coefficient(const NonlinearitySpec& spec)
{
    switch (spec.kind) {
    case NonlinearityKind::PolynomialSum: {
        const double e = leading_exponent(spec);
        double c = 0.0;
        for (const auto& t : spec.terms)
            if (t.exponent == e) c += t.coefficient;
        return c;
    }
    case NonlinearityKind::PiecewisePower: return spec.inner / spec.outer;
    case NonlinearityKind::CustomTable: break;
    }
    return std::numeric_limits<double>::quiet_NaN();
}

/// Vanishing order at zero (exact families only).
inline double smallest_exponent(const NonlinearitySpec& spec)
{
    switch (spec.kind) {
    case NonlinearityKind::PolynomialSum: {
        double e = std::numeric_limits<double>::infinity();
        for (const auto& t : spec.terms)
            if (t.coefficient > 0.0) e = std::min(e, t.exponent);
        return e;
    }
    case NonlinearityKind::PiecewisePower: return spec.inner;
    case NonlinearityKind::CustomTable: break;
    }
    return std::numeric_limits<double>::quiet_NaN();
}

/// Same nonlinearity moved down by one everywhere.
inline NonlinearitySpec shift(const NonlinearitySpec& spec)
{
    NonlinearitySpec out = spec;
    out.offset += 1.0;
    return out;
}

/// The four nonlinearities of the system: f(v) and h(u) drive the u equation,
/// g(u) and gamma(v) drive the v equation.
struct NonlinearitySet {
    NonlinearitySpec f, g, h, gamma;
};

inline NonlinearitySet shift(const NonlinearitySet& set)
{
    return {shift(set.f), shift(set.g), shift(set.h), shift(set.gamma)};
}

/// Lower bounds of the weight functions.
struct WeightBounds {
    double a1 = 1.0, b1 = 1.0, alpha1 = 1.0, beta1 = 1.0;
};

enum class HypothesisMethod { ExactExponent, Sampled };

inline const char* to_string(HypothesisMethod m)
{
    return m == HypothesisMethod::ExactExponent ? "exact-exponent" : "sampled";
}

struct HypothesisCheck {
    bool passed = false;
    std::string detail;
    /// Sampled ratio sequence(s), flattened as M-major rows of the s grid (for H3/H4).
    std::vector<double> ratios;
};

struct HypothesisReport {
    HypothesisMethod method = HypothesisMethod::ExactExponent;
    HypothesisCheck h1, h2, h3, h4;
    WeightBounds bounds;

    bool all_passed() const { return h1.passed && h2.passed && h3.passed && h4.passed; }
};

namespace detail {

inline std::vector<double> decade_grid(int lo, int hi)
{
    std::vector<double> s;
    for (int k = lo; k <= hi; ++k) s.push_back(std::pow(10.0, k));
    return s;
}

/// Sampled limit-zero decision for a ratio sequence on a decade grid: |ratio| must be
/// nonincreasing over the last four samples and either fall below 1e-3 at the final
/// sample or decay with a log-log slope below -0.01 across the tail.
inline bool sampled_limit_zero(const std::vector<double>& r)
{
    const std::size_t n = r.size();
    if (n < 4) return false;
    for (double x : r)
        if (!std::isfinite(x)) return false;
    for (std::size_t k = n - 3; k < n; ++k)
        if (std::abs(r[k]) > std::abs(r[k - 1]) * (1.0 + 1e-12)) return false;
    if (std::abs(r[n - 1]) < 1e-3) return true;
    if (r[n - 1] == 0.0 || r[n - 4] == 0.0) return true;
    const double slope = (std::log(std::abs(r[n - 1])) - std::log(std::abs(r[n - 4]))) / (3.0 * std::log(10.0));
    return slope < -0.01;
}

/// Sampled check that a spec is nondecreasing on a 10^4-point log grid and grows without bound.
inline bool sampled_monotone_unbounded(const NonlinearitySpec& spec, std::string& why)
{
    double prev = eval(spec, 0.0);
    const int points = 10000;
    for (int k = 0; k < points; ++k) {
        const double s = std::pow(10.0, -8.0 + 16.0 * k / (points - 1));
        const double v = eval(spec, s);
        if (v < prev - 1e-12 * std::max(1.0, std::abs(prev))) {
            why = "decreases near s=" + std::to_string(s);
            return false;
        }
        prev = v;
    }
    const double v6 = eval(spec, 1e6) + spec.offset, v8 = eval(spec, 1e8) + spec.offset;
    if (!(v8 > 0.0 && v6 > 0.0)) {
        why = "not growing at s=1e8";
        return false;
    }
    const double slope = (std::log(v8) - std::log(v6)) / (2.0 * std::log(10.0));
    if (!(slope > 0.01)) {
        why = "growth slope " + std::to_string(slope) + " at infinity";
        return false;
    }
    return true;
}

inline std::vector<double> h3_ratio_rows(const NonlinearitySpec& f, const NonlinearitySpec& g, double p, double q)
{
    std::vector<double> rows;
    for (double M : {1.0, 10.0, 100.0})
        for (double s : decade_grid(2, 8)) {
            const double gs = std::max(eval(g, s), 0.0);
            rows.push_back(eval(f, M * std::pow(gs, 1.0 / (q - 1.0))) / std::pow(s, p - 1.0));
        }
    return rows;
}

inline std::vector<double> growth_ratio_row(const NonlinearitySpec& h, double r)
{
    std::vector<double> row;
    for (double s : decade_grid(2, 8)) row.push_back(eval(h, s) / std::pow(s, r - 1.0));
    return row;
}

inline bool rows_limit_zero(const std::vector<double>& rows, std::size_t row_length)
{
    for (std::size_t start = 0; start < rows.size(); start += row_length) {
        std::vector<double> row(rows.begin() + static_cast<std::ptrdiff_t>(start),
                                rows.begin() + static_cast<std::ptrdiff_t>(start + row_length));
        if (!sampled_limit_zero(row)) return false;
    }
    return true;
}

inline HypothesisCheck check_h1(const WeightBounds& w)
{
    HypothesisCheck c;
    c.passed = w.a1 > 0.0 && w.b1 > 0.0 && w.alpha1 > 0.0 && w.beta1 > 0.0;
    c.detail = "a1=" + std::to_string(w.a1) + " b1=" + std::to_string(w.b1) + " alpha1=" + std::to_string(w.alpha1) +
               " beta1=" + std::to_string(w.beta1);
    return c;
}

} // namespace detail

/// Sampled evaluation of (H1)-(H4); limits are judged on decade grids s = 1e2..1e8, M in {1, 10, 100}.
inline HypothesisReport check_hypotheses_sampled(const NonlinearitySet& nl, const WeightBounds& w, double p, double q)
{
    HypothesisReport rep;
    rep.method = HypothesisMethod::Sampled;
    rep.bounds = w;
    rep.h1 = detail::check_h1(w);

    rep.h2.passed = true;
    const std::pair<const char*, const NonlinearitySpec*> named[] = {{"f", &nl.f}, {"g", &nl.g}, {"h", &nl.h}, {"gamma", &nl.gamma}};
    for (const auto& [name, spec] : named) {
        std::string why;
        if (!detail::sampled_monotone_unbounded(*spec, why)) {
            rep.h2.passed = false;
            rep.h2.detail += std::string(name) + ": " + why + "; ";
        }
    }

    rep.h3.ratios = detail::h3_ratio_rows(nl.f, nl.g, p, q);
    rep.h3.passed = detail::rows_limit_zero(rep.h3.ratios, 7);
    rep.h3.detail = "f(M g(s)^{1/(q-1)}) / s^{p-1} on s=1e2..1e8, M=1,10,100";

    auto rh = detail::growth_ratio_row(nl.h, p);
    auto rg = detail::growth_ratio_row(nl.gamma, q);
    rep.h4.passed = detail::sampled_limit_zero(rh) && detail::sampled_limit_zero(rg);
    rep.h4.ratios = rh;
    rep.h4.ratios.insert(rep.h4.ratios.end(), rg.begin(), rg.end());
    rep.h4.detail = "h(s)/s^{p-1} then gamma(s)/s^{q-1} on s=1e2..1e8";
    return rep;
}

/// Exponent-arithmetic evaluation of (H1)-(H4); requires polynomial-sum / piecewise-power specs.
inline HypothesisReport check_hypotheses_exact(const NonlinearitySet& nl, const WeightBounds& w, double p, double q)
{
    for (const auto* s : {&nl.f, &nl.g, &nl.h, &nl.gamma})
        if (!s->has_exact_exponents())
            throw Error(ErrorKind::Domain, "exact hypothesis check needs exponent metadata", "nonlinearity");
    HypothesisReport rep;
    rep.method = HypothesisMethod::ExactExponent;
    rep.bounds = w;
    rep.h1 = detail::check_h1(w);

    rep.h2.passed = true;
    const std::pair<const char*, const NonlinearitySpec*> named[] = {{"f", &nl.f}, {"g", &nl.g}, {"h", &nl.h}, {"gamma", &nl.gamma}};
    for (const auto& [name, spec] : named) {
        const bool ok = spec->monotone && leading_coefficient(*spec) > 0.0 && leading_exponent(*spec) > 0.0;
        if (!ok) {
            rep.h2.passed = false;
            rep.h2.detail += std::string(name) + " not nondecreasing-unbounded; ";
        }
    }

    const double lf = leading_exponent(nl.f), lg = leading_exponent(nl.g);
    rep.h3.passed = lf * lg < (p - 1.0) * (q - 1.0);
    rep.h3.detail = "lead(f)*lead(g)=" + std::to_string(lf * lg) + " vs (p-1)(q-1)=" + std::to_string((p - 1.0) * (q - 1.0));
    rep.h3.ratios = detail::h3_ratio_rows(nl.f, nl.g, p, q);

    const double lh = leading_exponent(nl.h), lgam = leading_exponent(nl.gamma);
    rep.h4.passed = lh < p - 1.0 && lgam < q - 1.0;
    rep.h4.detail = "lead(h)=" + std::to_string(lh) + " vs p-1, lead(gamma)=" + std::to_string(lgam) + " vs q-1";
    rep.h4.ratios = detail::growth_ratio_row(nl.h, p);
    auto rg = detail::growth_ratio_row(nl.gamma, q);
    rep.h4.ratios.insert(rep.h4.ratios.end(), rg.begin(), rg.end());
    return rep;
}

/// Exact path whenever every spec carries exponent metadata, sampled otherwise.
inline HypothesisReport check_hypotheses(const NonlinearitySet& nl, const WeightBounds& w, double p, double q)
{
    const bool exact = nl.f.has_exact_exponents() && nl.g.has_exact_exponents() && nl.h.has_exact_exponents() &&
                       nl.gamma.has_exact_exponents();
    return exact ? check_hypotheses_exact(nl, w, p, q) : check_hypotheses_sampled(nl, w, p, q);
}

/// Order to which f, h (resp. g, gamma) must vanish at 0 for the multiplicity construction:
/// p - 1 for integer p, floor(p) otherwise.
inline double flatness_order(double r)
{
    return std::floor(r) == r ? r - 1.0 : std::floor(r);
}

struct FlatnessReport {
    bool passed = false;
    std::string detail;
};

/// Checks f(0)=g(0)=h(0)=gamma(0)=0 together with the vanishing-derivative conditions at 0,
/// symbolically through the smallest exponent.
inline FlatnessReport check_flatness(const NonlinearitySet& nl, double p, double q)
{
    FlatnessReport rep;
    rep.passed = true;
    const struct {
        const char* name;
        const NonlinearitySpec* spec;
        double r;
    } items[] = {{"f", &nl.f, p}, {"h", &nl.h, p}, {"g", &nl.g, q}, {"gamma", &nl.gamma, q}};
    for (const auto& it : items) {
        const double order = flatness_order(it.r);
        bool ok = eval(*it.spec, 0.0) == 0.0;
        if (ok) {
            if (it.spec->has_exact_exponents()) {
                ok = smallest_exponent(*it.spec) > order;
            } else {
                std::vector<double> ratios;
                for (int k = 2; k <= 8; ++k) {
                    const double s = std::pow(10.0, -k);
                    ratios.push_back(eval(*it.spec, s) / std::pow(s, order));
                }
                ok = detail::sampled_limit_zero(ratios);
            }
        }
        if (!ok) {
            rep.passed = false;
            rep.detail += std::string(it.name) + " not flat to order " + std::to_string(order) + " at 0; ";
        }
    }
    return rep;
}

namespace detail {

/// Infimum over [0, inf) by a log-grid scan followed by golden-section refinement.
inline double infimum(const NonlinearitySpec& spec)
{
    std::vector<double> grid{0.0};
    const int points = 1601;
    for (int k = 0; k < points; ++k) grid.push_back(std::pow(10.0, -8.0 + 16.0 * k / (points - 1)));
    std::size_t best = 0;
    double best_value = eval(spec, 0.0);
    for (std::size_t k = 1; k < grid.size(); ++k) {
        const double v = eval(spec, grid[k]);
        if (v < best_value) {
            best_value = v;
            best = k;
        }
    }
    if (best == grid.size() - 1) {
        const double far = eval(spec, 1e12);
        if (far < best_value)
            throw Error(ErrorKind::UnboundedNonlinearity, "nonlinearity appears unbounded below", "nonlinearity");
    }
    if (best == 0) return best_value;
    double lo = grid[best - 1], hi = grid[std::min(best + 1, grid.size() - 1)];
    const double ratio = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = hi - ratio * (hi - lo), x2 = lo + ratio * (hi - lo);
    double f1 = eval(spec, x1), f2 = eval(spec, x2);
    for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, hi); ++it) {
        if (f1 < f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = eval(spec, x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = eval(spec, x2);
        }
    }
    return std::min({best_value, f1, f2});
}

} // namespace detail

/// k0 = 1.5 * max(1, -min_i weight_i * inf spec_i), so that every weighted nonlinearity exceeds -k0.
inline double lower_bound_k0(const NonlinearitySet& nl, const WeightBounds& w)
{
    const double worst = std::min({w.a1 * detail::infimum(nl.f), w.b1 * detail::infimum(nl.g),
                                   w.alpha1 * detail::infimum(nl.h), w.beta1 * detail::infimum(nl.gamma)});
    return 1.5 * std::max(1.0, -worst);
}

} // namespace pqss
