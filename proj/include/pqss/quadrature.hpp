#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "pqss/error.hpp"

namespace pqss {

/// Quadrature on the reference simplex in barycentric coordinates. Weights sum to 1,
/// so the physical weight of a point is weight * element measure. All rules here have
/// positive weights, which keeps assembled load vectors order-preserving.
struct QuadratureRule {
    int degree = 0;
    std::vector<std::array<double, 3>> barycentric;
    std::vector<double> weights;

    std::size_t size() const noexcept { return weights.size(); }
};

namespace detail {

inline QuadratureRule segment_rule(int degree)
{
    QuadratureRule rule;
    auto add = [&rule](double t, double w) {
        rule.barycentric.push_back({1.0 - t, t, 0.0});
        rule.weights.push_back(w);
    };
    if (degree <= 1) {
        rule.degree = 1;
        add(0.5, 1.0);
    } else if (degree <= 3) {
        rule.degree = 3;
        const double d = 0.5 / std::sqrt(3.0);
        add(0.5 - d, 0.5);
        add(0.5 + d, 0.5);
    } else if (degree <= 5) {
        rule.degree = 5;
        const double d = 0.5 * std::sqrt(0.6);
        add(0.5 - d, 5.0 / 18.0);
        add(0.5, 8.0 / 18.0);
        add(0.5 + d, 5.0 / 18.0);
    } else {
        rule.degree = 7;
        const double x1 = std::sqrt(3.0 / 7.0 - 2.0 / 7.0 * std::sqrt(6.0 / 5.0));
        const double x2 = std::sqrt(3.0 / 7.0 + 2.0 / 7.0 * std::sqrt(6.0 / 5.0));
        const double w1 = (18.0 + std::sqrt(30.0)) / 36.0;
        const double w2 = (18.0 - std::sqrt(30.0)) / 36.0;
        add(0.5 * (1.0 - x2), 0.5 * w2);
        add(0.5 * (1.0 - x1), 0.5 * w1);
        add(0.5 * (1.0 + x1), 0.5 * w1);
        add(0.5 * (1.0 + x2), 0.5 * w2);
    }
    return rule;
}

inline QuadratureRule triangle_rule(int degree)
{
    QuadratureRule rule;
    auto add3 = [&rule](double a, double w) {
        const double b = 1.0 - 2.0 * a;
        rule.barycentric.push_back({a, a, b});
        rule.barycentric.push_back({a, b, a});
        rule.barycentric.push_back({b, a, a});
        for (int k = 0; k < 3; ++k) rule.weights.push_back(w);
    };
    if (degree <= 1) {
        rule.degree = 1;
        rule.barycentric.push_back({1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0});
        rule.weights.push_back(1.0);
    } else if (degree <= 2) {
        rule.degree = 2;
        add3(1.0 / 6.0, 1.0 / 3.0);
    } else if (degree <= 4) {
        // Dunavant, 6 points
        rule.degree = 4;
        add3(0.445948490915965, 0.223381589678011);
        add3(0.091576213509771, 0.109951743655322);
    } else {
        // Dunavant, 7 points
        rule.degree = 5;
        rule.barycentric.push_back({1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0});
        rule.weights.push_back(0.225);
        add3(0.470142064105115, 0.132394152788506);
        add3(0.101286507323456, 0.125939180544827);
    }
    return rule;
}

} // namespace detail

/// Smallest tabulated positive-weight rule exact for polynomials of `degree` on a simplex of `dimension`.
inline QuadratureRule quadrature_rule(int dimension, int degree = 3)
{
    if (dimension == 1) return detail::segment_rule(degree);
    if (dimension == 2) return detail::triangle_rule(degree);
    throw Error(ErrorKind::Domain, "unsupported simplex dimension " + std::to_string(dimension), "quadrature");
}

} // namespace pqss
