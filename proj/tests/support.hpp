#pragma once

// Fixtures and independent reference values shared by the unit tests and the acceptance binary.

#include <cmath>
#include <numbers>

#include <Eigen/Dense>

#include "pqss/pqss.hpp"

namespace pqss_test {

using namespace pqss;

/// f = g = h = gamma = s^{1/2} - 1.
inline NonlinearitySet sqrt_minus_one()
{
    const auto s = NonlinearitySpec::polynomial({{1.0, 0.5}}, 1.0);
    return {s, s, s, s};
}

/// All four: s^2 near 0, growth like s^0.9, matched at s = 1.
inline NonlinearitySet piecewise_two_point_nine()
{
    const auto s = NonlinearitySpec::piecewise(2.0, 0.9);
    return {s, s, s, s};
}

/// f = s^{p-1}, g = s^{q-1}: violates the coupled sublinear growth condition.
inline NonlinearitySet critical_coupling(double p, double q)
{
    const auto h = NonlinearitySpec::polynomial({{1.0, 0.5}}, 1.0);
    return {NonlinearitySpec::polynomial({{1.0, p - 1.0}}), NonlinearitySpec::polynomial({{1.0, q - 1.0}}), h, h};
}

/// f(v) = v + c, g(u) = u + c, h = gamma = 0.
inline NonlinearitySet linear_coupling(double c)
{
    std::vector<PowerTerm> t = {{1.0, 1.0}};
    if (c > 0.0) t.push_back({c, 0.0});
    const auto zero = NonlinearitySpec::polynomial({});
    return {NonlinearitySpec::polynomial(t), NonlinearitySpec::polynomial(t), zero, zero};
}

/// First eigenvalue of the one-dimensional r-Laplacian on (0, 1): (r-1) pi_r^r, pi_r = 2 pi / (r sin(pi/r)).
inline double eigenvalue_1d(double r)
{
    const double pi_r = 2.0 * std::numbers::pi / (r * std::sin(std::numbers::pi / r));
    return (r - 1.0) * std::pow(pi_r, r);
}

/// Max of the torsion function of the r-Laplacian on (0, 1): (r-1)/r * (1/2)^{r/(r-1)}.
inline double torsion_max_1d(double r) { return (r - 1.0) / r * std::pow(0.5, r / (r - 1.0)); }

/// Torsion function of the Laplacian on the unit square at its centre (double sine series).
inline double torsion_centre_square(int terms = 801)
{
    const double pi = std::numbers::pi;
    double sum = 0.0;
    for (int m = 1; m <= terms; m += 2)
        for (int n = 1; n <= terms; n += 2) {
            const double sign = (((m - 1) / 2 + (n - 1) / 2) % 2 == 0) ? 1.0 : -1.0;
            sum += sign * 16.0 / (std::pow(pi, 4) * m * n * (m * m + n * n));
        }
    return sum;
}

/// Interior stiffness and consistent mass matrices of P1 elements on a uniform grid of (0, L).
struct Interval1D {
    Eigen::MatrixXd K, M;
    double h;
};

inline Interval1D interval_matrices(int n, double length = 1.0)
{
    const int m = n - 1;
    Interval1D out{Eigen::MatrixXd::Zero(m, m), Eigen::MatrixXd::Zero(m, m), length / n};
    for (int i = 0; i < m; ++i) {
        out.K(i, i) = 2.0 / out.h;
        out.M(i, i) = 4.0 * out.h / 6.0;
        if (i + 1 < m) {
            out.K(i, i + 1) = out.K(i + 1, i) = -1.0 / out.h;
            out.M(i, i + 1) = out.M(i + 1, i) = out.h / 6.0;
        }
    }
    return out;
}

/// Smallest generalized eigenvalue of (K, M) by a dense solver.
inline double dense_first_eigenvalue(int n)
{
    const Interval1D a = interval_matrices(n);
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(a.K, a.M);
    return es.eigenvalues().minCoeff();
}

/// Direct solve of the linear coupled system
///   K u - M u - l1 M v = l1 c b,  K v - M v - l2 M u = l2 c b,  b_i = integral of the i-th hat function
/// on (0, 1) with n elements. Returns nodal values including the zero boundary entries.
inline std::pair<Eigen::VectorXd, Eigen::VectorXd> linear_coupled_solution(int n, double l1, double l2, double c)
{
    const Interval1D a = interval_matrices(n);
    const int m = n - 1;
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(2 * m, 2 * m);
    A.topLeftCorner(m, m) = a.K - a.M;
    A.topRightCorner(m, m) = -l1 * a.M;
    A.bottomLeftCorner(m, m) = -l2 * a.M;
    A.bottomRightCorner(m, m) = a.K - a.M;
    Eigen::VectorXd rhs(2 * m);
    // load of the constant c: integral of c times each interior hat function
    rhs.head(m).setConstant(l1 * c * a.h);
    rhs.tail(m).setConstant(l2 * c * a.h);
    const Eigen::VectorXd x = A.partialPivLu().solve(rhs);
    Eigen::VectorXd u = Eigen::VectorXd::Zero(n + 1), v = Eigen::VectorXd::Zero(n + 1);
    u.segment(1, m) = x.head(m);
    v.segment(1, m) = x.tail(m);
    return {u, v};
}

} // namespace pqss_test
