#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "support.hpp"

using namespace pqss;
using namespace pqss_test;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

Eigen::VectorXd random_interior(const Mesh& mesh, std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    Eigen::VectorXd x(static_cast<Eigen::Index>(mesh.num_nodes()));
    for (std::size_t i = 0; i < mesh.num_nodes(); ++i) x[static_cast<Eigen::Index>(i)] = mesh.is_boundary(i) ? 0.0 : unit(rng);
    return x;
}

} // namespace

TEST_CASE("quadrature rules integrate polynomials of their degree exactly", "[fem][quadrature]")
{
    for (int degree = 1; degree <= 5; ++degree) {
        const QuadratureRule seg = quadrature_rule(1, degree);
        const QuadratureRule tri = quadrature_rule(2, degree);
        for (const auto* r : {&seg, &tri}) {
            double wsum = 0.0;
            for (double w : r->weights) {
                CHECK(w > 0.0);
                wsum += w;
            }
            CHECK_THAT(wsum, WithinAbs(1.0, 1e-14));
        }
        // int_0^1 t^k dt = 1/(k+1)
        for (int k = 0; k <= degree; ++k) {
            double s = 0.0;
            for (std::size_t i = 0; i < seg.size(); ++i) s += seg.weights[i] * std::pow(seg.barycentric[i][1], k);
            CHECK_THAT(s, WithinAbs(1.0 / (k + 1), 1e-14));
        }
        // average of l1^a l2^b over the triangle = 2 a! b! / (a+b+2)!
        for (int a = 0; a <= degree; ++a)
            for (int b = 0; a + b <= degree; ++b) {
                double s = 0.0;
                for (std::size_t i = 0; i < tri.size(); ++i)
                    s += tri.weights[i] * std::pow(tri.barycentric[i][0], a) * std::pow(tri.barycentric[i][1], b);
                const double exact = 2.0 * std::tgamma(a + 1) * std::tgamma(b + 1) / std::tgamma(a + b + 3);
                CHECK_THAT(s, WithinAbs(exact, 1e-13));
            }
    }
}

TEST_CASE("p = 2 tangent equals the hand-assembled 1D stiffness", "[fem]")
{
    const int n = 12;
    const MeshPtr mesh = build_interval_mesh(n);
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(n + 1);
    const Eigen::MatrixXd k = Eigen::MatrixXd(fem::p_laplacian_tangent(*mesh, zero, 2.0, 0.0)).block(1, 1, n - 1, n - 1);
    const Interval1D ref = interval_matrices(n);
    CHECK((k - ref.K).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("power mass with r = 2 equals the consistent mass matrix", "[fem]")
{
    const int n = 10;
    const MeshPtr mesh = build_interval_mesh(n);
    std::mt19937_64 rng(3);
    const Eigen::VectorXd u = random_interior(*mesh, rng);
    const Eigen::VectorXd mu = fem::power_mass_vector(*mesh, quadrature_rule(1, 3), u, 2.0);
    const Interval1D ref = interval_matrices(n);
    const Eigen::VectorXd expect = ref.M * u.segment(1, n - 1);
    CHECK((mu.segment(1, n - 1) - expect).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("p-energy directional derivatives match central differences", "[fem][gradient]")
{
    std::mt19937_64 rng(11);
    for (const MeshPtr& mesh : {build_interval_mesh(32), build_square_mesh(8)})
        for (double p : {1.5, 2.0, 3.0})
            for (int trial = 0; trial < 20; ++trial) {
                const Eigen::VectorXd u = random_interior(*mesh, rng);
                const Eigen::VectorXd d = random_interior(*mesh, rng);
                const double eps = 1e-8;
                const double analytic = fem::p_laplacian_vector(*mesh, u, p, eps).dot(d);
                const double t = 1e-5;
                const double fd = (fem::p_energy(*mesh, u + t * d, p, eps) - fem::p_energy(*mesh, u - t * d, p, eps)) / (2 * t);
                CHECK(std::abs(fd - analytic) <= 1e-5 * std::max(std::abs(analytic), 1e-3));
            }
}

TEST_CASE("tangent matrix is the derivative of the p-Laplacian vector", "[fem][gradient]")
{
    std::mt19937_64 rng(5);
    const MeshPtr mesh = build_square_mesh(6);
    for (double p : {1.5, 3.0}) {
        const Eigen::VectorXd u = random_interior(*mesh, rng);
        const Eigen::VectorXd d = random_interior(*mesh, rng);
        const double eps = 1e-6, t = 1e-6;
        const Eigen::VectorXd jd = fem::p_laplacian_tangent(*mesh, u, p, eps) * d;
        const Eigen::VectorXd fd =
            (fem::p_laplacian_vector(*mesh, u + t * d, p, eps) - fem::p_laplacian_vector(*mesh, u - t * d, p, eps)) / (2 * t);
        CHECK((jd - fd).cwiseAbs().maxCoeff() <= 1e-5 * jd.cwiseAbs().maxCoeff());
    }
}

TEST_CASE("weak residual of the exact discrete linear solution vanishes", "[fem]")
{
    const int n = 16;
    const MeshPtr mesh = build_interval_mesh(n);
    const auto [u, v] = linear_coupled_solution(n, 2.0, 2.0, 1.0);
    const ProblemParams prm = ProblemParams::with_constant_weights(mesh, 2, 2, 2, 2, 0, 0);
    const auto [ru, rv] = weak_residual_system(Field(mesh, u), Field(mesh, v), prm, linear_coupling(1.0));
    CHECK(ru.relative() < 1e-12);
    CHECK(rv.relative() < 1e-12);
}

TEST_CASE("states must vanish on the boundary", "[fem]")
{
    const MeshPtr mesh = build_interval_mesh(4);
    const ProblemParams prm = ProblemParams::with_constant_weights(mesh, 2, 2, 1, 1, 1, 1);
    const Field one = Field::constant(mesh, 1.0);
    try {
        weak_residual_system(one, one, prm, sqrt_minus_one());
        FAIL("expected boundary-condition error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::BoundaryCondition);
    }
}

TEST_CASE("sub/super checks have opposite signs on a solution perturbation", "[fem]")
{
    const int n = 32;
    const MeshPtr mesh = build_interval_mesh(n);
    const auto [u, v] = linear_coupled_solution(n, 1.0, 1.0, 1.0);
    const ProblemParams prm = ProblemParams::with_constant_weights(mesh, 2, 2, 1, 1, 0, 0);
    const NonlinearitySet nl = linear_coupling(1.0);
    // Scaling a solution up makes it a supersolution, scaling down a subsolution (for this linear system).
    const Field U(mesh, 1.1 * u), V(mesh, 1.1 * v), Ud(mesh, 0.9 * u), Vd(mesh, 0.9 * v);
    for (const auto& r : check_subsuper(U, V, Side::Super, prm, nl, 0.0)) CHECK(r.passed);
    for (const auto& r : check_subsuper(Ud, Vd, Side::Sub, prm, nl, 0.0)) CHECK(r.passed);
    for (const auto& r : check_subsuper(U, V, Side::Sub, prm, nl, 0.0)) CHECK_FALSE(r.passed);
}
