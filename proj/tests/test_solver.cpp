#include <catch2/catch_amalgamated.hpp>

#include "support.hpp"

using namespace pqss;
using namespace pqss_test;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("p = 2 torsion is nodally exact in 1D", "[solver]")
{
    // P1 elements reproduce x(1-x)/2 at the nodes for -u'' = 1.
    const int n = 64;
    const MeshPtr mesh = build_interval_mesh(n);
    const Field w = solve_scalar_dirichlet(2.0, Field::constant(mesh, 1.0));
    for (std::size_t i = 0; i < mesh->num_nodes(); ++i) {
        const double x = mesh->nodes()[i][0];
        CHECK_THAT(w[i], WithinAbs(0.5 * x * (1 - x), 1e-13));
    }
}

TEST_CASE("nonlinear torsion matches the closed form on (0,1)", "[solver]")
{
    const MeshPtr mesh = build_interval_mesh(256);
    for (double p : {1.5, 3.0, 4.0}) {
        SolveStats st;
        const Field w = solve_scalar_dirichlet(p, Field::constant(mesh, 1.0), {}, nullptr, &st);
        CHECK_THAT(w.max(), WithinRel(torsion_max_1d(p), 2e-3));
        CHECK(st.newton_iterations > 0);
    }
}

TEST_CASE("energy is nonincreasing within each regularization stage", "[solver]")
{
    const MeshPtr mesh = build_square_mesh(12);
    SolveStats st;
    solve_scalar_dirichlet(3.0, Field::constant(mesh, 1.0), {}, nullptr, &st);
    REQUIRE(st.energy_history.size() == st.eps_history.size());
    for (std::size_t k = 1; k < st.energy_history.size(); ++k)
        if (st.eps_history[k] == st.eps_history[k - 1])
            CHECK(st.energy_history[k] <= st.energy_history[k - 1] + 1e-12 * std::abs(st.energy_history[k - 1]));
}

TEST_CASE("iteration cap raises nonconvergence with the last iterate", "[solver]")
{
    const MeshPtr mesh = build_interval_mesh(64);
    SolverOptions o;
    o.max_iterations = 1;
    try {
        solve_scalar_dirichlet(3.0, Field::constant(mesh, 1.0), o);
        FAIL("expected nonconvergence");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::NonConvergence);
        CHECK(e.payload.size() == mesh->num_nodes());
    }
}

TEST_CASE("zero source gives the zero solution", "[solver]")
{
    const MeshPtr mesh = build_square_mesh(4);
    CHECK(solve_scalar_dirichlet(3.0, Field::zeros(mesh)).max_abs() == 0.0);
}

TEST_CASE("comparison principle: a larger source gives a larger solution", "[solver]")
{
    const MeshPtr mesh = build_interval_mesh(64);
    const Field small = Field::constant(mesh, 1.0);
    const Field big = interpolate(mesh, [](const Point& x) { return 1.0 + x[0]; });
    for (double p : {1.5, 2.0, 3.0}) {
        const Field a = solve_scalar_dirichlet(p, small), b = solve_scalar_dirichlet(p, big);
        CHECK(((b.values - a.values).array() >= -1e-12).all());
    }
}

TEST_CASE("p must exceed 1", "[solver]")
{
    const MeshPtr mesh = build_interval_mesh(8);
    CHECK_THROWS_AS(solve_scalar_dirichlet(1.0, Field::constant(mesh, 1.0)), Error);
}
