#include <catch2/catch_amalgamated.hpp>

#include "support.hpp"

using namespace pqss;
using namespace pqss_test;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

struct Fixture {
    MeshPtr mesh;
    EigenData eig_p, eig_q;
    TorsionData tor_p, tor_q;

    Fixture(int n, double p, double q) : mesh(build_interval_mesh(n))
    {
        eig_p = first_eigenpair(mesh, p);
        eig_q = q == p ? eig_p : first_eigenpair(mesh, q);
        tor_p = torsion_function(mesh, p);
        tor_q = q == p ? tor_p : torsion_function(mesh, q);
    }
};

bool all_passed(const std::vector<SubSuperReport>& v)
{
    return std::all_of(v.begin(), v.end(), [](const auto& c) { return c.passed; });
}

} // namespace

TEST_CASE("threshold search brackets the first feasible parameter sum", "[subsuper]")
{
    const Fixture fx(128, 2.0, 2.0);
    const NonlinearitySet nl = sqrt_minus_one();
    const ProblemParams tmpl = ProblemParams::with_constant_weights(fx.mesh, 2, 2, 1, 1, 1, 1);
    const double k0 = lower_bound_k0(nl, tmpl.lower_bounds());
    const ThresholdResult t = existence_threshold(tmpl, fx.eig_p, fx.eig_q, nl, k0);
    REQUIRE(t.fail_sum1 > 0.0);
    CHECK(t.sum1 == 2.0 * t.fail_sum1);
    CHECK_NOTHROW(construct_subsolution(tmpl.with_sums(t.sum1, t.sum2), fx.eig_p, fx.eig_q, nl, k0));
    try {
        construct_subsolution(tmpl.with_sums(t.fail_sum1, t.fail_sum2), fx.eig_p, fx.eig_q, nl, k0);
        FAIL("expected lambda-too-small");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::LambdaTooSmall);
        CHECK_FALSE(e.condition().empty());
    }
}

TEST_CASE("subsolution scales like (lambda + mu)^{1/(p-1)}", "[subsuper]")
{
    for (double p : {2.0, 3.0}) {
        const Fixture fx(128, p, 2.0);
        const NonlinearitySet nl = sqrt_minus_one();
        const ProblemParams tmpl = ProblemParams::with_constant_weights(fx.mesh, p, 2, 1, 1, 1, 1);
        const double k0 = lower_bound_k0(nl, tmpl.lower_bounds());
        const ThresholdResult t = existence_threshold(tmpl, fx.eig_p, fx.eig_q, nl, k0);
        const Subsolution a = construct_subsolution(tmpl.with_sums(t.sum1, t.sum2), fx.eig_p, fx.eig_q, nl, k0);
        const Subsolution b = construct_subsolution(tmpl.with_sums(2 * t.sum1, 2 * t.sum2), fx.eig_p, fx.eig_q, nl, k0);
        CHECK_THAT(b.scale_u / a.scale_u, WithinRel(std::pow(2.0, 1.0 / (p - 1.0)), 1e-12));
        CHECK((b.u.values - std::pow(2.0, 1.0 / (p - 1.0)) * a.u.values).cwiseAbs().maxCoeff() <= 1e-12 * b.scale_u);
    }
}

TEST_CASE("ordered pair passes all four weak certificates", "[subsuper]")
{
    const Fixture fx(128, 2.0, 2.0);
    const NonlinearitySet nl = sqrt_minus_one();
    const ProblemParams tmpl = ProblemParams::with_constant_weights(fx.mesh, 2, 2, 1, 1, 1, 1);
    const double k0 = lower_bound_k0(nl, tmpl.lower_bounds());
    const ThresholdResult t = existence_threshold(tmpl, fx.eig_p, fx.eig_q, nl, k0);
    const ProblemParams prm = tmpl.with_sums(t.sum1, t.sum2);
    const OrderedPair pair = construct_ordered_pair(prm, fx.eig_p, fx.eig_q, fx.tor_p, fx.tor_q, nl, k0);
    REQUIRE(pair.certificates.size() == 4);
    CHECK(pair.all_passed());
    CHECK(pair.ordered);
    CHECK(((pair.super_u.values - pair.sub_u.values).array() >= 0.0).all());
    // the certificates are reproducible from the stored fields
    CHECK(all_passed(check_subsuper(pair.sub_u, pair.sub_v, Side::Sub, prm, nl, 1e-8)));
    CHECK(all_passed(check_subsuper(pair.super_u, pair.super_v, Side::Super, prm, nl, 1e-8)));
}

TEST_CASE("supersolution needs a torsion maximum below one", "[subsuper]")
{
    // on (0, 4) the Laplacian torsion maximum is 16/8 = 2
    const MeshPtr mesh = build_interval_mesh(64, 4.0);
    const TorsionData tor = torsion_function(mesh, 2.0);
    CHECK_THAT(tor.nu, WithinRel(2.0, 1e-3));
    const ProblemParams prm = ProblemParams::with_constant_weights(mesh, 2, 2, 1, 1, 1, 1);
    try {
        construct_supersolution(prm, tor, tor, sqrt_minus_one());
        FAIL("expected domain-too-large");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::DomainTooLarge);
    }
}

TEST_CASE("zero subsolution pair for nonnegative sources", "[subsuper]")
{
    const Fixture fx(64, 2.0, 2.0);
    const ProblemParams prm = ProblemParams::with_constant_weights(fx.mesh, 2, 2, 2, 2, 0, 0);
    const OrderedPair pair = construct_zero_ordered_pair(prm, fx.tor_p, fx.tor_q, linear_coupling(1.0));
    CHECK(pair.all_passed());
    try {
        construct_zero_ordered_pair(prm, fx.tor_p, fx.tor_q, sqrt_minus_one());
        FAIL("expected a failure for negative sources at 0");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::HypothesisFailure);
    }
}

TEST_CASE("strict pair gates: spectral gap, then flatness", "[subsuper]")
{
    {
        // sigma_2 on (0, 4) is pi^2 / 16 < 1
        const MeshPtr mesh = build_interval_mesh(64, 4.0);
        const EigenData e = first_eigenpair(mesh, 2.0);
        const ProblemParams prm = ProblemParams::with_constant_weights(mesh, 2, 2, 1, 1, 1, 1);
        const Field z = Field::zeros(mesh);
        try {
            construct_strict_pair(prm, e, e, piecewise_two_point_nine(), z, z);
            FAIL("expected spectral-gap");
        } catch (const Error& err) {
            CHECK(err.kind() == ErrorKind::SpectralGap);
        }
    }
    const Fixture fx(64, 2.0, 2.0);
    const ProblemParams prm = ProblemParams::with_constant_weights(fx.mesh, 2, 2, 1, 1, 1, 1);
    const Field z = Field::zeros(fx.mesh);
    try {
        construct_strict_pair(prm, fx.eig_p, fx.eig_q, sqrt_minus_one(), z, z);
        FAIL("expected flatness-violation");
    } catch (const Error& err) {
        CHECK(err.kind() == ErrorKind::FlatnessViolation);
    }
}
