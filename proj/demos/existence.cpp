// Positive solution of a semipositone system on (0, 1): f = g = h = gamma = sqrt(s) - 1.
#include <cstdio>

#include "pqss/pqss.hpp"

int main()
{
    using namespace pqss;
    PipelineInput in;
    in.params = ProblemParams::with_constant_weights(build_interval_mesh(128), 2.0, 2.0, 1, 1, 1, 1);
    const auto s = NonlinearitySpec::polynomial({{1.0, 0.5}}, 1.0);
    in.nl = {s, s, s, s};
    in.threshold_factor = 2.0; // twice the smallest parameter sum that admits the subsolution

    try {
        const ExistenceResult r = solve_existence(in);
        std::printf("lambda1+mu1 = %g, lambda2+mu2 = %g\n", r.params.lambda1 + r.params.mu1, r.params.lambda2 + r.params.mu2);
        std::printf("iterations %d, relative residual %.3g\n", r.bundle.iterations, r.bundle.residual());
        std::printf("max u = %.6g, max v = %.6g\n", r.bundle.u.max(), r.bundle.v.max());
        const Field& u = r.bundle.u;
        for (std::size_t i = 0; i < u.size(); i += 16) std::printf("  x=%.4f  u=%.6g\n", u.mesh->nodes()[i][0], u[i]);
    } catch (const Error& e) {
        std::fprintf(stderr, "%s: %s\n", to_string(e.kind()), e.what());
        return 1;
    }
}
