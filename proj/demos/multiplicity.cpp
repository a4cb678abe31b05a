// Two positive solutions for nonlinearities that are flat at 0 and sublinear at infinity.
#include <cstdio>

#include "pqss/pqss.hpp"

int main()
{
    using namespace pqss;
    PipelineInput in;
    in.params = ProblemParams::with_constant_weights(build_interval_mesh(128), 2.0, 2.0, 1, 1, 1, 1);
    const auto s = NonlinearitySpec::piecewise(2.0, 0.9); // s^2 below 1, s^0.9 above
    in.nl = {s, s, s, s};
    in.threshold_factor = 4.0;

    try {
        const MultiplicityResult r = solve_multiplicity(in);
        std::printf("candidates %zu, distinct positive %zu\n", r.candidates.size(), r.positive_distinct.size());
        for (int k : r.positive_distinct) {
            const SolutionBundle& b = r.candidates[static_cast<std::size_t>(k)];
            std::printf("  [%s] max u = %.6g, max v = %.6g, residual %.3g\n", b.interval_tag.c_str(), b.u.max(), b.v.max(),
                        b.residual());
        }
        if (!r.found) std::printf("second solution not found: %s\n", r.diagnostics.c_str());
    } catch (const Error& e) {
        std::fprintf(stderr, "%s: %s\n", to_string(e.kind()), e.what());
        return 1;
    }
}
