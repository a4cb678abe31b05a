#pragma once

#include <cmath>
#include <string>

#include "pqss/error.hpp"
#include "pqss/field.hpp"
#include "pqss/nonlinearity.hpp"

namespace pqss {

/// Exponents, parameters and weight fields of the coupled (p,q) system
///   -Delta_p u - |u|^{p-2} u = lambda1 a f(v) + mu1 alpha h(u)
///   -Delta_q v - |v|^{q-2} v = lambda2 b g(u) + mu2 beta gamma(v)
/// with homogeneous Dirichlet data.
struct ProblemParams {
    double p = 2.0;
    double q = 2.0;
    double lambda1 = 0.0, lambda2 = 0.0, mu1 = 0.0, mu2 = 0.0;
    Field a, b, alpha, beta;

    static ProblemParams with_constant_weights(const MeshPtr& mesh, double p, double q, double lambda1,
                                               double lambda2, double mu1, double mu2, double a = 1.0,
                                               double b = 1.0, double alpha = 1.0, double beta = 1.0)
    {
        ProblemParams params;
        params.p = p;
        params.q = q;
        params.lambda1 = lambda1;
        params.lambda2 = lambda2;
        params.mu1 = mu1;
        params.mu2 = mu2;
        params.a = Field::constant(mesh, a);
        params.b = Field::constant(mesh, b);
        params.alpha = Field::constant(mesh, alpha);
        params.beta = Field::constant(mesh, beta);
        params.validate();
        return params;
    }

    const MeshPtr& mesh() const { return a.mesh; }

    /// Minimum nodal values of the weights.
    WeightBounds lower_bounds() const { return {a.min(), b.min(), alpha.min(), beta.min()}; }

    double sum1() const { return lambda1 + mu1; }
    double sum2() const { return lambda2 + mu2; }

    /// Copy with (lambda_i, mu_i) rescaled so that lambda_i + mu_i = s_i, keeping the ratio.
    /// A zero template pair is split evenly.
    ProblemParams with_sums(double s1, double s2) const
    {
        ProblemParams out = *this;
        const auto split = [](double l, double m, double s, double& lo, double& mo) {
            const double total = l + m;
            if (total > 0.0) {
                lo = s * l / total;
                mo = s * m / total;
            } else {
                lo = 0.5 * s;
                mo = 0.5 * s;
            }
        };
        split(lambda1, mu1, s1, out.lambda1, out.mu1);
        split(lambda2, mu2, s2, out.lambda2, out.mu2);
        return out;
    }

    void validate() const
    {
        if (!(p > 1.0)) throw Error(ErrorKind::Config, "p must exceed 1", "params", "1 < p < inf");
        if (!(q > 1.0)) throw Error(ErrorKind::Config, "q must exceed 1", "params", "1 < q < inf");
        if (!std::isfinite(p) || !std::isfinite(q)) throw Error(ErrorKind::Config, "exponents must be finite", "params");
        if (lambda1 < 0.0 || lambda2 < 0.0 || mu1 < 0.0 || mu2 < 0.0)
            throw Error(ErrorKind::Config, "lambda and mu must be nonnegative", "params");
        for (const Field* w : {&a, &b, &alpha, &beta}) {
            if (!w->mesh) throw Error(ErrorKind::Config, "weight field missing", "params");
            if (w->mesh != a.mesh) throw Error(ErrorKind::MeshMismatch, "weights on different meshes", "params");
            if (!(w->min() > 0.0)) throw Error(ErrorKind::Config, "weights need positive minima", "params", "H1: positive weights");
        }
    }
};

} // namespace pqss
