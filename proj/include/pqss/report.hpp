#pragma once

#include <chrono>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "pqss/config.hpp"
#include "pqss/iterate.hpp"

namespace pqss {

using Json = nlohmann::json;

// JSON summaries of the pipeline objects. Fields themselves go to CSV; only scalars land here.

inline Json to_json(const EigenData& e)
{
    return {{"r", e.r},         {"sigma", e.sigma}, {"m", e.m},
            {"m_linear", e.m_linear}, {"eta", e.eta}, {"delta", e.delta},
            {"iterations", e.iterations}, {"restart_sigmas", e.restart_sigmas}};
}

inline Json to_json(const TorsionData& t) { return {{"r", t.r}, {"nu", t.nu}, {"omega_max", t.omega.max()}}; }

inline Json to_json(const HypothesisCheck& c) { return {{"passed", c.passed}, {"detail", c.detail}}; }

inline Json to_json(const HypothesisReport& h)
{
    return {{"method", to_string(h.method)},
            {"all_passed", h.all_passed()},
            {"H1", to_json(h.h1)},
            {"H2", to_json(h.h2)},
            {"H3", to_json(h.h3)},
            {"H4", to_json(h.h4)},
            {"weight_minima", {{"a", h.bounds.a1}, {"b", h.bounds.b1}, {"alpha", h.bounds.alpha1}, {"beta", h.bounds.beta1}}}};
}

inline Json to_json(const SubSuperReport& r)
{
    return {{"side", to_string(r.side)},   {"component", to_string(r.component)}, {"violation", r.violation},
            {"scale", r.scale},            {"tolerance", r.tolerance},            {"passed", r.passed}};
}

inline Json to_json(const std::vector<SubSuperReport>& v)
{
    Json out = Json::array();
    for (const auto& r : v) out.push_back(to_json(r));
    return out;
}

inline Json to_json(const CommonStrip& s) { return {{"m", s.m}, {"eta", s.eta}, {"delta", s.delta}}; }

inline Json to_json(const ThresholdResult& t)
{
    return {{"sum1", t.sum1}, {"sum2", t.sum2}, {"fail_sum1", t.fail_sum1}, {"fail_sum2", t.fail_sum2}, {"doublings", t.doublings}};
}

inline Json to_json(const ProblemParams& p)
{
    return {{"p", p.p}, {"q", p.q}, {"lambda1", p.lambda1}, {"lambda2", p.lambda2}, {"mu1", p.mu1}, {"mu2", p.mu2}};
}

inline Json to_json(const OrderedPair& o)
{
    return {{"C", o.C},
            {"k0", o.k0},
            {"sub_margin", o.sub_margin},
            {"strip", to_json(o.strip)},
            {"sub_max", {o.sub_u.max(), o.sub_v.max()}},
            {"super_max", {o.super_u.max(), o.super_v.max()}},
            {"ordered", o.ordered},
            {"all_passed", o.all_passed()},
            {"certificates", to_json(o.certificates)}};
}

inline Json to_json(const Supersolution& s)
{
    return {{"C", s.C},         {"A", s.A},           {"B", s.B},
            {"g_top", s.g_top}, {"doublings", s.doublings}, {"certificates", to_json(s.certificates)}};
}

inline Json to_json(const StrictPair& s)
{
    return {{"rho", s.rho},
            {"theta", s.theta},
            {"C1", s.C1},
            {"C2", s.C2},
            {"noncomparability", s.noncomparability},
            {"halvings", s.halvings},
            {"G_p_at_rho", s.G_p_at_rho},
            {"G_q_at_rho", s.G_q_at_rho},
            {"margin_u", s.margin_u},
            {"margin_v", s.margin_v},
            {"certificates", to_json(s.certificates)}};
}

inline Json to_json(const SolutionBundle& b)
{
    const std::size_t n = b.history.size();
    const std::vector<double> tail(b.history.begin() + static_cast<std::ptrdiff_t>(n > 5 ? n - 5 : 0), b.history.end());
    return {{"interval_tag", b.interval_tag},
            {"iterations", b.iterations},
            {"converged", b.converged},
            {"residual_norms", {b.residual_u, b.residual_v}},
            {"residual_scales", {b.residual_scale_u, b.residual_scale_v}},
            {"relative_residual", b.residual()},
            {"positivity_min", b.positivity_min},
            {"positive", b.positive()},
            {"u_max", b.u.max()},
            {"v_max", b.v.max()},
            {"history_tail", tail}};
}

inline Json to_json(const Error& e)
{
    Json j = {{"class", to_string(e.kind())}, {"message", e.detail()}, {"stage", e.stage()}, {"condition", e.condition()}};
    if (e.iteration >= 0) j["iteration"] = e.iteration;
    return j;
}

/// Run report: config echo, stage outputs and status. Timings live in their own
/// top-level section so the rest is reproducible byte for byte.
class RunReport {
public:
    RunReport(std::string command, const RunConfig& cfg) : command_(std::move(command))
    {
        body_["command"] = command_;
        body_["config"] = to_canonical(cfg);
        body_["stages"] = Json::object();
        body_["status"] = "OK";
        timings_ = Json::object();
    }

    void stage(const std::string& name, Json value) { body_["stages"][name] = std::move(value); }
    void skip(const std::string& name, const std::string& reason)
    {
        if (!body_["stages"].contains(name)) body_["stages"][name] = {{"skipped", reason}};
    }
    void timing(const std::string& name, double seconds) { timings_[name] = seconds; }

    void fail(const Error& e)
    {
        body_["status"] = to_string(e.kind());
        body_["error"] = to_json(e);
    }
    void status(const std::string& s) { body_["status"] = s; }
    std::string status() const { return body_["status"].get<std::string>(); }

    /// Marks every expected stage that produced nothing.
    void close(const std::vector<std::string>& expected)
    {
        const bool failed = body_.contains("error");
        const std::string where = failed ? body_["error"]["stage"].get<std::string>() : std::string();
        for (const auto& s : expected)
            skip(s, failed ? "not reached: failure in stage '" + where + "'" : "not part of '" + command_ + "'");
    }

    Json document() const
    {
        Json d = body_;
        d["timings"] = timings_;
        return d;
    }

    void write(const std::string& path) const
    {
        std::ofstream out(path);
        if (!out) throw Error(ErrorKind::Config, "cannot write " + path, "report");
        out << document().dump(2) << "\n";
    }

private:
    std::string command_;
    Json body_;
    Json timings_;
};

/// Wall-clock stopwatch for the timings section.
class Stopwatch {
public:
    Stopwatch() : start_(std::chrono::steady_clock::now()) {}
    double seconds() const
    {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

} // namespace pqss
