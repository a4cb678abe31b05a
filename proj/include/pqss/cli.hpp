#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <condition_variable>
#include <cstdlib>
#include <deque>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "CLI11.hpp"

#include "pqss/config.hpp"
#include "pqss/iterate.hpp"
#include "pqss/report.hpp"

namespace pqss::cli {

/// Process exit status for each error class.
inline int exit_code(ErrorKind kind)
{
    switch (kind) {
    case ErrorKind::HypothesisFailure:
    case ErrorKind::FlatnessViolation:
    case ErrorKind::SpectralGap:
    case ErrorKind::UnboundedNonlinearity: return 2;
    case ErrorKind::LambdaTooSmall:
    case ErrorKind::ThresholdUnreachable: return 3;
    case ErrorKind::NonConvergence:
    case ErrorKind::StripFailure:
    case ErrorKind::DegenerateEigenfunction:
    case ErrorKind::SupersolutionSearchFailure:
    case ErrorKind::NoncomparabilityFailure:
    case ErrorKind::MonotonicityBreakdown:
    case ErrorKind::Domain: return 4;
    case ErrorKind::DomainTooLarge: return 5;
    case ErrorKind::Config:
    case ErrorKind::Usage:
    case ErrorKind::InvalidResolution:
    case ErrorKind::InvalidStrip:
    case ErrorKind::MeshMismatch:
    case ErrorKind::BoundaryCondition: return 1;
    }
    return 1;
}

struct Options {
    std::string command;
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::string grid;
    bool dump_mesh = false;
};

namespace detail {

namespace fs = std::filesystem;

inline std::pair<int, int> parse_grid(const std::string& g)
{
    const auto x = g.find('x');
    try {
        if (x != std::string::npos) {
            std::size_t used_a = 0, used_b = 0;
            const int a = std::stoi(g.substr(0, x), &used_a);
            const int b = std::stoi(g.substr(x + 1), &used_b);
            if (used_a == x && used_b == g.size() - x - 1 && a >= 1 && b >= 1) return {a, b};
        }
    } catch (const std::exception&) {
    }
    throw Error(ErrorKind::Usage, "--grid expects AxB with positive integers, got '" + g + "'", "cli");
}

/// Log-spaced grid between lo and hi (lo when count = 1).
inline std::vector<double> log_grid(double lo, double hi, int count)
{
    std::vector<double> out;
    for (int k = 0; k < count; ++k)
        out.push_back(count == 1 ? lo : lo * std::pow(hi / lo, static_cast<double>(k) / (count - 1)));
    return out;
}

/// Output directory plus the report, status and field writers.
class Run {
public:
    Run(const Options& o, const RunConfig& cfg) : opts_(o), cfg_(cfg), report_(o.command, cfg), dir_(cfg.output_dir)
    {
        fs::create_directories(dir_);
    }

    RunReport& report() { return report_; }
    const RunConfig& config() const { return cfg_; }
    const fs::path& dir() const { return dir_; }

    void field(const std::string& name, const Field& f)
    {
        if (!cfg_.write_fields) return;
        fs::create_directories(dir_ / "fields");
        std::ofstream out(dir_ / "fields" / (name + ".csv"));
        if (!out) throw Error(ErrorKind::Config, "cannot write field " + name, "output");
        write_field_csv(out, f);
    }

    MeshPtr mesh()
    {
        const Stopwatch t;
        MeshPtr m = pqss::detail::staged("mesh", [&] { return build_mesh(cfg_.domain); });
        report_.stage("mesh", {{"domain", to_string(m->domain())},
                               {"dimension", m->dimension()},
                               {"nodes", m->num_nodes()},
                               {"elements", m->num_elements()},
                               {"measure", m->domain_measure()}});
        if (opts_.dump_mesh) {
            std::ofstream out(dir_ / "mesh.txt");
            write_mesh_text(out, *m);
        }
        report_.timing("mesh", t.seconds());
        return m;
    }

    void finish(const std::vector<std::string>& expected)
    {
        report_.close(expected);
        report_.write((dir_ / "report.json").string());
        std::ofstream status(dir_ / "status");
        status << report_.status() << "\n";
    }

private:
    Options opts_;
    RunConfig cfg_;
    RunReport report_;
    fs::path dir_;
};

inline SpectralData spectral_stage(Run& run, const PipelineInput& in, bool need_torsion = true)
{
    const MeshPtr& mesh = in.params.mesh();
    SpectralData s;
    const Stopwatch t;
    pqss::detail::staged("eigen", [&] {
        s.eig_p = first_eigenpair(mesh, in.params.p, in.eigen);
        s.eig_q = in.params.q == in.params.p ? s.eig_p : first_eigenpair(mesh, in.params.q, in.eigen);
        return 0;
    });
    run.report().stage("eigen", {{"p", to_json(s.eig_p)}, {"q", to_json(s.eig_q)}});
    run.report().timing("eigen", t.seconds());
    if (need_torsion) {
        const Stopwatch tt;
        pqss::detail::staged("torsion", [&] {
            s.tor_p = torsion_function(mesh, in.params.p, in.iterate.solver);
            s.tor_q = in.params.q == in.params.p ? s.tor_p : torsion_function(mesh, in.params.q, in.iterate.solver);
            return 0;
        });
        run.report().stage("torsion", {{"p", to_json(s.tor_p)}, {"q", to_json(s.tor_q)}});
        run.report().timing("torsion", tt.seconds());
    }
    return s;
}

inline HypothesisReport hypothesis_stage(Run& run, const PipelineInput& in)
{
    const HypothesisReport rep = check_hypotheses(in.nl, in.params.lower_bounds(), in.params.p, in.params.q);
    run.report().stage("hypotheses", to_json(rep));
    return rep;
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

inline void cmd_eigen(Run& run)
{
    const MeshPtr mesh = run.mesh();
    const PipelineInput in = build_pipeline_input(run.config(), mesh);
    const SpectralData s = spectral_stage(run, in, false);
    run.field("phi_p", s.eig_p.phi);
    run.field("phi_q", s.eig_q.phi);
}

inline void cmd_torsion(Run& run)
{
    const MeshPtr mesh = run.mesh();
    const PipelineInput in = build_pipeline_input(run.config(), mesh);
    const Stopwatch t;
    TorsionData tp, tq;
    pqss::detail::staged("torsion", [&] {
        tp = torsion_function(mesh, in.params.p, in.iterate.solver);
        tq = in.params.q == in.params.p ? tp : torsion_function(mesh, in.params.q, in.iterate.solver);
        return 0;
    });
    run.report().stage("torsion", {{"p", to_json(tp)}, {"q", to_json(tq)}});
    run.report().timing("torsion", t.seconds());
    run.field("omega_p", tp.omega);
    run.field("omega_q", tq.omega);
}

inline void cmd_check_hypotheses(Run& run, std::ostream& out)
{
    const MeshPtr mesh = run.mesh();
    const PipelineInput in = build_pipeline_input(run.config(), mesh);
    const HypothesisReport rep = hypothesis_stage(run, in);
    const FlatnessReport flat = check_flatness(in.nl, in.params.p, in.params.q);
    run.report().stage("flatness", {{"passed", flat.passed}, {"detail", flat.detail}});
    out << to_json(rep).dump(2) << "\n";
    pqss::detail::require_hypotheses(rep);
}

inline void cmd_construct(Run& run)
{
    const MeshPtr mesh = run.mesh();
    const PipelineInput in = build_pipeline_input(run.config(), mesh);
    const HypothesisReport rep = hypothesis_stage(run, in);
    if (in.check_hypotheses) pqss::detail::require_hypotheses(rep);
    const SpectralData s = spectral_stage(run, in);
    const Stopwatch t;
    if (in.subsolution == SubsolutionKind::Zero) {
        const OrderedPair pair = pqss::detail::staged("construct", [&] {
            return construct_zero_ordered_pair(in.params, s.tor_p, s.tor_q, in.nl, in.construction);
        });
        run.report().skip("k0", "zero subsolution");
        run.report().skip("threshold", "zero subsolution");
        run.report().stage("parameters", to_json(in.params));
        run.report().stage("construct", to_json(pair));
        run.report().timing("construct", t.seconds());
        run.field("super_u", pair.super_u);
        run.field("super_v", pair.super_v);
        return;
    }
    const double k0 = pqss::detail::staged("k0", [&] { return lower_bound_k0(in.nl, in.params.lower_bounds()); });
    run.report().stage("k0", {{"k0", k0}});
    std::optional<ThresholdResult> thr;
    const ProblemParams prm = pqss::detail::resolve_parameters(in, s, in.nl, k0, thr);
    if (thr) run.report().stage("threshold", to_json(*thr));
    else run.report().skip("threshold", "fixed parameters");
    run.report().stage("parameters", to_json(prm));
    const OrderedPair pair = pqss::detail::staged("construct", [&] {
        return construct_ordered_pair(prm, s.eig_p, s.eig_q, s.tor_p, s.tor_q, in.nl, k0, in.construction);
    });
    run.report().stage("construct", to_json(pair));
    run.report().timing("construct", t.seconds());
    run.field("sub_u", pair.sub_u);
    run.field("sub_v", pair.sub_v);
    run.field("super_u", pair.super_u);
    run.field("super_v", pair.super_v);
}

inline void cmd_solve(Run& run)
{
    const MeshPtr mesh = run.mesh();
    const PipelineInput in = build_pipeline_input(run.config(), mesh);
    const HypothesisReport rep = hypothesis_stage(run, in);
    if (in.check_hypotheses) pqss::detail::require_hypotheses(rep);
    const SpectralData s = spectral_stage(run, in);
    const Stopwatch t;
    const ExistenceResult r = solve_existence(in, &s);
    run.report().timing("pipeline", t.seconds());
    if (in.subsolution == SubsolutionKind::Zero) {
        run.report().skip("k0", "zero subsolution");
        run.report().skip("threshold", "zero subsolution");
    } else {
        run.report().stage("k0", {{"k0", r.k0}});
        if (r.threshold) run.report().stage("threshold", to_json(*r.threshold));
        else run.report().skip("threshold", "fixed parameters");
    }
    run.report().stage("parameters", to_json(r.params));
    run.report().stage("construct", to_json(r.pair));
    Json sol = to_json(r.bundle);
    sol["within_pair"] = pqss::detail::nodally_below(r.pair.sub_u, r.bundle.u, 1e-10) &&
                         pqss::detail::nodally_below(r.bundle.u, r.pair.super_u, 1e-10) &&
                         pqss::detail::nodally_below(r.pair.sub_v, r.bundle.v, 1e-10) &&
                         pqss::detail::nodally_below(r.bundle.v, r.pair.super_v, 1e-10);
    run.report().stage("iterate", sol);
    run.field("u", r.bundle.u);
    run.field("v", r.bundle.v);
    run.field("sub_u", r.pair.sub_u);
    run.field("sub_v", r.pair.sub_v);
}

inline void cmd_multiplicity(Run& run)
{
    const MeshPtr mesh = run.mesh();
    const RunConfig& cfg = run.config();
    const PipelineInput in = build_pipeline_input(cfg, mesh);
    const HypothesisReport rep = hypothesis_stage(run, in);
    const FlatnessReport flat = check_flatness(in.nl, in.params.p, in.params.q);
    run.report().stage("flatness", {{"passed", flat.passed}, {"detail", flat.detail}});
    if (in.check_hypotheses) pqss::detail::require_hypotheses(rep);
    if (!flat.passed) throw Error(ErrorKind::FlatnessViolation, flat.detail, "flatness", "flatness at 0");
    const SpectralData s = spectral_stage(run, in);
    const Stopwatch t;
    const MultiplicityResult r = solve_multiplicity(in, cfg.multiplicity, &s);
    run.report().timing("pipeline", t.seconds());
    run.report().stage("k0", {{"k0_shifted", r.k0_shifted}});
    if (r.threshold) run.report().stage("threshold", to_json(*r.threshold));
    else run.report().skip("threshold", "fixed parameters");
    run.report().stage("parameters", to_json(r.params));
    run.report().stage("omega", to_json(r.omega));
    run.report().stage("strict_pair", to_json(r.strict));
    run.report().stage("supersolution", to_json(r.z));
    Json cands = Json::array();
    for (std::size_t i = 0; i < r.candidates.size(); ++i) {
        Json c = to_json(r.candidates[i]);
        c["below_zeta"] = r.localization[i].below_zeta;
        c["above_omega"] = r.localization[i].above_omega;
        cands.push_back(c);
        run.field("candidate" + std::to_string(i) + "_u", r.candidates[i].u);
        run.field("candidate" + std::to_string(i) + "_v", r.candidates[i].v);
    }
    run.report().stage("candidates", cands);
    run.report().stage("multiplicity", {{"found", r.found},
                                        {"positive_distinct", r.positive_distinct},
                                        {"distances", r.distances},
                                        {"scan_amplitude", r.scan_amplitude},
                                        {"newton_starts", r.newton_starts},
                                        {"diagnostics", r.diagnostics}});
    run.field("omega_u", r.omega.u);
    run.field("omega_v", r.omega.v);
    if (!r.found) run.report().status("multiplicity-not-found");
}

// ---------------------------------------------------------------------------
// Sweep: grid over (lambda1 + mu1, lambda2 + mu2), append-only CSV, resumable.
// ---------------------------------------------------------------------------

inline const char* sweep_header() { return "i,j,sum1,sum2,status,iterations,relative_residual,u_max,v_max,positive_solutions"; }

inline std::set<std::pair<int, int>> completed_points(const fs::path& csv)
{
    std::set<std::pair<int, int>> done;
    std::ifstream in(csv);
    std::string line;
    if (!std::getline(in, line)) return done;
    if (line != sweep_header()) throw Error(ErrorKind::Config, "existing " + csv.string() + " has a different header", "sweep");
    while (std::getline(in, line)) {
        std::stringstream ss(line);
        std::string a, b;
        // a torn final line (interrupted write) has fewer than 10 columns; recompute it
        if (std::count(line.begin(), line.end(), ',') != 9) continue;
        std::getline(ss, a, ',');
        std::getline(ss, b, ',');
        done.insert({std::stoi(a), std::stoi(b)});
    }
    return done;
}

inline std::string sweep_point(const PipelineInput& base, const SpectralData& s, const RunConfig& cfg, int i, int j,
                               double s1, double s2)
{
    PipelineInput in = base;
    in.mode = ParameterMode::Fixed;
    in.params = base.params.with_sums(s1, s2);
    std::ostringstream row;
    row.precision(17);
    row << i << ',' << j << ',' << s1 << ',' << s2 << ',';
    try {
        if (cfg.sweep.kind == SweepKind::Existence) {
            const ExistenceResult r = solve_existence(in, &s);
            row << "OK," << r.bundle.iterations << ',' << r.bundle.residual() << ',' << r.bundle.u.max() << ','
                << r.bundle.v.max() << ',' << (r.bundle.positive() ? 1 : 0);
        } else {
            const MultiplicityResult r = solve_multiplicity(in, cfg.multiplicity, &s);
            int iters = 0;
            double res = 0.0, umax = 0.0, vmax = 0.0;
            for (int k : r.positive_distinct) {
                const SolutionBundle& c = r.candidates[static_cast<std::size_t>(k)];
                iters += c.iterations;
                res = std::max(res, c.residual());
                umax = std::max(umax, c.u.max());
                vmax = std::max(vmax, c.v.max());
            }
            row << (r.found ? "OK" : "multiplicity-not-found") << ',' << iters << ',' << res << ',' << umax << ','
                << vmax << ',' << r.positive_distinct.size();
        }
    } catch (const Error& e) {
        row << to_string(e.kind()) << ",0,nan,nan,nan,0";
    }
    return row.str();
}

inline int worker_count(std::size_t jobs)
{
    int n = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    if (const char* env = std::getenv("PQSS_THREADS")) {
        try {
            n = std::max(1, std::stoi(env));
        } catch (const std::exception&) {
            throw Error(ErrorKind::Usage, std::string("PQSS_THREADS must be a positive integer, got '") + env + "'", "cli");
        }
    }
    return static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(n), std::max<std::size_t>(jobs, 1)));
}

inline void cmd_sweep(Run& run, const Options& o)
{
    RunConfig cfg = run.config();
    if (!o.grid.empty()) std::tie(cfg.sweep.rows, cfg.sweep.cols) = parse_grid(o.grid);
    const MeshPtr mesh = run.mesh();
    const PipelineInput in = build_pipeline_input(cfg, mesh);
    const HypothesisReport rep = hypothesis_stage(run, in);
    if (in.check_hypotheses) pqss::detail::require_hypotheses(rep);
    const SpectralData s = spectral_stage(run, in);

    const std::vector<double> g1 = log_grid(cfg.sweep.sum1_min, cfg.sweep.sum1_max, cfg.sweep.rows);
    const std::vector<double> g2 = log_grid(cfg.sweep.sum2_min, cfg.sweep.sum2_max, cfg.sweep.cols);
    const fs::path csv = run.dir() / "sweep.csv";
    const std::set<std::pair<int, int>> done = completed_points(csv);
    std::vector<std::pair<int, int>> todo;
    for (int i = 0; i < cfg.sweep.rows; ++i)
        for (int j = 0; j < cfg.sweep.cols; ++j)
            if (!done.count({i, j})) todo.emplace_back(i, j);

    const bool fresh = done.empty() && (!fs::exists(csv) || fs::file_size(csv) == 0);
    std::ofstream out(csv, std::ios::app);
    if (!out) throw Error(ErrorKind::Config, "cannot open " + csv.string(), "sweep");
    if (fresh) out << sweep_header() << "\n" << std::flush;

    // Workers compute grid points; this thread is the only writer.
    const Stopwatch t;
    std::mutex mtx;
    std::condition_variable cv;
    std::deque<std::string> ready;
    std::atomic<std::size_t> next{0};
    std::size_t finished_workers = 0;
    const int workers = worker_count(todo.size());
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t k; (k = next.fetch_add(1)) < todo.size();) {
                const auto [i, j] = todo[k];
                std::string line = sweep_point(in, s, cfg, i, j, g1[static_cast<std::size_t>(i)], g2[static_cast<std::size_t>(j)]);
                std::lock_guard<std::mutex> lock(mtx);
                ready.push_back(std::move(line));
                cv.notify_one();
            }
            std::lock_guard<std::mutex> lock(mtx);
            ++finished_workers;
            cv.notify_one();
        });
    std::size_t written = 0, feasible = 0;
    for (;;) {
        std::unique_lock<std::mutex> lock(mtx);
        cv.wait(lock, [&] { return !ready.empty() || finished_workers == pool.size(); });
        if (ready.empty()) break;
        const std::string line = std::move(ready.front());
        ready.pop_front();
        lock.unlock();
        out << line << "\n" << std::flush;
        ++written;
        if (line.find(",OK,") != std::string::npos) ++feasible;
    }
    for (auto& th : pool) th.join();

    run.report().stage("sweep", {{"kind", to_string(cfg.sweep.kind)},
                                 {"rows", cfg.sweep.rows},
                                 {"cols", cfg.sweep.cols},
                                 {"sum1", g1},
                                 {"sum2", g2},
                                 {"computed", written},
                                 {"resumed", done.size()},
                                 {"feasible_computed", feasible},
                                 {"file", "sweep.csv"}});
    run.report().timing("sweep", t.seconds());
    run.report().timing("sweep_workers", workers);
}

inline std::vector<std::string> expected_stages(const std::string& cmd)
{
    if (cmd == "eigen") return {"mesh", "eigen"};
    if (cmd == "torsion") return {"mesh", "torsion"};
    if (cmd == "check-hypotheses") return {"mesh", "hypotheses", "flatness"};
    if (cmd == "construct") return {"mesh", "hypotheses", "eigen", "torsion", "k0", "threshold", "parameters", "construct"};
    if (cmd == "solve")
        return {"mesh", "hypotheses", "eigen", "torsion", "k0", "threshold", "parameters", "construct", "iterate"};
    if (cmd == "multiplicity")
        return {"mesh",       "hypotheses", "flatness",    "eigen",         "torsion",    "k0",
                "threshold",  "parameters", "omega",       "strict_pair",   "supersolution", "candidates",
                "multiplicity"};
    return {"mesh", "hypotheses", "eigen", "torsion", "sweep"};
}

} // namespace detail

/// Parses argv, runs one subcommand and returns the process exit status.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr)
{
    CLI::App app{"Sub/supersolution construction and monotone iteration for coupled (p,q)-Laplacian systems", "pqss"};
    app.require_subcommand(1, 1);
    Options o;
    const std::vector<std::pair<const char*, const char*>> commands = {
        {"eigen", "first eigenpair and strip constants for p and q"},
        {"torsion", "torsion functions for p and q"},
        {"check-hypotheses", "evaluate H1-H4 and flatness; prints the report as JSON"},
        {"construct", "build the ordered sub/supersolution pair"},
        {"solve", "full existence pipeline with monotone iteration"},
        {"multiplicity", "search for two distinct positive solutions"},
        {"sweep", "existence or multiplicity outcomes over a parameter grid"}};
    std::uint64_t seed = 0;
    for (const auto& [name, help] : commands) {
        CLI::App* sub = app.add_subcommand(name, help);
        sub->add_option("--config", o.config, "run configuration (TOML)")->required();
        sub->add_option("--out", o.out, "output directory (overrides [output] dir)");
        sub->add_option("--seed", seed, "eigen-solver restart seed");
        sub->add_option("--grid", o.grid, "sweep grid AxB");
        sub->add_flag("--dump-mesh", o.dump_mesh, "write mesh.txt");
        sub->callback([&o, n = std::string(name)] { o.command = n; });
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 1;
    }
    for (CLI::App* sub : app.get_subcommands())
        if (sub->count("--seed")) o.seed = seed;

    RunConfig cfg;
    try {
        cfg = load_config(o.config);
        if (!o.out.empty()) cfg.output_dir = o.out;
        if (o.seed) cfg.seed = cfg.eigen.seed = *o.seed;
        if (!o.grid.empty() && o.command != "sweep")
            throw Error(ErrorKind::Usage, "--grid only applies to sweep", "cli");
    } catch (const Error& e) {
        err << "pqss: " << e.what() << "\n";
        return exit_code(e.kind());
    }

    std::optional<detail::Run> run_state;
    try {
        run_state.emplace(o, cfg);
    } catch (const std::exception& e) {
        err << "pqss: cannot prepare output directory: " << e.what() << "\n";
        return 1;
    }
    detail::Run& r = *run_state;
    const Stopwatch total;
    int code = 0;
    try {
        if (o.command == "eigen") detail::cmd_eigen(r);
        else if (o.command == "torsion") detail::cmd_torsion(r);
        else if (o.command == "check-hypotheses") detail::cmd_check_hypotheses(r, out);
        else if (o.command == "construct") detail::cmd_construct(r);
        else if (o.command == "solve") detail::cmd_solve(r);
        else if (o.command == "multiplicity") detail::cmd_multiplicity(r);
        else detail::cmd_sweep(r, o);
    } catch (const Error& e) {
        r.report().fail(e);
        err << "pqss: " << e.what() << "\n";
        code = exit_code(e.kind());
    } catch (const std::exception& e) {
        r.report().fail(Error(ErrorKind::Usage, e.what(), o.command));
        err << "pqss: " << e.what() << "\n";
        code = 1;
    }
    r.report().timing("total", total.seconds());
    try {
        r.finish(detail::expected_stages(o.command));
    } catch (const std::exception& e) {
        err << "pqss: " << e.what() << "\n";
        return code ? code : 1;
    }
    if (code == 0) out << "status: " << r.report().status() << " (" << (r.dir() / "report.json").string() << ")\n";
    return code;
}

} // namespace pqss::cli
