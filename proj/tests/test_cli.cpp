#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "pqss/cli.hpp"
#include "pqss/config.hpp"

using namespace pqss;
namespace fs = std::filesystem;

namespace {

const std::string kMinimal = R"(
[domain]
kind = "interval"
n = 64

[problem]
p = 2
q = 2

[f]
kind = "polynomial"
terms = [[1.0, 0.5]]
offset = 1.0

[g]
terms = [[1.0, 0.5]]
offset = 1.0

[h]
terms = [[1.0, 0.5]]
offset = 1.0

[gamma]
terms = [[1.0, 0.5]]
offset = 1.0
)";

std::string config_path(const std::string& name) { return std::string(PQSS_SOURCE_DIR) + "/configs/" + name; }

fs::path scratch(const std::string& name)
{
    const fs::path p = fs::temp_directory_path() / ("pqss_test_" + name);
    fs::remove_all(p);
    return p;
}

int run_cli(std::vector<std::string> args, std::string* out_text = nullptr)
{
    args.insert(args.begin(), "pqss");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    if (out_text) *out_text = out.str();
    return code;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string config_error(const std::string& text)
{
    try {
        parse_config(text);
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Config);
        return e.what();
    }
    FAIL("expected a config error");
    return {};
}

} // namespace

TEST_CASE("minimal config gets defaults", "[config]")
{
    const RunConfig c = parse_config(kMinimal);
    CHECK(c.domain.kind == DomainKind::Interval);
    CHECK(c.domain.n == 64);
    CHECK(c.mode == ParameterMode::AutoThreshold);
    CHECK(c.threshold_factor == 1.0);
    CHECK(c.a.value == 1.0);
    CHECK(c.solver.quadrature_degree == 3);
    CHECK(c.iterate.max_iterations == 500);
    CHECK(c.check_hypotheses);
    CHECK(c.nl.f.terms.size() == 1);
    CHECK(c.nl.f.offset == 1.0);
}

TEST_CASE("validation names the offending field", "[config]")
{
    std::string text = kMinimal;
    text.replace(text.find("p = 2"), 5, "p = 1.0");
    CHECK(config_error(text).find("p must exceed 1") != std::string::npos);

    std::string unknown = kMinimal;
    unknown.replace(unknown.find("q = 2"), 5, "q = 2\nlambda3 = 4");
    const std::string msg = config_error(unknown);
    CHECK(msg.find("lambda3") != std::string::npos);
    CHECK(msg.find("line 9") != std::string::npos);

    CHECK(config_error(kMinimal + "\n[extra]\nx = 1\n").find("[extra]") != std::string::npos);
    CHECK(config_error("[domain]\nn = 1\n" + kMinimal.substr(kMinimal.find("[problem]"))).find("n") != std::string::npos);
}

TEST_CASE("parse errors report line and column", "[config]")
{
    CHECK(config_error("[domain]\nn = 64 x\n").find("line 2, column 8") != std::string::npos);
    CHECK(config_error("[domain\n").find("line 1") != std::string::npos);
    CHECK(config_error("[domain]\nkind = \"interval\nn = 3\n").find("unterminated string") != std::string::npos);
    CHECK(config_error("[domain]\nn = 64\nn = 32\n").find("duplicate key") != std::string::npos);
}

TEST_CASE("missing nonlinearity section is reported", "[config]")
{
    const std::string text = kMinimal.substr(0, kMinimal.find("[gamma]"));
    CHECK(config_error(text).find("[gamma]") != std::string::npos);
}

TEST_CASE("canonical form round-trips", "[config]")
{
    for (const char* name : {"sqrt_semipositone.toml", "sqrt_semipositone_p3.toml", "piecewise_flat.toml", "counterexample.toml", "linear.toml"}) {
        const RunConfig c = load_config(config_path(name));
        const std::string canon = to_canonical(c);
        const RunConfig back = parse_config(canon);
        CHECK(to_canonical(back) == canon);
        CHECK(back.p == c.p);
        CHECK(back.nl.f.kind == c.nl.f.kind);
        CHECK(back.construction.super_cap == c.construction.super_cap);
    }
    RunConfig odd = parse_config(kMinimal);
    odd.p = 2.0 / 3.0 + 1.0;
    odd.solver.eps_end = 1.2345678901234567e-13;
    odd.nl.g = NonlinearitySpec::custom_table({{0.0, 0.0}, {0.1, 0.3}, {7.0, 9.5}}, 0.25, false);
    odd.output_dir = "dir with \"quotes\"";
    const RunConfig back = parse_config(to_canonical(odd));
    CHECK(back.p == odd.p);
    CHECK(back.solver.eps_end == odd.solver.eps_end);
    CHECK(back.nl.g.table == odd.nl.g.table);
    CHECK_FALSE(back.nl.g.monotone);
    CHECK(back.output_dir == odd.output_dir);
}

TEST_CASE("exit codes per error class", "[cli]")
{
    CHECK(cli::exit_code(ErrorKind::HypothesisFailure) == 2);
    CHECK(cli::exit_code(ErrorKind::LambdaTooSmall) == 3);
    CHECK(cli::exit_code(ErrorKind::NonConvergence) == 4);
    CHECK(cli::exit_code(ErrorKind::DomainTooLarge) == 5);
    CHECK(cli::exit_code(ErrorKind::Config) == 1);
    CHECK(run_cli({"frobnicate"}) == 1);
    CHECK(run_cli({"solve"}) == 1);
    CHECK(run_cli({"solve", "--config", "/nonexistent.toml"}) == 1);
}

TEST_CASE("solve writes report, fields and status", "[cli]")
{
    const fs::path out = scratch("solve");
    REQUIRE(run_cli({"solve", "--config", config_path("sqrt_semipositone.toml"), "--out", out.string(), "--dump-mesh"}) == 0);
    CHECK(slurp(out / "status") == "OK\n");
    CHECK(fs::exists(out / "fields" / "u.csv"));
    CHECK(fs::exists(out / "mesh.txt"));
    const Json rep = Json::parse(slurp(out / "report.json"));
    CHECK(rep["stages"]["iterate"]["positive"] == true);
    CHECK(rep["stages"]["iterate"]["relative_residual"].get<double>() < 1e-8);
    CHECK(rep["stages"]["construct"]["all_passed"] == true);
    CHECK(rep.contains("timings"));
    fs::remove_all(out);
}

TEST_CASE("check-hypotheses on the critical coupling exits 2 and marks H3", "[cli]")
{
    const fs::path out = scratch("ce");
    std::string text;
    CHECK(run_cli({"check-hypotheses", "--config", config_path("counterexample.toml"), "--out", out.string()}, &text) == 2);
    const Json printed = Json::parse(text);
    CHECK(printed["H3"]["passed"] == false);
    CHECK(slurp(out / "status") == "hypothesis-failure\n");
    const Json rep = Json::parse(slurp(out / "report.json"));
    CHECK(rep["error"]["stage"] == "hypotheses");
    fs::remove_all(out);
}

TEST_CASE("a too large domain exits 5", "[cli]")
{
    const fs::path dir = scratch("large");
    fs::create_directories(dir);
    std::string text = slurp(config_path("linear.toml"));
    text.replace(text.find("n = 128"), 7, "n = 64\nlength = 4.0");
    std::ofstream(dir / "large.toml") << text;
    CHECK(run_cli({"construct", "--config", (dir / "large.toml").string(), "--out", (dir / "out").string()}) == 5);
    CHECK(slurp(dir / "out" / "status") == "domain-too-large\n");
    fs::remove_all(dir);
}

TEST_CASE("sweep is append-only and resumes", "[cli][sweep]")
{
    const fs::path out = scratch("sweep");
    REQUIRE(run_cli({"sweep", "--config", config_path("sqrt_semipositone.toml"), "--out", out.string(), "--grid", "3x2"}) == 0);
    std::string csv = slurp(out / "sweep.csv");
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 7);
    // drop the last row, as an interrupted run would
    csv.erase(csv.rfind('\n', csv.size() - 2) + 1);
    std::ofstream(out / "sweep.csv") << csv;
    REQUIRE(run_cli({"sweep", "--config", config_path("sqrt_semipositone.toml"), "--out", out.string(), "--grid", "3x2"}) == 0);
    const std::string again = slurp(out / "sweep.csv");
    CHECK(std::count(again.begin(), again.end(), '\n') == 7);
    const Json rep = Json::parse(slurp(out / "report.json"));
    CHECK(rep["stages"]["sweep"]["computed"] == 1);
    CHECK(rep["stages"]["sweep"]["resumed"] == 5);
    CHECK(run_cli({"sweep", "--config", config_path("sqrt_semipositone.toml"), "--out", out.string(), "--grid", "3by2"}) == 1);
    fs::remove_all(out);
}

TEST_CASE("report is byte-identical across runs apart from timings", "[cli][determinism]")
{
    const fs::path out = scratch("det");
    const auto strip = [&] {
        Json j = Json::parse(slurp(out / "report.json"));
        j.erase("timings");
        return j.dump(2);
    };
    REQUIRE(run_cli({"solve", "--config", config_path("sqrt_semipositone.toml"), "--out", out.string(), "--seed", "7"}) == 0);
    const std::string first = strip();
    REQUIRE(run_cli({"solve", "--config", config_path("sqrt_semipositone.toml"), "--out", out.string(), "--seed", "7"}) == 0);
    CHECK(strip() == first);
    fs::remove_all(out);
}
