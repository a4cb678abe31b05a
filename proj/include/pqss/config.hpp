#pragma once

#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "pqss/error.hpp"
#include "pqss/iterate.hpp"
#include "pqss/mesh.hpp"
#include "pqss/nonlinearity.hpp"
#include "pqss/problem.hpp"

namespace pqss {

// ---------------------------------------------------------------------------
// TOML subset: [section] headers, key = value, # comments. Values are numbers,
// booleans, double-quoted strings and (nested, possibly multi-line) arrays.
// ---------------------------------------------------------------------------
namespace toml_lite {

struct Value {
    enum class Type { Number, Boolean, String, Array } type = Type::Number;
    double number = 0.0;
    bool boolean = false;
    std::string string;
    std::vector<Value> array;
    int line = 0, column = 0;
};

struct Entry {
    Value value;
    int line = 0, column = 0;
};

/// section name ("" for the top level) -> key -> entry
using Document = std::map<std::string, std::map<std::string, Entry>>;

class Parser {
public:
    explicit Parser(const std::string& text) : s_(text) {}

    Document parse()
    {
        Document doc;
        doc[""];
        std::string section;
        std::set<std::string> seen_sections;
        for (;;) {
            skip_blank_lines();
            if (eof()) break;
            if (peek() == '[') {
                const int l = line_, c = col_;
                advance();
                skip_spaces();
                const std::string name = bare_word("section name");
                skip_spaces();
                expect(']');
                end_of_statement();
                if (!seen_sections.insert(name).second) fail("duplicate section [" + name + "]", l, c);
                section = name;
                doc[section];
                continue;
            }
            const int l = line_, c = col_;
            const std::string key = bare_word("key");
            skip_spaces();
            expect('=');
            skip_spaces();
            Value v = value();
            end_of_statement();
            auto& table = doc[section];
            if (table.count(key)) fail("duplicate key '" + key + "'", l, c);
            table[key] = Entry{std::move(v), l, c};
        }
        return doc;
    }

private:
    [[noreturn]] void fail(const std::string& what, int line, int column) const
    {
        throw Error(ErrorKind::Config,
                    "parse error at line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + what,
                    "config");
    }
    [[noreturn]] void fail(const std::string& what) const { fail(what, line_, col_); }

    bool eof() const { return pos_ >= s_.size(); }
    char peek() const { return eof() ? '\0' : s_[pos_]; }
    void advance()
    {
        if (s_[pos_] == '\n') {
            ++line_;
            col_ = 1;
        } else {
            ++col_;
        }
        ++pos_;
    }
    void skip_spaces()
    {
        while (!eof() && (peek() == ' ' || peek() == '\t' || peek() == '\r')) advance();
    }
    void skip_comment()
    {
        if (peek() == '#')
            while (!eof() && peek() != '\n') advance();
    }
    void skip_blank_lines()
    {
        for (;;) {
            skip_spaces();
            skip_comment();
            if (!eof() && peek() == '\n') {
                advance();
                continue;
            }
            return;
        }
    }
    void expect(char c)
    {
        if (peek() != c) fail(std::string("expected '") + c + "'");
        advance();
    }
    void end_of_statement()
    {
        skip_spaces();
        skip_comment();
        if (!eof() && peek() != '\n') fail("unexpected trailing characters");
    }

    std::string bare_word(const char* what)
    {
        std::string out;
        while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_' || peek() == '-' || peek() == '.')) {
            out += peek();
            advance();
        }
        if (out.empty()) fail(std::string("expected ") + what);
        return out;
    }

    Value value()
    {
        Value v;
        v.line = line_;
        v.column = col_;
        const char c = peek();
        if (c == '"') {
            v.type = Value::Type::String;
            v.string = quoted();
        } else if (c == '[') {
            v.type = Value::Type::Array;
            advance();
            for (;;) {
                skip_blank_lines();
                if (peek() == ']') break;
                v.array.push_back(value());
                skip_blank_lines();
                if (peek() == ',') {
                    advance();
                    continue;
                }
                if (peek() != ']') fail("expected ',' or ']' in array");
            }
            advance();
        } else if (std::isalpha(static_cast<unsigned char>(c))) {
            const std::string w = bare_word("value");
            if (w == "true" || w == "false") {
                v.type = Value::Type::Boolean;
                v.boolean = w == "true";
            } else {
                fail("unknown literal '" + w + "'", v.line, v.column);
            }
        } else {
            v.type = Value::Type::Number;
            v.number = number();
        }
        return v;
    }

    std::string quoted()
    {
        expect('"');
        std::string out;
        while (!eof() && peek() != '"') {
            if (peek() == '\n') fail("unterminated string");
            if (peek() == '\\') {
                advance();
                switch (peek()) {
                case '"': out += '"'; break;
                case '\\': out += '\\'; break;
                case 'n': out += '\n'; break;
                case 't': out += '\t'; break;
                default: fail("unsupported escape");
                }
                advance();
                continue;
            }
            out += peek();
            advance();
        }
        expect('"');
        return out;
    }

    double number()
    {
        const int l = line_, c = col_;
        std::string tok;
        while (!eof() && (std::isdigit(static_cast<unsigned char>(peek())) || peek() == '+' || peek() == '-' || peek() == '.' ||
                          peek() == 'e' || peek() == 'E')) {
            tok += peek();
            advance();
        }
        if (tok.empty()) fail("expected a value", l, c);
        std::size_t used = 0;
        double x = 0.0;
        try {
            x = std::stod(tok, &used);
        } catch (const std::exception&) {
            fail("malformed number '" + tok + "'", l, c);
        }
        if (used != tok.size() || !std::isfinite(x)) fail("malformed number '" + tok + "'", l, c);
        return x;
    }

    const std::string& s_;
    std::size_t pos_ = 0;
    int line_ = 1, col_ = 1;
};

inline Document parse(const std::string& text) { return Parser(text).parse(); }

} // namespace toml_lite

// ---------------------------------------------------------------------------
// Run configuration
// ---------------------------------------------------------------------------

struct DomainConfig {
    DomainKind kind = DomainKind::Interval;
    int n = 64;                  ///< elements (interval), cells per side (square) or rings (disk)
    double length = 1.0;         ///< interval length
    int boundary_vertices = 64;  ///< disk polygon
};

/// Constant weight, or a nodal field read from a CSV file when `file` is set.
struct WeightConfig {
    double value = 1.0;
    std::string file;
};

enum class SweepKind { Existence, Multiplicity };

inline const char* to_string(SweepKind k) { return k == SweepKind::Existence ? "existence" : "multiplicity"; }

struct SweepConfig {
    SweepKind kind = SweepKind::Existence;
    double sum1_min = 1.0, sum1_max = 4096.0;
    double sum2_min = 1.0, sum2_max = 4096.0;
    int rows = 4, cols = 4;  ///< grid points along lambda1 + mu1 and lambda2 + mu2
};

struct RunConfig {
    DomainConfig domain;
    double p = 2.0, q = 2.0;
    double lambda1 = 1.0, lambda2 = 1.0, mu1 = 1.0, mu2 = 1.0;
    ParameterMode mode = ParameterMode::AutoThreshold;
    double threshold_factor = 1.0;
    SubsolutionKind subsolution = SubsolutionKind::Strip;
    WeightConfig a, b, alpha, beta;
    NonlinearitySet nl;
    SolverOptions solver;
    IterateOptions iterate;
    EigenOptions eigen;
    ConstructionOptions construction;
    MultiplicityOptions multiplicity;
    SweepConfig sweep;
    std::string output_dir = "out";
    bool write_fields = true;
    std::uint64_t seed = 1;
    bool check_hypotheses = true;
    /// Directory that relative weight-file paths resolve against (not serialized).
    std::string base_dir = ".";
};

inline const char* to_string(ParameterMode m) { return m == ParameterMode::Fixed ? "fixed" : "auto-threshold"; }
inline const char* to_string(SubsolutionKind k) { return k == SubsolutionKind::Strip ? "strip" : "zero"; }

namespace detail {

using toml_lite::Entry;
using toml_lite::Value;

class SectionReader {
public:
    SectionReader(std::string name, const std::map<std::string, Entry>* table) : name_(std::move(name)), table_(table) {}

    const Entry* find(const std::string& key)
    {
        used_.insert(key);
        if (!table_) return nullptr;
        const auto it = table_->find(key);
        return it == table_->end() ? nullptr : &it->second;
    }

    [[noreturn]] void fail(const std::string& key, const std::string& what, const Entry* e = nullptr) const
    {
        std::string msg = label(key) + " " + what;
        if (e) msg += " (line " + std::to_string(e->line) + ", column " + std::to_string(e->column) + ")";
        throw Error(ErrorKind::Config, msg, "config", label(key));
    }

    void number(const std::string& key, double& out)
    {
        if (const Entry* e = find(key)) {
            if (e->value.type != Value::Type::Number) fail(key, "must be a number", e);
            out = e->value.number;
        }
    }

    template <class Int>
    void integer(const std::string& key, Int& out)
    {
        if (const Entry* e = find(key)) {
            if (e->value.type != Value::Type::Number || std::floor(e->value.number) != e->value.number ||
                std::abs(e->value.number) > 9.007199254740992e15)
                fail(key, "must be an integer", e);
            out = static_cast<Int>(e->value.number);
        }
    }

    void boolean(const std::string& key, bool& out)
    {
        if (const Entry* e = find(key)) {
            if (e->value.type != Value::Type::Boolean) fail(key, "must be true or false", e);
            out = e->value.boolean;
        }
    }

    void string(const std::string& key, std::string& out)
    {
        if (const Entry* e = find(key)) {
            if (e->value.type != Value::Type::String) fail(key, "must be a string", e);
            out = e->value.string;
        }
    }

    /// Array of [x, y] number pairs.
    bool pairs(const std::string& key, std::vector<std::pair<double, double>>& out)
    {
        const Entry* e = find(key);
        if (!e) return false;
        if (e->value.type != Value::Type::Array) fail(key, "must be an array of [x, y] pairs", e);
        out.clear();
        for (const Value& row : e->value.array) {
            if (row.type != Value::Type::Array || row.array.size() != 2 ||
                row.array[0].type != Value::Type::Number || row.array[1].type != Value::Type::Number)
                fail(key, "must be an array of [x, y] pairs", e);
            out.emplace_back(row.array[0].number, row.array[1].number);
        }
        return true;
    }

    void reject_unknown() const
    {
        if (!table_) return;
        for (const auto& [key, e] : *table_)
            if (!used_.count(key)) fail(key, "is not a recognized key", &e);
    }

    std::string label(const std::string& key) const { return name_.empty() ? key : "[" + name_ + "] " + key; }

private:
    std::string name_;
    const std::map<std::string, Entry>* table_;
    std::set<std::string> used_;
};

inline NonlinearitySpec read_nonlinearity(SectionReader& r, const std::string& name, bool present)
{
    if (!present)
        throw Error(ErrorKind::Config, "missing section [" + name + "]", "config", "[" + name + "]");
    std::string kind = "polynomial";
    r.string("kind", kind);
    double offset = 0.0;
    r.number("offset", offset);
    try {
        if (kind == "polynomial") {
            std::vector<std::pair<double, double>> t;
            if (!r.pairs("terms", t)) r.fail("terms", "is required for kind = \"polynomial\"");
            std::vector<PowerTerm> terms;
            for (const auto& [c, e] : t) terms.push_back({c, e});
            return NonlinearitySpec::polynomial(std::move(terms), offset);
        }
        if (kind == "piecewise") {
            double inner = 1.0, outer = 1.0;
            r.number("inner", inner);
            r.number("outer", outer);
            return NonlinearitySpec::piecewise(inner, outer, offset);
        }
        if (kind == "table") {
            std::vector<std::pair<double, double>> pts;
            if (!r.pairs("points", pts)) r.fail("points", "is required for kind = \"table\"");
            bool monotone = true;
            r.boolean("monotone", monotone);
            return NonlinearitySpec::custom_table(std::move(pts), offset, monotone);
        }
    } catch (const Error& e) {
        if (e.stage() == "config") throw;
        throw Error(ErrorKind::Config, "[" + name + "] " + e.detail(), "config", "[" + name + "]");
    }
    r.fail("kind", "must be \"polynomial\", \"piecewise\" or \"table\"");
}

inline void read_weight(SectionReader& r, const std::string& key, WeightConfig& w)
{
    const Entry* e = r.find(key);
    if (!e) return;
    if (e->value.type == Value::Type::Number) {
        w.value = e->value.number;
        w.file.clear();
    } else if (e->value.type == Value::Type::String) {
        w.file = e->value.string;
    } else {
        r.fail(key, "must be a number or a CSV path", e);
    }
}

inline std::string fmt_number(double x)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    std::string s = buf;
    // shortest representation that still round-trips
    for (int prec = 1; prec < 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, x);
        if (std::stod(buf) == x) {
            s = buf;
            break;
        }
    }
    return s;
}

inline std::string fmt_string(const std::string& s)
{
    std::string out = "\"";
    for (char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        if (c == '\n') {
            out += "\\n";
            continue;
        }
        if (c == '\t') {
            out += "\\t";
            continue;
        }
        out += c;
    }
    return out + "\"";
}

inline std::string fmt_pairs(const std::vector<std::pair<double, double>>& v)
{
    std::string out = "[";
    for (std::size_t i = 0; i < v.size(); ++i)
        out += (i ? ", [" : "[") + fmt_number(v[i].first) + ", " + fmt_number(v[i].second) + "]";
    return out + "]";
}

inline void emit_nonlinearity(std::ostream& os, const char* name, const NonlinearitySpec& s)
{
    os << "\n[" << name << "]\n";
    switch (s.kind) {
    case NonlinearityKind::PolynomialSum: {
        std::vector<std::pair<double, double>> t;
        for (const auto& term : s.terms) t.emplace_back(term.coefficient, term.exponent);
        os << "kind = \"polynomial\"\nterms = " << fmt_pairs(t) << "\n";
        break;
    }
    case NonlinearityKind::PiecewisePower:
        os << "kind = \"piecewise\"\ninner = " << fmt_number(s.inner) << "\nouter = " << fmt_number(s.outer) << "\n";
        break;
    case NonlinearityKind::CustomTable:
        os << "kind = \"table\"\npoints = " << fmt_pairs(s.table) << "\nmonotone = " << (s.monotone ? "true" : "false")
           << "\n";
        break;
    }
    os << "offset = " << fmt_number(s.offset) << "\n";
}

inline std::string fmt_weight(const WeightConfig& w) { return w.file.empty() ? fmt_number(w.value) : fmt_string(w.file); }

} // namespace detail

/// Checks the invariants of a run configuration; throws a Config error naming the field.
inline void validate(const RunConfig& c)
{
    const auto bad = [](const std::string& field, const std::string& what) {
        throw Error(ErrorKind::Config, field + " " + what, "config", field);
    };
    if (!(c.p > 1.0) || !std::isfinite(c.p)) bad("p", "must exceed 1");
    if (!(c.q > 1.0) || !std::isfinite(c.q)) bad("q", "must exceed 1");
    if (c.domain.n < 2) bad("[domain] n", "must be at least 2");
    if (!(c.domain.length > 0.0)) bad("[domain] length", "must be positive");
    if (c.domain.boundary_vertices < 8) bad("[domain] boundary_vertices", "must be at least 8");
    for (const auto& [name, v] : {std::pair{"lambda1", c.lambda1}, {"lambda2", c.lambda2}, {"mu1", c.mu1}, {"mu2", c.mu2}})
        if (!(v >= 0.0)) bad(std::string("[problem] ") + name, "must be nonnegative");
    if (!(c.threshold_factor > 0.0)) bad("[problem] threshold_factor", "must be positive");
    if (c.subsolution == SubsolutionKind::Zero && c.mode != ParameterMode::Fixed)
        bad("[problem] subsolution", "\"zero\" needs mode = \"fixed\"");
    for (const auto& [name, w] : {std::pair{"a", &c.a}, {"b", &c.b}, {"alpha", &c.alpha}, {"beta", &c.beta}})
        if (w->file.empty() && !(w->value > 0.0)) bad(std::string("[weights] ") + name, "needs a positive minimum");
    if (c.sweep.rows < 1 || c.sweep.cols < 1) bad("[sweep] rows/cols", "must be at least 1");
    if (!(c.sweep.sum1_min > 0.0) || !(c.sweep.sum1_max >= c.sweep.sum1_min)) bad("[sweep] sum1_min/sum1_max", "must satisfy 0 < min <= max");
    if (!(c.sweep.sum2_min > 0.0) || !(c.sweep.sum2_max >= c.sweep.sum2_min)) bad("[sweep] sum2_min/sum2_max", "must satisfy 0 < min <= max");
    if (c.solver.quadrature_degree < 1 || c.solver.quadrature_degree > 5) bad("[solver] quadrature_degree", "must be in 1..5");
    if (c.eigen.restarts < 0) bad("[eigen] restarts", "must be nonnegative");
}

/// Parses and validates a run configuration. Unknown sections and keys are rejected.
inline RunConfig parse_config(const std::string& text)
{
    using detail::SectionReader;
    const toml_lite::Document doc = toml_lite::parse(text);
    static const std::set<std::string> known = {"",      "domain", "problem", "weights",   "f",          "g",
                                                "h",     "gamma",  "solver",  "iteration", "eigen",      "construction",
                                                "multiplicity", "sweep", "output"};
    for (const auto& [name, table] : doc)
        if (!known.count(name)) {
            const int line = table.empty() ? 0 : table.begin()->second.line;
            throw Error(ErrorKind::Config,
                        "unknown section [" + name + "]" + (line ? " near line " + std::to_string(line) : ""), "config",
                        "[" + name + "]");
        }
    const auto section = [&](const std::string& name) {
        const auto it = doc.find(name);
        return SectionReader(name, it == doc.end() ? nullptr : &it->second);
    };

    RunConfig c;
    {
        SectionReader r = section("");
        r.integer("seed", c.seed);
        r.boolean("check_hypotheses", c.check_hypotheses);
        r.reject_unknown();
    }
    {
        SectionReader r = section("domain");
        std::string kind = to_string(c.domain.kind);
        r.string("kind", kind);
        if (kind == "interval") c.domain.kind = DomainKind::Interval;
        else if (kind == "square") c.domain.kind = DomainKind::Square;
        else if (kind == "disk") c.domain.kind = DomainKind::Disk;
        else r.fail("kind", "must be \"interval\", \"square\" or \"disk\"");
        r.integer("n", c.domain.n);
        r.number("length", c.domain.length);
        r.integer("boundary_vertices", c.domain.boundary_vertices);
        r.reject_unknown();
    }
    {
        SectionReader r = section("problem");
        r.number("p", c.p);
        r.number("q", c.q);
        r.number("lambda1", c.lambda1);
        r.number("lambda2", c.lambda2);
        r.number("mu1", c.mu1);
        r.number("mu2", c.mu2);
        std::string mode = to_string(c.mode);
        r.string("mode", mode);
        if (mode == "auto-threshold") c.mode = ParameterMode::AutoThreshold;
        else if (mode == "fixed") c.mode = ParameterMode::Fixed;
        else r.fail("mode", "must be \"auto-threshold\" or \"fixed\"");
        r.number("threshold_factor", c.threshold_factor);
        std::string sub = to_string(c.subsolution);
        r.string("subsolution", sub);
        if (sub == "strip") c.subsolution = SubsolutionKind::Strip;
        else if (sub == "zero") c.subsolution = SubsolutionKind::Zero;
        else r.fail("subsolution", "must be \"strip\" or \"zero\"");
        r.reject_unknown();
    }
    {
        SectionReader r = section("weights");
        detail::read_weight(r, "a", c.a);
        detail::read_weight(r, "b", c.b);
        detail::read_weight(r, "alpha", c.alpha);
        detail::read_weight(r, "beta", c.beta);
        r.reject_unknown();
    }
    for (const auto& [name, spec] : {std::pair{"f", &c.nl.f}, {"g", &c.nl.g}, {"h", &c.nl.h}, {"gamma", &c.nl.gamma}}) {
        SectionReader r = section(name);
        *spec = detail::read_nonlinearity(r, name, doc.count(name) > 0);
        r.reject_unknown();
    }
    {
        SectionReader r = section("solver");
        SolverOptions& s = c.solver;
        r.number("tolerance", s.tolerance);
        r.number("abs_tolerance", s.abs_tolerance);
        r.number("stage_tolerance", s.stage_tolerance);
        r.integer("max_iterations", s.max_iterations);
        r.number("eps_start", s.eps_start);
        r.number("eps_end", s.eps_end);
        r.integer("eps_steps", s.eps_steps);
        r.number("armijo_c", s.armijo_c);
        r.number("armijo_shrink", s.armijo_shrink);
        r.integer("max_backtracks", s.max_backtracks);
        r.integer("max_stall", s.max_stall);
        r.integer("quadrature_degree", s.quadrature_degree);
        r.reject_unknown();
    }
    {
        SectionReader r = section("iteration");
        r.number("step_tol", c.iterate.step_tol);
        r.number("res_tol", c.iterate.res_tol);
        r.integer("max_iterations", c.iterate.max_iterations);
        r.number("order_tol", c.iterate.order_tol);
        r.reject_unknown();
    }
    {
        SectionReader r = section("eigen");
        r.number("tolerance", c.eigen.tolerance);
        r.number("field_tolerance", c.eigen.field_tolerance);
        r.integer("max_iterations", c.eigen.max_iterations);
        r.integer("restarts", c.eigen.restarts);
        r.number("perturbation", c.eigen.perturbation);
        r.reject_unknown();
    }
    {
        SectionReader r = section("construction");
        r.number("relative_tolerance", c.construction.relative_tolerance);
        r.number("order_tolerance", c.construction.order_tolerance);
        r.number("search_start", c.construction.search_start);
        r.number("search_cap", c.construction.search_cap);
        r.number("super_cap", c.construction.super_cap);
        r.reject_unknown();
    }
    {
        SectionReader r = section("multiplicity");
        r.number("distinct_tol", c.multiplicity.distinct_tol);
        r.number("positive_tol", c.multiplicity.positive_tol);
        r.integer("newton_steps", c.multiplicity.newton_steps);
        r.reject_unknown();
    }
    {
        SectionReader r = section("sweep");
        std::string kind = to_string(c.sweep.kind);
        r.string("kind", kind);
        if (kind == "existence") c.sweep.kind = SweepKind::Existence;
        else if (kind == "multiplicity") c.sweep.kind = SweepKind::Multiplicity;
        else r.fail("kind", "must be \"existence\" or \"multiplicity\"");
        r.number("sum1_min", c.sweep.sum1_min);
        r.number("sum1_max", c.sweep.sum1_max);
        r.number("sum2_min", c.sweep.sum2_min);
        r.number("sum2_max", c.sweep.sum2_max);
        r.integer("rows", c.sweep.rows);
        r.integer("cols", c.sweep.cols);
        r.reject_unknown();
    }
    {
        SectionReader r = section("output");
        r.string("dir", c.output_dir);
        r.boolean("fields", c.write_fields);
        r.reject_unknown();
    }
    c.eigen.seed = c.seed;
    validate(c);
    return c;
}

/// Reads a config file; relative weight paths resolve against its directory.
inline RunConfig load_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Config, "cannot open config file " + path, "config");
    std::stringstream ss;
    ss << in.rdbuf();
    RunConfig c = parse_config(ss.str());
    const auto parent = std::filesystem::path(path).parent_path();
    c.base_dir = parent.empty() ? "." : parent.string();
    return c;
}

/// Canonical text: every key written with its effective value, in a fixed order.
/// parse_config(to_canonical(c)) reproduces c.
inline std::string to_canonical(const RunConfig& c)
{
    using detail::fmt_number;
    std::ostringstream os;
    os << "seed = " << c.seed << "\n";
    os << "check_hypotheses = " << (c.check_hypotheses ? "true" : "false") << "\n";
    os << "\n[domain]\nkind = \"" << to_string(c.domain.kind) << "\"\nn = " << c.domain.n
       << "\nlength = " << fmt_number(c.domain.length) << "\nboundary_vertices = " << c.domain.boundary_vertices << "\n";
    os << "\n[problem]\np = " << fmt_number(c.p) << "\nq = " << fmt_number(c.q) << "\nlambda1 = " << fmt_number(c.lambda1)
       << "\nlambda2 = " << fmt_number(c.lambda2) << "\nmu1 = " << fmt_number(c.mu1) << "\nmu2 = " << fmt_number(c.mu2)
       << "\nmode = \"" << to_string(c.mode) << "\"\nthreshold_factor = " << fmt_number(c.threshold_factor) << "\n";
    os << "\n[weights]\na = " << detail::fmt_weight(c.a) << "\nb = " << detail::fmt_weight(c.b)
       << "\nalpha = " << detail::fmt_weight(c.alpha) << "\nbeta = " << detail::fmt_weight(c.beta) << "\n";
    detail::emit_nonlinearity(os, "f", c.nl.f);
    detail::emit_nonlinearity(os, "g", c.nl.g);
    detail::emit_nonlinearity(os, "h", c.nl.h);
    detail::emit_nonlinearity(os, "gamma", c.nl.gamma);
    const SolverOptions& s = c.solver;
    os << "\n[solver]\ntolerance = " << fmt_number(s.tolerance) << "\nabs_tolerance = " << fmt_number(s.abs_tolerance)
       << "\nstage_tolerance = " << fmt_number(s.stage_tolerance) << "\nmax_iterations = " << s.max_iterations
       << "\neps_start = " << fmt_number(s.eps_start) << "\neps_end = " << fmt_number(s.eps_end)
       << "\neps_steps = " << s.eps_steps << "\narmijo_c = " << fmt_number(s.armijo_c)
       << "\narmijo_shrink = " << fmt_number(s.armijo_shrink) << "\nmax_backtracks = " << s.max_backtracks
       << "\nmax_stall = " << s.max_stall << "\nquadrature_degree = " << s.quadrature_degree << "\n";
    os << "\n[iteration]\nstep_tol = " << fmt_number(c.iterate.step_tol) << "\nres_tol = " << fmt_number(c.iterate.res_tol)
       << "\nmax_iterations = " << c.iterate.max_iterations << "\norder_tol = " << fmt_number(c.iterate.order_tol) << "\n";
    os << "\n[eigen]\ntolerance = " << fmt_number(c.eigen.tolerance)
       << "\nfield_tolerance = " << fmt_number(c.eigen.field_tolerance) << "\nmax_iterations = " << c.eigen.max_iterations
       << "\nrestarts = " << c.eigen.restarts << "\nperturbation = " << fmt_number(c.eigen.perturbation) << "\n";
    os << "\n[construction]\nrelative_tolerance = " << fmt_number(c.construction.relative_tolerance)
       << "\norder_tolerance = " << fmt_number(c.construction.order_tolerance)
       << "\nsearch_start = " << fmt_number(c.construction.search_start)
       << "\nsearch_cap = " << fmt_number(c.construction.search_cap)
       << "\nsuper_cap = " << fmt_number(c.construction.super_cap) << "\n";
    os << "\n[multiplicity]\ndistinct_tol = " << fmt_number(c.multiplicity.distinct_tol)
       << "\npositive_tol = " << fmt_number(c.multiplicity.positive_tol)
       << "\nnewton_steps = " << c.multiplicity.newton_steps << "\n";
    os << "\n[sweep]\nkind = \"" << to_string(c.sweep.kind) << "\"\nsum1_min = " << fmt_number(c.sweep.sum1_min)
       << "\nsum1_max = " << fmt_number(c.sweep.sum1_max) << "\nsum2_min = " << fmt_number(c.sweep.sum2_min)
       << "\nsum2_max = " << fmt_number(c.sweep.sum2_max) << "\nrows = " << c.sweep.rows << "\ncols = " << c.sweep.cols
       << "\n";
    os << "\n[output]\ndir = " << detail::fmt_string(c.output_dir) << "\nfields = " << (c.write_fields ? "true" : "false")
       << "\n";
    return os.str();
}

inline MeshPtr build_mesh(const DomainConfig& d)
{
    switch (d.kind) {
    case DomainKind::Interval: return build_interval_mesh(d.n, d.length);
    case DomainKind::Square: return build_square_mesh(d.n);
    case DomainKind::Disk: return build_disk_mesh(d.n, d.boundary_vertices);
    }
    throw Error(ErrorKind::Config, "unknown domain kind", "config");
}

namespace detail {

inline Field weight_field(const WeightConfig& w, const MeshPtr& mesh, const std::string& base_dir)
{
    if (w.file.empty()) return Field::constant(mesh, w.value);
    std::filesystem::path path(w.file);
    if (path.is_relative()) path = std::filesystem::path(base_dir) / path;
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Config, "cannot open weight file " + path.string(), "config");
    return read_field_csv(in, mesh);
}

} // namespace detail

/// Problem parameters on `mesh` with the configured weights.
inline ProblemParams build_params(const RunConfig& c, const MeshPtr& mesh)
{
    ProblemParams prm;
    prm.p = c.p;
    prm.q = c.q;
    prm.lambda1 = c.lambda1;
    prm.lambda2 = c.lambda2;
    prm.mu1 = c.mu1;
    prm.mu2 = c.mu2;
    prm.a = detail::weight_field(c.a, mesh, c.base_dir);
    prm.b = detail::weight_field(c.b, mesh, c.base_dir);
    prm.alpha = detail::weight_field(c.alpha, mesh, c.base_dir);
    prm.beta = detail::weight_field(c.beta, mesh, c.base_dir);
    prm.validate();
    return prm;
}

/// Pipeline input with the solver settings propagated to every stage.
inline PipelineInput build_pipeline_input(const RunConfig& c, const MeshPtr& mesh)
{
    PipelineInput in;
    in.params = build_params(c, mesh);
    in.nl = c.nl;
    in.mode = c.mode;
    in.threshold_factor = c.threshold_factor;
    in.check_hypotheses = c.check_hypotheses;
    in.subsolution = c.subsolution;
    in.eigen = c.eigen;
    in.eigen.seed = c.seed;
    in.eigen.solver = c.solver;
    in.construction = c.construction;
    in.construction.quadrature_degree = c.solver.quadrature_degree;
    in.iterate = c.iterate;
    in.iterate.solver = c.solver;
    in.iterate.quadrature_degree = c.solver.quadrature_degree;
    return in;
}

} // namespace pqss
