#pragma once

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "anisodiff/anisotropy.hpp"
#include "anisodiff/initial_shapes.hpp"
#include "anisodiff/io.hpp"
#include "anisodiff/scheme.hpp"
#include "anisodiff/stabilizer.hpp"

namespace anisodiff {

/// Parsed configuration value: number, boolean, quoted string, inline table
/// `{ key = value, ... }` or array `[ value, ... ]`.
struct ConfigValue {
    enum class Kind { number, boolean, string, table, array };
    Kind kind = Kind::number;
    double num = 0.0;
    bool boolean = false;
    std::string str;
    std::map<std::string, ConfigValue> table;
    std::vector<ConfigValue> array;
};

namespace detail {

class ConfigLexer {
public:
    ConfigLexer(std::string text, std::string origin)
        : text_(std::move(text)), origin_(std::move(origin)) {}

    // token kinds: '=', '{', '}', '[', ']', ',', 's'tring, 'w'ord, 'e'of
    char peek() {
        skip();
        if (pos_ >= text_.size()) return 'e';
        const char c = text_[pos_];
        if (c == '=' || c == '{' || c == '}' || c == '[' || c == ']' || c == ',') return c;
        if (c == '"') return 's';
        return 'w';
    }

    void expect(char kind, const std::string& what) {
        if (peek() != kind) fail("expected " + what);
        if (kind != 's' && kind != 'w') ++pos_;
    }

    std::string take_string() {
        skip();
        if (pos_ >= text_.size() || text_[pos_] != '"') fail("expected a quoted string");
        ++pos_;
        std::string out;
        while (pos_ < text_.size() && text_[pos_] != '"') out += text_[pos_++];
        if (pos_ >= text_.size()) fail("unterminated string");
        ++pos_;
        return out;
    }

    std::string take_word() {
        skip();
        std::string out;
        while (pos_ < text_.size() && !std::isspace(static_cast<unsigned char>(text_[pos_])) &&
               std::string("={}[],\"#").find(text_[pos_]) == std::string::npos)
            out += text_[pos_++];
        if (out.empty()) fail("expected a key or value");
        return out;
    }

    [[noreturn]] void fail(const std::string& msg) {
        std::size_t line = 1;
        for (std::size_t i = 0; i < pos_ && i < text_.size(); ++i)
            if (text_[i] == '\n') ++line;
        throw ConfigError(origin_ + ":" + std::to_string(line) + ": " + msg);
    }

private:
    void skip() {
        while (pos_ < text_.size()) {
            const char c = text_[pos_];
            if (std::isspace(static_cast<unsigned char>(c))) {
                ++pos_;
            } else if (c == '#') {
                while (pos_ < text_.size() && text_[pos_] != '\n') ++pos_;
            } else {
                break;
            }
        }
    }

    std::string text_;
    std::string origin_;
    std::size_t pos_ = 0;
};

inline ConfigValue parse_value(ConfigLexer& lex) {
    ConfigValue v;
    switch (lex.peek()) {
        case 's':
            v.kind = ConfigValue::Kind::string;
            v.str = lex.take_string();
            return v;
        case '{': {
            lex.expect('{', "'{'");
            v.kind = ConfigValue::Kind::table;
            while (lex.peek() != '}') {
                const std::string key = lex.take_word();
                lex.expect('=', "'=' after key '" + key + "'");
                if (v.table.count(key)) lex.fail("duplicate key '" + key + "'");
                v.table.emplace(key, parse_value(lex));
                if (lex.peek() == ',') lex.expect(',', "','");
            }
            lex.expect('}', "'}'");
            return v;
        }
        case '[': {
            lex.expect('[', "'['");
            v.kind = ConfigValue::Kind::array;
            while (lex.peek() != ']') {
                v.array.push_back(parse_value(lex));
                if (lex.peek() == ',') lex.expect(',', "','");
            }
            lex.expect(']', "']'");
            return v;
        }
        case 'w': {
            const std::string word = lex.take_word();
            if (word == "true" || word == "false") {
                v.kind = ConfigValue::Kind::boolean;
                v.boolean = word == "true";
                return v;
            }
            char* end = nullptr;
            const double num = std::strtod(word.c_str(), &end);
            if (end != word.c_str() + word.size())
                lex.fail("'" + word + "' is not a number, boolean or quoted string");
            v.kind = ConfigValue::Kind::number;
            v.num = num;
            return v;
        }
        default:
            lex.fail("expected a value");
    }
    throw Error("unreachable");
}

} // namespace detail

inline std::map<std::string, ConfigValue> parse_config_document(const std::string& text,
                                                                const std::string& origin) {
    detail::ConfigLexer lex(text, origin);
    std::map<std::string, ConfigValue> doc;
    while (lex.peek() != 'e') {
        const std::string key = lex.take_word();
        lex.expect('=', "'=' after key '" + key + "'");
        if (doc.count(key)) lex.fail("duplicate key '" + key + "'");
        doc.emplace(key, detail::parse_value(lex));
    }
    return doc;
}

/// Strict accessor over a parsed table: every key must be consumed, every
/// consumed key must have the right type; leftovers are schema errors.
class TableView {
public:
    TableView(const std::map<std::string, ConfigValue>& table, std::string path)
        : table_(table), path_(std::move(path)) {}

    bool has(const std::string& key) const { return table_.count(key) != 0; }

    double number(const std::string& key) const { return fetch(key, ConfigValue::Kind::number).num; }
    double number_or(const std::string& key, double fallback) const {
        return has(key) ? number(key) : fallback;
    }
    long integer(const std::string& key) const {
        const double v = number(key);
        if (v != std::floor(v)) throw ConfigError(path_ + "." + key + " must be an integer");
        return static_cast<long>(v);
    }
    long integer_or(const std::string& key, long fallback) const {
        return has(key) ? integer(key) : fallback;
    }
    bool boolean_or(const std::string& key, bool fallback) const {
        return has(key) ? fetch(key, ConfigValue::Kind::boolean).boolean : fallback;
    }
    std::string string(const std::string& key) const {
        return fetch(key, ConfigValue::Kind::string).str;
    }
    std::string string_or(const std::string& key, const std::string& fallback) const {
        return has(key) ? string(key) : fallback;
    }
    const std::vector<ConfigValue>& array(const std::string& key) const {
        return fetch(key, ConfigValue::Kind::array).array;
    }

    void finish() const {
        for (const auto& [key, value] : table_)
            if (!used_.count(key))
                throw ConfigError("unknown key '" + key + "' in " + path_);
    }

    const std::string& path() const { return path_; }

private:
    const ConfigValue& fetch(const std::string& key, ConfigValue::Kind kind) const {
        auto it = table_.find(key);
        if (it == table_.end()) throw ConfigError(path_ + " is missing key '" + key + "'");
        used_.insert(key);
        static const char* names[] = {"number", "boolean", "string", "table", "array"};
        if (it->second.kind != kind)
            throw ConfigError(path_ + "." + key + " must be a " +
                              names[static_cast<int>(kind)]);
        return it->second;
    }

    const std::map<std::string, ConfigValue>& table_;
    std::string path_;
    mutable std::set<std::string> used_;
};

/// anisotropy = { family = "...", ... }
/// Families: isotropic; riemannian { matrices = [[a, b, c], ...] } (each row a
/// symmetric 2x2 [[a,b],[b,c]]); lr_norm { r }; m_fold { m, beta, theta0 };
/// regularized_l1 { eps }; fourier { c0, cos = [...], sin = [...] } for
/// gamma_hat(theta) = c0 + sum_k cos_k cos(k theta) + sin_k sin(k theta).
inline AnisotropySpec build_anisotropy(const ConfigValue& value, const std::string& path) {
    if (value.kind != ConfigValue::Kind::table) throw ConfigError(path + " must be a table");
    TableView t(value.table, path);
    const std::string family = t.string("family");
    AnisotropySpec spec = [&] {
        if (family == "isotropic") return AnisotropySpec::isotropic();
        if (family == "riemannian") {
            std::vector<SymMat2> mats;
            for (const auto& entry : t.array("matrices")) {
                if (entry.kind != ConfigValue::Kind::array || entry.array.size() != 3 ||
                    entry.array[0].kind != ConfigValue::Kind::number ||
                    entry.array[1].kind != ConfigValue::Kind::number ||
                    entry.array[2].kind != ConfigValue::Kind::number)
                    throw ConfigError(path + ".matrices entries must be [a, b, c] number triples");
                mats.push_back({entry.array[0].num, entry.array[1].num, entry.array[2].num});
            }
            return AnisotropySpec::riemannian(std::move(mats));
        }
        if (family == "lr_norm") return AnisotropySpec::lr_norm(t.number("r"));
        if (family == "m_fold")
            return AnisotropySpec::m_fold(static_cast<int>(t.integer("m")), t.number("beta"),
                                          t.number_or("theta0", 0.0));
        if (family == "regularized_l1") return AnisotropySpec::regularized_l1(t.number("eps"));
        if (family == "fourier") {
            const double c0 = t.number("c0");
            std::vector<double> cs, ss;
            if (t.has("cos"))
                for (const auto& e : t.array("cos")) {
                    if (e.kind != ConfigValue::Kind::number)
                        throw ConfigError(path + ".cos must hold numbers");
                    cs.push_back(e.num);
                }
            if (t.has("sin"))
                for (const auto& e : t.array("sin")) {
                    if (e.kind != ConfigValue::Kind::number)
                        throw ConfigError(path + ".sin must hold numbers");
                    ss.push_back(e.num);
                }
            CustomGamma g;
            g.gamma_hat = [c0, cs, ss](double th) {
                double v = c0;
                for (std::size_t k = 0; k < cs.size(); ++k) v += cs[k] * std::cos((k + 1.0) * th);
                for (std::size_t k = 0; k < ss.size(); ++k) v += ss[k] * std::sin((k + 1.0) * th);
                return v;
            };
            g.gamma_hat_prime = [cs, ss](double th) {
                double v = 0.0;
                for (std::size_t k = 0; k < cs.size(); ++k)
                    v += -(k + 1.0) * cs[k] * std::sin((k + 1.0) * th);
                for (std::size_t k = 0; k < ss.size(); ++k)
                    v += (k + 1.0) * ss[k] * std::cos((k + 1.0) * th);
                return v;
            };
            g.gamma_hat_pp = [cs, ss](double th) {
                double v = 0.0;
                for (std::size_t k = 0; k < cs.size(); ++k)
                    v += -(k + 1.0) * (k + 1.0) * cs[k] * std::cos((k + 1.0) * th);
                for (std::size_t k = 0; k < ss.size(); ++k)
                    v += -(k + 1.0) * (k + 1.0) * ss[k] * std::sin((k + 1.0) * th);
                return v;
            };
            return AnisotropySpec::custom(std::move(g));
        }
        throw ConfigError(path + ".family '" + family + "' is not recognized");
    }();
    t.finish();
    return spec;
}

/// stabilizer = { mode = "explicit" | "numeric" | "constant" | "scaled_numeric",
///                k = <number>, margin = <number> }
inline StabilizerChoice build_stabilizer(const ConfigValue& value, const std::string& path) {
    if (value.kind != ConfigValue::Kind::table) throw ConfigError(path + " must be a table");
    TableView t(value.table, path);
    const std::string mode = t.string("mode");
    StabilizerChoice choice = [&] {
        if (mode == "explicit") return StabilizerChoice::explicit_formula();
        if (mode == "numeric") return StabilizerChoice::numeric();
        if (mode == "constant") return StabilizerChoice::constant(t.number("k"));
        if (mode == "scaled_numeric") return StabilizerChoice::scaled_numeric(t.number("margin"));
        throw ConfigError(path + ".mode '" + mode + "' is not recognized");
    }();
    t.finish();
    return choice;
}

struct GeometryConfig {
    enum class Shape { ellipse, rectangle, polygon };
    Shape shape = Shape::ellipse;
    double a = 2.0, b = 0.5;  // ellipse semi-axes
    double w = 4.0, h = 1.0;  // rectangle sides
    std::string file;         // polygon snapshot file
    int n = 0;                // node count (taken from the file for polygon input)
};

/// geometry = { shape = "ellipse", a, b, n } | { shape = "rectangle", w, h, n }
///          | { shape = "polygon", file = "..." }
inline GeometryConfig build_geometry(const ConfigValue& value, const std::string& path) {
    if (value.kind != ConfigValue::Kind::table) throw ConfigError(path + " must be a table");
    TableView t(value.table, path);
    GeometryConfig g;
    const std::string shape = t.string("shape");
    if (shape == "ellipse") {
        g.shape = GeometryConfig::Shape::ellipse;
        g.a = t.number("a");
        g.b = t.number("b");
        g.n = static_cast<int>(t.integer("n"));
    } else if (shape == "rectangle") {
        g.shape = GeometryConfig::Shape::rectangle;
        g.w = t.number("w");
        g.h = t.number("h");
        g.n = static_cast<int>(t.integer("n"));
    } else if (shape == "polygon") {
        g.shape = GeometryConfig::Shape::polygon;
        g.file = t.string("file");
    } else {
        throw ConfigError(path + ".shape '" + shape + "' is not recognized");
    }
    t.finish();
    return g;
}

inline PolygonalCurve build_initial_curve(const GeometryConfig& g) {
    switch (g.shape) {
        case GeometryConfig::Shape::ellipse: return make_ellipse(g.a, g.b, g.n);
        case GeometryConfig::Shape::rectangle: return make_rectangle(g.w, g.h, g.n);
        case GeometryConfig::Shape::polygon: return read_snapshot(g.file).curve;
    }
    throw Error("unreachable");
}

/// scheme = { variant = "sp_implicit" | "semi_implicit", tau = <number> or
///            tau_rule = "h^2", newton_tol, max_iters }
inline SchemeConfig build_scheme(const ConfigValue& value, const std::string& path, int n_nodes,
                                 StabilizerChoice stabilizer) {
    if (value.kind != ConfigValue::Kind::table) throw ConfigError(path + " must be a table");
    TableView t(value.table, path);
    SchemeConfig s;
    s.n = n_nodes;
    s.stabilizer = stabilizer;
    const std::string variant = t.string_or("variant", "sp_implicit");
    if (variant == "sp_implicit")
        s.variant = SchemeVariant::sp_implicit;
    else if (variant == "semi_implicit")
        s.variant = SchemeVariant::semi_implicit;
    else
        throw ConfigError(path + ".variant '" + variant + "' is not recognized");

    const bool has_tau = t.has("tau");
    const bool has_rule = t.has("tau_rule");
    if (has_tau == has_rule)
        throw ConfigError(path + " needs exactly one of 'tau' or 'tau_rule'");
    if (has_tau) {
        s.tau = t.number("tau");
    } else {
        const std::string rule = t.string("tau_rule");
        if (rule != "h^2") throw ConfigError(path + ".tau_rule only supports \"h^2\"");
        if (n_nodes <= 0) throw ConfigError(path + ".tau_rule = \"h^2\" needs geometry.n");
        s.tau = 1.0 / (static_cast<double>(n_nodes) * n_nodes);
    }
    s.newton_tol = t.number_or("newton_tol", 1e-12);
    s.newton_max_iters = static_cast<int>(t.integer_or("max_iters", 50));
    t.finish();
    s.check();
    return s;
}

struct RunSection {
    long n_steps = 0;
    double t_end = 0.0;
    long snapshot_every = 0;
    bool plateau_stop = false;
};

/// run = { n_steps = <int> or t_end = <number>, snapshot_every, plateau_stop }
inline RunSection build_run(const ConfigValue& value, const std::string& path) {
    if (value.kind != ConfigValue::Kind::table) throw ConfigError(path + " must be a table");
    TableView t(value.table, path);
    RunSection r;
    const bool has_steps = t.has("n_steps");
    const bool has_tend = t.has("t_end");
    if (has_steps == has_tend)
        throw ConfigError(path + " needs exactly one of 'n_steps' or 't_end'");
    if (has_steps) r.n_steps = t.integer("n_steps");
    if (has_tend) r.t_end = t.number("t_end");
    r.snapshot_every = t.integer_or("snapshot_every", 0);
    r.plateau_stop = t.boolean_or("plateau_stop", false);
    t.finish();
    return r;
}

struct OutputSection {
    std::string dir = "out";
    bool svg = false;
};

inline OutputSection build_output(const ConfigValue& value, const std::string& path) {
    if (value.kind != ConfigValue::Kind::table) throw ConfigError(path + " must be a table");
    TableView t(value.table, path);
    OutputSection o;
    o.dir = t.string_or("dir", "out");
    o.svg = t.boolean_or("svg", false);
    t.finish();
    return o;
}

struct RunConfig {
    AnisotropySpec anisotropy = AnisotropySpec::isotropic();
    StabilizerChoice stabilizer = StabilizerChoice::explicit_formula();
    std::optional<GeometryConfig> geometry;
    std::optional<SchemeConfig> scheme;
    std::optional<RunSection> run;
    OutputSection output;
    std::optional<PolygonalCurve> initial;
};

/// Parse and validate a run configuration document. Sections beyond
/// `anisotropy` are optional here; subcommands check for what they need.
inline RunConfig parse_run_config(const std::string& text, const std::string& origin) {
    const auto doc = parse_config_document(text, origin);
    for (const auto& [key, value] : doc) {
        if (key != "anisotropy" && key != "stabilizer" && key != "geometry" && key != "scheme" &&
            key != "run" && key != "output")
            throw ConfigError(origin + ": unknown top-level key '" + key + "'");
    }
    auto section = [&](const char* name) -> const ConfigValue* {
        auto it = doc.find(name);
        return it == doc.end() ? nullptr : &it->second;
    };

    RunConfig cfg;
    const ConfigValue* aniso = section("anisotropy");
    if (!aniso) throw ConfigError(origin + ": missing required section 'anisotropy'");
    cfg.anisotropy = build_anisotropy(*aniso, "anisotropy");

    if (const ConfigValue* v = section("stabilizer"))
        cfg.stabilizer = build_stabilizer(*v, "stabilizer");
    else
        cfg.stabilizer = k0_explicit(cfg.anisotropy, Vec2{0.0, 1.0})
                             ? StabilizerChoice::explicit_formula()
                             : StabilizerChoice::numeric();

    if (const ConfigValue* v = section("geometry")) {
        cfg.geometry = build_geometry(*v, "geometry");
        cfg.initial = build_initial_curve(*cfg.geometry);
        if (cfg.geometry->shape == GeometryConfig::Shape::polygon)
            cfg.geometry->n = static_cast<int>(cfg.initial->size());
    }
    if (const ConfigValue* v = section("scheme"))
        cfg.scheme = build_scheme(*v, "scheme", cfg.geometry ? cfg.geometry->n : 0,
                                  cfg.stabilizer);
    if (const ConfigValue* v = section("run")) cfg.run = build_run(*v, "run");
    if (const ConfigValue* v = section("output")) cfg.output = build_output(*v, "output");
    return cfg;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file " + path.string());
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_run_config(ss.str(), path.string());
}

} // namespace anisodiff
