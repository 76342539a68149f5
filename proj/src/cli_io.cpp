#include "frontlab/cli_io.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <deque>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <thread>

#include "frontlab/angular_solver.hpp"
#include "frontlab/certificates.hpp"
#include "frontlab/errors.hpp"
#include "frontlab/front_analysis.hpp"
#include "frontlab/gap_constants.hpp"
#include "frontlab/nonlinearity.hpp"
#include "frontlab/parallel.hpp"
#include "frontlab/radial_solver.hpp"
#include "frontlab/wave_profile.hpp"

namespace frontlab {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// ---- typed access to config fields by dotted key ----

json to_j(double v) { return v; }
json to_j(int v) { return v; }
json to_j(unsigned v) { return v; }
json to_j(std::uint64_t v) { return v; }
json to_j(const std::string& v) { return v; }
json to_j(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }
json to_j(const std::optional<bool>& v) { return v ? json(*v) : json(nullptr); }

void assign(double& out, const json& v, const std::string& key) {
    if (!v.is_number()) throw ConfigError(key, "expected a number, got " + v.dump());
    out = v.get<double>();
    if (!std::isfinite(out)) throw ConfigError(key, "must be finite");
}
void assign(int& out, const json& v, const std::string& key) {
    if (!v.is_number_integer()) throw ConfigError(key, "expected an integer, got " + v.dump());
    const auto x = v.get<std::int64_t>();
    if (x < -1'000'000'000 || x > 1'000'000'000) throw ConfigError(key, "integer out of range");
    out = static_cast<int>(x);
}
void assign(std::uint64_t& out, const json& v, const std::string& key) {
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
        throw ConfigError(key, "expected a non-negative integer, got " + v.dump());
    }
    out = v.get<std::uint64_t>();
}
void assign(unsigned& out, const json& v, const std::string& key) {
    std::uint64_t x = 0;
    assign(x, v, key);
    if (x > 4096) throw ConfigError(key, "at most 4096");
    out = static_cast<unsigned>(x);
}
void assign(std::string& out, const json& v, const std::string& key) {
    if (!v.is_string()) throw ConfigError(key, "expected a string, got " + v.dump());
    out = v.get<std::string>();
}
void assign(bool& out, const json& v, const std::string& key) {
    if (!v.is_boolean()) throw ConfigError(key, "expected true or false, got " + v.dump());
    out = v.get<bool>();
}
template <class T>
void assign(std::optional<T>& out, const json& v, const std::string& key) {
    if (v.is_null()) {
        out.reset();
        return;
    }
    T x{};
    assign(x, v, key);
    out = x;
}

enum class Kind { number, integer, text, boolean };
Kind kind_of(double) { return Kind::number; }
Kind kind_of(const std::optional<double>&) { return Kind::number; }
Kind kind_of(int) { return Kind::integer; }
Kind kind_of(unsigned) { return Kind::integer; }
Kind kind_of(std::uint64_t) { return Kind::integer; }
Kind kind_of(const std::string&) { return Kind::text; }
Kind kind_of(const std::optional<bool>&) { return Kind::boolean; }

struct Field {
    std::string key;
    Kind kind;
    bool optional;
    std::function<void(ExperimentConfig&, const json&)> set;
    std::function<json(const ExperimentConfig&)> get;
};

template <class T>
constexpr bool is_optional(const T&) { return false; }
template <class T>
constexpr bool is_optional(const std::optional<T>&) { return true; }

#define FRONTLAB_FIELD(name, member)                                                             \
    Field {                                                                                      \
        name, kind_of(ExperimentConfig{}.member), is_optional(ExperimentConfig{}.member),        \
            [](ExperimentConfig& c, const json& v) { assign(c.member, v, name); },               \
            [](const ExperimentConfig& c) { return to_j(c.member); }                             \
    }

const std::vector<Field>& fields() {
    static const std::vector<Field> table{
        FRONTLAB_FIELD("nonlinearity.kind", nonlinearity.kind),
        FRONTLAB_FIELD("nonlinearity.theta", nonlinearity.theta),
        FRONTLAB_FIELD("nonlinearity.table_path", nonlinearity.table_path),
        FRONTLAB_FIELD("profile.tol", profile.tol),
        FRONTLAB_FIELD("dim", dim),
        FRONTLAB_FIELD("grid.dr", grid.dr),
        FRONTLAB_FIELD("grid.J", grid.J),
        FRONTLAB_FIELD("grid.window_lo", grid.window_lo),
        FRONTLAB_FIELD("grid.window_hi", grid.window_hi),
        FRONTLAB_FIELD("grid.dt", grid.dt),
        FRONTLAB_FIELD("grid.dt_max", grid.dt_max),
        FRONTLAB_FIELD("time.t_start", time.t_start),
        FRONTLAB_FIELD("time.t_final", time.t_final),
        FRONTLAB_FIELD("time.snapshot_every", time.snapshot_every),
        FRONTLAB_FIELD("time.field_every", time.field_every),
        FRONTLAB_FIELD("datum.frame", datum.frame),
        FRONTLAB_FIELD("datum.kind", datum.kind),
        FRONTLAB_FIELD("datum.r1", datum.r1),
        FRONTLAB_FIELD("datum.r2", datum.r2),
        FRONTLAB_FIELD("datum.width", datum.width),
        FRONTLAB_FIELD("datum.shape", datum.shape),
        FRONTLAB_FIELD("datum.a", datum.a),
        FRONTLAB_FIELD("datum.b", datum.b),
        FRONTLAB_FIELD("datum.R_bar", datum.R_bar),
        FRONTLAB_FIELD("datum.eps", datum.eps),
        FRONTLAB_FIELD("datum.m", datum.m),
        FRONTLAB_FIELD("fit.mode", fit.mode),
        FRONTLAB_FIELD("fit.window_lo", fit.window_lo),
        FRONTLAB_FIELD("fit.window_hi", fit.window_hi),
        FRONTLAB_FIELD("fit.c_star", fit.c_star),
        FRONTLAB_FIELD("fit.level", fit.level),
        FRONTLAB_FIELD("fit.noise", fit.noise),
        FRONTLAB_FIELD("fit.fronts_path", fit.fronts_path),
        FRONTLAB_FIELD("certificate.system", certificate.system),
        FRONTLAB_FIELD("certificate.delta", certificate.delta),
        FRONTLAB_FIELD("certificate.gamma", certificate.gamma),
        FRONTLAB_FIELD("certificate.C", certificate.C),
        FRONTLAB_FIELD("certificate.eta", certificate.eta),
        FRONTLAB_FIELD("certificate.eps", certificate.eps),
        FRONTLAB_FIELD("certificate.T_start", certificate.T_start),
        FRONTLAB_FIELD("certificate.t_final", certificate.t_final),
        FRONTLAB_FIELD("certificate.search_start", certificate.search_start),
        FRONTLAB_FIELD("certificate.shift_path", certificate.shift_path),
        FRONTLAB_FIELD("output.dir", output.dir),
        FRONTLAB_FIELD("output.path", output.path),
        FRONTLAB_FIELD("seed", seed),
        FRONTLAB_FIELD("threads", threads),
    };
    return table;
}

#undef FRONTLAB_FIELD

const Field& field(const std::string& key) {
    for (const auto& f : fields()) {
        if (f.key == key) return f;
    }
    throw ConfigError(key, "unknown key");
}

void flatten(const json& j, const std::string& prefix, std::vector<std::pair<std::string, json>>& out) {
    if (!j.is_object()) {
        out.emplace_back(prefix, j);
        return;
    }
    for (const auto& [k, v] : j.items()) {
        const std::string key = prefix.empty() ? k : prefix + "." + k;
        // A nested object under a leaf key is a type error, not a new key.
        if (v.is_object() && !v.empty()) {
            bool leaf = false;
            for (const auto& f : fields()) leaf = leaf || f.key == key;
            if (leaf) throw ConfigError(key, "expected a value, got an object");
            flatten(v, key, out);
        } else {
            out.emplace_back(key, v);
        }
    }
}

json parse_text(const Field& f, const std::string& text) {
    if (f.optional && (text.empty() || text == "null")) return nullptr;
    switch (f.kind) {
        case Kind::text:
            return text;
        case Kind::boolean:
            if (text == "true" || text == "1") return true;
            if (text == "false" || text == "0") return false;
            throw ConfigError(f.key, "expected true or false, got '" + text + "'");
        case Kind::integer: {
            std::size_t used = 0;
            long long x = 0;
            try {
                x = std::stoll(text, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used == 0 || used != text.size()) throw ConfigError(f.key, "expected an integer, got '" + text + "'");
            return x;
        }
        case Kind::number: {
            std::size_t used = 0;
            double x = 0;
            try {
                x = std::stod(text, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used == 0 || used != text.size()) throw ConfigError(f.key, "expected a number, got '" + text + "'");
            return x;
        }
    }
    return nullptr;
}

void require(bool ok, const std::string& key, const std::string& what) {
    if (!ok) throw ConfigError(key, what);
}

bool one_of(const std::string& v, std::initializer_list<const char*> options) {
    return std::any_of(options.begin(), options.end(), [&](const char* o) { return v == o; });
}

}  // namespace

json config_to_json(const ExperimentConfig& config) {
    json out = json::object();
    for (const auto& f : fields()) out[json::json_pointer("/" + [&] {
        std::string p = f.key;
        std::replace(p.begin(), p.end(), '.', '/');
        return p;
    }())] = f.get(config);
    return out;
}

ExperimentConfig config_from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("<root>", "config must be a JSON object");
    std::vector<std::pair<std::string, json>> flat;
    flatten(j, "", flat);
    ExperimentConfig c;
    for (const auto& [key, value] : flat) field(key).set(c, value);
    validate_config(c);
    return c;
}

ExperimentConfig parse_config(const std::optional<fs::path>& path,
                              const std::vector<std::pair<std::string, std::string>>& overrides) {
    json j = json::object();
    if (path) {
        std::ifstream in(*path);
        if (!in) throw ConfigError("--config", "cannot read '" + path->string() + "'");
        try {
            j = json::parse(in);
        } catch (const json::parse_error& e) {
            throw ConfigError("--config", std::string("malformed JSON: ") + e.what());
        }
        if (!j.is_object()) throw ConfigError("--config", "config must be a JSON object");
    }
    std::vector<std::pair<std::string, json>> flat;
    flatten(j, "", flat);
    for (const auto& [key, text] : overrides) flat.emplace_back(key, parse_text(field(key), text));
    ExperimentConfig c;
    for (const auto& [key, value] : flat) field(key).set(c, value);
    validate_config(c);
    return c;
}

void validate_config(const ExperimentConfig& c) {
    const auto& nl = c.nonlinearity;
    require(one_of(nl.kind, {"cubic", "tabulated"}), "nonlinearity.kind", "must be cubic or tabulated");
    if (nl.kind == "cubic") {
        require(nl.theta > 0.0 && nl.theta < 0.5, "nonlinearity.theta",
                "must lie in (0, 1/2) so that the wave invades (c* = (1 - 2 theta)/sqrt(2) > 0), got " +
                    format_number(nl.theta, 6));
    } else {
        require(!nl.table_path.empty(), "nonlinearity.table_path", "required for a tabulated nonlinearity");
        require(nl.theta > 0.0 && nl.theta < 1.0, "nonlinearity.theta", "must lie in (0, 1)");
    }
    require(c.profile.tol > 0.0 && c.profile.tol <= 1e-3, "profile.tol", "must lie in (0, 1e-3]");
    require(c.dim >= 1 && c.dim <= 10, "dim", "must lie in [1, 10]");
    require(c.grid.dr > 0.0 && c.grid.dr <= 1.0, "grid.dr", "must lie in (0, 1]");
    require(c.grid.J >= 8, "grid.J", "needs at least 8 angles");
    require(c.grid.window_lo < c.grid.window_hi, "grid.window_lo", "must be below grid.window_hi");
    require(c.grid.dt > 0.0, "grid.dt", "must be positive");
    require(c.grid.dt_max > 0.0, "grid.dt_max", "must be positive");
    require(c.time.t_start == 1.0, "time.t_start", "the solvers start at t = 1");
    require(c.time.t_final > 1.0, "time.t_final", "must exceed t_start = 1");
    require(c.time.snapshot_every > 0.0, "time.snapshot_every", "must be positive");
    require(c.time.field_every > 0.0, "time.field_every", "must be positive");
    const auto& d = c.datum;
    require(one_of(d.frame, {"lab", "moving"}), "datum.frame", "must be lab or moving");
    require(one_of(d.kind, {"ball_indicator", "smoothed_ball", "profile_cap"}), "datum.kind",
            "must be ball_indicator, smoothed_ball or profile_cap");
    require(d.r1 > 0.0, "datum.r1", "must be positive");
    require(d.r2 >= d.r1, "datum.r2", "must be at least datum.r1");
    require(d.width > 0.0, "datum.width", "must be positive");
    require(one_of(d.shape, {"ellipse", "star"}), "datum.shape", "must be ellipse or star");
    require(d.a > 0.0, "datum.a", "must be positive");
    require(d.b > 0.0, "datum.b", "must be positive");
    require(d.R_bar > 0.0, "datum.R_bar", "must be positive");
    require(d.eps >= 0.0 && d.eps < 1.0, "datum.eps", "must lie in [0, 1)");
    require(d.m >= 0, "datum.m", "must be non-negative");
    const auto& fit = c.fit;
    require(one_of(fit.mode, {"full", "fixed_speed", "offset_only"}), "fit.mode",
            "must be full, fixed_speed or offset_only");
    if (fit.window_lo && fit.window_hi) {
        require(*fit.window_lo < *fit.window_hi, "fit.window_lo", "must be below fit.window_hi");
    }
    if (fit.c_star) require(*fit.c_star > 0.0, "fit.c_star", "must be positive");
    require(fit.level > 0.0 && fit.level < 1.0, "fit.level", "must lie in (0, 1)");
    require(fit.noise >= 0.0, "fit.noise", "must be non-negative");
    const auto& cert = c.certificate;
    require(one_of(cert.system, {"41", "310"}), "certificate.system", "must be 41 or 310");
    if (cert.delta) require(*cert.delta > 0.0, "certificate.delta", "must be positive");
    if (cert.gamma) require(*cert.gamma > 0.0, "certificate.gamma", "must be positive");
    if (cert.C) require(*cert.C >= 0.0, "certificate.C", "must be non-negative");
    if (cert.eta) require(*cert.eta >= 0.0, "certificate.eta", "must be non-negative");
    require(cert.system == "310" ? cert.eps >= 0.0 : cert.eps > 0.0, "certificate.eps",
            cert.system == "310" ? "must be non-negative" : "must be positive");
    require(cert.T_start > 1.0, "certificate.T_start", "must exceed 1");
    require(cert.t_final > cert.T_start, "certificate.t_final", "must exceed certificate.T_start");
    require(!c.output.dir.empty(), "output.dir", "must not be empty");
}

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : bytes) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t config_hash(const ExperimentConfig& config) {
    json j = config_to_json(config);
    j.erase("output");
    j.erase("threads");
    return fnv1a64(j.dump());
}

std::string hash_hex(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string format_number(double x, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, x);
    return buf;
}

void write_csv(const fs::path& path, const std::vector<std::string>& header,
               const std::vector<const std::vector<double>*>& columns, int digits) {
    if (header.size() != columns.size()) throw std::invalid_argument("header and column counts differ");
    const std::size_t n = columns.empty() ? 0 : columns.front()->size();
    for (const auto* c : columns) {
        if (c->size() != n) throw std::invalid_argument("columns of unequal length for " + path.string());
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    for (std::size_t k = 0; k < header.size(); ++k) out << (k ? "," : "") << header[k];
    out << '\n';
    std::string line;
    for (std::size_t i = 0; i < n; ++i) {
        line.clear();
        for (std::size_t k = 0; k < columns.size(); ++k) {
            if (k) line += ',';
            line += format_number((*columns[k])[i], digits);
        }
        line += '\n';
        out << line;
    }
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

const std::vector<double>& CsvTable::column(const std::string& name) const {
    for (std::size_t k = 0; k < header.size(); ++k) {
        if (header[k] == name) return columns[k];
    }
    throw ConfigError("input", "missing column '" + name + "'");
}

CsvTable read_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("input", "cannot read '" + path.string() + "'");
    CsvTable t;
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("input", "empty file '" + path.string() + "'");
    {
        std::stringstream ss(line);
        std::string name;
        while (std::getline(ss, name, ',')) {
            name.erase(std::remove_if(name.begin(), name.end(), [](unsigned char ch) { return std::isspace(ch); }),
                       name.end());
            t.header.push_back(name);
        }
    }
    t.columns.resize(t.header.size());
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty() || line == "\r") continue;
        std::stringstream ss(line);
        std::string cell;
        std::size_t k = 0;
        while (std::getline(ss, cell, ',')) {
            std::size_t used = 0;
            double x = 0;
            try {
                x = std::stod(cell, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used == 0 || k >= t.columns.size()) {
                throw ConfigError("input", path.string() + ": malformed row " + std::to_string(row));
            }
            t.columns[k++].push_back(x);
        }
        if (k != t.columns.size()) throw ConfigError("input", path.string() + ": short row " + std::to_string(row));
    }
    return t;
}

void write_json(const fs::path& path, const json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << j.dump(2) << '\n';
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

fs::path make_run_directory(const fs::path& base, std::uint64_t hash) {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y%m%dT%H%M%S", &tm);
    const std::string name = std::string(stamp) + "_" + hash_hex(hash);
    fs::create_directories(base);
    fs::path dir = base / name;
    for (int n = 1; !fs::create_directory(dir); ++n) dir = base / (name + "_" + std::to_string(n));
    return dir;
}

std::string to_string(Subcommand s) {
    switch (s) {
        case Subcommand::profile: return "profile";
        case Subcommand::simulate1d: return "simulate1d";
        case Subcommand::simulate2d: return "simulate2d";
        case Subcommand::fit: return "fit";
        case Subcommand::certify: return "certify";
        case Subcommand::report: return "report";
    }
    return "?";
}

Subcommand subcommand_from_string(const std::string& name) {
    for (auto s : {Subcommand::profile, Subcommand::simulate1d, Subcommand::simulate2d, Subcommand::fit,
                   Subcommand::certify, Subcommand::report}) {
        if (to_string(s) == name) return s;
    }
    throw ConfigError("subcommand", "unknown subcommand '" + name + "'");
}

bool RunReport::pass() const { return json.value("pass", false); }

namespace {

const json& module_versions() {
    static const json v{{"frontlab", "1.0.0"},     {"nonlinearity", 1}, {"wave_profile", 1},
                        {"radial_solver", 1},      {"angular_solver", 1}, {"front_analysis", 1},
                        {"certificates", 1},       {"cli_io", 1}};
    return v;
}

json check_json(const Check& c) {
    return {{"name", c.name}, {"value", c.value}, {"target", c.target}, {"tolerance", c.tolerance}, {"pass", c.pass}};
}

// Non-finite numbers become null in JSON.
json num(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

BistableNonlinearity make_nonlinearity(const ExperimentConfig& c) {
    if (c.nonlinearity.kind == "cubic") return make_cubic(c.nonlinearity.theta);
    return load_tabulated(c.nonlinearity.table_path, c.nonlinearity.theta);
}

std::vector<double> cadence(double every, double t_final) {
    std::vector<double> out;
    for (long n = 1;; ++n) {
        const double t = static_cast<double>(n) * every;
        if (!(t < t_final)) break;
        if (t > 1.0) out.push_back(t);
    }
    return out;
}

bool on_cadence(double t, double every) {
    const double n = std::round(t / every);
    return n >= 1.0 && std::abs(n * every - t) < 1e-9 * std::max(1.0, t);
}

// Where the primary artifact and its companions go.
struct Destination {
    fs::path dir;
    fs::path primary;
    std::string prefix;  // "" for a run directory, "<stem>_" next to an explicit file
};

Destination destination(const ExperimentConfig& c, const std::string& default_name) {
    Destination d;
    if (c.output.path.empty()) {
        d.dir = make_run_directory(c.output.dir, config_hash(c));
        d.primary = d.dir / default_name;
        return d;
    }
    const fs::path p = c.output.path;
    const std::string ext = p.extension().string();
    if (ext == ".csv" || ext == ".json") {
        d.dir = p.parent_path().empty() ? fs::path(".") : p.parent_path();
        d.primary = p;
        d.prefix = p.stem().string() + "_";
    } else {
        d.dir = p;
        d.primary = d.dir / default_name;
    }
    fs::create_directories(d.dir);
    return d;
}

struct Context {
    const ExperimentConfig& config;
    Destination dest;
    json results = json::object();
    std::vector<Check> checks;
    json files = json::array();

    void add_file(const fs::path& p) { files.push_back(p.filename().string()); }
    void check(std::string name, double value, double target, double tolerance, bool pass) {
        checks.push_back({std::move(name), value, target, tolerance, pass});
    }
};

double cubic_speed(double theta) { return (1.0 - 2.0 * theta) / std::numbers::sqrt2; }

json fit_json(const FrontFit& fit) {
    return {{"c_fit", fit.c_fit},
            {"k_fit", fit.k_fit},
            {"s_fit", fit.s_fit},
            {"residual_rms", fit.residual_rms},
            {"window", {fit.window_lo, fit.window_hi}},
            {"mode", to_string(fit.mode)},
            {"samples", fit.samples}};
}

void run_profile(Context& ctx) {
    const auto& c = ctx.config;
    const auto f = make_nonlinearity(c);
    const WaveProfile p = solve_profile(f, c.profile.tol);
    write_csv(ctx.dest.primary, {"xi", "u", "du"}, {&p.xi_grid, &p.u_values, &p.du_values}, 15);
    ctx.add_file(ctx.dest.primary);
    ctx.results["c_star"] = p.c_star;
    ctx.results["c_bracket_width"] = p.c_bracket_width;
    ctx.results["rate_left"] = p.rate_left;
    ctx.results["rate_right"] = p.rate_right;
    ctx.results["ode_residual"] = profile_ode_residual(p);
    ctx.results["grid"] = {{"xi_min", p.xi_min()}, {"xi_max", p.xi_max()}, {"spacing", p.spacing()}};
    if (c.nonlinearity.kind == "cubic") {
        const double target = cubic_speed(c.nonlinearity.theta);
        ctx.check("c_star_vs_closed_form", p.c_star, target, 1e-4, std::abs(p.c_star - target) < 1e-4);
    }
}

void run_simulate1d(Context& ctx) {
    const auto& c = ctx.config;
    const auto f = make_nonlinearity(c);
    const WaveProfile profile = solve_profile(f, c.profile.tol);
    RadialSimulation sim;
    sim.frame.frame = c.datum.frame == "lab" ? Frame::lab : Frame::moving;
    sim.frame.dim = c.dim;
    sim.frame.c_star = profile.c_star;
    sim.datum.kind = c.datum.kind == "smoothed_ball" ? DatumKind::smoothed_ball
                     : c.datum.kind == "profile_cap" ? DatumKind::profile_cap
                                                     : DatumKind::ball_indicator;
    sim.datum.r1 = c.datum.r1;
    sim.datum.r2 = c.datum.r2;
    sim.datum.width = c.datum.width;
    sim.dr = c.grid.dr;
    sim.dt = c.grid.dt;
    sim.window_lo = c.grid.window_lo;
    sim.window_hi = c.grid.window_hi;
    sim.t_final = c.time.t_final;
    sim.snapshot_times = cadence(c.time.snapshot_every, c.time.t_final);
    sim.level = c.fit.level;
    const RadialSimulationResult res = simulate_radial(f, sim, &profile);

    std::vector<double> t, r, u;
    for (const auto& s : res.run.snapshots) {
        if (!on_cadence(s.t, c.time.field_every) && s.t != res.run.snapshots.back().t) continue;
        for (std::size_t i = 0; i < s.r.size(); ++i) {
            t.push_back(s.t);
            r.push_back(s.r[i]);
            u.push_back(s.u[i]);
        }
    }
    write_csv(ctx.dest.primary, {"t", "r", "u"}, {&t, &r, &u});
    ctx.add_file(ctx.dest.primary);

    const FrontHistory& h = res.run.history;
    std::vector<double> delay(h.size());
    for (std::size_t i = 0; i < h.size(); ++i) delay[i] = profile.c_star * h.times[i] - h.positions[i];
    const fs::path fronts = ctx.dest.dir / (ctx.dest.prefix + "fronts.csv");
    write_csv(fronts, {"t", "r_level", "delay"}, {&h.times, &h.positions, &delay});
    ctx.add_file(fronts);

    const double target = (c.dim - 1) / profile.c_star;
    ctx.results["c_star"] = profile.c_star;
    ctx.results["frame"] = c.datum.frame;
    ctx.results["switch_time"] = res.switch_time;
    ctx.results["snapshots"] = res.run.snapshots.size();
    ctx.results["k_target"] = target;
    ctx.results["r_level_final"] = h.positions.empty() ? json(nullptr) : json(h.positions.back());
    try {
        const FrontFit fit = fit_log_shift(h, fit_mode_from_string(c.fit.mode), profile.c_star, c.fit.window_lo,
                                           c.fit.window_hi);
        ctx.results["fit"] = fit_json(fit);
        if (fit.mode != FitMode::offset_only) {
            ctx.check("k_fit_vs_target", fit.k_fit, target, 0.1 * target,
                      std::abs(fit.k_fit - target) <= 0.1 * target);
        }
    } catch (const NumericalError& e) {
        if (e.kind() != NumericalError::Kind::fit) throw;
        ctx.results["fit"] = nullptr;
        ctx.results["fit_skipped"] = e.what();
    }
}

double symmetry_error(const AngularShift& s, bool quarter) {
    // Reflections Theta -> -Theta and Theta -> pi - Theta on the uniform angle grid.
    const std::size_t J = s.s_values.size();
    double err = 0.0;
    for (std::size_t j = 0; j < J; ++j) {
        const std::size_t a = (J - j) % J;
        err = std::max(err, std::abs(s.s_values[j] - s.s_values[a]));
        if (quarter) {
            const std::size_t b = (J / 2 + J - j) % J;
            err = std::max(err, std::abs(s.s_values[j] - s.s_values[b]));
        }
    }
    return err;
}

void run_simulate2d(Context& ctx) {
    const auto& c = ctx.config;
    if (c.dim != 2) throw ConfigError("dim", "simulate2d needs dim = 2");
    const auto f = make_nonlinearity(c);
    const WaveProfile profile = solve_profile(f, c.profile.tol);
    const GapConstants gaps = derive_gap_constants(f, profile);

    PolarSimulation sim;
    sim.shape.kind = c.datum.shape == "star" ? ShapeKind::star : ShapeKind::ellipse;
    sim.shape.a = c.datum.a;
    sim.shape.b = c.datum.b;
    sim.shape.R_bar = c.datum.R_bar;
    sim.shape.eps = c.datum.eps;
    sim.shape.m = c.datum.m;
    sim.dr = c.grid.dr;
    sim.J = c.grid.J;
    sim.dt_max = c.grid.dt_max;
    sim.t_final = c.time.t_final;
    sim.snapshot_times = cadence(c.time.snapshot_every, c.time.t_final);
    for (double t : cadence(c.time.field_every, c.time.t_final)) sim.snapshot_times.push_back(t);
    sim.keep_snapshots = false;

    std::vector<double> dt, dgrad, derr, dslope;
    std::deque<PolarField> recent;  // last five diagnostic snapshots
    std::size_t diag_every_hits = 0;
    sim.on_snapshot = [&](const PolarField& field) {
        const bool last = std::abs(field.t - c.time.t_final) < 1e-9;
        if (on_cadence(field.t, c.time.field_every) || last) {
            std::vector<double> r, th, u;
            r.reserve(field.u.size());
            th.reserve(field.u.size());
            for (std::size_t j = 0; j < field.J(); ++j) {
                for (std::size_t i = 0; i < field.nr(); ++i) {
                    r.push_back(field.r[i]);
                    th.push_back(field.theta[j]);
                }
            }
            const fs::path p = ctx.dest.dir / (ctx.dest.prefix + "field_t" + format_number(field.t, 10) + ".csv");
            write_csv(p, {"r", "theta", "u"}, {&r, &th, &field.u});
            ctx.add_file(p);
        }
        if (!on_cadence(field.t, c.time.snapshot_every) && !last) return;
        ++diag_every_hits;
        const AngularShift shift = extract_angular_shift(field, c.fit.level, profile);
        dt.push_back(field.t);
        dgrad.push_back(angular_gradient_max(field));
        derr.push_back(shifted_wave_error(field, shift, profile));
        dslope.push_back(min_slope_near_front(field, shift, gaps.M));
        recent.push_back(field);
        if (recent.size() > 5) recent.pop_front();
    };
    const PolarRun run = simulate_polar(f, profile, sim);
    const PolarField& final_field = run.snapshots.back();

    const fs::path diag = ctx.dest.dir / (ctx.dest.prefix + "diagnostics.csv");
    write_csv(diag, {"t", "grad_theta_max", "sup_err_vs_shifted_wave", "min_V_window"}, {&dt, &dgrad, &derr, &dslope});
    ctx.add_file(diag);

    const AngularShift shift = extract_angular_shift(final_field, c.fit.level, profile);
    write_csv(ctx.dest.primary, {"theta_rad", "s_value"}, {&shift.theta, &shift.s_values});
    ctx.add_file(ctx.dest.primary);

    const auto [s_lo, s_hi] = std::minmax_element(shift.s_values.begin(), shift.s_values.end());
    const double range = *s_hi - *s_lo;
    std::vector<double> tail;  // error of the last snapshots against the final shift
    for (const auto& fld : recent) tail.push_back(shifted_wave_error(fld, shift, profile));
    bool non_increasing = tail.size() >= 2;
    for (std::size_t i = 1; i < tail.size(); ++i) non_increasing = non_increasing && tail[i] <= tail[i - 1];

    auto window_max = [&](double lo, double hi) {
        double m = -1.0;
        for (std::size_t i = 0; i < dt.size(); ++i) {
            if (dt[i] >= lo - 1e-9 && dt[i] <= hi + 1e-9) m = std::max(m, dgrad[i]);
        }
        return m;
    };
    double slope_floor = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < dt.size(); ++i) {
        if (dt[i] >= 50.0) slope_floor = std::min(slope_floor, dslope[i]);
    }

    ctx.results["c_star"] = profile.c_star;
    ctx.results["steps"] = run.steps;
    ctx.results["window"] = {final_field.r.front(), final_field.r.back()};
    ctx.results["gap_constants"] = {{"mu0", gaps.mu0}, {"delta", gaps.delta}, {"M", gaps.M}, {"delta_M", gaps.delta_M}};
    ctx.results["s_range"] = range;
    ctx.results["s_min"] = *s_lo;
    ctx.results["s_max"] = *s_hi;
    ctx.results["lipschitz_estimate"] = shift.lipschitz_estimate;
    ctx.results["sup_err_final"] = shifted_wave_error(final_field, shift, profile);
    ctx.results["sup_err_last_snapshots"] = tail;
    ctx.results["grad_theta_max_final"] = angular_gradient_max(final_field);
    ctx.results["diagnostic_snapshots"] = diag_every_hits;

    const double err = ctx.results["sup_err_final"].get<double>();
    ctx.check("sup_err_final", err, 0.0, 0.05, err < 0.05);
    ctx.check("sup_err_non_increasing_last5", tail.empty() ? 0.0 : tail.back(), 0.0, 0.0,
              non_increasing && tail.size() == 5);
    ctx.check("s_range_over_10dr", range, 10.0 * c.grid.dr, 0.0, range > 10.0 * c.grid.dr);
    if (sim.shape.kind == ShapeKind::ellipse && c.grid.J % 2 == 0) {
        const double sym = symmetry_error(shift, true);
        ctx.results["symmetry_error"] = sym;
        ctx.check("ellipse_reflection_symmetry", sym, 0.0, 2.0 * c.grid.dr, sym <= 2.0 * c.grid.dr);
    }
    if (c.time.t_final >= 400.0 - 1e-9) {
        const double g1 = window_max(100.0, 200.0), g2 = window_max(200.0, 400.0);
        const double change = std::abs(g2 - g1) / std::max(g1, 1e-300);
        ctx.results["grad_theta_max_100_200"] = g1;
        ctx.results["grad_theta_max_200_400"] = g2;
        const bool radial = sim.shape.kind == ShapeKind::ellipse ? c.datum.a == c.datum.b : c.datum.eps == 0.0;
        if (radial) {
            ctx.check("grad_theta_radial", std::max(g1, g2), 0.0, 1e-8, std::max(g1, g2) < 1e-8);
        } else {
            ctx.check("grad_theta_stabilization", change, 0.0, 0.1, change < 0.1);
        }
    }
    if (std::isfinite(slope_floor)) {
        ctx.results["min_slope_t_ge_50"] = slope_floor;
        ctx.check("slope_floor", slope_floor, 0.5 * gaps.delta_M, 0.0, slope_floor >= 0.5 * gaps.delta_M);
    }
}

void run_fit(Context& ctx) {
    const auto& c = ctx.config;
    if (c.fit.fronts_path.empty()) throw ConfigError("fit.fronts_path", "fit needs --fronts");
    const CsvTable table = read_csv(c.fit.fronts_path);
    FrontHistory h;
    h.level = c.fit.level;
    h.times = table.column("t");
    h.positions = table.column("r_level");
    if (c.fit.noise > 0.0) {
        std::mt19937_64 rng(c.seed);
        std::normal_distribution<double> noise(0.0, c.fit.noise);
        for (double& x : h.positions) x += noise(rng);
    }
    double c_star = 0.0;
    if (c.fit.c_star) {
        c_star = *c.fit.c_star;
    } else {
        c_star = solve_profile(make_nonlinearity(c), c.profile.tol).c_star;
    }
    const FrontFit fit = fit_log_shift(h, fit_mode_from_string(c.fit.mode), c_star, c.fit.window_lo, c.fit.window_hi);
    write_json(ctx.dest.primary, fit_json(fit));
    ctx.add_file(ctx.dest.primary);
    const double target = (c.dim - 1) / c_star;
    ctx.results["fit"] = fit_json(fit);
    ctx.results["c_star"] = c_star;
    ctx.results["k_target"] = target;
    if (fit.mode != FitMode::offset_only) {
        ctx.check("k_fit_vs_target", fit.k_fit, target, 0.1 * target, std::abs(fit.k_fit - target) <= 0.1 * target);
    }
}

json params_json(const CertificateParams& p) {
    return {{"delta", p.delta},     {"gamma", p.gamma},   {"eta", p.eta},         {"C", p.C_const},
            {"eps", p.eps},         {"T_start", p.T_start}, {"t_final", p.t_final}, {"c_star", p.c_star},
            {"k", p.k_shift()},     {"N", p.N_dim},       {"F", p.F}};
}

void run_certify(Context& ctx) {
    const auto& c = ctx.config;
    const auto& cc = c.certificate;
    const auto f = make_nonlinearity(c);
    const WaveProfile profile = solve_profile(f, c.profile.tol);
    const bool with_shift = !cc.shift_path.empty();
    if (with_shift && cc.system != "41") throw ConfigError("certificate.shift_path", "a shift applies to system 41 only");

    CertificateParams p;
    p.c_star = profile.c_star;
    p.N_dim = c.dim;
    p.F = f.f_lipschitz();
    p.eps = cc.eps;
    p.T_start = cc.T_start;
    p.t_final = cc.t_final;

    json out = json::object();
    Certificate cert;
    if (cc.system == "310") {
        p.delta = cc.delta.value_or(1.0);
        p.gamma = cc.gamma.value_or(1.0);
        p.C_const = cc.C.value_or(1.0);
        p.eta = cc.eta.value_or(0.01);
        const double e = cc.eps;
        cert = integrate_growth_system(p, [e](double) { return e; });
        out["params"] = params_json(p);
        out["system"] = "310";
        out["envelope_pass"] = nullptr;
        out["K"] = nullptr;
        out["residual_min"] = nullptr;
        out["condition_4_12_pass"] = nullptr;
        out["condition_4_14_pass"] = nullptr;
        out["growth_exponent"] = num(cert.growth_exponent.value_or(std::nan("")));
        ctx.results["growth_exponent"] = out["growth_exponent"];
    } else {
        std::optional<MollifiedShift> shift;
        std::optional<GapConstants> gaps;
        if (with_shift) {
            const CsvTable table = read_csv(cc.shift_path);
            shift = mollify_shift(table.column("s_value"), cc.eps);
            gaps = derive_gap_constants(f, profile);
            p.delta = cc.delta.value_or(gaps->delta);
            p.gamma = cc.gamma.value_or(gaps->delta_M);
            p.C_const = cc.C.value_or(2.0 * std::max(1.0, shift->lipschitz_in));
            p.eta = cc.eta.value_or(1e-3);
        } else {
            p.delta = cc.delta.value_or(1.0);
            p.gamma = cc.gamma.value_or(1.0);
            p.C_const = cc.C.value_or(1.0);
            p.eta = cc.eta.value_or(0.01);
        }
        if (cc.search_start.value_or(with_shift)) p = find_start_time(p, cc.t_final / cc.T_start);
        cert = integrate_decay_system(p);
        double sup_xi = 0.0;
        for (double x : cert.xi_values) sup_xi = std::max(sup_xi, x);
        out["params"] = params_json(p);
        out["system"] = "41";
        out["envelope_pass"] = cert.envelope_pass;
        out["K"] = num(cert.K);
        out["sup_xi"] = sup_xi;
        out["q_final"] = cert.q_values.back();
        ctx.check("envelope", cert.K, 0.0, 0.0, cert.envelope_pass);
        if (shift) {
            const ResidualReport r = supersolution_residual(f, profile, *gaps, *shift, cert, p);
            const ResidualReport flipped = supersolution_residual(f, profile, *gaps, *shift, cert, p, {}, true);
            out["residual_min"] = r.residual_min;
            out["condition_4_12_pass"] = r.outer_condition_pass;
            out["condition_4_14_pass"] = r.inner_condition_pass;
            out["residual_at"] = {{"t", r.t_at}, {"rho", r.rho_at}, {"theta", r.theta_at}};
            out["residual_scale"] = r.scale;
            out["lattice_points"] = r.points;
            out["implication_violations"] = r.implication_violations;
            out["flipped_q_residual_min"] = flipped.residual_min;
            out["mollifier"] = {{"eps", shift->eps},
                                {"support_halfwidth", shift->support_halfwidth},
                                {"offset", shift->offset},
                                {"lipschitz_in", shift->lipschitz_in},
                                {"lipschitz_out", shift->lipschitz_out},
                                {"laplacian_out", shift->laplacian_out},
                                {"gradient_bound_ok", shift->gradient_bound_ok},
                                {"laplacian_bound_ok", shift->laplacian_bound_ok}};
            out["grid"] = {{"n_times", cert.grid_spec.n_times},
                           {"rho_lo", cert.grid_spec.rho_lo},
                           {"rho_hi", cert.grid_spec.rho_hi},
                           {"rho_step", cert.grid_spec.rho_step},
                           {"angles", shift->theta.size()}};
            ctx.check("residual_min", r.residual_min, 0.0, 1e-8, r.residual_min >= -1e-8);
            ctx.check("condition_4_12", r.outer_condition_pass, 1.0, 0.0, r.outer_condition_pass);
            ctx.check("condition_4_14", r.inner_condition_pass, 1.0, 0.0, r.inner_condition_pass);
            ctx.check("flipped_q_negative", flipped.residual_min, 0.0, 0.0, flipped.residual_min < 0.0);
        } else {
            out["residual_min"] = nullptr;
            out["condition_4_12_pass"] = nullptr;
            out["condition_4_14_pass"] = nullptr;
        }
    }
    write_json(ctx.dest.primary, out);
    ctx.add_file(ctx.dest.primary);
    const fs::path csv = ctx.dest.dir / (ctx.dest.prefix + "certificate.csv");
    write_csv(csv, {"t", "q", "xi"}, {&cert.times, &cert.q_values, &cert.xi_values});
    ctx.add_file(csv);
    ctx.results["certificate"] = out;
}

void run_report(Context& ctx, const std::vector<fs::path>& inputs) {
    if (inputs.empty()) throw ConfigError("--in", "report needs at least one run directory");
    std::vector<fs::path> found;
    for (const auto& in : inputs) {
        if (!fs::exists(in)) throw ConfigError("--in", "no such path '" + in.string() + "'");
        if (fs::is_regular_file(in)) {
            found.push_back(in);
            continue;
        }
        for (const auto& e : fs::recursive_directory_iterator(in)) {
            const std::string name = e.path().filename().string();
            if (e.is_regular_file() && name.size() >= 11 && name.ends_with("report.json")) found.push_back(e.path());
        }
    }
    std::sort(found.begin(), found.end());
    json runs = json::array();
    std::size_t failed = 0;
    for (const auto& p : found) {
        std::ifstream in(p);
        json r;
        try {
            r = json::parse(in);
        } catch (const json::parse_error& e) {
            throw ConfigError("input", p.string() + ": " + e.what());
        }
        if (!r.contains("checks")) continue;  // an earlier aggregate
        const bool pass = r.value("pass", false);
        failed += pass ? 0 : 1;
        runs.push_back({{"path", p.string()},
                        {"subcommand", r.value("subcommand", "")},
                        {"config_hash", r.value("config_hash", "")},
                        {"pass", pass},
                        {"checks", r["checks"]}});
        for (const auto& ch : r["checks"]) {
            ctx.check(r.value("subcommand", "") + ":" + ch.value("name", ""), ch.value("value", 0.0),
                      ch.value("target", 0.0), ch.value("tolerance", 0.0), ch.value("pass", false));
        }
    }
    ctx.results["runs"] = runs;
    ctx.results["failed_runs"] = failed;
    write_json(ctx.dest.primary, {{"runs", runs}, {"pass", failed == 0 && !runs.empty()}});
    ctx.add_file(ctx.dest.primary);
}

std::string primary_name(Subcommand s) {
    switch (s) {
        case Subcommand::profile: return "profile.csv";
        case Subcommand::simulate1d: return "snapshots.csv";
        case Subcommand::simulate2d: return "shift.csv";
        case Subcommand::fit: return "fit.json";
        case Subcommand::certify: return "cert.json";
        case Subcommand::report: return "summary.json";
    }
    return "out";
}

}  // namespace

RunReport run_experiment(const ExperimentConfig& config, Subcommand command, const std::vector<fs::path>& inputs) {
    validate_config(config);
    set_thread_count(config.threads ? config.threads : std::max(1u, std::thread::hardware_concurrency()));
    const std::string name = to_string(command);
    Context ctx{config, destination(config, primary_name(command)), json::object(), {}, json::array()};
    try {
        switch (command) {
            case Subcommand::profile: run_profile(ctx); break;
            case Subcommand::simulate1d: run_simulate1d(ctx); break;
            case Subcommand::simulate2d: run_simulate2d(ctx); break;
            case Subcommand::fit: run_fit(ctx); break;
            case Subcommand::certify: run_certify(ctx); break;
            case Subcommand::report: run_report(ctx, inputs); break;
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const NumericalError& e) {
        throw NumericalError(e.kind(), name + ": " + e.what());
    } catch (const ParameterError& e) {
        throw ParameterError(name + ": " + e.what());
    }

    const fs::path config_path = ctx.dest.dir / (ctx.dest.prefix + "config.json");
    write_json(config_path, config_to_json(config));

    RunReport report;
    report.directory = ctx.dest.dir;
    report.primary = ctx.dest.primary;
    bool pass = true;
    json checks = json::array();
    for (const auto& ch : ctx.checks) {
        checks.push_back(check_json(ch));
        pass = pass && ch.pass;
    }
    if (command == Subcommand::report && ctx.checks.empty()) pass = false;
    report.json = {{"subcommand", name},
                   {"config_hash", hash_hex(config_hash(config))},
                   {"versions", module_versions()},
                   {"results", ctx.results},
                   {"checks", checks},
                   {"pass", pass},
                   {"files", ctx.files}};
    write_json(ctx.dest.dir / (ctx.dest.prefix + "report.json"), report.json);
    return report;
}

}  // namespace frontlab
