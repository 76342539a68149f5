#pragma once

// Experiment configuration, deterministic CSV/JSON emission and the subcommand pipeline
// shared by the command-line tool and the acceptance runner.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

namespace frontlab {

/// Every field has a default; a default config runs every subcommand end to end.
/// Keys are the dotted paths of the JSON form, e.g. "nonlinearity.theta".
struct ExperimentConfig {
    struct Nonlinearity {
        std::string kind = "cubic";  // cubic | tabulated
        double theta = 0.25;
        std::string table_path;  // CSV with columns u,f (tabulated only)
    } nonlinearity;
    struct Profile {
        double tol = 1e-10;
    } profile;
    int dim = 2;
    struct Grid {
        double dr = 0.05;
        int J = 256;
        double window_lo = -60.0;  // moving-frame window of the 1D solver
        double window_hi = 60.0;
        double dt = 0.01;      // 1D step
        double dt_max = 0.05;  // 2D step cap; the stability bound may lower it
    } grid;
    struct Time {
        double t_start = 1.0;  // fixed: every solver starts at t = 1
        double t_final = 400.0;
        double snapshot_every = 1.0;  // front / diagnostic cadence
        double field_every = 100.0;   // cadence of full-field CSVs
    } time;
    struct Datum {
        std::string frame = "moving";  // lab | moving (1D)
        std::string kind = "ball_indicator";  // ball_indicator | smoothed_ball | profile_cap
        double r1 = 8.0;
        double r2 = 8.0;
        double width = 1.0;
        std::string shape = "ellipse";  // ellipse | star (2D)
        double a = 30.0;
        double b = 20.0;
        double R_bar = 25.0;
        double eps = 0.1;
        int m = 3;
    } datum;
    struct Fit {
        std::string mode = "fixed_speed";  // full | fixed_speed | offset_only
        std::optional<double> window_lo;   // default: last time / 4
        std::optional<double> window_hi;
        std::optional<double> c_star;  // default: solved from the nonlinearity
        double level = 0.5;
        double noise = 0.0;  // std of Gaussian noise added to positions (seeded)
        std::string fronts_path;
    } fit;
    struct Certificate {
        std::string system = "41";  // 41 (coupled decay) | 310 (log growth)
        std::optional<double> delta;    // default 1, or the gap constant with a shift
        std::optional<double> gamma;    // default 1, or delta_M with a shift
        std::optional<double> C;        // default 1, or 2 max(1, Lipschitz(s)) with a shift
        std::optional<double> eta;      // default 0.01, or 1e-3 with a shift
        double eps = 0.1;
        double T_start = 1e3;
        double t_final = 1e5;
        std::optional<bool> search_start;  // default: true with a shift
        std::string shift_path;            // shift.csv of a 2D run
    } certificate;
    struct Output {
        std::string dir = "runs";  // parent of timestamp_hash run directories
        std::string path;          // explicit directory or file; overrides dir
    } output;
    std::uint64_t seed = 0;
    unsigned threads = 0;  // 0: hardware concurrency
};

nlohmann::json config_to_json(const ExperimentConfig& config);

/// Accepts nested objects, dotted keys, or a mix. Throws ConfigError naming the key on an
/// unknown key, a type mismatch, or a violated invariant.
ExperimentConfig config_from_json(const nlohmann::json& j);

/// Loads `path` (when given), then applies `overrides` (dotted key, textual value) in order,
/// so flags win over the file. Validated.
ExperimentConfig parse_config(const std::optional<std::filesystem::path>& path,
                              const std::vector<std::pair<std::string, std::string>>& overrides = {});

/// Throws ConfigError on the first violated invariant.
void validate_config(const ExperimentConfig& config);

std::uint64_t fnv1a64(std::string_view bytes);

/// FNV-1a 64 of the canonical JSON of everything that affects results (output location
/// and thread count excluded).
std::uint64_t config_hash(const ExperimentConfig& config);
std::string hash_hex(std::uint64_t h);

/// printf %.{digits}g.
std::string format_number(double x, int digits = 17);

/// Columns of equal length under a fixed header. Throws std::runtime_error on I/O failure.
void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<const std::vector<double>*>& columns, int digits = 17);

/// Numeric columns by header name. Throws ConfigError("input", ...) on a missing file,
/// a missing column or a malformed number.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> columns;
    const std::vector<double>& column(const std::string& name) const;
};
CsvTable read_csv(const std::filesystem::path& path);

/// Pretty-printed JSON with a trailing newline.
void write_json(const std::filesystem::path& path, const nlohmann::json& j);

/// base / "<UTC yyyymmddTHHMMSS>_<hash hex>", created. A numeric suffix avoids collisions.
std::filesystem::path make_run_directory(const std::filesystem::path& base, std::uint64_t hash);

enum class Subcommand { profile, simulate1d, simulate2d, fit, certify, report };
std::string to_string(Subcommand s);
Subcommand subcommand_from_string(const std::string& name);

struct Check {
    std::string name;
    double value = 0.0;
    double target = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

struct RunReport {
    std::filesystem::path directory;
    std::filesystem::path primary;  // main artifact (profile.csv, fit.json, cert.json, ...)
    nlohmann::json json;            // also written to directory / report.json
    bool pass() const;              // all checks pass
};

/// Runs one subcommand and writes its CSVs, config.json and report.json. The output goes
/// to output.path when set (a .csv/.json path names the primary artifact and its parent
/// holds the rest), else to a fresh run directory under output.dir. For `report`,
/// `inputs` lists run directories (searched recursively for report.json) to aggregate.
/// Module errors propagate with the subcommand name prefixed.
RunReport run_experiment(const ExperimentConfig& config, Subcommand command,
                         const std::vector<std::filesystem::path>& inputs = {});

/// Exit status for the tool: 0 success, 2 config error, 3 numerical failure, 4 failed
/// acceptance check (report only).
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumerical = 3;
inline constexpr int kExitAcceptance = 4;

}  // namespace frontlab
