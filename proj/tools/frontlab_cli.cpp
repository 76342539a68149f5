// frontlab: profile, simulate1d, simulate2d, fit, certify, report.
// Every flag is an override of a config key; see README for the key list.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "frontlab/cli_io.hpp"
#include "frontlab/errors.hpp"

namespace {

using Overrides = std::vector<std::pair<std::string, std::string>>;

void key_option(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help, Overrides& ov) {
    app->add_option_function<std::string>(
        flag, [&ov, key](const std::string& v) { ov.emplace_back(key, v); }, help + " [" + key + "]");
}

}  // namespace

int main(int argc, char** argv) {
    using namespace frontlab;
    CLI::App app{"Radial and planar bistable fronts: wave profile, simulations, front fits and certificates"};
    app.require_subcommand(1);

    Overrides ov;
    std::optional<std::string> config_path;
    app.add_option("--config", config_path, "JSON config (nested or dotted keys)");
    key_option(&app, "--out", "output.path", "output directory, or file for the primary artifact", ov);
    key_option(&app, "--threads", "threads", "worker threads (0: all cores)", ov);
    std::vector<std::string> sets;
    app.add_option("--set", sets, "KEY=VALUE override, repeatable");

    auto* profile = app.add_subcommand("profile", "traveling wave U* and speed c*");
    key_option(profile, "--theta", "nonlinearity.theta", "cubic threshold", ov);
    key_option(profile, "--tol", "profile.tol", "shooting tolerance", ov);
    key_option(profile, "--out", "output.path", "profile.csv path or directory", ov);

    auto* sim1 = app.add_subcommand("simulate1d", "radially symmetric run");
    key_option(sim1, "--dim", "dim", "space dimension N", ov);
    key_option(sim1, "--theta", "nonlinearity.theta", "cubic threshold", ov);
    key_option(sim1, "--r1", "datum.r1", "inner radius of the initial datum", ov);
    key_option(sim1, "--r2", "datum.r2", "outer radius of the initial datum", ov);
    key_option(sim1, "--datum", "datum.kind", "ball_indicator|smoothed_ball|profile_cap", ov);
    key_option(sim1, "--dr", "grid.dr", "radial spacing", ov);
    key_option(sim1, "--dt", "grid.dt", "time step", ov);
    key_option(sim1, "--t-final", "time.t_final", "final time", ov);
    key_option(sim1, "--frame", "datum.frame", "lab|moving", ov);
    key_option(sim1, "--snapshot-every", "time.snapshot_every", "front cadence", ov);
    key_option(sim1, "--field-every", "time.field_every", "field cadence in snapshots.csv", ov);
    key_option(sim1, "--out", "output.path", "output directory", ov);

    auto* sim2 = app.add_subcommand("simulate2d", "planar run from a non-radial support");
    key_option(sim2, "--theta", "nonlinearity.theta", "cubic threshold", ov);
    key_option(sim2, "--shape", "datum.shape", "ellipse|star", ov);
    key_option(sim2, "--a", "datum.a", "ellipse semi-axis along x", ov);
    key_option(sim2, "--b", "datum.b", "ellipse semi-axis along y", ov);
    key_option(sim2, "--R-bar", "datum.R_bar", "star mean radius", ov);
    key_option(sim2, "--m", "datum.m", "star petal count", ov);
    key_option(sim2, "--eps", "datum.eps", "star amplitude", ov);
    key_option(sim2, "--J", "grid.J", "number of angles", ov);
    key_option(sim2, "--dr", "grid.dr", "radial spacing", ov);
    key_option(sim2, "--dt-max", "grid.dt_max", "step cap", ov);
    key_option(sim2, "--t-final", "time.t_final", "final time", ov);
    key_option(sim2, "--snapshot-every", "time.snapshot_every", "diagnostics cadence", ov);
    key_option(sim2, "--field-every", "time.field_every", "field_t*.csv cadence", ov);
    key_option(sim2, "--out", "output.path", "output directory", ov);

    auto* fit = app.add_subcommand("fit", "fit r(t) = c t - k ln t + s to a fronts.csv");
    key_option(fit, "--fronts", "fit.fronts_path", "fronts.csv with columns t, r_level", ov);
    key_option(fit, "--mode", "fit.mode", "full|fixed_speed|offset_only", ov);
    key_option(fit, "--c-star", "fit.c_star", "speed (default: solved from --theta)", ov);
    key_option(fit, "--theta", "nonlinearity.theta", "cubic threshold", ov);
    key_option(fit, "--dim", "dim", "dimension for the target (N-1)/c*", ov);
    key_option(fit, "--window-lo", "fit.window_lo", "fit window start", ov);
    key_option(fit, "--window-hi", "fit.window_hi", "fit window end", ov);
    key_option(fit, "--noise", "fit.noise", "std of Gaussian position noise", ov);
    key_option(fit, "--seed", "seed", "noise seed", ov);
    key_option(fit, "--out", "output.path", "fit.json path or directory", ov);

    auto* certify = app.add_subcommand("certify", "ODE certificates and the supersolution lattice check");
    key_option(certify, "--system", "certificate.system", "41 (coupled decay) | 310 (log growth)", ov);
    key_option(certify, "--theta", "nonlinearity.theta", "cubic threshold", ov);
    key_option(certify, "--eps", "certificate.eps", "mollification / forcing scale", ov);
    key_option(certify, "--T-start", "certificate.T_start", "start time T", ov);
    key_option(certify, "--t-final", "certificate.t_final", "final time", ov);
    key_option(certify, "--shift", "certificate.shift_path", "shift.csv of a 2D run", ov);
    key_option(certify, "--delta", "certificate.delta", "decay rate", ov);
    key_option(certify, "--gamma", "certificate.gamma", "slope constant", ov);
    key_option(certify, "--C", "certificate.C", "coupling constant", ov);
    key_option(certify, "--eta", "certificate.eta", "q(T)", ov);
    key_option(certify, "--search-start", "certificate.search_start", "search T over decades (true|false)", ov);
    key_option(certify, "--dim", "dim", "space dimension N", ov);
    key_option(certify, "--out", "output.path", "cert.json path or directory", ov);

    auto* report = app.add_subcommand("report", "aggregate report.json checks; exit 4 on any failure");
    std::vector<std::string> inputs;
    report->add_option("--in", inputs, "run directories or report files")->required();
    key_option(report, "--out", "output.path", "summary.json path or directory", ov);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitConfig;
    }

    try {
        for (const auto& kv : sets) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) throw ConfigError(kv, "--set expects KEY=VALUE");
            ov.emplace_back(kv.substr(0, eq), kv.substr(eq + 1));
        }
        const Subcommand command = subcommand_from_string(app.get_subcommands().front()->get_name());
        std::optional<std::filesystem::path> path;
        if (config_path) path = *config_path;
        const ExperimentConfig config = parse_config(path, ov);
        std::vector<std::filesystem::path> in(inputs.begin(), inputs.end());
        const RunReport r = run_experiment(config, command, in);
        std::cout << to_string(command) << ": " << r.primary.string() << (r.pass() ? "  [checks pass]" : "  [checks FAIL]")
                  << '\n';
        for (const auto& ch : r.json["checks"]) {
            std::cout << "  " << (ch["pass"].get<bool>() ? "pass " : "FAIL ") << ch["name"].get<std::string>() << " = "
                      << ch["value"].dump() << '\n';
        }
        return command == Subcommand::report && !r.pass() ? kExitAcceptance : kExitOk;
    } catch (const ParameterError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfig;
    }
}
