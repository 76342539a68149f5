// Acceptance run: one line per primary criterion, exit status 1 if any fails.
// Usage: acceptance [output_dir]   (default ./acceptance_runs)
// The CSV/JSON artifacts left in output_dir are the inputs of the plotting scripts.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <thread>
#include <string>
#include <vector>

#include "frontlab/angular_solver.hpp"
#include "frontlab/certificates.hpp"
#include "frontlab/cli_io.hpp"
#include "frontlab/front_analysis.hpp"
#include "frontlab/parallel.hpp"
#include "frontlab/radial_solver.hpp"
#include "frontlab/wave_profile.hpp"

using namespace frontlab;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path g_out;
int g_failed = 0;

void verdict(int id, const std::string& title, bool pass, const std::string& detail) {
    std::printf("[%s] %2d  %s: %s\n", pass ? "PASS" : "FAIL", id, title.c_str(), detail.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failed;
}

// Errors inside a criterion fail that criterion only.
void criterion(int id, const std::string& title, const std::function<void()>& body) {
    try {
        body();
    } catch (const std::exception& e) {
        verdict(id, title, false, std::string("error: ") + e.what());
    }
}

std::string fmt(const char* f, double a) {
    char buf[128];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

ExperimentConfig at(const std::string& sub) {
    ExperimentConfig c;
    c.output.path = (g_out / sub).string();
    return c;
}

const json& check(const RunReport& r, const std::string& name) {
    for (const auto& ch : r.json["checks"]) {
        if (ch["name"] == name) return ch;
    }
    throw std::runtime_error("report has no check '" + name + "'");
}

double result(const RunReport& r, const std::string& key) { return r.json["results"][key].get<double>(); }

const BistableNonlinearity& cubic() {
    static const BistableNonlinearity f = make_cubic(0.25);
    return f;
}
const WaveProfile& wave() {
    static const WaveProfile p = solve_profile(cubic(), 1e-10);
    return p;
}

void speed_oracle() {
    double worst = 0.0, slowest = 0.0;
    for (double theta : {0.1, 0.2, 0.25, 0.3, 0.4}) {
        const auto t0 = std::chrono::steady_clock::now();
        const WaveProfile p = solve_profile(make_cubic(theta), 1e-10);
        slowest = std::max(slowest, seconds_since(t0));
        worst = std::max(worst, std::abs(p.c_star - (1.0 - 2.0 * theta) / std::sqrt(2.0)));
    }
    run_experiment(at("profile"), Subcommand::profile);
    verdict(1, "wave speed oracle", worst < 1e-4 && slowest < 1.0,
            fmt("max |c* - (1-2theta)/sqrt2| = %.2e", worst) + fmt(", slowest solve %.3f s", slowest));
}

void shape_oracle() {
    double worst = 0.0;
    for (int i = -1500; i <= 1500; ++i) {
        const double xi = 0.01 * i;
        worst = std::max(worst, std::abs(profile_eval(wave(), xi).u - 1.0 / (1.0 + std::exp(xi / std::sqrt(2.0)))));
    }
    verdict(2, "profile shape oracle", worst < 1e-5, fmt("sup |U* - closed form| on [-15,15] = %.2e", worst));
}

// Runs simulate1d to t = 800 and fits [200, 800] with and without the logarithm.
struct LogFit {
    double k_fit, target, rms_log, rms_const;
};

LogFit radial_log_fit(int dim, double radius) {
    const std::string tag = "radial_N" + std::to_string(dim);
    ExperimentConfig c = at(tag);
    c.dim = dim;
    c.datum.r1 = c.datum.r2 = radius;
    c.time.t_final = 800.0;
    c.time.snapshot_every = 5.0;
    c.time.field_every = 100.0;
    run_experiment(c, Subcommand::simulate1d);

    ExperimentConfig f = at(tag + "/fit.json");
    f.dim = dim;
    f.fit.fronts_path = (g_out / tag / "fronts.csv").string();
    f.fit.window_lo = 200.0;
    f.fit.window_hi = 800.0;
    const RunReport log_fit = run_experiment(f, Subcommand::fit);
    f.fit.mode = "offset_only";
    f.output.path = (g_out / tag / "fit_offset_only.json").string();
    const RunReport const_fit = run_experiment(f, Subcommand::fit);
    return {log_fit.json["results"]["fit"]["k_fit"].get<double>(), result(log_fit, "k_target"),
            log_fit.json["results"]["fit"]["residual_rms"].get<double>(),
            const_fit.json["results"]["fit"]["residual_rms"].get<double>()};
}

void logarithmic_delay() {
    const LogFit n2 = radial_log_fit(2, 8.0);
    const LogFit n3 = radial_log_fit(3, 15.0);
    const double e2 = std::abs(n2.k_fit / n2.target - 1.0), e3 = std::abs(n3.k_fit / n3.target - 1.0);
    const double ratio = std::min(n2.rms_const / n2.rms_log, n3.rms_const / n3.rms_log);
    verdict(3, "logarithmic delay", e2 < 0.1 && e3 < 0.1 && ratio >= 5.0,
            fmt("N=2 k_fit %.4f", n2.k_fit) + fmt(" (target %.4f", n2.target) + fmt(", %.2f%%)", 100 * e2) +
                fmt("; N=3 k_fit %.4f", n3.k_fit) + fmt(" (target %.4f", n3.target) + fmt(", %.2f%%)", 100 * e3) +
                fmt("; constant-only rms / log rms >= %.1f", ratio));
}

void moving_frame_stationarity() {
    const double c = wave().c_star, k_true = 1.0 / c;
    auto drift_with = [&](std::optional<double> k) {
        RadialSimulation sim;
        sim.frame = FrameSpec{Frame::moving, 2, c, k};
        sim.datum = {DatumKind::ball_indicator, 8.0, 8.0, 1.0};
        sim.dt = 0.01;
        sim.t_final = 800.0;
        for (double t = 5.0; t < 800.0; t += 5.0) sim.snapshot_times.push_back(t);
        const auto res = simulate_radial(cubic(), sim);
        return moving_frame_drift(to_moving_frame(res.run.history, c, k.value_or(k_true)), 100.0, 800.0).drift;
    };
    const double right = drift_with(std::nullopt);
    const double zero = drift_with(0.0);
    const double law = k_true * std::log(8.0);
    const bool pass = std::abs(right) <= 5 * 0.05 && std::abs(std::abs(zero) - law) <= 0.25 * law;
    verdict(4, "moving-frame stationarity", pass,
            fmt("drift with k=(N-1)/c* %.4f (limit 0.25)", right) + fmt("; with k=0 %.4f", zero) +
                fmt(" vs k ln 8 = %.4f", law));
}

RunReport g_ellipse;
bool g_have_ellipse = false;

void ellipse_run() {
    ExperimentConfig c = at("ellipse");
    c.time.snapshot_every = 10.0;
    c.time.field_every = 100.0;
    const auto t0 = std::chrono::steady_clock::now();
    g_ellipse = run_experiment(c, Subcommand::simulate2d);
    g_have_ellipse = true;
    std::printf("       ellipse run: %zu steps in %.1f s\n", g_ellipse.json["results"]["steps"].get<std::size_t>(),
                seconds_since(t0));
}

void angle_dependent_shift() {
    if (!g_have_ellipse) throw std::runtime_error("ellipse run unavailable");
    const auto& err = check(g_ellipse, "sup_err_final");
    const auto& mono = check(g_ellipse, "sup_err_non_increasing_last5");
    const auto& range = check(g_ellipse, "s_range_over_10dr");
    const auto& sym = check(g_ellipse, "ellipse_reflection_symmetry");
    const bool pass = err["pass"] && mono["pass"] && range["pass"] && sym["pass"];
    std::string tail;
    for (const auto& e : g_ellipse.json["results"]["sup_err_last_snapshots"]) tail += fmt(" %.3e", e.get<double>());
    verdict(5, "angle-dependent shift", pass,
            fmt("sup err %.3e (< 0.05)", err["value"].get<double>()) + "; last 5 vs final s:" + tail +
                fmt("; range of s %.3f (> 0.5)", range["value"].get<double>()) +
                fmt("; symmetry error %.1e (<= 0.1)", sym["value"].get<double>()));
}

void angular_derivative() {
    if (!g_have_ellipse) throw std::runtime_error("ellipse run unavailable");
    ExperimentConfig c = at("circle");
    c.datum.a = c.datum.b = 25.0;
    c.time.snapshot_every = 10.0;
    c.time.field_every = 400.0;
    const RunReport circle = run_experiment(c, Subcommand::simulate2d);
    const auto& stab = check(g_ellipse, "grad_theta_stabilization");
    const auto& radial = check(circle, "grad_theta_radial");
    verdict(6, "angular-derivative boundedness", stab["pass"] && radial["pass"],
            fmt("max|u_Theta| on [100,200] %.4f", result(g_ellipse, "grad_theta_max_100_200")) +
                fmt(", on [200,400] %.4f", result(g_ellipse, "grad_theta_max_200_400")) +
                fmt(", change %.2f%% (< 10%%)", 100 * stab["value"].get<double>()) +
                fmt("; radial datum %.1e (< 1e-8)", radial["value"].get<double>()));
}

void slope_floor() {
    if (!g_have_ellipse) throw std::runtime_error("ellipse run unavailable");
    const auto& ch = check(g_ellipse, "slope_floor");
    verdict(7, "slope floor", ch["pass"],
            fmt("min -u_r over t >= 50, |rho| <= M: %.4f", ch["value"].get<double>()) +
                fmt(" >= delta_M/2 = %.4f", ch["target"].get<double>()));
}

void decay_certificate() {
    const RunReport a = run_experiment(at("cert41"), Subcommand::certify);
    ExperimentConfig twice = at("cert41_doubled");
    twice.certificate.t_final = 2e5;
    const RunReport b = run_experiment(twice, Subcommand::certify);
    const json& ca = a.json["results"]["certificate"];
    const json& cb = b.json["results"]["certificate"];
    const double K = ca["K"].is_null() ? INFINITY : ca["K"].get<double>();
    const double change = std::abs(cb["sup_xi"].get<double>() / ca["sup_xi"].get<double>() - 1.0);
    const double q_end = ca["q_final"].get<double>();
    const double floor = 1e-10 + K * std::pow(1e5, -1.5);
    const bool pass = ca["envelope_pass"] == true && std::isfinite(K) && change < 0.01 && q_end < floor;
    verdict(8, "decay certificate", pass,
            fmt("envelope K = %.3f", K) + fmt("; sup xi changes %.3f%% on doubling", 100 * change) +
                fmt("; q(t_final) %.2e", q_end) + fmt(" < %.2e", floor));
}

void growth_exponent() {
    std::vector<double> eps{0.01, 0.02, 0.05}, alpha;
    for (double e : eps) {
        ExperimentConfig c = at("cert310_eps" + fmt("%g", e));
        c.certificate.system = "310";
        c.certificate.eps = e;
        alpha.push_back(run_experiment(c, Subcommand::certify).json["results"]["growth_exponent"].get<double>());
    }
    const double me = (eps[0] + eps[1] + eps[2]) / 3, ma = (alpha[0] + alpha[1] + alpha[2]) / 3;
    double sxy = 0, sxx = 0, syy = 0;
    for (int i = 0; i < 3; ++i) {
        sxy += (eps[i] - me) * (alpha[i] - ma);
        sxx += (eps[i] - me) * (eps[i] - me);
        syy += (alpha[i] - ma) * (alpha[i] - ma);
    }
    const double r2 = sxy * sxy / (sxx * syy);
    verdict(9, "growth exponent linear in eps", r2 > 0.95 && sxy > 0,
            fmt("alpha = %.4f", alpha[0]) + fmt(", %.4f", alpha[1]) + fmt(", %.4f", alpha[2]) +
                fmt("; slope %.2f", sxy / sxx) + fmt(", R^2 = %.6f", r2));
}

void supersolution_certificate() {
    if (!g_have_ellipse) throw std::runtime_error("ellipse run unavailable");
    ExperimentConfig c = at("cert_shift");
    c.certificate.shift_path = (g_out / "ellipse" / "shift.csv").string();
    c.certificate.t_final = 1e4;  // the start-time search keeps the ratio t_final / T_start = 10
    const RunReport r = run_experiment(c, Subcommand::certify);
    const json& cert = r.json["results"]["certificate"];
    const double res = cert["residual_min"].get<double>();
    const double flipped = cert["flipped_q_residual_min"].get<double>();
    const bool pass = res >= -1e-8 && cert["condition_4_12_pass"] == true && cert["condition_4_14_pass"] == true &&
                      flipped < 0.0 && cert["envelope_pass"] == true;
    verdict(10, "supersolution lattice certificate", pass,
            fmt("T = %.0e", cert["params"]["T_start"].get<double>()) + fmt(", residual_min %.2e", res) +
                " over " + std::to_string(cert["lattice_points"].get<std::size_t>()) + " points" +
                ", outer/inner conditions " + (cert["condition_4_12_pass"] == true ? "hold" : "FAIL") + "/" +
                (cert["condition_4_14_pass"] == true ? "hold" : "FAIL") + fmt("; flipped q gives %.2e", flipped));
}

void comparison_principle() {
    const auto& f = cubic();
    const double c = wave().c_star;
    std::mt19937_64 rng(20240601);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double worst1 = 0.0, worst2 = 0.0;
    const int pairs = 20, steps = 10000;

    const double dt1 = 0.9 * max_stable_dt(f);
    for (int p = 0; p < pairs; ++p) {
        // Even pairs in the lab frame, odd pairs in the moving frame.
        const bool lab = p % 2 == 0;
        const FrameSpec frame{lab ? Frame::lab : Frame::moving, 2, c, std::nullopt};
        const RadialGrid grid = lab ? RadialGrid{0.0, 40.0, 0.05} : RadialGrid{8.0, 48.0, 0.05};
        RadialState lo = build_initial({DatumKind::ball_indicator, 20.0, 20.0, 1.0}, grid, frame);
        RadialState hi = lo;
        for (std::size_t i = 0; i < lo.u.size(); ++i) {
            const double a = unit(rng), b = unit(rng);
            lo.u[i] = std::min(a, b);
            hi.u[i] = std::max(a, b);
        }
        if (!lab) lo.u.front() = hi.u.front() = 1.0;
        lo.u.back() = hi.u.back() = 0.0;
        for (int n = 0; n < steps; ++n) {
            lo = lab ? step_lab(f, lo, dt1) : step_moving(f, lo, dt1);
            hi = lab ? step_lab(f, hi, dt1) : step_moving(f, hi, dt1);
            for (std::size_t i = 0; i < lo.u.size(); ++i) worst1 = std::max(worst1, lo.u[i] - hi.u[i]);
        }
    }

    const PolarGrid grid{10.0, 20.0, 0.1, 16};
    SupportShape shape;
    shape.a = 14.0;
    shape.b = 12.0;
    for (int p = 0; p < pairs; ++p) {
        PolarField lo = build_initial_2d(shape, grid, c);
        PolarField hi = lo;
        for (std::size_t j = 0; j < lo.J(); ++j) {
            for (std::size_t i = 1; i + 1 < lo.nr(); ++i) {
                const double a = unit(rng), b = unit(rng);
                lo.at(j, i) = std::min(a, b);
                hi.at(j, i) = std::max(a, b);
            }
        }
        for (int n = 0; n < steps; ++n) {
            const double dt = 0.9 * max_stable_dt_2d(f, lo, 1.0);
            lo = step_2d(f, lo, dt);
            hi = step_2d(f, hi, dt);
            for (std::size_t k = 0; k < lo.u.size(); ++k) worst2 = std::max(worst2, lo.u[k] - hi.u[k]);
        }
    }
    verdict(11, "comparison principle", worst1 <= 1e-8 && worst2 <= 1e-8,
            fmt("20 pairs x 1e4 steps; max(u_lo - u_hi) 1D %.1e", worst1) + fmt(", 2D %.1e", worst2));
}

void sandwich() {
    RadialSimulation sim;
    sim.frame = FrameSpec{Frame::moving, 2, wave().c_star, std::nullopt};
    sim.datum = {DatumKind::ball_indicator, 8.0, 8.0, 1.0};
    sim.dt = 0.01;
    sim.t_final = 800.0;
    for (double t = 10.0; t < 800.0; t += 10.0) sim.snapshot_times.push_back(t);
    const auto res = simulate_radial(cubic(), sim);
    const SandwichReport rep = verify_radial_sandwich(res.run.snapshots, wave());
    const double gap = rep.S_plus - rep.S_minus;
    verdict(12, "sandwich diagnostic", rep.stabilized && gap < 1.0 && rep.excess_bounded,
            fmt("S+ - S- = %.4f", gap) + fmt(", fitted C = %.3f", rep.C) +
                fmt(", running sup/inf variation %.1e", std::max(rep.plus_variation, rep.minus_variation)) +
                ", excess <= C ln t / t " + (rep.excess_bounded ? "everywhere" : "VIOLATED"));
}

}  // namespace

int main(int argc, char** argv) {
    g_out = argc > 1 ? fs::path(argv[1]) : fs::path("acceptance_runs");
    fs::create_directories(g_out);
    set_thread_count(std::max(1u, std::thread::hardware_concurrency()));
    const auto t0 = std::chrono::steady_clock::now();

    criterion(1, "wave speed oracle", speed_oracle);
    criterion(2, "profile shape oracle", shape_oracle);
    criterion(3, "logarithmic delay", logarithmic_delay);
    criterion(4, "moving-frame stationarity", moving_frame_stationarity);
    try {
        ellipse_run();
    } catch (const std::exception& e) {
        std::printf("       ellipse run failed: %s\n", e.what());
    }
    criterion(5, "angle-dependent shift", angle_dependent_shift);
    criterion(6, "angular-derivative boundedness", angular_derivative);
    criterion(7, "slope floor", slope_floor);
    criterion(8, "decay certificate", decay_certificate);
    criterion(9, "growth exponent linear in eps", growth_exponent);
    criterion(10, "supersolution lattice certificate", supersolution_certificate);
    criterion(11, "comparison principle", comparison_principle);
    criterion(12, "sandwich diagnostic", sandwich);

    std::printf("%d of 12 criteria failed; %.0f s; artifacts in %s\n", g_failed, seconds_since(t0), g_out.string().c_str());
    return g_failed == 0 ? 0 : 1;
}
