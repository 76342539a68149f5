#include "frontlab/certificates.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <string>

#include <gsl/gsl_errno.h>
#include <gsl/gsl_odeiv2.h>

#include "frontlab/errors.hpp"
#include "frontlab/parallel.hpp"

namespace frontlab {

namespace {

constexpr std::size_t kOutputSamples = 1001;

std::vector<double> log_spaced(double a, double b, std::size_t n) {
    std::vector<double> out(n);
    const double la = std::log(a), lb = std::log(b);
    for (std::size_t i = 0; i < n; ++i) out[i] = std::exp(la + (lb - la) * static_cast<double>(i) / (n - 1));
    out.front() = a;
    out.back() = b;
    return out;
}

ode::Options ode_options(const CertificateParams& p) {
    ode::Options opt;
    opt.rtol = 1e-10;
    opt.atol = 1e-16;
    opt.h_init = 1e-3;
    opt.h_max = (p.t_final - p.T_start) / 2000.0;
    return opt;
}

void fill_samples(Certificate& cert, const CertificateParams& p) {
    cert.times = log_spaced(p.T_start, p.t_final, kOutputSamples);
    cert.q_values.resize(kOutputSamples);
    cert.xi_values.resize(kOutputSamples);
    for (std::size_t i = 0; i < kOutputSamples; ++i) {
        const auto [q, xi] = cert.state_at(cert.times[i]);
        cert.q_values[i] = q;
        cert.xi_values[i] = xi;
    }
}

// (N - 1) / lab - k / t with lab = c t - k ln t + offset, written without the cancellation
// of the two nearly equal terms: the numerator is (N - 1 - k c) t + k (k ln t - offset).
double curvature_mismatch(const CertificateParams& p, double t, double offset, double lab) {
    const double k = p.k_shift();
    const double excess = std::fma(-k, p.c_star, static_cast<double>(p.N_dim - 1));
    return (excess * t + k * (k * std::log(t) - offset)) / (lab * t);
}

// d/dt and d/dxi of the signed mismatch m with g = (C/eps)|m|.
std::array<double, 2> mismatch_gradient(const CertificateParams& p, double t, double xi) {
    const double k = p.k_shift();
    const double lab = p.c_star * t - k * std::log(t) + xi;
    const double n1 = p.N_dim - 1;
    return {-n1 * (p.c_star - k / t) / (lab * lab) + k / (t * t), -n1 / (lab * lab)};
}

// q decays at rate delta while the horizon reaches 1e9, so an explicit method would be
// held to steps of ~3/delta by stability; the implicit BDF stepper is not.
std::vector<ode::Sample<2>> integrate_decay_stiff(const CertificateParams& p) {
    gsl_odeiv2_system sys{
        [](double tau, const double y[], double dy[], void* ctx) -> int {
            const auto& prm = *static_cast<const CertificateParams*>(ctx);
            const double t = prm.T_start + tau;
            const auto d = decay_system_rhs(prm, t, y[0], y[1]);
            dy[0] = d[0];
            dy[1] = d[1];
            return GSL_SUCCESS;
        },
        [](double tau, const double y[], double* dfdy, double dfdt[], void* ctx) -> int {
            const auto& prm = *static_cast<const CertificateParams*>(ctx);
            const double t = prm.T_start + tau;
            const double k = prm.k_shift();
            const double lab = prm.c_star * t - k * std::log(t) + y[1];
            const double m = curvature_mismatch(prm, t, y[1], lab);
            const double scale = prm.C_const / prm.eps * (m > 0.0 ? 1.0 : m < 0.0 ? -1.0 : 0.0);
            const auto grad = mismatch_gradient(prm, t, y[1]);
            dfdy[0] = -prm.delta;
            dfdy[1] = scale * grad[1];
            dfdy[2] = prm.C_const / prm.gamma;
            dfdy[3] = scale * grad[1] / prm.gamma;
            dfdt[0] = scale * grad[0];
            dfdt[1] = scale * grad[0] / prm.gamma;
            return GSL_SUCCESS;
        },
        2, const_cast<CertificateParams*>(&p)};
    std::unique_ptr<gsl_odeiv2_driver, decltype(&gsl_odeiv2_driver_free)> driver(
        gsl_odeiv2_driver_alloc_y_new(&sys, gsl_odeiv2_step_msbdf, 1e-6 * (p.t_final - p.T_start) / 2000.0, 1e-16, 1e-10), &gsl_odeiv2_driver_free);
    const double h_max = (p.t_final - p.T_start) / 2000.0;
    // msbdf works in elapsed time; with absolute t ~ 1e9 it rejects every first step.
    const double span = p.t_final - p.T_start;
    double tau = 0.0, h = 1e-6 * h_max;
    double y[2] = {p.eta, 0.0};
    std::vector<ode::Sample<2>> out;
    auto record = [&] {
        const double t = tau == span ? p.t_final : p.T_start + tau;
        const auto d = decay_system_rhs(p, t, y[0], y[1]);
        out.push_back({t, {y[0], y[1]}, {d[0], d[1]}});
    };
    record();
    while (tau < span) {
        if (out.size() > 10'000'000) {
            throw NumericalError(NumericalError::Kind::integration, "decay system exceeded the step budget");
        }
        const double tau1 = std::min(span, tau + h_max);
        h = std::min(h, h_max);
        const int status = gsl_odeiv2_evolve_apply(driver->e, driver->c, driver->s, &sys, &tau, tau1, &h, y);
        if (status != GSL_SUCCESS) {
            throw NumericalError(NumericalError::Kind::integration,
                                 "decay system step failed at t = " + std::to_string(p.T_start + tau) +
                                     " (status " + std::to_string(status) + ")");
        }
        record();
    }
    return out;
}

double bump(double x) { return std::abs(x) < 1.0 ? std::exp(-1.0 / (1.0 - x * x)) : 0.0; }

std::vector<double> bump_weights(double halfwidth, double dtheta, std::size_t J) {
    const std::size_t reach = std::min(static_cast<std::size_t>(halfwidth / dtheta), (J - 1) / 2);
    std::vector<double> w(reach + 1);
    double total = 0.0;
    for (std::size_t l = 0; l <= reach; ++l) {
        w[l] = bump(static_cast<double>(l) * dtheta / halfwidth);
        total += l == 0 ? w[l] : 2.0 * w[l];
    }
    for (double& v : w) v /= total;
    return w;
}

double max_forward_difference(const std::vector<double>& s, double dtheta) {
    double m = 0.0;
    for (std::size_t j = 0; j < s.size(); ++j) m = std::max(m, std::abs(s[(j + 1) % s.size()] - s[j]));
    return m / dtheta;
}

}  // namespace

void validate(const CertificateParams& p) {
    auto need = [](bool ok, const std::string& msg) {
        if (!ok) throw ParameterError(msg);
    };
    need(p.delta > 0.0, "delta must be positive");
    need(p.gamma > 0.0, "gamma must be positive");
    need(p.eps > 0.0, "eps must be positive");
    need(p.c_star > 0.0, "c_star must be positive");
    need(p.eta >= 0.0, "eta must be non-negative");
    need(p.C_const >= 0.0, "C_const must be non-negative");
    need(p.N_dim >= 1, "N_dim must be at least 1");
    need(p.k_shift() >= 0.0, "k must be non-negative");
    need(p.T_start > 1.0, "T_start must exceed 1");
    need(p.t_final > p.T_start, "t_final must exceed T_start");
    need(p.F > 0.0, "F must be positive");
    const double lead = p.c_star * p.T_start - p.k_shift() * std::log(p.T_start);
    need(lead >= 100.0, "c* T - k ln T = " + std::to_string(lead) + " must be at least 100");
}

double g_eps(const CertificateParams& p, double t, double xi) {
    const double denom = p.c_star * t - p.k_shift() * std::log(t) + xi;
    if (!(denom > 0.0)) {
        throw NumericalError(NumericalError::Kind::domain,
                             "g_eps denominator c* t - k ln t + xi = " + std::to_string(denom) + " at t = " +
                                 std::to_string(t));
    }
    return p.C_const / p.eps * std::abs(curvature_mismatch(p, t, xi, denom));
}

std::array<double, 2> decay_system_rhs(const CertificateParams& p, double t, double q, double xi) {
    const double g = g_eps(p, t, xi);
    return {g - p.delta * q, (p.C_const * q + g) / p.gamma};
}

std::array<double, 2> Certificate::state_at(double t) const {
    const auto y = ode::interpolate(trajectory, t);
    if (system == OdeSystem::log_growth) return {std::exp(y[0]), std::exp(y[1])};
    return {y[0], y[1]};
}

Certificate integrate_decay_system(const CertificateParams& p) {
    validate(p);
    Certificate cert;
    cert.system = OdeSystem::decay_coupled;
    cert.trajectory = integrate_decay_stiff(p);
    fill_samples(cert, p);
    const EnvelopeCheck env = check_envelope(cert, p);
    cert.envelope_pass = env.pass;
    cert.K = env.K;
    return cert;
}

CertificateParams find_start_time(CertificateParams p, double horizon_factor, int max_decades) {
    if (!(horizon_factor > 1.0)) throw ParameterError("horizon factor must exceed 1");
    const double T0 = p.T_start;
    for (int m = 0; m < max_decades; ++m) {
        p.T_start = T0 * std::pow(10.0, m);
        p.t_final = horizon_factor * p.T_start;
        const Certificate cert = integrate_decay_system(p);
        bool below = true;
        for (std::size_t i = 0; i < cert.times.size(); ++i) {
            below = below && cert.xi_values[i] <= 0.5 * p.k_shift() * std::log(cert.times[i]);
        }
        if (cert.envelope_pass && below) return p;
    }
    throw NumericalError(NumericalError::Kind::integration,
                         "no start time up to " + std::to_string(T0 * std::pow(10.0, max_decades - 1)) +
                             " gives a bounded trajectory");
}

EnvelopeCheck check_envelope(const Certificate& cert, const CertificateParams& p) {
    EnvelopeCheck out;
    const std::size_t n = cert.times.size();
    if (n < 3 || cert.q_values.size() != n || cert.xi_values.size() != n) return out;
    out.amplitude = p.eta + 1.0 / (p.eps * std::sqrt(p.T_start));
    std::vector<double> need(n);
    bool nonneg = true;
    for (std::size_t i = 0; i < n; ++i) {
        const double t = cert.times[i];
        const double q_env = out.amplitude * std::exp(-0.5 * p.delta * (t - p.T_start)) + std::pow(t, -1.5);
        need[i] = std::max(cert.q_values[i] / q_env, cert.xi_values[i] / out.amplitude);
        nonneg = nonneg && cert.q_values[i] >= 0.0;
    }
    double coarse = 0.0;
    for (std::size_t i = 0; i < n; i += 2) coarse = std::max(coarse, need[i]);
    coarse = std::max(coarse, need.back());
    out.K = *std::max_element(need.begin(), need.end());

    const double l0 = std::log(cert.times.front()), l1 = std::log(cert.times.back());
    const double cut = std::exp(l0 + 0.9 * (l1 - l0));
    double early = 0.0, late = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double& side = cert.times[i] < cut ? early : late;
        side = std::max(side, need[i]);
    }
    if (late > early) out.late_growth = early > 0.0 ? late / early - 1.0 : std::numeric_limits<double>::infinity();

    out.pass = nonneg && std::isfinite(out.K) && out.K <= 1.01 * coarse && out.late_growth < 0.05;
    return out;
}

Certificate integrate_growth_system(const CertificateParams& p, const std::function<double(double)>& eps_fn,
                                 std::array<double, 2> initial) {
    validate(p);
    const double small = std::min(p.gamma, p.delta * p.gamma / (2.0 * p.F));
    if (!(p.eta < small)) {
        throw ParameterError("eta = " + std::to_string(p.eta) + " must be below min(gamma, delta gamma / (2F)) = " +
                             std::to_string(small));
    }
    if (!(initial[0] > 0.0 && initial[1] > 0.0)) throw ParameterError("initial (q, xi) must be positive");
    const double k = p.k_shift();
    auto denom = [&](double t) { return 0.5 * p.c_star * t - k * std::log(t); };
    // denom is convex with its minimum at t = 2k/c*.
    double dmin = std::min(denom(p.T_start), denom(p.t_final));
    const double tm = 2.0 * k / p.c_star;
    if (tm > p.T_start && tm < p.t_final) dmin = std::min(dmin, denom(tm));
    if (!(dmin > 0.0)) {
        throw NumericalError(NumericalError::Kind::domain, "c* t / 2 - k ln t is not positive on the horizon");
    }
    const double A = (p.delta + p.F) / (p.gamma + p.eta);

    Certificate cert;
    cert.system = OdeSystem::log_growth;
    auto rhs = [&](double t, const ode::State<2>& y) -> ode::State<2> {
        const double e = eps_fn(t);
        if (!(e >= 0.0)) {
            throw ParameterError("eps(t) must be non-negative (got " + std::to_string(e) + " at t = " +
                                 std::to_string(t) + ")");
        }
        const double forcing = e > 0.0 ? e * std::exp(y[1] - y[0]) / denom(t) : 0.0;
        return {-0.25 * p.delta + forcing, A * std::exp(y[0] - y[1])};
    };
    cert.trajectory =
        ode::trajectory<2>(rhs, p.T_start, {std::log(initial[0]), std::log(initial[1])}, p.t_final, ode_options(p));
    fill_samples(cert, p);

    // Slope of ln xi against ln t over the later half of ln t.
    const double lmid = 0.5 * (std::log(p.T_start) + std::log(p.t_final));
    double sx = 0, sy = 0, sxx = 0, sxy = 0, m = 0;
    for (const auto& s : cert.trajectory) {
        const double x = std::log(s.t);
        if (x < lmid) continue;
        sx += x;
        sy += s.y[1];
        sxx += x * x;
        sxy += x * s.y[1];
        m += 1;
    }
    if (m < 2 || m * sxx - sx * sx <= 0.0) {
        throw NumericalError(NumericalError::Kind::fit, "too few integrator steps to fit the growth exponent");
    }
    cert.growth_exponent = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    return cert;
}

MollifiedShift mollify_shift(const std::vector<double>& s, double eps, double offset_multiple) {
    const std::size_t J = s.size();
    if (J < 8) throw ParameterError("need at least 8 shift samples");
    const double dth = 2.0 * std::numbers::pi / static_cast<double>(J);
    if (!(eps > dth)) {
        throw ParameterError("mollifier width " + std::to_string(eps) + " is below the angular spacing " +
                             std::to_string(dth));
    }
    if (!(offset_multiple >= 0.0)) throw ParameterError("offset multiple must be non-negative");

    // Peak weight decreases continuously in the half-width; bisect onto dTheta / (2 eps).
    const double target = dth / (2.0 * eps);
    double lo = dth, hi = 4.0 * eps;
    if (bump_weights(hi, dth, J)[0] > target) {
        throw ParameterError("mollifier width " + std::to_string(eps) + " is too wide for the circle");
    }
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (bump_weights(mid, dth, J)[0] > target ? lo : hi) = mid;
    }
    const std::vector<double> w = bump_weights(hi, dth, J);

    MollifiedShift out;
    out.eps = eps;
    out.support_halfwidth = hi;
    out.theta.resize(J);
    out.s_smooth.assign(J, 0.0);
    for (std::size_t j = 0; j < J; ++j) {
        out.theta[j] = dth * static_cast<double>(j);
        double acc = w[0] * s[j];
        for (std::size_t l = 1; l < w.size(); ++l) acc += w[l] * (s[(j + l) % J] + s[(j + J - l) % J]);
        out.s_smooth[j] = acc;
    }
    out.lipschitz_in = max_forward_difference(s, dth);
    out.lipschitz_out = max_forward_difference(out.s_smooth, dth);
    out.offset = offset_multiple * out.lipschitz_in * eps;
    out.s_plus.resize(J);
    out.s_minus.resize(J);
    out.grad_plus.resize(J);
    out.lap_plus.resize(J);
    for (std::size_t j = 0; j < J; ++j) {
        out.s_plus[j] = out.s_smooth[j] + out.offset;
        out.s_minus[j] = out.s_smooth[j] - out.offset;
    }
    for (std::size_t j = 0; j < J; ++j) {
        const double sp = out.s_plus[(j + 1) % J], sm = out.s_plus[(j + J - 1) % J];
        out.grad_plus[j] = (sp - sm) / (2.0 * dth);
        out.lap_plus[j] = (sp - 2.0 * out.s_plus[j] + sm) / (dth * dth);
        const double lap = std::abs(out.s_smooth[(j + 1) % J] - 2.0 * out.s_smooth[j] + out.s_smooth[(j + J - 1) % J]);
        out.laplacian_out = std::max(out.laplacian_out, lap / (dth * dth));
    }
    const double slack = 1.0 + 1e-12;
    out.gradient_bound_ok = out.lipschitz_out <= out.lipschitz_in * slack;
    out.laplacian_bound_ok = out.laplacian_out <= out.lipschitz_in / eps * slack;
    return out;
}

ResidualReport supersolution_residual(const BistableNonlinearity& f, const WaveProfile& profile,
                                      const GapConstants& gaps, const MollifiedShift& shift,
                                      const Certificate& cert, const CertificateParams& p,
                                      const VerificationGrid& grid, bool flip_q) {
    if (cert.system != OdeSystem::decay_coupled || cert.trajectory.empty()) {
        throw ParameterError("the residual needs a trajectory of the coupled decay system");
    }
    if (!(grid.rho_step > 0.0 && grid.rho_hi > grid.rho_lo) || grid.n_times < 2) {
        throw ParameterError("bad verification lattice");
    }
    const auto n_rho = static_cast<std::size_t>(std::floor((grid.rho_hi - grid.rho_lo) / grid.rho_step + 1e-9)) + 1;
    std::vector<double> rho(n_rho), U(n_rho), dU(n_rho), ddU(n_rho), fU(n_rho);
    for (std::size_t i = 0; i < n_rho; ++i) {
        rho[i] = grid.rho_lo + grid.rho_step * static_cast<double>(i);
        const ProfileValue v = profile_eval(profile, rho[i]);
        U[i] = v.u;
        dU[i] = v.du;
        ddU[i] = v.ddu;
        fU[i] = f.eval(v.u);
    }
    const std::vector<double> times = log_spaced(p.T_start, p.t_final, grid.n_times);
    const double k = p.k_shift();
    const double L = shift.lipschitz_in;
    const bool angular = p.N_dim > 1;
    const double sign = flip_q ? -1.0 : 1.0;

    std::vector<ResidualReport> per_time(times.size());
    parallel_for(times.size(), [&](std::size_t n) {
        ResidualReport& rep = per_time[n];
        const double t = times[n];
        const auto [q, xi] = cert.state_at(t);
        const auto [qd, xd] = decay_system_rhs(p, t, q, xi);
        const double R = p.c_star * t - k * std::log(t);
        for (std::size_t j = 0; j < shift.theta.size(); ++j) {
            const double sp = shift.s_plus[j];
            const double grad2 = shift.grad_plus[j] * shift.grad_plus[j];
            for (std::size_t i = 0; i < n_rho; ++i) {
                const double lab = rho[i] + R + xi - sp;
                if (!(lab > 0.0)) {
                    throw NumericalError(NumericalError::Kind::domain,
                                         "lattice point t = " + std::to_string(t) + ", rho = " + std::to_string(rho[i]) +
                                             " has lab radius " + std::to_string(lab));
                }
                const double curv = curvature_mismatch(p, t, rho[i] + xi - sp, lab);
                const double terms[] = {
                    -xd * dU[i],
                    sign * qd,
                    -f.eval(U[i] + sign * q) + fU[i],
                    -curv * dU[i],
                    angular ? -(dU[i] * shift.lap_plus[j] + ddU[i] * grad2) / (lab * lab) : 0.0,
                };
                double nl = 0.0;
                for (double v : terms) {
                    nl += v;
                    rep.scale = std::max(rep.scale, std::abs(v));
                }
                ++rep.points;
                if (nl < rep.residual_min) {
                    rep.residual_min = nl;
                    rep.t_at = t;
                    rep.rho_at = rho[i];
                    rep.theta_at = shift.theta[j];
                }

                const double lab0 = rho[i] + R + xi;
                const double bound = (angular ? L / (p.eps * lab0 * lab0) : 0.0) +
                                     std::abs(curvature_mismatch(p, t, rho[i] + xi, lab0));
                const double tol = 1e-12 * bound;
                bool covered = true;
                if (std::abs(rho[i]) >= gaps.M) {
                    const bool ok = qd + p.delta * q >= bound - tol;
                    rep.outer_condition_pass = rep.outer_condition_pass && ok;
                    covered = covered && ok;
                }
                if (rho[i] <= gaps.M) {
                    const bool ok = p.gamma * xd - p.C_const * q >= bound - tol;
                    rep.inner_condition_pass = rep.inner_condition_pass && ok;
                    covered = covered && ok;
                }
                if (covered && nl < -1e-8) ++rep.implication_violations;
            }
        }
    });

    ResidualReport out;
    for (const ResidualReport& rep : per_time) {
        if (rep.residual_min < out.residual_min) {
            out.residual_min = rep.residual_min;
            out.t_at = rep.t_at;
            out.rho_at = rep.rho_at;
            out.theta_at = rep.theta_at;
        }
        out.scale = std::max(out.scale, rep.scale);
        out.outer_condition_pass = out.outer_condition_pass && rep.outer_condition_pass;
        out.inner_condition_pass = out.inner_condition_pass && rep.inner_condition_pass;
        out.points += rep.points;
        out.implication_violations += rep.implication_violations;
    }
    return out;
}

}  // namespace frontlab
