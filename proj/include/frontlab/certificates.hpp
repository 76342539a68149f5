#pragma once

// ODE layer of the sub/super-solution construction and a lattice check of the
// supersolution inequality for U*(r + s(Theta) - xi(t)) + q(t).

#include <array>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "frontlab/gap_constants.hpp"
#include "frontlab/nonlinearity.hpp"
#include "frontlab/ode.hpp"
#include "frontlab/wave_profile.hpp"

namespace frontlab {

struct CertificateParams {
    double delta = 1.0;    // decay rate of q
    double gamma = 1.0;    // slope constant multiplying xi'
    double eta = 0.01;     // q at the start time
    double C_const = 1.0;  // coupling constant of g and of the xi equation
    double eps = 0.1;
    double T_start = 1e3;
    double t_final = 1e5;
    double c_star = 0.35355339059327373;  // cubic, theta = 1/4
    std::optional<double> k;              // default (N_dim - 1) / c_star
    int N_dim = 2;
    double F = 0.75;  // sup |f'|, used only by the growth system

    double k_shift() const { return k ? *k : (N_dim - 1) / c_star; }
};

/// Throws ParameterError unless delta, gamma, eps, c_star > 0, eta, C_const, k >= 0,
/// N_dim >= 1, t_final > T_start and c* T - k ln T >= 100.
void validate(const CertificateParams& p);

/// (C / eps) |(N - 1) / (c* t - k ln t + xi) - k / t|. Throws NumericalError(domain) if the
/// denominator is not positive.
double g_eps(const CertificateParams& p, double t, double xi);

enum class OdeSystem { decay_coupled, log_growth };

struct VerificationGrid {
    std::size_t n_times = 40;  // log-spaced over [T_start, t_final]
    double rho_lo = -40.0;
    double rho_hi = 40.0;
    double rho_step = 0.1;
};

struct Certificate {
    OdeSystem system = OdeSystem::decay_coupled;
    std::vector<double> times;  // log-spaced output samples, endpoints included
    std::vector<double> q_values;
    std::vector<double> xi_values;
    // Accepted integrator steps: (q, xi) for decay_coupled, (ln q, ln xi) for log_growth.
    std::vector<ode::Sample<2>> trajectory;
    bool envelope_pass = false;
    double K = std::numeric_limits<double>::infinity();
    double residual_min = std::numeric_limits<double>::quiet_NaN();
    VerificationGrid grid_spec;
    std::optional<double> growth_exponent;  // log_growth only

    /// (q, xi) at time t from the dense trajectory.
    std::array<double, 2> state_at(double t) const;
};

/// q' + delta q = g(t, xi), gamma xi' = C q + g(t, xi), q(T) = eta, xi(T) = 0, integrated to
/// t_final (1001 output samples), followed by check_envelope.
Certificate integrate_decay_system(const CertificateParams& p);

/// Smallest T = p.T_start * 10^m, m < max_decades, for which the coupled system on
/// [T, horizon_factor T] passes the envelope check and keeps xi <= k ln t / 2. Without the
/// margin xi saturates at k ln t, where g vanishes, and grows like a logarithm. Returns p with T_start and t_final set. Throws
/// NumericalError(integration) if no decade works.
CertificateParams find_start_time(CertificateParams p, double horizon_factor = 10.0, int max_decades = 8);

/// Right-hand side (q', xi') of the coupled system.
std::array<double, 2> decay_system_rhs(const CertificateParams& p, double t, double q, double xi);

struct EnvelopeCheck {
    bool pass = false;
    double K = std::numeric_limits<double>::infinity();
    double amplitude = 0.0;   // eta + 1 / (eps sqrt(T))
    double late_growth = 0.0; // relative rise of the required constant over the last tenth of ln t
};

/// K is the smallest constant with q <= K A e^{-delta (t - T)/2} + K t^{-3/2} and xi <= K A
/// (A = eta + 1/(eps sqrt T)) on every other sample. The pass requires q >= 0, K finite,
/// the full sampling to need at most 1% more, and the required constant to rise by less
/// than 5% over the last tenth of the log-time range (no late escape).
EnvelopeCheck check_envelope(const Certificate& cert, const CertificateParams& p);

/// q' + (delta/4) q = eps(t) xi / (c* t / 2 - k ln t), xi' = ((delta + F) / (gamma + eta)) q,
/// with gamma playing the slope floor. Integrated in (ln q, ln xi) from `initial` (both > 0).
/// growth_exponent is the slope of ln xi against ln t over the later half of ln t.
/// Throws ParameterError if eta >= min(gamma, delta gamma / (2F)) or eps_fn < 0.
Certificate integrate_growth_system(const CertificateParams& p, const std::function<double(double)>& eps_fn,
                                 std::array<double, 2> initial = {1.0, 1.0});

struct MollifiedShift {
    std::vector<double> theta;
    std::vector<double> s_smooth;  // kernel * s
    std::vector<double> s_plus;
    std::vector<double> s_minus;
    std::vector<double> grad_plus;  // centered d/dTheta of s_plus
    std::vector<double> lap_plus;   // centered d2/dTheta2 of s_plus
    double eps = 0.0;
    double support_halfwidth = 0.0;
    double offset = 0.0;         // C eps
    double lipschitz_in = 0.0;   // max |forward difference| / dTheta of s
    double lipschitz_out = 0.0;  // same for the smoothed shift
    double laplacian_out = 0.0;  // max |second difference| / dTheta^2 of the smoothed shift
    bool gradient_bound_ok = false;   // lipschitz_out <= lipschitz_in
    bool laplacian_bound_ok = false;  // laplacian_out <= lipschitz_in / eps
};

/// Circular convolution of uniformly sampled periodic s with a normalized smooth bump. The
/// bump support is chosen by bisection so that the largest discrete weight is dTheta/(2 eps),
/// which makes both bounds hold for the discrete differences. s_plus/minus add/subtract
/// offset_multiple * lipschitz_in * eps. Throws ParameterError if eps <= dTheta.
MollifiedShift mollify_shift(const std::vector<double>& s, double eps, double offset_multiple = 2.0);

struct ResidualReport {
    double residual_min = std::numeric_limits<double>::infinity();
    double t_at = 0.0, rho_at = 0.0, theta_at = 0.0;
    double scale = 0.0;  // largest |term| met, to judge the size of residual_min
    bool outer_condition_pass = true;  // |rho| >= M: q' + delta q >= angular + curvature bound
    bool inner_condition_pass = true;  // rho <= M: gamma xi' - C q >= the same bound
    std::size_t points = 0;
    std::size_t implication_violations = 0;  // conditions hold but residual < -1e-8
};

/// Evaluates NL[u_bar] for u_bar = U*(rho) +- q(t), rho = r + s_plus(Theta) - xi(t), at every
/// lattice point (t, rho, Theta); q', xi' come from the system right-hand side. `flip_q`
/// uses -q. Throws NumericalError(domain) if a point has non-positive lab radius.
ResidualReport supersolution_residual(const BistableNonlinearity& f, const WaveProfile& profile,
                                      const GapConstants& gaps, const MollifiedShift& shift,
                                      const Certificate& cert, const CertificateParams& p,
                                      const VerificationGrid& grid = {}, bool flip_q = false);

}  // namespace frontlab
