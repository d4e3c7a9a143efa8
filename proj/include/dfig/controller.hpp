#pragma once

// Dual-mode (maximum-power-tracking / power-regulation) nonlinear controller.
//
// Three time scales:
//   fast    feedback linearization + pole placement on the flux dynamics,
//   medium  clamped speed controller acting through the torque "radius" r^2,
//   slow    gradient flow on (omega_rd, theta, beta) minimizing the power-error objective.
//
// In the redundancy coordinates (r, theta) the quasi-static electromagnetic torque is
// exactly r^2 + a', so r drives the rotor speed and theta is free to shape reactive power.

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include "dfig/errors.hpp"
#include "dfig/numerics.hpp"
#include "dfig/plant.hpp"

namespace dfig {

using Vec3 = Vec<3>;

/// Closed-loop electrical poles used unless configured otherwise.
inline const ComplexSpectrum kDefaultElectricalPoles{{{-15.0, 0.0}, {-5.0, 0.0}, {-10.0, 5.0}, {-10.0, -5.0}}};

/// Published gain for the default poles and default machine parameters (printed to 0.1).
inline const Gain kPublishedGain =
    Gain::from_rows({{5135.9, 259.2, 20.3, 1.9}, {-2676.7, 4289.9, -1.3, 19.7}});

struct SynthesizedGains {
    MachineParams machine{};
    Gain k{};
    Mat4 a{};      // open-loop flux matrix
    Mat4 a_cl{};   // A - B K
    Mat4 d{};      // (A - B K)^{-1}
    double torque_gain = 0;  // L_m / (sigma L_s L_r)
    // T_e = u^T [[q1, q2], [q2, q3]] u + [b1, b2] u + a0 along the quasi-static flux map.
    double q1 = 0, q2 = 0, q3 = 0;
    double b1 = 0, b2 = 0;
    double a0 = 0;
    double a_prime = 0;  // minimum of the torque quadratic, a0 - b^T Q^{-1} b / 4
    Mat2 m{};            // eigenvectors of Q
    Mat2 dd{};           // eigenvalues of Q, descending

    [[nodiscard]] Mat2 hessian() const { return Mat2::from_rows({{q1, q2}, {q2, q3}}); }
    [[nodiscard]] Vec2 linear_term() const { return {b1, b2}; }

    /// u at r = 0: the unconstrained minimizer -Q^{-1} b / 2.
    [[nodiscard]] Vec2 vertex() const { return scale(inverse2(hessian()) * linear_term(), -0.5); }
};

/// Closed form -(v_ds^2 + v_qs^2) / (4 omega_s R_s).
inline double a_prime_closed_form(const MachineParams& mp) {
    return -(mp.v_ds * mp.v_ds + mp.v_qs * mp.v_qs) / (4.0 * mp.omega_s * mp.r_s);
}

/// Determinant-factor Delta of A - BK in terms of the gain entries; det(A - BK) = Delta / (L_s L_r - L_m^2)^2.
inline double closed_loop_delta(const MachineParams& mp, const Gain& k) {
    const double rs = mp.r_s, rr = mp.r_r, ls = mp.l_s, lr = mp.l_r, lm = mp.l_m;
    const double l = ls * lr - lm * lm;
    const double d1 = rs * lm * k(1, 0) + rs * lr * k(1, 2) + l * k(1, 3) + rr * ls + rs * lr;
    const double d2 = rs * lm * k(1, 1) - l * k(1, 2) + rs * lr * k(1, 3) + rs * rr - l;
    return (-rs * lm * k(0, 1) + l * k(0, 2) - rs * lr * k(0, 3) + rr * ls + rs * lr) * d1 +
           (rs * lm * k(0, 0) + rs * lr * k(0, 2) + l * k(0, 3) + rs * rr - l) * d2;
}

/// Precompute everything the controller needs from a stabilizing gain.
inline SynthesizedGains synthesize(const MachineParams& mp, const Gain& k) {
    mp.validate();
    SynthesizedGains g;
    g.machine = mp;
    g.k = k;
    g.a = state_matrix(mp);
    g.a_cl = g.a - rotor_input_map() * k;
    const auto eig = eig4(g.a_cl);
    if (!eig.converged) throw NumericalError("synthesize: eigenvalues of A - BK did not converge");
    for (const auto& z : eig.values)
        if (!(z.real() < 0.0)) throw NumericalError("synthesize: A - BK is not asymptotically stable");
    g.d = inverse(g.a_cl);

    auto d = [&g](int i, int j) { return g.d(static_cast<std::size_t>(i - 1), static_cast<std::size_t>(j - 1)); };
    const double c = mp.l_m / (mp.sigma() * mp.l_s * mp.l_r);
    g.torque_gain = c;
    const double s1 = d(1, 1) * mp.v_ds + d(1, 2) * mp.v_qs;
    const double s2 = d(2, 1) * mp.v_ds + d(2, 2) * mp.v_qs;
    const double s3 = d(3, 1) * mp.v_ds + d(3, 2) * mp.v_qs;
    const double s4 = d(4, 1) * mp.v_ds + d(4, 2) * mp.v_qs;
    g.q1 = c * (d(1, 3) * d(4, 3) - d(2, 3) * d(3, 3));
    g.q2 = 0.5 * c * (d(1, 3) * d(4, 4) + d(1, 4) * d(4, 3) - d(2, 3) * d(3, 4) - d(2, 4) * d(3, 3));
    g.q3 = c * (d(1, 4) * d(4, 4) - d(2, 4) * d(3, 4));
    g.b1 = c * (s1 * d(4, 3) + d(1, 3) * s4 - s2 * d(3, 3) - d(2, 3) * s3);
    g.b2 = c * (s1 * d(4, 4) + d(1, 4) * s4 - s2 * d(3, 4) - d(2, 4) * s3);
    g.a0 = c * (s1 * s4 - s2 * s3);

    if (!(g.q1 > 0.0 && g.q1 * g.q3 - g.q2 * g.q2 > 0.0))
        throw NumericalError("synthesize: torque Hessian is not positive definite");
    const Vec2 b{g.b1, g.b2};
    g.a_prime = g.a0 - 0.25 * dot(b, inverse2(g.hessian()) * b);
    const auto eig2 = eig_sym2(g.q1, g.q2, g.q3);
    g.m = eig2.m;
    g.dd = eig2.d;
    return g;
}

inline SynthesizedGains synthesize(const MachineParams& mp, const ComplexSpectrum& poles) {
    return synthesize(mp, place_poles(state_matrix(mp), rotor_input_map(), poles));
}

/// Rotor voltages that cancel the speed-flux products and place the poles:
/// the flux dynamics become x' = (A - BK) x + [v_ds, v_qs, u1, u2].
inline RotorVoltages feedback_linearize(const FluxVector& x, double omega_r, const Vec2& u, const SynthesizedGains& g) {
    const auto kx = g.k * x;
    return {omega_r * x[3] - kx[0] + u[0], -omega_r * x[2] - kx[1] + u[1]};
}

/// Quasi-static fluxes -(A - BK)^{-1} [v_ds, v_qs, u1, u2].
inline FluxVector equilibrium_fluxes(const Vec2& u, const SynthesizedGains& g) {
    return scale(g.d * Vec4{g.machine.v_ds, g.machine.v_qs, u[0], u[1]}, -1.0);
}

/// Torque as the quadratic in (u1, u2).
inline double torque_from_inputs(const Vec2& u, const SynthesizedGains& g) {
    return dot(u, g.hessian() * u) + g.b1 * u[0] + g.b2 * u[1] + g.a0;
}

struct Polar {
    double r = 0;
    double theta = 0;
};

/// (r, theta) -> (u1, u2): u = M D^{-1/2} z - Q^{-1} b / 2 with z = r (cos theta, sin theta).
inline Vec2 u_from_polar(double r, double theta, const SynthesizedGains& g) {
    const Vec2 z{r * std::cos(theta) / std::sqrt(g.dd(0, 0)), r * std::sin(theta) / std::sqrt(g.dd(1, 1))};
    return add(g.m * z, g.vertex());
}

/// Forward map (u1, u2) -> (r, theta), theta in [0, 2 pi).
inline Polar polar_from_u(const Vec2& u, const SynthesizedGains& g) {
    const auto mt = transpose(g.m);
    const auto mu = mt * u;
    const auto mb = mt * g.linear_term();
    const double s1 = std::sqrt(g.dd(0, 0)), s2 = std::sqrt(g.dd(1, 1));
    const Vec2 z{s1 * mu[0] + 0.5 * mb[0] / s1, s2 * mu[1] + 0.5 * mb[1] / s2};
    double th = std::atan2(z[1], z[0]);
    if (th < 0) th += 2.0 * std::numbers::pi;
    return {norm(z), th};
}

inline double wrap_angle(double theta) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    double w = std::fmod(theta, two_pi);
    if (w < 0) w += two_pi;
    if (w >= two_pi) w = 0.0;
    return w;
}

// ---------------------------------------------------------------------------
// Design parameters
// ---------------------------------------------------------------------------

struct GradientGains {
    double eps1 = 4e-3;   // omega_rd
    double eps2 = 1e-4;   // theta
    double eps3 = 2.0;    // beta
    double alpha = 10.0;  // speed-loop gain

    void validate() const {
        if (!(eps1 > 0)) throw ConfigError("eps1", "must be > 0");
        if (!(eps2 > 0)) throw ConfigError("eps2", "must be > 0");
        if (!(eps3 > 0)) throw ConfigError("eps3", "must be > 0");
        if (!(alpha > 0)) throw ConfigError("alpha", "must be > 0");
    }
};

struct ObjectiveWeights {
    double w_p = 10.0;
    double w_q = 1.0;
    double w_pq = 0.0;

    void validate() const {
        if (!(std::isfinite(w_p) && std::isfinite(w_q) && std::isfinite(w_pq)))
            throw ConfigError("weights", "must be finite");
        if (!(w_p > 0 && w_p * w_q - w_pq * w_pq > 0))
            throw ConfigError("weights", "[[w_p, w_pq], [w_pq, w_q]] must be positive definite");
    }
};

/// Everything the controller believes about the turbine plus its tuning.
struct ControllerDesign {
    SynthesizedGains gains;
    TurbineParams belief;
    ObjectiveWeights weights;
    GradientGains gradient;
};

inline ControllerDesign make_design(const TurbineParams& belief, const ComplexSpectrum& poles = kDefaultElectricalPoles,
                                    const ObjectiveWeights& w = {}, const GradientGains& gg = {}) {
    belief.validate();
    w.validate();
    gg.validate();
    return {synthesize(belief.machine, poles), belief, w, gg};
}

inline ControllerDesign make_design(const TurbineParams& belief, const Gain& k, const ObjectiveWeights& w = {},
                                    const GradientGains& gg = {}) {
    belief.validate();
    w.validate();
    gg.validate();
    return {synthesize(belief.machine, k), belief, w, gg};
}

// ---------------------------------------------------------------------------
// Speed loop
// ---------------------------------------------------------------------------

/// g(w_r) = T_m - a' - C_f w_r.
inline double g_function(double omega_r, double beta, double v_w, const ControllerDesign& c) {
    return mechanical_torque(omega_r, beta, v_w, c.belief.aero) - c.gains.a_prime - c.belief.drive.c_f * omega_r;
}

/// r^2 = max{g(w_r) + alpha (w_r - w_rd), 0}.
inline double speed_control_r2(double omega_r, double omega_rd, double beta, double v_w, const ControllerDesign& c) {
    return std::max(g_function(omega_r, beta, v_w, c) + c.gradient.alpha * (omega_r - omega_rd), 0.0);
}

/// Rotor acceleration of the reduced first-order model, with T_e = r^2 + a' and the
/// controller's belief used as the plant.
inline double reduced_speed_derivative(double omega_r, double omega_rd, double beta, double v_w,
                                       const ControllerDesign& c) {
    const double r2 = speed_control_r2(omega_r, omega_rd, beta, v_w, c);
    const double tm = mechanical_torque(omega_r, beta, v_w, c.belief.aero);
    return (tm - (r2 + c.gains.a_prime) - c.belief.drive.c_f * omega_r) / c.belief.drive.j;
}

/// First positive root of g: geometric scan w = 1e-3 * 2^k up to `scan_bound`, then bisection
/// to 1e-10 relative width.
inline double critical_root(double beta, double v_w, const ControllerDesign& c, double scan_bound = 16777216.0) {
    double lo = 1e-3;
    if (!(g_function(lo, beta, v_w, c) > 0))
        throw NumericalError("critical_root: g is not positive at the start of the scan");
    double hi = lo;
    for (;;) {
        hi = lo * 2.0;
        if (hi > scan_bound) throw NumericalError("critical_root: no sign change below the scan bound");
        if (g_function(hi, beta, v_w, c) <= 0) break;
        lo = hi;
    }
    while (hi - lo > 1e-10 * hi) {
        const double mid = 0.5 * (lo + hi);
        if (g_function(mid, beta, v_w, c) > 0)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

// ---------------------------------------------------------------------------
// Objective and gradient flow
// ---------------------------------------------------------------------------

struct ControllerState {
    double omega_rd = 1.0;  // pu
    double theta = 0.0;     // rad, [0, 2 pi)
    double beta = 0.0;      // deg
};

struct Exogenous {
    double v_w = 1.0;  // wind as seen by the controller (pu)
    double p_d = 0.0;
    double q_d = 0.0;
};

inline double objective_v(double p, double q, double p_d, double q_d, const ObjectiveWeights& w) {
    const double ep = p - p_d, eq = q - q_d;
    return 0.5 * (w.w_p * ep * ep + 2.0 * w.w_pq * ep * eq + w.w_q * eq * eq);
}

/// Intermediate values of the composite objective chain.
struct OperatingPoint {
    double r2 = 0;
    Vec2 u{};
    FluxVector flux{};
    Currents currents{};
    RotorVoltages rotor{};
    Powers powers{};
    double v = 0;
};

/// The quasi-static operating point implied by a setpoint triple, assuming w_r = w_rd.
inline OperatingPoint operating_point(const ControllerState& cs, const Exogenous& e, const ControllerDesign& c) {
    OperatingPoint op;
    const double w = cs.omega_rd;
    op.r2 = speed_control_r2(w, w, cs.beta, e.v_w, c);
    op.u = u_from_polar(std::sqrt(op.r2), cs.theta, c.gains);
    op.flux = equilibrium_fluxes(op.u, c.gains);
    op.currents = currents_from_fluxes(op.flux, c.belief.machine);
    op.rotor = feedback_linearize(op.flux, w, op.u, c.gains);
    op.powers = powers({c.belief.machine.v_ds, c.belief.machine.v_qs, op.rotor.v_dr, op.rotor.v_qr}, op.currents);
    op.v = objective_v(op.powers.p, op.powers.q, e.p_d, e.q_d, c.weights);
    return op;
}

/// V = f(omega_rd, theta, beta; v_w, p_d, q_d).
inline double f_composite(const ControllerState& cs, const Exogenous& e, const ControllerDesign& c) {
    return operating_point(cs, e, c).v;
}

/// Angle minimizing f at fixed (omega_rd, beta): grid over [0, 2 pi) then golden-section
/// refinement around the best cell.
inline double minimize_theta(double omega_rd, double beta, const Exogenous& e, const ControllerDesign& c,
                             int grid = 720) {
    const double two_pi = 2.0 * std::numbers::pi;
    const double h = two_pi / grid;
    auto f = [&](double th) { return f_composite({omega_rd, th, beta}, e, c); };
    int best = 0;
    double fbest = f(0.0);
    for (int i = 1; i < grid; ++i) {
        const double v = f(i * h);
        if (v < fbest) {
            fbest = v;
            best = i;
        }
    }
    return wrap_angle(golden_section_min(f, (best - 1) * h, (best + 1) * h, 1e-12));
}

/// Finite-difference gradient of f in (omega_rd, theta, beta). Steps are
/// max(rel_step, rel_step * |x_i|); central differences except where the stencil would
/// leave the admissible set (pitch bounds, w_rd near zero), which use one-sided differences.
inline Vec3 gradient_f(const ControllerState& cs, const Exogenous& e, const ControllerDesign& c, double rel_step = 1e-6) {
    auto step = [rel_step](double x) { return std::max(rel_step, rel_step * std::abs(x)); };
    auto f = [&](double w, double th, double b) { return f_composite({w, th, b}, e, c); };
    Vec3 grad{};

    const double hw = step(cs.omega_rd);
    if (cs.omega_rd - hw > kMinRotorSpeed)
        grad[0] = (f(cs.omega_rd + hw, cs.theta, cs.beta) - f(cs.omega_rd - hw, cs.theta, cs.beta)) / (2 * hw);
    else
        grad[0] = (f(cs.omega_rd + hw, cs.theta, cs.beta) - f(cs.omega_rd, cs.theta, cs.beta)) / hw;

    const double ht = step(cs.theta);
    grad[1] = (f(cs.omega_rd, cs.theta + ht, cs.beta) - f(cs.omega_rd, cs.theta - ht, cs.beta)) / (2 * ht);

    const double hb = step(cs.beta);
    const auto& ap = c.belief.aero;
    if (cs.beta - hb < ap.beta_min)
        grad[2] = (f(cs.omega_rd, cs.theta, cs.beta + hb) - f(cs.omega_rd, cs.theta, cs.beta)) / hb;
    else if (cs.beta + hb > ap.beta_max)
        grad[2] = (f(cs.omega_rd, cs.theta, cs.beta) - f(cs.omega_rd, cs.theta, cs.beta - hb)) / hb;
    else
        grad[2] = (f(cs.omega_rd, cs.theta, cs.beta + hb) - f(cs.omega_rd, cs.theta, cs.beta - hb)) / (2 * hb);
    return grad;
}

/// Gradient flow rates (-eps1 g1, -eps2 g2, -eps3 g3); the pitch rate is zeroed when it
/// would push beta out of [beta_min, beta_max].
inline Vec3 setpoint_derivatives(const ControllerState& cs, const Vec3& grad, const GradientGains& gg,
                                 const AeroParams& ap) {
    Vec3 rate{-gg.eps1 * grad[0], -gg.eps2 * grad[1], -gg.eps3 * grad[2]};
    if ((cs.beta <= ap.beta_min && rate[2] < 0) || (cs.beta >= ap.beta_max && rate[2] > 0)) rate[2] = 0.0;
    return rate;
}

/// Pitch-projected gradient: the component that the flow can actually follow.
inline Vec3 projected_gradient(const ControllerState& cs, Vec3 grad, const AeroParams& ap) {
    if ((cs.beta <= ap.beta_min && grad[2] > 0) || (cs.beta >= ap.beta_max && grad[2] < 0)) grad[2] = 0.0;
    return grad;
}

struct Measurements {
    double omega_r = 1.0;
    Currents currents{};
    double v_w = 1.0;  // measured wind (pu)
};

struct ControllerOutput {
    RotorVoltages rotor{};
    double beta = 0;
    double r2 = 0;
    Vec2 u{};
    Vec3 gradient{};
    Vec3 rates{};  // d/dt (omega_rd, theta, beta)
};

/// One evaluation of the full controller: speed loop on the measured rotor speed, polar
/// map, feedback linearization on fluxes reconstructed from measured currents, and the
/// gradient-flow rates of the setpoint triple.
inline ControllerOutput controller_output(const ControllerState& cs, const Measurements& meas, double p_d, double q_d,
                                          const ControllerDesign& c) {
    const Vec4 iv = meas.currents.as_vector();
    if (!std::isfinite(meas.omega_r) || !std::isfinite(meas.v_w) || !all_finite(iv))
        throw DomainError("controller_output: non-finite measurement");
    ControllerOutput out;
    const auto x = fluxes_from_currents(meas.currents, c.belief.machine);
    out.r2 = speed_control_r2(meas.omega_r, cs.omega_rd, cs.beta, meas.v_w, c);
    out.u = u_from_polar(std::sqrt(out.r2), cs.theta, c.gains);
    out.rotor = feedback_linearize(x, meas.omega_r, out.u, c.gains);
    out.beta = cs.beta;
    out.gradient = gradient_f(cs, {meas.v_w, p_d, q_d}, c);
    out.rates = setpoint_derivatives(cs, out.gradient, c.gradient, c.belief.aero);
    return out;
}

}  // namespace dfig
