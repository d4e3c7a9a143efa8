#pragma once

// Offline analyses: randomized Hessian sweeps, critical-root tables, Cp surfaces, a
// brute-force minimizer of the composite objective, and reference integrations of the
// reduced speed model and the setpoint gradient flow.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

#include "dfig/controller.hpp"
#include "dfig/errors.hpp"
#include "dfig/numerics.hpp"
#include "dfig/plant.hpp"
#include "dfig/sim.hpp"

namespace dfig {

// ---------------------------------------------------------------------------
// Random designs
// ---------------------------------------------------------------------------

class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}
    double uniform(double lo, double hi) { return lo + (hi - lo) * detail::unit_uniform(gen_); }
    std::uint64_t next() { return gen_(); }

private:
    std::mt19937_64 gen_;
};

/// Stable, conjugate-closed spectrum: four real poles, two real plus a pair, or two pairs.
inline ComplexSpectrum random_stable_spectrum(Rng& rng, double min_rate = 1.0, double max_rate = 40.0) {
    const auto pattern = rng.next() % 3;
    ComplexSpectrum s{};
    auto real = [&] { return std::complex<double>(-rng.uniform(min_rate, max_rate), 0.0); };
    auto pair = [&](std::size_t at) {
        const double re = -rng.uniform(min_rate, max_rate), im = rng.uniform(0.5, 20.0);
        s[at] = {re, im};
        s[at + 1] = {re, -im};
    };
    if (pattern == 0) {
        for (auto& z : s) z = real();
    } else if (pattern == 1) {
        s[0] = real();
        s[1] = real();
        pair(2);
    } else {
        pair(0);
        pair(2);
    }
    return s;
}

/// Multiplies r_s, r_r, l_s, l_r, l_m by independent factors in [1 - spread, 1 + spread],
/// redrawing until both self inductances exceed the mutual inductance.
inline MachineParams perturb_machine(const MachineParams& nominal, double spread, Rng& rng) {
    for (;;) {
        MachineParams m = nominal;
        m.r_s *= rng.uniform(1 - spread, 1 + spread);
        m.r_r *= rng.uniform(1 - spread, 1 + spread);
        m.l_s *= rng.uniform(1 - spread, 1 + spread);
        m.l_r *= rng.uniform(1 - spread, 1 + spread);
        m.l_m *= rng.uniform(1 - spread, 1 + spread);
        if (m.l_s > m.l_m && m.l_r > m.l_m) return m;
    }
}

/// A stabilizing gain for `mp` obtained by placing a random stable spectrum.
inline Gain random_stabilizing_gain(const MachineParams& mp, Rng& rng) {
    for (int attempt = 0; attempt < 100; ++attempt) {
        try {
            return place_poles(state_matrix(mp), rotor_input_map(), random_stable_spectrum(rng));
        } catch (const NumericalError&) {
        }
    }
    throw NumericalError("random_stabilizing_gain: no placement succeeded in 100 attempts");
}

struct HessianSweep {
    int trials = 0;
    int positive_definite = 0;
    double min_q1 = std::numeric_limits<double>::infinity();
    double min_det = std::numeric_limits<double>::infinity();       // q1 q3 - q2^2
    double min_rel_det = std::numeric_limits<double>::infinity();   // det / (q1 q3)
};

/// Leading minors of the torque Hessian for random machines and random stabilizing gains.
inline HessianSweep hessian_sweep(int trials, std::uint64_t seed, double spread = 0.5,
                                  const MachineParams& nominal = {}) {
    Rng rng(seed);
    HessianSweep out;
    out.trials = trials;
    for (int t = 0; t < trials; ++t) {
        const auto mp = perturb_machine(nominal, spread, rng);
        const auto k = random_stabilizing_gain(mp, rng);
        // Recompute the quadratic directly rather than through synthesize(), which rejects
        // indefinite Hessians.
        const Mat4 d = inverse(state_matrix(mp) - rotor_input_map() * k);
        const double c = mp.l_m / (mp.sigma() * mp.l_s * mp.l_r);
        const double q1 = c * (d(0, 2) * d(3, 2) - d(1, 2) * d(2, 2));
        const double q2 = 0.5 * c * (d(0, 2) * d(3, 3) + d(0, 3) * d(3, 2) - d(1, 2) * d(2, 3) - d(1, 3) * d(2, 2));
        const double q3 = c * (d(0, 3) * d(3, 3) - d(1, 3) * d(2, 3));
        const double det = q1 * q3 - q2 * q2;
        if (q1 > 0 && det > 0) ++out.positive_definite;
        out.min_q1 = std::min(out.min_q1, q1);
        out.min_det = std::min(out.min_det, det);
        out.min_rel_det = std::min(out.min_rel_det, det / (q1 * q3));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Tables
// ---------------------------------------------------------------------------

struct CriticalRootRow {
    double beta;
    double v_w;
    double omega_r1;
};

inline std::vector<CriticalRootRow> critical_root_table(const std::vector<double>& betas, const std::vector<double>& vws,
                                                        const ControllerDesign& c) {
    std::vector<CriticalRootRow> rows;
    for (double b : betas)
        for (double v : vws) rows.push_back({b, v, critical_root(b, v, c)});
    return rows;
}

struct CpContourRow {
    double lambda;
    double beta;
    double cp_nominal;
    double cp_actual;
};

inline std::vector<CpContourRow> cp_contour(double lambda_step, double beta_step, const CpCoefficients& nominal = {},
                                            const CpCoefficients& actual = kDegradedCp, double lambda_lo = 2.0,
                                            double lambda_hi = 15.0, double beta_lo = 0.0, double beta_hi = 15.0) {
    if (!(lambda_step > 0 && beta_step > 0)) throw ConfigError("step", "grid steps must be > 0");
    std::vector<CpContourRow> rows;
    const auto nl = static_cast<int>(std::floor((lambda_hi - lambda_lo) / lambda_step + 1e-9));
    const auto nb = static_cast<int>(std::floor((beta_hi - beta_lo) / beta_step + 1e-9));
    for (int i = 0; i <= nb; ++i) {
        const double b = beta_lo + i * beta_step;
        for (int j = 0; j <= nl; ++j) {
            const double l = lambda_lo + j * lambda_step;
            rows.push_back({l, b, performance_coefficient(l, b, nominal), performance_coefficient(l, b, actual)});
        }
    }
    return rows;
}

struct CpPeak {
    double lambda;
    double beta;
    double cp;
};

/// Maximum of Cp over lambda in [lo, hi] at fixed beta: 0.01 grid, then golden section.
inline CpPeak cp_peak(const CpCoefficients& c, double beta = 0.0, double lo = 2.0, double hi = 15.0) {
    const double h = 0.01;
    double best_l = lo, best = -std::numeric_limits<double>::infinity();
    for (double l = lo; l <= hi + 1e-12; l += h) {
        const double v = performance_coefficient(l, beta, c);
        if (v > best) {
            best = v;
            best_l = l;
        }
    }
    const double l = golden_section_min([&](double x) { return -performance_coefficient(x, beta, c); },
                                        std::max(lo, best_l - h), std::min(hi, best_l + h), 1e-10);
    return {l, beta, performance_coefficient(l, beta, c)};
}

// ---------------------------------------------------------------------------
// Objective minimization
// ---------------------------------------------------------------------------

struct Minimizer {
    double omega_rd = 0;
    double theta = 0;
    double beta = 0;
    double f = 0;
};

struct GridOptions {
    double omega_lo = 0.2;
    double omega_hi = 1.6;
    double omega_step = 0.01;
    double beta_step = 1.0;  // deg, over [beta_min, beta_max]
    int theta_grid = 720;
};

/// Brute force: grid over (omega_rd, beta) with theta minimized on each node, then
/// alternating golden-section refinement of the theta-profiled objective.
inline Minimizer grid_minimize(const Exogenous& e, const ControllerDesign& c, const GridOptions& opt = {}) {
    const auto& ap = c.belief.aero;
    auto f = [&](double w, double th, double b) { return f_composite({w, th, b}, e, c); };

    Minimizer best{0, 0, 0, std::numeric_limits<double>::infinity()};
    const int nw = static_cast<int>(std::round((opt.omega_hi - opt.omega_lo) / opt.omega_step));
    const int nb = static_cast<int>(std::round((ap.beta_max - ap.beta_min) / opt.beta_step));
    for (int i = 0; i <= nw; ++i) {
        const double w = opt.omega_lo + i * opt.omega_step;
        for (int j = 0; j <= nb; ++j) {
            const double b = ap.beta_min + j * opt.beta_step;
            const double th = minimize_theta(w, b, e, c, opt.theta_grid);
            const double v = f(w, th, b);
            if (v < best.f) best = {w, th, b, v};
        }
    }

    // theta-profiled objective near the current theta.
    double theta = best.theta;
    auto profiled = [&](double w, double b) {
        const double th = golden_section_min([&](double t) { return f(w, t, b); }, theta - 0.05, theta + 0.05, 1e-12);
        return std::pair{f(w, th, b), th};
    };
    double w = best.omega_rd, b = best.beta;
    double hw = opt.omega_step, hb = opt.beta_step;
    for (int sweep = 0; sweep < 8; ++sweep) {
        w = golden_section_min([&](double x) { return profiled(x, b).first; }, std::max(w - hw, opt.omega_lo),
                               std::min(w + hw, opt.omega_hi), 1e-9);
        b = golden_section_min([&](double x) { return profiled(w, x).first; }, std::max(b - hb, ap.beta_min),
                               std::min(b + hb, ap.beta_max), 1e-9);
        // Snap to the bound when the objective is no worse there.
        if (b - ap.beta_min < 1e-6 || profiled(w, ap.beta_min).first <= profiled(w, b).first) b = std::max(ap.beta_min, b);
        theta = profiled(w, b).second;
        hw *= 0.5;
        hb *= 0.5;
    }
    const auto [fv, th] = profiled(w, b);
    if (fv < best.f) best = {w, th, b, fv};
    return best;
}

struct FlowResult {
    ControllerState state;
    double f = 0;
    double time = 0;
    double final_rate = 0;  // max |rate component| at exit
    bool converged = false;
};

/// Integrates the setpoint gradient flow with frozen exogenous inputs (RK4, projected pitch,
/// wrapped angle) until every rate falls below `rate_tol` or `t_max` is reached.
inline FlowResult integrate_gradient_flow(ControllerState s, const Exogenous& e, const ControllerDesign& c,
                                          double dt = 0.02, double t_max = 3000.0, double rate_tol = 1e-9) {
    const auto& ap = c.belief.aero;
    auto rates = [&](const ControllerState& cs) {
        return setpoint_derivatives(cs, gradient_f(cs, e, c), c.gradient, ap);
    };
    auto rhs = [&](double, const Vec3& x) {
        return rates({x[0], x[1], std::clamp(x[2], ap.beta_min, ap.beta_max)});
    };
    FlowResult r;
    Vec3 x{s.omega_rd, s.theta, s.beta};
    double t = 0;
    for (; t < t_max; t += dt) {
        const auto v = rates({x[0], x[1], x[2]});
        const double m = std::max({std::abs(v[0]), std::abs(v[1]), std::abs(v[2])});
        if (m < rate_tol) {
            r.converged = true;
            break;
        }
        x = rk4_step(rhs, x, t, dt);
        x[1] = wrap_angle(x[1]);
        x[2] = std::clamp(x[2], ap.beta_min, ap.beta_max);
        if (!(x[0] > kMinRotorSpeed)) throw NumericalError("integrate_gradient_flow: omega_rd left (0, inf)");
    }
    r.state = {x[0], x[1], x[2]};
    r.f = f_composite(r.state, e, c);
    r.time = t;
    const auto v = rates(r.state);
    r.final_rate = std::max({std::abs(v[0]), std::abs(v[1]), std::abs(v[2])});
    return r;
}

// ---------------------------------------------------------------------------
// Reduced speed model
// ---------------------------------------------------------------------------

struct ReducedRun {
    double final_error = 0;             // |omega_r(T) - omega_rd|
    double max_lyapunov_increase = 0;   // largest step-to-step increase of (omega_r - omega_rd)^2 / 2
};

/// First-order rotor model with T_e = r^2 + a' and the clamped speed law, integrated with RK4.
inline ReducedRun run_reduced_model(double omega0, double omega_rd, double beta, double v_w, const ControllerDesign& c,
                                    double t_end, double dt = 1e-3) {
    ReducedRun out;
    Vec<1> w{omega0};
    auto rhs = [&](double, const Vec<1>& x) { return Vec<1>{reduced_speed_derivative(x[0], omega_rd, beta, v_w, c)}; };
    double lyap = 0.5 * (omega0 - omega_rd) * (omega0 - omega_rd);
    const auto n = static_cast<std::size_t>(std::llround(t_end / dt));
    for (std::size_t i = 0; i < n; ++i) {
        w = rk4_step(rhs, w, static_cast<double>(i) * dt, dt);
        const double next = 0.5 * (w[0] - omega_rd) * (w[0] - omega_rd);
        out.max_lyapunov_increase = std::max(out.max_lyapunov_increase, next - lyap);
        lyap = next;
    }
    out.final_error = std::abs(w[0] - omega_rd);
    return out;
}

}  // namespace dfig
