#pragma once

// Fifth-order DFIG wind-turbine model in the synchronous dq frame, per-unit.
//
// State: fluxes x = [phi_ds, phi_qs, phi_dr, phi_qr] and rotor speed omega_r.
// Inputs: rotor voltages (v_dr, v_qr) and blade pitch beta (degrees).
// Disturbance: wind speed v_w (pu of the base wind speed).

#include <cmath>
#include <string>

#include "dfig/errors.hpp"
#include "dfig/numerics.hpp"

namespace dfig {

using FluxVector = Vec4;  // [phi_ds, phi_qs, phi_dr, phi_qr]

struct MachineParams {
    double r_s = 0.00706;
    double r_r = 0.005;
    double l_s = 3.071;
    double l_r = 3.056;
    double l_m = 2.9;
    double omega_s = 1.0;
    double v_ds = 1.0;
    double v_qs = 0.0;
    // Multiplies the flux derivatives; 1 integrates the voltage equations exactly as written.
    double time_base_scale = 1.0;

    /// Leak coefficient 1 - L_m^2 / (L_s L_r).
    [[nodiscard]] double sigma() const { return 1.0 - l_m * l_m / (l_s * l_r); }

    void validate() const {
        auto finite = [](double v) { return std::isfinite(v); };
        if (!(finite(r_s) && r_s > 0)) throw ConfigError("r_s", "must be > 0");
        if (!(finite(r_r) && r_r > 0)) throw ConfigError("r_r", "must be > 0");
        if (!(finite(l_m) && l_m > 0)) throw ConfigError("l_m", "must be > 0");
        if (!(finite(l_s) && l_s > l_m)) throw ConfigError("l_s", "must exceed l_m");
        if (!(finite(l_r) && l_r > l_m)) throw ConfigError("l_r", "must exceed l_m");
        if (!(finite(omega_s) && omega_s > 0)) throw ConfigError("omega_s", "must be > 0");
        if (!(finite(v_ds) && finite(v_qs))) throw ConfigError("v_ds", "stator voltages must be finite");
        if (!(finite(time_base_scale) && time_base_scale > 0)) throw ConfigError("time_base_scale", "must be > 0");
    }
};

/// Coefficients c1..c6 of the Heier performance-coefficient model.
struct CpCoefficients {
    double c1 = 0.5176;
    double c2 = 116.0;
    double c3 = 0.4;
    double c4 = 5.0;
    double c5 = 21.0;
    double c6 = 0.0068;

    friend bool operator==(const CpCoefficients&, const CpCoefficients&) = default;
};

/// Coefficient set for the degraded rotor used in the robustness scenario.
inline constexpr CpCoefficients kDegradedCp{0.45, 115.0, 0.5, 4.5, 22.0, 0.003};

struct AeroParams {
    CpCoefficients cp{};
    double beta_min = 0.0;   // deg
    double beta_max = 30.0;  // deg
    double lambda_nom = 8.1;
    double cp_nom = 0.48;
    double p_wind_base = 1.5e6;        // W
    double p_elec_base = 1.5e6 / 0.9;  // VA
    double p_nom = 0.73;
    double v_w_base = 12.0;  // m/s

    /// P_wind_base * P_nom / P_elec_base: mechanical power (pu) at Cp = cp_nom and v_w = 1 pu.
    [[nodiscard]] double power_constant() const { return p_wind_base * p_nom / p_elec_base; }

    void validate() const {
        if (!(std::isfinite(beta_min) && std::isfinite(beta_max) && beta_min < beta_max))
            throw ConfigError("beta_min", "must be finite and below beta_max");
        if (!(cp_nom > 0)) throw ConfigError("cp_nom", "must be > 0");
        if (!(lambda_nom > 0)) throw ConfigError("lambda_nom", "must be > 0");
        if (!(p_wind_base > 0)) throw ConfigError("p_wind_base", "must be > 0");
        if (!(p_elec_base > 0)) throw ConfigError("p_elec_base", "must be > 0");
        if (!(p_nom > 0)) throw ConfigError("p_nom", "must be > 0");
        if (!(v_w_base > 0)) throw ConfigError("v_w_base", "must be > 0");
    }
};

struct DriveTrainParams {
    double j = 10.08;
    double c_f = 0.01;

    void validate() const {
        if (!(std::isfinite(j) && j > 0)) throw ConfigError("j", "must be > 0");
        if (!(std::isfinite(c_f) && c_f >= 0)) throw ConfigError("c_f", "must be >= 0");
    }
};

/// Complete parameter set: used both as plant truth and as controller belief.
struct TurbineParams {
    MachineParams machine{};
    AeroParams aero{};
    DriveTrainParams drive{};

    void validate() const {
        machine.validate();
        aero.validate();
        drive.validate();
    }
};

struct PlantState {
    FluxVector flux{};
    double omega_r = 1.0;
};

struct Currents {
    double i_ds = 0, i_qs = 0, i_dr = 0, i_qr = 0;

    [[nodiscard]] Vec4 as_vector() const { return {i_ds, i_qs, i_dr, i_qr}; }
    static Currents from_vector(const Vec4& v) { return {v[0], v[1], v[2], v[3]}; }
};

struct Voltages {
    double v_ds = 0, v_qs = 0, v_dr = 0, v_qr = 0;
};

struct RotorVoltages {
    double v_dr = 0, v_qr = 0;
};

struct Powers {
    double p_s = 0, q_s = 0, p_r = 0, q_r = 0;
    double p = 0, q = 0;
    double pf = 0;  // p / |s|; 0 when both p and q vanish
};

// ---------------------------------------------------------------------------
// Electrical part
// ---------------------------------------------------------------------------

/// Inductance matrix L with fluxes = L * currents.
inline Mat4 inductance_matrix(const MachineParams& mp) {
    const double ls = mp.l_s, lr = mp.l_r, lm = mp.l_m;
    return Mat4::from_rows({{ls, 0, lm, 0}, {0, ls, 0, lm}, {lm, 0, lr, 0}, {0, lm, 0, lr}});
}

/// Closed-form inverse of the inductance matrix: currents = C * fluxes.
inline Mat4 flux_to_current_matrix(const MachineParams& mp) {
    const double s = mp.sigma();
    const double a = 1.0 / (s * mp.l_s);
    const double b = mp.l_m / (s * mp.l_s * mp.l_r);
    const double c = 1.0 / (s * mp.l_r);
    return Mat4::from_rows({{a, 0, -b, 0}, {0, a, 0, -b}, {-b, 0, c, 0}, {0, -b, 0, c}});
}

inline Currents currents_from_fluxes(const FluxVector& x, const MachineParams& mp) {
    const double s = mp.sigma();
    const double k = mp.l_m / (s * mp.l_s * mp.l_r);
    return {x[0] / (s * mp.l_s) - k * x[2], x[1] / (s * mp.l_s) - k * x[3],
            -k * x[0] + x[2] / (s * mp.l_r), -k * x[1] + x[3] / (s * mp.l_r)};
}

inline FluxVector fluxes_from_currents(const Currents& i, const MachineParams& mp) {
    return {mp.l_s * i.i_ds + mp.l_m * i.i_dr, mp.l_s * i.i_qs + mp.l_m * i.i_qr,
            mp.l_m * i.i_ds + mp.l_r * i.i_dr, mp.l_m * i.i_qs + mp.l_r * i.i_qr};
}

/// The constant part A of the flux dynamics x' = A x + [v_ds, v_qs, v_dr - w_r x4, v_qr + w_r x3].
inline Mat4 state_matrix(const MachineParams& mp) {
    const double s = mp.sigma();
    const double ss = -mp.r_s / (s * mp.l_s);
    const double sr = mp.r_s * mp.l_m / (s * mp.l_s * mp.l_r);
    const double rs = mp.r_r * mp.l_m / (s * mp.l_s * mp.l_r);
    const double rr = -mp.r_r / (s * mp.l_r);
    const double w = mp.omega_s;
    return Mat4::from_rows({{ss, w, sr, 0}, {-w, ss, 0, sr}, {rs, 0, rr, w}, {0, rs, -w, rr}});
}

inline InputMap rotor_input_map() { return InputMap::from_rows({{0, 0}, {0, 0}, {1, 0}, {0, 1}}); }

/// Flux time-derivatives, written out term by term from the voltage equations.
inline FluxVector electrical_derivatives(const FluxVector& x, double omega_r, const Voltages& v,
                                         const MachineParams& mp) {
    const double s = mp.sigma();
    const double ls_s = s * mp.l_s, lr_s = s * mp.l_r, lslr_s = s * mp.l_s * mp.l_r;
    const double slip = mp.omega_s - omega_r;
    FluxVector d{};
    d[0] = -mp.r_s / ls_s * x[0] + mp.omega_s * x[1] + mp.r_s * mp.l_m / lslr_s * x[2] + v.v_ds;
    d[1] = -mp.omega_s * x[0] - mp.r_s / ls_s * x[1] + mp.r_s * mp.l_m / lslr_s * x[3] + v.v_qs;
    d[2] = mp.r_r * mp.l_m / lslr_s * x[0] - mp.r_r / lr_s * x[2] + slip * x[3] + v.v_dr;
    d[3] = mp.r_r * mp.l_m / lslr_s * x[1] - slip * x[2] - mp.r_r / lr_s * x[3] + v.v_qr;
    return scale(d, mp.time_base_scale);
}

/// Same derivatives through the matrix form A x + forcing; kept as an independent path for tests.
inline FluxVector electrical_derivatives_matrix(const FluxVector& x, double omega_r, const Voltages& v,
                                                const MachineParams& mp) {
    const Vec4 forcing{v.v_ds, v.v_qs, v.v_dr - omega_r * x[3], v.v_qr + omega_r * x[2]};
    return scale(add(state_matrix(mp) * x, forcing), mp.time_base_scale);
}

inline Powers powers(const Voltages& v, const Currents& i) {
    Powers p;
    p.p_s = -v.v_ds * i.i_ds - v.v_qs * i.i_qs;
    p.q_s = -v.v_qs * i.i_ds + v.v_ds * i.i_qs;
    p.p_r = -v.v_dr * i.i_dr - v.v_qr * i.i_qr;
    p.q_r = -v.v_qr * i.i_dr + v.v_dr * i.i_qr;
    p.p = p.p_s + p.p_r;
    p.q = p.q_s + p.q_r;
    const double s = std::hypot(p.p, p.q);
    p.pf = s > 0 ? p.p / s : 0.0;
    return p;
}

/// Electromagnetic torque phi_qs i_ds - phi_ds i_qs.
inline double electromagnetic_torque(const FluxVector& x, const MachineParams& mp) {
    const auto i = currents_from_fluxes(x, mp);
    return x[1] * i.i_ds - x[0] * i.i_qs;
}

/// Matrix of the torque quadratic form T_e = x^T G x.
inline Mat4 torque_form(const MachineParams& mp) {
    const double s = mp.sigma();
    const double a = 1.0 / (s * mp.l_s);
    const double b = mp.l_m / (s * mp.l_s * mp.l_r);
    return Mat4::from_rows({{0, -a, 0, b}, {a, 0, -b, 0}, {0, 0, 0, 0}, {0, 0, 0, 0}});
}

inline double electromagnetic_torque_quadratic(const FluxVector& x, const MachineParams& mp) {
    return dot(x, torque_form(mp) * x);
}

// ---------------------------------------------------------------------------
// Aerodynamics and mechanics
// ---------------------------------------------------------------------------

/// Heier Cp(lambda, beta) model, beta in degrees. May be negative at large lambda.
inline double performance_coefficient(double lambda, double beta, const CpCoefficients& c) {
    if (!(std::isfinite(lambda) && lambda > 0)) throw DomainError("performance_coefficient: lambda must be > 0");
    if (!std::isfinite(beta)) throw DomainError("performance_coefficient: beta must be finite");
    const double shifted = lambda + 0.08 * beta;
    if (shifted == 0.0) throw DomainError("performance_coefficient: lambda + 0.08 beta vanishes");
    const double inv_li = 1.0 / shifted - 0.035 / (beta * beta * beta + 1.0);
    return c.c1 * (c.c2 * inv_li - c.c3 * beta - c.c4) * std::exp(-c.c5 * inv_li) + c.c6 * lambda;
}

/// Per-unit tip-speed ratio: lambda_nom at rated speed and rated wind.
inline double tip_speed_ratio(double omega_r, double v_w, const AeroParams& ap) {
    if (!(v_w > 0)) throw DomainError("tip_speed_ratio: wind speed must be > 0");
    return ap.lambda_nom * omega_r / v_w;
}

/// Mechanical power in pu of the electrical base, with Cp normalized by cp_nom.
inline double mechanical_power_pu(double cp, double v_w, const AeroParams& ap) {
    return ap.power_constant() * (cp / ap.cp_nom) * v_w * v_w * v_w;
}

inline constexpr double kMinRotorSpeed = 1e-6;

inline double mechanical_torque(double omega_r, double beta, double v_w, const AeroParams& ap,
                                const CpCoefficients& cp) {
    if (!(omega_r > kMinRotorSpeed)) throw DomainError("mechanical_torque: rotor speed below 1e-6 pu");
    if (beta < ap.beta_min || beta > ap.beta_max) throw DomainError("mechanical_torque: pitch outside [beta_min, beta_max]");
    const double lambda = tip_speed_ratio(omega_r, v_w, ap);
    return mechanical_power_pu(performance_coefficient(lambda, beta, cp), v_w, ap) / omega_r;
}

inline double mechanical_torque(double omega_r, double beta, double v_w, const AeroParams& ap) {
    return mechanical_torque(omega_r, beta, v_w, ap, ap.cp);
}

struct PlantControls {
    double v_dr = 0;
    double v_qr = 0;
    double beta = 0;
};

using PlantVector = Vec<5>;

inline PlantVector pack(const PlantState& s) { return {s.flux[0], s.flux[1], s.flux[2], s.flux[3], s.omega_r}; }
inline PlantState unpack_plant(const PlantVector& v) { return {{v[0], v[1], v[2], v[3]}, v[4]}; }

/// Rotor acceleration (T_m - T_e - C_f w_r) / J.
inline double mechanical_derivative(const PlantState& s, double beta, double v_w, const TurbineParams& p) {
    const double tm = mechanical_torque(s.omega_r, beta, v_w, p.aero);
    const double te = electromagnetic_torque(s.flux, p.machine);
    return (tm - te - p.drive.c_f * s.omega_r) / p.drive.j;
}

/// Time-derivatives of [phi_ds, phi_qs, phi_dr, phi_qr, omega_r].
inline PlantVector plant_derivatives(const PlantState& s, const PlantControls& u, double v_w, const TurbineParams& p) {
    const Voltages v{p.machine.v_ds, p.machine.v_qs, u.v_dr, u.v_qr};
    const auto dx = electrical_derivatives(s.flux, s.omega_r, v, p.machine);
    return {dx[0], dx[1], dx[2], dx[3], mechanical_derivative(s, u.beta, v_w, p)};
}

}  // namespace dfig
