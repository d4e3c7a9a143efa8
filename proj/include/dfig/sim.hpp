#pragma once

// Closed-loop simulation: plant truth driven by a controller that holds its own belief
// about the turbine, sees a (possibly noisy) wind measurement and follows a demand schedule.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "dfig/controller.hpp"
#include "dfig/errors.hpp"
#include "dfig/numerics.hpp"
#include "dfig/plant.hpp"

namespace dfig {

// ---------------------------------------------------------------------------
// Wind
// ---------------------------------------------------------------------------

struct WindStep {
    double t_start = 0;
    double v_w = 1;
};

struct StepSchedule {
    std::vector<WindStep> steps;
};

struct Sinusoid {
    double amplitude = 0;  // pu
    double frequency = 0;  // rad/s
    double phase = 0;      // rad
};

/// Mean plus deterministic sinusoids plus seeded band-limited turbulence, clamped to [v_min, v_max].
/// The turbulence is a random-phase spectral sum, so the profile is a pure function of (t, seed);
/// the seed comes from the scenario, not the profile.
struct SyntheticWind {
    double mean = 1.0;
    std::vector<Sinusoid> components;
    double turbulence_intensity = 0.0;  // standard deviation of the turbulence part (pu)
    double turbulence_cutoff = 0.05;    // rad/s, upper edge of the turbulence band
    int turbulence_modes = 32;
    double v_min = 0.05;
    double v_max = 10.0;
};

enum class Interpolation { hold, linear };

struct SampledWind {
    std::vector<double> t;
    std::vector<double> v_w;
    Interpolation interpolation = Interpolation::linear;
};

using WindProfile = std::variant<StepSchedule, SyntheticWind, SampledWind>;

namespace detail {

// Uniform double in [0, 1) from the top 53 bits; platform-independent unlike std::uniform_real_distribution.
inline double unit_uniform(std::mt19937_64& gen) { return static_cast<double>(gen() >> 11) * 0x1.0p-53; }

inline std::vector<Sinusoid> turbulence_modes(const SyntheticWind& w, std::uint64_t seed) {
    std::vector<Sinusoid> modes;
    if (w.turbulence_intensity <= 0 || w.turbulence_modes <= 0) return modes;
    std::mt19937_64 gen(seed);
    const int n = w.turbulence_modes;
    // Equal-variance modes spread over (0, cutoff]; sum has the requested standard deviation.
    const double amp = w.turbulence_intensity * std::sqrt(2.0 / n);
    for (int k = 0; k < n; ++k) {
        const double f = w.turbulence_cutoff * (k + unit_uniform(gen)) / n;
        const double ph = 2.0 * std::numbers::pi * unit_uniform(gen);
        modes.push_back({amp, f, ph});
    }
    return modes;
}

}  // namespace detail

inline void validate(const WindProfile& profile) {
    std::visit(
        [](const auto& p) {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, StepSchedule>) {
                if (p.steps.empty()) throw ConfigError("wind.steps", "must not be empty");
                for (std::size_t i = 0; i < p.steps.size(); ++i) {
                    if (!(p.steps[i].v_w > 0)) throw ConfigError("wind.steps", "wind speed must be > 0");
                    if (i && !(p.steps[i].t_start > p.steps[i - 1].t_start))
                        throw ConfigError("wind.steps", "times must be strictly increasing");
                }
            } else if constexpr (std::is_same_v<T, SyntheticWind>) {
                if (!(p.mean > 0)) throw ConfigError("wind.mean", "must be > 0");
                if (!(p.v_min > 0 && p.v_min < p.v_max)) throw ConfigError("wind.v_min", "need 0 < v_min < v_max");
                if (!(p.turbulence_intensity >= 0)) throw ConfigError("wind.turbulence_intensity", "must be >= 0");
            } else {
                if (p.t.empty() || p.t.size() != p.v_w.size())
                    throw ConfigError("wind.samples", "need equally many times and speeds, at least one");
                for (std::size_t i = 0; i < p.t.size(); ++i) {
                    if (!(p.v_w[i] > 0)) throw ConfigError("wind.samples", "wind speed must be > 0");
                    if (i && !(p.t[i] > p.t[i - 1])) throw ConfigError("wind.samples", "times must be strictly increasing");
                }
            }
        },
        profile);
}

/// Precomputed evaluator; wind_at() builds one per call, the simulation keeps one for the run.
class WindEvaluator {
public:
    explicit WindEvaluator(WindProfile profile, std::uint64_t seed = 1) : profile_(std::move(profile)) {
        validate(profile_);
        if (const auto* s = std::get_if<SyntheticWind>(&profile_)) modes_ = detail::turbulence_modes(*s, seed);
    }

    [[nodiscard]] double operator()(double t) const {
        return std::visit([&](const auto& p) { return eval(p, t); }, profile_);
    }

    [[nodiscard]] const WindProfile& profile() const { return profile_; }

private:
    static double eval(const StepSchedule& p, double t) {
        if (t < p.steps.front().t_start) throw DomainError("wind_at: time precedes the first step");
        double v = p.steps.front().v_w;
        for (const auto& s : p.steps) {
            if (s.t_start <= t)
                v = s.v_w;
            else
                break;
        }
        return v;
    }

    [[nodiscard]] double eval(const SyntheticWind& p, double t) const {
        double v = p.mean;
        for (const auto& c : p.components) v += c.amplitude * std::sin(c.frequency * t + c.phase);
        for (const auto& c : modes_) v += c.amplitude * std::sin(c.frequency * t + c.phase);
        return std::clamp(v, p.v_min, p.v_max);
    }

    static double eval(const SampledWind& p, double t) {
        if (t < p.t.front()) throw DomainError("wind_at: time precedes the first sample");
        const auto it = std::upper_bound(p.t.begin(), p.t.end(), t);
        const auto i = static_cast<std::size_t>(it - p.t.begin()) - 1;
        if (i + 1 >= p.t.size() || p.interpolation == Interpolation::hold) return p.v_w[i];
        const double s = (t - p.t[i]) / (p.t[i + 1] - p.t[i]);
        return p.v_w[i] + s * (p.v_w[i + 1] - p.v_w[i]);
    }

    WindProfile profile_;
    std::vector<Sinusoid> modes_;
};

/// Wind speed (pu) at time t; the seed only matters for synthetic turbulence.
inline double wind_at(const WindProfile& profile, double t, std::uint64_t seed = 1) {
    return WindEvaluator(profile, seed)(t);
}

// ---------------------------------------------------------------------------
// Demand and measurement noise
// ---------------------------------------------------------------------------

struct DemandStep {
    double t_start = 0;
    double p_d = 0;
    double q_d = 0;
};

struct DemandSchedule {
    std::vector<DemandStep> steps;

    /// Reactive demand giving power factor `pf` at active demand `p_d`.
    static double q_for_power_factor(double p_d, double pf) { return p_d * std::tan(std::acos(pf)); }

    [[nodiscard]] DemandStep at(double t) const {
        DemandStep d = steps.front();
        for (const auto& s : steps) {
            if (s.t_start <= t)
                d = s;
            else
                break;
        }
        return d;
    }

    void validate() const {
        if (steps.empty()) throw ConfigError("demand.steps", "must not be empty");
        for (std::size_t i = 0; i < steps.size(); ++i) {
            if (!(std::isfinite(steps[i].p_d) && std::isfinite(steps[i].q_d)))
                throw ConfigError("demand.steps", "demands must be finite");
            if (i && !(steps[i].t_start > steps[i - 1].t_start))
                throw ConfigError("demand.steps", "times must be strictly increasing");
        }
    }
};

enum class NoiseKind { sin, cos };

struct NoiseTerm {
    double amplitude = 0;
    double frequency = 0;  // rad/s
    double phase = 0;
    NoiseKind kind = NoiseKind::sin;
};

/// v_meas = v_true + units_to_pu * (bias + sum a_k trig(w_k t + phi_k)).
struct NoiseSpec {
    double bias = 0;
    std::vector<NoiseTerm> terms;
    double units_to_pu = 1.0;  // 1 for pu; 1 / v_w_base when bias and amplitudes are in m/s
};

inline double measure_wind(double v_w_true, double t, const NoiseSpec& n) {
    double e = n.bias;
    for (const auto& k : n.terms) {
        const double arg = k.frequency * t + k.phase;
        e += k.amplitude * (k.kind == NoiseKind::sin ? std::sin(arg) : std::cos(arg));
    }
    return v_w_true + n.units_to_pu * e;
}

// ---------------------------------------------------------------------------
// Scenario and results
// ---------------------------------------------------------------------------

struct MetricWindow {
    std::string label;
    double t0 = 0;
    double t1 = 0;
};

struct ControllerTuning {
    ComplexSpectrum poles = kDefaultElectricalPoles;
    std::optional<Gain> gain;  // overrides pole placement when set
    ObjectiveWeights weights{};
    GradientGains gradient{};
};

struct ScenarioSpec {
    std::string name = "scenario";
    double duration = 600.0;          // s
    double dt = 2e-3;                 // s
    double controller_period = 0.02;  // s, integer multiple of dt
    double sample_period = 0.5;       // s, integer multiple of dt
    WindProfile wind = StepSchedule{{{0.0, 1.0}}};
    DemandSchedule demand{{{0.0, 0.9, 0.09}}};
    TurbineParams plant{};
    TurbineParams belief{};
    NoiseSpec noise{};
    ControllerTuning tuning{};
    double initial_omega_r = 0.8;
    std::optional<PlantState> initial_plant;         // default: quasi-static fluxes for the first controller output
    // Default: omega_rd = omega_r(0), beta = beta_min, theta minimizing f there. Starting at
    // an arbitrary theta (e.g. 0) can put the first gradient evaluation on the steep flank of f.
    std::optional<ControllerState> initial_controller;
    std::uint64_t seed = 1;
    std::vector<MetricWindow> windows;
};

namespace detail {

inline bool is_multiple(double period, double dt) {
    const double n = std::round(period / dt);
    return n >= 1 && std::abs(n * dt - period) <= 1e-9 * period;
}

inline std::size_t steps_for(double period, double dt) { return static_cast<std::size_t>(std::llround(period / dt)); }

}  // namespace detail

inline void validate(const ScenarioSpec& s) {
    if (!(s.duration > 0)) throw ConfigError("duration", "must be > 0");
    if (!(s.dt > 0)) throw ConfigError("dt", "must be > 0");
    if (!(s.controller_period >= s.dt && detail::is_multiple(s.controller_period, s.dt)))
        throw ConfigError("controller_period", "must be an integer multiple of dt");
    if (!(s.sample_period >= s.dt && detail::is_multiple(s.sample_period, s.dt)))
        throw ConfigError("sample_period", "must be an integer multiple of dt");
    if (!(s.initial_omega_r > 0)) throw ConfigError("initial_omega_r", "must be > 0");
    validate(s.wind);
    s.demand.validate();
    s.plant.validate();
    s.belief.validate();
    s.tuning.weights.validate();
    s.tuning.gradient.validate();
    for (const auto& w : s.windows)
        if (!(w.t0 < w.t1)) throw ConfigError("windows", "window '" + w.label + "' must have t0 < t1");
}

/// One recorded instant. Field order is the CSV column order.
struct Sample {
    double t = 0, v_w_true = 0, v_w_meas = 0, p_d = 0, q_d = 0, p = 0, q = 0, pf = 0, cp = 0, lambda = 0;
    double omega_r = 0, omega_rd = 0, beta = 0, theta = 0, r2 = 0, v_dr = 0, v_qr = 0, u1 = 0, u2 = 0, V = 0;

    static constexpr std::size_t kColumns = 20;
    static constexpr std::array<std::string_view, kColumns> column_names{
        "t", "v_w_true", "v_w_meas", "p_d", "q_d", "p", "q", "pf", "cp", "lambda",
        "omega_r", "omega_rd", "beta", "theta", "r2", "v_dr", "v_qr", "u1", "u2", "V"};

    [[nodiscard]] std::array<double, kColumns> values() const {
        return {t, v_w_true, v_w_meas, p_d, q_d, p, q, pf, cp, lambda, omega_r, omega_rd, beta, theta, r2, v_dr, v_qr, u1, u2, V};
    }

    static Sample from_values(const std::array<double, kColumns>& v) {
        return {v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8], v[9],
                v[10], v[11], v[12], v[13], v[14], v[15], v[16], v[17], v[18], v[19]};
    }

    friend bool operator==(const Sample&, const Sample&) = default;
};

inline std::optional<std::size_t> column_index(std::string_view name) {
    for (std::size_t i = 0; i < Sample::kColumns; ++i)
        if (Sample::column_names[i] == name) return i;
    return std::nullopt;
}

struct TimeSeries {
    std::vector<Sample> samples;

    [[nodiscard]] std::vector<double> column(std::size_t idx) const {
        std::vector<double> out;
        out.reserve(samples.size());
        for (const auto& s : samples) out.push_back(s.values()[idx]);
        return out;
    }

    friend bool operator==(const TimeSeries&, const TimeSeries&) = default;
};

struct RunDiagnostics {
    std::size_t steps = 0;
    std::size_t controller_updates = 0;
    // Largest |T_e - (r^2 + a')| over recorded samples after the first 5 s: how far the
    // electrical dynamics are from their quasi-static approximation.
    double max_reduction_error = 0;
};

struct RunResult {
    TimeSeries series;
    RunDiagnostics diagnostics;
    PlantState final_plant;
    ControllerState final_controller;
};

/// Controller design implied by a scenario's tuning and belief parameters.
inline ControllerDesign design_for(const ScenarioSpec& s) {
    if (s.tuning.gain) return make_design(s.belief, *s.tuning.gain, s.tuning.weights, s.tuning.gradient);
    return make_design(s.belief, s.tuning.poles, s.tuning.weights, s.tuning.gradient);
}

inline ControllerState default_initial_controller(const ScenarioSpec& spec, const ControllerDesign& c, double omega_r) {
    const double beta = c.belief.aero.beta_min;
    const double v0 = measure_wind(wind_at(spec.wind, 0.0, spec.seed), 0.0, spec.noise);
    const auto d0 = spec.demand.at(0.0);
    return {omega_r, minimize_theta(omega_r, beta, {v0, d0.p_d, d0.q_d}, c), beta};
}

/// Fluxes at the quasi-static equilibrium of the first controller output, so that the run
/// starts on the slow manifold instead of with a flux transient.
inline PlantState default_initial_plant(const ScenarioSpec& spec, const ControllerDesign& c, const ControllerState& cs,
                                        double omega_r) {
    const double v0 = measure_wind(wind_at(spec.wind, 0.0, spec.seed), 0.0, spec.noise);
    const double r2 = speed_control_r2(omega_r, cs.omega_rd, cs.beta, v0, c);
    return {equilibrium_fluxes(u_from_polar(std::sqrt(r2), cs.theta, c.gains), c.gains), omega_r};
}

/// Integrate plant (5 states) and setpoint flow (3 states) with RK4 at dt. The controller
/// is evaluated every controller_period; its rotor voltages and setpoint rates are held in
/// between. The pitch fed to the plant is the (clamped) setpoint state itself.
inline RunResult run_closed_loop(const ScenarioSpec& spec) {
    validate(spec);
    const ControllerDesign design = design_for(spec);
    const WindEvaluator wind(spec.wind, spec.seed);
    const auto& truth = spec.plant;

    const double omega0 = spec.initial_plant ? spec.initial_plant->omega_r : spec.initial_omega_r;
    const ControllerState c0 =
        spec.initial_controller ? *spec.initial_controller : default_initial_controller(spec, design, omega0);
    const PlantState p0 = spec.initial_plant ? *spec.initial_plant : default_initial_plant(spec, design, c0, omega0);

    using State = Vec<8>;
    State x{p0.flux[0], p0.flux[1], p0.flux[2], p0.flux[3], p0.omega_r, c0.omega_rd, wrap_angle(c0.theta), c0.beta};

    const std::size_t n_steps = detail::steps_for(spec.duration, spec.dt);
    const std::size_t per_update = detail::steps_for(spec.controller_period, spec.dt);
    const std::size_t per_sample = detail::steps_for(spec.sample_period, spec.dt);

    auto clamp_beta = [&](double b) { return std::clamp(b, truth.aero.beta_min, truth.aero.beta_max); };
    auto plant_of = [](const State& s) { return PlantState{{s[0], s[1], s[2], s[3]}, s[4]}; };
    auto ctrl_of = [](const State& s) { return ControllerState{s[5], s[6], s[7]}; };

    RunResult result;
    ControllerOutput held;
    double t = 0.0;

    auto record = [&](const State& s, double time) {
        const auto ps = plant_of(s);
        const auto cs = ctrl_of(s);
        const double vw = wind(time);
        const auto dem = spec.demand.at(time);
        const auto cur = currents_from_fluxes(ps.flux, truth.machine);
        const auto pw = powers({truth.machine.v_ds, truth.machine.v_qs, held.rotor.v_dr, held.rotor.v_qr}, cur);
        const double beta = clamp_beta(cs.beta);
        const double lambda = tip_speed_ratio(ps.omega_r, vw, truth.aero);
        Sample smp;
        smp.t = time;
        smp.v_w_true = vw;
        smp.v_w_meas = measure_wind(vw, time, spec.noise);
        smp.p_d = dem.p_d;
        smp.q_d = dem.q_d;
        smp.p = pw.p;
        smp.q = pw.q;
        smp.pf = pw.pf;
        smp.cp = performance_coefficient(lambda, beta, truth.aero.cp);
        smp.lambda = lambda;
        smp.omega_r = ps.omega_r;
        smp.omega_rd = cs.omega_rd;
        smp.beta = cs.beta;
        smp.theta = cs.theta;
        smp.r2 = held.r2;
        smp.v_dr = held.rotor.v_dr;
        smp.v_qr = held.rotor.v_qr;
        smp.u1 = held.u[0];
        smp.u2 = held.u[1];
        smp.V = objective_v(pw.p, pw.q, dem.p_d, dem.q_d, design.weights);
        result.series.samples.push_back(smp);
        if (time >= 5.0) {
            const double te = electromagnetic_torque(ps.flux, truth.machine);
            result.diagnostics.max_reduction_error =
                std::max(result.diagnostics.max_reduction_error, std::abs(te - (held.r2 + design.gains.a_prime)));
        }
    };

    auto rhs = [&](double time, const State& s) {
        const auto ps = plant_of(s);
        const PlantControls u{held.rotor.v_dr, held.rotor.v_qr, clamp_beta(s[7])};
        const auto dp = plant_derivatives(ps, u, wind(time), truth);
        return State{dp[0], dp[1], dp[2], dp[3], dp[4], held.rates[0], held.rates[1], held.rates[2]};
    };

    auto abort = [&](const std::string& why, const State& s) -> SimulationAbort {
        return SimulationAbort(t, "simulation aborted at t=" + std::to_string(t) + ": " + why + "; state=" + to_string(s));
    };

    try {
        for (std::size_t step = 0; step <= n_steps; ++step) {
            t = static_cast<double>(step) * spec.dt;
            if (step % per_update == 0 || step == n_steps) {
                const auto ps = plant_of(x);
                const double vw = wind(t);
                const auto dem = spec.demand.at(t);
                const Measurements m{ps.omega_r, currents_from_fluxes(ps.flux, truth.machine), measure_wind(vw, t, spec.noise)};
                held = controller_output(ctrl_of(x), m, dem.p_d, dem.q_d, design);
                ++result.diagnostics.controller_updates;
            }
            if (step % per_sample == 0 || step == n_steps) record(x, t);
            if (step == n_steps) break;
            x = rk4_step(rhs, x, t, spec.dt);
            x[6] = wrap_angle(x[6]);
            x[7] = clamp_beta(x[7]);
            if (!(x[4] > 0.0)) throw abort("rotor speed left (0, inf)", x);
            if (!(x[5] > 0.0)) throw abort("desired rotor speed left (0, inf)", x);
            ++result.diagnostics.steps;
        }
    } catch (const SimulationAbort&) {
        throw;
    } catch (const Error& e) {
        throw abort(e.what(), x);
    }
    result.final_plant = plant_of(x);
    result.final_controller = ctrl_of(x);
    return result;
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

struct SignalStats {
    std::size_t count = 0;
    double mean = 0;
    double min = 0;
    double max = 0;
    double max_deviation = 0;  // max |x - mean|
};

inline SignalStats signal_stats(const std::vector<double>& v) {
    if (v.empty()) throw DomainError("signal_stats: empty window");
    SignalStats s;
    s.count = v.size();
    double sum = 0;
    s.min = s.max = v.front();
    for (double x : v) {
        sum += x;
        s.min = std::min(s.min, x);
        s.max = std::max(s.max, x);
    }
    s.mean = sum / static_cast<double>(v.size());
    for (double x : v) s.max_deviation = std::max(s.max_deviation, std::abs(x - s.mean));
    return s;
}

/// Samples with t in [t0, t1): a window ending at a schedule step excludes the step instant.
inline std::vector<Sample> window_samples(const TimeSeries& ts, const MetricWindow& w) {
    std::vector<Sample> out;
    for (const auto& s : ts.samples)
        if (s.t >= w.t0 && s.t < w.t1) out.push_back(s);
    if (out.empty()) throw DomainError("metrics: window '" + w.label + "' contains no samples");
    return out;
}

struct WindowSummary {
    std::string label;
    SignalStats cp, pf, p_error, p_rel_error, speed_error, beta, p, q;
};

inline WindowSummary summarize(const TimeSeries& ts, const MetricWindow& w) {
    const auto samples = window_samples(ts, w);
    std::vector<double> cp, pf, pe, pre, se, beta, p, q;
    for (const auto& s : samples) {
        cp.push_back(s.cp);
        pf.push_back(s.pf);
        pe.push_back(std::abs(s.p - s.p_d));
        pre.push_back(s.p_d != 0 ? std::abs(s.p - s.p_d) / std::abs(s.p_d) : std::numeric_limits<double>::infinity());
        se.push_back(std::abs(s.omega_r - s.omega_rd));
        beta.push_back(s.beta);
        p.push_back(s.p);
        q.push_back(s.q);
    }
    return {w.label, signal_stats(cp), signal_stats(pf), signal_stats(pe), signal_stats(pre),
            signal_stats(se), signal_stats(beta), signal_stats(p), signal_stats(q)};
}

inline std::vector<WindowSummary> metrics(const TimeSeries& ts, const std::vector<MetricWindow>& windows) {
    std::vector<WindowSummary> out;
    for (const auto& w : windows) out.push_back(summarize(ts, w));
    return out;
}

/// First time >= t_from after which |signal - target| <= band for every later sample;
/// nullopt if the signal never settles.
inline std::optional<double> settling_time(const TimeSeries& ts, std::size_t column, double target, double band,
                                           double t_from = 0.0) {
    std::optional<double> settled;
    for (const auto& s : ts.samples) {
        if (s.t < t_from) continue;
        const double v = s.values()[column];
        if (std::abs(v - target) <= band) {
            if (!settled) settled = s.t;
        } else {
            settled.reset();
        }
    }
    return settled;
}

}  // namespace dfig
