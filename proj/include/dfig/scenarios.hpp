#pragma once

// Built-in scenarios. Desk scale runs 600 s; paper scale stretches every time constant of
// the schedule (segment boundaries, wind periods) by 6 to a 3600 s horizon.

#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dfig/errors.hpp"
#include "dfig/plant.hpp"
#include "dfig/sim.hpp"

namespace dfig {

inline constexpr double kDeskDuration = 600.0;
inline constexpr double kPaperDuration = 3600.0;

/// Demands used by the scenarios, in pu of the 1.6667 MVA base.
inline constexpr double kMptActiveDemand = 0.9;      // above anything the turbine can deliver
inline constexpr double kMptReactiveDemand = 0.09;
inline constexpr double kDemandPowerFactor = 0.995;

namespace detail {

inline double time_scale(bool paper_scale) { return paper_scale ? kPaperDuration / kDeskDuration : 1.0; }

/// Three equal segments; windows cover the last quarter of each.
inline std::vector<MetricWindow> segment_windows(double duration, const std::vector<std::string>& labels) {
    std::vector<MetricWindow> w;
    const double seg = duration / static_cast<double>(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const double end = seg * static_cast<double>(i + 1);
        w.push_back({labels[i], end - 0.25 * seg, end});
    }
    return w;
}

inline ScenarioSpec base_scenario(std::string name, bool paper_scale) {
    ScenarioSpec s;
    s.name = std::move(name);
    s.duration = kDeskDuration * time_scale(paper_scale);
    return s;
}

}  // namespace detail

/// Maximum-power tracking through wind steps 1.0 -> 0.6 -> 1.0 pu.
inline ScenarioSpec scenario1(bool paper_scale = false) {
    auto s = detail::base_scenario("scenario1", paper_scale);
    const double seg = s.duration / 3.0;
    s.wind = StepSchedule{{{0.0, 1.0}, {seg, 0.6}, {2.0 * seg, 1.0}}};
    s.demand = DemandSchedule{{{0.0, kMptActiveDemand, kMptReactiveDemand}}};
    s.windows = detail::segment_windows(s.duration, {"wind 1.0", "wind 0.6", "wind 1.0 again"});
    return s;
}

/// Power regulation at constant wind: active demand 0.45 -> 0.3 -> 0.6 MW at PF 0.995.
inline ScenarioSpec scenario2(bool paper_scale = false) {
    auto s = detail::base_scenario("scenario2", paper_scale);
    const double seg = s.duration / 3.0;
    s.wind = StepSchedule{{{0.0, 1.0}}};
    const double base = s.belief.aero.p_elec_base;
    auto step = [base](double t, double p_mw) {
        const double p = p_mw * 1e6 / base;
        return DemandStep{t, p, DemandSchedule::q_for_power_factor(p, kDemandPowerFactor)};
    };
    s.demand = DemandSchedule{{step(0.0, 0.45), step(seg, 0.3), step(2.0 * seg, 0.6)}};
    s.windows = detail::segment_windows(s.duration, {"P_d 0.27", "P_d 0.18", "P_d 0.36"});
    return s;
}

/// Synthetic gusty wind standing in for measured data: mean 1.0 pu, three sinusoids, light
/// seeded turbulence, clamped to [0.6, 1.15] pu. The tracking segments stay below the speed
/// at which 0.9 pu becomes reachable; the regulation segment opens with strong wind and ends
/// in a lull too weak to sustain the demand.
inline SyntheticWind scenario3_wind(bool paper_scale = false) {
    const double k = detail::time_scale(paper_scale);
    const double two_pi = 2.0 * std::numbers::pi;
    SyntheticWind w;
    w.mean = 1.0;
    w.components = {{0.0786, two_pi / (168.5 * k), 4.329},
                    {0.1382, two_pi / (284.7 * k), 2.908},
                    {0.1495, two_pi / (1260.0 * k), 2.210}};
    w.turbulence_intensity = 0.01;
    w.turbulence_cutoff = 0.05 / k;
    w.v_min = 0.6;
    w.v_max = 1.15;
    return w;
}

/// Maximum-power tracking, power regulation at half demand, then tracking again.
inline ScenarioSpec scenario3(bool paper_scale = false) {
    auto s = detail::base_scenario("scenario3", paper_scale);
    const double seg = s.duration / 3.0;
    s.wind = scenario3_wind(paper_scale);
    const double p_pr = 0.5 * kMptActiveDemand;
    s.demand = DemandSchedule{{{0.0, kMptActiveDemand, kMptReactiveDemand},
                               {seg, p_pr, DemandSchedule::q_for_power_factor(p_pr, kDemandPowerFactor)},
                               {2.0 * seg, kMptActiveDemand, kMptReactiveDemand}}};
    s.windows = detail::segment_windows(s.duration, {"MPT", "PR", "MPT again"});
    return s;
}

/// Scenario 3 with model error: actual Cp surface degraded, friction 20% above belief, and a
/// biased oscillating anemometer (bias and amplitudes in m/s).
inline ScenarioSpec scenario4(bool paper_scale = false) {
    auto s = scenario3(paper_scale);
    s.name = "scenario4";
    s.plant.aero.cp = kDegradedCp;
    s.plant.drive.c_f = 0.012;
    s.noise.bias = 0.5;
    s.noise.terms = {{0.5, 0.5, 0.0, NoiseKind::sin}, {0.25, 1.0, 0.0, NoiseKind::cos}};
    s.noise.units_to_pu = 1.0 / s.belief.aero.v_w_base;
    return s;
}

inline constexpr std::string_view kScenarioNames[] = {"scenario1", "scenario2", "scenario3", "scenario4"};

inline ScenarioSpec builtin_scenario(std::string_view name, bool paper_scale = false) {
    if (name == "scenario1") return scenario1(paper_scale);
    if (name == "scenario2") return scenario2(paper_scale);
    if (name == "scenario3") return scenario3(paper_scale);
    if (name == "scenario4") return scenario4(paper_scale);
    throw ConfigError("scenario", "unknown built-in scenario '" + std::string(name) + "'");
}

}  // namespace dfig
