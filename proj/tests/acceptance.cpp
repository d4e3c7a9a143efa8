// Acceptance checks. `acceptance` runs every criterion; `acceptance N` runs one. Each prints
// a single "criterion N: PASS|FAIL ..." line; the exit status is nonzero if any failed.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "dfig/dfig.hpp"

using namespace dfig;

namespace {

struct Verdict {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

const ControllerDesign& nominal_design() {
    static const ControllerDesign d = make_design(TurbineParams{});
    return d;
}

Verdict criterion1() {
    const auto t0 = std::chrono::steady_clock::now();
    const MachineParams mp;
    const auto eig = eig4(state_matrix(mp) - rotor_input_map() * kPublishedGain);
    const double dist = eig.converged ? spectrum_distance(eig.values, kDefaultElectricalPoles)
                                      : std::numeric_limits<double>::infinity();
    const double rt = seconds_since(t0);
    std::ostringstream eigs;
    for (const auto& z : eig.values) eigs << ' ' << fmt("%.4f%+.4fj", z.real(), z.imag());
    return {dist <= 1e-4 && rt < 1.0,
            fmt("published gain: max eigenvalue error %.3e (limit 1e-4), runtime %.3f s; eig =", dist, rt) + eigs.str()};
}

Verdict criterion2() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto r = hessian_sweep(200, 20240601, 0.5);
    const double rt = seconds_since(t0);
    return {r.positive_definite == 200 && rt < 10.0,
            fmt("%d/%d positive definite, min q1 %.3e, min det %.3e, runtime %.3f s", r.positive_definite, r.trials,
                r.min_q1, r.min_det, rt)};
}

// a0 - b^T Q^{-1} b / 4, evaluated from the quadratic's coefficients.
double composite_a_prime(const SynthesizedGains& g) {
    const double det = g.q1 * g.q3 - g.q2 * g.q2;
    const double qb1 = (g.q3 * g.b1 - g.q2 * g.b2) / det;
    const double qb2 = (-g.q2 * g.b1 + g.q1 * g.b2) / det;
    return g.a0 - 0.25 * (g.b1 * qb1 + g.b2 * qb2);
}

Verdict criterion3() {
    const MachineParams mp;
    const double closed = a_prime_closed_form(mp);
    double worst = std::abs(composite_a_prime(nominal_design().gains) - closed) / std::abs(closed);
    Rng rng(33);
    for (int i = 0; i < 50; ++i) {
        const auto g = synthesize(mp, random_stabilizing_gain(mp, rng));
        worst = std::max(worst, std::abs(composite_a_prime(g) - closed) / std::abs(closed));
    }
    const bool value_ok = std::abs(closed - (-35.4108)) <= 5e-5;
    return {worst <= 1e-9 && value_ok,
            fmt("closed form %.6f (expected -35.4108), max relative deviation over 51 gains %.3e (limit 1e-9)", closed,
                worst)};
}

Verdict criterion4() {
    const auto& g = nominal_design().gains;
    const MachineParams& mp = g.machine;
    Rng rng(44);
    double worst = 0;
    for (int i = 0; i < 1000; ++i) {
        const double r = rng.uniform(0.0, 10.0), th = rng.uniform(0.0, 2.0 * std::numbers::pi);
        const Vec2 u = u_from_polar(r, th, g);
        const FluxVector x = equilibrium_fluxes(u, g);
        const double ref = r * r + g.a_prime;
        const double scale = std::max({std::abs(ref), std::abs(g.a_prime), 1.0});
        for (double v : {electromagnetic_torque(x, mp), electromagnetic_torque_quadratic(x, mp), torque_from_inputs(u, g)})
            worst = std::max(worst, std::abs(v - ref) / scale);
    }
    return {worst < 1e-9, fmt("1000 random (r, theta): max relative torque mismatch %.3e (limit 1e-9)", worst)};
}

Verdict criterion5() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto& c = nominal_design();
    const double horizon = 10.0 * c.belief.drive.j / c.gradient.alpha;
    Rng rng(55);
    double worst_err = 0, worst_increase = 0;
    for (int i = 0; i < 10; ++i) {
        const double w0 = rng.uniform(0.3, 1.5), wd = rng.uniform(0.6, 1.2);
        const double beta = rng.uniform(0.0, 10.0), vw = rng.uniform(0.6, 1.1);
        const auto r = run_reduced_model(w0, wd, beta, vw, c, horizon);
        worst_err = std::max(worst_err, r.final_error);
        worst_increase = std::max(worst_increase, r.max_lyapunov_increase);
    }
    const double rt = seconds_since(t0);
    return {worst_err < 1e-4 && worst_increase <= 0.0 && rt < 5.0,
            fmt("10 runs to T = %.3f s: max |omega_r - omega_rd| %.3e (limit 1e-4), max Lyapunov increase %.3e, "
                "runtime %.3f s",
                horizon, worst_err, worst_increase, rt)};
}

Verdict criterion6() {
    const auto& c = nominal_design();
    const double base = critical_root(0.0, 1.0, c);
    const double r06 = critical_root(0.0, 0.6, c), r08 = critical_root(0.0, 0.8, c);
    const bool increasing = r06 < r08 && r08 < base;
    double spread = 0;
    for (double v : {0.6, 0.8, 1.0}) {
        std::vector<double> roots;
        for (double b : {0.0, 5.0, 10.0}) roots.push_back(critical_root(b, v, c));
        const auto [lo, hi] = std::minmax_element(roots.begin(), roots.end());
        spread = std::max(spread, (*hi - *lo) / *hi);
    }
    return {base > 3500.0 && increasing && spread < 0.2,
            fmt("root(0 deg, 1 pu) = %.2f; at 0.6/0.8/1.0 pu: %.2f/%.2f/%.2f (%s); beta spread %.3e (limit 0.2)", base,
                r06, r08, base, increasing ? "increasing" : "NOT increasing", spread)};
}

Verdict criterion7() {
    const double nominal = performance_coefficient(8.1, 0.0, CpCoefficients{});
    const auto peak = cp_peak(kDegradedCp, 0.0);
    const bool ok = std::abs(nominal - 0.48) <= 0.001 && std::abs(peak.cp - 0.39) <= 0.005 &&
                    std::abs(peak.lambda - 8.45) <= 0.1;
    return {ok, fmt("nominal Cp(8.1, 0) = %.5f; degraded peak Cp %.5f at lambda %.4f", nominal, peak.cp, peak.lambda)};
}

struct Range {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    std::size_t n = 0;
    void add(double v) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
        ++n;
    }
    [[nodiscard]] bool within(double target, double tol) const { return n > 0 && lo >= target - tol && hi <= target + tol; }
};

Verdict criterion8() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto spec = scenario1();
    const auto run = run_closed_loop(spec);
    const double rt = seconds_since(t0);
    bool ok = rt < 120.0;
    std::string detail;
    for (const auto& w : spec.windows) {
        Range cp, pf, beta;
        for (const auto& s : window_samples(run.series, w)) {
            cp.add(s.cp);
            pf.add(s.pf);
            beta.add(s.beta);
        }
        const bool seg_ok = cp.within(0.48, 0.005) && pf.within(0.995, 0.005) && beta.within(0.0, 0.1);
        ok = ok && seg_ok;
        detail += fmt("[%s: Cp %.4f..%.4f, PF %.4f..%.4f, beta %.3f..%.3f] ", w.label.c_str(), cp.lo, cp.hi, pf.lo,
                      pf.hi, beta.lo, beta.hi);
    }
    return {ok, detail + fmt("runtime %.2f s", rt)};
}

Verdict criterion9() {
    const auto spec = scenario2();
    const auto run = run_closed_loop(spec);
    bool ok = true;
    std::string detail;
    for (const auto& w : spec.windows) {
        Range rel, pf, cp;
        for (const auto& s : window_samples(run.series, w)) {
            rel.add(std::abs(s.p - s.p_d) / s.p_d);
            pf.add(s.pf);
            cp.add(s.cp);
        }
        const bool seg_ok = rel.hi < 0.01 && pf.within(0.995, 0.005) && cp.hi < 0.48;
        ok = ok && seg_ok;
        detail += fmt("[%s: |P-Pd|/Pd max %.2e, PF %.4f..%.4f, Cp max %.4f] ", w.label.c_str(), rel.hi, pf.lo, pf.hi,
                      cp.hi);
    }
    return {ok, detail};
}

// Electrical power the wind can sustain at the nominal Cp peak: rotor at lambda_nom, less friction.
double available_power(double v_w, const TurbineParams& p) {
    const double omega = p.aero.lambda_nom * v_w / 8.1;
    return mechanical_power_pu(p.aero.cp_nom, v_w, p.aero) - p.drive.c_f * omega * omega;
}

struct Segments {
    double seg = 0;
    [[nodiscard]] int index(double t) const { return std::min(2, static_cast<int>(std::floor(t / seg))); }
    // Steady part of the segment: the first 10% after each switch is excluded.
    [[nodiscard]] bool settled(double t) const { return t - index(t) * seg >= 0.1 * seg; }
};

// Largest change of each setpoint state across the interval containing a mode switch, relative
// to the largest change over the ten intervals on either side.
double switch_jump_ratio(const TimeSeries& ts, double t_switch) {
    const auto& s = ts.samples;
    std::size_t k = 0;
    while (k < s.size() && s[k].t < t_switch) ++k;
    if (k == 0 || k + 10 >= s.size() || k < 11) return std::numeric_limits<double>::infinity();
    auto jump = [&](std::size_t i) {
        const double dth = std::remainder(s[i].theta - s[i - 1].theta, 2.0 * std::numbers::pi);
        return std::array<double, 3>{std::abs(s[i].omega_rd - s[i - 1].omega_rd), std::abs(dth),
                                     std::abs(s[i].beta - s[i - 1].beta)};
    };
    double ratio = 0;
    const auto at = jump(k);
    for (std::size_t c = 0; c < 3; ++c) {
        double around = 0;
        for (std::size_t i = k - 10; i <= k + 10; ++i)
            if (i != k) around = std::max(around, jump(i)[c]);
        ratio = std::max(ratio, at[c] / std::max(around, 1e-12));
    }
    return ratio;
}

Verdict criterion10() {
    const auto spec = scenario3(true);
    const auto run = run_closed_loop(spec);
    const Segments seg{spec.duration / 3.0};
    const double hold = 120.0;
    const auto& ts = run.series.samples;

    Range mpt_cp, pr_err, rev_cp;
    double rich_since = -1, poor_since = -1;
    for (const auto& s : ts) {
        const int k = seg.index(s.t);
        const double pa = available_power(s.v_w_true, spec.plant);
        if (k == 1) {
            if (pa > 1.05 * s.p_d) {
                if (rich_since < 0) rich_since = s.t;
            } else {
                rich_since = -1;
            }
            if (pa < 0.95 * s.p_d) {
                if (poor_since < 0) poor_since = s.t;
            } else {
                poor_since = -1;
            }
        }
        if (!seg.settled(s.t)) continue;
        if (k != 1) {
            mpt_cp.add(s.cp);
        } else {
            if (rich_since >= 0 && s.t - rich_since >= hold) pr_err.add(std::abs(s.p - s.p_d) / s.p_d);
            if (poor_since >= 0 && s.t - poor_since >= hold) rev_cp.add(s.cp);
        }
    }
    const double jump = std::max(switch_jump_ratio(run.series, seg.seg), switch_jump_ratio(run.series, 2 * seg.seg));
    const bool ok = mpt_cp.within(0.48, 0.01) && pr_err.n > 0 && pr_err.hi < 0.02 && rev_cp.n > 0 &&
                    rev_cp.within(0.48, 0.01) && jump <= 2.0;
    return {ok, fmt("MPT Cp %.4f..%.4f (%zu samples); PR with surplus wind: |P-Pd|/Pd max %.3e (%zu samples); "
                    "PR with deficit: Cp %.4f..%.4f (%zu samples); switch jump ratio %.2f (limit 2)",
                    mpt_cp.lo, mpt_cp.hi, mpt_cp.n, pr_err.hi, pr_err.n, rev_cp.lo, rev_cp.hi, rev_cp.n, jump)};
}

Verdict criterion11() {
    const auto spec = scenario4(true);
    RunResult run;
    try {
        run = run_closed_loop(spec);
    } catch (const SimulationAbort& e) {
        return {false, std::string("run aborted: ") + e.what()};
    }
    const Segments seg{spec.duration / 3.0};
    const double ceiling = critical_root(spec.belief.aero.beta_min, 1.15, make_design(spec.belief));
    Range cp, pf, omega;
    bool finite = true;
    for (const auto& s : run.series.samples) {
        for (double v : s.values()) finite = finite && std::isfinite(v);
        omega.add(s.omega_r);
        if (!seg.settled(s.t)) continue;
        pf.add(s.pf);
        if (seg.index(s.t) != 1) cp.add(s.cp);
    }
    const bool bounded = finite && omega.lo > 0 && omega.hi < ceiling;
    const bool ok = bounded && cp.within(0.39, 0.01) && pf.within(0.995, 0.02);
    return {ok, fmt("bounded: %s (omega_r %.4f..%.4f); MPT Cp %.4f..%.4f; PF %.4f..%.4f", bounded ? "yes" : "no",
                    omega.lo, omega.hi, cp.lo, cp.hi, pf.lo, pf.hi)};
}

Verdict criterion12() {
    const auto& c = nominal_design();
    Rng rng(1212);
    double w_err = 0, b_err = 0, f_err = 0;
    for (int i = 0; i < 10; ++i) {
        const double v = rng.uniform(0.6, 1.1);
        const double p_d = rng.uniform(0.85, 1.0);
        const double pf = rng.uniform(0.97, 1.0);
        const Exogenous e{v, p_d, DemandSchedule::q_for_power_factor(p_d, pf)};
        const auto grid = grid_minimize(e, c, GridOptions{0.3, 1.5, 0.01, 0.5, 360});
        ControllerState start{grid.omega_rd * rng.uniform(0.9, 1.1), 0.0, rng.uniform(0.0, 2.0)};
        start.theta = minimize_theta(start.omega_rd, start.beta, e, c);
        const auto flow = integrate_gradient_flow(start, e, c, 0.02, 6000.0, 1e-9);
        w_err = std::max(w_err, std::abs(flow.state.omega_rd - grid.omega_rd) / grid.omega_rd);
        b_err = std::max(b_err, std::abs(flow.state.beta - grid.beta));
        f_err = std::max(f_err, std::abs(flow.f - grid.f));
    }
    return {w_err < 0.01 && b_err < 0.5 && f_err < 1e-4,
            fmt("10 settings: max omega_rd rel diff %.3e (limit 0.01), beta diff %.3e deg (limit 0.5), f diff %.3e "
                "(limit 1e-4)",
                w_err, b_err, f_err)};
}

Verdict criterion13() {
    auto coarse = scenario2();
    auto fine = coarse;
    fine.dt = coarse.dt / 2.0;
    const auto a = run_closed_loop(coarse), b = run_closed_loop(fine);
    auto state = [](const RunResult& r) {
        return std::array<double, 8>{r.final_plant.flux[0], r.final_plant.flux[1], r.final_plant.flux[2],
                                     r.final_plant.flux[3], r.final_plant.omega_r, r.final_controller.omega_rd,
                                     r.final_controller.theta, r.final_controller.beta};
    };
    const auto xa = state(a), xb = state(b);
    double diff = 0, scale = 0;
    for (std::size_t i = 0; i < 8; ++i) {
        diff = std::max(diff, std::abs(xa[i] - xb[i]));
        scale = std::max(scale, std::abs(xa[i]));
    }
    const double rel = diff / scale;
    return {rel < 1e-5, fmt("terminal state relative change %.3e (limit 1e-5), dt %.0e vs %.0e", rel, coarse.dt, fine.dt)};
}

const std::vector<std::function<Verdict()>> kCriteria{criterion1, criterion2,  criterion3,  criterion4, criterion5,
                                                      criterion6, criterion7,  criterion8,  criterion9, criterion10,
                                                      criterion11, criterion12, criterion13};

bool report(std::size_t id) {
    Verdict v;
    try {
        v = kCriteria[id - 1]();
    } catch (const std::exception& e) {
        v = {false, std::string("exception: ") + e.what()};
    }
    std::printf("criterion %zu: %s  %s\n", id, v.pass ? "PASS" : "FAIL", v.detail.c_str());
    std::fflush(stdout);
    return v.pass;
}

}  // namespace

int main(int argc, char** argv) {
    if (argc > 2) {
        std::fprintf(stderr, "usage: %s [criterion 1..%zu]\n", argv[0], kCriteria.size());
        return 2;
    }
    if (argc == 2) {
        char* end = nullptr;
        const long id = std::strtol(argv[1], &end, 10);
        if (*end != '\0' || id < 1 || id > static_cast<long>(kCriteria.size())) {
            std::fprintf(stderr, "unknown criterion '%s'\n", argv[1]);
            return 2;
        }
        return report(static_cast<std::size_t>(id)) ? 0 : 1;
    }
    bool all = true;
    for (std::size_t id = 1; id <= kCriteria.size(); ++id) all = report(id) && all;
    return all ? 0 : 1;
}
