// Command-line front end: run scenarios, write CSV/SVG, and expose the analysis oracles.
//
// Exit codes: 0 ok, 1 configuration or usage error, 2 simulation abort, 3 I/O error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "dfig/dfig.hpp"

namespace fs = std::filesystem;

namespace {

enum ExitCode { kOk = 0, kConfig = 1, kAbort = 2, kIo = 3 };

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << content;
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

/// Writes to `path`, or stdout when it is empty or "-".
void emit(const std::string& path, const std::string& content) {
    if (path.empty() || path == "-") {
        std::cout << content;
        return;
    }
    write_file(path, content);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

// Companion traces drawn together with a signal.
const std::map<std::string, std::vector<std::string>> kCompanions{
    {"p", {"p_d"}}, {"q", {"q_d"}}, {"omega_r", {"omega_rd"}}, {"v_w_true", {"v_w_meas"}}, {"pf", {}}};

std::string chart_for(const dfig::TimeSeries& ts, const std::string& name, const std::string& title) {
    const auto idx = dfig::column_index(name);
    if (!idx || name == "t") throw dfig::ConfigError("svg", "unknown signal '" + name + "'");
    dfig::SvgChart c;
    c.title = title + ": " + name;
    c.x_label = "t (s)";
    c.y_label = name;
    c.x = ts.column(0);
    c.series.push_back({name, ts.column(*idx)});
    if (auto it = kCompanions.find(name); it != kCompanions.end())
        for (const auto& extra : it->second) c.series.push_back({extra, ts.column(*dfig::column_index(extra))});
    return dfig::render_svg(c);
}

void print_summary(const dfig::ScenarioSpec& spec, const dfig::RunResult& r) {
    std::printf("scenario %s: %.0f s, %zu samples, %zu integration steps\n", spec.name.c_str(), spec.duration,
                r.series.samples.size(), r.diagnostics.steps);
    const auto& last = r.series.samples.back();
    std::printf("final: omega_r=%.6f omega_rd=%.6f beta=%.4f deg theta=%.6f P=%.6f Q=%.6f PF=%.6f Cp=%.6f\n",
                last.omega_r, last.omega_rd, last.beta, last.theta, last.p, last.q, last.pf, last.cp);
    if (spec.windows.empty()) return;
    std::printf("%-16s %9s %9s %9s %9s %9s %11s %9s\n", "window", "t0", "t1", "Cp mean", "Cp dev", "PF mean", "|P-Pd| max",
                "beta max");
    for (const auto& w : spec.windows) {
        const auto s = dfig::summarize(r.series, w);
        std::printf("%-16s %9.1f %9.1f %9.5f %9.5f %9.5f %11.6f %9.4f\n", w.label.c_str(), w.t0, w.t1, s.cp.mean,
                    s.cp.max_deviation, s.pf.mean, s.p_error.max, s.beta.max);
    }
}

struct SimulateOptions {
    std::string scenario;
    std::string config;
    std::string out = ".";
    std::string svg;
    std::size_t decimate = 1;
    bool paper_scale = false;
    bool no_csv = false;
    std::optional<std::uint64_t> seed;
};

int cmd_simulate(const SimulateOptions& o) {
    dfig::ScenarioSpec spec;
    if (!o.config.empty()) {
        const fs::path path(o.config);
        spec = dfig::scenario_from_json_text(read_file(o.config), path.parent_path().string());
    } else {
        spec = dfig::builtin_scenario(o.scenario, o.paper_scale);
    }
    if (o.seed)
        spec.seed = *o.seed;
    else if (auto env = dfig::seed_from_environment())
        spec.seed = *env;
    if (o.decimate < 1) throw dfig::ConfigError("decimate", "must be >= 1");
    const auto signals = split_list(o.svg);
    for (const auto& s : signals)
        if (!dfig::column_index(s) || s == "t") throw dfig::ConfigError("svg", "unknown signal '" + s + "'");
    dfig::validate(spec);

    const auto result = dfig::run_closed_loop(spec);

    // Render everything before touching the filesystem so failures leave no partial output.
    std::vector<std::pair<fs::path, std::string>> files;
    const fs::path dir(o.out);
    if (!o.no_csv) {
        std::ostringstream csv;
        dfig::write_timeseries_csv(csv, result.series, o.decimate);
        files.emplace_back(dir / (spec.name + "_timeseries.csv"), csv.str());
    }
    for (const auto& s : signals) files.emplace_back(dir / (spec.name + "_" + s + ".svg"), chart_for(result.series, s, spec.name));

    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
    for (const auto& [path, content] : files) write_file(path, content);

    print_summary(spec, result);
    for (const auto& [path, content] : files) std::printf("wrote %s\n", path.string().c_str());
    return kOk;
}

std::string format_complex(std::complex<double> z) {
    std::ostringstream s;
    s.precision(10);
    s << z.real();
    if (z.imag() != 0.0) s << (z.imag() < 0 ? " - " : " + ") << std::abs(z.imag()) << "i";
    return s.str();
}

int cmd_place(const std::string& poles) {
    const auto desired = dfig::parse_spectrum(poles);
    const dfig::MachineParams mp;
    const auto k = dfig::place_poles(dfig::state_matrix(mp), dfig::rotor_input_map(), desired);
    const auto eig = dfig::eig4(dfig::state_matrix(mp) - dfig::rotor_input_map() * k);
    std::printf("K =\n");
    for (std::size_t i = 0; i < 2; ++i)
        std::printf("  [%.10g, %.10g, %.10g, %.10g]\n", k(i, 0), k(i, 1), k(i, 2), k(i, 3));
    std::printf("eig(A - BK) =\n");
    for (const auto& z : eig.values) std::printf("  %s\n", format_complex(z).c_str());
    std::printf("max distance to request: %.3e\n", dfig::spectrum_distance(eig.values, desired));
    return kOk;
}

int cmd_hessian_check(int trials, std::uint64_t seed, double spread) {
    if (trials < 1) throw dfig::ConfigError("trials", "must be >= 1");
    if (!(spread >= 0 && spread < 1)) throw dfig::ConfigError("spread", "must be in [0, 1)");
    const auto r = dfig::hessian_sweep(trials, seed, spread);
    std::printf("trials: %d\n", r.trials);
    std::printf("positive definite: %d/%d\n", r.positive_definite, r.trials);
    std::printf("min q1: %.6e\n", r.min_q1);
    std::printf("min q1*q3 - q2^2: %.6e\n", r.min_det);
    std::printf("min (q1*q3 - q2^2)/(q1*q3): %.6e\n", r.min_rel_det);
    return kOk;
}

int cmd_critical_root(const std::vector<double>& betas, const std::vector<double>& vws, const std::string& out) {
    const auto design = dfig::make_design({});
    std::vector<std::vector<double>> rows;
    for (const auto& r : dfig::critical_root_table(betas, vws, design)) rows.push_back({r.beta, r.v_w, r.omega_r1});
    std::ostringstream csv;
    dfig::write_csv(csv, {"beta_deg", "v_w_pu", "omega_r1_pu"}, rows);
    emit(out, csv.str());
    return kOk;
}

int cmd_cp_contour(double lambda_step, double beta_step, const std::string& out) {
    std::vector<std::vector<double>> rows;
    for (const auto& r : dfig::cp_contour(lambda_step, beta_step))
        rows.push_back({r.lambda, r.beta, r.cp_nominal, r.cp_actual});
    std::ostringstream csv;
    dfig::write_csv(csv, {"lambda", "beta_deg", "cp_nominal", "cp_actual"}, rows);
    emit(out, csv.str());
    return kOk;
}

int cmd_grid_min(double vw, double pd, double qd, double omega_step, double beta_step) {
    const auto design = dfig::make_design({});
    dfig::GridOptions opt;
    opt.omega_step = omega_step;
    opt.beta_step = beta_step;
    const dfig::Exogenous e{vw, pd, qd};
    const auto m = dfig::grid_minimize(e, design, opt);
    const auto op = dfig::operating_point({m.omega_rd, m.theta, m.beta}, e, design);
    std::printf("omega_rd: %.8f\n", m.omega_rd);
    std::printf("theta: %.8f\n", m.theta);
    std::printf("beta: %.6f\n", m.beta);
    std::printf("f: %.10e\n", m.f);
    std::printf("P: %.8f\nQ: %.8f\nPF: %.8f\n", op.powers.p, op.powers.q, op.powers.pf);
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"DFIG wind turbine: closed-loop simulation and controller analysis"};
    app.require_subcommand(1);

    SimulateOptions sim;
    std::uint64_t seed_value = 0;
    auto* simulate = app.add_subcommand("simulate", "Run a built-in or configured scenario");
    auto* scen = simulate->add_option("--scenario", sim.scenario, "Built-in scenario (scenario1..scenario4)");
    auto* conf = simulate->add_option("--config", sim.config, "Scenario JSON document");
    scen->excludes(conf);
    simulate->add_option("--out", sim.out, "Output directory")->capture_default_str();
    simulate->add_option("--svg", sim.svg, "Comma-separated signals to plot, e.g. p,cp,pf");
    simulate->add_option("--decimate", sim.decimate, "Keep every N-th sample in the CSV")->capture_default_str();
    simulate->add_flag("--paper-scale", sim.paper_scale, "3600 s horizon for built-in scenarios")->needs(scen);
    simulate->add_flag("--no-csv", sim.no_csv, "Skip the time-series CSV");
    auto* seed_opt = simulate->add_option("--seed", seed_value, "Seed (overrides DFIG_SEED and the config)");

    auto* analyze = app.add_subcommand("analyze", "Verification analyses");
    analyze->require_subcommand(1);

    int trials = 200;
    std::uint64_t hseed = 1;
    double spread = 0.5;
    auto* hess = analyze->add_subcommand("hessian-check", "Random-gain sweep of the torque Hessian leading minors");
    hess->add_option("--trials", trials)->capture_default_str();
    hess->add_option("--seed", hseed)->capture_default_str();
    hess->add_option("--spread", spread, "Relative machine-parameter perturbation")->capture_default_str();

    std::vector<double> betas{0, 5, 10}, vws{0.6, 0.8, 1.0};
    std::string cr_out;
    auto* crit = analyze->add_subcommand("critical-root", "First root of g over a (beta, v_w) grid, as CSV");
    crit->add_option("--beta-grid", betas, "Pitch angles (deg)")->delimiter(',')->capture_default_str();
    crit->add_option("--vw-grid", vws, "Wind speeds (pu)")->delimiter(',')->capture_default_str();
    crit->add_option("--out", cr_out, "CSV path (default stdout)");

    double lambda_step = 0.1, beta_step = 0.5;
    std::string cp_out;
    auto* contour = analyze->add_subcommand("cp-contour", "Nominal and degraded Cp over lambda in [2,15], beta in [0,15]");
    contour->add_option("--lambda-step", lambda_step)->capture_default_str();
    contour->add_option("--beta-step", beta_step)->capture_default_str();
    contour->add_option("--out", cp_out, "CSV path (default stdout)");

    std::string poles = "-15,-5,-10+5i,-10-5i";
    auto* place = analyze->add_subcommand("place", "Pole placement for the default machine");
    place->add_option("--poles", poles, "Four poles, e.g. -15,-5,-10+5i,-10-5i")->capture_default_str();

    double vw = 1.0, pd = 0.9, qd = 0.09, gm_omega_step = 0.01, gm_beta_step = 1.0;
    auto* gmin = analyze->add_subcommand("grid-min", "Brute-force minimizer of the composite objective");
    gmin->add_option("--vw", vw, "Wind speed (pu)")->capture_default_str();
    gmin->add_option("--pd", pd, "Active power demand (pu)")->capture_default_str();
    gmin->add_option("--qd", qd, "Reactive power demand (pu)")->capture_default_str();
    gmin->add_option("--omega-step", gm_omega_step)->capture_default_str();
    gmin->add_option("--beta-step", gm_beta_step)->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfig;
    }

    try {
        if (*simulate) {
            if (sim.scenario.empty() && sim.config.empty())
                throw dfig::ConfigError("scenario", "one of --scenario or --config is required");
            if (*seed_opt) sim.seed = seed_value;
            return cmd_simulate(sim);
        }
        if (*hess) return cmd_hessian_check(trials, hseed, spread);
        if (*crit) return cmd_critical_root(betas, vws, cr_out);
        if (*contour) return cmd_cp_contour(lambda_step, beta_step, cp_out);
        if (*place) return cmd_place(poles);
        if (*gmin) return cmd_grid_min(vw, pd, qd, gm_omega_step, gm_beta_step);
    } catch (const dfig::SimulationAbort& e) {
        std::fprintf(stderr, "simulation aborted (t=%.6f s): %s\n", e.time(), e.what());
        return kAbort;
    } catch (const dfig::ConfigError& e) {
        std::fprintf(stderr, "configuration error: %s\n", e.what());
        return kConfig;
    } catch (const IoError& e) {
        std::fprintf(stderr, "I/O error: %s\n", e.what());
        return kIo;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kConfig;
    }
    return kOk;
}
