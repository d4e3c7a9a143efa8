#pragma once

// JSON scenario documents. Strict: every object rejects keys it does not know, and numeric
// fields that carry units spell them in the key (`p_d_pu` or `p_d_mw`). Internally
// everything is per-unit.
//
// {
//   "schema_version": 1,
//   "base": "scenario1",            optional built-in to start from
//   "paper_scale": false,           only meaningful together with "base"
//   "name": "...", "duration_s", "dt_s", "controller_period_s", "sample_period_s", "seed",
//   "wind":   {"type": "steps", "steps": [{"t_s", "v_w_pu" | "v_w_mps"}]}
//           | {"type": "synthetic", "mean_pu", "components": [{"amplitude_pu", "frequency_rad_s", "phase_rad"}],
//              "turbulence_intensity_pu", "turbulence_cutoff_rad_s", "turbulence_modes", "v_min_pu", "v_max_pu"}
//           | {"type": "samples", "interpolation": "hold" | "linear", "units": "pu" | "mps",
//              "file": "wind.csv" | "samples": [{"t_s", "v_w"}]},
//   "demand": {"steps": [{"t_s", "p_d_pu" | "p_d_mw", "q_d_pu" | "q_d_mvar" | "pf"}]},
//   "plant" / "belief": {"machine": {...}, "aero": {..., "cp": {"c1".."c6"}}, "drive": {"j", "c_f"}},
//   "noise":  {"units": "pu" | "mps", "bias", "terms": [{"amplitude", "frequency_rad_s", "phase_rad", "kind"}]},
//   "controller": {"poles": ["-15", "-10+5i", ...], "gain": [[4], [4]],
//                  "weights": {"w_p", "w_q", "w_pq"}, "gradient": {"eps1", "eps2", "eps3", "alpha"}},
//   "initial": {"omega_r_pu", "omega_rd_pu", "theta_rad", "beta_deg", "flux_pu": [4]},
//   "windows": [{"label", "t0_s", "t1_s"}]
// }

#include <cctype>
#include <complex>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "dfig/csv.hpp"
#include "dfig/errors.hpp"
#include "dfig/scenarios.hpp"
#include "dfig/sim.hpp"

namespace dfig {

inline constexpr int kSchemaVersion = 1;

/// Parses "a", "a+bi", "a-bi", "bi" (also with 'j'); whitespace is ignored.
inline std::complex<double> parse_complex(std::string text) {
    std::string s;
    for (char c : text)
        if (!std::isspace(static_cast<unsigned char>(c))) s += c;
    if (s.empty()) throw ConfigError("poles", "empty complex number");
    auto num = [&](const std::string& part) {
        if (part.empty() || part == "+") return 1.0;
        if (part == "-") return -1.0;
        std::size_t used = 0;
        double v = 0;
        try {
            v = std::stod(part, &used);
        } catch (const std::exception&) {
            throw ConfigError("poles", "cannot parse '" + text + "'");
        }
        if (used != part.size()) throw ConfigError("poles", "cannot parse '" + text + "'");
        return v;
    };
    const char last = s.back();
    if (last != 'i' && last != 'j') return {num(s), 0.0};
    s.pop_back();
    // Split before the last sign that is not part of an exponent.
    std::size_t split = std::string::npos;
    for (std::size_t k = s.size(); k-- > 1;) {
        if ((s[k] == '+' || s[k] == '-') && s[k - 1] != 'e' && s[k - 1] != 'E') {
            split = k;
            break;
        }
    }
    if (split == std::string::npos) return {0.0, num(s)};
    return {num(s.substr(0, split)), num(s.substr(split))};
}

/// Comma-separated list of complex numbers.
inline ComplexSpectrum parse_spectrum(const std::string& list) {
    std::vector<std::complex<double>> v;
    std::size_t start = 0;
    for (;;) {
        const auto pos = list.find(',', start);
        v.push_back(parse_complex(list.substr(start, pos == std::string::npos ? std::string::npos : pos - start)));
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    if (v.size() != 4) throw ConfigError("poles", "exactly four poles are required");
    ComplexSpectrum s;
    std::copy(v.begin(), v.end(), s.begin());
    if (!is_conjugate_closed(s)) throw ConfigError("poles", "complex poles must come in conjugate pairs");
    return s;
}

namespace detail {

using json = nlohmann::json;

/// A JSON object being read: remembers its path for error messages and which keys were used.
class Reader {
public:
    Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "must be an object");
    }

    [[nodiscard]] std::string key(const std::string& k) const { return path_.empty() ? k : path_ + "." + k; }

    bool has(const std::string& k) const { return j_.contains(k); }

    const json& raw(const std::string& k) {
        if (!has(k)) throw ConfigError(key(k), "is required");
        used_.insert(k);
        return j_.at(k);
    }

    std::optional<double> number(const std::string& k) {
        if (!has(k)) return std::nullopt;
        const auto& v = raw(k);
        if (!v.is_number()) throw ConfigError(key(k), "must be a number");
        const double d = v.get<double>();
        if (!std::isfinite(d)) throw ConfigError(key(k), "must be finite");
        return d;
    }

    void number(const std::string& k, double& out) {
        if (auto v = number(k)) out = *v;
    }

    double required_number(const std::string& k) {
        auto v = number(k);
        if (!v) throw ConfigError(key(k), "is required");
        return *v;
    }

    std::optional<std::string> string(const std::string& k) {
        if (!has(k)) return std::nullopt;
        const auto& v = raw(k);
        if (!v.is_string()) throw ConfigError(key(k), "must be a string");
        return v.get<std::string>();
    }

    std::optional<bool> boolean(const std::string& k) {
        if (!has(k)) return std::nullopt;
        const auto& v = raw(k);
        if (!v.is_boolean()) throw ConfigError(key(k), "must be a boolean");
        return v.get<bool>();
    }

    const json& array(const std::string& k) {
        const auto& v = raw(k);
        if (!v.is_array()) throw ConfigError(key(k), "must be an array");
        return v;
    }

    Reader object(const std::string& k) { return Reader(raw(k), key(k)); }

    /// Exactly one of the alternatives must be present.
    std::string one_of(std::initializer_list<std::string> keys) {
        std::string found;
        for (const auto& k : keys) {
            if (has(k)) {
                if (!found.empty()) throw ConfigError(key(k), "conflicts with '" + found + "'");
                found = k;
            }
        }
        if (found.empty()) {
            std::string names;
            for (const auto& k : keys) names += (names.empty() ? "" : " | ") + k;
            throw ConfigError(key(names), "one of these keys is required");
        }
        return found;
    }

    /// Throws on the first key that was never read.
    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!used_.count(it.key())) throw ConfigError(key(it.key()), "unknown key");
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> used_;
};

inline std::string item_path(const std::string& base, std::size_t i) { return base + "[" + std::to_string(i) + "]"; }

inline void read_machine(Reader r, MachineParams& m) {
    r.number("r_s", m.r_s);
    r.number("r_r", m.r_r);
    r.number("l_s", m.l_s);
    r.number("l_r", m.l_r);
    r.number("l_m", m.l_m);
    r.number("omega_s", m.omega_s);
    r.number("v_ds", m.v_ds);
    r.number("v_qs", m.v_qs);
    r.number("time_base_scale", m.time_base_scale);
    r.finish();
}

inline void read_aero(Reader r, AeroParams& a) {
    if (r.has("cp")) {
        auto c = r.object("cp");
        c.number("c1", a.cp.c1);
        c.number("c2", a.cp.c2);
        c.number("c3", a.cp.c3);
        c.number("c4", a.cp.c4);
        c.number("c5", a.cp.c5);
        c.number("c6", a.cp.c6);
        c.finish();
    }
    r.number("beta_min_deg", a.beta_min);
    r.number("beta_max_deg", a.beta_max);
    r.number("lambda_nom", a.lambda_nom);
    r.number("cp_nom", a.cp_nom);
    r.number("p_wind_base_w", a.p_wind_base);
    r.number("p_elec_base_va", a.p_elec_base);
    r.number("p_nom", a.p_nom);
    r.number("v_w_base_mps", a.v_w_base);
    r.finish();
}

inline void read_turbine(Reader r, TurbineParams& t) {
    if (r.has("machine")) read_machine(r.object("machine"), t.machine);
    if (r.has("aero")) read_aero(r.object("aero"), t.aero);
    if (r.has("drive")) {
        auto d = r.object("drive");
        d.number("j", t.drive.j);
        d.number("c_f", t.drive.c_f);
        d.finish();
    }
    r.finish();
}

inline double units_factor(Reader& r, double v_w_base) {
    const auto units = r.string("units").value_or("pu");
    if (units == "pu") return 1.0;
    if (units == "mps") return 1.0 / v_w_base;
    throw ConfigError(r.key("units"), "must be 'pu' or 'mps'");
}

inline WindProfile read_wind(Reader r, double v_w_base, const std::string& base_dir) {
    const auto type = r.string("type");
    if (!type) throw ConfigError(r.key("type"), "is required");
    WindProfile out;
    if (*type == "steps") {
        StepSchedule s;
        const auto& arr = r.array("steps");
        for (std::size_t i = 0; i < arr.size(); ++i) {
            Reader e(arr[i], item_path(r.key("steps"), i));
            WindStep w;
            w.t_start = e.required_number("t_s");
            const auto k = e.one_of({"v_w_pu", "v_w_mps"});
            w.v_w = e.required_number(k) / (k == "v_w_mps" ? v_w_base : 1.0);
            e.finish();
            s.steps.push_back(w);
        }
        out = s;
    } else if (*type == "synthetic") {
        SyntheticWind s;
        r.number("mean_pu", s.mean);
        if (r.has("components")) {
            const auto& arr = r.array("components");
            for (std::size_t i = 0; i < arr.size(); ++i) {
                Reader e(arr[i], item_path(r.key("components"), i));
                Sinusoid c;
                c.amplitude = e.required_number("amplitude_pu");
                c.frequency = e.required_number("frequency_rad_s");
                e.number("phase_rad", c.phase);
                e.finish();
                s.components.push_back(c);
            }
        }
        r.number("turbulence_intensity_pu", s.turbulence_intensity);
        r.number("turbulence_cutoff_rad_s", s.turbulence_cutoff);
        if (auto m = r.number("turbulence_modes")) s.turbulence_modes = static_cast<int>(*m);
        r.number("v_min_pu", s.v_min);
        r.number("v_max_pu", s.v_max);
        out = s;
    } else if (*type == "samples") {
        const auto interp_name = r.string("interpolation").value_or("linear");
        Interpolation interp;
        if (interp_name == "linear")
            interp = Interpolation::linear;
        else if (interp_name == "hold")
            interp = Interpolation::hold;
        else
            throw ConfigError(r.key("interpolation"), "must be 'hold' or 'linear'");
        const double f = units_factor(r, v_w_base);
        const auto src = r.one_of({"file", "samples"});
        SampledWind s;
        if (src == "file") {
            std::string path = *r.string("file");
            if (!path.empty() && path.front() != '/' && !base_dir.empty()) path = base_dir + "/" + path;
            std::ifstream in(path);
            if (!in) throw ConfigError(r.key("file"), "cannot open '" + path + "'");
            try {
                s = read_wind_csv(in, interp, f == 1.0 ? 0.0 : v_w_base);
            } catch (const DomainError& e) {
                throw ConfigError(r.key("file"), e.what());
            }
        } else {
            s.interpolation = interp;
            const auto& arr = r.array("samples");
            for (std::size_t i = 0; i < arr.size(); ++i) {
                Reader e(arr[i], item_path(r.key("samples"), i));
                s.t.push_back(e.required_number("t_s"));
                s.v_w.push_back(e.required_number("v_w") * f);
                e.finish();
            }
        }
        out = s;
    } else {
        throw ConfigError(r.key("type"), "must be 'steps', 'synthetic' or 'samples'");
    }
    r.finish();
    return out;
}

inline DemandSchedule read_demand(Reader r, double p_base_va) {
    DemandSchedule d;
    const auto& arr = r.array("steps");
    for (std::size_t i = 0; i < arr.size(); ++i) {
        Reader e(arr[i], item_path(r.key("steps"), i));
        DemandStep s;
        s.t_start = e.required_number("t_s");
        const auto pk = e.one_of({"p_d_pu", "p_d_mw"});
        s.p_d = e.required_number(pk) * (pk == "p_d_mw" ? 1e6 / p_base_va : 1.0);
        const auto qk = e.one_of({"q_d_pu", "q_d_mvar", "pf"});
        if (qk == "pf") {
            const double pf = e.required_number("pf");
            if (!(pf > 0 && pf <= 1)) throw ConfigError(e.key("pf"), "must be in (0, 1]");
            s.q_d = DemandSchedule::q_for_power_factor(s.p_d, pf);
        } else {
            s.q_d = e.required_number(qk) * (qk == "q_d_mvar" ? 1e6 / p_base_va : 1.0);
        }
        e.finish();
        d.steps.push_back(s);
    }
    r.finish();
    return d;
}

inline NoiseSpec read_noise(Reader r, double v_w_base) {
    NoiseSpec n;
    n.units_to_pu = units_factor(r, v_w_base);
    r.number("bias", n.bias);
    if (r.has("terms")) {
        const auto& arr = r.array("terms");
        for (std::size_t i = 0; i < arr.size(); ++i) {
            Reader e(arr[i], item_path(r.key("terms"), i));
            NoiseTerm t;
            t.amplitude = e.required_number("amplitude");
            t.frequency = e.required_number("frequency_rad_s");
            e.number("phase_rad", t.phase);
            const auto kind = e.string("kind").value_or("sin");
            if (kind == "sin")
                t.kind = NoiseKind::sin;
            else if (kind == "cos")
                t.kind = NoiseKind::cos;
            else
                throw ConfigError(e.key("kind"), "must be 'sin' or 'cos'");
            e.finish();
            n.terms.push_back(t);
        }
    }
    r.finish();
    return n;
}

inline void read_controller(Reader r, ControllerTuning& c) {
    if (r.has("poles")) {
        const auto& arr = r.array("poles");
        std::string list;
        for (std::size_t i = 0; i < arr.size(); ++i) {
            if (!arr[i].is_string() && !arr[i].is_number())
                throw ConfigError(item_path(r.key("poles"), i), "must be a number or a string like \"-10+5i\"");
            list += (i ? "," : "") + (arr[i].is_string() ? arr[i].get<std::string>() : format_double(arr[i].get<double>()));
        }
        try {
            c.poles = parse_spectrum(list);
        } catch (const ConfigError& e) {
            throw ConfigError(r.key("poles"), e.what());
        }
    }
    if (r.has("gain")) {
        const auto& arr = r.array("gain");
        if (arr.size() != 2) throw ConfigError(r.key("gain"), "must have two rows");
        Gain k;
        for (std::size_t i = 0; i < 2; ++i) {
            if (!arr[i].is_array() || arr[i].size() != 4) throw ConfigError(item_path(r.key("gain"), i), "must have four entries");
            for (std::size_t j = 0; j < 4; ++j) {
                if (!arr[i][j].is_number()) throw ConfigError(item_path(r.key("gain"), i), "entries must be numbers");
                k(i, j) = arr[i][j].get<double>();
            }
        }
        c.gain = k;
    }
    if (r.has("weights")) {
        auto w = r.object("weights");
        w.number("w_p", c.weights.w_p);
        w.number("w_q", c.weights.w_q);
        w.number("w_pq", c.weights.w_pq);
        w.finish();
    }
    if (r.has("gradient")) {
        auto g = r.object("gradient");
        g.number("eps1", c.gradient.eps1);
        g.number("eps2", c.gradient.eps2);
        g.number("eps3", c.gradient.eps3);
        g.number("alpha", c.gradient.alpha);
        g.finish();
    }
    r.finish();
}

inline void read_initial(Reader r, ScenarioSpec& s) {
    r.number("omega_r_pu", s.initial_omega_r);
    const bool any_ctrl = r.has("omega_rd_pu") || r.has("theta_rad") || r.has("beta_deg");
    if (any_ctrl) {
        ControllerState c{s.initial_omega_r, 0.0, s.belief.aero.beta_min};
        r.number("omega_rd_pu", c.omega_rd);
        if (!r.has("theta_rad")) throw ConfigError(r.key("theta_rad"), "is required when the controller state is given");
        r.number("theta_rad", c.theta);
        r.number("beta_deg", c.beta);
        s.initial_controller = c;
    }
    if (r.has("flux_pu")) {
        const auto& arr = r.array("flux_pu");
        if (arr.size() != 4) throw ConfigError(r.key("flux_pu"), "must have four entries");
        PlantState p;
        p.omega_r = s.initial_omega_r;
        for (std::size_t i = 0; i < 4; ++i) {
            if (!arr[i].is_number()) throw ConfigError(r.key("flux_pu"), "entries must be numbers");
            p.flux[i] = arr[i].get<double>();
        }
        s.initial_plant = p;
    }
    r.finish();
}

}  // namespace detail

/// Builds a scenario from a parsed document. Relative wind-file paths resolve against `base_dir`.
inline ScenarioSpec scenario_from_json(const nlohmann::json& doc, const std::string& base_dir = "") {
    detail::Reader r(doc, "");
    const auto version = r.number("schema_version");
    if (!version) throw ConfigError("schema_version", "is required");
    if (*version != kSchemaVersion)
        throw ConfigError("schema_version", "unsupported version (expected " + std::to_string(kSchemaVersion) + ")");

    const bool paper_scale = r.boolean("paper_scale").value_or(false);
    ScenarioSpec s;
    if (auto base = r.string("base")) {
        try {
            s = builtin_scenario(*base, paper_scale);
        } catch (const ConfigError& e) {
            throw ConfigError("base", e.what());
        }
    } else if (paper_scale) {
        throw ConfigError("paper_scale", "requires 'base'");
    }

    if (auto n = r.string("name")) s.name = *n;
    r.number("duration_s", s.duration);
    r.number("dt_s", s.dt);
    r.number("controller_period_s", s.controller_period);
    r.number("sample_period_s", s.sample_period);
    if (auto seed = r.number("seed")) {
        if (*seed < 0 || *seed != std::floor(*seed)) throw ConfigError("seed", "must be a non-negative integer");
        s.seed = static_cast<std::uint64_t>(*seed);
    }
    if (r.has("plant")) detail::read_turbine(r.object("plant"), s.plant);
    if (r.has("belief")) detail::read_turbine(r.object("belief"), s.belief);
    if (r.has("wind")) s.wind = detail::read_wind(r.object("wind"), s.belief.aero.v_w_base, base_dir);
    if (r.has("demand")) s.demand = detail::read_demand(r.object("demand"), s.belief.aero.p_elec_base);
    if (r.has("noise")) s.noise = detail::read_noise(r.object("noise"), s.belief.aero.v_w_base);
    if (r.has("controller")) detail::read_controller(r.object("controller"), s.tuning);
    if (r.has("initial")) detail::read_initial(r.object("initial"), s);
    if (r.has("windows")) {
        s.windows.clear();
        const auto& arr = r.array("windows");
        for (std::size_t i = 0; i < arr.size(); ++i) {
            detail::Reader e(arr[i], detail::item_path("windows", i));
            MetricWindow w;
            w.label = e.string("label").value_or("window " + std::to_string(i));
            w.t0 = e.required_number("t0_s");
            w.t1 = e.required_number("t1_s");
            e.finish();
            s.windows.push_back(w);
        }
    }
    r.finish();
    validate(s);
    return s;
}

inline ScenarioSpec scenario_from_json_text(const std::string& text, const std::string& base_dir = "") {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("", std::string("malformed JSON: ") + e.what());
    }
    return scenario_from_json(doc, base_dir);
}

/// `DFIG_SEED` from the environment, if set to a non-negative integer.
inline std::optional<std::uint64_t> seed_from_environment() {
    const char* v = std::getenv("DFIG_SEED");
    if (!v || !*v) return std::nullopt;
    char* end = nullptr;
    const unsigned long long s = std::strtoull(v, &end, 10);
    if (*end != '\0' || v[0] == '-') throw ConfigError("DFIG_SEED", "must be a non-negative integer");
    return static_cast<std::uint64_t>(s);
}

}  // namespace dfig
