#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "qtraj/qtraj.hpp"

namespace qtraj::cli {

inline Error config_error(const std::string& field, const std::string& message) {
    return Error(ErrorKind::config, "cli", "config", field + ": " + message);
}

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

using Output = std::variant<Table, nlohmann::json>;

// "A=1,B=0" (free trajectory constants), "mu=..,nu=.." or "a=..,b=..,c=..[,orientation=-1]"
struct ParamSpec {
    bool trajectory_constants = false;
    double A = 1, B = 0;
    MicrostateParams micro = MicrostateParams::floyd(1, 1, 0);
};

inline double parse_number(const std::string& field, const std::string& text) {
    std::size_t used = 0;
    double v = 0;
    try {
        v = std::stod(text, &used);
    } catch (const std::exception&) {
        throw config_error(field, "not a number: '" + text + "'");
    }
    if (used != text.size() || !std::isfinite(v)) throw config_error(field, "not a finite number: '" + text + "'");
    return v;
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, sep)) out.push_back(cur);
    if (!s.empty() && s.back() == sep) out.emplace_back();
    return out;
}

inline std::string trim(std::string s) {
    auto sp = [](unsigned char c) { return std::isspace(c) != 0; };
    s.erase(s.begin(), std::find_if_not(s.begin(), s.end(), sp));
    s.erase(std::find_if_not(s.rbegin(), s.rend(), sp).base(), s.end());
    return s;
}

inline ParamSpec parse_params(const std::string& field, const std::string& text) {
    std::map<std::string, double> kv;
    for (const auto& item : split(text, ',')) {
        auto t = trim(item);
        auto eq = t.find('=');
        if (eq == std::string::npos) throw config_error(field, "expected key=value, got '" + t + "'");
        auto key = trim(t.substr(0, eq));
        if (kv.count(key)) throw config_error(field, "duplicate key " + key);
        kv[key] = parse_number(field + "." + key, trim(t.substr(eq + 1)));
    }
    auto keys = [&](std::initializer_list<const char*> need, std::initializer_list<const char*> optional) {
        std::size_t hit = 0;
        for (const char* k : need) {
            if (!kv.count(k)) throw config_error(field, std::string("missing key ") + k);
            ++hit;
        }
        for (const char* k : optional) hit += kv.count(k);
        if (hit != kv.size()) throw config_error(field, "unexpected keys in '" + text + "'");
    };
    ParamSpec p;
    if (kv.count("A") || kv.count("B")) {
        keys({"A", "B"}, {});
        p.trajectory_constants = true;
        p.A = kv["A"];
        p.B = kv["B"];
        free_trajectory_params(p.A, p.B);  // rejects A <= 0
    } else if (kv.count("mu") || kv.count("nu")) {
        keys({"mu", "nu"}, {});
        p.micro = MicrostateParams::mu_nu(kv["mu"], kv["nu"]);
    } else {
        keys({"a", "b", "c"}, {"orientation"});
        double o = kv.count("orientation") ? kv["orientation"] : 1.0;
        if (o != 1.0 && o != -1.0) throw config_error(field, "orientation must be 1 or -1");
        p.micro = MicrostateParams::floyd(kv["a"], kv["b"], kv["c"], static_cast<int>(o));
    }
    p.micro.validate(field.c_str());
    return p;
}

struct Scenario {
    std::string command;
    UnitSystem units;
    std::string potential = "free";
    double omega = 1, slope = 1;
    std::string table;
    std::optional<double> xmin, xmax, energy;
    std::optional<std::size_t> points, state;
    std::string params;
    double x0 = 0, t0 = 0, t1 = 10, dt = 0.01, tol = 1e-11;
    std::size_t samples = 201;
    // spherical
    int ell = 0, m_ell = 0;
    std::string radial_params = "a=1,b=1,c=0", polar_params = "a=1,b=1,c=0", azimuthal_params = "a=1,b=1,c=0";
    double rmin = 0.5, rmax = 10;
    std::string component;
    // accept
    std::vector<int> only;
};

inline PotentialSpec potential_of(const Scenario& s) {
    if (s.potential == "free") return PotentialSpec::free();
    if (s.potential == "harmonic") return PotentialSpec::harmonic(s.omega);
    if (s.potential == "linear") return PotentialSpec::linear(s.slope);
    if (s.potential == "tabulated") {
        if (s.table.empty()) throw config_error("table", "tabulated potential needs --table FILE");
        return read_tabulated_csv(s.table);
    }
    throw config_error("potential", "unknown kind '" + s.potential + "' (free, harmonic, linear, tabulated)");
}

inline std::optional<std::size_t> env_grid_points() {
    const char* v = std::getenv("QSHJE_GRID_POINTS");
    if (!v || !*v) return std::nullopt;
    double n = parse_number("QSHJE_GRID_POINTS", v);
    if (n < 9 || n != std::floor(n)) throw config_error("QSHJE_GRID_POINTS", "need an integer >= 9");
    return static_cast<std::size_t>(n);
}

inline std::pair<double, double> default_range(const Scenario& s, const PotentialSpec& spec) {
    const auto& u = s.units;
    if (s.potential == "harmonic") {
        double scale = std::sqrt(u.hbar / (u.mass * s.omega));
        double turn = s.energy ? std::sqrt(std::max(0.0, 2.0 * *s.energy / (u.mass * s.omega * s.omega)))
                               : std::sqrt(2.0 * static_cast<double>(s.state.value_or(0)) + 1.0) * scale;
        // off-eigenvalue solutions grow like exp(x^2/2) past the turning point
        double pad = (s.energy ? 3.0 : 8.0) * scale;
        return {-(turn + pad), turn + pad};
    }
    if (s.potential == "tabulated") {
        const auto& t = std::get<potential::Tabulated>(spec.kind).table;
        return {t->front(), t->back()};
    }
    if (s.potential == "free" && s.command == "trajectory" && s.energy) {
        double L = std::max(20.0, 1.5 * std::sqrt(2.0 * *s.energy / u.mass) * (s.t1 - s.t0) + 5.0);
        return {s.x0 - L, s.x0 + L};
    }
    return {s.x0 - 20.0, s.x0 + 20.0};
}

inline Grid make_grid(double lo, double hi, std::optional<std::size_t> points, double spacing = 1e-3) {
    if (!(hi > lo)) throw config_error("xmin/xmax", "need xmin < xmax");
    if (points) return Grid(lo, hi, *points);
    if (auto n = env_grid_points()) return Grid(lo, hi, *n);
    return Grid::with_spacing(lo, hi, spacing);
}

inline Grid grid_of(const Scenario& s, const PotentialSpec& spec) {
    auto [lo, hi] = default_range(s, spec);
    return make_grid(s.xmin.value_or(lo), s.xmax.value_or(hi), s.points);
}

inline double require_energy(const Scenario& s) {
    if (!s.energy) throw config_error("energy", "required for this command");
    return *s.energy;
}

inline void check_energy_state(const Scenario& s) {
    if (s.energy && s.state) throw config_error("energy", "--energy and --state are mutually exclusive");
}

// Basis for a,b,c / mu,nu params: bound-state pair, analytic free pair or a numeric pair at E.
inline ReducedActionField build_field(const Scenario& s, const ParamSpec& p) {
    check_energy_state(s);
    auto spec = potential_of(s);
    Grid g = grid_of(s, spec);
    if (!g.contains(s.x0)) throw config_error("x0", "outside the grid");
    if (p.trajectory_constants) {
        if (!spec.is_free()) throw config_error("params", "A,B constants apply to the free particle only");
        return free_trajectory_field(require_energy(s), p.A, p.B, s.x0, g, s.units);
    }
    if (s.state) return ReducedActionField(PairBasis::sampled(bound_state_record(spec, g, s.units, *s.state).pair()), p.micro);
    double E = require_energy(s);
    if (spec.is_free()) return ReducedActionField(PairBasis::free_cos_sin(E, s.units), p.micro, g);
    return ReducedActionField(PairBasis::sampled(make_pair(spec, E, g, s.units, 1.0, g.nearest(s.x0))), p.micro);
}

namespace command {

inline Output pair(const Scenario& s) {
    check_energy_state(s);
    auto spec = potential_of(s);
    Grid g = grid_of(s, spec);
    SolutionPair p = s.state ? bound_state_record(spec, g, s.units, *s.state).pair()
                             : make_pair(spec, require_energy(s), g, s.units, 1.0, g.nearest(s.x0));
    Table t{{"x", "theta1", "dtheta1", "theta2", "dtheta2"}, {}};
    for (std::size_t i = 0; i < g.size(); ++i)
        t.rows.push_back({g[i], p.sol1.value[i], p.sol1.deriv[i], p.sol2.value[i], p.sol2.deriv[i]});
    return t;
}

inline double or_nan(auto&& f) {
    try {
        return f();
    } catch (const Error&) {
        return std::nan("");
    }
}

inline Output action(const Scenario& s) {
    auto f = build_field(s, parse_params("params", s.params));
    Table t{{"x", "s0", "p", "v_b", "f"}, {}};
    const auto& u = f.units();
    for (std::size_t i = 0; i < f.grid().size(); ++i) {
        double x = f.grid()[i], P = f.p_samples()[i], w = f.energy() - f.potential(x).v;
        double fv = std::abs(w) < 1e-12 ? std::nan("") : P * P / (2.0 * u.mass * w);
        t.rows.push_back({x, f.s0_samples()[i], P, or_nan([&] { return bohm_quantum_potential(f, x); }), fv});
    }
    return t;
}

inline Output trajectory(const Scenario& s) {
    auto f = build_field(s, parse_params("params", s.params));
    if (!(s.t1 > s.t0)) throw config_error("t", "need t0 < t1");
    if (!(s.dt > 0)) throw config_error("dt", "must be positive");
    TrajectoryOptions opt;
    opt.tol = s.tol;
    opt.output_dt = s.dt;
    auto tr = integrate_trajectory(f, s.x0, s.t0, s.t1, opt);
    const bool free = f.spec().is_free();
    const double v = free ? (velocity(f, s.x0) >= 0 ? 1.0 : -1.0) * std::sqrt(2.0 * f.energy() / f.units().mass) : 0.0;
    Table t{{"t", "x", "xdot", "p", "f", "x_classical", "deviation", "max_deviation"}, {}};
    double worst = 0;
    for (const auto& smp : tr.samples) {
        double xc = free ? s.x0 + v * (smp.t - s.t0) : std::nan("");
        double P = f.contains(smp.x) ? f.momentum(smp.x) : std::nan("");
        double fv = f.contains(smp.x) ? or_nan([&] { return f_function(f, smp.x); }) : std::nan("");
        if (free) worst = std::max(worst, std::abs(smp.x - xc));
        t.rows.push_back({smp.t, smp.x, smp.xdot, P, fv, xc, smp.x - xc, 0.0});
    }
    for (auto& r : t.rows) r.back() = free ? worst : std::nan("");
    return t;
}

inline const std::vector<std::string> quantize_header{"state_index", "energy", "J_over_h", "node_phys", "node_partner"};

inline nlohmann::json quantize_json(const Scenario& s) {
    if (s.energy) throw config_error("energy", "quantize takes --state, not --energy");
    auto p = parse_params("params", s.params);
    if (p.trajectory_constants) throw config_error("params", "A,B constants are not microstate parameters here");
    Scenario q = s;
    q.state = s.state.value_or(0);
    auto spec = potential_of(q);
    auto rec = bound_state_record(spec, grid_of(q, spec), q.units, *q.state);
    return quantization_report(rec, p.micro);
}

inline Output quantize(const Scenario& s) { return quantize_json(s); }

inline Table quantize_row(const Scenario& s) {
    auto j = quantize_json(s);
    Table t{quantize_header, {}};
    std::vector<double> row;
    for (const auto& k : quantize_header) row.push_back(j[k].get<double>());
    t.rows.push_back(row);
    return t;
}

inline Output residuals(const Scenario& s) {
    auto f = build_field(s, parse_params("params", s.params));
    if (s.samples < 2) throw config_error("samples", "need >= 2");
    const Grid& g = f.grid();
    double margin = 0.05 * (g.x_max() - g.x_min());
    double lo = g.x_min() + margin, hi = g.x_max() - margin;
    Table t{{"x", "p", "qshje_abs", "qshje_rel", "modified_potential_rel", "basic_identity"}, {}};
    for (std::size_t i = 0; i < s.samples; ++i) {
        double x = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(s.samples - 1);
        auto q = qshje_residual(f, x);
        t.rows.push_back({x, f.momentum(x), q.abs, q.rel,
                          or_nan([&] { return modified_potential_residual(f, x).rel; }),
                          or_nan([&] { return basic_identity_residual(f, x); })});
    }
    return t;
}

inline Output compare_floyd(const Scenario& s) {
    auto p = parse_params("params", s.params);
    if (p.trajectory_constants) throw config_error("params", "compare-floyd takes a,b,c");
    if (s.potential != "free") throw config_error("potential", "compare-floyd is defined for the free particle");
    const Floyd fl = (p.micro.is_floyd() ? p.micro : params_convert(p.micro)).as_floyd();
    const double E = require_energy(s), lo = s.xmin.value_or(0.1), hi = s.xmax.value_or(10.0);
    if (!(hi > lo)) throw config_error("xmin/xmax", "need xmin < xmax");
    if (s.samples < 2) throw config_error("samples", "need >= 2");
    const auto& u = s.units;
    const double per = std::numbers::pi * u.hbar / std::sqrt(2.0 * u.mass * E);
    Table t{{"x", "t_quantum", "t_floyd", "gap", "rel_gap", "cycle_avg_gap"}, {}};
    for (std::size_t i = 0; i < s.samples; ++i) {
        double x = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(s.samples - 1);
        double tt = quantum_free_trajectory(E, fl.a, fl.b, fl.c, x, u), tf = floyd_free_trajectory(E, fl.a, fl.b, fl.c, x, u);
        // mean of t_quantum - t_Floyd over one period of the oscillation centred on x
        const int n = 64;
        double acc = 0;
        for (int k = 0; k < n; ++k) {
            double y = x + per * ((k + 0.5) / n - 0.5);
            acc += quantum_free_trajectory(E, fl.a, fl.b, fl.c, y, u) - floyd_free_trajectory(E, fl.a, fl.b, fl.c, y, u);
        }
        double scale = std::max(std::abs(tf), 1e-300);
        t.rows.push_back({x, tt, tf, tt - tf, std::abs(tt - tf) / scale, std::abs(acc) / n});
    }
    return t;
}

struct SphericalSetup {
    SphericalActionTriple triple;
    Window r, th, ph;
};

inline SphericalSetup spherical_setup(const Scenario& s) {
    SphericalQuantumNumbers qn(s.ell, s.m_ell);
    auto inner = potential_of(s);
    const double E = require_energy(s);
    constexpr double pi = std::numbers::pi;
    if (!(s.rmin > 0.0) || !(s.rmax > s.rmin)) throw config_error("rmin/rmax", "need 0 < rmin < rmax");
    Grid r = make_grid(s.rmin, s.rmax, s.points);
    auto z = radial_action_field(radial_pair(inner, qn, E, r, s.units), parse_params("radial-params", s.radial_params).micro);
    auto l = polar_action_field(polar_pair(qn, Grid::with_spacing(0.1, pi - 0.1, 1e-3), s.units),
                                parse_params("polar-params", s.polar_params).micro);
    auto m = azimuthal_action_field(qn, parse_params("azimuthal-params", s.azimuthal_params).micro,
                                    Grid(0.0, 2 * pi, 4001), s.units);
    double w = s.rmax - s.rmin;
    return {make_triple(qn, inner, E, z, l, m), {s.rmin + 0.1 * w, s.rmax - 0.1 * w}, {0.3, pi - 0.3}, {0.1, 2 * pi - 0.2}};
}

}  // namespace command

struct SweepAxis {
    std::string name;  // "hbar" or "param_index"; empty when nothing is swept
    std::vector<double> values;
    std::vector<Scenario> runs;
};

inline SweepAxis expand_sweep(const Scenario& base, const std::string& hbar_raw, bool hbar_given,
                              const std::string& params_raw, bool params_given) {
    SweepAxis ax;
    bool hbar_list = hbar_given && (hbar_raw.find(',') != std::string::npos || trim(hbar_raw).empty());
    bool params_list = params_given && (params_raw.find(';') != std::string::npos || trim(params_raw).empty());
    if (hbar_list && params_list) throw config_error("sweep", "exactly one swept axis allowed (got hbar and params)");
    Scenario s = base;
    s.params = trim(params_raw);
    if (hbar_given && !hbar_list) s.units.hbar = parse_number("hbar", trim(hbar_raw));
    if (params_given && !params_list) s.params = trim(params_raw);
    if (hbar_list) {
        ax.name = "hbar";
        for (const auto& v : split(hbar_raw, ',')) {
            if (trim(v).empty()) continue;
            Scenario r = s;
            r.units.hbar = parse_number("hbar", trim(v));
            ax.values.push_back(r.units.hbar);
            ax.runs.push_back(r);
        }
        if (ax.runs.empty()) throw config_error("hbar", "empty sweep list");
    } else if (params_list) {
        ax.name = "param_index";
        for (const auto& v : split(params_raw, ';')) {
            if (trim(v).empty()) continue;
            Scenario r = s;
            r.params = trim(v);
            ax.values.push_back(static_cast<double>(ax.runs.size()));
            ax.runs.push_back(r);
        }
        if (ax.runs.empty()) throw config_error("params", "empty sweep list");
    } else {
        ax.runs.push_back(s);
    }
    for (auto& r : ax.runs) r.units.validate("cli");
    return ax;
}

// Runs every scenario on a worker pool; results land in input order. The first failure by
// index is rethrown so error output does not depend on scheduling.
template <class F>
std::vector<Table> run_parallel(const std::vector<Scenario>& runs, F&& f, unsigned threads) {
    std::vector<Table> out(runs.size());
    std::vector<std::exception_ptr> errs(runs.size());
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i; (i = next++) < runs.size();) {
            try {
                out[i] = f(runs[i]);
            } catch (...) {
                errs[i] = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    unsigned n = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(runs.size())));
    for (unsigned k = 0; k < n; ++k) pool.emplace_back(work);
    for (auto& th : pool) th.join();
    for (auto& e : errs)
        if (e) std::rethrow_exception(e);
    return out;
}

inline void emit_csv(std::ostream& os, const SweepAxis& ax, const std::vector<Table>& tables) {
    if (tables.empty()) return;
    bool lead = !ax.name.empty();
    if (lead) os << ax.name << ',';
    for (std::size_t i = 0; i < tables[0].header.size(); ++i) os << (i ? "," : "") << tables[0].header[i];
    os << '\n';
    for (std::size_t k = 0; k < tables.size(); ++k)
        for (const auto& row : tables[k].rows) {
            if (lead) {
                std::vector<double> r{ax.values[k]};
                r.insert(r.end(), row.begin(), row.end());
                io::write_row(os, r);
            } else {
                io::write_row(os, row);
            }
        }
}

inline std::string error_json(const std::string& module, const std::string& op, const std::string& message,
                              std::optional<double> x = std::nullopt) {
    nlohmann::json j{{"module", module}, {"op", op}, {"message", message}, {"x", nullptr}};
    if (x) j["x"] = *x;
    return j.dump();
}

// "key = value" lines, '#' comments; each becomes "--key value" ahead of the command line,
// so later (command-line) occurrences win.
inline std::vector<std::string> read_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("config", "cannot open " + path);
    std::vector<std::string> out;
    std::string line;
    int no = 0;
    while (std::getline(in, line)) {
        ++no;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) throw config_error("config", path + ":" + std::to_string(no) + ": expected key=value");
        auto key = trim(line.substr(0, eq));
        if (key.empty() || key == "config") throw config_error("config", path + ":" + std::to_string(no) + ": bad key");
        out.push_back("--" + key);
        out.push_back(trim(line.substr(eq + 1)));
    }
    return out;
}

inline int run_command(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
    CLI::App app{"qtraj: deterministic quantum trajectories from the stationary quantum Hamilton-Jacobi equation", "qtraj"};
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    app.require_subcommand(1);
    app.fallthrough();

    Scenario s;
    std::string hbar_raw = "1", params_raw = "a=1,b=1,c=0", t_span = "0:10", config, out_path, only_raw;
    double energy = 0, xmin = 0, xmax = 0;
    std::size_t points = 0, state = 0;
    unsigned threads = std::max(1u, std::thread::hardware_concurrency());

    app.add_option("--config", config, "flat key=value file; command-line flags override it");
    auto* o_hbar = app.add_option("--hbar", hbar_raw, "reduced Planck constant; a comma list sweeps it");
    app.add_option("--mass", s.units.mass, "particle mass");
    app.add_option("--potential", s.potential, "free | harmonic | linear | tabulated (V(r) for spherical)");
    app.add_option("--omega", s.omega, "harmonic frequency");
    app.add_option("--slope", s.slope, "linear potential slope");
    app.add_option("--table", s.table, "x,v CSV for a tabulated potential");
    auto* o_xmin = app.add_option("--xmin", xmin, "grid start");
    auto* o_xmax = app.add_option("--xmax", xmax, "grid end");
    auto* o_points = app.add_option("--points", points, "grid points (else QSHJE_GRID_POINTS, else spacing 1e-3)");
    auto* o_energy = app.add_option("--energy", energy, "energy E");
    auto* o_state = app.add_option("--state", state, "bound-state index (0 = ground state)");
    auto* o_params = app.add_option("--params", params_raw,
                                    "A=..,B=.. | mu=..,nu=.. | a=..,b=..,c=..[,orientation=-1]; ';' separates a sweep");
    app.add_option("--x0", s.x0, "initial position / pair anchor");
    app.add_option("--t", t_span, "time span t0:t1");
    app.add_option("--dt", s.dt, "trajectory output step");
    app.add_option("--tol", s.tol, "ODE tolerance");
    app.add_option("--samples", s.samples, "sample count for residuals / compare-floyd");
    app.add_option("--ell", s.ell, "orbital quantum number");
    app.add_option("--m-ell", s.m_ell, "magnetic quantum number");
    app.add_option("--radial-params", s.radial_params, "radial microstate params");
    app.add_option("--polar-params", s.polar_params, "polar microstate params");
    app.add_option("--azimuthal-params", s.azimuthal_params, "azimuthal microstate params");
    app.add_option("--rmin", s.rmin, "radial grid start");
    app.add_option("--rmax", s.rmax, "radial grid end");
    app.add_option("--component", s.component, "spherical CSV output: radial | polar | azimuthal");
    app.add_option("--only", only_raw, "accept: comma list of criterion ids");
    app.add_option("--threads", threads, "sweep worker threads");
    app.add_option("--out", out_path, "output file (default stdout)");

    app.add_subcommand("pair", "Schrodinger solution pair (CSV)");
    app.add_subcommand("action", "reduced action, momentum, Bohm potential, f (CSV)");
    app.add_subcommand("trajectory", "quantum trajectory from the dispersion relation (CSV)");
    app.add_subcommand("quantize", "action variable of a bound state (JSON; CSV when swept)");
    app.add_subcommand("spherical", "3-D spherical decomposition report (JSON, or CSV with --component)");
    app.add_subcommand("compare-floyd", "quantum vs Floyd free trajectory (CSV)");
    app.add_subcommand("residuals", "QSHJE, modified-potential and basic-identity residuals (CSV)");
    app.add_subcommand("accept", "run the acceptance suite");

    try {
        std::vector<std::string> full;
        for (std::size_t i = 0; i < args.size(); ++i) {
            std::string path;
            if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
            else if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
            if (!path.empty()) {
                auto c = read_config(path);
                full.insert(full.begin(), c.begin(), c.end());
            }
        }
        full.insert(full.end(), args.begin(), args.end());
        std::reverse(full.begin(), full.end());
        app.parse(full);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << e.what() << "\n\n" << app.help() << error_json("cli", "parse", e.what()) << '\n';
        return 2;
    } catch (const Error& e) {
        err << error_json(e.module(), e.op(), e.what(), e.x()) << '\n';
        return e.is_config() ? 2 : 3;
    }

    try {
        s.command = app.get_subcommands().front()->get_name();
        if (o_energy->count()) s.energy = energy;
        if (o_state->count()) s.state = state;
        if (o_xmin->count()) s.xmin = xmin;
        if (o_xmax->count()) s.xmax = xmax;
        if (o_points->count()) s.points = points;
        {
            auto parts = split(t_span, ':');
            if (parts.size() != 2) throw config_error("t", "expected t0:t1");
            s.t0 = parse_number("t", trim(parts[0]));
            s.t1 = parse_number("t", trim(parts[1]));
        }
        for (const auto& id : split(only_raw, ','))
            if (!trim(id).empty()) s.only.push_back(static_cast<int>(parse_number("only", trim(id))));

        std::ofstream file;
        if (!out_path.empty()) {
            file.open(out_path);
            if (!file) throw config_error("out", "cannot open " + out_path);
        }
        std::ostream& os = out_path.empty() ? out : file;

        if (s.command == "accept") {
            auto all = acceptance::criteria();
            nlohmann::json results = nlohmann::json::array();
            int failed = 0, ran = 0;
            for (const auto& c : all) {
                if (!s.only.empty() && std::find(s.only.begin(), s.only.end(), c.id) == s.only.end()) continue;
                auto r = acceptance::run(c);
                ++ran;
                out << acceptance::format(r) << '\n';
                results.push_back(acceptance::to_json(r));
                if (!r.pass) ++failed;
            }
            if (ran == 0) throw config_error("only", "no criterion matches");
            out << failed << " criteria failed\n";
            if (!out_path.empty()) file << results.dump(2) << '\n';
            return failed ? 3 : 0;
        }

        auto ax = expand_sweep(s, hbar_raw, o_hbar->count() > 0, params_raw, o_params->count() > 0);
        if (s.command == "spherical") {
            if (!ax.name.empty()) throw config_error("sweep", "spherical does not sweep");
            auto st = command::spherical_setup(ax.runs[0]);
            if (s.component.empty()) {
                os << to_json(spherical_report(st.triple, st.r, st.th, st.ph), st.triple).dump(2) << '\n';
            } else {
                SphericalComponent c;
                Window w;
                if (s.component == "radial") { c = SphericalComponent::radial; w = st.r; }
                else if (s.component == "polar") { c = SphericalComponent::polar; w = st.th; }
                else if (s.component == "azimuthal") { c = SphericalComponent::azimuthal; w = st.ph; }
                else throw config_error("component", "radial, polar or azimuthal");
                write_component_csv(os, st.triple, c, w, s.samples);
            }
            return 0;
        }
        if (s.command == "quantize" && ax.name.empty()) {
            os << std::get<nlohmann::json>(command::quantize(ax.runs[0])).dump(2) << '\n';
            return 0;
        }
        std::function<Table(const Scenario&)> f;
        if (s.command == "quantize") f = command::quantize_row;
        else {
            Output (*g)(const Scenario&) = s.command == "pair"            ? command::pair
                                           : s.command == "action"        ? command::action
                                           : s.command == "trajectory"    ? command::trajectory
                                           : s.command == "residuals"     ? command::residuals
                                                                          : command::compare_floyd;
            f = [g](const Scenario& r) { return std::get<Table>(g(r)); };
        }
        emit_csv(os, ax, run_parallel(ax.runs, f, threads));
        return 0;
    } catch (const Error& e) {
        err << error_json(e.module(), e.op(), e.what(), e.x()) << '\n';
        return e.is_config() ? 2 : 3;
    } catch (const std::exception& e) {
        err << error_json("cli", s.command, e.what()) << '\n';
        return 3;
    }
}

}  // namespace qtraj::cli
