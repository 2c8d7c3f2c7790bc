#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "dynamics.hpp"
#include "quantization.hpp"
#include "schwarzian.hpp"
#include "spherical.hpp"

namespace qtraj::acceptance {

struct Result {
    int id = 0;
    std::string name;
    bool pass = false;
    std::string detail;
    double seconds = 0, budget = 0;
};

struct Check {
    bool pass = true;
    std::vector<std::string> parts;

    // value must be below tol
    void below(const std::string& what, double value, double tol) {
        bool ok = std::isfinite(value) && value < tol;
        pass = pass && ok;
        parts.push_back(what + " = " + io_short(value) + (ok ? " < " : " !< ") + io_short(tol));
    }
    void above(const std::string& what, double value, double tol) {
        bool ok = std::isfinite(value) && value > tol;
        pass = pass && ok;
        parts.push_back(what + " = " + io_short(value) + (ok ? " > " : " !> ") + io_short(tol));
    }
    void require(const std::string& what, bool ok) {
        pass = pass && ok;
        parts.push_back(what + (ok ? ": yes" : ": NO"));
    }
    void decreasing(const std::string& what, const std::vector<double>& v) {
        bool ok = true;
        std::string s = what + " [";
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (i) s += ", ";
            s += io_short(v[i]);
            if (i && !(v[i] < v[i - 1])) ok = false;
        }
        pass = pass && ok;
        parts.push_back(s + (ok ? "] decreasing" : "] NOT decreasing"));
    }
    std::string text() const {
        std::string s;
        for (std::size_t i = 0; i < parts.size(); ++i) s += (i ? "; " : "") + parts[i];
        return s;
    }

    static std::string io_short(double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.3g", v);
        return buf;
    }
};

namespace detail {

constexpr double kE = 0.5;

inline Grid free_grid() { return Grid::with_spacing(-20.0, 40.0, 1e-2); }

inline std::vector<MicrostateParams> random_mu_nu(int n, unsigned seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> d(-3.0, 3.0);
    std::vector<MicrostateParams> out;
    while (static_cast<int>(out.size()) < n) {
        double mu = d(rng), nu = d(rng);
        if (std::abs(mu * nu - 1.0) > 0.05) out.push_back(MicrostateParams::mu_nu(mu, nu));
    }
    return out;
}

inline std::vector<MicrostateParams> random_floyd(int n, unsigned seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> pos(0.2, 5.0), c(-3.0, 3.0);
    std::vector<MicrostateParams> out;
    while (static_cast<int>(out.size()) < n) {
        double a = pos(rng), b = pos(rng), cc = c(rng);
        if (a * b - 0.25 * cc * cc > 0.05) out.push_back(MicrostateParams::floyd(a, b, cc));
    }
    return out;
}

inline std::vector<BoundStateRecord> harmonic_records(std::size_t count) {
    Grid g = Grid::with_spacing(-9.0, 9.0, 1e-3);
    auto spec = PotentialSpec::harmonic(1.0);
    auto e = find_bound_energies(spec, g, {}, count);
    std::vector<BoundStateRecord> out;
    for (std::size_t i = 0; i < e.size(); ++i) out.push_back(bound_state_record(bound_state_solution(spec, e[i], g, {}), i));
    return out;
}

}  // namespace detail

inline Check criterion_1() {
    Check c;
    double worst = 0, worst_ulp = 0;
    for (int i = 0; i <= 1000; ++i) {
        double t = 0.01 * i;
        double x = free_particle_closed_form(detail::kE, 1.0, 0.0, 0.0, 0.0, t);
        double want = std::sqrt(2.0 * detail::kE) * t;
        worst = std::max(worst, std::abs(x - want));
        worst_ulp = std::max(worst_ulp, std::abs(x - want) / (std::numeric_limits<double>::epsilon() * std::max(1.0, want)));
    }
    c.below("max|x - (x0 + v t)|", worst, 1e-13);
    c.below("in units of eps*max(1,|x|)", worst_ulp, 16.0);
    return c;
}

inline Check criterion_2() {
    Check c;
    const double A = 2.0, B = 0.5;
    auto f = free_trajectory_field(detail::kE, A, B, 0.0, detail::free_grid());
    double x0 = free_particle_closed_form(detail::kE, A, B, 0, 0, 0);
    double period = std::numbers::pi / (2.0 * detail::kE);  // tan(2Et/hbar) period
    auto tr = integrate_trajectory(f, x0, 0.0, period);
    c.require("completed", tr.status == TrajectoryStatus::completed);
    double worst = 0;
    for (const auto& s : tr.samples)
        worst = std::max(worst, std::abs(s.x - free_particle_closed_form(detail::kE, A, B, 0, 0, s.t)));
    for (int i = 0; i <= 400; ++i) {
        double t = period * i / 400.0;
        worst = std::max(worst, std::abs(tr.position(t) - free_particle_closed_form(detail::kE, A, B, 0, 0, t)));
    }
    c.below("max|x_ode - x_closed|", worst, 1e-6);
    return c;
}

inline Check criterion_3() {
    Check c;
    UnitSystem u;
    auto f = free_trajectory_field(detail::kE, 2.0, 0.5, 0.0, detail::free_grid(), u);
    auto tr = integrate_trajectory(f, 0.3, 0.0, 10.0);
    double s_start = f.s0(tr.samples.front().x), worst = 0;
    for (const auto& s : tr.samples) worst = std::max(worst, std::abs(f.s0(s.x) - s_start - 2.0 * detail::kE * s.t));
    c.below("max|dS0 - 2E dt|/hbar", worst / u.hbar, 1e-6);
    return c;
}

inline Check criterion_4() {
    Check c;
    Grid g = Grid::with_spacing(-4.0, 4.0, 1e-2);
    double worst = 0;
    for (auto params : detail::random_mu_nu(50, 3)) {
        ReducedActionField f(PairBasis::free_cos_sin(detail::kE, {}), params, g);
        for (double x = -4.0; x <= 4.0; x += 0.05) worst = std::max(worst, std::abs(qshje_residual(f, x).abs));
    }
    c.below("free, 50 random (mu,nu): max abs residual", worst, 1e-7);
    auto rec = detail::harmonic_records(1);
    Grid gh = Grid::with_spacing(-5.0, 5.0, 1e-3);
    auto p = make_pair(PotentialSpec::harmonic(1.0), rec[0].energy, gh, {}, 1.0, gh.nearest(0.0));
    ReducedActionField fh(PairBasis::sampled(p), MicrostateParams::floyd(1, 1, 0));
    double wh = 0;
    for (std::size_t i = gh.nearest(-3.0); i <= gh.nearest(3.0); ++i) wh = std::max(wh, qshje_residual(fh, gh[i]).rel);
    c.below("harmonic ground pair |x|<=3: max rel residual", wh, 1e-6);
    return c;
}

inline Check criterion_5() {
    Check c;
    const double E = detail::kE;
    double worst = 0;
    for (auto [A, B] : {std::pair{2.0, 0.5}, std::pair{0.4, -2.0}})
        for (int i = 0; i < 200; ++i) {
            auto j = free_particle_closed_form_jet(E, A, B, 0, 0, 0.05 * i);
            worst = std::max(worst, fiqnl_residual(PotentialSpec::free(), E, j.x, j.xdot, j.xddot, j.xdddot).rel);
        }
    c.below("free closed form, 200 times: |res|/E^4", worst, 1e-6);
    Grid g = Grid::with_spacing(-5.0, 5.0, 1e-3);
    auto p = make_pair(PotentialSpec::harmonic(1.0), 0.5, g, {}, 1.0, g.nearest(0.0));
    ReducedActionField f(PairBasis::sampled(p), MicrostateParams::mu_nu(0.3, -0.7));
    auto tr = integrate_trajectory(f, -0.6, 0.0, 3.0);
    double wh = 0;
    for (double t = 0.1; t < 2.9; t += 0.05) {
        auto j = tr.differentiate(t, 1e-2);
        wh = std::max(wh, fiqnl_residual(f.spec(), 0.5, tr.position(t), j.xdot, j.xddot, j.xdddot).rel);
    }
    c.below("harmonic trajectory, dense-output differences", wh, 1e-3);
    return c;
}

inline Check criterion_6() {
    Check c;
    auto recs = detail::harmonic_records(5);
    auto sets = detail::random_floyd(20, 7);
    double dev = 0, spread = 0;
    for (const auto& r : recs) {
        auto pair = r.pair();
        double lo = 1e300, hi = -1e300;
        for (const auto& s : sets) {
            double j = action_variable(pair, s).J_over_h;
            lo = std::min(lo, j);
            hi = std::max(hi, j);
            dev = std::max(dev, std::abs(j - (static_cast<double>(r.index) + 1.0)));
        }
        spread = std::max(spread, hi - lo);
        c.require("n=" + std::to_string(r.index) + " partner nodes = n+1", r.node_count_partner == r.index + 1);
    }
    c.below("max|J/h - (n+1)|, n=0..4 x 20 sets", dev, 1e-3);
    c.below("max spread over sets", spread, 1e-3);
    return c;
}

inline Check criterion_7() {
    Check c;
    auto rec = detail::harmonic_records(1)[0];
    auto fam = enumerate_microstates(rec, 2);
    auto basis = PairBasis::sampled(rec.pair());
    ReducedActionField f1(basis, fam[0]), f2(basis, fam[1]);
    double pmax = 0;
    for (double p : f1.p_samples()) pmax = std::max(pmax, std::abs(p));
    auto d = microstate_distinctness(f1, f2);
    c.below("psi gap", d.psi_gap, 1e-6);
    c.above("max|P1-P2|/max|P1|", d.p_gap / pmax, 1e-3);
    std::complex<double> alpha(1.0, 0.0), beta(0.3, -0.8);
    auto v = enumerate_microstates(alpha, beta);
    bool unique = v.size() == 1;
    if (unique) {
        // the recovered set must reproduce |psi|^2 up to its scale b
        const auto& fl = v[0].as_floyd();
        double worst = 0;
        for (double x = 0.0; x <= 6.0; x += 0.1) {
            double ph = std::cos(x), th = std::sin(x);
            double mod = std::norm(alpha * ph + beta * th);
            double q = fl.a * ph * ph + fl.b * th * th + fl.c * ph * th;
            worst = std::max(worst, std::abs(mod - q));
        }
        c.below("unbound recovery reproduces |psi|^2", worst, 1e-12);
    }
    c.require("unbound recovery unique", unique);
    return c;
}

inline Check criterion_8() {
    Check c;
    std::vector<double> traj, fdev;
    for (int k = 0; k <= 3; ++k) {
        double hb = std::ldexp(1.0, -k);
        UnitSystem u{hb, 1.0};
        Grid g = Grid::with_spacing(-2.0, 14.0, 1e-3);
        ReducedActionField f(PairBasis::free_cos_sin(detail::kE, u), MicrostateParams::mu_nu(1.2, 1.7), g);
        TrajectoryOptions opt;
        opt.output_dt = 0.01;
        auto tr = integrate_trajectory(f, 0.0, 0.0, 10.0, opt);
        double v = std::sqrt(2.0 * detail::kE / u.mass), dev = 0;
        for (const auto& s : tr.samples) dev = std::max(dev, std::abs(s.x - v * s.t));
        traj.push_back(dev);
        // classical-like microstate: pair anchored at 0 with theta2'(0) = p(0)/hbar, mu = nu = 0
        Grid gh = Grid::with_spacing(-1.0, 1.0, 1e-4 * hb);
        auto p = make_pair(PotentialSpec::harmonic(1.0), detail::kE, gh, u, std::sqrt(2.0 * u.mass * detail::kE) / hb,
                           gh.nearest(0.0));
        ReducedActionField fh(PairBasis::sampled(p), MicrostateParams::mu_nu(0, 0));
        double fd = 0;
        for (double x = -0.5; x <= 0.5; x += 0.01) fd = std::max(fd, std::abs(f_function(fh, x) - 1.0));
        fdev.push_back(fd);
    }
    c.decreasing("free max|x - x_cl|, hbar=1..1/8", traj);
    c.decreasing("harmonic max|f-1| on |x|<=0.5", fdev);
    return c;
}

inline Check criterion_9() {
    Check c;
    Grid g = detail::free_grid();
    auto family = [&](double E) {
        return ReducedActionField(PairBasis::free_cos_sin(E, {}), MicrostateParams::mu_nu(0.4, 1.7), g);
    };
    auto f = family(detail::kE);
    auto tr = integrate_trajectory(f, 0.0, 0.0, 30.0);
    double worst = 0;
    for (double target : {2.0, 5.0}) {
        auto jr = quantum_jacobi_time(family, 0.0, target, detail::kE);
        double x1 = qtraj::detail::solve_coordinate(f, 0.0, target);
        double tof = time_of_flight(f, 0.0, x1);
        double ode = tr.arrival_time(x1);
        for (auto [a, b] : {std::pair{jr.time, tof}, std::pair{jr.time, ode}, std::pair{tof, ode}})
            worst = std::max(worst, std::abs(a - b) / std::max(std::abs(a), std::abs(b)));
    }
    c.below("max pairwise relative gap (Jacobi, quadrature, ODE)", worst, 1e-4);
    return c;
}

// Cycle-averaged gap: t_quantum and t_Floyd averaged over one period pi hbar/sqrt(2mE) of the
// oscillation at each x. The pointwise gap does not shrink with hbar (see README).
inline Check criterion_10() {
    Check c;
    const double a = 2, b = 1, cc = 0.5, E = detail::kE;
    double pointwise = 0;
    for (double x = 0.1; x < 10.0; x += 0.01)
        pointwise = std::max(pointwise, std::abs(quantum_free_trajectory(E, a, b, cc, x) - floyd_free_trajectory(E, a, b, cc, x)) / x);
    c.above("hbar=1 pointwise relative gap", pointwise, 1e-3);
    std::vector<double> avg, pw;
    for (int k = 0; k <= 3; ++k) {
        UnitSystem u{std::ldexp(1.0, -k), 1.0};
        double per = std::numbers::pi * u.hbar / std::sqrt(2.0 * u.mass * E), worst = 0, wp = 0;
        const int n = 64;
        for (double x = 1.0; x <= 5.0; x += 0.01) {
            double st = 0, sf = 0;
            for (int i = 0; i < n; ++i) {
                double y = x + per * ((i + 0.5) / n - 0.5);
                st += quantum_free_trajectory(E, a, b, cc, y, u);
                sf += floyd_free_trajectory(E, a, b, cc, y, u);
            }
            worst = std::max(worst, std::abs(st - sf) / n);
            wp = std::max(wp, std::abs(quantum_free_trajectory(E, a, b, cc, x, u) - floyd_free_trajectory(E, a, b, cc, x, u)));
        }
        avg.push_back(worst);
        pw.push_back(wp);
    }
    c.decreasing("cycle-averaged max|t_quantum - t_Floyd| on [1,5], hbar=1..1/8", avg);
    c.parts.push_back("pointwise max gap (informational) [" + Check::io_short(pw[0]) + ", " + Check::io_short(pw[1]) +
                      ", " + Check::io_short(pw[2]) + ", " + Check::io_short(pw[3]) + "]");
    return c;
}

inline Check criterion_11() {
    Check c;
    constexpr double pi = std::numbers::pi;
    // polar l = 1, m = 0 from T = cos theta
    SphericalQuantumNumbers q10(1, 0);
    Grid th = Grid::with_spacing(0.2, pi - 0.2, 1e-3);
    double t0 = th.x_min(), s = std::sin(t0);
    double v0 = std::sqrt(s) * std::cos(t0), d0 = std::cos(t0) * std::cos(t0) / (2 * std::sqrt(s)) - std::pow(s, 1.5);
    auto phys = integrate_schrodinger(PotentialSpec::polar_effective(0), polar_energy(q10, {}), th, v0, d0);
    auto l = polar_action_field(bound_state_record(phys, 0).pair(), MicrostateParams::floyd(1.3, 0.8, 0.4));
    auto tl = make_triple(q10, PotentialSpec::free(), 1.0, l, l, l);
    double wp = 0;
    for (double x = 0.25; x < pi - 0.25; x += 0.01) wp = std::max(wp, polar_qshje_residual(tl, x).rel);
    c.below("polar l=1 m=0 residual", wp, 1e-5);
    // azimuthal classical set
    double wa = 0;
    for (int m : {1, 2, 3}) {
        auto f = azimuthal_action_field({3, m}, MicrostateParams::floyd(1, 1, 0), Grid(0.0, 2 * pi, 4001));
        double base = f.s0(0.0);
        for (double ph = 0.0; ph <= 2 * pi; ph += 0.01) wa = std::max(wa, std::abs(f.s0(ph) - base - m * ph));
    }
    c.below("azimuthal a=b=1,c=0: max|M - hbar m phi - const|", wa, 1e-8);
    // total, free l = 0
    SphericalQuantumNumbers q00(0, 0);
    Grid r = Grid::with_spacing(0.5, 10.0, 1e-3);
    ReducedActionField z(PairBasis::free_cos_sin(0.5, {}), MicrostateParams::floyd(1, 1, 0), r);
    Grid thp = Grid::with_spacing(0.1, pi - 0.1, 1e-3);
    auto lp = polar_action_field(polar_pair(q00, thp), MicrostateParams::mu_nu(0.4, -0.7));
    auto mp = azimuthal_action_field(q00, MicrostateParams::mu_nu(0.5, 0.3), Grid(0.0, 2 * pi, 2001));
    auto t = make_triple(q00, PotentialSpec::free(), 0.5, z, lp, mp);
    auto rep = spherical_report(t, {1.0, 9.0}, {0.3, pi - 0.3}, {0.1, 6.0});
    c.below("total 3-D residual, free l=0 (relative)", rep.total_max, 1e-4);
    // detector: radial built with l = 1, angular parts with l = 0
    auto zb = radial_action_field(radial_pair(PotentialSpec::free(), {1, 0}, 0.5, r), MicrostateParams::floyd(1, 1, 0));
    auto bad = make_triple({1, 0}, PotentialSpec::free(), 0.5, zb, lp, mp);
    auto rb = spherical_report(bad, {1.0, 9.0}, {0.3, pi - 0.3}, {0.1, 6.0});
    c.require("lambda-mismatch detector fires (total " + Check::io_short(rb.total_max) + ")", !rb.consistent);
    return c;
}

inline Check criterion_12() {
    Check c;
    Grid g = Grid::with_spacing(-3.5, 3.5, 1e-3);
    auto p = make_pair(PotentialSpec::harmonic(1.0), 1.3, g, {}, 2.0, g.nearest(0.0));
    c.below("Wronskian drift", p.max_wronskian_drift(), 1e-8);
    auto err = [](double h) {
        Grid gg = Grid::with_spacing(0.0, 10.0, h);
        auto cs = integrate_schrodinger(PotentialSpec::free(), 2.0, gg, 1.0, 0.0, {});
        auto sn = integrate_schrodinger(PotentialSpec::free(), 2.0, gg, 0.0, 2.0, {});
        double e = 0;
        for (std::size_t k = 0; k < gg.size(); ++k) {
            e = std::max(e, std::abs(cs.value[k] - std::cos(2 * gg[k])));
            e = std::max(e, std::abs(sn.value[k] - std::sin(2 * gg[k])));
        }
        return e;
    };
    c.above("grid-halving error ratio", err(0.04) / err(0.02), 8.0);
    double h = 2e-3;
    std::vector<double> t, m;
    for (int i = 0; i <= 1000; ++i) {
        double v = std::atan(-1.0 + i * h);
        t.push_back(v);
        m.push_back((2 * v + 1) / (v + 3));
    }
    double wm = 0, wb = 0;
    for (std::size_t i = 3; i + 3 < t.size(); i += 13)
        wm = std::max(wm, std::abs(schwarzian<double>(m, i, h) - schwarzian<double>(t, i, h)));
    c.below("Moebius invariance of the bracket", wm, 5e-6);
    for (std::size_t i = 3; i + 3 < t.size(); i += 17) wb = std::max(wb, basic_identity_residual(t, i, h, 1.0));
    c.below("basic identity residual", wb, 1e-5);
    return c;
}

struct Criterion {
    int id;
    const char* name;
    double budget;
    std::function<Check()> run;
};

inline const std::vector<Criterion>& criteria() {
    static const std::vector<Criterion> all = {
        {1, "free-particle classical reduction", 1, criterion_1},
        {2, "ODE trajectory vs closed form", 5, criterion_2},
        {3, "S0 = 2E(t - t0) along trajectory", 5, criterion_3},
        {4, "QSHJE residual", 10, criterion_4},
        {5, "FIQNL residual", 10, criterion_5},
        {6, "action-variable quantization", 30, criterion_6},
        {7, "microstates", 10, criterion_7},
        {8, "classical limit", 20, criterion_8},
        {9, "quantum Jacobi theorem", 10, criterion_9},
        {10, "Floyd comparison", 10, criterion_10},
        {11, "spherical stack", 30, criterion_11},
        {12, "numerics hygiene", 10, criterion_12},
    };
    return all;
}

inline Result run(const Criterion& c) {
    Result r;
    r.id = c.id;
    r.name = c.name;
    r.budget = c.budget;
    auto t0 = std::chrono::steady_clock::now();
    try {
        auto ck = c.run();
        r.pass = ck.pass;
        r.detail = ck.text();
    } catch (const std::exception& e) {
        r.pass = false;
        r.detail = std::string("exception: ") + e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (r.seconds > r.budget) {
        r.pass = false;
        r.detail += "; runtime over budget";
    }
    return r;
}

inline std::string format(const Result& r) {
    char t[64];
    std::snprintf(t, sizeof t, "(%.2f s / %.0f s)", r.seconds, r.budget);
    return std::string(r.pass ? "PASS" : "FAIL") + " criterion " + std::to_string(r.id) + " " + r.name + ": " +
           r.detail + " " + t;
}

inline nlohmann::json to_json(const Result& r) {
    return {{"id", r.id}, {"name", r.name}, {"pass", r.pass}, {"detail", r.detail}, {"seconds", r.seconds},
            {"budget_seconds", r.budget}};
}

}  // namespace qtraj::acceptance
