#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <ostream>
#include <string>
#include <vector>

#include <boost/math/tools/roots.hpp>
#include <boost/numeric/odeint.hpp>

#include "error.hpp"
#include "io.hpp"
#include "quadrature.hpp"
#include "reduced_action.hpp"

namespace qtraj {

struct TrajectorySample {
    double t = 0, x = 0, xdot = 0;
};

struct QuantumLagrangianState {
    double f_value = 0, lagrangian = 0, hamiltonian = 0;
};

// f = P^2 / (2m(E - V))
inline double f_function(const ReducedActionField& fd, double x) {
    double w = fd.energy() - fd.potential(x).v;
    if (std::abs(w) < 1e-12)
        throw Error(ErrorKind::singularity, "dynamics", "f_function", "turning point: E = V", x);
    double P = fd.momentum(x);
    return P * P / (2.0 * fd.units().mass * w);
}

// df/dx with P' from the analytic momentum jet
inline double f_derivative(const ReducedActionField& fd, double x) {
    auto pv = fd.potential(x);
    double w = fd.energy() - pv.v;
    if (std::abs(w) < 1e-12)
        throw Error(ErrorKind::singularity, "dynamics", "f_function", "turning point: E = V", x);
    auto j = fd.momentum_jet(x);
    return (2.0 * j.p * j.dp * w + j.p * j.p * pv.dv) / (2.0 * fd.units().mass * w * w);
}

// dispersion relation xdot P = 2(E - V)
inline double velocity(const ReducedActionField& fd, double x) {
    double w = fd.energy() - fd.potential(x).v;
    if (w == 0.0) return 0.0;
    return 2.0 * w / fd.momentum(x);
}

struct VelocityJet {
    double v = 0, dv = 0, d2v = 0;
};

// v(x) and its x-derivatives; along a trajectory xddot = v v', xdddot = (v v'' + v'^2) v
inline VelocityJet velocity_jet(const ReducedActionField& fd, double x) {
    auto pv = fd.potential(x);
    auto j = fd.momentum_jet(x);
    double w = fd.energy() - pv.v, P = j.p, P2 = P * P;
    VelocityJet r;
    r.v = 2.0 * w / P;
    r.dv = -2.0 * pv.dv / P - 2.0 * w * j.dp / P2;
    r.d2v = -2.0 * pv.d2v / P + 4.0 * pv.dv * j.dp / P2 - 2.0 * w * j.d2p / P2 + 4.0 * w * j.dp * j.dp / (P2 * P);
    return r;
}

struct TrajectoryJet {
    double x = 0, xdot = 0, xddot = 0, xdddot = 0;
};

inline TrajectoryJet trajectory_jet_from_field(const ReducedActionField& fd, double x) {
    auto v = velocity_jet(fd, x);
    return {x, v.v, v.v * v.dv, (v.v * v.d2v + v.dv * v.dv) * v.v};
}

enum class TrajectoryStatus { completed, exited, turning_point };

inline const char* to_string(TrajectoryStatus s) {
    switch (s) {
        case TrajectoryStatus::completed: return "completed";
        case TrajectoryStatus::exited: return "exited";
        case TrajectoryStatus::turning_point: return "turning_point";
    }
    return "unknown";
}

struct TrajectoryOptions {
    double tol = 1e-11;
    double output_dt = 0.0;  // 0: one sample per accepted step
    double max_dt = 0.0;     // 0: unlimited
    std::size_t max_steps = 2'000'000;
};

class Trajectory {
public:
    using State = std::array<double, 1>;
    using Stepper = boost::numeric::odeint::runge_kutta_dopri5<State>;
    using Dense = boost::numeric::odeint::result_of::make_dense_output<Stepper>::type;

    std::vector<TrajectorySample> samples;
    TrajectoryStatus status = TrajectoryStatus::completed;
    double end_time = 0, end_position = 0;
    std::string message;

    double t_begin() const { return segments_.empty() ? end_time : segments_.front().previous_time(); }
    double t_end() const { return end_time; }

    // dense-output position on [t_begin, t_end]
    double position(double t) const {
        if (segments_.empty() || t < t_begin() || t > end_time)
            throw Error(ErrorKind::domain, "dynamics", "integrate_trajectory", "time outside integrated span", t);
        auto it = std::lower_bound(segments_.begin(), segments_.end(), t,
                                   [](const Dense& d, double tt) { return d.current_time() < tt; });
        if (it == segments_.end()) --it;
        State s;
        it->calc_state(t, s);
        return s[0];
    }

    // central differences of the dense output: x', x'', x''' at t with stencil step h
    TrajectoryJet differentiate(double t, double h) const {
        std::array<double, 7> xs{};
        for (int k = -3; k <= 3; ++k) xs[k + 3] = position(t + k * h);
        auto d = central_derivs<double>(std::span<const double>(xs), 3, h);
        return {xs[3], d.d1, d.d2, d.d3};
    }

    // first time x(t) = target, from the dense output
    double arrival_time(double target) const {
        for (const auto& seg : segments_) {
            State a, b;
            seg.calc_state(seg.previous_time(), a);
            seg.calc_state(seg.current_time(), b);
            if ((a[0] - target) * (b[0] - target) > 0) continue;
            double lo = seg.previous_time(), hi = seg.current_time();
            auto g = [&](double tt) {
                State s;
                seg.calc_state(tt, s);
                return s[0] - target;
            };
            if (g(lo) == 0.0) return lo;
            boost::uintmax_t it = 200;
            auto r = boost::math::tools::toms748_solve(g, lo, hi, boost::math::tools::eps_tolerance<double>(52), it);
            return 0.5 * (r.first + r.second);
        }
        throw Error(ErrorKind::domain, "dynamics", "arrival_time", "trajectory never reaches position", target);
    }

private:
    friend Trajectory integrate_trajectory(const ReducedActionField&, double, double, double,
                                           const TrajectoryOptions&);
    std::vector<Dense> segments_;
};

// dx/dt = 2(E - V)/P with an adaptive Dormand-Prince 5(4) stepper and dense output
inline Trajectory integrate_trajectory(const ReducedActionField& fd, double x0, double t0, double t1,
                                       const TrajectoryOptions& opt = {}) {
    using namespace boost::numeric::odeint;
    const Grid& g = fd.grid();
    if (!(x0 > g.x_min() && x0 < g.x_max()))
        throw Error(ErrorKind::domain, "dynamics", "integrate_trajectory", "x0 must be inside the grid", x0);
    if (!(t1 > t0)) throw Error(ErrorKind::config, "dynamics", "integrate_trajectory", "need t1 > t0");
    if (!(opt.tol > 0)) throw Error(ErrorKind::config, "dynamics", "integrate_trajectory", "tol must be positive");

    auto clamp = [&](double x) { return std::clamp(x, g.x_min(), g.x_max()); };
    auto rhs = [&](const Trajectory::State& s, Trajectory::State& ds, double) { ds[0] = velocity(fd, clamp(s[0])); };
    const double E = fd.energy(), tp_eps = 1e-10 * std::max(std::abs(E), 1.0);

    Trajectory tr;
    auto dense = make_dense_output(opt.tol, opt.tol, opt.max_dt, Trajectory::Stepper());
    double v0 = velocity(fd, x0);
    if (std::abs(E - fd.potential(x0).v) < tp_eps) {
        tr.samples.push_back({t0, x0, 0.0});
        tr.status = TrajectoryStatus::turning_point;
        tr.end_time = t0;
        tr.end_position = x0;
        tr.message = "starts at a turning point";
        return tr;
    }
    double dt0 = std::min({0.01 * g.spacing() / std::max(std::abs(v0), 1e-300), 0.01 * (t1 - t0), 1e-3});
    dense.initialize(Trajectory::State{x0}, t0, dt0);
    tr.samples.push_back({t0, x0, v0});
    double next_out = opt.output_dt > 0 ? t0 + opt.output_dt : 0.0;
    long out_index = 1;
    double x_prev = x0, v_prev = std::abs(v0);

    auto emit = [&](double t, double x) { tr.samples.push_back({t, x, velocity(fd, clamp(x))}); };
    auto state_at = [&](double t) {
        Trajectory::State s;
        dense.calc_state(t, s);
        return s[0];
    };

    for (std::size_t step = 0;; ++step) {
        if (step >= opt.max_steps)
            throw Error(ErrorKind::integration, "dynamics", "integrate_trajectory", "step limit reached",
                        dense.current_state()[0]);
        std::pair<double, double> span;
        try {
            span = dense.do_step(rhs);
        } catch (const std::exception& e) {
            throw Error(ErrorKind::integration, "dynamics", "integrate_trajectory",
                        std::string("step size underflow: ") + e.what(), dense.current_state()[0]);
        }
        tr.segments_.push_back(dense);
        const double ta = span.first, tb = span.second, xb = dense.current_state()[0];
        double t_stop = std::min(tb, t1);
        bool exited = !g.contains(xb) && tb > ta;
        if (exited) {
            double bound = xb > g.x_max() ? g.x_max() : g.x_min();
            boost::uintmax_t it = 200;
            auto r = boost::math::tools::toms748_solve([&](double t) { return state_at(t) - bound; }, ta, tb,
                                                       boost::math::tools::eps_tolerance<double>(52), it);
            double te = 0.5 * (r.first + r.second);
            if (te <= t1) t_stop = te;
            else exited = false;
        }
        if (opt.output_dt > 0) {
            while (next_out <= t_stop) {
                emit(next_out, state_at(next_out));
                next_out = t0 + static_cast<double>(++out_index) * opt.output_dt;
            }
        }
        if (exited) {
            double xe = state_at(t_stop);
            if (tr.samples.back().t < t_stop) emit(t_stop, xe);
            tr.status = TrajectoryStatus::exited;
            tr.end_time = t_stop;
            tr.end_position = xe;
            tr.message = "trajectory left the grid";
            return tr;
        }
        if (tb >= t1) {
            double x1 = state_at(t1);
            if (opt.output_dt <= 0 || tr.samples.back().t < t1) emit(t1, x1);
            tr.end_time = t1;
            tr.end_position = x1;
            return tr;
        }
        if (opt.output_dt <= 0) emit(tb, xb);
        double vb = std::abs(velocity(fd, clamp(xb)));
        bool stalled = std::abs(xb - x_prev) < 1e-6 * g.spacing() && vb < v_prev && tb - ta > 0;
        if (std::abs(E - fd.potential(clamp(xb)).v) < tp_eps || stalled) {
            tr.status = TrajectoryStatus::turning_point;
            tr.end_time = tb;
            tr.end_position = xb;
            tr.message = "asymptotic approach to a turning point (xdot -> 0)";
            if (opt.output_dt > 0 && tr.samples.back().t < tb) emit(tb, xb);
            return tr;
        }
        x_prev = xb;
        v_prev = vb;
    }
}

namespace detail {

// E - V must keep one sign strictly inside [lo, hi]; returns that sign
inline double allowed_sign(const ReducedActionField& fd, double lo, double hi, const char* op) {
    const Grid& g = fd.grid();
    if (!g.contains(lo) || !g.contains(hi))
        throw Error(ErrorKind::domain, "dynamics", op, "interval outside field grid", g.contains(lo) ? hi : lo);
    const double E = fd.energy();
    double sgn = 0;
    auto check = [&](double x) {
        double w = E - fd.potential(x).v;
        if (x > lo && x < hi && std::abs(w) < 1e-12)
            throw Error(ErrorKind::singularity, "dynamics", op, "turning point inside interval", x);
        if (w == 0.0) return;
        double s = w > 0 ? 1.0 : -1.0;
        if (sgn == 0) sgn = s;
        else if (s != sgn)
            throw Error(ErrorKind::singularity, "dynamics", op, "turning point inside interval", x);
    };
    check(lo);
    for (std::size_t i = g.cell(lo) + 1; i < g.size() && g[i] < hi; ++i) check(g[i]);
    check(hi);
    return sgn;
}

inline int phase_pieces(const ReducedActionField& fd, double lo, double hi) {
    double turns = std::abs(fd.s0(hi) - fd.s0(lo)) / (std::numbers::pi * fd.units().hbar);
    return static_cast<int>(std::ceil(4.0 * turns)) + 1;
}

}  // namespace detail

// Int P / (2(E - V)) dx from x0 to x1
inline double time_of_flight(const ReducedActionField& fd, double x0, double x1) {
    double lo = std::min(x0, x1), hi = std::max(x0, x1);
    detail::allowed_sign(fd, lo, hi, "time_of_flight");
    const double E = fd.energy();
    for (double x : {x0, x1})
        if (std::abs(E - fd.potential(x).v) < 1e-12)
            throw Error(ErrorKind::singularity, "dynamics", "time_of_flight",
                        "endpoint is a turning point: the time of flight diverges", x);
    if (x0 == x1) return 0.0;
    auto f = [&](double x) { return fd.momentum(x) / (2.0 * (E - fd.potential(x).v)); };
    return integrate(f, x0, x1, 1e-12, detail::phase_pieces(fd, lo, hi)).value;
}

// x(t) = (hbar/sqrt(2mE)) atan(A tan(2E(t - t0)/hbar) + B) + x0, continued monotonically across tan periods.
inline TrajectoryJet free_particle_closed_form_jet(double E, double A, double B, double x0, double t0, double t,
                                                   const UnitSystem& u = {}) {
    u.validate();
    if (A == 0.0)
        throw Error(ErrorKind::parameter, "dynamics", "free_particle_closed_form", "A = 0 gives a frozen particle");
    if (!(E > 0)) throw Error(ErrorKind::parameter, "dynamics", "free_particle_closed_form", "need E > 0");
    const double k = std::sqrt(2.0 * u.mass * E) / u.hbar, w = 2.0 * E / u.hbar;
    const double tau = w * (t - t0);
    const double n = std::round(tau / std::numbers::pi);
    const double tr = tau - n * std::numbers::pi;
    const double sa = A > 0 ? 1.0 : -1.0;
    TrajectoryJet j;
    j.x = (std::atan(A * std::tan(tr) + B) + sa * n * std::numbers::pi) / k + x0;
    // Q = cos^2 + (A sin + B cos)^2, k xdot = w A / Q
    const double c = std::cos(tau), s = std::sin(tau), g = A * s + B * c, gp = A * c - B * s;
    const double Q = c * c + g * g, Q1 = -2.0 * c * s + 2.0 * g * gp, Q2 = -2.0 * (c * c - s * s) + 2.0 * gp * gp - 2.0 * g * g;
    j.xdot = w / k * A / Q;
    j.xddot = -w * w / k * A * Q1 / (Q * Q);
    j.xdddot = w * w * w / k * A * (2.0 * Q1 * Q1 / (Q * Q * Q) - Q2 / (Q * Q));
    return j;
}

inline double free_particle_closed_form(double E, double A, double B, double x0, double t0, double t,
                                        const UnitSystem& u = {}) {
    return free_particle_closed_form_jet(E, A, B, x0, t0, t, u).x;
}

// field whose dispersion-relation trajectories are the closed form: theta = (cos, sin) about x0,
// S0 = hbar atan((tan k(x - x0) - B)/A), i.e. Floyd (A + B^2/A, 1/A, -2B/A) for A > 0
inline MicrostateParams free_trajectory_params(double A, double B) {
    if (!(A > 0))
        throw Error(ErrorKind::parameter, "dynamics", "free_trajectory_params",
                    "field mapping needs A > 0 (A < 0 reverses the motion)");
    return MicrostateParams::floyd(A + B * B / A, 1.0 / A, -2.0 * B / A);
}

inline ReducedActionField free_trajectory_field(double E, double A, double B, double x0, const Grid& grid,
                                                const UnitSystem& u = {}) {
    return ReducedActionField(PairBasis::analytic_free(E, u, {}, x0), free_trajectory_params(A, B), grid);
}

inline Residual fiqnl_residual(const PotentialSpec& spec, double E, double x, double xdot, double xddot,
                               double xdddot, const UnitSystem& u = {}) {
    if (xdot == 0.0) throw Error(ErrorKind::singularity, "dynamics", "fiqnl_residual", "xdot = 0", x);
    auto pv = potential_jet(spec, x, u);
    const double w = E - pv.v, m = u.mass, h2 = u.hbar * u.hbar;
    const double br = 1.5 * (xddot / xdot) * (xddot / xdot) - xdddot / xdot;
    double r = std::pow(w, 4) - 0.5 * m * xdot * xdot * std::pow(w, 3) + h2 / 8.0 * br * w * w -
               h2 / 8.0 * (xdot * xdot * pv.d2v + xddot * pv.dv) * w - 3.0 * h2 / 16.0 * std::pow(xdot * pv.dv, 2);
    return {r, std::abs(r) / std::pow(E, 4)};
}

// first-kind dynamic equation m f xddot + (m/2) xdot^2 f' + V' = 0
inline double first_kind_residual(const ReducedActionField& fd, double x, double xdot, double xddot) {
    const double m = fd.units().mass;
    return m * f_function(fd, x) * xddot + 0.5 * m * xdot * xdot * f_derivative(fd, x) + fd.potential(x).dv;
}

// x_hat = Int_{x_ref}^{x} P / sqrt(2m(E - V)) dx, allowed region only
inline double quantum_coordinate(const ReducedActionField& fd, double x_ref, double x) {
    double lo = std::min(x_ref, x), hi = std::max(x_ref, x);
    double sgn;
    try {
        sgn = detail::allowed_sign(fd, lo, hi, "quantum_coordinate");
    } catch (const Error& e) {
        throw Error(ErrorKind::domain, "dynamics", "quantum_coordinate",
                    "x_hat is real only in allowed regions; the interval crosses a turning point", e.x());
    }
    if (sgn < 0)
        throw Error(ErrorKind::domain, "dynamics", "quantum_coordinate",
                    "x_hat is imaginary in forbidden regions", x);
    if (x == x_ref) return 0.0;
    const double E = fd.energy(), m = fd.units().mass;
    auto f = [&](double y) { return fd.momentum(y) / std::sqrt(2.0 * m * (E - fd.potential(y).v)); };
    return integrate(f, x_ref, x, 1e-12, detail::phase_pieces(fd, lo, hi)).value;
}

struct JacobiResult {
    double time = 0;
    double richardson_delta = 0;  // |estimate(dE) - estimate(dE/2)|
    double x_minus = 0, x_plus = 0;
};

using FieldFamily = std::function<ReducedActionField(double E)>;

namespace detail {

inline double solve_coordinate(const ReducedActionField& fd, double x_ref, double target) {
    const Grid& g = fd.grid();
    auto h = [&](double x) { return quantum_coordinate(fd, x_ref, x) - target; };
    if (target == 0.0) return x_ref;
    // x_hat is monotone: bracket outward from x_ref with doubling steps
    for (double dir : {1.0, -1.0}) {
        double prev = x_ref, step = 16.0 * g.spacing();
        while (true) {
            double next = std::clamp(x_ref + dir * step, g.x_min(), g.x_max());
            if (next == prev) break;
            double hn;
            try {
                hn = h(next);
            } catch (const Error&) {
                break;
            }
            if (hn * target >= 0.0) {
                boost::uintmax_t it = 200;
                auto r = boost::math::tools::toms748_solve(h, std::min(prev, next), std::max(prev, next),
                                                           boost::math::tools::eps_tolerance<double>(50), it);
                return 0.5 * (r.first + r.second);
            }
            prev = next;
            step *= 2.0;
        }
    }
    throw Error(ErrorKind::domain, "dynamics", "quantum_jacobi_time", "x_hat target not bracketed on the grid",
                target);
}

inline double jacobi_estimate(const FieldFamily& family, double x_ref, double target, double E, double dE,
                              double* xm = nullptr, double* xp = nullptr) {
    auto fp = family(E + dE), fm = family(E - dE);
    double a = solve_coordinate(fp, x_ref, target), b = solve_coordinate(fm, x_ref, target);
    if (xp) *xp = a;
    if (xm) *xm = b;
    double sp = fp.s0(a) - fp.s0(x_ref), sm = fm.s0(b) - fm.s0(x_ref);
    return (sp - sm) / (2.0 * dE);
}

}  // namespace detail

// [dS0_hat/dE] at fixed x_hat by centered differences over a field family sharing its parameters
inline JacobiResult quantum_jacobi_time(const FieldFamily& family, double x_ref, double x_hat_target, double E,
                                        double dE = 0.0) {
    if (dE <= 0.0) dE = 1e-5 * std::abs(E);
    if (!(dE > 0)) throw Error(ErrorKind::config, "dynamics", "quantum_jacobi_time", "need dE > 0");
    JacobiResult r;
    r.time = detail::jacobi_estimate(family, x_ref, x_hat_target, E, dE, &r.x_minus, &r.x_plus);
    r.richardson_delta = std::abs(r.time - detail::jacobi_estimate(family, x_ref, x_hat_target, E, 0.5 * dE));
    return r;
}

// Floyd: t - t0 = sqrt(ab - c^2/4) sqrt(2m/E) x / (a + b + R cos(2kx + gamma)), gamma = atan2(-c, a - b)
inline double floyd_free_trajectory(double E, double a, double b, double c, double x, const UnitSystem& u = {}) {
    MicrostateParams::floyd(a, b, c).validate("floyd_free_trajectory");
    if (!(E > 0)) throw Error(ErrorKind::parameter, "dynamics", "floyd_free_trajectory", "need E > 0");
    const double k = std::sqrt(2.0 * u.mass * E) / u.hbar;
    const double R = std::hypot(a - b, c), gamma = std::atan2(-c, a - b);
    return std::sqrt(a * b - 0.25 * c * c) * std::sqrt(2.0 * u.mass / E) * x / (a + b + R * std::cos(2.0 * k * x + gamma));
}

// 2E (t - t0) = hbar atan((b tan(kx) + c/2)/sqrt(ab - c^2/4)), continued across tan periods
inline double quantum_free_trajectory(double E, double a, double b, double c, double x, const UnitSystem& u = {}) {
    MicrostateParams::floyd(a, b, c).validate("quantum_free_trajectory");
    if (!(E > 0)) throw Error(ErrorKind::parameter, "dynamics", "quantum_free_trajectory", "need E > 0");
    const double k = std::sqrt(2.0 * u.mass * E) / u.hbar, arg = k * x;
    const double n = std::round(arg / std::numbers::pi), r = arg - n * std::numbers::pi;
    double s = std::atan((b * std::tan(r) + 0.5 * c) / std::sqrt(a * b - 0.25 * c * c)) + n * std::numbers::pi;
    return u.hbar * s / (2.0 * E);
}

inline QuantumLagrangianState quantum_lagrangian_state(const ReducedActionField& fd, double x, double xdot) {
    double f = f_function(fd, x), V = fd.potential(x).v, K = 0.5 * fd.units().mass * xdot * xdot * f;
    return {f, K - V, K + V};
}

inline void write_trajectory_csv(std::ostream& os, const ReducedActionField& fd, const Trajectory& tr) {
    os << "t,x,xdot,p,f,hq_minus_e,fiqnl_residual_rel\n";
    for (const auto& s : tr.samples) {
        double P = fd.contains(s.x) ? fd.momentum(s.x) : std::nan("");
        double f = std::nan(""), hq = std::nan(""), fq = std::nan("");
        if (fd.contains(s.x)) {
            try {
                auto st = quantum_lagrangian_state(fd, s.x, s.xdot);
                f = st.f_value;
                hq = st.hamiltonian - fd.energy();
                auto j = trajectory_jet_from_field(fd, s.x);
                fq = fiqnl_residual(fd.spec(), fd.energy(), s.x, j.xdot, j.xddot, j.xdddot, fd.units()).rel;
            } catch (const Error&) {
            }
        }
        io::write_row(os, {s.t, s.x, s.xdot, P, f, hq, fq});
    }
}

}  // namespace qtraj
