#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "error.hpp"
#include "io.hpp"
#include "quadrature.hpp"
#include "quantization.hpp"
#include "reduced_action.hpp"

namespace qtraj {

struct SphericalQuantumNumbers {
    int ell = 0, m_ell = 0;

    SphericalQuantumNumbers() = default;
    SphericalQuantumNumbers(int l, int m) : ell(l), m_ell(m) {
        if (ell < 0) throw Error(ErrorKind::config, "spherical", "quantum_numbers", "ell must be >= 0");
        if (std::abs(m_ell) > ell)
            throw Error(ErrorKind::config, "spherical", "quantum_numbers", "need -ell <= m_ell <= ell");
    }
    double lambda() const { return static_cast<double>(ell) * (ell + 1); }
};

// 1-D energies of the transformed angular equations
inline double polar_energy(const SphericalQuantumNumbers& qn, const UnitSystem& u) {
    return (qn.lambda() + 0.25) * u.hbar * u.hbar / (2.0 * u.mass);
}
inline double azimuthal_energy(const SphericalQuantumNumbers& qn, const UnitSystem& u) {
    return static_cast<double>(qn.m_ell) * qn.m_ell * u.hbar * u.hbar / (2.0 * u.mass);
}

inline PotentialSpec radial_spec(const PotentialSpec& inner, const SphericalQuantumNumbers& qn) {
    return PotentialSpec::radial_effective(inner, qn.lambda());
}

// X = r R
inline std::vector<double> radial_transform(const std::vector<double>& R, const Grid& r) {
    if (R.size() != r.size()) throw Error(ErrorKind::config, "spherical", "radial_transform", "size mismatch");
    if (!(r.x_min() > 0.0))
        throw Error(ErrorKind::domain, "spherical", "radial_transform", "radial grid must start at r > 0", r.x_min());
    std::vector<double> x(R.size());
    for (std::size_t i = 0; i < R.size(); ++i) x[i] = r[i] * R[i];
    return x;
}

// T_cal = sqrt(sin theta) T
inline std::vector<double> polar_transform(const std::vector<double>& T, const Grid& th) {
    if (T.size() != th.size()) throw Error(ErrorKind::config, "spherical", "polar_transform", "size mismatch");
    if (!(th.x_min() > 0.0) || !(th.x_max() < std::numbers::pi))
        throw Error(ErrorKind::domain, "spherical", "polar_transform", "polar grid must lie inside (0, pi)");
    std::vector<double> t(T.size());
    for (std::size_t i = 0; i < T.size(); ++i) t[i] = std::sqrt(std::sin(th[i])) * T[i];
    return t;
}

namespace detail {

// max |psi'' - q psi| / max|psi| with a fourth-order stencil on interior nodes
inline double sampled_equation_residual(const std::vector<double>& psi, const Grid& g, const PotentialSpec& spec,
                                        double E, const UnitSystem& u) {
    if (psi.size() != g.size()) throw Error(ErrorKind::config, "spherical", "residual", "size mismatch");
    const double h = g.spacing(), k = u.kappa();
    double scale = 0, worst = 0;
    for (double v : psi) scale = std::max(scale, std::abs(v));
    if (scale == 0.0) throw Error(ErrorKind::parameter, "spherical", "residual", "zero samples");
    for (std::size_t i = 2; i + 2 < psi.size(); ++i) {
        double d2 = (-psi[i - 2] + 16.0 * psi[i - 1] - 30.0 * psi[i] + 16.0 * psi[i + 1] - psi[i + 2]) / (12.0 * h * h);
        double q = k * (potential_value(spec, g[i], u) - E);
        worst = std::max(worst, std::abs(d2 - q * psi[i]));
    }
    return worst / scale;
}

}  // namespace detail

// X'' + (2m/hbar^2)(E - V - lambda hbar^2/2mr^2) X on samples
inline double radial_equation_residual(const std::vector<double>& X, const Grid& r, const PotentialSpec& inner,
                                       const SphericalQuantumNumbers& qn, double E, const UnitSystem& u = {}) {
    return detail::sampled_equation_residual(X, r, radial_spec(inner, qn), E, u);
}

// T_cal'' + (lambda + 1/4) T_cal - (m^2 - 1/4) T_cal / sin^2 on samples
inline double polar_equation_residual(const std::vector<double>& Tc, const Grid& th,
                                      const SphericalQuantumNumbers& qn, const UnitSystem& u = {}) {
    return detail::sampled_equation_residual(Tc, th, PotentialSpec::polar_effective(qn.m_ell), polar_energy(qn, u), u);
}

inline SolutionPair radial_pair(const PotentialSpec& inner, const SphericalQuantumNumbers& qn, double E,
                                const Grid& r, const UnitSystem& u = {}, std::optional<double> anchor = {}) {
    if (!(r.x_min() > 0.0))
        throw Error(ErrorKind::domain, "spherical", "radial_pair", "radial grid must start at r > 0", r.x_min());
    std::size_t a = anchor ? r.nearest(*anchor) : 0;
    return make_pair(radial_spec(inner, qn), E, r, u, 1.0, a);
}

inline SolutionPair polar_pair(const SphericalQuantumNumbers& qn, const Grid& th, const UnitSystem& u = {}) {
    if (!(th.x_min() > 0.0) || !(th.x_max() < std::numbers::pi))
        throw Error(ErrorKind::domain, "spherical", "polar_pair", "polar grid must lie inside (0, pi)");
    return make_pair(PotentialSpec::polar_effective(qn.m_ell), polar_energy(qn, u), th, u, 1.0,
                     th.nearest(0.5 * std::numbers::pi));
}

inline ReducedActionField radial_action_field(const SolutionPair& pair, const MicrostateParams& params) {
    if (!(pair.grid.x_min() > 0.0))
        throw Error(ErrorKind::domain, "spherical", "radial_reduced_action", "radial grid must start at r > 0");
    return ReducedActionField(PairBasis::sampled(pair), params);
}

inline ReducedActionField polar_action_field(const SolutionPair& pair, const MicrostateParams& params) {
    if (!(pair.grid.x_min() > 0.0) || !(pair.grid.x_max() < std::numbers::pi))
        throw Error(ErrorKind::domain, "spherical", "polar_reduced_action", "polar grid must lie inside (0, pi)");
    return ReducedActionField(PairBasis::sampled(pair), params);
}

// (F1, F2) = (cos m phi, sin m phi), or (1, phi) for m = 0
inline ReducedActionField azimuthal_action_field(const SphericalQuantumNumbers& qn, const MicrostateParams& params,
                                                 const Grid& phi, const UnitSystem& u = {}) {
    if (phi.x_min() < 0.0 || phi.x_max() > 2.0 * std::numbers::pi + 1e-12)
        throw Error(ErrorKind::domain, "spherical", "azimuthal_reduced_action", "phi grid must lie in [0, 2 pi]");
    Mat2 coeff{1.0, 0.0, 0.0, qn.m_ell < 0 ? -1.0 : 1.0};
    return ReducedActionField(PairBasis::analytic_free(azimuthal_energy(qn, u), u, coeff), params, phi);
}

inline double radial_reduced_action(const SolutionPair& pair, const MicrostateParams& params, double r) {
    return radial_action_field(pair, params).s0(r);
}
inline double polar_reduced_action(const SolutionPair& pair, const MicrostateParams& params, double th) {
    return polar_action_field(pair, params).s0(th);
}
inline double azimuthal_reduced_action(const SphericalQuantumNumbers& qn, const MicrostateParams& params, double phi,
                                       const UnitSystem& u = {}) {
    Grid g(0.0, 2.0 * std::numbers::pi, 4097);
    return azimuthal_action_field(qn, params, g, u).s0(phi);
}

// Z from the quadrature form hbar atan((b K Int_{r_s}^r dr/X1^2 + c/2)/sqrt(ab - c^2/4)), K = 1,
// r_s = argmax|X1|; X1 must not vanish between r_s and r. Same branch as atan, no unwrapping.
inline double radial_action_quadrature(const SolutionSamples& x1, const Floyd& f, double r) {
    MicrostateParams{f}.validate("radial_action_quadrature");
    const Grid& g = x1.grid;
    if (!g.contains(r)) throw Error(ErrorKind::domain, "spherical", "radial_action_quadrature", "r outside grid", r);
    std::size_t is = 0;
    for (std::size_t i = 1; i < g.size(); ++i)
        if (std::abs(x1.value[i]) > std::abs(x1.value[is])) is = i;
    std::vector<double> y = x1.value, dy = x1.deriv, d2(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) d2[i] = x1.q[i] * y[i];
    detail::BasisInterp in(std::move(y), std::move(dy), std::move(d2), g.x_min(), g.spacing());
    double lo = std::min(g[is], r), hi = std::max(g[is], r);
    for (std::size_t i = g.nearest(lo); i <= g.nearest(hi); ++i)
        if (x1.value[i] == 0.0 || (i > g.nearest(lo) && (x1.value[i] > 0) != (x1.value[i - 1] > 0)))
            throw Error(ErrorKind::domain, "spherical", "radial_action_quadrature", "X1 has a node in the range",
                        g[i]);
    int pieces = std::max(1, static_cast<int>((hi - lo) / (50.0 * g.spacing())));
    double I = integrate([&](double s) { double v = in(s); return 1.0 / (v * v); }, lo, hi, 1e-13, pieces).value;
    if (r < g[is]) I = -I;
    double hbar = x1.units.hbar;
    return hbar * std::atan((f.b * I + 0.5 * f.c) / std::sqrt(f.disc()));
}

// Polar identity: the combination (b T2 + c/2 T1) E[T2] + (a T1 + c/2 T2) E[T1] with
// E[T] = T'' + cot T' + (lambda - m^2/sin^2) T, T = T_cal/sqrt(sin), derivatives by differences
inline double polar_identity_residual(const ReducedActionField& l, const SphericalQuantumNumbers& qn, double th,
                                      double h = 1e-3) {
    auto p = l.params().is_floyd() ? l.params() : params_convert(l.params());
    const auto& f = p.as_floyd();
    const auto& basis = l.basis();
    if (!basis.contains(th - 2 * h) || !basis.contains(th + 2 * h))
        throw Error(ErrorKind::domain, "spherical", "polar_identity_residual", "stencil leaves the pair grid", th);
    auto T = [&](double x) {
        auto b = basis.at(x);
        double s = std::sqrt(std::sin(x));
        return std::array<double, 2>{b.t1 / s, b.t2 / s};
    };
    std::array<std::array<double, 2>, 5> v;
    for (int k = 0; k < 5; ++k) v[k] = T(th + (k - 2) * h);
    double s = std::sin(th), cot = std::cos(th) / s, lam = qn.lambda() - qn.m_ell * qn.m_ell / (s * s);
    std::array<double, 2> e{};
    for (int j = 0; j < 2; ++j) {
        double d1 = (v[0][j] - 8.0 * v[1][j] + 8.0 * v[3][j] - v[4][j]) / (12.0 * h);
        double d2 = (-v[0][j] + 16.0 * v[1][j] - 30.0 * v[2][j] + 16.0 * v[3][j] - v[4][j]) / (12.0 * h * h);
        e[j] = d2 + cot * d1 + lam * v[2][j];
    }
    double T1 = v[2][0], T2 = v[2][1];
    double r = (f.b * T2 + 0.5 * f.c * T1) * e[1] + (f.a * T1 + 0.5 * f.c * T2) * e[0];
    return r / (f.b * T1 * T1 + f.a * T2 * T2 + std::abs(f.c * T1 * T2));
}

struct SphericalActionTriple {
    SphericalQuantumNumbers qn;
    PotentialSpec potential = PotentialSpec::free();  // V(r), without the centrifugal term
    double energy = 0;
    ReducedActionField z, l, m;
    std::optional<std::array<double, 3>> reference;  // S0 = 0 there when set
};

inline SphericalActionTriple make_triple(const SphericalQuantumNumbers& qn, const PotentialSpec& V, double E,
                                         ReducedActionField z, ReducedActionField l, ReducedActionField m) {
    return {qn, V, E, std::move(z), std::move(l), std::move(m), std::nullopt};
}

inline double total_action(const SphericalActionTriple& t, double r, double th, double ph) {
    double s = t.z.s0(r) + t.l.s0(th) + t.m.s0(ph);
    if (t.reference) s -= t.z.s0((*t.reference)[0]) + t.l.s0((*t.reference)[1]) + t.m.s0((*t.reference)[2]);
    return s;
}

// (dS0/dr, (1/r) dS0/dtheta, (1/(r sin)) dS0/dphi)
inline std::array<double, 3> total_action_gradient(const SphericalActionTriple& t, double r, double th, double ph) {
    double s = std::sin(th);
    return {t.z.momentum(r), t.l.momentum(th) / r, t.m.momentum(ph) / (r * s)};
}

// (1/2m)(grad S0)^2 - (hbar^2/4m)[{S0,r} + {S0,th}/r^2 + {S0,ph}/(r^2 sin^2)] + V - E
//   - hbar^2/8mr^2 - hbar^2/(8mr^2 sin^2), with the bracket per coordinate
inline Residual total_qshje_residual(const SphericalActionTriple& t, double r, double th, double ph) {
    if (!(r > 0.0)) throw Error(ErrorKind::domain, "spherical", "total_qshje_residual", "r must be > 0", r);
    double s = std::sin(th);
    if (!(s > 1e-8)) throw Error(ErrorKind::domain, "spherical", "total_qshje_residual", "theta at a pole", th);
    const auto& u = t.z.units();
    const double hb2 = u.hbar * u.hbar, m = u.mass, r2 = r * r, s2 = s * s;
    auto jz = t.z.momentum_jet(r), jl = t.l.momentum_jet(th), jm = t.m.momentum_jet(ph);
    double grad2 = jz.p * jz.p + jl.p * jl.p / r2 + jm.p * jm.p / (r2 * s2);
    double br = action_bracket(jz) + action_bracket(jl) / r2 + action_bracket(jm) / (r2 * s2);
    double V = potential_value(t.potential, r, u);
    double res = grad2 / (2.0 * m) - hb2 / (4.0 * m) * br + V - t.energy - hb2 / (8.0 * m * r2) -
                 hb2 / (8.0 * m * r2 * s2);
    return make_residual(res, t.energy);
}

// Component equations in the separated-equation normalization: the angular ones are 2m times the 1-D form.
inline Residual radial_qshje_residual(const SphericalActionTriple& t, double r) { return qshje_residual(t.z, r); }
inline Residual polar_qshje_residual(const SphericalActionTriple& t, double th) {
    auto q = qshje_residual(t.l, th);
    double k = 2.0 * t.l.units().mass;
    return {k * q.abs, k * q.abs / std::max(polar_energy(t.qn, t.l.units()) * k, 1.0)};
}
inline Residual azimuthal_qshje_residual(const SphericalActionTriple& t, double ph) {
    auto q = qshje_residual(t.m, ph);
    double k = 2.0 * t.m.units().mass;
    return {k * q.abs, k * q.abs / std::max(azimuthal_energy(t.qn, t.m.units()) * k, 1.0)};
}

struct Window {
    double lo = 0, hi = 0;
};

struct SphericalReport {
    double radial_max = 0, polar_max = 0, azimuthal_max = 0, total_max = 0;  // relative residuals
    Window r, th, ph;
    bool consistent = false;
};

// Samples every component on its window and the total equation on an n x n x n lattice.
// The total residual picks up (lambda_polar - lambda_radial) hbar^2/2mr^2 under a lambda
// mismatch, so `consistent` doubles as the mismatch detector.
inline SphericalReport spherical_report(const SphericalActionTriple& t, Window r, Window th, Window ph,
                                        std::size_t n = 9, double tol = 1e-4) {
    if (n < 2) throw Error(ErrorKind::config, "spherical", "spherical_report", "need n >= 2");
    SphericalReport rep;
    rep.r = r;
    rep.th = th;
    rep.ph = ph;
    auto at = [n](Window w, std::size_t i) { return w.lo + (w.hi - w.lo) * static_cast<double>(i) / (n - 1); };
    for (std::size_t i = 0; i < n; ++i) {
        rep.radial_max = std::max(rep.radial_max, std::abs(radial_qshje_residual(t, at(r, i)).rel));
        rep.polar_max = std::max(rep.polar_max, std::abs(polar_qshje_residual(t, at(th, i)).rel));
        rep.azimuthal_max = std::max(rep.azimuthal_max, std::abs(azimuthal_qshje_residual(t, at(ph, i)).rel));
    }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t k = 0; k < n; ++k)
                rep.total_max = std::max(rep.total_max, total_qshje_residual(t, at(r, i), at(th, j), at(ph, k)).rel);
    rep.consistent = rep.total_max < tol;
    return rep;
}

inline nlohmann::json to_json(const SphericalReport& rep, const SphericalActionTriple& t) {
    auto w = [](Window x) { return nlohmann::json::array({x.lo, x.hi}); };
    return {{"ell", t.qn.ell},
            {"m_ell", t.qn.m_ell},
            {"energy", t.energy},
            {"radial", {{"residual_max", rep.radial_max}, {"window", w(rep.r)}, {"params", t.z.params().to_json()}}},
            {"polar", {{"residual_max", rep.polar_max}, {"window", w(rep.th)}, {"params", t.l.params().to_json()}}},
            {"azimuthal",
             {{"residual_max", rep.azimuthal_max}, {"window", w(rep.ph)}, {"params", t.m.params().to_json()}}},
            {"total_residual_max", rep.total_max},
            {"consistent", rep.consistent}};
}

enum class SphericalComponent { radial, polar, azimuthal };

inline void write_component_csv(std::ostream& os, const SphericalActionTriple& t, SphericalComponent c,
                                Window w, std::size_t n) {
    os << "coord,action,momentum,residual\n";
    const ReducedActionField& f = c == SphericalComponent::radial ? t.z : (c == SphericalComponent::polar ? t.l : t.m);
    for (std::size_t i = 0; i < n; ++i) {
        double x = w.lo + (w.hi - w.lo) * static_cast<double>(i) / std::max<std::size_t>(n - 1, 1);
        double res = c == SphericalComponent::radial  ? radial_qshje_residual(t, x).abs
                     : c == SphericalComponent::polar ? polar_qshje_residual(t, x).abs
                                                      : azimuthal_qshje_residual(t, x).abs;
        io::write_row(os, {x, f.s0(x), f.momentum(x), res});
    }
}

}  // namespace qtraj
