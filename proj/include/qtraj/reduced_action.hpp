#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "basis.hpp"
#include "error.hpp"
#include "io.hpp"
#include "microstate.hpp"
#include "potential.hpp"
#include "schrodinger.hpp"
#include "schwarzian.hpp"

namespace qtraj {

struct CombinedPoint {
    double p1 = 0, d1 = 0, p2 = 0, d2 = 0, q = 0;
};

struct MomentumJet {
    double p = 0, dp = 0, d2p = 0;
};

struct Residual {
    double abs = 0, rel = 0;
};

inline Residual make_residual(double r, double E) { return {r, std::abs(r) / std::max(std::abs(E), 1.0)}; }

inline CombinedPoint combine(const BasisPoint& b, const Mat2& m) {
    return {m.m11 * b.t1 + m.m12 * b.t2, m.m11 * b.d1 + m.m12 * b.d2, m.m21 * b.t1 + m.m22 * b.t2,
            m.m21 * b.d1 + m.m22 * b.d2, b.q};
}

struct CombinedSamples {
    std::vector<double> phi1, dphi1, phi2, dphi2;
    double wronskian = 0.0;
};

// phi1, phi2 on the pair grid; W(phi1, phi2) = det(M) W(theta1, theta2).
inline CombinedSamples combine_pair(const SolutionPair& pair, const MicrostateParams& params) {
    params.validate("combine_pair");
    Mat2 m = params.matrix();
    CombinedSamples c;
    const std::size_t n = pair.grid.size();
    c.phi1.resize(n); c.dphi1.resize(n); c.phi2.resize(n); c.dphi2.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        BasisPoint b{pair.sol1.value[i], pair.sol1.deriv[i], pair.sol2.value[i], pair.sol2.deriv[i], 0.0};
        auto p = combine(b, m);
        c.phi1[i] = p.p1; c.dphi1[i] = p.d1; c.phi2[i] = p.p2; c.dphi2[i] = p.d2;
    }
    c.wronskian = m.det() * pair.wronskian;
    if (c.wronskian == 0.0)
        throw Error(ErrorKind::parameter, "reduced_action", "combine_pair", "combination is dependent");
    return c;
}

// S0 = hbar atan(phi2/phi1), unwrapped, and P = hbar W(phi1,phi2)/(phi1^2 + phi2^2).
class ReducedActionField {
public:
    ReducedActionField(PairBasis basis, MicrostateParams params, std::optional<Grid> grid = std::nullopt)
        : basis_(std::move(basis)), params_(params) {
        params_.validate("reduced_action");
        if (grid)
            grid_ = *grid;
        else if (auto d = basis_.domain())
            grid_ = *d;
        else
            throw Error(ErrorKind::config, "reduced_action", "reduced_action",
                        "an analytic pair needs an explicit sampling grid");
        if (auto d = basis_.domain())
            if (grid_.x_min() < d->x_min() || grid_.x_max() > d->x_max())
                throw Error(ErrorKind::domain, "reduced_action", "reduced_action", "grid exceeds pair domain");
        m_ = params_.matrix();
        wphi_ = m_.det() * basis_.wronskian();
        if (wphi_ == 0.0)
            throw Error(ErrorKind::parameter, "reduced_action", "reduced_action", "combination is dependent");
        const double hbar = basis_.units().hbar;
        const std::size_t n = grid_.size();
        s0_.resize(n);
        p_.resize(n);
        const bool on_nodes = basis_.domain() && basis_.domain()->size() == n &&
                              basis_.domain()->x_min() == grid_.x_min();
        double prev_angle = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            auto c = on_nodes ? combine(basis_.at_node(i), m_) : combined(grid_[i]);
            double den = c.p1 * c.p1 + c.p2 * c.p2;
            p_[i] = hbar * wphi_ / den;
            double angle = std::atan2(c.p2, c.p1);
            if (i == 0) {
                s0_[0] = hbar * std::atan(c.p2 / c.p1);
            } else {
                double d = angle - prev_angle;
                d -= 2.0 * std::numbers::pi * std::round(d / (2.0 * std::numbers::pi));
                if (std::abs(d) >= 0.5 * std::numbers::pi || (d != 0.0 && (d > 0) != (wphi_ > 0)))
                    throw Error(ErrorKind::integration, "reduced_action", "reduced_action",
                                "phase advances too fast for the grid; refine it", grid_[i]);
                s0_[i] = s0_[i - 1] + hbar * d;
            }
            prev_angle = angle;
        }
    }

    const Grid& grid() const { return grid_; }
    const PairBasis& basis() const { return basis_; }
    const MicrostateParams& params() const { return params_; }
    const std::vector<double>& s0_samples() const { return s0_; }
    const std::vector<double>& p_samples() const { return p_; }
    double energy() const { return basis_.energy(); }
    const UnitSystem& units() const { return basis_.units(); }
    const PotentialSpec& spec() const { return basis_.spec(); }
    double phi_wronskian() const { return wphi_; }
    bool contains(double x) const { return grid_.contains(x); }

    CombinedPoint combined(double x) const { return combine(basis_.at(x), m_); }

    PotentialJet potential(double x) const { return potential_jet(basis_.spec(), x, basis_.units()); }

    double momentum(double x) const {
        auto c = combined(x);
        return units().hbar * wphi_ / (c.p1 * c.p1 + c.p2 * c.p2);
    }

    // P, P', P'' from the quotient formula with phi'' = q phi
    MomentumJet momentum_jet(double x) const {
        auto c = combined(x);
        double D = c.p1 * c.p1 + c.p2 * c.p2;
        double D1 = 2.0 * (c.p1 * c.d1 + c.p2 * c.d2);
        double D2 = 2.0 * (c.d1 * c.d1 + c.d2 * c.d2 + c.q * D);
        double P = units().hbar * wphi_ / D;
        double r = D1 / D;
        return {P, -P * r, P * (2.0 * r * r - D2 / D)};
    }

    double s0(double x) const {
        if (!grid_.contains(x))
            throw Error(ErrorKind::domain, "reduced_action", "reduced_action", "position outside field grid", x);
        std::size_t i = grid_.nearest(x);
        auto c = combined(x);
        const double hbar = units().hbar;
        double guess = s0_[i] + (x - grid_[i]) * p_[i];
        double a = hbar * std::atan(c.p2 / c.p1);
        double period = std::numbers::pi * hbar;
        return a + period * std::round((guess - a) / period);
    }

private:
    PairBasis basis_;
    MicrostateParams params_;
    Grid grid_;
    Mat2 m_;
    double wphi_ = 0.0;
    std::vector<double> s0_, p_;
};

// the pair does not enter: P depends on the parameters only through M^T M and det M
inline MicrostateParams params_convert(const MicrostateParams& p, const SolutionPair&) { return params_convert(p); }

inline double reduced_action(const ReducedActionField& f, double x) { return f.s0(x); }
inline double conjugate_momentum(const ReducedActionField& f, double x) { return f.momentum(x); }

// Floyd's P = sqrt(2m)/(a phi^2 + b theta^2 + c phi theta) with phi = theta1, theta = theta2.
inline double floyd_momentum(const PairBasis& basis, const Floyd& f, double x) {
    MicrostateParams{f}.validate("floyd_momentum");
    const auto& u = basis.units();
    double required = std::sqrt(2.0 * u.mass) / (u.hbar * std::sqrt(f.disc()));
    if (std::abs(std::abs(basis.wronskian()) - required) > 1e-6 * required)
        throw Error(ErrorKind::parameter, "reduced_action", "floyd_momentum",
                    "pair must be normalized to Wronskian +/-" + io::fmt(required) + ", got " +
                        io::fmt(basis.wronskian()));
    auto b = basis.at(x);
    return std::sqrt(2.0 * u.mass) / (f.a * b.t1 * b.t1 + f.b * b.t2 * b.t2 + f.c * b.t1 * b.t2);
}

// Bracket (minus the Schwarzian) of S0 from the analytic momentum jet: {S0,x} = 3/2 (P'/P)^2 - P''/P.
inline double action_bracket(const MomentumJet& j) {
    double r = j.dp / j.p;
    return 1.5 * r * r - j.d2p / j.p;
}

inline Residual qshje_residual(const ReducedActionField& f, double x) {
    const auto& u = f.units();
    auto j = f.momentum_jet(x);
    double V = f.potential(x).v;
    double r = j.p * j.p / (2.0 * u.mass) - (u.hbar * u.hbar / (4.0 * u.mass)) * action_bracket(j) + V - f.energy();
    return make_residual(r, f.energy());
}

// S0 samples with uniform spacing: (S0')^2 + (hbar^2/2)({e^{2iS0/hbar}} - {S0}) with the bracket
// {T,x} = 3/2 (T''/T')^2 - T'''/T', which vanishes identically.
inline double basic_identity_residual(std::span<const double> s0, std::size_t i, double h, double hbar) {
    std::vector<std::complex<double>> e(s0.size());
    for (std::size_t k = 0; k < s0.size(); ++k) e[k] = std::exp(std::complex<double>(0.0, 2.0 * s0[k] / hbar));
    auto ds = central_derivs<double>(s0, i, h);
    double bs = schwarzian_from_derivs(ds);
    std::complex<double> be = schwarzian<std::complex<double>>(std::span<const std::complex<double>>(e), i, h);
    std::complex<double> r = ds.d1 * ds.d1 + 0.5 * hbar * hbar * (be - bs);
    return std::abs(r);
}

// default stencil: a fixed fraction of the local phase length, balancing truncation against roundoff
inline double basic_identity_residual(const ReducedActionField& f, double x, double h = 0.0) {
    if (h <= 0.0) h = 4e-3 * std::min(1.0, f.units().hbar / std::abs(f.momentum(x)));
    std::array<double, 7> s{};
    for (int k = -3; k <= 3; ++k) s[k + 3] = f.s0(x + k * h);
    return basic_identity_residual(std::span<const double>(s), 3, h, f.units().hbar);
}

// V_B = -(hbar^2/2m) A''/A with A = P^{-1/2}
inline double bohm_quantum_potential(const ReducedActionField& f, double x) {
    const auto& u = f.units();
    auto j = f.momentum_jet(x);
    double P = std::abs(j.p), sgn = j.p > 0 ? 1.0 : -1.0;
    double dP = sgn * j.dp, d2P = sgn * j.d2p;
    double A = std::pow(P, -0.5);
    double A2 = 0.75 * std::pow(P, -2.5) * dP * dP - 0.5 * std::pow(P, -1.5) * d2P;
    return -(u.hbar * u.hbar / (2.0 * u.mass)) * A2 / A;
}

// same quantity as -(hbar^2/4m){S0,x}
inline double bohm_quantum_potential_bracket(const ReducedActionField& f, double x) {
    const auto& u = f.units();
    return -(u.hbar * u.hbar / (4.0 * u.mass)) * action_bracket(f.momentum_jet(x));
}

// U + (hbar^2/8m) U''/(E-U) + (5 hbar^2/32m)(U'/(E-U))^2 - V with U = V + V_B differenced.
inline Residual modified_potential_residual(const ReducedActionField& f, double E, double x, double h = 0.0) {
    const auto& u = f.units();
    if (h <= 0.0) h = std::max(f.grid().spacing(), 1e-3);
    auto U = [&](double y) { return f.potential(y).v + bohm_quantum_potential(f, y); };
    double um2 = U(x - 2 * h), um1 = U(x - h), u0 = U(x), up1 = U(x + h), up2 = U(x + 2 * h);
    double d1 = (um2 - 8 * um1 + 8 * up1 - up2) / (12 * h);
    double d2 = (-um2 + 16 * um1 - 30 * u0 + 16 * up1 - up2) / (12 * h * h);
    double w = E - u0;
    if (std::abs(w) < 1e-10)
        throw Error(ErrorKind::singularity, "reduced_action", "modified_potential_residual", "E - U vanishes", x);
    double hb2 = u.hbar * u.hbar / u.mass;
    double r = u0 + hb2 / 8.0 * d2 / w + 5.0 * hb2 / 32.0 * (d1 / w) * (d1 / w) - f.potential(x).v;
    return make_residual(r, E);
}

inline Residual modified_potential_residual(const ReducedActionField& f, double x) {
    return modified_potential_residual(f, f.energy(), x);
}

// psi = |P|^{-1/2} (alpha e^{i S0/hbar} + beta e^{-i S0/hbar})
inline std::complex<double> reconstruct_wavefunction(const ReducedActionField& f, std::complex<double> alpha,
                                                     std::complex<double> beta, double x) {
    if (alpha == 0.0 && beta == 0.0)
        throw Error(ErrorKind::parameter, "reduced_action", "reconstruct_wavefunction", "alpha = beta = 0");
    // e^{iS0/hbar} / sqrt|P| = +-(phi1 + i phi2) / sqrt(hbar |W|), sign from the branch of S0;
    // avoids cos(S0/hbar)/sqrt|P| cancelling where P is tiny
    auto c = f.combined(x);
    const double hbar = f.units().hbar;
    double branch = std::round((f.s0(x) / hbar - std::atan(c.p2 / c.p1)) / std::numbers::pi);
    double sign = (static_cast<long long>(branch) % 2 == 0 ? 1.0 : -1.0) * (c.p1 < 0 ? -1.0 : 1.0);
    std::complex<double> e = sign * std::complex<double>(c.p1, c.p2) / std::sqrt(hbar * std::abs(f.phi_wronskian()));
    return alpha * e + beta * std::conj(e);
}

// J = ((|alpha|^2 - |beta|^2)/m) A^2 P with A^2 = 1/|P|
inline double probability_current(const ReducedActionField& f, std::complex<double> alpha,
                                  std::complex<double> beta, double x) {
    double P = f.momentum(x);
    return (std::norm(alpha) - std::norm(beta)) / f.units().mass * P / std::abs(P);
}

inline void write_field_csv(std::ostream& os, const ReducedActionField& f) {
    os << "x,s0,p,v_b,f\n";
    const auto& u = f.units();
    for (std::size_t i = 0; i < f.grid().size(); ++i) {
        double x = f.grid()[i];
        double P = f.p_samples()[i];
        double w = f.energy() - f.potential(x).v;
        double fv = std::abs(w) < 1e-12 ? std::nan("") : P * P / (2.0 * u.mass * w);
        io::write_row(os, {x, f.s0_samples()[i], P, bohm_quantum_potential(f, x), fv});
    }
}

}  // namespace qtraj
