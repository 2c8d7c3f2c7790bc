#pragma once

#include <cmath>
#include <memory>
#include <optional>
#include <variant>
#include <vector>

#include <boost/math/interpolators/quintic_hermite.hpp>

#include "error.hpp"
#include "microstate.hpp"
#include "potential.hpp"
#include "schrodinger.hpp"
#include "units.hpp"

namespace qtraj {

// theta1, theta2 and first derivatives at a point, plus q = (2m/hbar^2)(V - E)
struct BasisPoint {
    double t1 = 0, d1 = 0, t2 = 0, d2 = 0, q = 0;
};

namespace detail {
using BasisInterp = boost::math::interpolators::cardinal_quintic_hermite<std::vector<double>>;
struct AnalyticBasis {
    double k = 0, k2 = 0, x0 = 0;
    Mat2 coeff;
};
struct SampledBasis {
    Grid grid{0.0, 1.0, 9};
    std::shared_ptr<BasisInterp> i1, i2;
    std::shared_ptr<SolutionPair> pair;
};
}  // namespace detail

// A solution pair evaluable anywhere on its domain: either the analytic constant-potential
// pair, or a sampled Numerov pair with quintic Hermite interpolation (psi'' = q psi at nodes).
class PairBasis {
public:
    // theta1 = c11 C + c12 S, theta2 = c21 C + c22 S with C, S the standard solutions of
    // psi'' = -k^2 psi about x0 (cos/sin, cosh/sinh for E < 0, 1 and x - x0 for E = 0).
    static PairBasis analytic_free(double E, const UnitSystem& u, Mat2 coeff = {}, double x0 = 0.0) {
        u.validate();
        PairBasis b;
        Analytic a;
        a.k2 = u.kappa() * E;
        a.k = std::sqrt(std::abs(a.k2));
        a.coeff = coeff;
        a.x0 = x0;
        b.data_ = a;
        b.energy_ = E;
        b.units_ = u;
        b.spec_ = PotentialSpec::free();
        double wstd = a.k2 == 0.0 ? 1.0 : a.k;  // W(C, S)
        b.wronskian_ = coeff.det() * wstd;
        if (b.wronskian_ == 0.0)
            throw Error(ErrorKind::parameter, "schrodinger", "analytic_free", "dependent analytic pair");
        return b;
    }

    // Default free pair (theta1, theta2) = (cos kx, sin kx), W = k.
    static PairBasis free_cos_sin(double E, const UnitSystem& u) { return analytic_free(E, u); }

    static PairBasis sampled(const SolutionPair& p) {
        PairBasis b;
        Sampled s;
        s.grid = p.grid;
        auto make = [&](const SolutionSamples& sol) {
            std::vector<double> y = sol.value, dy = sol.deriv, d2(sol.value.size());
            for (std::size_t i = 0; i < d2.size(); ++i) d2[i] = sol.q[i] * sol.value[i];
            return std::make_shared<Interp>(std::move(y), std::move(dy), std::move(d2), p.grid.x_min(),
                                            p.grid.spacing());
        };
        s.i1 = make(p.sol1);
        s.i2 = make(p.sol2);
        s.pair = std::make_shared<SolutionPair>(p);
        b.data_ = s;
        b.energy_ = p.energy;
        b.units_ = p.sol1.units;
        b.spec_ = p.sol1.spec;
        b.wronskian_ = p.wronskian;
        return b;
    }

    double energy() const { return energy_; }
    const UnitSystem& units() const { return units_; }
    const PotentialSpec& spec() const { return spec_; }
    double wronskian() const { return wronskian_; }
    bool is_analytic() const { return std::holds_alternative<Analytic>(data_); }
    const SolutionPair* pair() const {
        if (auto* s = std::get_if<Sampled>(&data_)) return s->pair.get();
        return nullptr;
    }
    std::optional<Grid> domain() const {
        if (auto* s = std::get_if<Sampled>(&data_)) return s->grid;
        return std::nullopt;
    }
    bool contains(double x) const {
        if (auto* s = std::get_if<Sampled>(&data_)) return s->grid.contains(x);
        return std::isfinite(x);
    }

    BasisPoint at(double x) const {
        if (auto* a = std::get_if<Analytic>(&data_)) {
            double u = x - a->x0, C, S, dC, dS;
            if (a->k2 > 0) {
                double c = std::cos(a->k * u), s = std::sin(a->k * u);
                C = c; S = s; dC = -a->k * s; dS = a->k * c;
            } else if (a->k2 < 0) {
                double c = std::cosh(a->k * u), s = std::sinh(a->k * u);
                C = c; S = s; dC = a->k * s; dS = a->k * c;
            } else {
                C = 1.0; S = u; dC = 0.0; dS = 1.0;
            }
            const Mat2& m = a->coeff;
            return {m.m11 * C + m.m12 * S, m.m11 * dC + m.m12 * dS, m.m21 * C + m.m22 * S,
                    m.m21 * dC + m.m22 * dS, -a->k2};
        }
        const auto& s = std::get<Sampled>(data_);
        if (!s.grid.contains(x))
            throw Error(ErrorKind::domain, "reduced_action", "evaluate", "position outside pair grid", x);
        double q = units_.kappa() * (potential_value(spec_, x, units_) - energy_);
        return {(*s.i1)(x), s.i1->prime(x), (*s.i2)(x), s.i2->prime(x), q};
    }

    // exact node values for a sampled pair
    BasisPoint at_node(std::size_t i) const {
        const auto& s = std::get<Sampled>(data_);
        const auto& p = *s.pair;
        return {p.sol1.value[i], p.sol1.deriv[i], p.sol2.value[i], p.sol2.deriv[i], p.sol1.q[i]};
    }

private:
    using Interp = detail::BasisInterp;
    using Analytic = detail::AnalyticBasis;
    using Sampled = detail::SampledBasis;
    std::variant<Analytic, Sampled> data_;
    double energy_ = 0, wronskian_ = 0;
    UnitSystem units_;
    PotentialSpec spec_ = PotentialSpec::free();
};

}  // namespace qtraj
