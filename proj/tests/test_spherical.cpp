#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "qtraj/spherical.hpp"

using namespace qtraj;

namespace {

constexpr double pi = std::numbers::pi;

Grid polar_grid(double edge = 0.1) { return Grid::with_spacing(edge, pi - edge, 1e-3); }

// free l = 0 triple: analytic radial (cos r, sin r) at E = 1/2, numeric polar, {1, phi} azimuth
SphericalActionTriple free_s_triple(const MicrostateParams& radial = MicrostateParams::floyd(1, 1, 0)) {
    SphericalQuantumNumbers qn(0, 0);
    Grid r = Grid::with_spacing(0.5, 10.0, 1e-3);
    ReducedActionField z(PairBasis::free_cos_sin(0.5, {}), radial, r);
    auto l = polar_action_field(polar_pair(qn, polar_grid()), MicrostateParams::mu_nu(0.4, -0.7));
    auto m = azimuthal_action_field(qn, MicrostateParams::mu_nu(0.5, 0.3), Grid(0.0, 2 * pi, 2001));
    return make_triple(qn, PotentialSpec::free(), 0.5, std::move(z), std::move(l), std::move(m));
}

PotentialSpec coulomb() {
    std::vector<double> x, v;
    for (int i = 0; i <= 8000; ++i) {
        x.push_back(0.05 + i * (45.0 - 0.05) / 8000);
        v.push_back(-1.0 / x.back());
    }
    return PotentialSpec::tabulated(x, v);
}

}  // namespace

TEST(QuantumNumbers, Validation) {
    EXPECT_THROW(SphericalQuantumNumbers(1, 2), Error);
    EXPECT_THROW(SphericalQuantumNumbers(-1, 0), Error);
    EXPECT_DOUBLE_EQ(SphericalQuantumNumbers(3, -2).lambda(), 12.0);
}

TEST(Transform, RadialFreeSine) {
    Grid r = Grid::with_spacing(0.1, 6.0, 1e-3);
    std::vector<double> R(r.size());
    for (std::size_t i = 0; i < r.size(); ++i) R[i] = std::sin(r[i]) / r[i];
    auto X = radial_transform(R, r);
    for (std::size_t i = 0; i < r.size(); i += 997) EXPECT_NEAR(X[i], std::sin(r[i]), 1e-15);
    EXPECT_LT(radial_equation_residual(X, r, PotentialSpec::free(), {0, 0}, 0.5), 1e-8);
    // the same X is not a solution once a centrifugal term is present
    EXPECT_GT(radial_equation_residual(X, r, PotentialSpec::free(), {1, 0}, 0.5), 1e-2);
}

TEST(Transform, RadialRejectsOrigin) {
    Grid r(0.0, 1.0, 11);
    EXPECT_THROW(radial_transform(std::vector<double>(11, 1.0), r), Error);
}

TEST(Transform, EffectivePotential) {
    auto s = radial_spec(PotentialSpec::free(), {1, 0});
    EXPECT_DOUBLE_EQ(potential_value(s, 1.0, {}), 1.0);
    EXPECT_DOUBLE_EQ(potential_value(radial_spec(PotentialSpec::harmonic(1.0), {0, 0}), 2.0, {}), 2.0);
}

TEST(Transform, PolarLegendre) {
    Grid th = polar_grid();
    std::vector<double> T1(th.size()), T0(th.size(), 1.0);
    for (std::size_t i = 0; i < th.size(); ++i) T1[i] = std::cos(th[i]);
    EXPECT_LT(polar_equation_residual(polar_transform(T1, th), th, {1, 0}), 1e-6);
    EXPECT_LT(polar_equation_residual(polar_transform(T0, th), th, {0, 0}), 1e-6);
    EXPECT_GT(polar_equation_residual(polar_transform(T1, th), th, {0, 0}), 1e-2);
}

TEST(Transform, PolarRejectsPoles) {
    Grid th(0.0, 1.0, 11);
    EXPECT_THROW(polar_transform(std::vector<double>(11, 1.0), th), Error);
}

TEST(Radial, FreeClassical) {
    Grid r = Grid::with_spacing(0.5, 10.0, 1e-3);
    auto pair = radial_pair(PotentialSpec::free(), {0, 0}, 0.5, r);
    // at k = 1 the pair is (cos, sin) about r_min with W = 1, so a = b = 1, c = 0 is classical
    auto f = radial_action_field(pair, MicrostateParams::floyd(1, 1, 0));
    double z0 = f.s0(1.0);
    for (double x : {2.0, 4.5, 9.0}) EXPECT_NEAR(f.s0(x) - z0, x - 1.0, 1e-6);
}

TEST(Radial, MatchesOneDimensionalFree) {
    Grid r = Grid::with_spacing(0.5, 10.0, 1e-3);
    auto pair = radial_pair(PotentialSpec::free(), {0, 0}, 0.5, r);
    auto p1 = make_pair(PotentialSpec::free(), 0.5, r, {}, 1.0);
    auto params = MicrostateParams::mu_nu(0.3, 1.9);
    auto z = radial_action_field(pair, params);
    ReducedActionField f(PairBasis::sampled(p1), params);
    for (std::size_t i = 0; i < r.size(); i += 1234) {
        EXPECT_NEAR(z.s0_samples()[i], f.s0_samples()[i], 1e-12);
        EXPECT_NEAR(z.p_samples()[i], f.p_samples()[i], 1e-12);
    }
}

TEST(Radial, QuadratureRoute) {
    // X1 = sin r on (0.2, 3.0), l = 0; partner through the anchored construction
    Grid r = Grid::with_spacing(0.2, 3.0, 1e-3);
    auto spec = radial_spec(PotentialSpec::free(), {0, 0});
    auto x1 = integrate_schrodinger(spec, 0.5, r, std::sin(0.2), std::cos(0.2));
    auto rec = bound_state_record(x1, 0);
    Floyd fl{2.0, 1.5, 0.8, 1};
    auto z = radial_action_field(rec.pair(), MicrostateParams{fl});
    double worst = 0;
    for (double x : {0.3, 0.9, 1.6, 2.2, 2.9}) {
        double d = z.s0(x) - radial_action_quadrature(x1, fl, x);
        d -= pi * std::round(d / pi);
        worst = std::max(worst, std::abs(d));
    }
    EXPECT_LT(worst, 1e-6);
}

TEST(Radial, CoulombResidual) {
    auto V = coulomb();
    SphericalQuantumNumbers qn(1, 1);
    Grid r = Grid::with_spacing(0.1, 40.0, 1e-3);
    auto E = find_bound_energies(radial_spec(V, qn), r, {}, 1)[0];
    EXPECT_NEAR(E, -0.125, 1e-4);
    // the pair itself lives on a shorter window: forbidden-region growth spoils it beyond r ~ 25
    Grid rp = Grid::with_spacing(0.1, 24.0, 1e-3);
    auto z = radial_action_field(radial_pair(V, qn, E, rp, {}, 4.0), MicrostateParams::floyd(1, 1, 0));
    double worst = 0;
    for (double x = 0.5; x < 20.0; x += 0.37) worst = std::max(worst, std::abs(qshje_residual(z, x).abs));
    EXPECT_LT(worst, 1e-5);
}

TEST(Polar, LegendrePartnerResidual) {
    SphericalQuantumNumbers qn(1, 0);
    Grid th = polar_grid(0.2);
    double t0 = th.x_min(), s = std::sin(t0);
    // T_cal = sqrt(sin) cos and its derivative at the left edge
    double v0 = std::sqrt(s) * std::cos(t0), d0 = std::cos(t0) * std::cos(t0) / (2 * std::sqrt(s)) - std::pow(s, 1.5);
    auto phys = integrate_schrodinger(PotentialSpec::polar_effective(0), polar_energy(qn, {}), th, v0, d0);
    for (std::size_t i = 0; i < th.size(); i += 500)
        EXPECT_NEAR(phys.value[i], std::sqrt(std::sin(th[i])) * std::cos(th[i]), 1e-8);
    auto rec = bound_state_record(phys, 0);
    auto l = polar_action_field(rec.pair(), MicrostateParams::floyd(1.3, 0.8, 0.4));
    auto t = make_triple(qn, PotentialSpec::free(), 1.0, l, l, l);
    double worst = 0, prev = -1e300;
    for (double x = 0.25; x < pi - 0.25; x += 0.05) {
        worst = std::max(worst, polar_qshje_residual(t, x).rel);
        double v = l.s0(x);
        EXPECT_GT(v, prev);
        prev = v;
    }
    EXPECT_LT(worst, 1e-5);
}

TEST(Polar, IdentityCombination) {
    SphericalQuantumNumbers qn(2, 1);
    Grid th = polar_grid(0.15);
    auto l = polar_action_field(polar_pair(qn, th), MicrostateParams::floyd(2.0, 1.0, -0.5));
    for (double x : {0.4, 1.0, 1.7, 2.6}) EXPECT_LT(std::abs(polar_identity_residual(l, qn, x)), 1e-6) << x;
    // wrong lambda: combination no longer vanishes
    EXPECT_GT(std::abs(polar_identity_residual(l, {3, 1}, 1.0)), 1e-2);
}

TEST(Azimuthal, ClassicalIsLinear) {
    for (int m : {1, 2, -3}) {
        SphericalQuantumNumbers qn(3, m);
        auto f = azimuthal_action_field(qn, MicrostateParams::floyd(1, 1, 0), Grid(0.0, 2 * pi, 4001));
        double c = f.s0(0.0);
        for (double ph : {0.3, 1.1, 2.9, 5.7}) EXPECT_NEAR(f.s0(ph) - c, m * ph, 1e-8) << m;
    }
}

TEST(Azimuthal, RandomResidual) {
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> d(-2.0, 2.0);
    SphericalQuantumNumbers qn(2, 2);
    Grid g(0.0, 2 * pi, 4001);
    for (int k = 0; k < 10; ++k) {
        double eps = d(rng), tau = d(rng);
        if (std::abs(eps * tau - 1.0) < 0.05) continue;
        auto f = azimuthal_action_field(qn, MicrostateParams::mu_nu(eps, tau), g);
        auto t = make_triple(qn, PotentialSpec::free(), 1.0, f, f, f);
        for (double ph : {0.2, 1.9, 3.3, 6.0}) EXPECT_LT(azimuthal_qshje_residual(t, ph).rel, 1e-7);
    }
    EXPECT_THROW(azimuthal_action_field(qn, MicrostateParams::mu_nu(2.0, 0.5), g), Error);
}

TEST(Azimuthal, ZeroUsesAffineBasis) {
    SphericalQuantumNumbers qn(1, 0);
    auto f = azimuthal_action_field(qn, MicrostateParams::mu_nu(0.5, 0.3), Grid(0.0, 2 * pi, 2001));
    // phi1 = nu + phi, phi2 = 1 + mu phi
    for (double ph : {0.5, 2.0, 4.0}) {
        double want = std::atan((1 + 0.5 * ph) / (0.3 + ph));
        double d = f.s0(ph) - want;
        EXPECT_NEAR(d - pi * std::round(d / pi), 0.0, 1e-12);
    }
    auto t = make_triple(qn, PotentialSpec::free(), 1.0, f, f, f);
    for (double ph : {0.5, 2.0, 4.0}) EXPECT_LT(std::abs(azimuthal_qshje_residual(t, ph).abs), 1e-7);
}

TEST(Total, SumAndReference) {
    auto t = free_s_triple();
    double s = total_action(t, 2.0, 1.0, 3.0);
    EXPECT_DOUBLE_EQ(s, t.z.s0(2.0) + t.l.s0(1.0) + t.m.s0(3.0));
    t.reference = std::array<double, 3>{1.0, 1.5, 0.5};
    EXPECT_DOUBLE_EQ(total_action(t, 1.0, 1.5, 0.5), 0.0);
}

TEST(Total, GradientMatchesDifferences) {
    auto t = free_s_triple(MicrostateParams::floyd(1.4, 0.9, 0.3));
    double r = 3.0, th = 1.2, ph = 2.5, h = 1e-4;
    auto g = total_action_gradient(t, r, th, ph);
    double dr = (total_action(t, r + h, th, ph) - total_action(t, r - h, th, ph)) / (2 * h);
    double dt = (total_action(t, r, th + h, ph) - total_action(t, r, th - h, ph)) / (2 * h) / r;
    double dp = (total_action(t, r, th, ph + h) - total_action(t, r, th, ph - h)) / (2 * h) / (r * std::sin(th));
    EXPECT_NEAR(g[0], dr, 1e-6);
    EXPECT_NEAR(g[1], dt, 1e-6);
    EXPECT_NEAR(g[2], dp, 1e-6);
}

TEST(Total, FreeResidual) {
    auto t = free_s_triple();
    auto rep = spherical_report(t, {1.0, 9.0}, {0.3, pi - 0.3}, {0.1, 6.0});
    EXPECT_LT(rep.total_max, 1e-5);
    EXPECT_TRUE(rep.consistent);
}

TEST(Total, CoulombFullStack) {
    auto V = coulomb();
    SphericalQuantumNumbers qn(1, 1);
    Grid r = Grid::with_spacing(0.1, 40.0, 1e-3);
    double E = find_bound_energies(radial_spec(V, qn), r, {}, 1)[0];
    Grid rp = Grid::with_spacing(0.1, 24.0, 1e-3);
    auto z = radial_action_field(radial_pair(V, qn, E, rp, {}, 4.0), MicrostateParams::floyd(1, 1, 0));
    auto l = polar_action_field(polar_pair(qn, polar_grid()), MicrostateParams::floyd(1, 2, 0.5));
    auto m = azimuthal_action_field(qn, MicrostateParams::floyd(1, 1, 0), Grid(0.0, 2 * pi, 2001));
    auto t = make_triple(qn, V, E, z, l, m);
    double worst = 0;
    for (double x : {0.8, 2.0, 5.0, 11.0})
        for (double th : {0.4, 1.3, 2.5})
            for (double ph : {0.2, 3.0}) worst = std::max(worst, std::abs(total_qshje_residual(t, x, th, ph).abs));
    EXPECT_LT(worst / std::abs(E), 1e-4);
}

TEST(Total, LambdaMismatchDetected) {
    SphericalQuantumNumbers radial_qn(1, 0), polar_qn(0, 0);
    Grid r = Grid::with_spacing(0.5, 10.0, 1e-3);
    auto z = radial_action_field(radial_pair(PotentialSpec::free(), radial_qn, 0.5, r),
                                 MicrostateParams::floyd(1, 1, 0));
    auto l = polar_action_field(polar_pair(polar_qn, polar_grid()), MicrostateParams::floyd(1, 1, 0));
    auto m = azimuthal_action_field(polar_qn, MicrostateParams::mu_nu(0.5, 0.3), Grid(0.0, 2 * pi, 2001));
    auto t = make_triple(radial_qn, PotentialSpec::free(), 0.5, z, l, m);
    // expected offset (lambda_polar - lambda_radial) hbar^2 / 2mr^2 = -1/r^2
    for (double x : {1.0, 2.0, 4.0}) EXPECT_NEAR(total_qshje_residual(t, x, 1.1, 2.0).abs, -1.0 / (x * x), 1e-5);
    auto rep = spherical_report(t, {1.0, 9.0}, {0.3, pi - 0.3}, {0.1, 6.0});
    EXPECT_FALSE(rep.consistent);
}

TEST(Io, ReportAndCsv) {
    auto t = free_s_triple();
    auto rep = spherical_report(t, {1.0, 9.0}, {0.3, pi - 0.3}, {0.1, 6.0}, 4);
    auto j = to_json(rep, t);
    EXPECT_TRUE(j.contains("radial") && j["radial"].contains("residual_max") && j["polar"].contains("window"));
    std::ostringstream os;
    write_component_csv(os, t, SphericalComponent::polar, {0.3, 2.8}, 5);
    std::string out = os.str();
    EXPECT_EQ(out.substr(0, out.find('\n')), "coord,action,momentum,residual");
    EXPECT_EQ(std::count(out.begin(), out.end(), '\n'), 6);
}
