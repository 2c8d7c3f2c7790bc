#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "qtraj/dynamics.hpp"

using namespace qtraj;

namespace {

constexpr double kE = 0.5;

Grid free_grid() { return Grid::with_spacing(-20.0, 40.0, 1e-2); }

ReducedActionField harmonic_field(MicrostateParams params) {
    Grid g = Grid::with_spacing(-5.0, 5.0, 1e-3);
    auto p = make_pair(PotentialSpec::harmonic(1.0), 0.5, g, {}, 1.0, g.nearest(0.0));
    return ReducedActionField(PairBasis::sampled(p), params);
}

}  // namespace

TEST(FFunction, FreeClassicalIsOne) {
    Grid g(-2.0, 2.0, 101);
    ReducedActionField f(PairBasis::free_cos_sin(kE, {}), MicrostateParams::floyd(1, 1, 0), g);
    for (double x : {-1.5, 0.0, 1.0}) EXPECT_NEAR(f_function(f, x), 1.0, 1e-14);
}

TEST(FFunction, NegativeInForbiddenRegion) {
    auto f = harmonic_field(MicrostateParams::floyd(1, 1, 0));
    EXPECT_GT(f_function(f, 0.5), 0.0);
    EXPECT_LT(f_function(f, 1.3), 0.0);
    EXPECT_LT(f_function(f, -2.0), 0.0);
    EXPECT_THROW(f_function(f, 1.0), Error);
}

TEST(FFunction, DerivativeMatchesDifference) {
    auto f = harmonic_field(MicrostateParams::mu_nu(0.2, -1.1));
    double h = 1e-4;
    for (double x : {-0.7, 0.1, 0.6})
        EXPECT_NEAR(f_derivative(f, x), (f_function(f, x + h) - f_function(f, x - h)) / (2 * h), 1e-6);
}

TEST(Velocity, DispersionSigns) {
    Grid g(-2.0, 2.0, 101);
    ReducedActionField f(PairBasis::free_cos_sin(kE, {}), MicrostateParams::floyd(1, 1, 0), g);
    EXPECT_NEAR(velocity(f, 0.3), std::sqrt(2 * kE), 1e-14);
    auto h = harmonic_field(MicrostateParams::mu_nu(0.2, -1.1));
    EXPECT_EQ(velocity(h, 1.0), 0.0);
    double sp = h.momentum(0.0) > 0 ? 1.0 : -1.0;
    EXPECT_GT(sp * velocity(h, 0.4), 0.0);
    EXPECT_LT(sp * velocity(h, 1.5), 0.0);
}

TEST(ClosedForm, ClassicalReduction) {
    for (double t = 0; t <= 10.0; t += 0.25)
        EXPECT_NEAR(free_particle_closed_form(kE, 1.0, 0.0, 0.7, 0.0, t), 0.7 + t, 1e-12);
    EXPECT_THROW(free_particle_closed_form(kE, 0.0, 0.0, 0.0, 0.0, 1.0), Error);
}

TEST(ClosedForm, AdvancesOneWavelengthPerPeriod) {
    UnitSystem u{0.5, 1.0};
    double T = std::numbers::pi * u.hbar / (2 * kE), dx = std::numbers::pi * u.hbar / std::sqrt(2 * kE);
    for (auto [A, B] : {std::pair{2.0, 0.5}, std::pair{0.3, -1.0}, std::pair{-1.5, 0.2}}) {
        double x0 = free_particle_closed_form(kE, A, B, 0, 0, 0.123, u);
        double x1 = free_particle_closed_form(kE, A, B, 0, 0, 0.123 + T, u);
        EXPECT_NEAR(std::abs(x1 - x0), dx, 1e-12);
        // monotone inside the period
        double prev = x0;
        for (int i = 1; i <= 400; ++i) {
            double x = free_particle_closed_form(kE, A, B, 0, 0, 0.123 + i * T / 400, u);
            EXPECT_GT((x - prev) * A, 0.0);
            prev = x;
        }
    }
}

TEST(ClosedForm, ActionIsTwoETimesT) {
    auto f = free_trajectory_field(kE, 2.0, 0.5, 0.0, free_grid());
    double x0 = free_particle_closed_form(kE, 2.0, 0.5, 0.0, 0.0, 0.0);
    for (double t = 0; t < 10; t += 0.1) {
        double x = free_particle_closed_form(kE, 2.0, 0.5, 0.0, 0.0, t);
        EXPECT_NEAR(f.s0(x) - f.s0(x0), 2 * kE * t, 1e-8);
    }
}

TEST(ClosedForm, JetMatchesDifferences) {
    double t = 0.77, h = 1e-3;
    auto j = free_particle_closed_form_jet(kE, 2.0, 0.5, 0, 0, t);
    auto x = [&](double s) { return free_particle_closed_form(kE, 2.0, 0.5, 0, 0, s); };
    EXPECT_NEAR(j.xdot, (x(t + h) - x(t - h)) / (2 * h), 1e-5);
    EXPECT_NEAR(j.xddot, (x(t + h) - 2 * x(t) + x(t - h)) / (h * h), 1e-4);
    EXPECT_NEAR(j.xdddot, (x(t + 2 * h) - 2 * x(t + h) + 2 * x(t - h) - x(t - 2 * h)) / (2 * h * h * h), 1e-2);
}

TEST(Trajectory, ClassicalLine) {
    Grid g = free_grid();
    ReducedActionField f(PairBasis::free_cos_sin(kE, {}), MicrostateParams::floyd(1, 1, 0), g);
    auto tr = integrate_trajectory(f, 0.0, 0.0, 10.0);
    EXPECT_EQ(tr.status, TrajectoryStatus::completed);
    for (const auto& s : tr.samples) EXPECT_NEAR(s.x, s.t, 1e-9);
}

TEST(Trajectory, MatchesClosedForm) {
    UnitSystem u;
    auto f = free_trajectory_field(kE, 2.0, 0.5, 0.0, free_grid(), u);
    double x0 = free_particle_closed_form(kE, 2.0, 0.5, 0, 0, 0, u);
    auto tr = integrate_trajectory(f, x0, 0.0, 3 * std::numbers::pi);
    for (std::size_t i = 1; i < tr.samples.size(); ++i) {
        const auto& s = tr.samples[i];
        ASSERT_GT(s.t, tr.samples[i - 1].t);
        EXPECT_NEAR(s.x, free_particle_closed_form(kE, 2.0, 0.5, 0, 0, s.t, u), 1e-6);
        // dispersion invariant on samples
        EXPECT_NEAR(s.xdot * f.momentum(s.x), 2 * kE, 1e-9);
    }
}

TEST(Trajectory, ExitIsReported) {
    Grid g(-1.0, 2.0, 301);
    ReducedActionField f(PairBasis::free_cos_sin(kE, {}), MicrostateParams::floyd(1, 1, 0), g);
    auto tr = integrate_trajectory(f, 0.0, 0.0, 10.0);
    EXPECT_EQ(tr.status, TrajectoryStatus::exited);
    EXPECT_NEAR(tr.end_time, 2.0, 1e-9);
    EXPECT_NEAR(tr.end_position, 2.0, 1e-9);
    EXPECT_LE(tr.samples.back().t, 2.0 + 1e-12);
}

TEST(Trajectory, UniformOutput) {
    Grid g = free_grid();
    auto f = free_trajectory_field(kE, 0.7, -0.3, 0.0, g);
    TrajectoryOptions opt;
    opt.output_dt = 0.1;
    auto tr = integrate_trajectory(f, 0.2, 0.0, 5.0, opt);
    ASSERT_EQ(tr.samples.size(), 51u);
    EXPECT_NEAR(tr.samples[17].t, 1.7, 1e-12);
}

TEST(Trajectory, BoundStateApproachesTurningPoint) {
    auto f = harmonic_field(MicrostateParams::mu_nu(0.3, -0.7));
    auto tr = integrate_trajectory(f, -0.6, 0.0, 1e4);
    EXPECT_EQ(tr.status, TrajectoryStatus::turning_point);
    EXPECT_NEAR(std::abs(tr.end_position), 1.0, 1e-3);
    EXPECT_LT(tr.end_time, 1e4);
    EXPECT_THROW(integrate_trajectory(f, 6.0, 0.0, 1.0), Error);
}

TEST(Trajectory, HarmonicInvariants) {
    auto f = harmonic_field(MicrostateParams::mu_nu(0.3, -0.7));
    auto tr = integrate_trajectory(f, -0.6, 0.0, 3.0);
    for (double t = 0.1; t < 2.9; t += 0.05) {
        double x = tr.position(t);
        auto j = tr.differentiate(t, 1e-2);
        EXPECT_LT(fiqnl_residual(f.spec(), 0.5, x, j.xdot, j.xddot, j.xdddot).rel, 1e-3);
        EXPECT_LT(std::abs(quantum_lagrangian_state(f, x, j.xdot).hamiltonian - 0.5) / 0.5, 1e-6);
        EXPECT_LT(std::abs(first_kind_residual(f, x, j.xdot, j.xddot)), 1e-3);
        auto a = trajectory_jet_from_field(f, x);
        EXPECT_LT(fiqnl_residual(f.spec(), 0.5, x, a.xdot, a.xddot, a.xdddot).rel, 1e-8);
    }
}

TEST(Fiqnl, ClassicalLineExact) {
    double v = 1.5, E = 0.5 * v * v;
    EXPECT_EQ(fiqnl_residual(PotentialSpec::free(), E, 2.0, v, 0.0, 0.0).abs, 0.0);
    EXPECT_THROW(fiqnl_residual(PotentialSpec::free(), E, 2.0, 0.0, 0.0, 0.0), Error);
}

TEST(Fiqnl, FreeClosedFormAnalytic) {
    for (auto [A, B] : {std::pair{2.0, 0.5}, std::pair{0.4, -2.0}}) {
        for (int i = 0; i < 200; ++i) {
            auto j = free_particle_closed_form_jet(kE, A, B, 0, 0, 0.05 * i);
            EXPECT_LT(fiqnl_residual(PotentialSpec::free(), kE, j.x, j.xdot, j.xddot, j.xdddot).rel, 1e-6);
        }
    }
}

TEST(TimeOfFlight, ClassicalConstantIntegrand) {
    Grid g = free_grid();
    ReducedActionField f(PairBasis::free_cos_sin(kE, {}), MicrostateParams::floyd(1, 1, 0), g);
    EXPECT_NEAR(time_of_flight(f, 1.0, 4.5), 3.5, 1e-12);
}

TEST(TimeOfFlight, AgreesWithOde) {
    auto f = free_trajectory_field(kE, 1.7, 0.9, 0.0, free_grid());
    auto tr = integrate_trajectory(f, 0.0, 0.0, 30.0);
    for (double x1 : {1.0, 3.3, 10.0}) {
        double a = time_of_flight(f, 0.0, x1), b = tr.arrival_time(x1);
        EXPECT_NEAR(a, b, 1e-6 * b);
    }
}

TEST(TimeOfFlight, TurningPointRejected) {
    auto f = harmonic_field(MicrostateParams::floyd(1, 1, 0));
    EXPECT_THROW(time_of_flight(f, 0.0, 1.5), Error);
    EXPECT_THROW(time_of_flight(f, 0.0, 1.0), Error);
    EXPECT_GT(std::abs(time_of_flight(f, -0.5, 0.5)), 0.0);
}

TEST(QuantumCoordinate, ClassicalIsShift) {
    Grid g = free_grid();
    ReducedActionField f(PairBasis::free_cos_sin(kE, {}), MicrostateParams::floyd(1, 1, 0), g);
    EXPECT_NEAR(quantum_coordinate(f, 1.0, 3.0), 2.0, 1e-12);
}

TEST(QuantumCoordinate, DerivativeAndMonotone) {
    Grid g = free_grid();
    ReducedActionField f(PairBasis::free_cos_sin(kE, {}), MicrostateParams::mu_nu(0.6, 2.2), g);
    double h = 1e-4, prev = quantum_coordinate(f, 0.0, 0.0);
    for (double x = 0.05; x < 5.0; x += 0.05) {
        double xh = quantum_coordinate(f, 0.0, x);
        EXPECT_GT((xh - prev) * f.momentum(0.0), 0.0);
        prev = xh;
    }
    for (double x : {0.5, 2.0}) {
        double d = (quantum_coordinate(f, 0.0, x + h) - quantum_coordinate(f, 0.0, x - h)) / (2 * h);
        double want = f.momentum(x) / std::sqrt(2 * kE);
        EXPECT_NEAR(d, want, 1e-6 * std::abs(want));
    }
}

TEST(QuantumCoordinate, ForbiddenRejected) {
    auto f = harmonic_field(MicrostateParams::floyd(1, 1, 0));
    EXPECT_THROW(quantum_coordinate(f, 0.0, 1.4), Error);
    EXPECT_NO_THROW(quantum_coordinate(f, 0.0, 0.8));
}

TEST(Jacobi, FreeRoutesAgree) {
    UnitSystem u;
    Grid g = free_grid();
    auto family = [&](double E) {
        return ReducedActionField(PairBasis::free_cos_sin(E, u), MicrostateParams::mu_nu(0.4, 1.7), g);
    };
    auto f = family(kE);
    for (double target : {2.0, 5.0}) {
        auto jr = quantum_jacobi_time(family, 0.0, target, kE);
        double x1 = detail::solve_coordinate(f, 0.0, target);
        double tof = time_of_flight(f, 0.0, x1);
        EXPECT_NEAR(jr.time, tof, 1e-4 * tof);
        EXPECT_LT(jr.richardson_delta, 1e-6);
    }
}

TEST(Jacobi, ClassicalParamsReduce) {
    UnitSystem u;
    Grid g = free_grid();
    auto family = [&](double E) {
        return ReducedActionField(PairBasis::free_cos_sin(E, u), MicrostateParams::floyd(1, 1, 0), g);
    };
    // d/dE of sqrt(2mE) x at x = 3
    auto jr = quantum_jacobi_time(family, 0.0, 3.0, kE);
    EXPECT_NEAR(jr.time, 3.0 / std::sqrt(2 * kE), 1e-8);
    EXPECT_THROW(quantum_jacobi_time(family, 0.0, 1e4, kE), Error);
}

TEST(Floyd, EqualCoefficientsClassical) {
    for (double x : {-3.0, 0.5, 7.0}) EXPECT_NEAR(floyd_free_trajectory(kE, 1.3, 1.3, 0.0, x), x, 1e-12);
}

TEST(Floyd, MatchesXTimesMomentum) {
    UnitSystem u;
    Floyd fl{2, 1, 0.5};
    double s = std::pow(kE * fl.disc(), -0.25);
    auto basis = PairBasis::analytic_free(kE, u, {s, 0, 0, s});
    for (double x : {0.3, 1.7, 4.2}) EXPECT_NEAR(floyd_free_trajectory(kE, 2, 1, 0.5, x), x * floyd_momentum(basis, fl, x) / (2 * kE), 1e-12);
}

TEST(Floyd, DiffersFromQuantumTrajectory) {
    double worst = 0;
    for (double x = 0.1; x < 10.0; x += 0.01)
        worst = std::max(worst, std::abs(quantum_free_trajectory(kE, 2, 1, 0.5, x) - floyd_free_trajectory(kE, 2, 1, 0.5, x)) / x);
    EXPECT_GT(worst, 1e-3);
}

TEST(Floyd, QuantumTrajectoryIsActionOverTwoE) {
    UnitSystem u{0.3, 1.0};
    Floyd fl{2, 1, 0.5};
    Grid g = Grid::with_spacing(-1.0, 5.0, 1e-3);
    ReducedActionField f(PairBasis::free_cos_sin(kE, u), MicrostateParams{fl}, g);
    double c = quantum_free_trajectory(kE, 2, 1, 0.5, 0.0, u) - f.s0(0.0) / (2 * kE);
    for (double x : {0.5, 2.2, 4.9}) EXPECT_NEAR(quantum_free_trajectory(kE, 2, 1, 0.5, x, u), f.s0(x) / (2 * kE) + c, 1e-9);
}

TEST(Lagrangian, Identities) {
    auto f = harmonic_field(MicrostateParams::mu_nu(0.2, 1.4));
    std::mt19937 rng(4);
    std::uniform_real_distribution<double> d(-0.9, 0.9);
    for (int i = 0; i < 20; ++i) {
        double x = d(rng), xd = d(rng) * 3;
        auto s = quantum_lagrangian_state(f, x, xd);
        EXPECT_NEAR(s.hamiltonian + s.lagrangian, xd * xd * s.f_value, 1e-12);
    }
    Grid g(-2.0, 2.0, 101);
    ReducedActionField c(PairBasis::free_cos_sin(kE, {}), MicrostateParams::floyd(1, 1, 0), g);
    auto s = quantum_lagrangian_state(c, 0.4, 1.2);
    EXPECT_NEAR(s.lagrangian, 0.5 * 1.2 * 1.2, 1e-14);
}

TEST(Io, TrajectoryCsv) {
    auto f = free_trajectory_field(kE, 2.0, 0.5, 0.0, free_grid());
    auto tr = integrate_trajectory(f, 0.0, 0.0, 1.0);
    std::ostringstream os;
    write_trajectory_csv(os, f, tr);
    std::string s = os.str();
    EXPECT_EQ(s.substr(0, s.find('\n')), "t,x,xdot,p,f,hq_minus_e,fiqnl_residual_rel");
}
