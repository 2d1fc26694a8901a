#include "gmch/functionals.hpp"
#include "gmch/profiles.hpp"

#include <gtest/gtest.h>

#include <cmath>

using gmch::GridSpec;
using gmch::Rational;

TEST(SpeedLaw, Examples) {
    EXPECT_NEAR(gmch::speed_from_amplitude(1, 1.0), 2.0 / 3.0, 1e-16);
    EXPECT_NEAR(gmch::speed_from_amplitude(2, 1.0), 8.0 / 15.0, 1e-16);
    EXPECT_LT(gmch::speed_from_amplitude(1, 1e-8), 1e-15);
    EXPECT_NEAR(gmch::amplitude_from_speed(1, 1.5), 1.5, 1e-15);
    EXPECT_NEAR(gmch::amplitude_from_speed(2, 8.0 / 15.0), 1.0, 1e-15);
    EXPECT_THROW(gmch::amplitude_from_speed(1, 0.0), std::invalid_argument);
    EXPECT_THROW(gmch::speed_from_amplitude(1, -1.0), std::invalid_argument);
}

TEST(SpeedLaw, MchAmplitude) {
    for (double c : {0.1, 2.0 / 3.0, 1.0, 7.5}) {
        const double a = gmch::amplitude_from_speed(1, c);
        EXPECT_NEAR(a / std::sqrt(1.5 * c), 1.0, 1e-14) << c;
    }
}

TEST(SpeedLaw, RoundTrip) {
    for (unsigned n = 1; n <= 6; ++n)
        for (double a : {0.1, 1.0, 10.0}) {
            const double back = gmch::amplitude_from_speed(n, gmch::speed_from_amplitude(n, a));
            EXPECT_NEAR(back / a, 1.0, 1e-14) << "n=" << n << " a=" << a;
        }
}

TEST(SpeedLaw, FactorIsDoubleFactorialRatio) {
    for (unsigned n = 1; n <= 30; ++n) EXPECT_EQ(gmch::speed_factor(n), gmch::even_over_odd_double_factorial(n)) << n;
}

TEST(Peakon, Values) {
    const auto p1 = gmch::peakon_from_amplitude(1, 1.0);
    EXPECT_EQ(gmch::peakon_value(p1, 0, 0), 1.0);
    EXPECT_NEAR(gmch::peakon_value(p1, 0, std::log(2.0)), 0.5, 1e-16);
    const auto p2 = gmch::peakon_from_amplitude(2, 1.0);
    EXPECT_NEAR(gmch::peakon_value(p2, 1.0, 8.0 / 15.0), 1.0, 1e-15);
}

TEST(Peakon, ClosedInvariants) {
    const auto i1 = gmch::peakon_closed_invariants(gmch::peakon_from_amplitude(1, 1.0));
    EXPECT_NEAR(i1.E, 2.0, 1e-15);
    EXPECT_NEAR(i1.F, 4.0 / 3.0, 1e-15);
    const auto i2 = gmch::peakon_closed_invariants(gmch::peakon_from_amplitude(2, 1.0));
    EXPECT_NEAR(i2.F, 16.0 / 15.0, 1e-15);
    EXPECT_EQ(gmch::peakon_F_coefficient(2), Rational(16, 15));
    for (unsigned n = 1; n <= 20; ++n)
        EXPECT_EQ(gmch::peakon_F_coefficient(n) * (n + 1), gmch::coefficient_table(n).two_minus_c1) << n;
}

TEST(Peakon, ClosedInvariantsMatchQuadrature) {
    // Crest at a cell midpoint so no node sits on the kink; one-sided
    // derivatives are exact, leaving an O(dx^2) trapezoid error.
    const GridSpec g(40.0, 1u << 18);
    for (unsigned n = 1; n <= 3; ++n) {
        const auto p = gmch::peakon_from_amplitude(n, 1.3);
        const auto u = gmch::sampled_peakon(p, g, g.dx() / 2);
        const auto inv = gmch::peakon_closed_invariants(p);
        EXPECT_NEAR(gmch::energy_E(u) / inv.E, 1.0, 1e-6) << n;
        EXPECT_NEAR(gmch::functional_F(u, n) / inv.F, 1.0, 1e-6) << n;
    }
}

TEST(Mollified, MassPositivityAndConvergence) {
    const GridSpec g(20.0, 4096);
    const auto p = gmch::peakon_from_amplitude(1, 1.0);
    double prev = 1e9;
    for (double delta : {0.4, 0.2, 0.1, 0.05}) {
        const auto d = gmch::mollified_peakon(p, {delta}, g);
        double mass = 0, mn = 1e9;
        for (double v : d.u.y()) {
            mass += v;
            mn = std::min(mn, v);
        }
        EXPECT_NEAR(mass * g.dx(), 2.0 * p.a, 1e-12);
        EXPECT_GE(mn, 0.0);
        EXPECT_LT(d.distance, prev) << delta;
        prev = d.distance;
    }
    EXPECT_THROW(gmch::mollified_peakon(p, {g.dx()}, g), std::invalid_argument);
}

TEST(Mollified, BumpShapeHasCompactMomentum) {
    const GridSpec g(20.0, 4096);
    const auto p = gmch::peakon_from_amplitude(2, 1.0);
    const auto d = gmch::mollified_peakon(p, {0.1, gmch::MollifierShape::bump}, g);
    for (std::size_t j = 0; j < g.N; ++j) {
        if (std::abs(g.x(j)) >= 0.1) {
            EXPECT_EQ(d.u.y()[j], 0.0);
        }
    }
}

TEST(Perturbed, ZeroBetaAndMonotonicity) {
    const GridSpec g(20.0, 4096);
    const auto p = gmch::peakon_from_amplitude(1, 1.0);
    const gmch::MollifierSpec m{0.05};
    const gmch::BumpSpec bump{6.0, 0.5};
    const auto base = gmch::mollified_peakon(p, m, g);
    const auto zero = gmch::perturbed_initial_data(p, m, 0.0, bump, g);
    EXPECT_EQ(zero.u.u(), base.u.u());
    EXPECT_EQ(zero.distance, base.distance);
    double prev = zero.distance;
    for (double beta : {0.01, 0.02, 0.04, 0.08}) {
        const auto d = gmch::perturbed_initial_data(p, m, beta, bump, g);
        EXPECT_GT(d.distance, prev) << beta;
        prev = d.distance;
    }
    EXPECT_THROW(gmch::perturbed_initial_data(p, m, -1.0, bump, g), std::invalid_argument);
}

TEST(Perturbed, BisectionHitsTarget) {
    const GridSpec g(20.0, 4096);
    const auto p = gmch::peakon_from_amplitude(1, 1.0);
    const gmch::MollifierSpec m{0.05};
    const gmch::BumpSpec bump{6.0, 0.5};
    const double floor = gmch::mollified_peakon(p, m, g).distance;
    const double target = floor + 0.05;
    const auto r = gmch::perturb_to_target(p, m, target, bump, g);
    EXPECT_NEAR(r.data.distance, target, 1e-6);
    EXPECT_GT(r.beta, 0.0);
    // Below the mollification floor the target cannot be met.
    EXPECT_THROW(gmch::perturb_to_target(p, m, 1e-3, bump, g), gmch::TargetUnreachable);
}
