#include "gmch/weakform.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

using gmch::BumpKind;
using gmch::PeakonDensity;
using gmch::QuadratureSpec;
using gmch::Rational;
using gmch::TestFunction;

TEST(LineConvolution, ZeroAmplitude) {
    const gmch::PeakonParams zero{1, 0.0, 0.0};
    for (bool d : {false, true})
        for (auto which : {PeakonDensity::bracket, PeakonDensity::nonlocal_B, PeakonDensity::nonlocal_C})
            EXPECT_EQ(gmch::line_convolution(d, which, 0.7, 0.0, zero, {}), 0.0);
}

TEST(LineConvolution, ClosedFormExample) {
    const auto p = gmch::peakon_from_amplitude(1, 1.0);
    // -(1/8)[(2 + 1/3) + 3*1](e^{-2} - e^{-6}) = -(2/3)(e^{-2} - e^{-6})
    const double expect = -2.0 / 3.0 * (std::exp(-2.0) - std::exp(-6.0));
    EXPECT_NEAR(gmch::convolution_closed_form(p, 0.0, 2.0) / expect, 1.0, 1e-15);
    EXPECT_NEAR(gmch::line_convolution(true, PeakonDensity::bracket, 2.0, 0.0, p, {}) / expect, 1.0, 1e-10);
}

TEST(LineConvolution, ClosedFormsMatchQuadratureOnBothBranches) {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> tdist(0.0, 2.0), off(0.01, 8.0);
    for (unsigned n = 1; n <= 3; ++n)
        for (double a : {0.5, 1.0, 2.0}) {
            const auto p = gmch::peakon_from_amplitude(n, a);
            for (int i = 0; i < 20; ++i) {
                const double t = tdist(rng);
                for (double side : {1.0, -1.0}) {
                    const double x = p.c * t + side * off(rng);
                    const double closed = gmch::convolution_closed_form(p, t, x);
                    const double quad = gmch::line_convolution(true, PeakonDensity::bracket, x, t, p, {});
                    EXPECT_NEAR(quad / closed, 1.0, 1e-10) << "n=" << n << " a=" << a << " t=" << t << " x=" << x;
                }
            }
        }
}

TEST(LineConvolution, SplitPiecesAddUpToUnsplitIntegral) {
    for (unsigned n = 1; n <= 3; ++n) {
        const auto p = gmch::peakon_from_amplitude(n, 1.0);
        for (double x : {-1.3, 0.4, 2.0}) {
            const auto pieces = gmch::line_convolution_pieces(true, PeakonDensity::bracket, x, 0.5, p, {});
            const double split = pieces[0].value + pieces[1].value + pieces[2].value;
            const auto whole = gmch::line_convolution_unsplit(true, PeakonDensity::bracket, x, 0.5, p, {});
            EXPECT_NEAR(split, whole.value, 1e-12) << "n=" << n << " x=" << x;
        }
    }
}

TEST(LineConvolution, ReportsUnmetTolerance) {
    const auto p = gmch::peakon_from_amplitude(1, 1.0);
    QuadratureSpec q;
    q.max_subdivisions = 2;
    try {
        gmch::line_convolution_unsplit(true, PeakonDensity::bracket, 2.0, 0.0, p, q);
        FAIL() << "expected QuadratureError";
    } catch (const gmch::QuadratureError& e) {
        EXPECT_GT(e.achieved(), 0.0);
    }
    q = {};
    q.relative_tol = 1e-16;
    EXPECT_THROW(gmch::line_convolution(true, PeakonDensity::bracket, 2.0, 0.0, p, q), std::invalid_argument);
}

TEST(PointwiseResidual, CrestAndExample) {
    const auto p = gmch::peakon_from_amplitude(1, 1.0);
    EXPECT_EQ(gmch::peakon_local_term(p, 0.7, p.c * 0.7), 0.0);
    const auto crest = gmch::peakon_residual_sample(p, 0.7, p.c * 0.7, {});
    EXPECT_LE(std::abs(crest.residual), crest.tolerance_achieved + 1e-15);
    EXPECT_LE(std::abs(gmch::peakon_pointwise_residual(p, 0.0, 1.0, {})), 1e-8);
}

TEST(PointwiseResidual, VanishesAcrossParameterFan) {
    for (unsigned n = 1; n <= 3; ++n)
        for (double a : {0.5, 1.0, 2.0})
            for (double t : {0.0, 1.0}) {
                const auto p = gmch::peakon_from_amplitude(n, a);
                double worst = 0.0;
                for (int i = 0; i < 100; ++i) {
                    const double x = p.c * t - 10.0 + 20.0 * i / 99.0;
                    worst = std::max(worst, std::abs(gmch::peakon_pointwise_residual(p, t, x, {})));
                }
                EXPECT_LE(worst, 1e-8 * std::pow(a, 2 * n + 1)) << "n=" << n << " a=" << a << " t=" << t;
            }
}

TEST(PointwiseResidual, WrongSpeedDoesNotCancel) {
    auto p = gmch::peakon_from_amplitude(2, 1.0);
    p.c *= 1.01;
    EXPECT_GT(std::abs(gmch::peakon_pointwise_residual(p, 0.0, 1.0, {})), 1e-3);
}

TEST(SpeedBalance, ExactValues) {
    for (unsigned n : {1u, 2u, 10u}) EXPECT_TRUE(gmch::verify_speed_balance(n).pass) << n;
    EXPECT_EQ(Rational(1, 8) * ((2 + Rational(1, 3)) + 3 * Rational(1)), Rational(2, 3));
    // n = 2: S1 = 2/3 - 1/5, S2 = 2 - 1/3
    const Rational s1 = Rational(2, 3) - Rational(1, 5), s2 = 2 - Rational(1, 3);
    EXPECT_EQ(Rational(1, 24) * ((4 + s1) + 5 * s2), Rational(8, 15));
    EXPECT_EQ(1 - s1, Rational(8, 15));
}

TEST(TestFunctionShape, CompactBumpVanishesOutside) {
    const gmch::Profile1D b{1.0, 0.5, BumpKind::compact_bump};
    EXPECT_EQ(b.value(1.5), 0.0);
    EXPECT_EQ(b.value(0.2), 0.0);
    EXPECT_EQ(b.derivative(1.6), 0.0);
    EXPECT_NEAR(b.value(1.0), 1.0, 1e-15);
    const double h = 1e-6;
    for (double s : {0.7, 1.1, 1.4}) EXPECT_NEAR(b.derivative(s), (b.value(s + h) - b.value(s - h)) / (2 * h), 1e-6) << s;
    const TestFunction psi{{0.0, 1.0, BumpKind::gaussian_bump}, {0.5, 0.4, BumpKind::compact_bump}};
    EXPECT_NO_THROW(psi.validate(1.0));
    EXPECT_THROW(psi.validate(0.8), std::invalid_argument);
}

TEST(WeakPairing, FarFieldIsNegligible) {
    const auto p = gmch::peakon_from_amplitude(1, 1.0);
    const TestFunction psi{{30.0, 0.5, BumpKind::gaussian_bump}, {0.5, 0.05, BumpKind::gaussian_bump}};
    QuadratureSpec q;
    q.relative_tol = 1e-9;
    EXPECT_LE(std::abs(gmch::weak_form_pairing(p, psi, 1.0, q).total), 1e-10);
}

TEST(WeakPairing, CancelsOnCrestPath) {
    const auto p = gmch::peakon_from_amplitude(1, 1.0);
    // Gaussian in space around the crest path, Gaussian in time touching t = 0.
    const TestFunction psi{{0.3, 0.7, BumpKind::gaussian_bump}, {0.0, 0.1, BumpKind::gaussian_bump}};
    QuadratureSpec q;
    q.relative_tol = 1e-9;
    const auto r = gmch::weak_form_pairing(p, psi, 1.0, q);
    EXPECT_GT(std::abs(r.terms[5]), 1e-3);  // initial trace participates
    EXPECT_LE(std::abs(r.total), 1e-6 * r.scale);
}

TEST(WeakPairing, CancelsOffCrestPathWithCompactBump) {
    const auto p = gmch::peakon_from_amplitude(2, 1.0);
    const TestFunction psi{{1.5, 0.8, BumpKind::compact_bump}, {0.5, 0.3, BumpKind::compact_bump}};
    QuadratureSpec q;
    q.relative_tol = 1e-8;
    const auto r = gmch::weak_form_pairing(p, psi, 1.0, q);
    EXPECT_GT(r.scale, 1e-3);
    EXPECT_LE(std::abs(r.total), 1e-6 * r.scale);
}

TEST(WeakPairing, WrongSpeedIsDetected) {
    auto p = gmch::peakon_from_amplitude(1, 1.0);
    p.c *= 1.05;
    const TestFunction psi{{0.3, 0.7, BumpKind::gaussian_bump}, {0.5, 0.05, BumpKind::gaussian_bump}};
    QuadratureSpec q;
    q.relative_tol = 1e-9;
    const auto r = gmch::weak_form_pairing(p, psi, 1.0, q);
    EXPECT_GT(std::abs(r.total), 1e-4 * r.scale);
}

TEST(InitialTrace, LipschitzInTime) {
    const auto p = gmch::peakon_from_amplitude(2, 1.5);
    EXPECT_NEAR(gmch::initial_trace_distance(p, 0.1), p.a * (1 - std::exp(-p.c * 0.1)), 1e-14);
    double prev = gmch::initial_trace_distance(p, 0.01);
    for (double t = 0.005; t > 1e-4; t /= 2) {
        const double d = gmch::initial_trace_distance(p, t);
        EXPECT_NEAR(std::log2(prev / d), 1.0, 0.05) << t;
        prev = d;
    }
    EXPECT_EQ(gmch::initial_trace_distance(p, 0.0), 0.0);
}

TEST(ResidualCsv, HeaderAndRows) {
    std::ostringstream empty;
    gmch::write_residual_csv(empty, {});
    EXPECT_EQ(empty.str(), "n,a,t,x,residual,tolerance_achieved\n");
    const auto p = gmch::peakon_from_amplitude(1, 1.0);
    std::ostringstream os;
    gmch::write_residual_csv(os, {gmch::peakon_residual_sample(p, 0.0, 1.0, {})});
    EXPECT_NE(os.str().find("\n1,1,0,1,"), std::string::npos);
}
