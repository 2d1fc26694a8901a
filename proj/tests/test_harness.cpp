#include "gmch/harness.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using gmch::ExperimentConfig;
using gmch::RowStatus;

namespace {

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

std::filesystem::path scratch_dir(const std::string& name) {
    auto d = std::filesystem::temp_directory_path() / ("gmch_test_" + name);
    std::filesystem::remove_all(d);
    return d;
}

// delta = 0.01 resolved on [-40, 40) with 2^15 points; the mollification
// floor (~0.096) then sits below the epsilon gate (~0.172).
ExperimentConfig resolvable_sweep() {
    ExperimentConfig c;
    c.L = 40;
    c.N = 32768;
    c.delta = 0.01;
    c.eps = {0.15, 0.11, 0.13};
    c.t_end = 2e-4;
    c.observe_every = 1;
    return c;
}

}  // namespace

TEST(Config, ParsesFileWithCommentsAndOverrides) {
    std::istringstream in(R"(# stability sweep
n = 2
c=1.5   # speed
eps = 1e-2, 1e-3 ,1e-4
mollifier = bump
dealias = padded
frames = binary
seed = 42
)");
    ExperimentConfig c;
    c.read(in);
    EXPECT_EQ(c.n, 2u);
    EXPECT_EQ(c.c, 1.5);
    EXPECT_EQ(c.eps, (std::vector<double>{1e-2, 1e-3, 1e-4}));
    EXPECT_EQ(c.mollifier, gmch::MollifierShape::bump);
    EXPECT_EQ(c.dealias, gmch::Dealias::padded);
    EXPECT_EQ(c.frames, gmch::FrameFormat::binary);
    EXPECT_EQ(c.seed, 42u);
    c.apply_override("N=8192");
    c.apply_override("eps=");
    EXPECT_EQ(c.N, 8192u);
    EXPECT_TRUE(c.eps.empty());
}

TEST(Config, RejectsMalformedInput) {
    ExperimentConfig c;
    EXPECT_THROW(c.set("speed", "1"), std::invalid_argument);
    EXPECT_THROW(c.set("c", "fast"), std::invalid_argument);
    EXPECT_THROW(c.set("N", "-4"), std::invalid_argument);
    EXPECT_THROW(c.set("c", "inf"), std::invalid_argument);
    EXPECT_THROW(c.set("initial", "peakon"), std::invalid_argument);
    EXPECT_THROW(c.apply_override("n 2"), std::invalid_argument);
    std::istringstream bad("n = 1\njust words\n");
    EXPECT_THROW(c.read(bad), std::invalid_argument);
    ExperimentConfig coarse;
    coarse.L = 40;  // dx = 0.0195 cannot carry delta = 0.05
    EXPECT_THROW(coarse.validate(true), std::invalid_argument);
    EXPECT_NO_THROW(coarse.validate(false));
}

TEST(Config, DefaultsResolveTheMollifier) {
    const ExperimentConfig c;
    EXPECT_NO_THROW(c.validate(true));
    EXPECT_GE(c.delta, 4 * c.grid().dx());
}

TEST(Config, JitterIsAFunctionOfSeedAndRow) {
    ExperimentConfig c;
    EXPECT_EQ(c.bump_for_row(3).center, c.bump.center);
    c.bump_jitter = 0.5;
    c.seed = 7;
    const double a = c.bump_for_row(0).center, b = c.bump_for_row(1).center;
    EXPECT_EQ(a, c.bump_for_row(0).center);
    EXPECT_NE(a, b);
    EXPECT_LE(std::abs(a - c.bump.center), 0.5);
    c.seed = 8;
    EXPECT_NE(a, c.bump_for_row(0).center);
}

TEST(EpsilonGate, ExactThreshold) {
    const double a = 1.3;
    const double gate = (3 - 2 * std::sqrt(2.0)) * a;
    EXPECT_EQ(gmch::epsilon_gate(a), gate);
    EXPECT_THROW(gmch::check_epsilon(gate, a), gmch::HypothesisViolation);
    EXPECT_NO_THROW(gmch::check_epsilon(std::nextafter(gate, 0.0), a));
    EXPECT_NO_THROW(gmch::check_epsilon(0.0, a));
    EXPECT_THROW(gmch::check_epsilon(-1e-3, a), gmch::HypothesisViolation);
}

TEST(PowerFit, RecoversExactLaw) {
    const std::vector<double> x{1e-4, 1e-3, 1e-2};
    std::vector<double> y;
    for (double v : x) y.push_back(3.0 * std::sqrt(v));
    const auto f = gmch::fit_power_law(x, y);
    EXPECT_NEAR(f.exponent, 0.5, 1e-12);
    EXPECT_NEAR(f.prefactor, 3.0, 1e-10);
    EXPECT_LT(f.residual, 1e-12);
    EXPECT_EQ(f.points, 3u);
    const auto one = gmch::fit_power_law({1.0, -1.0}, {2.0, 2.0});
    EXPECT_EQ(one.points, 1u);
    EXPECT_TRUE(std::isnan(one.exponent));
    EXPECT_THROW(gmch::fit_power_law({1.0}, {}), std::invalid_argument);
}

TEST(PowerFit, ReportsScatter) {
    const auto f = gmch::fit_power_law({1, 2, 4, 8}, {1, 2.2, 3.9, 8.3});
    EXPECT_NEAR(f.exponent, 1.0, 0.05);
    EXPECT_GT(f.residual, 1e-3);
}

TEST(Envelope, Formula) {
    EXPECT_DOUBLE_EQ(gmch::stability_envelope(2.0, 0.01, 0.25), 3 * std::sqrt(3 * 2 * 0.01 + 4 * 2 * std::sqrt(0.0025)));
    EXPECT_EQ(gmch::stability_envelope(1.0, 0.0, 1.0), 0.0);
}

TEST(Frames, BinaryRoundTripIsLittleEndian) {
    const gmch::GridSpec g(20.0, 16);
    const auto f = gmch::sample(g, [](double x) { return std::exp(-x * x); });
    std::stringstream ss;
    gmch::write_frame_binary(ss, 0.25, f);
    gmch::write_frame_binary(ss, 0.5, f);
    const auto bytes = ss.str();
    ASSERT_EQ(bytes.size(), 2 * (8 + 8 + 8 + 8 + 16 * 8));
    EXPECT_EQ(bytes.substr(0, 8), "GMCHFRM1");
    EXPECT_EQ(static_cast<unsigned char>(bytes[8]), 16);  // N, least significant byte first
    EXPECT_EQ(bytes[15], 0);
    gmch::Frame fr;
    ASSERT_TRUE(gmch::read_frame_binary(ss, fr));
    EXPECT_EQ(fr.L, 20.0);
    EXPECT_EQ(fr.t, 0.25);
    EXPECT_EQ(fr.u, f.u());
    ASSERT_TRUE(gmch::read_frame_binary(ss, fr));
    EXPECT_EQ(fr.t, 0.5);
    EXPECT_FALSE(gmch::read_frame_binary(ss, fr));

    std::stringstream cut(bytes.substr(0, 40));
    EXPECT_THROW(gmch::read_frame_binary(cut, fr), std::runtime_error);
    std::stringstream junk("NOTAFRAME-------");
    EXPECT_THROW(gmch::read_frame_binary(junk, fr), std::runtime_error);
}

TEST(Frames, CsvRowAndProfile) {
    const gmch::GridSpec g(20.0, 8);
    const auto f = gmch::sample(g, [](double) { return 1.0; });
    std::ostringstream row;
    gmch::write_frame_csv(row, 0.5, f);
    EXPECT_EQ(row.str(), "0.5,1,1,1,1,1,1,1,1\n");
    std::ostringstream prof;
    gmch::write_profile_csv(prof, f);
    EXPECT_EQ(prof.str().substr(0, 13), "x,u,u_x,y\n-20");
}

TEST(Simulate, ZeroDataGivesZeroRecords) {
    ExperimentConfig c;
    c.initial = gmch::InitialKind::zero;
    c.N = 256;
    c.t_end = 0.1;
    const auto r = gmch::run_simulation(c);
    EXPECT_FALSE(r.blowup);
    ASSERT_FALSE(r.records.empty());
    for (const auto& rec : r.records) {
        EXPECT_EQ(rec.E, 0.0);
        EXPECT_EQ(rec.F, 0.0);
        EXPECT_EQ(rec.M, 0.0);
    }
    std::ostringstream os;
    gmch::write_observer_csv(os, r.records);
    EXPECT_EQ(os.str().substr(0, os.str().find('\n')),
              "t,step,E,F,M,xi,stability_lhs,min_y,min_u_minus_ux,min_u_plus_ux");
}

TEST(Simulate, NonnegativeMomentumKeepsItsSign) {
    ExperimentConfig c;
    c.n = 2;
    c.initial = gmch::InitialKind::momentum;
    c.momentum_amp = 0.5;
    c.N = 1024;
    c.t_end = 1.0;
    c.frames = gmch::FrameFormat::csv;
    c.frame_every = 5;
    std::ostringstream frames;
    const auto r = gmch::run_simulation(c, &frames);
    EXPECT_FALSE(r.blowup) << r.message;
    EXPECT_GE(r.min_y, -1e-8);
    EXPECT_LE(r.max_lhs_ratio, 1e-6);
    EXPECT_LT(r.E_drift, 1e-8);
    const auto text = frames.str();
    const auto lines = std::count(text.begin(), text.end(), '\n');
    EXPECT_EQ(static_cast<std::size_t>(lines), (r.records.size() + 4) / 5);
    EXPECT_GT(r.crest_speed, 0.0);
}

TEST(Simulate, CrestSpeedUnwrapsThePeriod) {
    std::vector<gmch::ObserverRecord> rec(5);
    for (int i = 0; i < 5; ++i) {
        rec[i].t = i;
        double x = 8.0 + 1.5 * i;
        x -= 20.0 * std::round(x / 20.0);
        rec[i].xi = x;
    }
    EXPECT_NEAR(gmch::crest_speed(rec, 10.0), 1.5, 1e-12);
    EXPECT_TRUE(std::isnan(gmch::crest_speed({}, 10.0)));
}

TEST(Simulate, PerturbedBelowFloorIsAHypothesisViolation) {
    ExperimentConfig c;
    c.initial = gmch::InitialKind::perturbed;
    c.eps = {1e-3};
    EXPECT_THROW(gmch::run_simulation(c), gmch::HypothesisViolation);
}

TEST(Stability, RowsOutsideTheHypothesisAreRejected) {
    ExperimentConfig c;
    c.eps = {0.2, 1e-3};  // above the gate; below the mollification floor
    c.t_end = 0.01;
    const auto rep = gmch::run_stability(c);
    ASSERT_EQ(rep.rows.size(), 2u);
    EXPECT_EQ(rep.rows[0].eps_target, 1e-3);
    for (const auto& r : rep.rows) {
        EXPECT_EQ(r.status, RowStatus::hypothesis_violation);
        EXPECT_TRUE(r.trace.empty());
    }
    EXPECT_NE(rep.rows[0].message.find("floor"), std::string::npos);
    EXPECT_NE(rep.rows[1].message.find("3 - 2 sqrt 2"), std::string::npos);
    EXPECT_TRUE(std::isnan(rep.A_hat));
    EXPECT_FALSE(rep.envelope_ok);
    EXPECT_TRUE(rep.any(RowStatus::hypothesis_violation));
}

TEST(Stability, ZeroPerturbationSitsAtTheFloor) {
    ExperimentConfig c;
    c.eps = {0.0};
    c.t_end = 1e-3;
    const auto rep = gmch::run_stability(c);
    ASSERT_EQ(rep.rows.size(), 1u);
    const auto& r = rep.rows[0];
    ASSERT_TRUE(r.usable()) << r.message;
    const auto floor = gmch::mollified_peakon(c.peakon(), c.mollifier_spec(), c.grid()).distance;
    EXPECT_EQ(r.eps_achieved, floor);
    EXPECT_NEAR(r.sup_distance, floor, 0.05 * floor);
}

TEST(Stability, ResolvableSweepFitsAndBoundsItself) {
    const auto c = resolvable_sweep();
    const auto rep = gmch::run_stability(c);
    ASSERT_EQ(rep.rows.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) {
        const auto& r = rep.rows[i];
        ASSERT_TRUE(r.usable()) << r.message;
        if (i) {
            EXPECT_GT(r.eps_target, rep.rows[i - 1].eps_target);
        }
        EXPECT_NEAR(r.eps_achieved, r.eps_target, 1e-8);
        EXPECT_GT(r.bump_amplitude, 0.0);
        EXPECT_GE(r.trace.size(), 2u);
        EXPECT_GE(r.sup_distance, r.eps_achieved * (1 - 1e-6));
        EXPECT_TRUE(r.envelope_ok);
        EXPECT_LE(r.max_lhs, 1e-6 * std::max(1.0, r.trace.front().F));
    }
    EXPECT_GT(rep.A_hat, 0.0);
    EXPECT_EQ(rep.distance_fit.points, 3u);
    EXPECT_NEAR(rep.distance_fit.exponent, 1.0, 0.05);
    EXPECT_TRUE(rep.envelope_ok);
}

TEST(Stability, OutputsAreDeterministic) {
    const auto c = resolvable_sweep();
    const auto d1 = scratch_dir("det1"), d2 = scratch_dir("det2");
    gmch::write_stability_outputs(d1, gmch::run_stability(c));
    gmch::write_stability_outputs(d2, gmch::run_stability(c));
    for (const auto* f : {"stability_rows.csv", "stability_report.json", "trace_0.dat", "trace_2.dat"}) {
        const auto a = slurp(d1 / f);
        EXPECT_FALSE(a.empty()) << f;
        EXPECT_EQ(a, slurp(d2 / f)) << f;
    }
    const auto j = nlohmann::json::parse(slurp(d1 / "stability_report.json"));
    EXPECT_EQ(j["rows"].size(), 3u);
    EXPECT_TRUE(j["fits"].contains("peak_deviation_vs_eps"));
    std::filesystem::remove_all(d1);
    std::filesystem::remove_all(d2);
}

TEST(Weakres, EmptyFanAndScaledTolerance) {
    EXPECT_TRUE(gmch::residual_fan({}, {1.0}, {0.0}).empty());
    std::ostringstream os;
    gmch::write_residual_csv(os, gmch::residual_fan({1}, {}, {0.0}));
    EXPECT_EQ(os.str(), "n,a,t,x,residual,tolerance_achieved\n");
    EXPECT_EQ(gmch::max_scaled_residual({}), 0.0);

    const auto rows = gmch::residual_fan({1, 3}, {1.0, 2.0}, {0.0, 1.0}, 12);
    EXPECT_EQ(rows.size(), 2u * 2u * 2u * 12u);
    EXPECT_LE(gmch::max_scaled_residual(rows), 1e-8);
    EXPECT_THROW(gmch::residual_fan({1}, {-1.0}, {0.0}), std::invalid_argument);
}

TEST(Certify, SmallBundlePassesAndFaultIsCaught) {
    gmch::CertifyOptions o;
    o.n_max = 4;
    o.identity_n_max = 6;
    const auto ok = gmch::certificate_bundle(o);
    for (const auto& c : ok) EXPECT_TRUE(c.pass) << gmch::wire_name(c.id);
    EXPECT_EQ(gmch::to_json(ok)["status"], "pass");

    o.inject_fault = true;
    const auto bad = gmch::certificate_bundle(o);
    bool caught = false;
    for (const auto& c : bad)
        if (c.id == gmch::IdentityId::left_recurrence) {
            ASSERT_FALSE(c.pass);
            ASSERT_TRUE(c.witness);
            EXPECT_EQ(c.witness->n, 4u);
            caught = true;
        }
    EXPECT_TRUE(caught);
    EXPECT_EQ(gmch::to_json(bad)["status"], "fail");
}
