#include <gtest/gtest.h>

#include <cmath>

#include "fkburgers/harness.hpp"
#include "fkburgers/picard.hpp"

using namespace fkb;

namespace {

IterationConfig small_config(double L, int n, std::vector<double> slices, int paths, int steps, int m_max) {
    IterationConfig cfg;
    cfg.grid = SpatialGrid::box(1, L, n);
    cfg.slices = std::move(slices);
    cfg.mc_samples = paths;
    cfg.sde_steps = steps;
    cfg.m_max = m_max;
    cfg.seed = 23;
    return cfg;
}

ZoneLayout fat_layout() {
    ZoneLayout L;
    L.radii = {4, 6, 24, 26, 104};
    L.kappa = 2.0;
    L.thin_C = 1.0;
    L.fat_eps = 3.0;
    return L;
}

SchemeState annular_state(int m_max) {
    const ZoneLayout L = fat_layout();
    const VelocityField base = make_prototype(1, 1.0, 2.0);
    std::vector<double> amps;
    for (std::size_t i = 1; i <= L.dangerous_count(); ++i) {
        const double mid = 0.5 * (L.R(2 * i - 1) + L.R(2 * i));
        amps.push_back(100.0 * std::abs(base(Vec{mid})[0]));
    }
    const VelocityField u0 = make_annular(base, L, amps, GrowthConstants{1, 1, 1, 5, 0}, Vec{1.0});
    IterationConfig cfg = small_config(40.0, 401, {0.0, 0.25, 0.5, 0.75, 1.0}, 2, 1, m_max);
    cfg.viscous = false;
    return run_nonviscous(u0, cfg);
}

}  // namespace

TEST(Wilson, Edges) {
    const auto w0 = wilson_interval(0, 100);
    EXPECT_EQ(w0.lower, 0.0);
    EXPECT_NEAR(w0.upper, 0.037, 1e-3);
    const auto w1 = wilson_interval(100, 100);
    EXPECT_NEAR(w1.upper, 1.0, 1e-12);
    const auto e = wilson_interval(0, 0);
    EXPECT_EQ(e.lower, 0.0);
    EXPECT_EQ(e.upper, 1.0);
    const auto h = wilson_interval(50, 100);
    EXPECT_NEAR(0.5 * (h.lower + h.upper), 0.5, 1e-12);
}

TEST(LeastSquares, ExactLine) {
    const auto f = least_squares({0, 1, 2, 3}, {1, -1, -3, -5});
    EXPECT_NEAR(f.slope, -2.0, 1e-12);
    EXPECT_NEAR(f.intercept, 1.0, 1e-12);
    EXPECT_NEAR(f.r2, 1.0, 1e-12);
    EXPECT_THROW(least_squares({1.0}, {1.0}), ParameterError);
    EXPECT_THROW(least_squares({1.0, 1.0}, {0.0, 2.0}), ParameterError);
}

TEST(Hyp1, PrototypeSatisfiesGrowth) {
    const auto r = verify_hyp1(make_prototype(1, 1.0, 2.0), 2000);
    EXPECT_TRUE(r.pass) << r.status;
    EXPECT_EQ(r.violation_fraction, 0.0);
}

TEST(MtTail, GaussianRate) {
    MtTailSetup s;
    s.paths = 20000;
    s.steps = 200;
    const auto r = verify_mt_tail(s, Thresholds{});
    EXPECT_TRUE(r.pass);
    EXPECT_LT(r.get("slope"), 0.0);
    EXPECT_GE(r.get("c"), 0.15);
    EXPECT_LE(r.get("c"), 0.35);
    EXPECT_LE(r.get("fourth_moment_split"), 0.2);
}

TEST(MtTail, ZeroVarianceIsDegenerate) {
    MtTailSetup s;
    s.paths = 100;
    s.steps = 10;
    s.variance = 0.0;
    const auto r = verify_mt_tail(s, Thresholds{});
    EXPECT_FALSE(r.pass);
    EXPECT_EQ(r.status, "degenerate");
}

TEST(MtTail, JobsDoNotChangeTheResult) {
    MtTailSetup s;
    s.paths = 2000;
    s.steps = 50;
    const auto a = verify_mt_tail(s, Thresholds{});
    s.jobs = 3;
    const auto b = verify_mt_tail(s, Thresholds{});
    EXPECT_EQ(a.metrics, b.metrics);
}

TEST(AppendixLemma, NoFailures) {
    const auto r = verify_appendix_lemma(LemmaSetup{300, 200, 4});
    EXPECT_TRUE(r.pass);
    EXPECT_EQ(r.get("failures"), 0.0);
    EXPECT_LE(r.fitted_constant, 1.0);
}

TEST(VDecay, ConstantFieldIsNoiseDominated) {
    IterationConfig cfg = small_config(4.0, 41, {0.0, 1.0 / 128, 1.0 / 64}, 40, 10, 3);
    const auto st = run_viscous(make_constant(Vec{0.5}), cfg);
    const auto r = verify_v_decay(st, 2.0, Thresholds{});
    EXPECT_FALSE(r.pass);
    EXPECT_EQ(r.status, "noise-dominated");
    EXPECT_EQ(r.get("sup_v_m2"), 0.0);
}

TEST(VDecay, NeedsFourIterates) {
    IterationConfig cfg = small_config(4.0, 21, {0.0, 1.0 / 64}, 20, 10, 2);
    const auto st = run_viscous(make_constant(Vec{0.5}), cfg);
    EXPECT_THROW(verify_v_decay(st, 2.0, Thresholds{}), PreconditionError);
}

TEST(VDecay, LinearProfileContracts) {
    IterationConfig cfg = small_config(4.0, 81, {0.0, 1.0 / 256, 1.0 / 128, 1.0 / 64}, 400, 20, 4);
    const auto st = run_viscous(make_linear_1d(), cfg);
    const auto r = verify_v_decay(st, 2.0, Thresholds{});
    EXPECT_TRUE(r.pass) << r.status;
    EXPECT_LE(r.get("slope"), std::log(0.5) + 0.3);
}

TEST(UniformBounds, ConstantFieldIsStable) {
    IterationConfig cfg = small_config(4.0, 41, {0.0, 0.25, 0.5}, 40, 10, 2);
    cfg.gradients = true;
    const auto st = run_viscous(make_constant(Vec{0.5}), cfg);
    const auto r = verify_uniform_bounds(st, 2.0, Thresholds{});
    EXPECT_TRUE(r.pass);
    EXPECT_NEAR(r.get("stability_c0"), 1.0, 1e-12);
    EXPECT_EQ(r.get("c1_m1"), 0.0);
}

TEST(UniformBounds, GradientsRequired) {
    IterationConfig cfg = small_config(4.0, 21, {0.0, 0.5}, 20, 10, 1);
    const auto st = run_viscous(make_constant(Vec{0.5}), cfg);
    EXPECT_THROW(verify_uniform_bounds(st, 2.0, Thresholds{}), PreconditionError);
    EXPECT_THROW(verify_gradient_consistency(st, 2.0, Thresholds{}), PreconditionError);
}

TEST(GradientConsistency, PrototypeAgrees) {
    IterationConfig cfg = small_config(10.0, 101, {0.0, 0.5, 1.0}, 1000, 50, 2);
    cfg.gradients = true;
    const auto st = run_viscous(make_prototype(1, 1.0, 2.0), cfg);
    const auto r = verify_gradient_consistency(st, 5.0, Thresholds{});
    EXPECT_TRUE(r.pass) << r.get("agreement");
    EXPECT_GE(r.get("agreement"), 0.95);
}

TEST(Displacement, LargerUMakesAbnormalPathsRarer) {
    DisplacementSetup s;
    s.paths = 1000;
    s.times = {1.0};
    s.starts = {Vec{0.0}, Vec{3.0}};
    double freq[2];
    for (int k = 0; k < 2; ++k) {
        const double U = k == 0 ? 1.0 : 2.0;
        IterationConfig cfg = small_config(20.0, 81, {0.0, 0.5, 1.0}, 40, 20, 1);
        const auto st = run_viscous(make_prototype(1, U, 2.0), cfg);
        const auto r = verify_displacement(st, s, BoundConstants{}, Thresholds{});
        freq[k] = r.get("abnormal_frequency");
        EXPECT_EQ(r.sub("normal").violations, 0u);
    }
    EXPECT_GT(freq[0], 0.0);
    EXPECT_LT(freq[1], freq[0]);
}

TEST(Displacement, TimeOutsideRangeIsRejected) {
    IterationConfig cfg = small_config(10.0, 41, {0.0, 1.0}, 20, 10, 0);
    const auto st = run_viscous(make_prototype(1, 1.0, 2.0), cfg);
    DisplacementSetup s;
    s.times = {2.0};
    EXPECT_THROW(verify_displacement(st, s, BoundConstants{}, Thresholds{}), PreconditionError);
}

TEST(SafeZones, NonViscousAnnularHasNoViolations) {
    const auto st = annular_state(1);
    SafeZoneSetup s;
    s.layout = fat_layout();
    s.starts = 100;
    s.steps = 400;
    BoundConstants k;
    k.C = 1.5;
    const auto r = verify_safe_zones(st, s, k, Thresholds{});
    EXPECT_TRUE(r.pass);
    EXPECT_EQ(r.get("violations"), 0.0);
    EXPECT_GT(r.get("min_margin"), 0.0);
}

TEST(SafeZones, EmptyIntervalIsAPreconditionError) {
    const auto st = annular_state(0);
    SafeZoneSetup s;
    s.layout = fat_layout();
    BoundConstants k;
    k.C = 2.0;
    EXPECT_THROW(verify_safe_zones(st, s, k, Thresholds{}), PreconditionError);
}

TEST(SafeZones, InvalidLayoutIsRejected) {
    const auto st = annular_state(0);
    SafeZoneSetup s;
    s.layout = fat_layout();
    s.layout.radii[2] = 20.0;
    EXPECT_THROW(verify_safe_zones(st, s, BoundConstants{}, Thresholds{}), ValidationError);
}

TEST(Penalized, ReportsEveryLevel) {
    IterationConfig cfg = small_config(10.0, 41, {0.0, 0.5}, 40, 10, 1);
    const auto st = run_viscous(make_prototype(1, 1.0, 2.0), cfg);
    PenalizedSetup s;
    s.m = 1;
    s.levels = {4, 5};
    s.points = 5;
    const auto r = verify_penalized(st, s);
    for (int n : {4, 5}) {
        EXPECT_GT(r.get("T_n" + std::to_string(n)), 0.0);
        EXPECT_GE(r.get("sup_n" + std::to_string(n)), 0.0);
    }
    EXPECT_EQ(r.samples, 2u * 5u * 2u);
}

TEST(Thresholds, Validation) {
    Thresholds th;
    EXPECT_NO_THROW(th.validate());
    th.theta = 1.5;
    EXPECT_THROW(th.validate(), ConfigError);
}
