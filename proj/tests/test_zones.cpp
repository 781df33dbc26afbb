#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "fkburgers/zones.hpp"

using namespace fkb;

namespace {

ZoneLayout layout(std::vector<double> r, double kappa = 2.0) { return ZoneLayout{std::move(r), kappa}; }

PathRecord constant_path(double x, double t, int n = 50) {
    PathRecord rec;
    rec.t = t;
    rec.x = Vec{x};
    for (int k = 0; k <= n; ++k) {
        rec.times.push_back(t * k / n);
        rec.Y.push_back(Vec{x});
    }
    rec.finalize(std::nullopt);
    return rec;
}

}  // namespace

TEST(ValidateLayout, ReferenceLayoutPasses) {
    EXPECT_TRUE(validate_layout(layout({4, 6, 24, 26, 104})).pass);
}

TEST(ValidateLayout, ThickDangerousZone) {
    const auto rep = validate_layout(layout({4, 7, 28}));
    EXPECT_FALSE(rep.pass);
    EXPECT_EQ(rep.lower_index, 1u);
    EXPECT_EQ(rep.upper_index, 2u);
}

TEST(ValidateLayout, ThinSafeZone) {
    const auto rep = validate_layout(layout({4, 6, 20, 22}));
    EXPECT_FALSE(rep.pass);
    EXPECT_EQ(rep.lower_index, 2u);
    EXPECT_NE(rep.first_violation.find("too thin"), std::string::npos);
}

TEST(ValidateLayout, Degenerate) {
    EXPECT_THROW(validate_layout(layout({4})), ValidationError);
    EXPECT_FALSE(validate_layout(layout({0.5, 1})).pass);
}

TEST(ValidateLayout, GeneralizedRules) {
    ZoneLayout L = layout({4, 8, 20});
    EXPECT_FALSE(validate_layout(L).pass);
    L.thin_C = 2.0;
    L.fat_eps = 1.5;
    EXPECT_TRUE(validate_layout(L).pass);
}

TEST(Subdivide, SingleInsertion) {
    const ZoneLayout out = subdivide(layout({4, 6, 200}));
    EXPECT_EQ(out.radii, (std::vector<double>{4, 6, 24, 24, 200}));
    EXPECT_TRUE(validate_layout(out).pass);
}

TEST(Subdivide, UnchangedWhenRatiosSmall) {
    const ZoneLayout L = layout({4, 6, 24, 26, 104});
    EXPECT_EQ(subdivide(L), L);
}

TEST(Subdivide, LargeRatioInsertsUntilBelowSixteen) {
    // Iterating the rule from 6 towards 10000 inserts 24, 96, 384 and 1536.
    const ZoneLayout out = subdivide(layout({4, 6, 10000}));
    EXPECT_EQ(out.radii, (std::vector<double>{4, 6, 24, 24, 96, 96, 384, 384, 1536, 1536, 10000}));
    for (std::size_t i = 1; i <= out.safe_count(); ++i) EXPECT_LT(out.R(2 * i + 1), 16.0 * out.R(2 * i));
}

TEST(Subdivide, Properties) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> fat(4.0, 400.0), start(1.0, 50.0), thin(0.0, 1.0);
    for (int s = 0; s < 200; ++s) {
        std::vector<double> r{start(rng)};
        for (int k = 0; k < 6; ++k) {
            r.push_back(r.back() + thin(rng) * std::sqrt(r.back()));
            r.push_back(r.back() * fat(rng));
        }
        const ZoneLayout L = layout(r);
        ASSERT_TRUE(validate_layout(L).pass);
        const ZoneLayout S = subdivide(L);
        EXPECT_TRUE(validate_layout(S).pass);
        EXPECT_EQ(subdivide(S), S);
        double width_in = 0.0, width_out = 0.0;
        for (std::size_t i = 1; i <= L.dangerous_count(); ++i) width_in += L.R(2 * i) - L.R(2 * i - 1);
        for (std::size_t i = 1; i <= S.dangerous_count(); ++i) width_out += S.R(2 * i) - S.R(2 * i - 1);
        EXPECT_EQ(width_in, width_out);
        for (std::size_t i = 1; i <= S.safe_count(); ++i) EXPECT_LT(S.R(2 * i + 1), 16.0 * S.R(2 * i));
    }
}

TEST(SafeInterval, TimeZeroIsZone) {
    const ZoneLayout L = layout({4, 6, 24, 26, 104});
    const SafeInterval I = safe_interval(L, 1, 0.0, 1.0, 2.0, false);
    EXPECT_EQ(I.lower, 6.0);
    EXPECT_EQ(I.upper, 24.0);
}

TEST(SafeInterval, PrintedFormula) {
    const ZoneLayout L = layout({50, 100, 400});
    const SafeInterval I = safe_interval(L, 1, 0.25, 1.0, 2.0, false);
    EXPECT_NEAR(I.lower, 110.0, 1e-12);
    EXPECT_NEAR(I.upper, 380.0, 1e-12);
    EXPECT_THROW(safe_interval(L, 2, 0.25, 1.0, 2.0, false), ParameterError);
    EXPECT_THROW(safe_interval(L, 0, 0.25, 1.0, 2.0, false), ParameterError);
}

TEST(SafeInterval, NonemptyForLargeRadii) {
    const double kappa = 2.0, C = 2.0, U = 1.0, t = 0.5;
    const double R2 = std::pow(16.0 * C * bracket(U * t), kappa / (kappa - 1.0));
    const ZoneLayout L = layout({R2 - 1.0, R2, 4.0 * R2}, kappa);
    const SafeInterval I = safe_interval(L, 1, t, U, C, false);
    EXPECT_GE(I.upper - I.lower, R2 / 2.0);
}

TEST(SafeInterval, Nesting) {
    const ZoneLayout L = layout({4, 6, 24, 26, 104});
    for (bool viscous : {false, true}) {
        SafeInterval prev = safe_interval(L, 1, 1.0, 1.0, 1.5, viscous);
        for (int k = 1; k <= 100; ++k) {
            const SafeInterval I = safe_interval(L, 1, 1.0 - k / 100.0, 1.0, 1.5, viscous);
            EXPECT_LE(I.lower, prev.lower);
            EXPECT_GE(I.upper, prev.upper);
            prev = I;
        }
    }
}

TEST(Locate, Classification) {
    const ZoneLayout L = layout({4, 6, 24, 26, 104});
    EXPECT_EQ(locate(L, 0.0, 1.0).kind, LocationKind::Core);
    EXPECT_EQ(locate(L, 5.0, 1.0), (Location{LocationKind::Dangerous, 1}));
    EXPECT_EQ(locate(L, 15.0, 1.0), (Location{LocationKind::Safe, 1}));
    EXPECT_EQ(locate(L, 25.0, 1.0), (Location{LocationKind::Dangerous, 2}));
    EXPECT_EQ(locate(L, 3.0, 1.0), (Location{LocationKind::Safe, 0}));
    EXPECT_EQ(locate(L, 500.0, 1.0).kind, LocationKind::Beyond);
    EXPECT_EQ(locate(L, 5.0, 10.0).kind, LocationKind::Core);
    EXPECT_GT(core_threshold(2.0, 2.0, 1.0, 1.0), 30000.0);
}

TEST(Stability, ConstantTrajectory) {
    const ZoneLayout L = layout({4, 6, 24, 26, 104});
    const auto res = stability_violations(L, constant_path(12.0, 1.0), 1, 1.0, 1.0, 1.5, false);
    EXPECT_EQ(res.violations, 0u);
    EXPECT_GT(res.min_margin, 0.0);
}

TEST(Stability, JumpOutsideIsCounted) {
    const ZoneLayout L = layout({4, 6, 24, 26, 104});
    PathRecord rec = constant_path(12.0, 1.0);
    for (std::size_t k = 25; k < rec.size(); ++k) rec.Y[k] = Vec{30.0};
    const auto res = stability_violations(L, rec, 1, 1.0, 1.0, 1.5, false);
    EXPECT_GT(res.violations, 0u);
    EXPECT_LT(res.min_margin, 0.0);
}

TEST(Stability, StartOutsideIntervalIsPrecondition) {
    const ZoneLayout L = layout({4, 6, 24, 26, 104});
    EXPECT_THROW(stability_violations(L, constant_path(7.0, 1.0), 1, 1.0, 1.0, 1.5, false),
                 PreconditionError);
}
