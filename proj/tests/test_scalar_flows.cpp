#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "fkburgers/scalar_flows.hpp"

using namespace fkb;

namespace {

FlowParams p2() { return FlowParams{2.0, 1.0, 0.0}; }

}  // namespace

TEST(PhiFlow, OriginAtTimeTwo) { EXPECT_NEAR(phi_flow(p2(), 2.0, 0.0), 1.0, 1e-14); }

TEST(PhiFlow, TimeZeroIsIdentity) {
    EXPECT_EQ(phi_flow(FlowParams{3.0, 2.5, 0.7}, 0.0, 5.3), 5.3);
    EXPECT_EQ(phi_flow(p2(), 0.0, -2.0), -2.0);
}

TEST(PhiFlow, NegativeStartReachesOriginAtCrossingTime) {
    EXPECT_NEAR(phi_flow(p2(), 2.0, -1.0), 0.0, 1e-14);
}

TEST(PhiFlow, InvalidParameters) {
    EXPECT_THROW(phi_flow(FlowParams{1.0, 1.0, 0.0}, 1.0, 1.0), ParameterError);
    EXPECT_THROW(phi_flow(FlowParams{2.0, 0.5, 0.0}, 1.0, 1.0), ParameterError);
    EXPECT_THROW(phi_flow(FlowParams{2.0, 1.0, -1.0}, 1.0, 1.0), ParameterError);
}

TEST(PhiFlow, OverflowRaisesRangeError) {
    try {
        phi_flow(FlowParams{1.0001, 1.0, 0.0}, 1e6, 1e300);
        FAIL() << "expected RangeError";
    } catch (const RangeError& e) {
        EXPECT_FALSE(std::isfinite(e.magnitude()) && std::abs(e.magnitude()) < 1e300);
    }
}

TEST(CrossingTime, Examples) {
    EXPECT_EQ(crossing_time(p2(), 0.0), 0.0);
    EXPECT_NEAR(crossing_time(p2(), -1.0), 2.0, 1e-14);
    EXPECT_NEAR(crossing_time(FlowParams{2.0, 1.0, 3.0}, -1.0), 2.0 * (2.0 - std::sqrt(3.0)), 1e-14);
    EXPECT_THROW(crossing_time(p2(), 0.5), DomainError);
}

TEST(Envelope, Examples) {
    EXPECT_EQ(displacement_envelope(p2(), 0.0, 7.0), 0.0);
    EXPECT_NEAR(displacement_envelope(p2(), 2.0, 0.0), 4.0, 1e-14);
    EXPECT_NEAR(displacement_envelope(p2(), 1.0, 100.0), 10.0, 1e-12);
    EXPECT_NEAR(displacement_envelope_bracketed(p2(), 0.1, 0.0), 1.0, 1e-14);
}

TEST(Regime, Classification) {
    EXPECT_EQ(classify_regime(p2(), 2.0, 3.0), Regime::LongTime);
    EXPECT_EQ(classify_regime(p2(), 2.0, 100.0), Regime::ShortTime);
    EXPECT_EQ(classify_regime(p2(), 1.0, 0.0, 5.0), Regime::AbnormalDiffusive);
    EXPECT_EQ(classify_regime(p2(), 1.0, 0.0, 1.0), Regime::NormalConvective);
    EXPECT_EQ(classify_regime(FlowParams{2.0, 1.0, 10.0}, 1.0, 0.0), Regime::LargeCutoff);
}

TEST(CutoffRecursion, Examples) {
    const auto a = cutoff_recursion(2.0, p2(), 1.0, 1);
    ASSERT_EQ(a.size(), 2u);
    EXPECT_EQ(a[0], 0.0);
    EXPECT_EQ(a[1], 0.0);
    const auto b = cutoff_recursion(2.0, p2(), 1.0, 3);
    ASSERT_EQ(b.size(), 4u);
    EXPECT_NEAR(b[2], 2.0, 1e-14);
    EXPECT_NEAR(b[3], 4.0 * std::sqrt(2.0), 1e-13);
    const auto c = cutoff_recursion(2.0, p2(), 1.0, 200);
    EXPECT_NEAR(c.back(), 16.0, 1e-10);
    EXPECT_THROW(cutoff_recursion(1.0, p2(), 1.0, 3), ParameterError);
}

TEST(CutoffRecursion, NondecreasingAndBoundedByFixedPointBound) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> k(1.2, 5.0), u(1.0, 4.0), t(0.1, 3.0), c(1.1, 4.0);
    for (int s = 0; s < 200; ++s) {
        const FlowParams p{k(rng), u(rng), 0.0};
        const double C = c(rng), tt = t(rng);
        const auto xs = cutoff_recursion(C, p, tt, 60);
        const double bound = fixed_point_bound(C * std::pow(p.U * tt, p.growth_exponent()),
                                               C * C * p.U * tt, 1.0 / p.kappa, 1e-12);
        for (std::size_t m = 2; m < xs.size(); ++m) {
            if (m > 2) {
                EXPECT_GE(xs[m], xs[m - 1] * (1.0 - 1e-12));
            }
            EXPECT_LE(xs[m], bound * (1.0 + 1e-12));
        }
    }
}

TEST(FixedPointBound, Examples) {
    EXPECT_GE(fixed_point_bound(1e-300, 1.0, 0.5, 1.0), 1.0);
    EXPECT_GE(fixed_point_bound(1.0, 1.0, 0.5, 0.1), (3.0 + std::sqrt(5.0)) / 2.0);
    EXPECT_EQ(fixed_point_bound(3.0, 0.5, 0.9, 100.0), 100.0);
    double B = 100.0;
    for (int n = 0; n < 1000; ++n) {
        const double next = 3.0 + 0.5 * std::pow(B, 0.9);
        EXPECT_LE(next, B);
        B = next;
    }
    EXPECT_THROW(fixed_point_bound(1.0, 1.0, 1.0, 1.0), DomainError);
    EXPECT_THROW(fixed_point_bound(1.0, 1.0, 0.0, 1.0), DomainError);
}

TEST(FixedPointBound, AlphaConstantSatisfiesInequality) {
    for (double a : {0.05, 0.3, 0.5, 0.9, 0.95}) {
        const double C = alpha_constant(a);
        EXPECT_GE(C - 1.0 - std::pow(C, a), 0.0);
        EXPECT_LT((C * (1 - 1e-9)) - 1.0 - std::pow(C * (1 - 1e-9), a), 0.0);
    }
    EXPECT_NEAR(alpha_constant(0.5), (3.0 + std::sqrt(5.0)) / 2.0, 1e-10);
}

// Properties

TEST(PhiFlowProperty, Semigroup) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> k(1.1, 6.0), u(1.0, 5.0), xm(0.0, 3.0), x(0.0, 50.0),
        t(0.0, 3.0);
    for (int s = 0; s < 1000; ++s) {
        const FlowParams p{k(rng), u(rng), xm(rng)};
        const double x0 = x(rng), t1 = t(rng), t2 = t(rng);
        const double lhs = phi_flow(p, t1 + t2, x0);
        const double rhs = phi_flow(p, t1, phi_flow(p, t2, x0));
        EXPECT_LE(std::abs(lhs - rhs), 1e-9 * (1.0 + std::abs(lhs)));
    }
}

TEST(PhiFlowProperty, StrictlyIncreasingOnPositiveHalfLine) {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> k(1.1, 6.0), u(1.0, 5.0), x(0.0, 50.0), t(0.01, 3.0);
    for (int s = 0; s < 1000; ++s) {
        const FlowParams p{k(rng), u(rng), 0.5};
        const double x0 = x(rng), t0 = t(rng);
        EXPECT_LT(phi_flow(p, t0, x0), phi_flow(p, t0 * 1.01, x0));
        EXPECT_LT(phi_flow(p, t0, x0), phi_flow(p, t0, x0 + 0.01));
    }
}

TEST(PhiFlowProperty, Antisymmetry) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> k(1.1, 6.0), u(1.0, 5.0), x(-50.0, 50.0), t(-3.0, 3.0);
    for (int s = 0; s < 1000; ++s) {
        const FlowParams p{k(rng), u(rng), 0.3};
        const double x0 = x(rng), t0 = t(rng);
        EXPECT_NEAR(phi_flow(p, -t0, -x0), -phi_flow(p, t0, x0), 1e-12 * (1.0 + std::abs(x0)));
    }
}

TEST(PhiFlowProperty, EnvelopeDomination) {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> k(1.1, 6.0), u(1.0, 5.0), xm(0.0, 1.0), x(-100.0, 100.0),
        t(1.0, 10.0);
    double fitted = 0.0;
    for (int s = 0; s < 1000; ++s) {
        const FlowParams p{k(rng), u(rng), xm(rng)};
        const double tt = t(rng) / p.U, x0 = x(rng);
        const double disp = std::abs(phi_flow(p, tt, x0) - x0);
        fitted = std::max(fitted, disp / displacement_envelope(p, tt, x0));
    }
    EXPECT_LE(fitted, 8.0);
}

TEST(FixedPointBoundProperty, DominatesIterates) {
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> lc(std::log(1e-3), std::log(1e3)), al(0.05, 0.95);
    for (int s = 0; s < 1000; ++s) {
        const double c1 = std::exp(lc(rng)), c2 = std::exp(lc(rng)), a = al(rng), A0 = std::exp(lc(rng));
        const double bound = fixed_point_bound(c1, c2, a, A0);
        double B = A0;
        for (int n = 0; n < 200; ++n) {
            ASSERT_LE(B, bound) << c1 << ' ' << c2 << ' ' << a << ' ' << A0;
            B = c1 + c2 * std::pow(B, a);
        }
    }
}
