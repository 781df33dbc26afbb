#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "fkburgers/velocity.hpp"

using namespace fkb;

namespace {

ZoneLayout reference_layout() { return ZoneLayout{{4, 6, 24, 26, 104}, 2.0}; }

}  // namespace

TEST(Prototype, Examples) {
    const auto f2 = make_prototype(2, 2.0, 2.0);
    const Vec v = f2(Vec{1.0, 0.0});
    EXPECT_NEAR(v[0], 2.0, 1e-14);
    EXPECT_NEAR(v[1], 0.0, 1e-14);
    const auto f1 = make_prototype(1, 1.0, 2.0);
    EXPECT_NEAR(f1(4.0), 2.0, 1e-14);
    EXPECT_NEAR(f1(-4.0), -2.0, 1e-14);
    EXPECT_EQ(f2(Vec{0.0, 0.0}), Vec(2));
}

TEST(Prototype, BlendIsC2AtUnitRadius) {
    for (double kappa : {1.5, 2.0, 3.0, 7.0}) {
        const auto f = make_prototype(1, 1.0, kappa);
        const double eps = 1e-7;
        EXPECT_NEAR(f(1.0 - eps), f(1.0 + eps), 1e-6);
        EXPECT_NEAR(f.gradient(Vec{1.0 - eps})(0, 0), f.gradient(Vec{1.0 + eps})(0, 0), 1e-5);
        EXPECT_NEAR(f.hessian(Vec{1.0 - eps})(0, 0, 0), f.hessian(Vec{1.0 + eps})(0, 0, 0), 1e-5);
    }
}

TEST(Prototype, RejectsNonUnitDirectionMap) {
    Mat Q = Mat::identity(2);
    Q(0, 0) = 2.0;
    EXPECT_THROW(make_prototype(2, 1.0, 2.0, Q), ValidationError);
}

TEST(Prototype, AnalyticGradientMatchesFiniteDifferences) {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> n;
    std::uniform_real_distribution<double> rad(0.05, 30.0);
    for (int d = 1; d <= 3; ++d) {
        const auto f = make_prototype(d, 1.7, 2.5, rotation(d, 0.7));
        for (int s = 0; s < 1000; ++s) {
            Vec w(d);
            for (int i = 0; i < d; ++i) w[i] = n(rng);
            const double r = rad(rng);
            if (std::abs(r - 1.0) < 0.02) continue;
            const Vec x = w * (r / w.norm());
            const Mat G = f.gradient(x);
            const Mat F = fd_gradient([&](const Vec& y) { return f(y); }, x, 1e-6 * (1.0 + r));
            EXPECT_LE((G - F).frobenius(), 1e-5 * std::max(1.0, G.frobenius()));
            const Tensor3 H = f.hessian(x);
            for (int i = 0; i < d; ++i) {
                Vec xp = x, xm = x;
                const double h = 1e-5 * (1.0 + r);
                xp[i] += h;
                xm[i] -= h;
                const Mat D = (f.gradient(xp) - f.gradient(xm)) * (0.5 / h);
                for (int j = 0; j < d; ++j)
                    for (int k = 0; k < d; ++k)
                        EXPECT_NEAR(H(i, j, k), D(j, k), 1e-4 * std::max(1.0, H.frobenius()));
            }
        }
    }
}

TEST(Hyp1, PrototypeAndConstantPass) {
    const auto f = make_prototype(2, 1.5, 2.0, rotation(2, 1.0));
    const auto rep = check_hyp1(f, 2000, 100.0);
    EXPECT_TRUE(rep.pass);
    EXPECT_LE(rep.sup_ratio, 1.5);
    EXPECT_TRUE(check_hyp1(make_constant(Vec{0.8}, 1.0), 100, 10.0).pass);
}

TEST(Hyp1, AnnularBumpFailsInsideZone) {
    const auto base = make_prototype(1, 1.0, 2.0);
    const auto f = make_annular(base, reference_layout(), {50.0}, GrowthConstants{1, 1, 1, 5.0, 0.0});
    const auto rep = check_hyp1(f, 5000, 50.0);
    EXPECT_FALSE(rep.pass);
    EXPECT_GT(std::abs(rep.worst_point[0]), 4.0);
    EXPECT_LT(std::abs(rep.worst_point[0]), 6.0);
}

TEST(Apriori, PrototypeFittedConstantsPass) {
    for (int d = 1; d <= 2; ++d) {
        const auto f = make_prototype(d, 1.0, 2.0);
        const auto rep = check_apriori(f, 3000, 60.0);
        EXPECT_TRUE(rep.pass()) << rep.value.sup_ratio << ' ' << rep.gradient.sup_ratio << ' '
                                << rep.hessian.sup_ratio;
        EXPECT_LE(f.constants().K0, 1.0);
        EXPECT_EQ(f.constants().alpha, 0.0);
    }
}

TEST(Apriori, ConstantFieldHasZeroDerivativeRatios) {
    const auto rep = check_apriori(make_constant(Vec{0.5, -0.5}, 1.0), 500, 10.0);
    EXPECT_TRUE(rep.pass());
    EXPECT_EQ(rep.gradient.sup_ratio, 0.0);
    EXPECT_EQ(rep.hessian.sup_ratio, 0.0);
}

TEST(Apriori, InvariantGateBeforeSampling) {
    const auto f = make_prototype(1, 2.0, 2.0);
    EXPECT_THROW(check_apriori(f.with_constants(GrowthConstants{1.0, 1.5, 10.0, 0.0, 0.0}), 10, 10.0),
                 ValidationError);
}

TEST(Annular, ZeroAmplitudesReproduceBase) {
    const auto base = make_prototype(2, 1.0, 2.0, rotation(2, 0.3));
    const auto f = make_annular(base, reference_layout(), {0.0, 0.0}, base.constants());
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-120.0, 120.0);
    for (int s = 0; s < 1000; ++s) {
        const Vec x{u(rng), u(rng)};
        EXPECT_EQ(f(x), base(x));
    }
}

TEST(Annular, BumpInsideZoneAndBaseOutside) {
    const auto base = make_prototype(1, 1.0, 2.0);
    const auto f = make_annular(base, reference_layout(), {50.0}, GrowthConstants{1, 1, 1, 4.0, 0.0});
    EXPECT_GE(std::abs(f(5.0)), 25.0);
    EXPECT_EQ(f(3.9), base(3.9));
    EXPECT_EQ(f(-3.9), base(-3.9));
    EXPECT_EQ(f(6.0), base(6.0));
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-120.0, 120.0);
    for (int s = 0; s < 1000; ++s) {
        const double x = u(rng);
        const double r = std::abs(x);
        if (r > 4.0 && r < 6.0) {
            EXPECT_LE(std::abs(f(x)), f.bound0(r) * (1 + 1e-12));
        } else {
            EXPECT_EQ(f(x), base(x));
        }
    }
}

TEST(Annular, AmplitudeAboveCapRejected) {
    const auto base = make_prototype(1, 1.0, 2.0);
    try {
        make_annular(base, reference_layout(), {1e9}, GrowthConstants{10.0, 100.0, 1000.0, 0.0, 0.0});
        FAIL() << "expected AmplitudeError";
    } catch (const AmplitudeError& e) {
        EXPECT_EQ(e.zone(), 1u);
        EXPECT_NEAR(e.cap(), 10.0 * std::sqrt(7.0), 1e-12);
        EXPECT_NE(std::string(e.what()).find("cap"), std::string::npos);
    }
}

TEST(Annular, GradientMatchesFiniteDifferences) {
    const auto base = make_prototype(2, 1.0, 2.0);
    const auto f = make_annular(base, reference_layout(), {20.0}, GrowthConstants{1, 1, 1, 3.0, 0.0});
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> r(4.05, 5.95), th(0.0, 6.28);
    for (int s = 0; s < 300; ++s) {
        const double rr = r(rng), tt = th(rng);
        const Vec x{rr * std::cos(tt), rr * std::sin(tt)};
        const Mat G = f.gradient(x);
        const Mat F = fd_gradient([&](const Vec& y) { return f(y); }, x, 1e-6);
        EXPECT_LE((G - F).frobenius(), 1e-4 * std::max(1.0, G.frobenius()));
    }
}

TEST(Tabulated, InterpolatesNodesExactlyAndShockIsBounded) {
    const auto f = make_shock_1d();
    EXPECT_NEAR(f(0.0), 0.0, 1e-15);
    EXPECT_NEAR(f(2.0), -std::tanh(1.0), 1e-5);
    EXPECT_NEAR(f.gradient(Vec{0.0})(0, 0), -0.5, 1e-4);
    EXPECT_TRUE(check_hyp1(f, 1000, 100.0).pass);
}

TEST(Linear, Gradient) {
    Mat A(2);
    A(0, 0) = 1.0;
    A(0, 1) = 2.0;
    A(1, 0) = -1.0;
    const auto f = make_linear(A, 3.0);
    const Mat G = f.gradient(Vec{0.3, 0.4});
    EXPECT_EQ(G(1, 0), A(0, 1));
    EXPECT_EQ(G(0, 1), A(1, 0));
    EXPECT_EQ(make_linear_1d()(3.0), 3.0);
}

TEST(GrowthConstants, Relations) {
    EXPECT_NO_THROW((GrowthConstants{1, 1, 1, 0, 0}.validate(1.0)));
    EXPECT_THROW((GrowthConstants{2, 4, 8, 0, 0}.validate(1.0)), ValidationError);
    EXPECT_THROW((GrowthConstants{1, 0.5, 1, 0, 0}.validate(1.0)), ValidationError);
    EXPECT_THROW((GrowthConstants{1, 4, 4, 0, 0}.validate(1.0)), ValidationError);
}

TEST(Penalty, Examples) {
    const PenaltySpec s{3, 2.0, 1.5, 0.5, 2.0};
    EXPECT_EQ(penalty_eval(s, Vec{4.0}).value, 0.0);
    const double r = 32.0;
    EXPECT_DOUBLE_EQ(penalty_eval(s, Vec{r}).value,
                     2.0 * 4.0 * 1.5 * std::pow(2.0 * (1.0 + r * r), 0.25 + 0.5));
    const double mid = 12.0;
    const double full = 2.0 * 4.0 * 1.5 * std::pow(2.0 * (1.0 + mid * mid), 0.75);
    EXPECT_NEAR(penalty_eval(s, Vec{mid}).value, 0.5 * full, 1e-9 * full);
    EXPECT_EQ(smoothstep_chi(1.5), 0.5);
}

TEST(PenaltyProperty, LowerBoundAndGradient) {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(-1.0, 1.0), scale(2.0, 40.0);
    for (int n : {0, 2, 5}) {
        const PenaltySpec s{n, 2.0, 1.3, 0.4, 2.5};
        const double e1 = s.alpha + 2.0 / s.kappa;
        double fitted_c = 0.0;
        for (int k = 0; k < 1000; ++k) {
            Vec x{u(rng), u(rng)};
            x *= (s.radius() * 2.0 * scale(rng) / 2.0) / x.norm();
            const auto v = penalty_eval(s, x);
            EXPECT_GE(v.value, 2.0 * s.C * s.C * s.K1 * std::pow(1.0 + x.norm(), e1) * (1 - 1e-12));
            Vec y{u(rng), u(rng)};
            y *= (s.radius() * (0.5 + 2.0 * std::abs(u(rng)))) / y.norm();
            const auto w = penalty_eval(s, y);
            if (y.norm() <= s.radius()) {
                EXPECT_EQ(w.gradient.norm(), 0.0);
            } else {
                fitted_c = std::max(fitted_c, w.gradient.norm() / (s.C * s.C * s.K1 *
                                                                   std::pow(1.0 + y.norm(), e1 - 1.0)));
                const double h = 1e-6 * y.norm();
                Vec yp = y, ym = y;
                yp[0] += h;
                ym[0] -= h;
                EXPECT_NEAR(w.gradient[0], (penalty_eval(s, yp).value - penalty_eval(s, ym).value) / (2 * h),
                            1e-5 * (1.0 + w.gradient.norm()));
            }
        }
        EXPECT_LT(fitted_c, 50.0);
    }
}

TEST(TimeWindows, Formulas) {
    const GrowthConstants g{1, 1, 1, 1.0, 0.0};
    EXPECT_NEAR(t_min(2.0, g, 2.0, 1.0, 0.5, 1.0), 1.0 / (8.0 * 4.0), 1e-15);
    EXPECT_NEAR(t_n(2.0, g, 2.0, 3), 1.0 / (8.0 * 64.0), 1e-15);
}
