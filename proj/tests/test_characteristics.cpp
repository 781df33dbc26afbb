#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "fkburgers/brownian.hpp"
#include "fkburgers/characteristics.hpp"
#include "fkburgers/grid_field.hpp"
#include "fkburgers/time_ordered.hpp"

using namespace fkb;

namespace {

GridField constant_field(double c, double L = 30.0, int n = 61) {
    return sample_initial(make_constant(Vec{c}), SpatialGrid::box(1, L, n), {0.0, 1.0, 2.0});
}

}  // namespace

TEST(Brownian, ZeroVarianceGivesUnitM) {
    const auto b = sample_brownian(3, 1, 1.0, 50, 0.0);
    EXPECT_DOUBLE_EQ(b.m_t(), 1.0);
}

TEST(Brownian, SameSeedSamePath) {
    const auto a = sample_brownian(42, 2, 1.5, 100);
    const auto b = sample_brownian(42, 2, 1.5, 100);
    EXPECT_EQ(a.values, b.values);
    const auto c = sample_brownian(43, 2, 1.5, 100);
    EXPECT_NE(a.values, c.values);
}

TEST(Brownian, MeanSupMatchesReflectionValue) {
    const int n = 100000;
    double s = 0.0;
    for (int p = 0; p < n; ++p) s += sample_brownian(derive_seed(7, p), 1, 1.0, 2000).running_max_abs;
    // Discrete monitoring biases the sup low by about 0.58 sqrt(2 / 2000), under 1%.
    const double expected = std::sqrt(2.0) * std::sqrt(M_PI / 2.0);
    EXPECT_NEAR(s / n, expected, 0.02 * expected);
}

TEST(Brownian, IncrementVariance) {
    const int n = 10000;
    const double t = 1.0;
    const int steps = 10;
    double sum = 0.0, sum2 = 0.0;
    for (int p = 0; p < n; ++p) {
        const auto b = sample_brownian(derive_seed(11, p), 1, t, steps);
        const double inc = b.at(1)[0] - b.at(0)[0];
        sum += inc;
        sum2 += inc * inc;
    }
    const double var = sum2 / n - (sum / n) * (sum / n);
    const double expected = 2.0 * t / steps;
    // Variance of the sample variance is 2 sigma^4 / n.
    EXPECT_NEAR(var, expected, 5.0 * expected * std::sqrt(2.0 / n));
}

TEST(Brownian, NoiseBankAntitheticMirror) {
    NoiseBank bank(5, 2, 8, 20, true);
    for (int k = 0; k <= 20; ++k)
        for (int i = 0; i < 2; ++i) EXPECT_EQ(bank.w(k, 3, i), -bank.w(k, 2, i));
    const auto p = bank.path(0, 4.0);
    EXPECT_DOUBLE_EQ(p.at(20)[1], 2.0 * bank.w(20, 0, 1));
}

TEST(Deterministic, ZeroDriftStays) {
    const auto rec = integrate_deterministic([](double, const Vec& y) { return Vec(y.dim); }, 2.0, Vec{1.5, -2.0}, 10);
    for (const Vec& y : rec.Y) {
        EXPECT_EQ(y[0], 1.5);
        EXPECT_EQ(y[1], -2.0);
    }
    EXPECT_DOUBLE_EQ(rec.m_t, 1.0);
    EXPECT_FALSE(rec.has_noise());
}

TEST(Deterministic, LinearOdeGivesE) {
    const auto rec = integrate_deterministic([](double, const Vec& y) { return y; }, 1.0, Vec{1.0}, 1000);
    EXPECT_NEAR(rec.end_Y()[0], std::exp(1.0), 1e-8 * std::exp(1.0));
    EXPECT_EQ(rec.Y.front()[0], 1.0);
}

TEST(Deterministic, FourthOrder) {
    double prev = 0.0;
    for (int steps : {10, 20, 40}) {
        const auto rec = integrate_deterministic([](double, const Vec& y) { return y; }, 1.0, Vec{1.0}, steps);
        const double err = std::abs(rec.end_Y()[0] - std::exp(1.0));
        if (prev > 0.0) {
            EXPECT_GE(prev / err, std::pow(2.0, 3.5));
        }
        prev = err;
    }
}

TEST(Deterministic, ComparisonFlowFromOrigin) {
    const FlowParams p{2.0, 1.0, 1e-18};
    const DriftFn v = [&](double, const Vec& y) { return Vec{comparison_velocity(p, y[0])}; };
    DeterministicOptions opt;
    opt.grading = 3.0;
    opt.flow = p;
    const auto rec = integrate_deterministic(v, 2.0, Vec{0.0}, 1000, opt);
    EXPECT_NEAR(rec.end_Y()[0], 1.0, 1e-6);
    EXPECT_NEAR(rec.end_Y()[0], phi_flow(p, 2.0, 0.0), 1e-6);
}

TEST(Deterministic, BlowupRadius) {
    DeterministicOptions opt;
    opt.blowup_radius = 10.0;
    EXPECT_THROW(integrate_deterministic([](double, const Vec& y) { return y * 5.0; }, 2.0, Vec{1.0}, 100, opt),
                 DivergenceError);
}

TEST(Stochastic, ZeroDriftFollowsNoise) {
    const auto f = constant_field(0.0);
    const auto noise = sample_brownian(9, 1, 1.0, 64);
    const auto rec = integrate_stochastic(f, 1.0, Vec{0.5}, noise);
    for (std::size_t k = 0; k < rec.size(); ++k) {
        EXPECT_EQ(rec.Y[k][0], 0.5);
        EXPECT_EQ(rec.X(k)[0], rec.Y[k][0] + rec.B[k][0]);
    }
}

TEST(Stochastic, ConstantDriftExact) {
    const auto f = constant_field(0.75);
    const auto noise = sample_brownian(10, 1, 1.0, 50);
    const auto rec = integrate_stochastic(f, 1.0, Vec{-1.0}, noise);
    for (std::size_t k = 0; k < rec.size(); ++k) EXPECT_NEAR(rec.Y[k][0], -1.0 + 0.75 * rec.times[k], 1e-13);
}

TEST(Stochastic, LinearProfileMeanIsE) {
    const auto f = sample_initial(make_linear_1d(1.0), SpatialGrid::box(1, 40.0, 801), {0.0, 1.0});
    const int n = 10000;
    double s = 0.0, s2 = 0.0;
    for (int p = 0; p < n; ++p) {
        const auto rec = integrate_stochastic(f, 1.0, Vec{1.0}, sample_brownian(derive_seed(21, p), 1, 1.0, 200));
        const double y = rec.end_Y()[0];
        s += y;
        s2 += y * y;
    }
    const double mean = s / n, se = std::sqrt((s2 / n - mean * mean) / n);
    EXPECT_NEAR(mean, std::exp(1.0), 4.0 * se + 1e-3);
}

TEST(Stochastic, ZeroDriftMartingale) {
    const auto f = constant_field(0.0);
    const int n = 10000;
    double s = 0.0, s2 = 0.0;
    for (int p = 0; p < n; ++p) {
        const auto rec = integrate_stochastic(f, 1.0, Vec{2.0}, sample_brownian(derive_seed(22, p), 1, 1.0, 20));
        const double x = rec.end_X()[0];
        s += x;
        s2 += x * x;
    }
    const double mean = s / n, se = std::sqrt((s2 / n - mean * mean) / n);
    EXPECT_NEAR(mean, 2.0, 4.0 * se);
}

TEST(Stochastic, RegimeTagsRecomputed) {
    const auto f = constant_field(0.3);
    StochasticOptions opt;
    for (int p = 0; p < 50; ++p) {
        const auto rec = integrate_stochastic(f, 0.7, Vec{3.0}, sample_brownian(derive_seed(23, p), 1, 0.7, 30), opt);
        EXPECT_EQ(rec.regime, classify_regime(opt.flow, rec.t, rec.x.norm(), rec.m_t * std::sqrt(rec.t)));
        EXPECT_GE(rec.m_t, 1.0);
    }
}

TEST(Displacement, ZeroDriftPasses) {
    PathRecord rec;
    rec.t = 1.0;
    rec.x = Vec{1.0};
    rec.times = {0.0, 1.0};
    rec.Y = {Vec{1.0}, Vec{1.0}};
    rec.finalize(std::nullopt);
    const auto c = check_displacement(rec, FlowParams{2.0, 1.0, 0.0}, BoundConstants{});
    EXPECT_EQ(rec.max_displacement, 0.0);
    EXPECT_TRUE(c.normal_ok);
    EXPECT_TRUE(c.abnormal_ok);
}

TEST(Displacement, PrototypeFlowRatio) {
    const FlowParams p{2.0, 1.0, 1e-18};
    const DriftFn v = [&](double, const Vec& y) { return Vec{comparison_velocity(p, y[0])}; };
    DeterministicOptions opt;
    opt.grading = 3.0;
    const auto rec = integrate_deterministic(v, 2.0, Vec{0.0}, 1000, opt);
    BoundConstants k;
    const auto c = check_displacement(rec, p, k);
    const double env = (k.C_kappa - 1.0) * 2.0 * std::pow(std::pow(2.0, 2.0), 0.5);
    EXPECT_NEAR(c.normal_ratio, 1.0 / env, 1e-6);
    EXPECT_TRUE(c.normal_ok);
}

TEST(Displacement, TenfoldEnvelopeFails) {
    const FlowParams p{2.0, 1.0, 0.0};
    BoundConstants k;
    const double env = (k.C_kappa - 1.0) * normal_envelope(p, 1.0, 0.0);
    PathRecord rec;
    rec.t = 1.0;
    rec.x = Vec{0.0};
    rec.times = {0.0, 1.0};
    rec.Y = {Vec{0.0}, Vec{10.0 * env}};
    rec.finalize(std::nullopt);
    const auto c = check_displacement(rec, p, k);
    EXPECT_FALSE(c.normal_ok);
    EXPECT_NEAR(c.normal_ratio, 10.0, 1e-12);
}

TEST(PathRecordCsv, Columns) {
    const auto f = constant_field(0.1);
    const auto rec = integrate_stochastic(f, 1.0, Vec{0.0}, sample_brownian(1, 1, 1.0, 4));
    std::ostringstream os;
    rec.write_csv(os);
    const std::string s = os.str();
    EXPECT_EQ(s.substr(0, s.find('\n')), "s,Y0,B0,M");
    EXPECT_EQ(std::count(s.begin(), s.end(), '\n'), 6);
}

TEST(TimeOrdered, ZeroIsIdentity) {
    const auto r = time_ordered_exp({Mat(2), Mat(2)}, 1.0);
    EXPECT_EQ(r.M.a, Mat::identity(2).a);
}

TEST(TimeOrdered, Diagonal) {
    const Mat D = Mat::diag(Vec{0.5, -1.5});
    const auto r = time_ordered_exp([&](int, double) { return D; }, 2, 1000, 2.0);
    EXPECT_NEAR(r.M(0, 0), std::exp(1.0), 1e-6);
    EXPECT_NEAR(r.M(1, 1), std::exp(-3.0), 1e-6);
    EXPECT_NEAR(r.M(0, 1), 0.0, 1e-15);
}

TEST(TimeOrdered, NonCommutingOrder) {
    Mat A(2), B(2);
    A(0, 1) = 1.0;
    B(1, 0) = 1.0;
    const double t = 1.0;
    const int steps = 1000;
    const auto r = time_ordered_exp([&](int k, double) { return k < steps / 2 ? A : B; }, 2, steps, t);
    // Nilpotent: exp(sA) = I + sA.
    const Mat expect = (Mat::identity(2) + B * (t / 2)) * (Mat::identity(2) + A * (t / 2));
    EXPECT_LE((r.M - expect).max_abs(), 1e-8);
    const Mat wrong = (Mat::identity(2) + A * (t / 2)) * (Mat::identity(2) + B * (t / 2));
    EXPECT_GT((r.M - wrong).max_abs(), 0.1);
}

TEST(TimeOrdered, NormBoundHolds) {
    Mat A(3);
    A(0, 1) = 2.0;
    A(1, 2) = -1.0;
    A(2, 0) = 0.5;
    std::vector<Mat> samples;
    for (int k = 0; k <= 40; ++k) samples.push_back(A * std::sin(0.1 * k));
    const auto r = time_ordered_exp(samples, 3.0);
    EXPECT_LE(spectral_norm(r.M), std::exp(r.integral_norm) * (1.0 + 1e-6));
}

TEST(TimeOrdered, Blowup) {
    const Mat A = Mat::identity(1) * 100.0;
    EXPECT_THROW(time_ordered_exp([&](int, double) { return A; }, 1, 100, 1.0), BlowupError);
}
