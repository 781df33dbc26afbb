#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "fkburgers/oracle.hpp"
#include "fkburgers/picard.hpp"

using namespace fkb;

namespace {

// Sup relative difference against Cole-Hopf on every 10th node with
// |x| <= half, skipping |ref| <= floor.
double interior_rel(const ScalarFn& f, const FdSolution& s, double half, double floor) {
    double worst = 0.0;
    for (std::size_t i = 0; i < s.x.size(); i += 10) {
        if (std::abs(s.x[i]) > half) continue;
        const double ref = cole_hopf_1d(f, {s.t, s.x[i]});
        if (std::abs(ref) <= floor) continue;
        worst = std::max(worst, std::abs(s.u[i] - ref) / std::abs(ref));
    }
    return worst;
}

}  // namespace

TEST(ColeHopf, ConstantIsPreserved) {
    const ScalarFn c = [](double) { return 0.7; };
    for (double t : {0.1, 1.0, 4.0})
        for (double x : {-3.0, 0.0, 2.5}) EXPECT_NEAR(cole_hopf_1d(c, {t, x}), 0.7, 1e-9);
}

TEST(ColeHopf, LinearProfile) {
    const ScalarFn f = [](double x) { return x; };
    for (double t : {0.25, 1.0, 2.0})
        for (double x : {-4.0, -1.0, 0.5, 3.0}) EXPECT_NEAR(cole_hopf_1d(f, {t, x}), x / (1.0 + t), 1e-8);
    // Viscosity does not enter for a linear profile.
    EXPECT_NEAR(cole_hopf_1d(f, {1.0, 2.0, 0.3}), 1.0, 1e-8);
}

TEST(ColeHopf, ConventionAudit) {
    const ScalarFn f = [](double x) { return x; };
    EXPECT_NEAR(cole_hopf_1d(f, {1.0, 2.0}), 1.0, 1e-10);
}

TEST(ColeHopf, StationaryShock) {
    const ScalarFn f = [](double x) { return -std::tanh(x / 2.0); };
    for (double t : {0.5, 1.0, 3.0})
        for (double x : {-4.0, -0.5, 0.0, 1.0, 5.0}) EXPECT_NEAR(cole_hopf_1d(f, {t, x}), f(x), 1e-8);
}

TEST(ColeHopf, ZeroDataIsExactlyZero) {
    const ScalarFn z = [](double) { return 0.0; };
    for (double x : {-2.0, 0.0, 3.0}) EXPECT_NEAR(cole_hopf_1d(z, {1.0, x}), 0.0, 1e-10);
}

TEST(ColeHopf, VelocityFieldOverload) {
    const auto u0 = make_linear_1d();
    EXPECT_NEAR(cole_hopf_1d(u0, {1.0, 2.0}), 1.0, 1e-10);
    EXPECT_THROW(scalar_view(make_prototype(2, 1.0, 2.0)), ParameterError);
}

TEST(ColeHopf, QueryValidation) {
    const ScalarFn f = [](double x) { return x; };
    EXPECT_THROW(cole_hopf_1d(f, {0.0, 1.0}), ParameterError);
    EXPECT_THROW(cole_hopf_1d(f, {1.0, 1.0, 1.0, 0.1}), ParameterError);
    EXPECT_THROW(cole_hopf_1d(f, {1.0, 1.0, 1.0, 0.0}), ParameterError);
    EXPECT_NO_THROW(cole_hopf_1d(f, {1.0, 1.0, 1.0, 1e-2}));
}

TEST(ReferenceFd, LinearProfile) {
    const ScalarFn f = [](double x) { return x; };
    const auto s = reference_fd_1d(f, 5.0, 0.01, 1.0);
    double worst = 0.0;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
        if (std::abs(s.x[i]) > 4.0 || std::abs(s.x[i]) < 0.05) continue;
        const double exact = s.x[i] / 2.0;
        worst = std::max(worst, std::abs(s.u[i] - exact) / std::abs(exact));
    }
    EXPECT_LE(worst, 0.01);
}

TEST(ReferenceFd, AgreesWithColeHopfOnPrototype) {
    const auto u0 = make_prototype(1, 1.0, 2.0);
    const auto f = scalar_view(u0);
    for (double t : {0.5, 1.0}) {
        const auto s = reference_fd_1d(f, 10.0, 0.01, t);
        EXPECT_LE(interior_rel(f, s, 5.0, 0.1), 0.01) << "t = " << t;
    }
}

TEST(ReferenceFd, ZeroStaysZero) {
    const ScalarFn z = [](double) { return 0.0; };
    const auto s = reference_fd_1d(z, 2.0, 0.05, 0.5);
    for (double v : s.u) EXPECT_EQ(v, 0.0);
}

TEST(ReferenceFd, StepViolatingStabilityIsRejected) {
    const ScalarFn f = [](double x) { return x; };
    EXPECT_THROW(reference_fd_1d(f, 5.0, 0.01, 1.0, 1.0, 1e-4), ParameterError);
    EXPECT_NO_THROW(reference_fd_1d(f, 5.0, 0.1, 0.01, 1.0, 1e-3));
}

TEST(Compare, IdenticalAndShifted) {
    const auto u0 = make_prototype(1, 1.0, 2.0);
    const auto g = sample_initial(u0, SpatialGrid::box(1, 5.0, 11), {0.0, 1.0});
    std::vector<double> ref(g.nodes());
    for (std::size_t n = 0; n < g.nodes(); ++n) ref[n] = g.at(1, n, 0);
    auto all = [](const Vec&, double) { return true; };
    EXPECT_EQ(compare(ref, g, 1, all).value, 0.0);
    for (double& r : ref) r -= 0.01;
    const auto c = compare(ref, g, 1, all);
    EXPECT_NEAR(c.value, 0.01, 1e-12);
    EXPECT_EQ(c.count, g.nodes());
    EXPECT_NEAR(compare(ref, g, 1, all, CompareNorm::L2).value, 0.01, 1e-12);
    auto none = [](const Vec&, double) { return false; };
    EXPECT_THROW(compare(ref, g, 1, none), ParameterError);
}

TEST(Compare, PlainArrays) {
    const auto c = compare_values({1.0, 2.0, -4.0}, {1.1, 2.0, -4.0}, {0.0, 1.0, 2.0}, {0.5, 0.0, 0.0}, true);
    EXPECT_NEAR(c.value, 0.1, 1e-12);
    EXPECT_EQ(c.worst[0], 0.0);
    EXPECT_EQ(c.worst_se, 0.5);
    EXPECT_THROW(compare_values({}, {}, {}, {}, false), ParameterError);
}

TEST(OracleCsv, Columns) {
    std::ostringstream os;
    write_oracle_csv(os, {0.0, 1.0}, {0.5, 1.0}, {{0.0, 0.1}, {0.0, 0.2}});
    EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "x,t=0.5,t=1");
}
