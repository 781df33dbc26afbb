// Zone layout checks, safe intervals and one non-viscous characteristic
// through a large annular bump.

#include <cmath>
#include <cstdio>

#include "fkburgers/fkburgers.hpp"

int main() {
    using namespace fkb;
    ZoneLayout L;
    L.radii = {4, 6, 24, 26, 104};
    const LayoutReport ok = validate_layout(L);
    std::printf("layout (4, 6, 24, 26, 104): %s\n", ok.pass ? "valid" : ok.first_violation.c_str());

    ZoneLayout bad = L;
    bad.radii[2] = 20.0;
    const LayoutReport no = validate_layout(bad);
    std::printf("layout (4, 6, 20, 22, 104): %s\n", no.pass ? "valid" : no.first_violation.c_str());

    const double U = 1.0, C = 1.5;
    for (double t : {0.25, 0.5, 1.0}) {
        const SafeInterval I = safe_interval(L, 1, t, U, C, false);
        std::printf("I_1(%.2f) = [%.3f, %.3f]\n", t, I.lower, I.upper);
    }

    const VelocityField base = make_prototype(1, U, 2.0);
    std::vector<double> amps;
    for (std::size_t i = 1; i <= L.dangerous_count(); ++i) {
        const double mid = 0.5 * (L.R(2 * i - 1) + L.R(2 * i));
        amps.push_back(100.0 * std::abs(base(Vec{mid})[0]));
    }
    const VelocityField u0 = make_annular(base, L, amps, GrowthConstants{1, 1, 1, 5, 0}, Vec{1.0});
    const DriftFn drift = [&u0](double, const Vec& y) { return u0(y) * -1.0; };
    const SafeInterval I = safe_interval(L, 1, 1.0, U, C, false);
    const double x = 0.5 * (I.lower + I.upper);
    const PathRecord rec = integrate_deterministic(drift, 1.0, Vec{x}, 1000);
    const StabilityResult s = stability_violations(L, rec, 1, 1.0, U, C, false);
    std::printf("characteristic from x = %.3f ends at %.3f, violations %zu, smallest margin %.3f\n", x,
                rec.end_Y()[0], static_cast<std::size_t>(s.violations), s.min_margin);
}
