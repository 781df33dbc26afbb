// Picard iterates for the prototype field against the exact solution at t = 1.

#include <cmath>
#include <cstdio>

#include "fkburgers/fkburgers.hpp"

int main() {
    using namespace fkb;
    const VelocityField u0 = make_prototype(1, 1.0, 2.0);
    IterationConfig cfg;
    cfg.grid = SpatialGrid::box(1, 20.0, 201);
    cfg.slices = {0.0, 0.5, 1.0};
    cfg.mc_samples = 4000;
    cfg.sde_steps = 100;
    cfg.m_max = 4;
    const SchemeState st = run_viscous(u0, cfg);

    const ScalarFn f = scalar_view(u0);
    const std::size_t j = *st.iterates.back().slice_index(1.0);
    std::printf("%8s %12s", "x", "exact");
    for (int m = 0; m <= cfg.m_max; ++m) std::printf("      u^(%d)", m);
    std::printf("\n");
    for (double x = -4.0; x <= 4.0; x += 1.0) {
        const std::size_t n = static_cast<std::size_t>(std::lround((x + 20.0) / 0.2));
        std::printf("%8.2f %12.6f", x, cole_hopf_1d(f, {1.0, x}));
        for (const GridField& u : st.iterates) std::printf(" %10.6f", u.at(j, n, 0));
        std::printf("\n");
    }
    for (const IterateStats& s : st.stats) std::printf("m = %d: largest standard error %.2e\n", s.m, s.max_se);
}
