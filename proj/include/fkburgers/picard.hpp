#pragma once

// Successive approximations. Iterate m solves a linear transport equation with
// drift u^(m-1):
//   non-viscous  phi^(m)(t, x) = u_0(y(t)),    dy/ds = -phi^(m-1)(t - s, y)
//   viscous      u^(m)(t, x) = E[u_0(X_t)],    dX = -u^(m-1)(t - s, X) ds + dB
// with B of per-component variance 2s. Iterate 0 uses zero drift.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "brownian.hpp"
#include "errors.hpp"
#include "grid_field.hpp"
#include "linalg.hpp"
#include "parallel.hpp"
#include "velocity.hpp"

namespace fkb {

struct IterationConfig {
    int m_max = 4;
    int mc_samples = 2000;
    int sde_steps = 200;
    SpatialGrid grid = SpatialGrid::box(1, 20.0, 401);
    /// Slice times, starting at 0; the horizon T is the last one.
    std::vector<double> slices{0.0, 0.25, 0.5, 1.0};
    bool viscous = true;
    std::uint64_t seed = 1;
    /// Hoelder exponent used by the gradient-difference decay check.
    double gamma = 0.5;
    /// Path 2q+1 is the mirror image of path 2q.
    bool antithetic = true;
    /// Also carry grad u^(m) through the gradient representation.
    bool gradients = false;
    /// Non-viscous RK4 resolution: max(ode_min_steps, ode_steps_per_unit * t).
    int ode_steps_per_unit = 400;
    int ode_min_steps = 50;
    /// Standard errors above this are flagged in the statistics.
    double se_ceiling = INFINITY;
    /// Characteristics farther than blowup_factor * grid extent are errors.
    double blowup_factor = 4.0;
    Extrapolation policy = Extrapolation::Envelope;
    int jobs = 1;

    double horizon() const { return slices.back(); }

    void validate() const {
        if (m_max < 0) throw ParameterError("IterationConfig: m_max must be >= 0");
        if (mc_samples < 1) throw ParameterError("IterationConfig: mc_samples must be >= 1");
        if (antithetic && mc_samples % 2 != 0)
            throw ParameterError("IterationConfig: antithetic sampling needs an even sample count");
        if (sde_steps < 1) throw ParameterError("IterationConfig: sde_steps must be >= 1");
        if (slices.size() < 2 || slices.front() != 0.0)
            throw ParameterError("IterationConfig: slices must start at 0 and reach a horizon T > 0");
        for (std::size_t j = 1; j < slices.size(); ++j)
            if (!(slices[j] > slices[j - 1]))
                throw ParameterError("IterationConfig: slices must be strictly increasing");
        if (!(gamma > 0.0 && gamma < 1.0)) throw ParameterError("IterationConfig: gamma must lie in (0, 1)");
        if (ode_steps_per_unit < 1 || ode_min_steps < 1)
            throw ParameterError("IterationConfig: ODE step counts must be >= 1");
        grid.validate();
    }

    double blowup_radius() const { return blowup_factor * grid.outer_radius(); }
};

/// Monte Carlo estimate at one point.
struct PointEstimate {
    Vec value;
    Vec se;
    Mat grad;
    Mat grad_se;
    bool has_grad = false;
};

struct IterateStats {
    int m = 0;
    double sup_norm = 0.0;
    double max_se = 0.0;
    bool se_warning = false;
};

struct SchemeState {
    IterationConfig cfg;
    std::optional<VelocityField> u0;
    std::vector<GridField> iterates;
    std::vector<GridField> gradients;
    std::vector<IterateStats> stats;
    std::shared_ptr<const NoiseBank> bank;

    const GridField& iterate(int m) const {
        if (m < 0 || m >= static_cast<int>(iterates.size()))
            throw SequencingError("iterate " + std::to_string(m) + " has not been computed");
        return iterates[static_cast<std::size_t>(m)];
    }
    const GridField& gradient(int m) const {
        if (m < 0 || m >= static_cast<int>(gradients.size()))
            throw SequencingError("gradient of iterate " + std::to_string(m) + " has not been computed");
        return gradients[static_cast<std::size_t>(m)];
    }
};

namespace detail {

/// Fast cell lookup on a SpatialGrid, specialised on the dimension.
template <int D>
struct Locator {
    std::array<double, D> lo{}, inv{};
    std::array<int, D> n{};
    std::array<std::size_t, D> stride{};

    explicit Locator(const SpatialGrid& g) {
        std::size_t s = 1;
        for (int i = 0; i < D; ++i) {
            lo[i] = g.axes[i].lo;
            inv[i] = 1.0 / g.axes[i].step();
            n[i] = g.axes[i].n;
            stride[i] = s;
            s *= static_cast<std::size_t>(n[i]);
        }
    }

    bool find(const double* z, std::size_t& base, double* fr) const {
        base = 0;
        for (int i = 0; i < D; ++i) {
            const double u = (z[i] - lo[i]) * inv[i];
            if (!(u >= 0.0 && u <= n[i] - 1)) return false;
            int k = static_cast<int>(u);
            if (k > n[i] - 2) k = n[i] - 2;
            fr[i] = u - k;
            base += static_cast<std::size_t>(k) * stride[i];
        }
        return true;
    }

    template <int NC>
    void eval(const double* arr, std::size_t base, const double* fr, double* out) const {
        if constexpr (D == 1) {
            const double* a = arr + base * NC;
            for (int c = 0; c < NC; ++c) out[c] = a[c] + fr[0] * (a[NC + c] - a[c]);
        } else {
            for (int c = 0; c < NC; ++c) out[c] = 0.0;
            for (int corner = 0; corner < (1 << D); ++corner) {
                double w = 1.0;
                std::size_t off = base;
                for (int i = 0; i < D; ++i) {
                    const bool up = (corner >> i) & 1;
                    w *= up ? fr[i] : 1.0 - fr[i];
                    off += up ? stride[i] : 0;
                }
                const double* a = arr + off * NC;
                for (int c = 0; c < NC; ++c) out[c] += w * a[c];
            }
        }
    }
};

/// Time-interpolated copies of a field at a list of times.
struct StageArrays {
    std::size_t block = 0;
    std::vector<double> data;

    StageArrays() = default;
    // Each block carries one padding node (a copy of the last) so a cell
    // index clamped to the upper face can read its right neighbour.
    StageArrays(const GridField& f, const std::vector<double>& taus) {
        const std::size_t nc = static_cast<std::size_t>(f.ncomp());
        const std::size_t used = f.nodes() * nc;
        block = used + nc;
        data.resize(block * taus.size());
        for (std::size_t k = 0; k < taus.size(); ++k) {
            double* b = data.data() + k * block;
            f.spatial_at(taus[k], b);
            for (std::size_t c = 0; c < nc; ++c) b[used + c] = b[used - nc + c];
        }
    }
    const double* operator[](std::size_t k) const { return data.data() + k * block; }
};

template <int D, int NC>
void lookup(const GridField& field, const Locator<D>& loc, const double* stage, const double* z,
            double* out) {
    std::size_t base;
    double fr[D];
    if (loc.find(z, base, fr)) {
        loc.template eval<NC>(stage, base, fr, out);
        return;
    }
    Vec p(D);
    for (int i = 0; i < D; ++i) p[i] = z[i];
    if (field.policy == Extrapolation::Clamp || (field.policy == Extrapolation::Envelope && !field.envelope)) {
        field.grid().interpolate(stage, NC, p, out);
    } else if (field.policy == Extrapolation::Envelope) {
        field.envelope_value(p, out);
    } else {
        throw DomainError("drift lookup outside the grid box at |x| = " + std::to_string(p.norm()));
    }
}

struct FkContext {
    const VelocityField* u0 = nullptr;
    const NoiseBank* bank = nullptr;
    const GridField* drift = nullptr;
    const GridField* drift_grad = nullptr;
    bool want_grad = false;
    std::optional<PenaltySpec> penalty;
    double drift_sign = -1.0;
    double blowup_radius = INFINITY;
    double t = 0.0;
    const StageArrays* stages = nullptr;
    const StageArrays* grad_stages = nullptr;
};

/// Mean and standard error of per-path samples (rows of width w). With
/// antithetic pairs the error is computed from pair means.
inline void mean_and_se(const std::vector<double>& samples, int width, int paths, bool antithetic,
                        double* mean, double* se) {
    const int group = antithetic ? 2 : 1;
    const int q = paths / group;
    for (int c = 0; c < width; ++c) {
        double sum = 0.0;
        for (int g = 0; g < q; ++g) {
            double z = 0.0;
            for (int r = 0; r < group; ++r) z += samples[static_cast<std::size_t>(g * group + r) * width + c];
            sum += z / group;
        }
        const double m = sum / q;
        double ss = 0.0;
        for (int g = 0; g < q; ++g) {
            double z = 0.0;
            for (int r = 0; r < group; ++r) z += samples[static_cast<std::size_t>(g * group + r) * width + c];
            z /= group;
            ss += (z - m) * (z - m);
        }
        mean[c] = m;
        se[c] = q > 1 ? std::sqrt(ss / (q - 1) / q) : 0.0;
    }
}

inline constexpr int kPathChunk = 256;
inline constexpr int kNodeBlock = 16;

/// One Heun step for a chunk of 1D paths with the lookups clamped to the box.
/// Returns how many lookups fell outside; those paths need redoing.
[[gnu::noinline]] inline int heun_chunk_1d(const double* __restrict y, double* __restrict ynew, const double* __restrict W0,
                         const double* __restrict W1, const double* __restrict S0, const double* __restrict S1, int m,
                         double lo, double inv, double top, double h, double st, double sgn) {
    int outside = 0;
    for (int p = 0; p < m; ++p) {
        const double u0 = (y[p] + st * W0[p] - lo) * inv;
        outside += (u0 < 0.0) | (u0 > top);
        double c0 = u0 < 0.0 ? 0.0 : u0;
        c0 = c0 > top ? top : c0;
        const int i0 = static_cast<int>(c0);
        const double f0 = sgn * (S0[i0] + (c0 - i0) * (S0[i0 + 1] - S0[i0]));
        const double u1 = (y[p] + h * f0 + st * W1[p] - lo) * inv;
        outside += (u1 < 0.0) | (u1 > top);
        double c1 = u1 < 0.0 ? 0.0 : u1;
        c1 = c1 > top ? top : c1;
        const int i1 = static_cast<int>(c1);
        const double f1 = sgn * (S1[i1] + (c1 - i1) * (S1[i1 + 1] - S1[i1]));
        ynew[p] = y[p] + 0.5 * h * (f0 + f1);
    }
    return outside;
}

/// One-dimensional value-only kernel for a block of start points. Paths are
/// processed in chunks so the noise chunk stays in cache across the block.
inline void fk_block_1d(const FkContext& c, const Vec* pts, int count, PointEstimate* out) {
    const NoiseBank& bank = *c.bank;
    const int P = bank.paths(), n = bank.steps();
    const double t = c.t, h = t / n, st = std::sqrt(t), sgn = c.drift_sign;
    const GridField& drift = *c.drift;
    const Locator<1> loc(drift.grid());
    const double lo = loc.lo[0], inv = loc.inv[0], top = loc.n[0] - 1;
    std::vector<double> samples(static_cast<std::size_t>(count) * P);
    std::array<double, kPathChunk> ya{}, yb{};
    for (int p0 = 0; p0 < P; p0 += kPathChunk) {
        const int m = std::min(kPathChunk, P - p0);
        for (int b = 0; b < count; ++b) {
            double* y = ya.data();
            double* ynew = yb.data();
            std::fill(y, y + m, pts[b][0]);
            for (int k = 0; k < n; ++k) {
                const double* W0 = bank.step_row(k) + p0;
                const double* W1 = bank.step_row(k + 1) + p0;
                const double* S0 = (*c.stages)[k];
                const double* S1 = (*c.stages)[k + 1];
                if (heun_chunk_1d(y, ynew, W0, W1, S0, S1, m, lo, inv, top, h, st, sgn) > 0) {
                    for (int p = 0; p < m; ++p) {
                        double z0 = y[p] + st * W0[p], f0, f1;
                        const double v0 = (z0 - lo) * inv;
                        lookup<1, 1>(drift, loc, S0, &z0, &f0);
                        f0 *= sgn;
                        double z1 = y[p] + h * f0 + st * W1[p];
                        const double v1 = (z1 - lo) * inv;
                        if (!(v0 < 0.0 || v0 > top || v1 < 0.0 || v1 > top)) continue;
                        lookup<1, 1>(drift, loc, S1, &z1, &f1);
                        ynew[p] = y[p] + 0.5 * h * (f0 + sgn * f1);
                    }
                }
                std::swap(y, ynew);
            }
            const double* Wn = bank.step_row(n) + p0;
            double* row = samples.data() + static_cast<std::size_t>(b) * P + p0;
            for (int p = 0; p < m; ++p) {
                const double X = y[p] + st * Wn[p];
                if (!(std::abs(X) <= c.blowup_radius))
                    throw DivergenceError("characteristic from |x| = " + std::to_string(std::abs(pts[b][0])) +
                                              " at t = " + std::to_string(t) + " escaped to |X| = " +
                                              std::to_string(std::abs(X)),
                                          t);
                row[p] = (*c.u0)(X);
            }
        }
    }
    for (int b = 0; b < count; ++b) {
        const std::vector<double> col(samples.begin() + static_cast<std::ptrdiff_t>(b) * P,
                                      samples.begin() + static_cast<std::ptrdiff_t>(b + 1) * P);
        double mean = 0.0, se = 0.0;
        mean_and_se(col, 1, P, bank.antithetic(), &mean, &se);
        out[b].value = Vec{mean};
        out[b].se = Vec{se};
    }
}

template <int D>
PointEstimate fk_point(const FkContext& c, const Vec& x) {
    constexpr int DD = D * D;
    const NoiseBank& bank = *c.bank;
    const int P = bank.paths(), n = bank.steps();
    const double t = c.t, h = t / n, st = std::sqrt(t), sgn = c.drift_sign;
    const bool grad = c.want_grad;
    const bool move = c.drift != nullptr;
    std::vector<double> y(static_cast<std::size_t>(P) * D);
    std::vector<double> J(grad ? static_cast<std::size_t>(P) * DD : 0);
    std::vector<double> pen(c.penalty ? P : 0), fprev(c.penalty ? P : 0);
    for (int p = 0; p < P; ++p)
        for (int i = 0; i < D; ++i) y[static_cast<std::size_t>(p) * D + i] = x[i];
    if (grad)
        for (int p = 0; p < P; ++p)
            for (int i = 0; i < D; ++i)
                for (int j = 0; j < D; ++j) J[static_cast<std::size_t>(p) * DD + i * D + j] = i == j ? 1.0 : 0.0;
    auto penalty_at = [&](const double* z) {
        double r2 = 0.0;
        for (int i = 0; i < D; ++i) r2 += z[i] * z[i];
        return penalty_value(*c.penalty, std::sqrt(r2));
    };
    if (c.penalty) {
        const double f0 = penalty_at(x.c.data());
        for (int p = 0; p < P; ++p) fprev[p] = f0;
    }

    if (move || c.penalty) {
        std::optional<Locator<D>> loc;
        if (move) loc.emplace(c.drift->grid());
        for (int k = 0; k < n; ++k) {
            const double* W0 = bank.step_row(k);
            const double* W1 = bank.step_row(k + 1);
            const double* S0 = move ? (*c.stages)[k] : nullptr;
            const double* S1 = move ? (*c.stages)[k + 1] : nullptr;
            const double* G0 = grad && move ? (*c.grad_stages)[k] : nullptr;
            const double* G1 = grad && move ? (*c.grad_stages)[k + 1] : nullptr;
            for (int p = 0; p < P; ++p) {
                double* yp = y.data() + static_cast<std::size_t>(p) * D;
                double z0[D], z1[D], f0[D], f1[D], pred[D];
                if (move) {
                    for (int i = 0; i < D; ++i) z0[i] = yp[i] + st * W0[p * D + i];
                    lookup<D, D>(*c.drift, *loc, S0, z0, f0);
                    for (int i = 0; i < D; ++i) {
                        f0[i] *= sgn;
                        pred[i] = yp[i] + h * f0[i];
                        z1[i] = pred[i] + st * W1[p * D + i];
                    }
                    lookup<D, D>(*c.drift, *loc, S1, z1, f1);
                    for (int i = 0; i < D; ++i) yp[i] += 0.5 * h * (f0[i] + sgn * f1[i]);
                    if (grad) {
                        double g0[DD], g1[DD], k1[DD], Jp[DD], k2[DD];
                        lookup<D, DD>(*c.drift_grad, *loc, G0, z0, g0);
                        lookup<D, DD>(*c.drift_grad, *loc, G1, z1, g1);
                        double* Jq = J.data() + static_cast<std::size_t>(p) * DD;
                        for (int i = 0; i < D; ++i)
                            for (int j = 0; j < D; ++j) {
                                double s = 0.0;
                                for (int l = 0; l < D; ++l) s += Jq[i * D + l] * g0[l * D + j];
                                k1[i * D + j] = sgn * s;
                            }
                        for (int e = 0; e < DD; ++e) Jp[e] = Jq[e] + h * k1[e];
                        for (int i = 0; i < D; ++i)
                            for (int j = 0; j < D; ++j) {
                                double s = 0.0;
                                for (int l = 0; l < D; ++l) s += Jp[i * D + l] * g1[l * D + j];
                                k2[i * D + j] = sgn * s;
                            }
                        for (int e = 0; e < DD; ++e) Jq[e] += 0.5 * h * (k1[e] + k2[e]);
                    }
                }
                if (c.penalty) {
                    double z[D];
                    for (int i = 0; i < D; ++i) z[i] = yp[i] + st * W1[p * D + i];
                    const double fn = penalty_at(z);
                    pen[p] += 0.5 * h * (fprev[p] + fn);
                    fprev[p] = fn;
                }
            }
        }
    }

    const double* Wn = bank.step_row(n);
    const int width = D + (grad ? DD : 0);
    std::vector<double> samples(static_cast<std::size_t>(P) * width);
    for (int p = 0; p < P; ++p) {
        Vec X(D);
        for (int i = 0; i < D; ++i) X[i] = y[static_cast<std::size_t>(p) * D + i] + st * Wn[p * D + i];
        if (!(X.norm() <= c.blowup_radius))
            throw DivergenceError("characteristic from |x| = " + std::to_string(x.norm()) + " at t = " +
                                      std::to_string(t) + " escaped to |X| = " + std::to_string(X.norm()),
                                  t);
        const double weight = c.penalty ? std::exp(-pen[p]) : 1.0;
        const Vec u = (*c.u0)(X);
        double* row = samples.data() + static_cast<std::size_t>(p) * width;
        for (int i = 0; i < D; ++i) row[i] = weight * u[i];
        if (grad) {
            const Mat G0 = c.u0->gradient(X);
            const double* Jq = J.data() + static_cast<std::size_t>(p) * DD;
            for (int i = 0; i < D; ++i)
                for (int j = 0; j < D; ++j) {
                    double s = 0.0;
                    for (int l = 0; l < D; ++l) s += Jq[i * D + l] * G0(l, j);
                    row[D + i * D + j] = s;
                }
        }
    }
    std::array<double, kMaxDim + kMaxDim * kMaxDim> mean{}, se{};
    mean_and_se(samples, width, P, bank.antithetic(), mean.data(), se.data());
    PointEstimate est;
    est.value = Vec(D);
    est.se = Vec(D);
    for (int i = 0; i < D; ++i) {
        est.value[i] = mean[i];
        est.se[i] = se[i];
    }
    if (grad) {
        est.has_grad = true;
        est.grad = Mat(D);
        est.grad_se = Mat(D);
        for (int i = 0; i < D; ++i)
            for (int j = 0; j < D; ++j) {
                est.grad(i, j) = mean[D + i * D + j];
                est.grad_se(i, j) = se[D + i * D + j];
            }
    }
    return est;
}

inline PointEstimate exact_initial(const VelocityField& u0, const Vec& x, bool grad) {
    PointEstimate e;
    e.value = u0(x);
    e.se = Vec(x.dim);
    if (grad) {
        e.has_grad = true;
        e.grad = u0.gradient(x);
        e.grad_se = Mat(x.dim);
    }
    return e;
}

}  // namespace detail

struct FkRequest {
    const VelocityField* u0 = nullptr;
    /// Iterate m-1; null for the heat evolution (iterate 0).
    const GridField* drift = nullptr;
    /// Gradient of iterate m-1, required with want_grad and a drift.
    const GridField* drift_grad = nullptr;
    bool want_grad = false;
    std::optional<PenaltySpec> penalty;
    double drift_sign = -1.0;
    double blowup_radius = INFINITY;
    int jobs = 1;
};

/// Feynman-Kac Monte Carlo estimates at the given points and time, one
/// independent work item per point.
inline std::vector<PointEstimate> fk_estimate(const FkRequest& req, const NoiseBank& bank, double t,
                                              const std::vector<Vec>& points) {
    if (!req.u0) throw ParameterError("fk_estimate: u0 is required");
    if (t < 0.0) throw DomainError("fk_estimate: t must be >= 0");
    const int d = req.u0->dim();
    if (bank.dim() != d) throw ParameterError("fk_estimate: noise dimension mismatch");
    if (req.want_grad && req.drift && !req.drift_grad)
        throw SequencingError("fk_estimate: gradient of the previous iterate is required");
    std::vector<PointEstimate> out(points.size());
    if (t == 0.0) {
        for (std::size_t i = 0; i < points.size(); ++i)
            out[i] = detail::exact_initial(*req.u0, points[i], req.want_grad);
        return out;
    }
    const int n = bank.steps();
    std::vector<double> taus(static_cast<std::size_t>(n) + 1);
    for (int k = 0; k <= n; ++k) taus[k] = std::max(0.0, t - t * k / n);
    detail::StageArrays stages, grad_stages;
    if (req.drift) stages = detail::StageArrays(*req.drift, taus);
    if (req.drift && req.want_grad) grad_stages = detail::StageArrays(*req.drift_grad, taus);
    detail::FkContext c;
    c.u0 = req.u0;
    c.bank = &bank;
    c.drift = req.drift;
    c.drift_grad = req.drift_grad;
    c.want_grad = req.want_grad;
    c.penalty = req.penalty;
    c.drift_sign = req.drift_sign;
    c.blowup_radius = req.blowup_radius;
    c.t = t;
    c.stages = &stages;
    c.grad_stages = &grad_stages;
    if (d == 1 && c.drift && !c.want_grad && !c.penalty) {
        const std::size_t blocks = (points.size() + detail::kNodeBlock - 1) / detail::kNodeBlock;
        parallel_for(blocks, req.jobs, [&](std::size_t blk) {
            const std::size_t b0 = blk * detail::kNodeBlock;
            const int count = static_cast<int>(std::min<std::size_t>(detail::kNodeBlock, points.size() - b0));
            detail::fk_block_1d(c, points.data() + b0, count, out.data() + b0);
        });
        return out;
    }
    parallel_for(points.size(), req.jobs, [&](std::size_t i) {
        switch (d) {
            case 1: out[i] = detail::fk_point<1>(c, points[i]); break;
            case 2: out[i] = detail::fk_point<2>(c, points[i]); break;
            default: out[i] = detail::fk_point<3>(c, points[i]); break;
        }
    });
    return out;
}

namespace detail {

template <int D>
Vec nonviscous_foot(const GridField& drift, const Locator<D>& loc, const StageArrays& S, double t, int n,
                    const Vec& x, double blowup) {
    const double h = t / n;
    double y[D];
    for (int i = 0; i < D; ++i) y[i] = x[i];
    for (int k = 0; k < n; ++k) {
        double k1[D], k2[D], k3[D], k4[D], z[D];
        lookup<D, D>(drift, loc, S[2 * k], y, k1);
        for (int i = 0; i < D; ++i) z[i] = y[i] - 0.5 * h * k1[i];
        lookup<D, D>(drift, loc, S[2 * k + 1], z, k2);
        for (int i = 0; i < D; ++i) z[i] = y[i] - 0.5 * h * k2[i];
        lookup<D, D>(drift, loc, S[2 * k + 1], z, k3);
        for (int i = 0; i < D; ++i) z[i] = y[i] - h * k3[i];
        lookup<D, D>(drift, loc, S[2 * k + 2], z, k4);
        for (int i = 0; i < D; ++i) y[i] -= h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    Vec out(D);
    double r2 = 0.0;
    for (int i = 0; i < D; ++i) {
        out[i] = y[i];
        r2 += y[i] * y[i];
    }
    if (!(std::sqrt(r2) <= blowup))
        throw DivergenceError("non-viscous characteristic from |x| = " + std::to_string(x.norm()) +
                                  " escaped before t = " + std::to_string(t),
                              t);
    return out;
}

}  // namespace detail

inline int nonviscous_steps(const IterationConfig& cfg, double t) {
    return std::max(cfg.ode_min_steps, static_cast<int>(std::ceil(cfg.ode_steps_per_unit * t)));
}

/// Feet y(t) of the non-viscous characteristics dy/ds = -drift(t - s, y)
/// started at the points (RK4).
inline std::vector<Vec> nonviscous_feet(const GridField& drift, double t, const std::vector<Vec>& points,
                                        int steps, double blowup, int jobs) {
    std::vector<Vec> out(points.size());
    if (t == 0.0) return points;
    std::vector<double> taus(2 * static_cast<std::size_t>(steps) + 1);
    for (std::size_t k = 0; k < taus.size(); ++k) taus[k] = std::max(0.0, t - t * k / (2.0 * steps));
    const detail::StageArrays S(drift, taus);
    const int d = drift.dim();
    parallel_for(points.size(), jobs, [&](std::size_t i) {
        switch (d) {
            case 1: out[i] = detail::nonviscous_foot<1>(drift, detail::Locator<1>(drift.grid()), S, t, steps, points[i], blowup); break;
            case 2: out[i] = detail::nonviscous_foot<2>(drift, detail::Locator<2>(drift.grid()), S, t, steps, points[i], blowup); break;
            default: out[i] = detail::nonviscous_foot<3>(drift, detail::Locator<3>(drift.grid()), S, t, steps, points[i], blowup); break;
        }
    });
    return out;
}

namespace detail {

inline std::vector<Vec> grid_nodes(const SpatialGrid& g) {
    std::vector<Vec> pts(g.size());
    for (std::size_t n = 0; n < g.size(); ++n) pts[n] = g.node(n);
    return pts;
}

inline IterateStats collect_stats(const GridField& f, int m, double ceiling) {
    IterateStats s;
    s.m = m;
    for (std::size_t j = 0; j < f.slices(); ++j)
        for (std::size_t n = 0; n < f.nodes(); ++n) {
            s.sup_norm = std::max(s.sup_norm, f.node_value(j, n).norm());
            for (int c = 0; c < f.ncomp(); ++c) s.max_se = std::max(s.max_se, f.se(j, n, c));
        }
    s.se_warning = s.max_se > ceiling;
    return s;
}

inline GridField empty_iterate(const IterationConfig& cfg, const VelocityField& u0, int m, FieldLayout layout) {
    GridField g = sample_initial(u0, cfg.grid, cfg.slices, layout);
    g.m_index = m;
    g.policy = cfg.policy;
    return g;
}

}  // namespace detail

inline FkRequest make_request(const SchemeState& st, int m, bool want_grad) {
    FkRequest req;
    req.u0 = &*st.u0;
    req.drift = m > 0 ? &st.iterate(m - 1) : nullptr;
    req.drift_grad = (m > 0 && want_grad) ? &st.gradient(m - 1) : nullptr;
    req.want_grad = want_grad;
    req.blowup_radius = st.cfg.blowup_radius();
    req.jobs = st.cfg.jobs;
    return req;
}

/// Appends iterate m (and its gradient when configured) on the full grid.
inline void advance_viscous(SchemeState& st) {
    const IterationConfig& cfg = st.cfg;
    const int m = static_cast<int>(st.iterates.size());
    const VelocityField& u0 = *st.u0;
    const int d = u0.dim();
    GridField u = detail::empty_iterate(cfg, u0, m, FieldLayout::Value);
    u.enable_stderr();
    GridField g;
    if (cfg.gradients) {
        g = detail::empty_iterate(cfg, u0, m, FieldLayout::Gradient);
        g.enable_stderr();
    }
    const auto nodes = detail::grid_nodes(cfg.grid);
    const FkRequest req = make_request(st, m, cfg.gradients);
    for (std::size_t j = 1; j < cfg.slices.size(); ++j) {
        const auto est = fk_estimate(req, *st.bank, cfg.slices[j], nodes);
        for (std::size_t n = 0; n < nodes.size(); ++n) {
            for (int c = 0; c < d; ++c) {
                u.at(j, n, c) = est[n].value[c];
                u.se(j, n, c) = est[n].se[c];
            }
            if (cfg.gradients)
                for (int a = 0; a < d; ++a)
                    for (int b = 0; b < d; ++b) {
                        g.at(j, n, a * d + b) = est[n].grad(a, b);
                        g.se(j, n, a * d + b) = est[n].grad_se(a, b);
                    }
        }
    }
    st.stats.push_back(detail::collect_stats(u, m, cfg.se_ceiling));
    st.iterates.push_back(std::move(u));
    if (cfg.gradients) st.gradients.push_back(std::move(g));
}

/// Appends non-viscous iterate m on the full grid.
inline void advance_nonviscous(SchemeState& st) {
    const IterationConfig& cfg = st.cfg;
    const int m = static_cast<int>(st.iterates.size());
    const VelocityField& u0 = *st.u0;
    GridField u = detail::empty_iterate(cfg, u0, m, FieldLayout::Value);
    if (m > 0) {
        const auto nodes = detail::grid_nodes(cfg.grid);
        const GridField& prev = st.iterates.back();
        for (std::size_t j = 1; j < cfg.slices.size(); ++j) {
            const double t = cfg.slices[j];
            const auto feet = nonviscous_feet(prev, t, nodes, nonviscous_steps(cfg, t), cfg.blowup_radius(), cfg.jobs);
            for (std::size_t n = 0; n < nodes.size(); ++n) {
                const Vec v = u0(feet[n]);
                for (int c = 0; c < u0.dim(); ++c) u.at(j, n, c) = v[c];
            }
        }
    }
    st.stats.push_back(detail::collect_stats(u, m, cfg.se_ceiling));
    st.iterates.push_back(std::move(u));
}

inline SchemeState make_state(const VelocityField& u0, const IterationConfig& cfg) {
    cfg.validate();
    if (cfg.grid.dim != u0.dim()) throw ParameterError("grid dimension differs from the field dimension");
    SchemeState st;
    st.cfg = cfg;
    st.u0 = u0;
    if (cfg.viscous)
        st.bank = std::make_shared<NoiseBank>(cfg.seed, u0.dim(), cfg.mc_samples, cfg.sde_steps, cfg.antithetic);
    return st;
}

inline SchemeState run_nonviscous(const VelocityField& u0, IterationConfig cfg) {
    if (cfg.viscous) throw ParameterError("run_nonviscous: cfg.viscous must be false");
    SchemeState st = make_state(u0, cfg);
    for (int m = 0; m <= cfg.m_max; ++m) advance_nonviscous(st);
    return st;
}

inline SchemeState run_viscous(const VelocityField& u0, IterationConfig cfg) {
    if (!cfg.viscous) throw ParameterError("run_viscous: cfg.viscous must be true");
    SchemeState st = make_state(u0, cfg);
    for (int m = 0; m <= cfg.m_max; ++m) advance_viscous(st);
    return st;
}

/// Iterate m at arbitrary (t, points), driven by the stored iterate m-1.
inline std::vector<PointEstimate> evaluate_iterate(const SchemeState& st, int m, double t,
                                                   const std::vector<Vec>& points, bool want_grad = false) {
    const VelocityField& u0 = *st.u0;
    if (m < 0) throw SequencingError("evaluate_iterate: m must be >= 0");
    if (!st.cfg.viscous) {
        std::vector<PointEstimate> out(points.size());
        if (m == 0 || t == 0.0) {
            for (std::size_t i = 0; i < points.size(); ++i) out[i] = detail::exact_initial(u0, points[i], false);
            return out;
        }
        const auto feet = nonviscous_feet(st.iterate(m - 1), t, points, nonviscous_steps(st.cfg, t),
                                          st.cfg.blowup_radius(), st.cfg.jobs);
        for (std::size_t i = 0; i < points.size(); ++i) out[i] = detail::exact_initial(u0, feet[i], false);
        return out;
    }
    return fk_estimate(make_request(st, m, want_grad), *st.bank, t, points);
}

/// grad u^(m) at (t, points): E[J_t grad u_0(X_t)] with J' = -J grad u^(m-1),
/// J(0) = I, along the same characteristics as iterate m.
inline std::vector<PointEstimate> gradient_fk(const SchemeState& st, int m, double t,
                                              const std::vector<Vec>& points) {
    if (!st.cfg.viscous) throw ParameterError("gradient_fk: viscous state required");
    if (m > 0) st.gradient(m - 1);
    return evaluate_iterate(st, m, t, points, true);
}

/// v^(m) = u^(m) - u^(m-1) nodewise.
inline GridField compute_v(const SchemeState& st, int m) {
    if (m == 0) return st.iterate(0);
    const GridField& a = st.iterate(m);
    const GridField& b = st.iterate(m - 1);
    GridField v(a.grid(), a.times(), a.layout());
    v.m_index = m;
    for (std::size_t i = 0; i < v.raw().size(); ++i) v.raw()[i] = a.raw()[i] - b.raw()[i];
    return v;
}

/// Sup of |field| over nodes and slices accepted by keep(t, x).
template <class Pred>
double restricted_sup(const GridField& f, Pred keep, std::size_t* count = nullptr) {
    double s = 0.0;
    std::size_t c = 0;
    for (std::size_t j = 0; j < f.slices(); ++j)
        for (std::size_t n = 0; n < f.nodes(); ++n) {
            const Vec x = f.grid().node(n);
            if (!keep(f.times()[j], x)) continue;
            ++c;
            double r = 0.0;
            for (int k = 0; k < f.ncomp(); ++k) r += f.at(j, n, k) * f.at(j, n, k);
            s = std::max(s, std::sqrt(r));
        }
    if (count) *count = c;
    return s;
}

/// u^(m,n) at (t, points): E[u_0(X_t) exp(-int_0^t F_n(X_s) ds)], with X
/// driven by the unpenalised iterate m-1. Trapezoid rule on the step nodes.
inline std::vector<PointEstimate> evaluate_penalized(const SchemeState& st, int m, const PenaltySpec& spec,
                                                     double t, const std::vector<Vec>& points) {
    if (!st.cfg.viscous) throw ParameterError("penalized iterates need a viscous state");
    spec.validate();
    FkRequest req = make_request(st, m, false);
    req.penalty = spec;
    return fk_estimate(req, *st.bank, t, points);
}

/// u^(m,n) on the state grid and slices.
inline GridField run_penalized(const SchemeState& st, int m, const PenaltySpec& spec) {
    const IterationConfig& cfg = st.cfg;
    const VelocityField& u0 = *st.u0;
    GridField u = detail::empty_iterate(cfg, u0, m, FieldLayout::Value);
    u.enable_stderr();
    const auto nodes = detail::grid_nodes(cfg.grid);
    for (std::size_t j = 1; j < cfg.slices.size(); ++j) {
        const auto est = evaluate_penalized(st, m, spec, cfg.slices[j], nodes);
        for (std::size_t n = 0; n < nodes.size(); ++n)
            for (int c = 0; c < u0.dim(); ++c) {
                u.at(j, n, c) = est[n].value[c];
                u.se(j, n, c) = est[n].se[c];
            }
    }
    return u;
}

}  // namespace fkb
