#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

#include "errors.hpp"
#include "linalg.hpp"

namespace fkb {

/// Uniform axis with n >= 2 nodes spanning [lo, hi].
struct Axis {
    double lo = -1.0;
    double hi = 1.0;
    int n = 2;

    double step() const { return (hi - lo) / (n - 1); }
    double node(int i) const { return lo + step() * i; }
    friend bool operator==(const Axis&, const Axis&) = default;
};

/// Tensor-product grid; flat index i0 + n0 * (i1 + n1 * i2).
struct SpatialGrid {
    int dim = 1;
    std::array<Axis, kMaxDim> axes{};

    SpatialGrid() = default;
    SpatialGrid(int d, std::array<Axis, kMaxDim> ax) : dim(d), axes(ax) { validate(); }

    /// [-L, L]^d with n nodes per axis.
    static SpatialGrid box(int d, double L, int n) {
        std::array<Axis, kMaxDim> ax{};
        for (int i = 0; i < d; ++i) ax[i] = Axis{-L, L, n};
        return SpatialGrid(d, ax);
    }

    void validate() const {
        require_dim(dim);
        for (int i = 0; i < dim; ++i) {
            const Axis& a = axes[i];
            if (a.n < 2 || !(a.hi > a.lo) || !std::isfinite(a.lo) || !std::isfinite(a.hi))
                throw ParameterError("SpatialGrid: axis " + std::to_string(i) +
                                     " needs n >= 2 and lo < hi");
        }
    }

    std::size_t size() const {
        std::size_t s = 1;
        for (int i = 0; i < dim; ++i) s *= static_cast<std::size_t>(axes[i].n);
        return s;
    }

    std::array<int, kMaxDim> unflatten(std::size_t flat) const {
        std::array<int, kMaxDim> idx{};
        for (int i = 0; i < dim; ++i) {
            idx[i] = static_cast<int>(flat % static_cast<std::size_t>(axes[i].n));
            flat /= static_cast<std::size_t>(axes[i].n);
        }
        return idx;
    }

    std::size_t flatten(const std::array<int, kMaxDim>& idx) const {
        std::size_t flat = 0;
        for (int i = dim - 1; i >= 0; --i) flat = flat * axes[i].n + idx[i];
        return flat;
    }

    Vec node(std::size_t flat) const {
        const auto idx = unflatten(flat);
        Vec x(dim);
        for (int i = 0; i < dim; ++i) x[i] = axes[i].node(idx[i]);
        return x;
    }

    bool contains(const Vec& x) const {
        for (int i = 0; i < dim; ++i)
            if (!(x[i] >= axes[i].lo && x[i] <= axes[i].hi)) return false;
        return true;
    }

    /// Largest L with [-L, L]^d inside the grid.
    double inner_radius() const {
        double r = INFINITY;
        for (int i = 0; i < dim; ++i) r = std::min({r, -axes[i].lo, axes[i].hi});
        return r;
    }

    double outer_radius() const {
        double s = 0.0;
        for (int i = 0; i < dim; ++i) {
            const double m = std::max(std::abs(axes[i].lo), std::abs(axes[i].hi));
            s += m * m;
        }
        return std::sqrt(s);
    }

    friend bool operator==(const SpatialGrid& a, const SpatialGrid& b) {
        if (a.dim != b.dim) return false;
        for (int i = 0; i < a.dim; ++i)
            if (!(a.axes[i] == b.axes[i])) return false;
        return true;
    }

    /// Multilinear interpolation of an ncomp-valued array at x (clamped to the
    /// box). Writes ncomp values to out.
    void interpolate(const double* values, int ncomp, const Vec& x, double* out) const {
        std::array<int, kMaxDim> base{};
        std::array<double, kMaxDim> frac{};
        for (int i = 0; i < dim; ++i) {
            const Axis& a = axes[i];
            double u = (x[i] - a.lo) / a.step();
            u = std::clamp(u, 0.0, static_cast<double>(a.n - 1));
            int k = static_cast<int>(u);
            if (k >= a.n - 1) k = a.n - 2;
            base[i] = k;
            frac[i] = u - k;
        }
        for (int c = 0; c < ncomp; ++c) out[c] = 0.0;
        const int corners = 1 << dim;
        for (int corner = 0; corner < corners; ++corner) {
            double w = 1.0;
            std::array<int, kMaxDim> idx{};
            for (int i = 0; i < dim; ++i) {
                const int bit = (corner >> i) & 1;
                idx[i] = base[i] + bit;
                w *= bit ? frac[i] : 1.0 - frac[i];
            }
            if (w == 0.0) continue;
            const double* v = values + flatten(idx) * static_cast<std::size_t>(ncomp);
            for (int c = 0; c < ncomp; ++c) out[c] += w * v[c];
        }
    }
};

}  // namespace fkb
