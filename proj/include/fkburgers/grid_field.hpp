#pragma once

// Space-time sampled fields: the carrier of one Picard iterate (or of its
// gradient) on a tensor grid with linear-in-time, multilinear-in-space
// interpolation.

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "errors.hpp"
#include "grid.hpp"
#include "linalg.hpp"
#include "velocity.hpp"

namespace fkb {

enum class Extrapolation { Envelope, Clamp, Error };

/// What a field stores per node: a velocity (d components) or a gradient
/// matrix (d x d components, G(i, j) = d_i u_j at offset i * d + j).
enum class FieldLayout { Value, Gradient };

class GridField {
public:
    GridField() = default;

    GridField(SpatialGrid grid, std::vector<double> slice_times, FieldLayout layout = FieldLayout::Value)
        : grid_(grid), times_(std::move(slice_times)), layout_(layout) {
        grid_.validate();
        if (times_.empty()) throw ParameterError("GridField: at least one time slice is required");
        if (times_.front() != 0.0) throw ParameterError("GridField: first slice must be t = 0");
        for (std::size_t j = 1; j < times_.size(); ++j)
            if (!(times_[j] > times_[j - 1]))
                throw ParameterError("GridField: slice times must be strictly increasing");
        ncomp_ = layout == FieldLayout::Value ? grid_.dim : grid_.dim * grid_.dim;
        values_.assign(times_.size() * grid_.size() * ncomp_, 0.0);
    }

    int dim() const { return grid_.dim; }
    int ncomp() const { return ncomp_; }
    FieldLayout layout() const { return layout_; }
    const SpatialGrid& grid() const { return grid_; }
    const std::vector<double>& times() const { return times_; }
    std::size_t slices() const { return times_.size(); }
    std::size_t nodes() const { return grid_.size(); }

    int m_index = 0;
    Extrapolation policy = Extrapolation::Envelope;
    /// u_0 used by the Envelope policy.
    std::optional<VelocityField> envelope;

    double* slice(std::size_t j) { return values_.data() + j * nodes() * ncomp_; }
    const double* slice(std::size_t j) const { return values_.data() + j * nodes() * ncomp_; }
    double& at(std::size_t j, std::size_t node, int c) { return slice(j)[node * ncomp_ + c]; }
    double at(std::size_t j, std::size_t node, int c) const { return slice(j)[node * ncomp_ + c]; }

    bool has_stderr() const { return !stderr_.empty(); }
    void enable_stderr() { stderr_.assign(values_.size(), 0.0); }
    double& se(std::size_t j, std::size_t node, int c) {
        return stderr_[(j * nodes() + node) * ncomp_ + c];
    }
    double se(std::size_t j, std::size_t node, int c) const {
        return has_stderr() ? stderr_[(j * nodes() + node) * ncomp_ + c] : 0.0;
    }

    const std::vector<double>& raw() const { return values_; }
    std::vector<double>& raw() { return values_; }
    const std::vector<double>& raw_stderr() const { return stderr_; }

    /// Index of an exact slice time, if any.
    std::optional<std::size_t> slice_index(double t) const {
        for (std::size_t j = 0; j < times_.size(); ++j)
            if (std::abs(times_[j] - t) <= 1e-12 * (1.0 + t)) return j;
        return std::nullopt;
    }

    /// Bracketing slices and weight of the upper one; clamped to the stored
    /// time range.
    void time_weights(double tau, std::size_t& j0, std::size_t& j1, double& w) const {
        if (tau <= times_.front() || times_.size() == 1) {
            j0 = j1 = 0;
            w = 0.0;
            return;
        }
        if (tau >= times_.back()) {
            j0 = j1 = times_.size() - 1;
            w = 0.0;
            return;
        }
        std::size_t hi = 1;
        while (times_[hi] < tau) ++hi;
        j0 = hi - 1;
        j1 = hi;
        w = (tau - times_[j0]) / (times_[j1] - times_[j0]);
    }

    /// Spatial array of the field at time tau (linear in time).
    void spatial_at(double tau, double* out) const {
        std::size_t j0, j1;
        double w;
        time_weights(tau, j0, j1, w);
        const std::size_t n = nodes() * ncomp_;
        const double* a = slice(j0);
        const double* b = slice(j1);
        if (w == 0.0) {
            std::memcpy(out, a, n * sizeof(double));
        } else {
            for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + w * (b[i] - a[i]);
        }
    }

    /// Value outside the box under the configured policy.
    void extrapolate(const Vec& x, double* out, const double* clamp_source) const {
        switch (policy) {
            case Extrapolation::Error:
                throw DomainError("GridField: point outside the grid box (|x| = " +
                                  std::to_string(x.norm()) + ")");
            case Extrapolation::Clamp:
                grid_.interpolate(clamp_source, ncomp_, x, out);
                return;
            case Extrapolation::Envelope:
                if (!envelope) {
                    grid_.interpolate(clamp_source, ncomp_, x, out);
                    return;
                }
                envelope_value(x, out);
                return;
        }
    }

    /// u_0 (or grad u_0) at x, magnitude-capped by its a priori bound.
    void envelope_value(const Vec& x, double* out) const {
        const VelocityField& f = *envelope;
        const double r = x.norm();
        if (layout_ == FieldLayout::Value) {
            Vec v = f(x);
            const double cap = f.bound0(r), n = v.norm();
            if (n > cap) v *= cap / n;
            for (int c = 0; c < ncomp_; ++c) out[c] = v[c];
        } else {
            Mat G = f.gradient(x);
            const double cap = f.bound1(r), n = G.frobenius();
            if (n > cap) G *= cap / n;
            const int d = grid_.dim;
            for (int i = 0; i < d; ++i)
                for (int j = 0; j < d; ++j) out[i * d + j] = G(i, j);
        }
    }

    /// Interpolated value at (tau, x); writes ncomp values.
    void sample(double tau, const Vec& x, double* out) const {
        std::size_t j0, j1;
        double w;
        time_weights(tau, j0, j1, w);
        if (!grid_.contains(x)) {
            extrapolate(x, out, slice(j0));
            if (w == 0.0 || policy == Extrapolation::Envelope) return;
            std::array<double, kMaxDim * kMaxDim> hi{};
            extrapolate(x, hi.data(), slice(j1));
            for (int c = 0; c < ncomp_; ++c) out[c] += w * (hi[c] - out[c]);
            return;
        }
        grid_.interpolate(slice(j0), ncomp_, x, out);
        if (w == 0.0) return;
        std::array<double, kMaxDim * kMaxDim> hi{};
        grid_.interpolate(slice(j1), ncomp_, x, hi.data());
        for (int c = 0; c < ncomp_; ++c) out[c] += w * (hi[c] - out[c]);
    }

    Vec value(double tau, const Vec& x) const {
        if (layout_ != FieldLayout::Value) throw ParameterError("GridField::value on a gradient field");
        Vec v(grid_.dim);
        sample(tau, x, v.c.data());
        return v;
    }

    Mat matrix(double tau, const Vec& x) const {
        if (layout_ != FieldLayout::Gradient) throw ParameterError("GridField::matrix on a value field");
        std::array<double, kMaxDim * kMaxDim> buf{};
        sample(tau, x, buf.data());
        const int d = grid_.dim;
        Mat G(d);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) G(i, j) = buf[i * d + j];
        return G;
    }

    /// Stored value at a node, as a vector (Value layout) or matrix.
    Vec node_value(std::size_t j, std::size_t node) const {
        Vec v(grid_.dim);
        for (int c = 0; c < grid_.dim; ++c) v[c] = at(j, node, c);
        return v;
    }
    Mat node_matrix(std::size_t j, std::size_t node) const {
        const int d = grid_.dim;
        Mat G(d);
        for (int i = 0; i < d; ++i)
            for (int k = 0; k < d; ++k) G(i, k) = at(j, node, i * d + k);
        return G;
    }

    bool same_shape(const GridField& o) const {
        return grid_ == o.grid_ && times_ == o.times_ && layout_ == o.layout_;
    }

    // -- serialization ----------------------------------------------------

    /// Binary container: magic, dims, axes, slice times, payload row-major
    /// [slice][node][component], then the optional standard-error payload.
    void save_binary(const std::string& path) const {
        std::ofstream f(path, std::ios::binary);
        if (!f) throw ParameterError("cannot open " + path + " for writing");
        const char magic[8] = {'F', 'K', 'B', 'G', 'R', 'I', 'D', '1'};
        f.write(magic, 8);
        auto put_i = [&f](std::int64_t v) { f.write(reinterpret_cast<const char*>(&v), sizeof v); };
        auto put_d = [&f](double v) { f.write(reinterpret_cast<const char*>(&v), sizeof v); };
        put_i(grid_.dim);
        put_i(layout_ == FieldLayout::Value ? 0 : 1);
        put_i(m_index);
        for (int i = 0; i < grid_.dim; ++i) {
            put_d(grid_.axes[i].lo);
            put_d(grid_.axes[i].hi);
            put_i(grid_.axes[i].n);
        }
        put_i(static_cast<std::int64_t>(times_.size()));
        for (double t : times_) put_d(t);
        f.write(reinterpret_cast<const char*>(values_.data()),
                static_cast<std::streamsize>(values_.size() * sizeof(double)));
        put_i(has_stderr() ? 1 : 0);
        if (has_stderr())
            f.write(reinterpret_cast<const char*>(stderr_.data()),
                    static_cast<std::streamsize>(stderr_.size() * sizeof(double)));
    }

    static GridField load_binary(const std::string& path) {
        std::ifstream f(path, std::ios::binary);
        if (!f) throw ParameterError("cannot open " + path);
        char magic[8];
        f.read(magic, 8);
        if (!f || std::string(magic, 8) != "FKBGRID1") throw ParameterError(path + ": not a grid field file");
        auto get_i = [&f]() {
            std::int64_t v;
            f.read(reinterpret_cast<char*>(&v), sizeof v);
            return v;
        };
        auto get_d = [&f]() {
            double v;
            f.read(reinterpret_cast<char*>(&v), sizeof v);
            return v;
        };
        const int d = static_cast<int>(get_i());
        require_dim(d);
        const FieldLayout layout = get_i() == 0 ? FieldLayout::Value : FieldLayout::Gradient;
        const int m = static_cast<int>(get_i());
        std::array<Axis, kMaxDim> ax{};
        for (int i = 0; i < d; ++i) {
            ax[i].lo = get_d();
            ax[i].hi = get_d();
            ax[i].n = static_cast<int>(get_i());
        }
        const auto nt = get_i();
        if (!f || nt < 1 || nt > (1 << 24)) throw ParameterError(path + ": corrupt header");
        std::vector<double> times(static_cast<std::size_t>(nt));
        for (auto& t : times) t = get_d();
        GridField g(SpatialGrid(d, ax), times, layout);
        g.m_index = m;
        f.read(reinterpret_cast<char*>(g.values_.data()),
               static_cast<std::streamsize>(g.values_.size() * sizeof(double)));
        if (get_i() == 1) {
            g.enable_stderr();
            f.read(reinterpret_cast<char*>(g.stderr_.data()),
                   static_cast<std::streamsize>(g.stderr_.size() * sizeof(double)));
        }
        if (!f) throw ParameterError(path + ": truncated payload");
        return g;
    }

    /// CSV of one slice: node coordinates, components, standard errors.
    void write_csv_slice(std::ostream& os, std::size_t j) const {
        const int d = grid_.dim;
        for (int i = 0; i < d; ++i) os << (i ? "," : "") << "x" << i;
        for (int c = 0; c < ncomp_; ++c) os << ",u" << c;
        if (has_stderr())
            for (int c = 0; c < ncomp_; ++c) os << ",se" << c;
        os << '\n';
        os.precision(17);
        for (std::size_t n = 0; n < nodes(); ++n) {
            const Vec x = grid_.node(n);
            for (int i = 0; i < d; ++i) os << (i ? "," : "") << x[i];
            for (int c = 0; c < ncomp_; ++c) os << ',' << at(j, n, c);
            if (has_stderr())
                for (int c = 0; c < ncomp_; ++c) os << ',' << se(j, n, c);
            os << '\n';
        }
    }

private:
    SpatialGrid grid_;
    std::vector<double> times_;
    FieldLayout layout_ = FieldLayout::Value;
    int ncomp_ = 1;
    std::vector<double> values_;
    std::vector<double> stderr_;
};

/// Every slice equal to u_0 (or grad u_0) sampled at the nodes.
inline GridField sample_initial(const VelocityField& u0, const SpatialGrid& grid,
                                const std::vector<double>& times, FieldLayout layout = FieldLayout::Value) {
    GridField g(grid, times, layout);
    const int d = grid.dim;
    for (std::size_t n = 0; n < grid.size(); ++n) {
        const Vec x = grid.node(n);
        if (layout == FieldLayout::Value) {
            const Vec v = u0(x);
            for (std::size_t j = 0; j < times.size(); ++j)
                for (int c = 0; c < d; ++c) g.at(j, n, c) = v[c];
        } else {
            const Mat G = u0.gradient(x);
            for (std::size_t j = 0; j < times.size(); ++j)
                for (int i = 0; i < d; ++i)
                    for (int k = 0; k < d; ++k) g.at(j, n, i * d + k) = G(i, k);
        }
    }
    g.envelope = u0;
    return g;
}

/// Central differences of a value field on interior nodes (one-sided at the
/// box faces); gradient layout result.
inline GridField fd_gradient_field(const GridField& u) {
    if (u.layout() != FieldLayout::Value) throw ParameterError("fd_gradient_field expects a value field");
    const SpatialGrid& g = u.grid();
    const int d = g.dim;
    GridField out(g, u.times(), FieldLayout::Gradient);
    out.m_index = u.m_index;
    out.envelope = u.envelope;
    for (std::size_t j = 0; j < u.slices(); ++j)
        for (std::size_t n = 0; n < g.size(); ++n) {
            const auto idx = g.unflatten(n);
            for (int i = 0; i < d; ++i) {
                auto lo = idx, hi = idx;
                if (hi[i] + 1 < g.axes[i].n) ++hi[i];
                if (lo[i] > 0) --lo[i];
                const double span = (hi[i] - lo[i]) * g.axes[i].step();
                const std::size_t nl = g.flatten(lo), nh = g.flatten(hi);
                for (int k = 0; k < d; ++k) out.at(j, n, i * d + k) = (u.at(j, nh, k) - u.at(j, nl, k)) / span;
            }
        }
    return out;
}

}  // namespace fkb
