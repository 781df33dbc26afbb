#pragma once

// Initial velocity fields u_0, their growth constants and sampled validators,
// and the penalty functions F_n.

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "errors.hpp"
#include "grid.hpp"
#include "linalg.hpp"
#include "scalar_flows.hpp"
#include "zones.hpp"

namespace fkb {

enum class FieldKind { Prototype, AnnularPerturbed, LinearProfile, Constant, TabulatedGrid };

inline std::string_view to_string(FieldKind k) {
    switch (k) {
        case FieldKind::Prototype: return "prototype";
        case FieldKind::AnnularPerturbed: return "annular";
        case FieldKind::LinearProfile: return "linear";
        case FieldKind::Constant: return "constant";
        case FieldKind::TabulatedGrid: return "tabulated";
    }
    return "unknown";
}

/// Constants of the a priori bounds
///   |u_0| <= K0 (1+|x|)^{alpha/2 + 1/kappa}
///   |grad u_0| <= K1 (1+|x|)^{alpha + 2/kappa}
///   |hess u_0| <= K2 (1+|x|)^{(3/2)(alpha/2 + 1/kappa)}
struct GrowthConstants {
    double K0 = 1.0;
    double K1 = 1.0;
    double K2 = 1.0;
    double alpha = 0.0;
    double beta = 0.0;

    double e0(double kappa) const { return alpha / 2.0 + 1.0 / kappa; }
    double e1(double kappa) const { return alpha + 2.0 / kappa; }
    double e2(double kappa) const { return 1.5 * e0(kappa); }

    /// Throws ValidationError naming the first broken relation among
    /// K0 <= U^{beta/2+1}, K0 <= K1^{1/2}, U <= K1 <= K2^{2/3}.
    void validate(double U) const {
        constexpr double slack = 1.0 + 1e-12;
        if (!(K0 > 0.0 && K1 > 0.0 && K2 > 0.0))
            throw ValidationError("growth constants K0, K1, K2 must be > 0");
        if (!(alpha >= 0.0 && beta >= 0.0))
            throw ValidationError("growth exponents alpha, beta must be >= 0");
        if (K0 > std::pow(U, beta / 2.0 + 1.0) * slack)
            throw ValidationError("K0 = " + std::to_string(K0) + " exceeds U^{beta/2+1} = " +
                                  std::to_string(std::pow(U, beta / 2.0 + 1.0)));
        if (K0 > std::sqrt(K1) * slack)
            throw ValidationError("K0 = " + std::to_string(K0) + " exceeds K1^{1/2} = " +
                                  std::to_string(std::sqrt(K1)));
        if (U > K1 * slack)
            throw ValidationError("U = " + std::to_string(U) + " exceeds K1 = " + std::to_string(K1));
        if (K1 > std::pow(K2, 2.0 / 3.0) * slack)
            throw ValidationError("K1 = " + std::to_string(K1) + " exceeds K2^{2/3} = " +
                                  std::to_string(std::pow(K2, 2.0 / 3.0)));
    }
};

namespace detail {

struct FieldImpl {
    virtual ~FieldImpl() = default;
    virtual Vec value(const Vec& x) const = 0;
    virtual Mat gradient(const Vec& x) const = 0;
    virtual std::optional<Tensor3> hessian(const Vec&) const { return std::nullopt; }
};

}  // namespace detail

/// Immutable initial velocity field. Gradient convention G(i, j) = d_i u_j,
/// hessian H(i, j, k) = d_i d_j u_k.
class VelocityField {
public:
    VelocityField(int dim, FieldKind kind, double kappa, double U, GrowthConstants constants,
                  std::shared_ptr<const detail::FieldImpl> impl)
        : dim_(dim), kind_(kind), kappa_(kappa), U_(U), constants_(constants), impl_(std::move(impl)) {
        require_dim(dim);
        FlowParams{kappa, U, 0.0}.validate();
    }

    int dim() const { return dim_; }
    FieldKind kind() const { return kind_; }
    double kappa() const { return kappa_; }
    double U() const { return U_; }
    const GrowthConstants& constants() const { return constants_; }
    FlowParams flow() const { return FlowParams{kappa_, U_, 0.0}; }

    VelocityField with_constants(GrowthConstants c) const {
        VelocityField f = *this;
        f.constants_ = c;
        return f;
    }

    Vec operator()(const Vec& x) const { return impl_->value(x); }
    double operator()(double x) const { return impl_->value(Vec{x})[0]; }
    Mat gradient(const Vec& x) const { return impl_->gradient(x); }

    bool has_analytic_hessian() const { return impl_->hessian(Vec(dim_)).has_value(); }

    /// Analytic when available, else central differences of the gradient with
    /// step 1e-4 (1 + |x|).
    Tensor3 hessian(const Vec& x) const {
        if (auto h = impl_->hessian(x)) return *h;
        const double step = 1e-4 * (1.0 + x.norm());
        Tensor3 H(dim_);
        for (int i = 0; i < dim_; ++i) {
            Vec xp = x, xm = x;
            xp[i] += step;
            xm[i] -= step;
            const Mat gp = gradient(xp), gm = gradient(xm);
            for (int j = 0; j < dim_; ++j)
                for (int k = 0; k < dim_; ++k) H(i, j, k) = (gp(j, k) - gm(j, k)) / (2.0 * step);
        }
        return H;
    }

    /// K0 (1+|x|)^{alpha/2+1/kappa}
    double bound0(double r) const { return constants_.K0 * std::pow(1.0 + r, constants_.e0(kappa_)); }
    double bound1(double r) const { return constants_.K1 * std::pow(1.0 + r, constants_.e1(kappa_)); }
    double bound2(double r) const { return constants_.K2 * std::pow(1.0 + r, constants_.e2(kappa_)); }

    const detail::FieldImpl& impl() const { return *impl_; }

private:
    int dim_;
    FieldKind kind_;
    double kappa_;
    double U_;
    GrowthConstants constants_;
    std::shared_ptr<const detail::FieldImpl> impl_;
};

using VelocityFieldSpec = VelocityField;

/// Central-difference gradient of an arbitrary vector map.
inline Mat fd_gradient(const std::function<Vec(const Vec&)>& f, const Vec& x, double step) {
    const int d = x.dim;
    Mat G(d);
    for (int i = 0; i < d; ++i) {
        Vec xp = x, xm = x;
        xp[i] += step;
        xm[i] -= step;
        const Vec fp = f(xp), fm = f(xm);
        for (int j = 0; j < d; ++j) G(i, j) = (fp[j] - fm[j]) / (2.0 * step);
    }
    return G;
}

namespace detail {

/// Radial profile s(r): r^{1/kappa} for r >= 1, quintic a r^3 + b r^4 + c r^5
/// on [0, 1] matching value and two derivatives at r = 1. Returned as g = s/r
/// and h = g'/r, with hp = h'/r.
struct RadialProfile {
    double p = 0.5;
    double a = 0.0, b = 0.0, c = 0.0;

    explicit RadialProfile(double kappa) : p(1.0 / kappa) {
        const double q = p * (p - 1.0);
        c = (q - 6.0 * p + 12.0) / 2.0;
        b = 7.0 * p - q - 15.0;
        a = 1.0 - b - c;
    }

    double s(double r) const { return r >= 1.0 ? std::pow(r, p) : r * r * r * (a + r * (b + r * c)); }
    double g(double r) const { return r >= 1.0 ? std::pow(r, p - 1.0) : r * r * (a + r * (b + r * c)); }
    double h(double r) const {
        return r >= 1.0 ? (p - 1.0) * std::pow(r, p - 3.0) : 2.0 * a + r * (3.0 * b + 4.0 * c * r);
    }
    /// h'(r) / r; only ever multiplied by terms of order r^3.
    double hp_over_r(double r) const {
        if (r >= 1.0) return (p - 1.0) * (p - 3.0) * std::pow(r, p - 5.0);
        if (r == 0.0) return 0.0;
        return 3.0 * b / r + 8.0 * c;
    }
};

struct PrototypeImpl final : FieldImpl {
    int d;
    double U;
    Mat Q;
    RadialProfile prof;

    PrototypeImpl(int d_, double U_, double kappa, Mat Q_) : d(d_), U(U_), Q(Q_), prof(kappa) {}

    Vec value(const Vec& x) const override {
        const double r = x.norm();
        return (U * prof.g(r)) * (Q * x);
    }
    Mat gradient(const Vec& x) const override {
        const double r = x.norm();
        const Vec qx = Q * x;
        const double h = U * prof.h(r), g = U * prof.g(r);
        Mat G(d);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) G(i, j) = h * x[i] * qx[j] + g * Q(j, i);
        return G;
    }
    std::optional<Tensor3> hessian(const Vec& x) const override {
        const double r = x.norm();
        const Vec qx = Q * x;
        const double h = U * prof.h(r), hp = U * prof.hp_over_r(r);
        Tensor3 H(d);
        for (int k = 0; k < d; ++k)
            for (int i = 0; i < d; ++i)
                for (int j = 0; j < d; ++j) {
                    H(k, i, j) = hp * x[k] * x[i] * qx[j] +
                                 h * ((k == i ? qx[j] : 0.0) + x[i] * Q(j, k) + x[k] * Q(j, i));
                }
        return H;
    }
};

struct LinearImpl final : FieldImpl {
    Mat A;
    explicit LinearImpl(Mat A_) : A(A_) {}
    Vec value(const Vec& x) const override { return A * x; }
    Mat gradient(const Vec&) const override { return A.transposed(); }
    std::optional<Tensor3> hessian(const Vec&) const override { return Tensor3(A.dim); }
};

struct ConstantImpl final : FieldImpl {
    Vec c;
    explicit ConstantImpl(Vec c_) : c(c_) {}
    Vec value(const Vec&) const override { return c; }
    Mat gradient(const Vec&) const override { return Mat(c.dim); }
    std::optional<Tensor3> hessian(const Vec&) const override { return Tensor3(c.dim); }
};

/// Multilinear interpolation of node values, clamped outside the box.
struct TabulatedImpl final : FieldImpl {
    SpatialGrid grid;
    std::vector<double> values;

    TabulatedImpl(SpatialGrid g, std::vector<double> v) : grid(g), values(std::move(v)) {}

    Vec value(const Vec& x) const override {
        Vec out(grid.dim);
        grid.interpolate(values.data(), grid.dim, x, out.c.data());
        return out;
    }
    Mat gradient(const Vec& x) const override {
        double step = INFINITY;
        for (int i = 0; i < grid.dim; ++i) step = std::min(step, grid.axes[i].step());
        return fd_gradient([this](const Vec& y) { return value(y); }, x, 0.5 * step);
    }
};

inline double bump(double z) { return std::abs(z) < 1.0 ? std::exp(1.0 - 1.0 / (1.0 - z * z)) : 0.0; }
inline double bump_prime(double z) {
    if (std::abs(z) >= 1.0) return 0.0;
    const double w = 1.0 - z * z;
    return bump(z) * (-2.0 * z / (w * w));
}

struct AnnularImpl final : FieldImpl {
    VelocityField base;
    struct Zone {
        double mid, half_width, amplitude;
    };
    std::vector<Zone> zones;
    Vec direction;
    double K0, exponent;

    AnnularImpl(VelocityField b, std::vector<Zone> z, Vec e, double k0, double ex)
        : base(std::move(b)), zones(std::move(z)), direction(e), K0(k0), exponent(ex) {}

    /// Sum of bump profiles at radius r and its radial derivative.
    std::pair<double, double> profile(double r) const {
        double v = 0.0, dv = 0.0;
        for (const Zone& z : zones) {
            if (z.amplitude == 0.0) continue;
            const double u = (r - z.mid) / z.half_width;
            if (std::abs(u) >= 1.0) continue;
            v += z.amplitude * bump(u);
            dv += z.amplitude * bump_prime(u) / z.half_width;
        }
        return {v, dv};
    }

    bool active(double r) const {
        for (const Zone& z : zones)
            if (z.amplitude != 0.0 && std::abs(r - z.mid) < z.half_width) return true;
        return false;
    }

    Vec value(const Vec& x) const override {
        const double r = x.norm();
        if (!active(r)) return base(x);
        const Vec raw = base(x) + profile(r).first * direction;
        const double cap = K0 * std::pow(1.0 + r, exponent);
        const double n = raw.norm();
        return n > cap ? raw * (cap / n) : raw;
    }

    Mat gradient(const Vec& x) const override {
        const double r = x.norm();
        if (!active(r)) return base.gradient(x);
        const int d = x.dim;
        const auto [pv, pdv] = profile(r);
        const Vec raw = base(x) + pv * direction;
        Mat G = base.gradient(x);
        for (int i = 0; i < d; ++i) {
            const double dri = r > 0.0 ? x[i] / r : 0.0;
            for (int j = 0; j < d; ++j) G(i, j) += pdv * dri * direction[j];
        }
        const double cap = K0 * std::pow(1.0 + r, exponent);
        const double n = raw.norm();
        if (n <= cap) return G;
        const Vec vhat = raw * (1.0 / n);
        const double dcap = exponent * cap / (1.0 + r);
        Mat out(d);
        for (int i = 0; i < d; ++i) {
            double proj = 0.0;
            for (int k = 0; k < d; ++k) proj += G(i, k) * vhat[k];
            const double dri = r > 0.0 ? x[i] / r : 0.0;
            for (int j = 0; j < d; ++j)
                out(i, j) = dcap * dri * vhat[j] + (cap / n) * (G(i, j) - vhat[j] * proj);
        }
        return out;
    }
};

}  // namespace detail

/// Checks that a direction matrix maps unit vectors to unit vectors on 10^3
/// sampled directions.
inline void validate_direction_map(const Mat& Q, std::uint64_t seed = 7) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    for (int s = 0; s < 1000; ++s) {
        Vec w(Q.dim);
        for (int i = 0; i < Q.dim; ++i) w[i] = normal(rng);
        if (w.norm() == 0.0) continue;
        w *= 1.0 / w.norm();
        const double n = (Q * w).norm();
        if (std::abs(n - 1.0) > 1e-9)
            throw ValidationError("direction map sends a unit vector to norm " + std::to_string(n));
    }
}

/// Rotation by angle theta in the plane; identity in d = 1 (theta ignored) and
/// rotation about the last axis in d = 3.
inline Mat rotation(int d, double theta) {
    Mat Q = Mat::identity(d);
    if (d >= 2) {
        Q(0, 0) = std::cos(theta);
        Q(0, 1) = -std::sin(theta);
        Q(1, 0) = std::sin(theta);
        Q(1, 1) = std::cos(theta);
    }
    return Q;
}

/// Minimal growth constants, inflated by `slack`, that cover the field on a
/// sampled ball and satisfy the K relations.
GrowthConstants fit_growth_constants(const VelocityField& f, double alpha, double radius_max,
                                     int samples = 4000, double slack = 1.01);

/// u_0(x) = U s(|x|) Q x / |x|.
inline VelocityField make_prototype(int d, double U, double kappa, const Mat& direction_map,
                                    std::optional<GrowthConstants> constants = std::nullopt) {
    require_dim(d);
    FlowParams{kappa, U, 0.0}.validate();
    if (direction_map.dim != d) throw ParameterError("make_prototype: direction map dimension mismatch");
    validate_direction_map(direction_map);
    auto impl = std::make_shared<detail::PrototypeImpl>(d, U, kappa, direction_map);
    VelocityField f(d, FieldKind::Prototype, kappa, U, GrowthConstants{}, impl);
    const GrowthConstants c = constants ? *constants : fit_growth_constants(f, 0.0, 64.0);
    c.validate(U);
    return f.with_constants(c);
}

inline VelocityField make_prototype(int d, double U, double kappa) {
    return make_prototype(d, U, kappa, Mat::identity(d));
}

/// u_0(x) = A x. Default constants K0 = K1 = K2 = max(U, |A|) with alpha = 1.
inline VelocityField make_linear(const Mat& A, double U = 1.0, double kappa = 2.0,
                                 std::optional<GrowthConstants> constants = std::nullopt) {
    const double a = std::max(U, A.frobenius());
    if (!constants) U = a;
    GrowthConstants c = constants ? *constants : GrowthConstants{a, a * a, std::pow(a * a, 1.5), 1.0, 2.0};
    VelocityField f(A.dim, FieldKind::LinearProfile, kappa, U, c,
                    std::make_shared<detail::LinearImpl>(A));
    c.validate(U);
    return f;
}

inline VelocityField make_linear_1d(double slope = 1.0) {
    Mat A(1);
    A(0, 0) = slope;
    if (std::abs(slope) <= 1.0) return make_linear(A, 1.0, 2.0, GrowthConstants{1.0, 1.0, 1.0, 1.0, 0.0});
    return make_linear(A);
}

inline VelocityField make_constant(const Vec& c, double U = 1.0, double kappa = 2.0,
                                   std::optional<GrowthConstants> constants = std::nullopt) {
    const double u = std::max(U, c.norm());
    const GrowthConstants g = constants ? *constants : GrowthConstants{u, u * u, u * u * u, 0.0, 0.0};
    return VelocityField(c.dim, FieldKind::Constant, kappa, u, g, std::make_shared<detail::ConstantImpl>(c));
}

/// Field sampled from f on the nodes of grid.
inline VelocityField make_tabulated(const SpatialGrid& grid, const std::function<Vec(const Vec&)>& f,
                                    double U, double kappa, GrowthConstants constants) {
    std::vector<double> values(grid.size() * grid.dim);
    for (std::size_t n = 0; n < grid.size(); ++n) {
        const Vec v = f(grid.node(n));
        for (int i = 0; i < grid.dim; ++i) values[n * grid.dim + i] = v[i];
    }
    return VelocityField(grid.dim, FieldKind::TabulatedGrid, kappa, U, constants,
                         std::make_shared<detail::TabulatedImpl>(grid, std::move(values)));
}

/// Stationary viscous shock -a tanh(a x / 2) tabulated on [-L, L].
inline VelocityField make_shock_1d(double a = 1.0, double L = 60.0, int n = 24001) {
    return make_tabulated(
        SpatialGrid::box(1, L, n), [a](const Vec& x) { return Vec{-a * std::tanh(a * x[0] / 2.0)}; },
        std::max(1.0, a), 2.0, GrowthConstants{std::max(1.0, a), std::max(1.0, a * a), std::max(1.0, std::pow(a, 3.0)), 0.0, 0.0});
}

/// Adds a radial bump of peak amplitudes[i] along `direction` inside each
/// dangerous zone A_{i+1}. Bump magnitudes are clipped to K0 (1+|x|)^{alpha/2
/// + 1/kappa}; outside the zones the result equals the base exactly.
inline VelocityField make_annular(const VelocityField& base, const ZoneLayout& layout,
                                  const std::vector<double>& amplitudes, GrowthConstants constants,
                                  std::optional<Vec> direction = std::nullopt) {
    const LayoutReport rep = validate_layout(layout);
    if (!rep.pass) throw ValidationError("make_annular: invalid layout: " + rep.first_violation);
    if (amplitudes.size() > layout.dangerous_count())
        throw ParameterError("make_annular: " + std::to_string(amplitudes.size()) +
                             " amplitudes for " + std::to_string(layout.dangerous_count()) +
                             " dangerous zones");
    const double kappa = base.kappa();
    const double exponent = constants.e0(kappa);
    std::vector<detail::AnnularImpl::Zone> zones;
    for (std::size_t i = 0; i < amplitudes.size(); ++i) {
        const double a = amplitudes[i];
        if (!std::isfinite(a)) throw ParameterError("make_annular: amplitudes must be finite");
        const double lo = layout.R(2 * i + 1), hi = layout.R(2 * i + 2);
        const double cap = constants.K0 * std::pow(1.0 + hi, exponent);
        if (std::abs(a) > cap)
            throw AmplitudeError("amplitude " + std::to_string(a) + " in zone " +
                                     std::to_string(i + 1) + " exceeds the admissible cap " +
                                     std::to_string(cap),
                                 i + 1, cap);
        if (hi > lo) zones.push_back({0.5 * (lo + hi), 0.5 * (hi - lo), a});
    }
    Vec e = direction ? *direction : Vec::filled(base.dim(), 0.0);
    if (!direction) e[0] = 1.0;
    if (e.dim != base.dim() || std::abs(e.norm() - 1.0) > 1e-12)
        throw ParameterError("make_annular: direction must be a unit vector of the field dimension");
    auto impl = std::make_shared<detail::AnnularImpl>(base, std::move(zones), e, constants.K0, exponent);
    return VelocityField(base.dim(), FieldKind::AnnularPerturbed, kappa, base.U(), constants, impl);
}

// ---------------------------------------------------------------------------
// Sampled validators

struct SupReport {
    double sup_ratio = 0.0;
    Vec worst_point;
    bool pass = true;
    std::size_t samples = 0;
};

namespace detail {

/// Deterministic sample of the ball |x| <= radius_max: radii spread uniformly
/// (with a denser share near the origin), directions Gaussian.
inline std::vector<Vec> ball_samples(int d, std::size_t count, double radius_max, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> normal;
    std::vector<Vec> out;
    out.reserve(count);
    for (std::size_t s = 0; s < count; ++s) {
        const double u = unif(rng);
        const double r = s % 4 == 0 ? std::min(radius_max, 2.0) * u : radius_max * u;
        Vec w(d);
        double n = 0.0;
        while (n == 0.0) {
            for (int i = 0; i < d; ++i) w[i] = normal(rng);
            n = w.norm();
        }
        out.push_back(w * (r / n));
    }
    return out;
}

template <class Ratio>
SupReport sup_check(const std::vector<Vec>& pts, double limit, Ratio ratio) {
    SupReport rep;
    rep.samples = pts.size();
    rep.worst_point = pts.empty() ? Vec() : pts.front();
    for (const Vec& x : pts) {
        const double q = ratio(x);
        if (q > rep.sup_ratio) {
            rep.sup_ratio = q;
            rep.worst_point = x;
        }
    }
    rep.pass = rep.sup_ratio <= limit;
    return rep;
}

}  // namespace detail

/// sup |u_0(x)| / (1+|x|)^{1/kappa} against U.
inline SupReport check_hyp1(const VelocityField& f, std::size_t sample_count, double radius_max,
                            std::uint64_t seed = 1) {
    if (sample_count < 1) throw ParameterError("check_hyp1: sample_count must be >= 1");
    const auto pts = detail::ball_samples(f.dim(), sample_count, radius_max, seed);
    return detail::sup_check(pts, f.U(), [&](const Vec& x) {
        return f(x).norm() / std::pow(1.0 + x.norm(), 1.0 / f.kappa());
    });
}

struct AprioriReport {
    SupReport value, gradient, hessian;
    bool pass() const { return value.pass && gradient.pass && hessian.pass; }
};

/// Sup ratios of |u_0|, |grad u_0|, |hess u_0| (Frobenius) against their
/// growth envelopes. The K relations are checked first and throw on failure.
inline AprioriReport check_apriori(const VelocityField& f, std::size_t sample_count, double radius_max,
                                   std::uint64_t seed = 2) {
    if (sample_count < 1) throw ParameterError("check_apriori: sample_count must be >= 1");
    f.constants().validate(f.U());
    const auto pts = detail::ball_samples(f.dim(), sample_count, radius_max, seed);
    AprioriReport rep;
    rep.value = detail::sup_check(pts, 1.0, [&](const Vec& x) { return f(x).norm() / f.bound0(x.norm()); });
    rep.gradient = detail::sup_check(
        pts, 1.0, [&](const Vec& x) { return f.gradient(x).frobenius() / f.bound1(x.norm()); });
    rep.hessian = detail::sup_check(
        pts, 1.0, [&](const Vec& x) { return f.hessian(x).frobenius() / f.bound2(x.norm()); });
    return rep;
}

inline GrowthConstants fit_growth_constants(const VelocityField& f, double alpha, double radius_max,
                                            int samples, double slack) {
    const double kappa = f.kappa(), U = f.U();
    GrowthConstants probe{1.0, 1.0, 1.0, alpha, 0.0};
    const auto pts = detail::ball_samples(f.dim(), static_cast<std::size_t>(samples), radius_max, 11);
    double k0 = 0.0, k1 = 0.0, k2 = 0.0;
    for (const Vec& x : pts) {
        const double r = x.norm();
        k0 = std::max(k0, f(x).norm() / std::pow(1.0 + r, probe.e0(kappa)));
        k1 = std::max(k1, f.gradient(x).frobenius() / std::pow(1.0 + r, probe.e1(kappa)));
        k2 = std::max(k2, f.hessian(x).frobenius() / std::pow(1.0 + r, probe.e2(kappa)));
    }
    GrowthConstants c = probe;
    // Slack never pushes K0 past U when the field itself stays below U.
    c.K0 = std::max(std::min(k0 * slack, std::max(k0, U)), 1e-12);
    c.beta = c.K0 > U ? 2.0 * (std::log(c.K0) / std::log(U) - 1.0) : 0.0;
    if (U == 1.0 && c.K0 > 1.0)
        throw ValidationError("fit_growth_constants: |u_0| exceeds (1+|x|)^{alpha/2+1/kappa} with U = 1");
    c.K1 = std::max({k1 * slack, U, c.K0 * c.K0});
    c.K2 = std::max(k2 * slack, std::pow(c.K1, 1.5));
    return c;
}

// ---------------------------------------------------------------------------
// Penalty F_n and time windows

/// Quintic smoothstep on [1, 2]: 0 below 1, 1 above 2, C^2 at both ends.
inline double smoothstep_chi(double z) {
    if (z <= 1.0) return 0.0;
    if (z >= 2.0) return 1.0;
    const double p = z - 1.0;
    return p * p * p * (10.0 + p * (-15.0 + 6.0 * p));
}

inline double smoothstep_chi_prime(double z) {
    if (z <= 1.0 || z >= 2.0) return 0.0;
    const double p = z - 1.0;
    return 30.0 * p * p * (1.0 - p) * (1.0 - p);
}

struct PenaltySpec {
    int n = 0;
    double C = 2.0;
    double K1 = 1.0;
    double alpha = 0.0;
    double kappa = 2.0;

    void validate() const {
        if (n < 0) throw ParameterError("PenaltySpec: n must be >= 0");
        if (!(C > 1.0)) throw ParameterError("PenaltySpec: C must be > 1");
        if (!(K1 > 0.0)) throw ParameterError("PenaltySpec: K1 must be > 0");
        if (!(kappa > 1.0)) throw ParameterError("PenaltySpec: kappa must be > 1");
        if (!(alpha >= 0.0)) throw ParameterError("PenaltySpec: alpha must be >= 0");
    }
    double exponent() const { return alpha / 2.0 + 1.0 / kappa; }
    double radius() const { return std::ldexp(1.0, n); }
};

struct PenaltyValue {
    double value = 0.0;
    Vec gradient;
};

/// F_n(x) = 2 C^2 K1 (2(1+|x|^2))^{alpha/2+1/kappa} chi(2^{-n} |x|).
inline PenaltyValue penalty_eval(const PenaltySpec& s, const Vec& x) {
    s.validate();
    PenaltyValue out;
    out.gradient = Vec(x.dim);
    const double r = x.norm();
    const double z = r / s.radius();
    if (z <= 1.0) return out;
    const double e = s.exponent();
    const double pre = 2.0 * s.C * s.C * s.K1;
    const double base = 2.0 * (1.0 + r * r);
    const double amp = pre * std::pow(base, e);
    const double chi = smoothstep_chi(z);
    out.value = amp * chi;
    // d/dr [amp] = pre * e * base^{e-1} * 4 r
    const double damp = pre * e * std::pow(base, e - 1.0) * 4.0 * r;
    const double dr = damp * chi + amp * smoothstep_chi_prime(z) / s.radius();
    for (int i = 0; i < x.dim; ++i) out.gradient[i] = dr * x[i] / r;
    return out;
}

inline double penalty_value(const PenaltySpec& s, double r) {
    if (r <= s.radius()) return 0.0;
    return 2.0 * s.C * s.C * s.K1 * std::pow(2.0 * (1.0 + r * r), s.exponent()) * smoothstep_chi(r / s.radius());
}

/// <x>_t = |x| + <Ut>^{kappa/(kappa-1)}.
inline double bracket_x(double r, double U, double t, double kappa) {
    return r + std::pow(bracket(U * t), kappa / (kappa - 1.0));
}

/// T_min(t, x) = (C^3 K1 <x>_t^{alpha+2/kappa})^{-1}.
inline double t_min(double C, const GrowthConstants& g, double kappa, double U, double t, double r) {
    return 1.0 / (C * C * C * g.K1 * std::pow(bracket_x(r, U, t, kappa), g.e1(kappa)));
}

/// Same with K2^{2/3} in place of K1.
inline double t_min_tilde(double C, const GrowthConstants& g, double kappa, double U, double t, double r) {
    return 1.0 / (C * C * C * std::pow(g.K2, 2.0 / 3.0) * std::pow(bracket_x(r, U, t, kappa), g.e1(kappa)));
}

/// T_n = (C^3 K1 2^{n(alpha + 2/kappa)})^{-1}.
inline double t_n(double C, const GrowthConstants& g, double kappa, int n) {
    return 1.0 / (C * C * C * g.K1 * std::pow(2.0, n * g.e1(kappa)));
}

}  // namespace fkb
