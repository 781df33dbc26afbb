#pragma once

// Reference solutions in d = 1. Viscous Burgers u_t + u u_x = eta u_xx has
// the Cole-Hopf form
//   u(t, x) = int u_0(y) w(y) dy / int w(y) dy,
//   w(y) = exp(-(x - y)^2 / (4 eta t) - Psi(y) / (2 eta)),  Psi(y) = int_0^y u_0.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "errors.hpp"
#include "grid_field.hpp"
#include "linalg.hpp"
#include "velocity.hpp"

namespace fkb {

using ScalarFn = std::function<double(double)>;

inline ScalarFn scalar_view(const VelocityField& u0) {
    if (u0.dim() != 1) throw ParameterError("oracle: one-dimensional field required");
    return [u0](double x) { return u0(x); };
}

struct OracleQuery {
    double t = 1.0;
    double x = 0.0;
    double eta = 1.0;
    double tolerance = 1e-10;

    void validate() const {
        if (!(t > 0.0)) throw ParameterError("oracle: t must be > 0");
        if (!(eta > 0.0)) throw ParameterError("oracle: eta must be > 0");
        if (!(tolerance > 0.0 && tolerance <= 1e-2)) throw ParameterError("oracle: tolerance must lie in (0, 1e-2]");
    }
};

namespace detail {

/// Psi(y) = int_0^y f from a table of panel sums on [lo, hi] (which contains
/// 0) plus a Gauss-Legendre remainder.
class PrimitiveTable {
public:
    PrimitiveTable(const ScalarFn& f, double lo, double hi, double width) : f_(f) {
        lo_ = std::min(lo, 0.0);
        hi = std::max(hi, 0.0);
        n_ = std::max(1, static_cast<int>(std::ceil((hi - lo_) / width)));
        h_ = (hi - lo_) / n_;
        cum_.assign(static_cast<std::size_t>(n_) + 1, 0.0);
        for (int i = 0; i < n_; ++i) cum_[i + 1] = cum_[i] + panel(lo_ + i * h_, lo_ + (i + 1) * h_);
        const double at0 = value_from_table(0.0);
        for (double& c : cum_) c -= at0;
    }

    double operator()(double y) const { return value_from_table(y); }

private:
    double panel(double a, double b) const {
        return boost::math::quadrature::gauss<double, 10>::integrate(f_, a, b);
    }
    double value_from_table(double y) const {
        int i = static_cast<int>(std::floor((y - lo_) / h_));
        i = std::clamp(i, 0, n_);
        const double yi = lo_ + i * h_;
        return cum_[i] + panel(yi, y);
    }

    ScalarFn f_;
    double lo_ = 0.0, h_ = 1.0;
    int n_ = 1;
    std::vector<double> cum_;
};

}  // namespace detail

/// Cole-Hopf value at (t, x).
inline double cole_hopf_1d(const ScalarFn& u0, const OracleQuery& q) {
    q.validate();
    const double sd = std::sqrt(2.0 * q.eta * q.t);
    // The weight concentrates near the foot of the characteristic through x.
    double reach = std::abs(u0(q.x)) + 1.0;
    double W = 0.0;
    for (int it = 0; it < 3; ++it) {
        W = 14.0 * sd + 1.5 * q.t * reach;
        double m = 0.0;
        for (int k = 0; k <= 64; ++k) m = std::max(m, std::abs(u0(q.x - W + 2.0 * W * k / 64.0)));
        reach = std::max(reach, m);
    }
    const double lo = q.x - W, hi = q.x + W;
    const detail::PrimitiveTable psi(u0, lo, hi, std::min(0.25, sd));
    auto logw = [&](double y) { return -(q.x - y) * (q.x - y) / (4.0 * q.eta * q.t) - psi(y) / (2.0 * q.eta); };
    // Peak and support of the weight on a scan.
    constexpr int scan = 2048;
    std::vector<double> g(scan + 1);
    double gmax = -std::numeric_limits<double>::infinity();
    for (int k = 0; k <= scan; ++k) {
        g[k] = logw(lo + (hi - lo) * k / scan);
        gmax = std::max(gmax, g[k]);
    }
    const double cut = gmax + std::log(q.tolerance) - 20.0;
    int a = 0, b = scan;
    while (a < scan && g[a] < cut) ++a;
    while (b > 0 && g[b] < cut) --b;
    const double ya = lo + (hi - lo) * std::max(0, a - 1) / scan;
    const double yb = lo + (hi - lo) * std::min(scan, b + 1) / scan;
    auto w = [&](double y) { return std::exp(logw(y) - gmax); };
    using GK = boost::math::quadrature::gauss_kronrod<double, 31>;
    double err_num = 0.0, err_den = 0.0, l1_num = 0.0, l1_den = 0.0;
    const double den = GK::integrate(w, ya, yb, 15, q.tolerance * 1e-2, &err_den, &l1_den);
    const double num =
        GK::integrate([&](double y) { return u0(y) * w(y); }, ya, yb, 15, q.tolerance * 1e-2, &err_num, &l1_num);
    // Errors relative to the L1 norms of the integrands.
    const double achieved = std::max(l1_den > 0.0 ? err_den / l1_den : 1.0, l1_num > 0.0 ? err_num / l1_num : 0.0);
    if (!(den > 0.0) || !(achieved <= q.tolerance) || !std::isfinite(num))
        throw OracleError("cole_hopf_1d: quadrature did not converge at x = " + std::to_string(q.x) +
                              ", t = " + std::to_string(q.t),
                          achieved);
    return num / den;
}

inline double cole_hopf_1d(const VelocityField& u0, const OracleQuery& q) { return cole_hopf_1d(scalar_view(u0), q); }

/// Cole-Hopf values at the nodes of a 1D grid.
inline std::vector<double> cole_hopf_curve(const ScalarFn& u0, double t, const std::vector<double>& xs,
                                           double eta = 1.0, double tolerance = 1e-10) {
    std::vector<double> out(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) out[i] = cole_hopf_1d(u0, OracleQuery{t, xs[i], eta, tolerance});
    return out;
}

struct FdSolution {
    std::vector<double> x;
    std::vector<double> u;
    double t = 0.0;
    int steps = 0;
};

/// Explicit central convection of u^2/2, implicit (backward Euler) diffusion,
/// boundary values pinned to Cole-Hopf. dt defaults to the largest step
/// allowed by the explicit diffusion bound with safety 0.4.
inline FdSolution reference_fd_1d(const ScalarFn& u0, double L, double dx, double t, double eta = 1.0,
                                  double dt = 0.0) {
    if (!(L > 0.0 && dx > 0.0 && t >= 0.0 && eta > 0.0)) throw ParameterError("reference_fd_1d: bad box or time");
    const double cfl = 0.4 * dx * dx / (2.0 * eta);
    if (dt <= 0.0) dt = cfl;
    if (dt > cfl * (1.0 + 1e-12))
        throw ParameterError("reference_fd_1d: dt = " + std::to_string(dt) + " violates dt <= 0.4 dx^2 / (2 eta)");
    const int n = static_cast<int>(std::lround(2.0 * L / dx)) + 1;
    const double h = 2.0 * L / (n - 1);
    FdSolution s;
    s.t = t;
    s.x.resize(n);
    s.u.resize(n);
    for (int i = 0; i < n; ++i) {
        s.x[i] = -L + i * h;
        s.u[i] = u0(s.x[i]);
    }
    if (t == 0.0) return s;
    const int steps = std::max(1, static_cast<int>(std::ceil(t / dt)));
    dt = t / steps;
    s.steps = steps;
    double umax = 0.0;
    for (double v : s.u) umax = std::max(umax, std::abs(v));
    if (dt * umax > h) throw ParameterError("reference_fd_1d: convective CFL violated");

    // Boundary values on a coarse time table, linear in between.
    const int nb = std::min(steps, 512);
    std::vector<double> tb(nb + 1), left(nb + 1), right(nb + 1);
    for (int k = 0; k <= nb; ++k) {
        tb[k] = t * k / nb;
        left[k] = k == 0 ? s.u.front() : cole_hopf_1d(u0, OracleQuery{tb[k], -L, eta, 1e-10});
        right[k] = k == 0 ? s.u.back() : cole_hopf_1d(u0, OracleQuery{tb[k], L, eta, 1e-10});
    }
    auto boundary = [&](const std::vector<double>& v, double tau) {
        const double pos = tau / t * nb;
        const int k = std::min(nb - 1, static_cast<int>(pos));
        const double f = pos - k;
        return v[k] + f * (v[k + 1] - v[k]);
    };

    const double r = eta * dt / (h * h);
    std::vector<double> rhs(n), cp(n), dp(n);
    for (int step = 1; step <= steps; ++step) {
        const double tau = step * dt;
        for (int i = 1; i < n - 1; ++i) {
            const double flux = (s.u[i + 1] * s.u[i + 1] - s.u[i - 1] * s.u[i - 1]) / (4.0 * h);
            rhs[i] = s.u[i] - dt * flux;
        }
        rhs[0] = boundary(left, tau);
        rhs[n - 1] = boundary(right, tau);
        // Thomas sweep for (1 + 2r) u_i - r u_{i-1} - r u_{i+1} = rhs_i.
        cp[0] = 0.0;
        dp[0] = rhs[0];
        for (int i = 1; i < n - 1; ++i) {
            const double m = (1.0 + 2.0 * r) + r * cp[i - 1];
            cp[i] = -r / m;
            dp[i] = (rhs[i] + r * dp[i - 1]) / m;
        }
        s.u[n - 1] = rhs[n - 1];
        for (int i = n - 2; i >= 1; --i) s.u[i] = dp[i] - cp[i] * s.u[i + 1];
        s.u[0] = rhs[0];
    }
    return s;
}

enum class CompareNorm { Sup, L2 };

struct Comparison {
    double value = 0.0;
    Vec worst;
    double worst_reference = 0.0;
    double worst_candidate = 0.0;
    double worst_se = 0.0;
    std::size_t count = 0;
};

/// Error of slice j of a candidate field against reference values given at
/// its nodes (first component). Relative mode divides pointwise by
/// |reference|.
template <class Region>
Comparison compare(const std::vector<double>& reference, const GridField& candidate, std::size_t j, Region in_region,
                   CompareNorm norm = CompareNorm::Sup, bool relative = false) {
    if (reference.size() != candidate.nodes()) throw ParameterError("compare: reference size differs from the grid");
    Comparison c;
    double ss = 0.0, worst = -1.0;
    for (std::size_t n = 0; n < candidate.nodes(); ++n) {
        const Vec x = candidate.grid().node(n);
        if (!in_region(x, reference[n])) continue;
        ++c.count;
        double e = std::abs(candidate.at(j, n, 0) - reference[n]);
        if (relative) e /= std::abs(reference[n]);
        ss += e * e;
        if (e > worst) {
            worst = e;
            c.worst = x;
            c.worst_reference = reference[n];
            c.worst_candidate = candidate.at(j, n, 0);
            c.worst_se = candidate.se(j, n, 0);
        }
    }
    if (c.count == 0) throw ParameterError("compare: empty region");
    c.value = norm == CompareNorm::Sup ? worst : std::sqrt(ss / c.count);
    return c;
}

/// Same comparison on plain arrays.
inline Comparison compare_values(const std::vector<double>& reference, const std::vector<double>& candidate,
                                 const std::vector<double>& xs, const std::vector<double>& se, bool relative) {
    if (reference.size() != candidate.size() || xs.size() != candidate.size())
        throw ParameterError("compare_values: size mismatch");
    if (reference.empty()) throw ParameterError("compare: empty region");
    Comparison c;
    double worst = -1.0;
    for (std::size_t i = 0; i < reference.size(); ++i) {
        double e = std::abs(candidate[i] - reference[i]);
        if (relative) e /= std::abs(reference[i]);
        ++c.count;
        if (e > worst) {
            worst = e;
            c.worst = Vec{xs[i]};
            c.worst_reference = reference[i];
            c.worst_candidate = candidate[i];
            c.worst_se = se.empty() ? 0.0 : se[i];
        }
    }
    c.value = worst;
    return c;
}

inline void write_oracle_csv(std::ostream& os, const std::vector<double>& xs, const std::vector<double>& ts,
                             const std::vector<std::vector<double>>& values) {
    os << "x";
    for (double t : ts) os << ",t=" << t;
    os << '\n';
    os.precision(17);
    for (std::size_t i = 0; i < xs.size(); ++i) {
        os << xs[i];
        for (const auto& col : values) os << ',' << col[i];
        os << '\n';
    }
}

}  // namespace fkb
