#pragma once

// Closed-form comparison flows for dx/dt = U (x_min + |x|)^{1/kappa}, their
// displacement envelopes, and the cut-off recursion of the non-viscous scheme.

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "errors.hpp"
#include "linalg.hpp"

namespace fkb {

struct FlowParams {
    double kappa = 2.0;
    double U = 1.0;
    double x_min = 0.0;

    /// (kappa - 1) / kappa
    double a() const { return (kappa - 1.0) / kappa; }
    /// kappa / (kappa - 1), the long-time growth exponent.
    double growth_exponent() const { return kappa / (kappa - 1.0); }

    void validate() const {
        if (!(kappa > 1.0) || !std::isfinite(kappa))
            throw ParameterError("FlowParams: kappa must be > 1, got " + std::to_string(kappa));
        if (!(U >= 1.0) || !std::isfinite(U))
            throw ParameterError("FlowParams: U must be >= 1, got " + std::to_string(U));
        if (!(x_min >= 0.0) || !std::isfinite(x_min))
            throw ParameterError("FlowParams: x_min must be finite and >= 0, got " +
                                 std::to_string(x_min));
    }
};

enum class Regime { LongTime, ShortTime, LargeCutoff, NormalConvective, AbnormalDiffusive };

inline std::string_view to_string(Regime r) {
    switch (r) {
        case Regime::LongTime: return "long_time";
        case Regime::ShortTime: return "short_time";
        case Regime::LargeCutoff: return "large_cutoff";
        case Regime::NormalConvective: return "normal";
        case Regime::AbnormalDiffusive: return "abnormal";
    }
    return "unknown";
}

namespace detail {

inline double checked(double value, std::string_view what) {
    if (!std::isfinite(value))
        throw RangeError(std::string(what) + ": result overflows double precision", value);
    return value;
}

// Forward flow of a point with x >= 0, t >= 0.
inline double flow_nonnegative(const FlowParams& p, double t, double x) {
    const double a = p.a();
    const double z = safe_pow(x + p.x_min, a) + a * p.U * t;
    return safe_pow(z, 1.0 / a) - p.x_min;
}

}  // namespace detail

/// Time needed by the flow started at x <= 0 to reach the origin.
inline double crossing_time(const FlowParams& p, double x) {
    p.validate();
    if (x > 0.0) throw DomainError("crossing_time: x must be <= 0, got " + std::to_string(x));
    const double a = p.a();
    const double base = p.x_min > 0.0 ? std::pow(p.x_min, a) : 0.0;
    const double far = (p.x_min - x) > 0.0 ? std::pow(p.x_min - x, a) : 0.0;
    return std::max(0.0, (far - base) / (a * p.U));
}

/// Phi_{kappa,U,x_min}(t, x). Negative positions first travel to the origin;
/// negative times use Phi(-t, -x) = -Phi(t, x).
inline double phi_flow(const FlowParams& p, double t, double x) {
    p.validate();
    if (!std::isfinite(t) || !std::isfinite(x))
        throw ParameterError("phi_flow: t and x must be finite");
    if (t < 0.0) return -phi_flow(p, -t, -x);
    if (t == 0.0) return x;
    double result;
    if (x >= 0.0) {
        result = detail::flow_nonnegative(p, t, x);
    } else {
        const double T = crossing_time(p, x);
        if (t >= T) {
            result = detail::flow_nonnegative(p, t - T, 0.0);
        } else {
            const double a = p.a();
            const double z = safe_pow(p.x_min - x, a) - a * p.U * t;
            result = -(safe_pow(z, 1.0 / a) - p.x_min);
            result = std::min(result, 0.0);
        }
    }
    return detail::checked(result, "phi_flow");
}

/// Constant-free envelope max((Ut)^{kappa/(kappa-1)}, U t |x|^{1/kappa}).
inline double displacement_envelope(const FlowParams& p, double t, double x) {
    p.validate();
    if (t < 0.0) throw DomainError("displacement_envelope: t must be >= 0");
    const double ut = p.U * t;
    const double long_time = safe_pow(ut, p.growth_exponent());
    const double short_time = ut * safe_pow(std::abs(x), 1.0 / p.kappa);
    if (ut == 0.0) return 0.0;
    return detail::checked(std::max(long_time, short_time), "displacement_envelope");
}

/// Same envelope with <Ut> and <x> brackets.
inline double displacement_envelope_bracketed(const FlowParams& p, double t, double x) {
    p.validate();
    if (t < 0.0) throw DomainError("displacement_envelope: t must be >= 0");
    const double ut = bracket(p.U * t);
    return std::max(std::pow(ut, p.growth_exponent()),
                    ut * std::pow(bracket(std::abs(x)), 1.0 / p.kappa));
}

/// Normal/abnormal threshold max(<Ut>^{kappa/(kappa-1)}, <Ut> <x>^{1/kappa}).
inline double regime_threshold(const FlowParams& p, double t, double x) {
    return displacement_envelope_bracketed(p, t, x);
}

/// Without noise: LargeCutoff takes precedence, then LongTime / ShortTime.
/// With a noise magnitude M_t sqrt(t): NormalConvective / AbnormalDiffusive.
inline Regime classify_regime(const FlowParams& p, double t, double x,
                              std::optional<double> mt_sqrt_t = std::nullopt) {
    p.validate();
    if (t < 0.0) throw DomainError("classify_regime: t must be >= 0");
    const double ax = std::abs(x);
    if (mt_sqrt_t) {
        if (*mt_sqrt_t < 0.0) throw DomainError("classify_regime: noise magnitude must be >= 0");
        return *mt_sqrt_t > regime_threshold(p, t, ax) ? Regime::AbnormalDiffusive
                                                        : Regime::NormalConvective;
    }
    const double scale = safe_pow(p.U * t, p.growth_exponent());
    if (p.x_min > scale) return Regime::LargeCutoff;
    return ax <= scale ? Regime::LongTime : Regime::ShortTime;
}

/// x_min^(0..m_max) for the iterated cut-offs of the non-viscous scheme.
inline std::vector<double> cutoff_recursion(double C, const FlowParams& p, double t, int m_max) {
    p.validate();
    if (!(C > 1.0)) throw ParameterError("cutoff_recursion: C must be > 1");
    if (!(t > 0.0)) throw ParameterError("cutoff_recursion: t must be > 0");
    if (m_max < 0) throw ParameterError("cutoff_recursion: m_max must be >= 0");
    std::vector<double> xs;
    xs.reserve(static_cast<std::size_t>(m_max) + 1);
    for (int m = 0; m <= m_max; ++m) {
        if (m <= 1) {
            xs.push_back(0.0);
        } else if (m == 2) {
            xs.push_back(C * std::pow(p.U * t, p.growth_exponent()));
        } else {
            xs.push_back(C * C * p.U * t * std::pow(xs.back(), 1.0 / p.kappa));
        }
    }
    return xs;
}

/// Smallest C >= 1 with C - 1 - C^alpha >= 0, bracketed by bisection. The upper
/// end of the final bracket is returned so the inequality holds exactly.
inline double alpha_constant(double alpha, double tol = 1e-12) {
    if (!(alpha > 0.0 && alpha < 1.0))
        throw DomainError("alpha must lie in (0, 1), got " + std::to_string(alpha));
    auto psi = [alpha](double c) { return c - 1.0 - std::pow(c, alpha); };
    double lo = 1.0;
    double hi = 2.0;
    while (psi(hi) < 0.0) {
        lo = hi;
        hi *= 2.0;
    }
    while (hi - lo > tol * hi) {
        const double mid = 0.5 * (lo + hi);
        (psi(mid) >= 0.0 ? hi : lo) = mid;
    }
    return hi;
}

/// Uniform bound max(A0, C_alpha max(c1, c2^{1/(1-alpha)})) on every iterate of
/// B_{n+1} = c1 + c2 B_n^alpha started at A0.
inline double fixed_point_bound(double c1, double c2, double alpha, double A0) {
    if (!(alpha > 0.0 && alpha < 1.0))
        throw DomainError("fixed_point_bound: alpha must lie in (0, 1), got " +
                          std::to_string(alpha));
    if (!(c1 > 0.0) || !(c2 > 0.0) || !(A0 > 0.0))
        throw DomainError("fixed_point_bound: c1, c2 and A0 must be > 0");
    const double c_alpha = alpha_constant(alpha);
    const double scale = std::max(c1, std::pow(c2, 1.0 / (1.0 - alpha)));
    return detail::checked(std::max(A0, c_alpha * scale), "fixed_point_bound");
}

/// Velocity of the comparison flow, U (x_min + |y|)^{1/kappa}, pointing in the
/// +x direction. Used as an autonomous scalar drift.
inline double comparison_velocity(const FlowParams& p, double y) {
    return p.U * safe_pow(p.x_min + std::abs(y), 1.0 / p.kappa);
}

}  // namespace fkb
