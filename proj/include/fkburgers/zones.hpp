#pragma once

// Safe and dangerous annuli. Radii R_1 <= R_2 <= ... are stored 0-based, so
// R_n is radii[n - 1]. Dangerous zone A_i = (R_{2i-1}, R_{2i}), safe zone i is
// [R_{2i}, R_{2i+1}].

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "errors.hpp"
#include "linalg.hpp"
#include "path_record.hpp"

namespace fkb {

struct ZoneLayout {
    std::vector<double> radii;
    double kappa = 2.0;
    /// Thinness factor: R_{2i} - R_{2i-1} <= thin_C * R_{2i-1}^{1/kappa}.
    double thin_C = 1.0;
    /// Fatness: R_{2i+1} >= (1 + fat_eps) R_{2i}.
    double fat_eps = 3.0;

    double R(std::size_t n) const { return radii.at(n - 1); }
    std::size_t dangerous_count() const { return radii.size() / 2; }
    /// Number of safe zones i >= 1 whose outer radius is stored.
    std::size_t safe_count() const { return radii.empty() ? 0 : (radii.size() - 1) / 2; }

    friend bool operator==(const ZoneLayout&, const ZoneLayout&) = default;
};

struct LayoutReport {
    bool pass = true;
    /// Human-readable description of the first failed rule, empty on pass.
    std::string first_violation;
    /// 1-based radius indices of the offending pair.
    std::size_t lower_index = 0;
    std::size_t upper_index = 0;
};

inline LayoutReport validate_layout(const ZoneLayout& L) {
    if (L.radii.size() < 2)
        throw ValidationError("degenerate layout: at least two radii are required");
    if (!(L.kappa > 1.0)) throw ParameterError("layout kappa must be > 1");
    for (double r : L.radii)
        if (!std::isfinite(r)) throw ParameterError("layout radii must be finite");
    LayoutReport rep;
    auto fail = [&rep](std::string msg, std::size_t a, std::size_t b) {
        rep.pass = false;
        rep.first_violation = std::move(msg);
        rep.lower_index = a;
        rep.upper_index = b;
        return rep;
    };
    auto fmt = [](double v) {
        std::string s = std::to_string(v);
        s.erase(s.find_last_not_of('0') + 1);
        if (!s.empty() && s.back() == '.') s.pop_back();
        return s;
    };
    if (L.R(1) < 1.0) return fail("R_1 = " + fmt(L.R(1)) + " < 1", 1, 1);
    const std::size_t n = L.radii.size();
    for (std::size_t k = 2; k <= n; ++k) {
        const double lo = L.R(k - 1), hi = L.R(k);
        if (hi < lo)
            return fail("radii decrease: R_" + std::to_string(k - 1) + " = " + fmt(lo) + " > R_" +
                            std::to_string(k) + " = " + fmt(hi),
                        k - 1, k);
        if (k % 2 == 0) {
            const double cap = L.thin_C * std::pow(lo, 1.0 / L.kappa);
            if (hi - lo > cap * (1.0 + 1e-12))
                return fail("dangerous zone " + std::to_string(k / 2) + " too thick: R_" +
                                std::to_string(k) + " - R_" + std::to_string(k - 1) + " = " +
                                fmt(hi - lo) + " > " + fmt(cap),
                            k - 1, k);
        } else {
            const double need = (1.0 + L.fat_eps) * lo;
            if (hi < need * (1.0 - 1e-12))
                return fail("safe zone " + std::to_string(k / 2) + " too thin: R_" +
                                std::to_string(k) + " = " + fmt(hi) + " < " + fmt(need),
                            k - 1, k);
        }
    }
    return rep;
}

/// Splits every safe zone with R_{2i+1} >= 16 R_{2i} by inserting the empty
/// dangerous zone (4 R_{2i}, 4 R_{2i}), repeatedly.
inline ZoneLayout subdivide(const ZoneLayout& L) {
    ZoneLayout out = L;
    out.radii.clear();
    const std::size_t n = L.radii.size();
    for (std::size_t k = 1; k <= n; ++k) {
        out.radii.push_back(L.R(k));
        if (k % 2 == 0 && k + 1 <= n) {
            double lower = L.R(k);
            const double upper = L.R(k + 1);
            while (upper >= 16.0 * lower) {
                lower *= 4.0;
                out.radii.push_back(lower);
                out.radii.push_back(lower);
            }
        }
    }
    return out;
}

struct SafeInterval {
    std::size_t i = 0;
    double lower = 0.0;
    double upper = 0.0;
    bool viscous = false;

    bool empty() const { return lower > upper; }
    bool contains(double r) const { return !empty() && r >= lower && r <= upper; }
};

/// I_i(t). Non-viscous margins 4(C-1) U t R^{1/kappa}; viscous margins
/// 2(C-1)(<Ut> + Ut) R^{1/kappa}.
inline SafeInterval safe_interval(const ZoneLayout& L, std::size_t i, double t, double U, double C,
                                  bool viscous) {
    if (i < 1 || i > L.safe_count())
        throw ParameterError("safe_interval: zone index " + std::to_string(i) + " out of range [1, " +
                             std::to_string(L.safe_count()) + "]");
    if (t < 0.0) throw DomainError("safe_interval: t must be >= 0");
    const double lo = L.R(2 * i), hi = L.R(2 * i + 1);
    const double ut = U * t;
    const double factor = viscous ? 2.0 * (C - 1.0) * (bracket(ut) + ut) : 4.0 * (C - 1.0) * ut;
    SafeInterval I;
    I.i = i;
    I.viscous = viscous;
    I.lower = lo + factor * std::pow(lo, 1.0 / L.kappa);
    I.upper = hi - factor * std::pow(hi, 1.0 / L.kappa);
    return I;
}

enum class LocationKind { Core, Safe, Dangerous, Beyond };

struct Location {
    LocationKind kind = LocationKind::Core;
    /// Zone index; Safe(0) is the ball inside R_1.
    std::size_t i = 0;
    friend bool operator==(const Location&, const Location&) = default;
};

/// factor * (16 C <Ut>)^{kappa/(kappa-1)}.
inline double core_threshold(double kappa, double C, double U, double t, double factor = 32.0) {
    return factor * std::pow(16.0 * C * bracket(U * t), kappa / (kappa - 1.0));
}

inline Location locate(const ZoneLayout& L, double r, double threshold) {
    if (r < 0.0) throw DomainError("locate: radius must be >= 0");
    if (r <= threshold) return {LocationKind::Core, 0};
    const std::size_t n = L.radii.size();
    if (n == 0 || r < L.R(1)) return {LocationKind::Safe, 0};
    for (std::size_t k = 1; k < n; ++k) {
        const double lo = L.R(k), hi = L.R(k + 1);
        if (k % 2 == 1 && r > lo && r < hi) return {LocationKind::Dangerous, (k + 1) / 2};
        if (k % 2 == 0 && r >= lo && r <= hi) return {LocationKind::Safe, k / 2};
    }
    // Boundary radii of dangerous zones belong to the neighbouring safe zones.
    for (std::size_t k = 1; k <= n; ++k)
        if (r == L.R(k)) return {LocationKind::Safe, k / 2};
    return {LocationKind::Beyond, n / 2};
}

struct StabilityResult {
    std::size_t violations = 0;
    std::size_t samples = 0;
    /// Smallest signed distance to the moving interval over all samples
    /// (negative when a violation occurred).
    double min_margin = INFINITY;
};

/// Counts samples s with |X(s)| outside I_i(t - s).
inline StabilityResult stability_violations(const ZoneLayout& L, const PathRecord& path, std::size_t i,
                                            double t, double U, double C, bool viscous) {
    const SafeInterval start = safe_interval(L, i, t, U, C, viscous);
    if (!start.contains(path.x.norm()))
        throw PreconditionError("stability_violations: start radius " +
                                std::to_string(path.x.norm()) + " outside I_" + std::to_string(i) +
                                "(t) = [" + std::to_string(start.lower) + ", " +
                                std::to_string(start.upper) + "]");
    StabilityResult res;
    for (std::size_t k = 0; k < path.size(); ++k) {
        const double s = path.times[k];
        const SafeInterval I = safe_interval(L, i, std::max(0.0, t - s), U, C, viscous);
        const double r = path.X(k).norm();
        const double margin = std::min(r - I.lower, I.upper - r);
        res.min_margin = std::min(res.min_margin, margin);
        ++res.samples;
        if (!I.contains(r)) ++res.violations;
    }
    return res;
}

}  // namespace fkb
