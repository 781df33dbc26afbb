#pragma once

// Characteristic integrators. Deterministic: dy/ds = v(t - s, y), classical
// RK4. Stochastic (noise removed): dY/ds = sign * u(t - s, Y + B_s), Heun's
// predictor-corrector with the noise sampled at step ends.

#include <cmath>
#include <functional>
#include <optional>
#include <string>

#include "brownian.hpp"
#include "constants.hpp"
#include "errors.hpp"
#include "grid_field.hpp"
#include "linalg.hpp"
#include "path_record.hpp"
#include "scalar_flows.hpp"

namespace fkb {

using DriftFn = std::function<Vec(double tau, const Vec& y)>;

struct DeterministicOptions {
    /// |y| above this raises DivergenceError.
    double blowup_radius = INFINITY;
    /// Step mesh s_k = t (k/n)^grading; 1 is uniform.
    double grading = 1.0;
    /// Optional tag computed from the comparison flow.
    std::optional<FlowParams> flow;
};

inline PathRecord integrate_deterministic(const DriftFn& v, double t, const Vec& x, int steps,
                                          const DeterministicOptions& opt = {}) {
    if (steps < 1) throw ParameterError("integrate_deterministic: steps must be >= 1");
    if (!(t >= 0.0)) throw ParameterError("integrate_deterministic: t must be >= 0");
    if (!(opt.grading >= 1.0)) throw ParameterError("integrate_deterministic: grading must be >= 1");
    PathRecord rec;
    rec.t = t;
    rec.x = x;
    rec.times.reserve(static_cast<std::size_t>(steps) + 1);
    rec.Y.reserve(static_cast<std::size_t>(steps) + 1);
    rec.times.push_back(0.0);
    rec.Y.push_back(x);
    Vec y = x;
    auto mesh = [&](int k) { return t * std::pow(static_cast<double>(k) / steps, opt.grading); };
    for (int k = 0; k < steps; ++k) {
        const double s = mesh(k), s1 = mesh(k + 1), h = s1 - s;
        const Vec k1 = v(t - s, y);
        const Vec k2 = v(t - s - h / 2, y + k1 * (h / 2));
        const Vec k3 = v(t - s - h / 2, y + k2 * (h / 2));
        const Vec k4 = v(t - s1, y + k3 * h);
        y += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        const double r = y.norm();
        if (!(r <= opt.blowup_radius))
            throw DivergenceError("deterministic characteristic escaped at s = " + std::to_string(s1), s1);
        rec.times.push_back(s1);
        rec.Y.push_back(y);
    }
    rec.finalize(opt.flow);
    if (!opt.flow) rec.regime = Regime::NormalConvective;
    return rec;
}

/// Drift source v(tau, y) = sign * field(tau, y).
inline DriftFn grid_drift(const GridField& field, double sign = 1.0) {
    return [&field, sign](double tau, const Vec& y) { return field.value(tau, y) * sign; };
}

struct StochasticOptions {
    /// dY/ds = drift_sign * u(t - s, Y + B).
    double drift_sign = 1.0;
    double blowup_radius = INFINITY;
    /// Flow used for the regime tag; defaults to kappa = 2, U = 1.
    FlowParams flow{2.0, 1.0, 0.0};
};

/// Noise-decomposed characteristic. The Brownian path must cover [0, t]; its
/// step count sets the integration mesh.
inline PathRecord integrate_stochastic(const GridField& drift_field, double t, const Vec& x,
                                       const BrownianPath& noise, const StochasticOptions& opt = {}) {
    if (noise.t < t * (1.0 - 1e-12))
        throw ParameterError("integrate_stochastic: noise horizon shorter than t");
    if (noise.dim != x.dim) throw ParameterError("integrate_stochastic: noise dimension mismatch");
    // Sample indices of the noise path covering [0, t].
    const int steps = std::max(1, static_cast<int>(std::lround(t / noise.step())));
    const double h = t / steps;
    PathRecord rec;
    rec.t = t;
    rec.x = x;
    rec.times.reserve(static_cast<std::size_t>(steps) + 1);
    Vec y = x;
    rec.times.push_back(0.0);
    rec.Y.push_back(y);
    rec.B.push_back(noise.at(0));
    const double sgn = opt.drift_sign;
    for (int k = 0; k < steps; ++k) {
        const double s = k * h;
        const Vec b0 = noise.at(k), b1 = noise.at(k + 1);
        const Vec f0 = drift_field.value(t - s, y + b0) * sgn;
        const Vec yp = y + f0 * h;
        const Vec f1 = drift_field.value(t - s - h, yp + b1) * sgn;
        y += (f0 + f1) * (h / 2.0);
        if (!((y + b1).norm() <= opt.blowup_radius))
            throw DivergenceError("stochastic characteristic escaped at s = " + std::to_string(s + h), s + h);
        rec.times.push_back(s + h);
        rec.Y.push_back(y);
        rec.B.push_back(b1);
    }
    rec.finalize(opt.flow);
    return rec;
}

struct DisplacementCheck {
    bool normal_ok = true;
    bool abnormal_ok = true;
    /// max_displacement / ((C_kappa - 1) <Ut> max(<Ut>^{kappa/(kappa-1)}, |x|)^{1/kappa}).
    double normal_ratio = 0.0;
    /// max_displacement / (C_abn (M_t sqrt t)^{kappa'}).
    double abnormal_ratio = 0.0;
};

/// <Ut> max(<Ut>^{kappa/(kappa-1)}, |x|)^{1/kappa}: the normal-regime envelope
/// without its constant.
inline double normal_envelope(const FlowParams& p, double t, double r) {
    const double ut = bracket(p.U * t);
    return ut * std::pow(std::max(std::pow(ut, p.growth_exponent()), r), 1.0 / p.kappa);
}

inline DisplacementCheck check_displacement(const PathRecord& rec, const FlowParams& p,
                                            const BoundConstants& k) {
    DisplacementCheck out;
    const double env = (k.C_kappa - 1.0) * normal_envelope(p, rec.t, rec.x.norm());
    out.normal_ratio = env > 0.0 ? rec.max_displacement / env : 0.0;
    const double abn = k.C_abn * std::pow(rec.m_t * std::sqrt(rec.t), k.kappa_prime);
    out.abnormal_ratio = abn > 0.0 ? rec.max_displacement / abn : 0.0;
    out.normal_ok = out.normal_ratio <= 1.0;
    out.abnormal_ok = out.abnormal_ratio <= 1.0;
    return out;
}

}  // namespace fkb
