#pragma once

// Bound-verification checks. Every check returns a BoundReport; bound
// constants are fitted as sup-ratios over the samples.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "brownian.hpp"
#include "characteristics.hpp"
#include "constants.hpp"
#include "errors.hpp"
#include "grid_field.hpp"
#include "linalg.hpp"
#include "parallel.hpp"
#include "picard.hpp"
#include "scalar_flows.hpp"
#include "velocity.hpp"
#include "zones.hpp"

namespace fkb {

/// Pass thresholds. None is fixed by the theory; all are configuration.
struct Thresholds {
    /// Largest admissible violation fraction.
    double violation = 0.01;
    /// Largest admissible max/min ratio of a fitted constant over m.
    double stability = 2.0;
    /// Slack added to log(theta) for the decay slope.
    double slope_slack = 0.3;
    /// Region t <= theta T_min of the decay check.
    double theta = 0.5;
    /// Smallest R^2 of the tail regression.
    double r2_min = 0.95;
    /// Largest relative gap of E[M_t^4] between half-samples.
    double moment_split = 0.2;
    /// Smallest agreeing fraction in the gradient cross-check.
    double agreement = 0.95;

    void validate() const {
        if (!(violation >= 0.0 && violation <= 1.0)) throw ConfigError("checks.violation must lie in [0, 1]");
        if (!(stability >= 1.0)) throw ConfigError("checks.stability must be >= 1");
        if (!(theta > 0.0 && theta < 1.0)) throw ConfigError("checks.theta must lie in (0, 1)");
        if (!(r2_min >= 0.0 && r2_min <= 1.0)) throw ConfigError("checks.r2_min must lie in [0, 1]");
        if (!(moment_split > 0.0)) throw ConfigError("checks.moment_split must be > 0");
        if (!(agreement >= 0.0 && agreement <= 1.0)) throw ConfigError("checks.agreement must lie in [0, 1]");
    }
};

/// One regime or quantity inside a report.
struct SubReport {
    std::string name;
    std::size_t samples = 0;
    std::size_t violations = 0;
    double violation_fraction = 0.0;
    double fitted_constant = 0.0;
    /// "pass", "fail", "insufficient" or "info".
    std::string status = "pass";
};

struct BoundReport {
    std::string id;
    std::string anchor;
    std::size_t samples = 0;
    double violation_fraction = 0.0;
    double fitted_constant = 0.0;
    std::vector<SubReport> breakdown;
    /// Named scalar results in insertion order.
    std::vector<std::pair<std::string, double>> metrics;
    std::vector<std::string> notes;
    bool pass = false;
    /// "pass", "fail", "noise-dominated", "degenerate".
    std::string status = "fail";
    /// Kept out of the report files so reruns compare byte for byte.
    double wall_seconds = 0.0;

    void metric(std::string key, double value) { metrics.emplace_back(std::move(key), value); }

    double get(const std::string& key) const {
        for (const auto& [k, v] : metrics)
            if (k == key) return v;
        throw ParameterError("report " + id + " has no metric " + key);
    }

    const SubReport& sub(const std::string& name) const {
        for (const auto& s : breakdown)
            if (s.name == name) return s;
        throw ParameterError("report " + id + " has no sub-report " + name);
    }

    void finish(bool ok) {
        pass = ok;
        status = ok ? "pass" : "fail";
    }
};

struct WilsonInterval {
    double lower = 0.0;
    double upper = 1.0;
};

/// Wilson score interval of a binomial proportion k / n.
inline WilsonInterval wilson_interval(std::size_t k, std::size_t n, double z = 1.96) {
    if (n == 0) return {};
    const double nn = static_cast<double>(n);
    const double p = static_cast<double>(k) / nn;
    const double z2 = z * z;
    const double centre = (p + z2 / (2.0 * nn)) / (1.0 + z2 / nn);
    const double half = z / (1.0 + z2 / nn) * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn));
    return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
};

/// Ordinary least squares y = intercept + slope x.
inline LineFit least_squares(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw ParameterError("least_squares: need two or more points");
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0) throw ParameterError("least_squares: abscissae are all equal");
    LineFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    f.r2 = syy > 0.0 ? sxy * sxy / (sxx * syy) : 1.0;
    return f;
}

namespace detail {

class Stopwatch {
public:
    Stopwatch() : start_(std::chrono::steady_clock::now()) {}
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

inline SubReport make_sub(std::string name, std::size_t samples, std::size_t violations, double fitted) {
    SubReport s;
    s.name = std::move(name);
    s.samples = samples;
    s.violations = violations;
    s.violation_fraction = samples ? static_cast<double>(violations) / samples : 0.0;
    s.fitted_constant = fitted;
    s.status = samples ? "pass" : "insufficient";
    return s;
}

/// Deterministic unit directions; in d = 1 the sign alternates.
inline std::vector<Vec> directions(int d, std::size_t count, std::uint64_t seed) {
    std::vector<Vec> out;
    out.reserve(count);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    for (std::size_t i = 0; i < count; ++i) {
        Vec e(d);
        if (d == 1) {
            e[0] = i % 2 == 0 ? 1.0 : -1.0;
        } else {
            double n = 0.0;
            while (n == 0.0) {
                for (int k = 0; k < d; ++k) e[k] = normal(rng);
                n = e.norm();
            }
            e *= 1.0 / n;
        }
        out.push_back(e);
    }
    return out;
}

inline double max_over(const std::vector<double>& v) {
    return v.empty() ? 0.0 : *std::max_element(v.begin(), v.end());
}

inline double stability_ratio(const std::vector<double>& v) {
    if (v.empty()) return 1.0;
    const double hi = *std::max_element(v.begin(), v.end());
    const double lo = *std::min_element(v.begin(), v.end());
    if (hi == 0.0) return 1.0;
    return lo > 0.0 ? hi / lo : INFINITY;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Growth hypothesis

inline BoundReport verify_hyp1(const VelocityField& u0, std::size_t samples = 20000, double radius = 1e4) {
    detail::Stopwatch clock;
    BoundReport r;
    r.id = "hyp1";
    r.anchor = "sublinear growth |u_0(x)| <= U (1+|x|)^{1/kappa}";
    const SupReport s = check_hyp1(u0, samples, radius);
    r.samples = s.samples;
    r.fitted_constant = s.sup_ratio / u0.U();
    r.violation_fraction = s.pass ? 0.0 : 1.0 / static_cast<double>(s.samples);
    r.metric("U", u0.U());
    r.metric("sup_ratio", s.sup_ratio);
    r.finish(s.pass);
    r.wall_seconds = clock.seconds();
    return r;
}

// ---------------------------------------------------------------------------
// Displacement of stochastic characteristics

struct DisplacementSetup {
    /// Horizons, each in [1/U, T].
    std::vector<double> times{1.0, 2.0};
    std::vector<Vec> starts{Vec{0.0}, Vec{3.0}, Vec{-10.0}};
    /// Noise paths, shared by every (m, t, x).
    int paths = 10000;
    int steps = 100;
    std::uint64_t seed = 7;
    /// Abnormal envelope C_abn (M_t sqrt t)^{kappa'}; otherwise
    /// C_abn (M_t sqrt t / <Ut>)^kappa.
    bool abnormal_kappa_prime = true;
    int m_min = 1;
    /// Last m; -1 takes the last stored iterate + 1.
    int m_max = -1;
};

/// Per-m sup of |Y - x| / envelope in both regimes, violation fractions at the
/// configured constants, and the empirical abnormal-regime frequency.
inline BoundReport verify_displacement(const SchemeState& st, const DisplacementSetup& s, const BoundConstants& k,
                                       const Thresholds& th) {
    detail::Stopwatch clock;
    if (!st.cfg.viscous) throw PreconditionError("verify_displacement: viscous iterates required");
    const VelocityField& u0 = *st.u0;
    const FlowParams flow = u0.flow();
    const int m_hi = s.m_max < 0 ? static_cast<int>(st.iterates.size()) : s.m_max;
    if (m_hi < s.m_min || m_hi > static_cast<int>(st.iterates.size()))
        throw PreconditionError("verify_displacement: iterates up to m - 1 = " + std::to_string(m_hi - 1) +
                                " are required");
    const double T = st.cfg.horizon();
    for (double t : s.times)
        if (t < 1.0 / flow.U * (1.0 - 1e-12) || t > T * (1.0 + 1e-12))
            throw PreconditionError("verify_displacement: t = " + std::to_string(t) + " outside [1/U, T]");
    if (s.paths < 1 || s.steps < 1 || s.starts.empty())
        throw PreconditionError("verify_displacement: paths, steps and starts must be non-empty");

    const NoiseBank bank(s.seed, u0.dim(), s.paths, s.steps, false);
    const std::size_t per_m = s.times.size() * s.starts.size() * static_cast<std::size_t>(s.paths);
    // Per sample: normal ratio (or -1 when abnormal) and abnormal ratio.
    struct Sample {
        double normal = -1.0;
        double abnormal = -1.0;
    };

    BoundReport r;
    r.id = "displacement";
    r.anchor = "displacement of noise-translated characteristics, normal and abnormal regimes";
    std::vector<double> fitted;
    std::vector<std::vector<Sample>> all;
    std::size_t abnormal_total = 0, total = 0, abnormal_viol = 0, normal_viol = 0, normal_total = 0;
    double abn_fit = 0.0;
    for (int m = s.m_min; m <= m_hi; ++m) {
        const GridField& drift = st.iterate(m - 1);
        std::vector<Sample> samples(per_m);
        parallel_for(per_m, st.cfg.jobs, [&](std::size_t idx) {
            const std::size_t p = idx % s.paths;
            const std::size_t rest = idx / s.paths;
            const Vec& x = s.starts[rest % s.starts.size()];
            const double t = s.times[rest / s.starts.size()];
            StochasticOptions opt;
            opt.drift_sign = -1.0;
            opt.flow = flow;
            const PathRecord rec = integrate_stochastic(drift, t, x, bank.path(static_cast<int>(p), t), opt);
            Sample out;
            if (rec.regime == Regime::NormalConvective) {
                out.normal = rec.max_displacement / normal_envelope(flow, t, x.norm());
            } else {
                const double mst = rec.m_t * std::sqrt(t);
                const double env = s.abnormal_kappa_prime ? std::pow(mst, k.kappa_prime)
                                                          : std::pow(mst / bracket(flow.U * t), flow.kappa);
                out.abnormal = rec.max_displacement / env;
            }
            samples[idx] = out;
        });
        double fit = 0.0;
        std::size_t nn = 0, nv = 0, an = 0, av = 0;
        for (const Sample& q : samples) {
            if (q.normal >= 0.0) {
                ++nn;
                fit = std::max(fit, q.normal);
                if (q.normal > k.C_kappa - 1.0) ++nv;
            } else {
                ++an;
                abn_fit = std::max(abn_fit, q.abnormal);
                if (q.abnormal > k.C_abn) ++av;
            }
        }
        fitted.push_back(nn ? 1.0 + fit : 0.0);
        r.breakdown.push_back(detail::make_sub("normal_m" + std::to_string(m), nn, nv, nn ? 1.0 + fit : 0.0));
        normal_total += nn;
        normal_viol += nv;
        abnormal_total += an;
        abnormal_viol += av;
        total += samples.size();
        all.push_back(std::move(samples));
    }

    // Violations of every m at the constant fitted for the first m.
    const double first_fit = fitted.front();
    std::size_t at_first = 0;
    for (const auto& samples : all)
        for (const Sample& q : samples)
            if (q.normal >= 0.0 && q.normal > first_fit - 1.0) ++at_first;

    SubReport normal = detail::make_sub("normal", normal_total, normal_viol, 0.0);
    normal.fitted_constant = detail::max_over(fitted);
    SubReport abnormal = detail::make_sub("abnormal", abnormal_total, abnormal_viol, abn_fit);
    if (abnormal.samples && abnormal.violation_fraction > th.violation) abnormal.status = "fail";
    if (normal.samples && normal.violation_fraction > th.violation) normal.status = "fail";
    r.breakdown.insert(r.breakdown.begin(), {normal, abnormal});

    const double stab = detail::stability_ratio(fitted);
    const double freq = total ? static_cast<double>(abnormal_total) / total : 0.0;
    r.samples = total;
    r.violation_fraction = normal.violation_fraction;
    r.fitted_constant = normal.fitted_constant;
    r.metric("fitted_C_kappa_first_m", first_fit);
    r.metric("fitted_C_kappa_last_m", fitted.back());
    r.metric("fitted_C_kappa_stability", stab);
    r.metric("violation_fraction_at_first_fit", normal_total ? static_cast<double>(at_first) / normal_total : 0.0);
    r.metric("abnormal_frequency", freq);
    r.metric("abnormal_frequency_prediction", std::exp(-k.c_tail * flow.U));
    r.metric("abnormal_fitted_constant", abn_fit);
    bool ok = normal.status != "fail" && abnormal.status != "fail" && stab <= th.stability;
    if (!normal.samples) {
        ok = false;
        r.notes.push_back("no normal-regime samples");
    }
    r.finish(ok);
    r.wall_seconds = clock.seconds();
    return r;
}

// ---------------------------------------------------------------------------
// Safe-zone stability

struct SafeZoneSetup {
    ZoneLayout layout;
    /// Safe zone index i >= 1.
    std::size_t zone = 1;
    double t = 1.0;
    int starts = 1000;
    /// RK4 steps (non-viscous) or noise steps (viscous).
    int steps = 1000;
    /// Noise paths per start, viscous only.
    int paths = 100;
    std::uint64_t seed = 5;
};

/// Non-viscous: every characteristic started in I_i(t) must stay in
/// I_i(t - s). Viscous: violations counted on normal-regime paths only.
inline BoundReport verify_safe_zones(const SchemeState& st, const SafeZoneSetup& s, const BoundConstants& k,
                                     const Thresholds& th) {
    detail::Stopwatch clock;
    const VelocityField& u0 = *st.u0;
    const bool viscous = st.cfg.viscous;
    const double U = u0.U();
    const LayoutReport lr = validate_layout(s.layout);
    if (!lr.pass) throw ValidationError("verify_safe_zones: invalid layout: " + lr.first_violation);
    const SafeInterval I = safe_interval(s.layout, s.zone, s.t, U, k.C, viscous);
    if (I.empty())
        throw PreconditionError("verify_safe_zones: I_" + std::to_string(s.zone) + "(" + std::to_string(s.t) +
                                ") is empty; use a smaller t or a smaller C");
    if (s.t > st.cfg.horizon() * (1.0 + 1e-12))
        throw PreconditionError("verify_safe_zones: t exceeds the iterate horizon");
    const int m_max = static_cast<int>(st.iterates.size());
    if (m_max < 1) throw PreconditionError("verify_safe_zones: iterate 0 is required");

    const int d = u0.dim();
    const auto dirs = detail::directions(d, static_cast<std::size_t>(s.starts), s.seed);
    std::vector<Vec> starts(dirs.size());
    for (std::size_t j = 0; j < dirs.size(); ++j) {
        const double frac = (static_cast<double>(j) + 0.5) / static_cast<double>(dirs.size());
        starts[j] = dirs[j] * (I.lower + frac * (I.upper - I.lower));
    }

    BoundReport r;
    r.id = "safe_zones";
    r.anchor = "safe zone stability";
    r.metric("interval_lower", I.lower);
    r.metric("interval_upper", I.upper);
    std::size_t samples = 0, violations = 0;
    double min_margin = INFINITY;
    const NoiseBank bank = viscous ? NoiseBank(s.seed, d, s.paths, s.steps, false) : NoiseBank();
    for (int m = 1; m <= m_max; ++m) {
        const GridField& prev = st.iterate(m - 1);
        std::vector<std::size_t> bad;
        std::vector<std::size_t> counted;
        std::vector<double> margin;
        if (!viscous) {
            bad.assign(starts.size(), 0);
            counted.assign(starts.size(), 1);
            margin.assign(starts.size(), INFINITY);
            // Iterate 0 is u_0 itself; later drifts are the stored grids.
            const DriftFn drift = m == 1 ? DriftFn([&u0](double, const Vec& y) { return u0(y) * -1.0; })
                                         : grid_drift(prev, -1.0);
            parallel_for(starts.size(), st.cfg.jobs, [&](std::size_t j) {
                const PathRecord rec = integrate_deterministic(drift, s.t, starts[j], s.steps);
                const StabilityResult res = stability_violations(s.layout, rec, s.zone, s.t, U, k.C, false);
                bad[j] = res.violations > 0;
                margin[j] = res.min_margin;
            });
        } else {
            const std::size_t n = starts.size() * static_cast<std::size_t>(s.paths);
            bad.assign(n, 0);
            counted.assign(n, 0);
            margin.assign(n, INFINITY);
            parallel_for(n, st.cfg.jobs, [&](std::size_t idx) {
                const std::size_t j = idx / s.paths;
                const int p = static_cast<int>(idx % s.paths);
                StochasticOptions opt;
                opt.drift_sign = -1.0;
                opt.flow = u0.flow();
                const PathRecord rec = integrate_stochastic(prev, s.t, starts[j], bank.path(p, s.t), opt);
                if (rec.regime != Regime::NormalConvective) return;
                const StabilityResult res = stability_violations(s.layout, rec, s.zone, s.t, U, k.C, true);
                counted[idx] = 1;
                bad[idx] = res.violations > 0;
                margin[idx] = res.min_margin;
            });
        }
        std::size_t ms = 0, mv = 0;
        for (std::size_t j = 0; j < bad.size(); ++j) {
            ms += counted[j];
            mv += bad[j];
            if (counted[j]) min_margin = std::min(min_margin, margin[j]);
        }
        r.breakdown.push_back(detail::make_sub("m" + std::to_string(m), ms, mv, 0.0));
        samples += ms;
        violations += mv;
    }
    r.samples = samples;
    r.violation_fraction = samples ? static_cast<double>(violations) / samples : 0.0;
    r.metric("violations", static_cast<double>(violations));
    r.metric("min_margin", min_margin);

    // Starts at the middle of the dangerous zone below the safe zone: the
    // displacement against U t |x|^{1/kappa}.
    {
        const double mid = 0.5 * (s.layout.R(2 * s.zone - 1) + s.layout.R(2 * s.zone));
        const GridField& prev = st.iterate(m_max - 1);
        const DriftFn drift = m_max == 1 ? DriftFn([&u0](double, const Vec& y) { return u0(y) * -1.0; })
                                         : grid_drift(prev, -1.0);
        double fit = 0.0;
        const std::size_t n = std::min<std::size_t>(dirs.size(), 64);
        for (std::size_t j = 0; j < n; ++j) {
            const PathRecord rec = integrate_deterministic(drift, s.t, dirs[j] * mid, s.steps);
            fit = std::max(fit, rec.max_displacement / (U * s.t * std::pow(mid, 1.0 / u0.kappa())));
        }
        SubReport dz = detail::make_sub("dangerous_start", n, 0, fit);
        dz.status = "info";
        r.breakdown.push_back(dz);
        r.fitted_constant = fit;
    }

    bool ok;
    if (!viscous) {
        ok = violations == 0;
    } else {
        const WilsonInterval w = wilson_interval(violations, samples);
        r.metric("wilson_lower", w.lower);
        r.metric("wilson_upper", w.upper);
        ok = samples > 0 && r.violation_fraction <= th.violation;
        if (!samples) r.notes.push_back("no normal-regime paths");
    }
    r.finish(ok);
    r.wall_seconds = clock.seconds();
    return r;
}

// ---------------------------------------------------------------------------
// Uniform bounds on u, grad u, hess u

namespace detail {

/// |hess u| at node n of slice j from central differences of a gradient
/// field over `stride` nodes (one-sided at the faces).
inline double hessian_norm(const GridField& g, std::size_t j, std::size_t n, int stride) {
    const SpatialGrid& grid = g.grid();
    const int d = grid.dim;
    const auto idx = grid.unflatten(n);
    double s = 0.0;
    for (int i = 0; i < d; ++i) {
        auto lo = idx, hi = idx;
        hi[i] = std::min(idx[i] + stride, grid.axes[i].n - 1);
        lo[i] = std::max(idx[i] - stride, 0);
        const double span = (hi[i] - lo[i]) * grid.axes[i].step();
        const std::size_t nl = grid.flatten(lo), nh = grid.flatten(hi);
        for (int c = 0; c < g.ncomp(); ++c) {
            const double v = (g.at(j, nh, c) - g.at(j, nl, c)) / span;
            s += v * v;
        }
    }
    return std::sqrt(s);
}

inline double node_norm(const GridField& f, std::size_t j, std::size_t n) {
    double s = 0.0;
    for (int c = 0; c < f.ncomp(); ++c) s += f.at(j, n, c) * f.at(j, n, c);
    return std::sqrt(s);
}

}  // namespace detail

/// Fits c0, c1, c2 per m on nodes with |x| <= radius and t > 0.
inline BoundReport verify_uniform_bounds(const SchemeState& st, double radius, const Thresholds& th,
                                         int hessian_stride = 2) {
    detail::Stopwatch clock;
    if (st.gradients.size() != st.iterates.size() || st.iterates.empty())
        throw PreconditionError("verify_uniform_bounds: gradients of every iterate are required");
    const VelocityField& u0 = *st.u0;
    const GrowthConstants& g = u0.constants();
    const double kappa = u0.kappa(), U = u0.U();
    const double e0 = g.e0(kappa), e1 = g.e1(kappa), e2 = 3.0 * e0;
    BoundReport r;
    r.id = "uniform_bounds";
    r.anchor = "uniform bounds on u, grad u and hess u over m";
    std::vector<double> c0s, c1s, c2s;
    std::size_t count = 0;
    for (std::size_t m = 0; m < st.iterates.size(); ++m) {
        const GridField& u = st.iterates[m];
        const GridField& G = st.gradients[m];
        double c0 = 0.0, c1 = 0.0, c2 = 0.0;
        std::size_t nodes = 0;
        for (std::size_t j = 1; j < u.slices(); ++j) {
            const double t = u.times()[j];
            for (std::size_t n = 0; n < u.nodes(); ++n) {
                const double rx = u.grid().node(n).norm();
                if (rx > radius) continue;
                ++nodes;
                const double bx = bracket_x(rx, U, t, kappa);
                c0 = std::max(c0, detail::node_norm(u, j, n) / (g.K0 * std::pow(bx, e0)));
                c1 = std::max(c1, detail::node_norm(G, j, n) / (g.K1 * std::pow(bx, e1)));
                c2 = std::max(c2, detail::hessian_norm(G, j, n, hessian_stride) / (g.K2 * std::pow(bx, e2)));
            }
        }
        c0s.push_back(c0);
        c1s.push_back(c1);
        c2s.push_back(c2);
        count += nodes;
        SubReport s = detail::make_sub("m" + std::to_string(m), nodes, 0, std::max({c0, c1, c2}));
        s.status = "info";
        r.breakdown.push_back(s);
        r.metric("c0_m" + std::to_string(m), c0);
        r.metric("c1_m" + std::to_string(m), c1);
        r.metric("c2_m" + std::to_string(m), c2);
    }
    if (count == 0) throw PreconditionError("verify_uniform_bounds: no nodes inside the radius");
    const double s0 = detail::stability_ratio(c0s), s1 = detail::stability_ratio(c1s),
                 s2 = detail::stability_ratio(c2s);
    r.metric("stability_c0", s0);
    r.metric("stability_c1", s1);
    r.metric("stability_c2", s2);
    r.samples = count;
    r.fitted_constant = std::max({detail::max_over(c0s), detail::max_over(c1s), detail::max_over(c2s)});
    r.finish(s0 <= th.stability && s1 <= th.stability && s2 <= th.stability);
    r.wall_seconds = clock.seconds();
    return r;
}

// ---------------------------------------------------------------------------
// Contraction of v^(m)

/// Least-squares slope of log sup |v^(m)| against m over m = 2..m_max on
/// t <= theta T_min(t, x); same for grad v^(m) on t <= theta T~_min when
/// gradients are stored (reported, not graded).
inline BoundReport verify_v_decay(const SchemeState& st, double C, const Thresholds& th) {
    detail::Stopwatch clock;
    const int m_max = static_cast<int>(st.iterates.size()) - 1;
    if (m_max < 3) throw PreconditionError("verify_v_decay: m_max >= 3 is required");
    const VelocityField& u0 = *st.u0;
    const GrowthConstants& g = u0.constants();
    const double kappa = u0.kappa(), U = u0.U();
    auto in_region = [&](double t, const Vec& x) {
        return t > 0.0 && t <= th.theta * t_min(C, g, kappa, U, t, x.norm());
    };
    auto in_region_tilde = [&](double t, const Vec& x) {
        return t > 0.0 && t <= th.theta * t_min_tilde(C, g, kappa, U, t, x.norm());
    };
    BoundReport r;
    r.id = "v_decay";
    r.anchor = "contraction of v^(m) and grad v^(m) in the initial time window";
    std::vector<double> ms, logs;
    bool noise = false;
    std::size_t count = 0;
    for (int m = 2; m <= m_max; ++m) {
        const GridField v = compute_v(st, m);
        const double sup = restricted_sup(v, in_region, &count);
        // Noise floor: standard errors of the two iterates on the region.
        double floor = 0.0;
        const GridField& a = st.iterate(m);
        const GridField& b = st.iterate(m - 1);
        for (std::size_t j = 0; j < a.slices(); ++j)
            for (std::size_t n = 0; n < a.nodes(); ++n) {
                if (!in_region(a.times()[j], a.grid().node(n))) continue;
                for (int c = 0; c < a.ncomp(); ++c) floor = std::max(floor, a.se(j, n, c) + b.se(j, n, c));
            }
        if (sup <= 3.0 * floor || sup == 0.0) noise = true;
        r.metric("sup_v_m" + std::to_string(m), sup);
        ms.push_back(m);
        logs.push_back(std::log(std::max(sup, 1e-300)));
    }
    if (count == 0) throw PreconditionError("verify_v_decay: the region t <= theta T_min contains no nodes");
    const LineFit fit = least_squares(ms, logs);
    const double bound = std::log(th.theta) + th.slope_slack;
    r.metric("slope", fit.slope);
    r.metric("slope_bound", bound);
    r.metric("region_nodes", static_cast<double>(count));
    r.samples = count;
    r.fitted_constant = std::exp(fit.slope);

    if (st.gradients.size() == st.iterates.size()) {
        std::vector<double> glogs;
        for (int m = 2; m <= m_max; ++m) {
            const GridField& a = st.gradient(m);
            const GridField& b = st.gradient(m - 1);
            double sup = 0.0;
            for (std::size_t j = 0; j < a.slices(); ++j)
                for (std::size_t n = 0; n < a.nodes(); ++n) {
                    if (!in_region_tilde(a.times()[j], a.grid().node(n))) continue;
                    double s2 = 0.0;
                    for (int c = 0; c < a.ncomp(); ++c) {
                        const double dv = a.at(j, n, c) - b.at(j, n, c);
                        s2 += dv * dv;
                    }
                    sup = std::max(sup, std::sqrt(s2));
                }
            glogs.push_back(std::log(std::max(sup, 1e-300)));
        }
        const LineFit gf = least_squares(ms, glogs);
        r.metric("gradient_slope", gf.slope);
        r.metric("gradient_slope_bound", st.cfg.gamma / 2.0 * std::log(th.theta) + th.slope_slack);
    }

    if (noise) {
        r.pass = false;
        r.status = "noise-dominated";
        r.notes.push_back("sup |v^(m)| at the Monte Carlo noise floor");
    } else {
        r.finish(fit.slope <= bound);
    }
    r.wall_seconds = clock.seconds();
    return r;
}

// ---------------------------------------------------------------------------
// Tail of M_t

struct MtTailSetup {
    int dim = 1;
    double t = 1.0;
    int paths = 100000;
    int steps = 1000;
    std::uint64_t seed = 3;
    double variance = kNoiseVariance;
    double a_lo = 2.0;
    double a_hi = 5.0;
    int a_points = 13;
    int jobs = 1;
};

inline BoundReport verify_mt_tail(const MtTailSetup& s, const Thresholds& th) {
    detail::Stopwatch clock;
    if (s.paths < 2 || s.steps < 1 || s.a_points < 2) throw ParameterError("verify_mt_tail: bad sample sizes");
    std::vector<double> mt(static_cast<std::size_t>(s.paths));
    parallel_for(mt.size(), s.jobs, [&](std::size_t p) {
        mt[p] = sample_brownian(derive_seed(s.seed, p), s.dim, s.t, s.steps, s.variance).m_t();
    });
    BoundReport r;
    r.id = "mt_tail";
    r.anchor = "Gaussian tail of the rescaled running maximum M_t";
    r.samples = mt.size();
    if (std::all_of(mt.begin(), mt.end(), [](double v) { return v == 1.0; })) {
        r.pass = false;
        r.status = "degenerate";
        r.notes.push_back("every M_t equals 1: the noise has zero variance");
        r.wall_seconds = clock.seconds();
        return r;
    }
    std::vector<double> sorted = mt;
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> a2, logs;
    for (int i = 0; i < s.a_points; ++i) {
        const double A = s.a_lo + (s.a_hi - s.a_lo) * i / (s.a_points - 1);
        const auto above = static_cast<std::size_t>(sorted.end() - std::upper_bound(sorted.begin(), sorted.end(), A));
        if (above == 0) continue;
        a2.push_back(A * A);
        logs.push_back(std::log(static_cast<double>(above) / mt.size()));
    }
    // Fourth moment on two disjoint halves.
    double h1 = 0.0, h2 = 0.0;
    const std::size_t half = mt.size() / 2;
    for (std::size_t p = 0; p < 2 * half; ++p) (p < half ? h1 : h2) += std::pow(mt[p], 4.0);
    h1 /= half;
    h2 /= half;
    const double split = std::abs(h1 - h2) / std::max(h1, h2);
    r.metric("fourth_moment_first_half", h1);
    r.metric("fourth_moment_second_half", h2);
    r.metric("fourth_moment_split", split);
    r.metric("tail_points", static_cast<double>(a2.size()));
    if (a2.size() < 3) {
        r.pass = false;
        r.status = "fail";
        r.notes.push_back("fewer than three nonempty tail levels");
        r.wall_seconds = clock.seconds();
        return r;
    }
    const LineFit fit = least_squares(a2, logs);
    r.metric("slope", fit.slope);
    r.metric("r2", fit.r2);
    r.metric("c", -fit.slope);
    r.fitted_constant = std::max(0.0, -fit.slope);
    r.finish(fit.slope < 0.0 && fit.r2 >= th.r2_min && split <= th.moment_split);
    r.wall_seconds = clock.seconds();
    return r;
}

// ---------------------------------------------------------------------------
// Fixed-point lemma

struct LemmaSetup {
    int samples = 1000;
    int steps = 200;
    std::uint64_t seed = 9;
};

/// Random (c1, c2, alpha, A0): every iterate of B_{n+1} = c1 + c2 B_n^alpha
/// must stay below fixed_point_bound.
inline BoundReport verify_appendix_lemma(const LemmaSetup& s) {
    detail::Stopwatch clock;
    std::mt19937_64 rng(s.seed);
    std::uniform_real_distribution<double> logu(std::log(1e-3), std::log(1e3));
    std::uniform_real_distribution<double> au(0.05, 0.95);
    BoundReport r;
    r.id = "appendix_lemma";
    r.anchor = "fixed-point bound for B_{n+1} = c1 + c2 B_n^alpha";
    std::size_t failures = 0;
    double worst = 0.0;
    for (int i = 0; i < s.samples; ++i) {
        const double c1 = std::exp(logu(rng)), c2 = std::exp(logu(rng));
        const double alpha = au(rng), A0 = std::exp(logu(rng));
        const double bound = fixed_point_bound(c1, c2, alpha, A0);
        double B = A0;
        bool bad = false;
        for (int n = 0; n <= s.steps; ++n) {
            worst = std::max(worst, B / bound);
            if (B > bound) bad = true;
            B = c1 + c2 * std::pow(B, alpha);
        }
        failures += bad;
    }
    r.samples = static_cast<std::size_t>(s.samples);
    r.violation_fraction = static_cast<double>(failures) / s.samples;
    r.fitted_constant = worst;
    r.metric("failures", static_cast<double>(failures));
    r.metric("max_iterate_over_bound", worst);
    r.finish(failures == 0);
    r.wall_seconds = clock.seconds();
    return r;
}

// ---------------------------------------------------------------------------
// Penalized corrections

struct PenalizedSetup {
    int m = 2;
    std::vector<int> levels{4, 5, 6};
    double C = 2.0;
    /// Points per level on |x| <= 2^{n-3} (per axis in d = 1).
    int points = 41;
};

/// sup |u^(m,n) - u^(m,n-1)| over |x| <= 2^{n-3}, t in {T_n / 2, T_n};
/// passes iff strictly decreasing in n.
inline BoundReport verify_penalized(const SchemeState& st, const PenalizedSetup& s) {
    detail::Stopwatch clock;
    if (!st.cfg.viscous) throw PreconditionError("verify_penalized: viscous iterates required");
    if (s.m < 1 || s.m > static_cast<int>(st.iterates.size()))
        throw PreconditionError("verify_penalized: iterate m - 1 is required");
    const VelocityField& u0 = *st.u0;
    if (u0.dim() != 1) throw PreconditionError("verify_penalized: one-dimensional field required");
    const GrowthConstants& g = u0.constants();
    BoundReport r;
    r.id = "penalized";
    r.anchor = "smallness of penalized corrections in the window t <= T_n";
    std::vector<double> sups;
    for (int n : s.levels) {
        const double R = std::ldexp(1.0, n - 3);
        const double Tn = t_n(s.C, g, u0.kappa(), n);
        std::vector<Vec> pts;
        for (int i = 0; i < s.points; ++i) pts.push_back(Vec{-R + 2.0 * R * i / (s.points - 1)});
        const PenaltySpec hi{n, s.C, g.K1, g.alpha, u0.kappa()};
        const PenaltySpec lo{n - 1, s.C, g.K1, g.alpha, u0.kappa()};
        double sup = 0.0, se = 0.0;
        for (double t : {0.5 * Tn, Tn}) {
            const auto a = evaluate_penalized(st, s.m, hi, t, pts);
            const auto b = evaluate_penalized(st, s.m, lo, t, pts);
            for (std::size_t i = 0; i < pts.size(); ++i) {
                const double dv = std::abs(a[i].value[0] - b[i].value[0]);
                if (dv >= sup) {
                    sup = dv;
                    se = a[i].se[0] + b[i].se[0];
                }
            }
        }
        sups.push_back(sup);
        r.metric("T_n" + std::to_string(n), Tn);
        r.metric("sup_n" + std::to_string(n), sup);
        r.metric("se_n" + std::to_string(n), se);
        r.samples += 2 * pts.size();
    }
    bool decreasing = true;
    for (std::size_t i = 1; i < sups.size(); ++i) decreasing = decreasing && sups[i] < sups[i - 1];
    if (std::all_of(sups.begin(), sups.end(), [](double v) { return v == 0.0; }))
        r.notes.push_back("every correction is exactly zero in double precision");
    r.fitted_constant = detail::max_over(sups);
    r.finish(decreasing);
    r.wall_seconds = clock.seconds();
    return r;
}

// ---------------------------------------------------------------------------
// Gradient representation against finite differences

/// Nodes with |x| <= radius, t > 0, m = 1..m_max: the stored gradient agrees
/// with central differences of u^(m) when the gap is within
/// max(5 SE, 3% |fd|).
inline BoundReport verify_gradient_consistency(const SchemeState& st, double radius, const Thresholds& th,
                                               int m_max = -1) {
    detail::Stopwatch clock;
    if (st.gradients.size() != st.iterates.size())
        throw PreconditionError("verify_gradient_consistency: gradients of every iterate are required");
    const int last = m_max < 0 ? static_cast<int>(st.iterates.size()) - 1 : m_max;
    BoundReport r;
    r.id = "gradient_consistency";
    r.anchor = "gradient representation against finite differences of u^(m)";
    std::size_t total = 0, agree = 0;
    double worst = 0.0;
    for (int m = 1; m <= last; ++m) {
        const GridField& u = st.iterate(m);
        const GridField& G = st.gradient(m);
        const GridField fd = fd_gradient_field(u);
        std::size_t mt = 0, ma = 0;
        for (std::size_t j = 1; j < u.slices(); ++j)
            for (std::size_t n = 0; n < u.nodes(); ++n) {
                const Vec x = u.grid().node(n);
                if (x.norm() > radius) continue;
                bool ok = true;
                for (int c = 0; c < G.ncomp(); ++c) {
                    const double gap = std::abs(G.at(j, n, c) - fd.at(j, n, c));
                    const double tol = std::max(5.0 * G.se(j, n, c), 0.03 * std::abs(fd.at(j, n, c)));
                    if (gap > tol) ok = false;
                    if (tol > 0.0) worst = std::max(worst, gap / tol);
                }
                ++mt;
                ma += ok;
            }
        SubReport sr = detail::make_sub("m" + std::to_string(m), mt, mt - ma, 0.0);
        sr.status = mt && static_cast<double>(ma) / mt >= th.agreement ? "pass" : "fail";
        r.breakdown.push_back(sr);
        total += mt;
        agree += ma;
    }
    if (total == 0) throw PreconditionError("verify_gradient_consistency: no interior nodes");
    const double frac = static_cast<double>(agree) / total;
    r.samples = total;
    r.violation_fraction = 1.0 - frac;
    r.fitted_constant = worst;
    r.metric("agreement", frac);
    r.finish(frac >= th.agreement);
    r.wall_seconds = clock.seconds();
    return r;
}

}  // namespace fkb
